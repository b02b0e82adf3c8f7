//! Data matrices, noise sets and the QMI parameterizations of all systems
//! consistent with noisy input-state data.
//!
//! For data `X₊ = A X₋ + B U₋ + W₋` with `W₋ᵀ` in the noise set, the primal
//! form is `P̄ = F Π_w Fᵀ` with `F = [[Z, 0], [X₊, I]]`, `Z = [X₋; U₋]`, and
//! `[A B]` is consistent iff `[−[A B]ᵀ; I]ᵀ P̄ [−[A B]ᵀ; I] ⪰ 0`. The dual form
//! uses `Π_D = P̄⁻¹` and tests `[I; [A B]]ᵀ Π_D [I; [A B]] ⪯ 0`. Subsystems use
//! the same construction with `Z = [Xᵢ₋; X_{𝒩ᵢ}₋; Uᵢ₋]`.

pub mod io;

use thiserror::Error;

use crate::matrixcore::{
    definiteness, hstack, numerical_rank, sym_inverse, vstack, Definiteness, Mat, MatrixError, SymMat,
    DEFAULT_RANK_TOL,
};

/// Relative tolerance for QMI sign decisions.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("data are not informative: [X-; U-] has rank {rank}, needs {needed}")]
    NotInformative { rank: usize, needed: usize },
    #[error("noise weight Q_w is not negative definite")]
    NotStrictlyBounded,
    #[error("invalid noise level {0}; must be positive and finite")]
    InvalidNoiseLevel(f64),
    #[error("primal Q block is not negative definite ({0:?})")]
    PrimalQNotNegative(Definiteness),
    #[error("dual R block is not positive definite ({0:?})")]
    DualityViolation(Definiteness),
    #[error("expected a {expected} QMI, got {got:?}")]
    WrongKind { expected: &'static str, got: QmiKind },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed data file: {0}")]
    Format(String),
}

/// Samples `x(0..N)` and inputs `u(0..N−1)` of one (sub)system.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    x: Mat,
    u_minus: Mat,
}

pub fn split_trajectory(x: Mat, u: Mat) -> Result<TrajectoryData, DataError> {
    if u.ncols() == 0 || x.ncols() != u.ncols() + 1 {
        return Err(DataError::LengthMismatch(format!(
            "state has {} samples, input has {}; need N+1 and N with N >= 1",
            x.ncols(),
            u.ncols()
        )));
    }
    Ok(TrajectoryData { x, u_minus: u })
}

impl TrajectoryData {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.u_minus.nrows()
    }

    /// Number of transitions `N`.
    pub fn samples(&self) -> usize {
        self.u_minus.ncols()
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn x_minus(&self) -> Mat {
        self.x.columns(0, self.samples()).into_owned()
    }

    pub fn x_plus(&self) -> Mat {
        self.x.columns(1, self.samples()).into_owned()
    }

    pub fn u_minus(&self) -> &Mat {
        &self.u_minus
    }
}

/// Local data of subsystem `i` with the past states of its neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemData {
    pub index: usize,
    pub own: TrajectoryData,
    neighbors: Vec<usize>,
    neighbor_dims: Vec<usize>,
    x_n_minus: Mat,
}

impl SubsystemData {
    /// `neighbors` pairs each neighbor id with its full state record
    /// `X_j` (`n_j × (N+1)`) or its past states `X_j₋` (`n_j × N`).
    /// Blocks are stacked in ascending neighbor id.
    pub fn new(index: usize, own: TrajectoryData, neighbors: &[(usize, &Mat)]) -> Result<Self, DataError> {
        let n_s = own.samples();
        let mut sorted: Vec<(usize, &Mat)> = neighbors.to_vec();
        sorted.sort_by_key(|(j, _)| *j);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) || sorted.iter().any(|(j, _)| *j == index) {
            return Err(DataError::DimensionMismatch(
                "neighbor ids must be distinct and differ from the subsystem".into(),
            ));
        }
        let mut blocks = Vec::with_capacity(sorted.len());
        for (j, xj) in &sorted {
            let c = xj.ncols();
            if c != n_s && c != n_s + 1 {
                return Err(DataError::LengthMismatch(format!(
                    "neighbor {j} has {c} samples, subsystem has N = {n_s}"
                )));
            }
            blocks.push(xj.columns(0, n_s).into_owned());
        }
        let refs: Vec<&Mat> = blocks.iter().collect();
        let x_n_minus = if refs.is_empty() {
            Mat::zeros(0, n_s)
        } else {
            vstack(&refs)?
        };
        Ok(Self {
            index,
            own,
            neighbors: sorted.iter().map(|(j, _)| *j).collect(),
            neighbor_dims: blocks.iter().map(|b| b.nrows()).collect(),
            x_n_minus,
        })
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn neighbor_dims(&self) -> &[usize] {
        &self.neighbor_dims
    }

    pub fn x_n_minus(&self) -> &Mat {
        &self.x_n_minus
    }
}

/// Noise set `{W : [Wᵀ; I]ᵀ [[Q_w, S_w], [S_wᵀ, R_w]] [Wᵀ; I] ⪰ 0}`, `W` is n×N.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBound {
    q_w: SymMat,
    s_w: Mat,
    r_w: SymMat,
}

impl NoiseBound {
    pub fn new(q_w: SymMat, s_w: Mat, r_w: SymMat) -> Result<Self, DataError> {
        if s_w.shape() != (q_w.dim(), r_w.dim()) {
            return Err(DataError::DimensionMismatch(format!(
                "S_w is {}x{}, expected {}x{}",
                s_w.nrows(),
                s_w.ncols(),
                q_w.dim(),
                r_w.dim()
            )));
        }
        if definiteness(&q_w, MEMBERSHIP_TOL) != Definiteness::NegativeDefinite {
            return Err(DataError::NotStrictlyBounded);
        }
        Ok(Self { q_w, s_w, r_w })
    }

    pub fn q_w(&self) -> &SymMat {
        &self.q_w
    }

    pub fn s_w(&self) -> &Mat {
        &self.s_w
    }

    pub fn r_w(&self) -> &SymMat {
        &self.r_w
    }

    /// Number of samples `N`.
    pub fn samples(&self) -> usize {
        self.q_w.dim()
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.r_w.dim()
    }

    pub fn stacked(&self) -> SymMat {
        let top = hstack(&[self.q_w.as_mat(), &self.s_w]).expect("rows agree");
        let bot = hstack(&[&self.s_w.transpose(), self.r_w.as_mat()]).expect("rows agree");
        SymMat::symmetrized(vstack(&[&top, &bot]).expect("cols agree"))
    }
}

fn psd_at_tolerance(m: &SymMat) -> bool {
    let ev = m.eigenvalues();
    let Some(&lmin) = ev.first() else {
        return true;
    };
    lmin >= -MEMBERSHIP_TOL * (1.0 + m.norm2())
}

pub fn noise_membership(w: &Mat, b: &NoiseBound) -> Result<bool, DataError> {
    if w.shape() != (b.n(), b.samples()) {
        return Err(DataError::DimensionMismatch(format!(
            "noise record is {}x{}, bound expects {}x{}",
            w.nrows(),
            w.ncols(),
            b.n(),
            b.samples()
        )));
    }
    let ws = w * &b.s_w;
    let m = w * b.q_w.as_mat() * w.transpose() + &ws + ws.transpose() + b.r_w.as_mat();
    Ok(psd_at_tolerance(&SymMat::symmetrized(m)))
}

/// `Q_w = −I_N`, `S_w = 0`, `R_w = Nσ²I_n`; holds whenever every `‖w(k)‖₂ ≤ σ`.
pub fn energy_bound(sigma: f64, samples: usize, n: usize) -> Result<NoiseBound, DataError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(DataError::InvalidNoiseLevel(sigma));
    }
    if samples == 0 {
        return Err(DataError::LengthMismatch("N must be at least 1".into()));
    }
    NoiseBound::new(
        -&SymMat::identity(samples),
        Mat::zeros(samples, n),
        SymMat::identity(n).scale(samples as f64 * sigma * sigma),
    )
}

/// Energy bound for componentwise noise `|w_r(k)| ≤ σ`, i.e. `‖w(k)‖₂ ≤ σ√n`.
pub fn box_energy_bound(sigma: f64, samples: usize, n: usize) -> Result<NoiseBound, DataError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(DataError::InvalidNoiseLevel(sigma));
    }
    energy_bound(sigma * (n as f64).sqrt(), samples, n)
}

/// Cross-covariance bound with `Q_w = −(1/N) R₋ᵀR₋`, `S_w = 0`.
pub fn instrumental_bound(r_instr: &Mat, r_w: SymMat, samples: usize) -> Result<NoiseBound, DataError> {
    if r_instr.ncols() != samples {
        return Err(DataError::DimensionMismatch(format!(
            "instrument matrix has {} columns, expected N = {samples}",
            r_instr.ncols()
        )));
    }
    let q = SymMat::symmetrized(r_instr.transpose() * r_instr * (-1.0 / samples as f64));
    if definiteness(&q, MEMBERSHIP_TOL) != Definiteness::NegativeDefinite {
        return Err(DataError::NotStrictlyBounded);
    }
    let n = r_w.dim();
    NoiseBound::new(q, Mat::zeros(samples, n), r_w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QmiKind {
    PrimalLumped,
    DualLumped,
    PrimalStructured(usize),
    DualStructured(usize),
}

impl QmiKind {
    pub fn is_primal(self) -> bool {
        matches!(self, QmiKind::PrimalLumped | QmiKind::PrimalStructured(_))
    }

    fn dual(self) -> QmiKind {
        match self {
            QmiKind::PrimalLumped => QmiKind::DualLumped,
            QmiKind::PrimalStructured(i) => QmiKind::DualStructured(i),
            other => other,
        }
    }
}

/// Block sizes: parameters are `[A N_blocks B]` with `A` n×n, `B` n×m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QmiDims {
    pub n: usize,
    pub m: usize,
    pub neighbor_dims: Vec<usize>,
}

impl QmiDims {
    pub fn neighbor_total(&self) -> usize {
        self.neighbor_dims.iter().sum()
    }

    /// Column count of the parameter matrix.
    pub fn k(&self) -> usize {
        self.n + self.neighbor_total() + self.m
    }
}

/// Quadratic matrix inequality set given by a partitioned `(Q, S, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QmiSet {
    pub kind: QmiKind,
    pub q: SymMat,
    pub s: Mat,
    pub r: SymMat,
    pub dims: QmiDims,
}

impl QmiSet {
    pub fn from_stacked(kind: QmiKind, stacked: &SymMat, dims: QmiDims) -> Result<Self, DataError> {
        let k = dims.k();
        if stacked.dim() != k + dims.n {
            return Err(DataError::DimensionMismatch(format!(
                "stacked QMI matrix is {0}x{0}, expected {1}x{1}",
                stacked.dim(),
                k + dims.n
            )));
        }
        let m = stacked.as_mat();
        Ok(Self {
            kind,
            q: SymMat::symmetrized(m.view((0, 0), (k, k)).into_owned()),
            s: m.view((0, k), (k, dims.n)).into_owned(),
            r: SymMat::symmetrized(m.view((k, k), (dims.n, dims.n)).into_owned()),
            dims,
        })
    }

    pub fn stacked(&self) -> SymMat {
        let top = hstack(&[self.q.as_mat(), &self.s]).expect("rows agree");
        let bot = hstack(&[&self.s.transpose(), self.r.as_mat()]).expect("rows agree");
        SymMat::symmetrized(vstack(&[&top, &bot]).expect("cols agree"))
    }

    /// Copy with every block multiplied by `c > 0`; the set is unchanged.
    pub fn scaled(&self, c: f64) -> QmiSet {
        QmiSet {
            kind: self.kind,
            q: self.q.scale(c),
            s: &self.s * c,
            r: self.r.scale(c),
            dims: self.dims.clone(),
        }
    }

    /// Same set with blocks normalized to unit max-entry.
    pub fn normalized(&self) -> QmiSet {
        let s = self.stacked().as_mat().amax();
        if s > 0.0 {
            self.scaled(1.0 / s)
        } else {
            self.clone()
        }
    }
}

fn check_informative(z: &Mat) -> Result<(), DataError> {
    let rank = numerical_rank(z, DEFAULT_RANK_TOL);
    if rank < z.nrows() {
        return Err(DataError::NotInformative {
            rank,
            needed: z.nrows(),
        });
    }
    Ok(())
}

/// `[X₋; U₋]` has full row rank.
pub fn informativity_check(d: &TrajectoryData) -> bool {
    let z = vstack(&[&d.x_minus(), d.u_minus()]).expect("same sample count");
    check_informative(&z).is_ok()
}

/// `[Xᵢ₋; X_{𝒩ᵢ}₋; Uᵢ₋]` has full row rank.
pub fn informativity_check_structured(d: &SubsystemData) -> bool {
    check_informative(&structured_regressor(d)).is_ok()
}

fn structured_regressor(d: &SubsystemData) -> Mat {
    vstack(&[&d.own.x_minus(), &d.x_n_minus, d.own.u_minus()]).expect("same sample count")
}

fn primal_from(z: &Mat, x_plus: &Mat, b: &NoiseBound, kind: QmiKind, dims: QmiDims) -> Result<QmiSet, DataError> {
    let n = x_plus.nrows();
    if b.samples() != z.ncols() || b.n() != n {
        return Err(DataError::DimensionMismatch(format!(
            "noise bound is for N = {}, n = {}; data have N = {}, n = {}",
            b.samples(),
            b.n(),
            z.ncols(),
            n
        )));
    }
    check_informative(z)?;
    let k = z.nrows();
    let mut f = Mat::zeros(k + n, z.ncols() + n);
    f.view_mut((0, 0), z.shape()).copy_from(z);
    f.view_mut((k, 0), x_plus.shape()).copy_from(x_plus);
    f.view_mut((k, z.ncols()), (n, n)).fill_with_identity();
    let stacked = SymMat::symmetrized(&f * b.stacked().as_mat() * f.transpose());
    let set = QmiSet::from_stacked(kind, &stacked, dims)?;
    let d = definiteness(&set.q, MEMBERSHIP_TOL);
    if d != Definiteness::NegativeDefinite {
        return Err(DataError::PrimalQNotNegative(d));
    }
    Ok(set)
}

pub fn primal_qmi_lumped(d: &TrajectoryData, b: &NoiseBound) -> Result<QmiSet, DataError> {
    let z = vstack(&[&d.x_minus(), d.u_minus()])?;
    let dims = QmiDims {
        n: d.n(),
        m: d.m(),
        neighbor_dims: Vec::new(),
    };
    primal_from(&z, &d.x_plus(), b, QmiKind::PrimalLumped, dims)
}

pub fn primal_qmi_structured(d: &SubsystemData, b: &NoiseBound) -> Result<QmiSet, DataError> {
    let dims = QmiDims {
        n: d.own.n(),
        m: d.own.m(),
        neighbor_dims: d.neighbor_dims.clone(),
    };
    primal_from(
        &structured_regressor(d),
        &d.own.x_plus(),
        b,
        QmiKind::PrimalStructured(d.index),
        dims,
    )
}

/// Dual parameterization `Π_D = P̄⁻¹`, partitioned like the primal.
pub fn dual_qmi(q: &QmiSet, cond_limit: f64) -> Result<QmiSet, DataError> {
    if !q.kind.is_primal() {
        return Err(DataError::WrongKind {
            expected: "primal",
            got: q.kind,
        });
    }
    let inv = sym_inverse(&q.stacked(), cond_limit)?;
    let dual = QmiSet::from_stacked(q.kind.dual(), &inv, q.dims.clone())?;
    let d = definiteness(&dual.r, MEMBERSHIP_TOL);
    if d != Definiteness::PositiveDefinite {
        return Err(DataError::DualityViolation(d));
    }
    Ok(dual)
}

/// Alias of [`dual_qmi`] for subsystem sets.
pub fn dual_qmi_structured(q: &QmiSet, cond_limit: f64) -> Result<QmiSet, DataError> {
    dual_qmi(q, cond_limit)
}

fn param_matrix(blocks: &[&Mat], q: &QmiSet) -> Result<Mat, DataError> {
    let m = hstack(blocks)?;
    if m.shape() != (q.dims.n, q.dims.k()) {
        return Err(DataError::DimensionMismatch(format!(
            "parameter matrix is {}x{}, QMI expects {}x{}",
            m.nrows(),
            m.ncols(),
            q.dims.n,
            q.dims.k()
        )));
    }
    Ok(m)
}

/// `[−Mᵀ; I]ᵀ P̄ [−Mᵀ; I]` for a primal set; its PSD-ness decides membership.
pub fn primal_form(m: &Mat, q: &QmiSet) -> SymMat {
    let s = &q.s;
    let mq = m * q.q.as_mat() * m.transpose();
    let ms = m * s;
    SymMat::symmetrized(mq - &ms - ms.transpose() + q.r.as_mat())
}

/// `[I; M]ᵀ Π_D [I; M]` for a dual set; its NSD-ness decides membership.
pub fn dual_form(m: &Mat, q: &QmiSet) -> SymMat {
    let sm = &q.s * m;
    SymMat::symmetrized(q.q.as_mat() + &sm + sm.transpose() + m.transpose() * q.r.as_mat() * m)
}

/// Signed distance to the primal boundary: `λ_min / (1 + ‖form‖₂)`.
pub fn primal_margin(m: &Mat, q: &QmiSet) -> f64 {
    let f = primal_form(m, q);
    f.min_eigenvalue() / (1.0 + f.norm2())
}

/// Signed distance to the dual boundary: `−λ_max / (1 + ‖form‖₂)`.
pub fn dual_margin(m: &Mat, q: &QmiSet) -> f64 {
    let f = dual_form(m, q);
    -f.max_eigenvalue() / (1.0 + f.norm2())
}

fn expect_kind(q: &QmiSet, primal: bool) -> Result<(), DataError> {
    if q.kind.is_primal() != primal {
        return Err(DataError::WrongKind {
            expected: if primal { "primal" } else { "dual" },
            got: q.kind,
        });
    }
    Ok(())
}

pub fn membership_primal(a: &Mat, b: &Mat, q: &QmiSet) -> Result<bool, DataError> {
    expect_kind(q, true)?;
    let m = param_matrix(&[a, b], q)?;
    Ok(primal_margin(&m, q) >= -MEMBERSHIP_TOL)
}

pub fn membership_dual(a: &Mat, b: &Mat, q: &QmiSet) -> Result<bool, DataError> {
    expect_kind(q, false)?;
    let m = param_matrix(&[a, b], q)?;
    Ok(dual_margin(&m, q) >= -MEMBERSHIP_TOL)
}

pub fn membership_primal_structured(ai: &Mat, a_n: &Mat, bi: &Mat, q: &QmiSet) -> Result<bool, DataError> {
    expect_kind(q, true)?;
    let m = param_matrix(&[ai, a_n, bi], q)?;
    Ok(primal_margin(&m, q) >= -MEMBERSHIP_TOL)
}

pub fn membership_dual_structured(ai: &Mat, a_n: &Mat, bi: &Mat, q: &QmiSet) -> Result<bool, DataError> {
    expect_kind(q, false)?;
    let m = param_matrix(&[ai, a_n, bi], q)?;
    Ok(dual_margin(&m, q) >= -MEMBERSHIP_TOL)
}
