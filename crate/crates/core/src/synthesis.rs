//! Existence conditions for a data-based distributed controller.
//!
//! Per vertex the primal condition is formed over columns `(x, in, l, w)`
//! with outer factor rows `x, x₊ = l + w, out, in, l, p = (x, in, u), w, z`,
//! where the control input `u` enters only through the elimination basis.
//! The dual condition uses the left annihilator of that factor in the
//! coordinates of the non-identity rows, the primal data matrices and the
//! inverted supply. Both are linear once `α` and `γ` are fixed, so `γ` is
//! bisected with an inner search over an `α` grid.

use thiserror::Error;

use crate::analysis::{assemble_scales, ScaleSet, ScaleValues};
use crate::datadriven::{dual_qmi, primal_qmi_structured, DataError, NoiseBound, QmiSet, SubsystemData};
use crate::graph::InterconnectionGraph;
use crate::lmi::{check_feasible_at, AffineSym, Assignment, LmiBuilder, LmiError, LmiProblem, Sense, SignConstraint, VarId};
use crate::matrixcore::{hstack, kernel_basis, selector, vstack, Mat, SymMat, DEFAULT_COND_LIMIT, DEFAULT_RANK_TOL};
use crate::sdpsolve::{bisect_gamma_with, solve, BisectError, BisectOptions, SolveError, SolveOptions, SolveStatus, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Bisect(#[from] BisectError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("annihilator of vertex {0} is empty")]
    DegenerateAnnihilator(usize),
    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),
}

/// Performance output `zᵢ = Cᵢᶻxᵢ + Σⱼ Cᵢⱼᶻxⱼ + Dᵢᶻuᵢ` and measurement `yᵢ = Cᵢxᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPerformance {
    pub c_z: Mat,
    /// `[Cᵢⱼᶻ]` over the neighbors in ascending order.
    pub c_z_neighbors: Mat,
    pub d_z: Mat,
    pub c_meas: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSpec {
    pub vertices: Vec<VertexPerformance>,
}

impl PerformanceSpec {
    /// `zᵢ = xᵢ`, `yᵢ = xᵢ`.
    pub fn state(g: &InterconnectionGraph, state_dims: &[usize], input_dims: &[usize]) -> Self {
        let vertices = (0..g.vertices())
            .map(|i| {
                let n = state_dims[i];
                let n_in: usize = g.neighbors(i).iter().map(|&j| state_dims[j]).sum();
                VertexPerformance {
                    c_z: Mat::identity(n, n),
                    c_z_neighbors: Mat::zeros(n, n_in),
                    d_z: Mat::zeros(n, input_dims[i]),
                    c_meas: Mat::identity(n, n),
                }
            })
            .collect();
        Self { vertices }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaGrid {
    /// `{1}`.
    Default,
    /// 13 log-spaced points on `[0.1, 10]`.
    Extended,
    Custom(Vec<f64>),
}

impl AlphaGrid {
    pub fn logspace(lo_exp: f64, hi_exp: f64, points: usize) -> Self {
        let step = if points > 1 { (hi_exp - lo_exp) / (points - 1) as f64 } else { 0.0 };
        AlphaGrid::Custom((0..points).map(|k| 10f64.powf(lo_exp + step * k as f64)).collect())
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::Default => vec![1.0],
            AlphaGrid::Extended => match AlphaGrid::logspace(-1.0, 1.0, 13) {
                AlphaGrid::Custom(v) => v,
                _ => unreachable!(),
            },
            AlphaGrid::Custom(v) => v.clone(),
        }
    }

    fn validate(&self) -> Result<Vec<f64>, SynthesisError> {
        let v = self.values();
        if v.is_empty() || v.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(SynthesisError::InvalidGrid(format!("{v:?}")));
        }
        Ok(v)
    }
}

/// Primal and dual data QMIs of every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisData {
    pub primals: Vec<QmiSet>,
    pub duals: Vec<QmiSet>,
}

impl SynthesisData {
    pub fn from_subsystems(data: &[SubsystemData], noise: &[NoiseBound]) -> Result<Self, SynthesisError> {
        if data.len() != noise.len() {
            return Err(SynthesisError::DimensionMismatch("one noise bound per subsystem required".into()));
        }
        let primals = data
            .iter()
            .zip(noise)
            .map(|(d, b)| primal_qmi_structured(d, b))
            .collect::<Result<Vec<_>, _>>()?;
        let duals = primals
            .iter()
            .map(|p| dual_qmi(p, DEFAULT_COND_LIMIT))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { primals, duals })
    }

    fn state_dims(&self) -> Vec<usize> {
        self.primals.iter().map(|q| q.dims.n).collect()
    }
}

/// Basis of `ker [C 0]` with `free_width` zero columns.
pub fn psi_basis(c: &Mat, free_width: usize) -> Mat {
    let m = hstack(&[c, &Mat::zeros(c.nrows(), free_width)]).expect("rows agree");
    kernel_basis(&m, DEFAULT_RANK_TOL)
}

/// Basis of `ker [0 I (Dᶻ)ᵀ]` with `lead_width` zero columns.
pub fn phi_basis(d_z: &Mat, lead_width: usize) -> Mat {
    let m_in = d_z.ncols();
    let m = hstack(&[&Mat::zeros(m_in, lead_width), &Mat::identity(m_in, m_in), &d_z.transpose()]).expect("rows agree");
    kernel_basis(&m, DEFAULT_RANK_TOL)
}

/// `[[P, I], [I, P̄]]`.
pub fn coupling_lmi(p: VarId, p_bar: VarId, n: usize) -> AffineSym {
    let mut c = Mat::zeros(2 * n, 2 * n);
    c.view_mut((0, n), (n, n)).fill_with_identity();
    c.view_mut((n, 0), (n, n)).fill_with_identity();
    let mut e = AffineSym::constant(SymMat::symmetrized(c));
    e.add_diag_block(p, 0, n, 1.0);
    e.add_diag_block(p_bar, n, n, 1.0);
    e
}

/// Variables of the joint problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisVars {
    pub p: Vec<VarId>,
    pub p_bar: Vec<VarId>,
    pub scales: ScaleSet,
    pub scales_bar: ScaleSet,
}

impl SynthesisVars {
    pub fn declare(b: &mut LmiBuilder, g: &InterconnectionGraph, dims: &[usize]) -> Self {
        let p = (0..g.vertices())
            .map(|i| b.sym_var(&format!("P_{i}"), dims[i], SignConstraint::PosDef))
            .collect();
        let p_bar = (0..g.vertices())
            .map(|i| b.sym_var(&format!("Pbar_{i}"), dims[i], SignConstraint::PosDef))
            .collect();
        Self {
            p,
            p_bar,
            scales: ScaleSet::declare(b, g, dims, "X"),
            scales_bar: ScaleSet::declare(b, g, dims, "Xbar"),
        }
    }
}

/// Row layout of the vertex outer factor.
struct Layout {
    n: usize,
    n_in: usize,
    nz: usize,
    d: usize,
    f: Mat,
    /// Offsets of the `x, x₊, out, in, l, p, w, z` rows.
    r_x: usize,
    r_xp: usize,
    r_out: usize,
    r_l: usize,
    r_w: usize,
    r_z: usize,
}

impl Layout {
    fn new(q: &QmiSet, spec: &VertexPerformance, d: usize) -> Self {
        let (n, m) = (q.dims.n, q.dims.m);
        let n_in = q.dims.neighbor_total();
        let nz = spec.c_z.nrows();
        let cols = n + n_in + n + n;
        let (cx, cin, cl, cw) = (0, n, n + n_in, n + n_in + n);
        let sel = |off: usize, w: usize| selector(off, w, cols);
        let mut rows: Vec<Mat> = Vec::new();
        let mut off = 0;
        let mut push = |m: Mat, rows: &mut Vec<Mat>| {
            let o = off;
            off += m.nrows();
            rows.push(m);
            o
        };
        let r_x = push(sel(cx, n), &mut rows);
        let r_xp = push(&sel(cl, n) + &sel(cw, n), &mut rows);
        let x_sel = sel(cx, n);
        let out = if d == 0 {
            Mat::zeros(0, cols)
        } else {
            vstack(&vec![&x_sel; d]).expect("cols agree")
        };
        let r_out = push(out, &mut rows);
        push(sel(cin, n_in), &mut rows);
        let r_l = push(sel(cl, n), &mut rows);
        push(vstack(&[&sel(cx, n), &sel(cin, n_in), &Mat::zeros(m, cols)]).expect("cols agree"), &mut rows);
        let r_w = push(sel(cw, n), &mut rows);
        let z = hstack(&[&spec.c_z, &spec.c_z_neighbors, &Mat::zeros(nz, 2 * n)]).expect("rows agree");
        let r_z = push(z, &mut rows);
        let f = vstack(&rows.iter().collect::<Vec<_>>()).expect("cols agree");
        Self {
            n,
            n_in,
            nz,
            d,
            f,
            r_x,
            r_xp,
            r_out,
            r_l,
            r_w,
            r_z,
        }
    }

    fn dim(&self) -> usize {
        self.f.nrows()
    }

    /// Rows on which the factor is the identity, in column order `(x, in, l, w)`.
    fn input_rows(&self) -> Vec<usize> {
        let r_in = self.r_out + self.d * self.n;
        (self.r_x..self.r_x + self.n)
            .chain(r_in..r_in + self.n_in)
            .chain(self.r_l..self.r_l + self.n)
            .chain(self.r_w..self.r_w + self.n)
            .collect()
    }

    fn output_rows(&self) -> Vec<usize> {
        let inputs = self.input_rows();
        (0..self.dim()).filter(|r| !inputs.contains(r)).collect()
    }

    /// `G` with `G[inputs] = −Hᵀ`, `G[outputs] = I`, so that `Gᵀ F = 0`.
    fn annihilator(&self) -> Mat {
        let outputs = self.output_rows();
        let h = Mat::from_fn(outputs.len(), self.f.ncols(), |r, c| self.f[(outputs[r], c)]);
        let mut g = Mat::zeros(self.dim(), outputs.len());
        for (k, &r) in self.input_rows().iter().enumerate() {
            for c in 0..outputs.len() {
                g[(r, c)] = -h[(c, k)];
            }
        }
        for (c, &r) in outputs.iter().enumerate() {
            g[(r, c)] = 1.0;
        }
        g
    }

    /// Offset of the `u` rows within the output coordinates.
    fn u_in_outputs(&self) -> usize {
        // Outputs are x₊, out, p = (x, in, u), z.
        self.n + self.d * self.n + self.n + self.n_in
    }
}

/// Middle matrix shared by both conditions.
#[allow(clippy::too_many_arguments)]
fn middle(
    lay: &Layout,
    g: &InterconnectionGraph,
    dims: &[usize],
    i: usize,
    p: VarId,
    scales: &ScaleSet,
    data: &QmiSet,
    data_weight: f64,
    w_weight: f64,
) -> AffineSym {
    let dim = lay.dim();
    let mut mid = AffineSym::zeros(dim);
    mid.add_diag_block(p, lay.r_x, lay.n, -1.0);
    mid.add_diag_block(p, lay.r_xp, lay.n, 1.0);
    if lay.d > 0 {
        let sb = assemble_scales(g, dims, scales, i);
        mid.add_expr(&sb.z.congruence(&selector(lay.r_out, sb.out_dim + sb.in_dim, dim)));
    }
    let top = hstack(&[data.r.as_mat(), &data.s.transpose()]).expect("rows agree");
    let bot = hstack(&[&data.s, data.q.as_mat()]).expect("rows agree");
    let block = vstack(&[&top, &bot]).expect("cols agree") * (-data_weight);
    mid.add_constant_block(lay.r_l, &SymMat::symmetrized(block));
    mid.add_constant_block(lay.r_w, &SymMat::identity(lay.n).scale(-w_weight));
    mid.add_constant_block(lay.r_z, &SymMat::identity(lay.nz));
    mid
}

fn check_vertex(q: &QmiSet, spec: &VertexPerformance, g: &InterconnectionGraph, i: usize) -> Result<(), SynthesisError> {
    let (n, m) = (q.dims.n, q.dims.m);
    let n_in = q.dims.neighbor_total();
    let nz = spec.c_z.nrows();
    let ok = spec.c_z.ncols() == n
        && spec.c_z_neighbors.shape() == (nz, n_in)
        && spec.d_z.shape() == (nz, m)
        && spec.c_meas.ncols() == n
        && q.dims.neighbor_dims.len() == g.neighbors(i).len();
    if !ok {
        return Err(SynthesisError::DimensionMismatch(format!(
            "vertex {i}: performance spec does not fit n = {n}, m = {m}, neighbor width {n_in}"
        )));
    }
    Ok(())
}

/// Primal condition `Ψᵀ Fᵀ M F Ψ`, required `≺ 0`.
#[allow(clippy::too_many_arguments)]
pub fn build_synthesis_primal(
    dual: &QmiSet,
    spec: &VertexPerformance,
    g: &InterconnectionGraph,
    dims: &[usize],
    i: usize,
    vars: &SynthesisVars,
    alpha: f64,
    gamma: f64,
) -> Result<AffineSym, SynthesisError> {
    check_vertex(dual, spec, g, i)?;
    let lay = Layout::new(dual, spec, g.neighbors(i).len());
    let psi = psi_basis(&spec.c_meas, lay.n_in + 2 * lay.n);
    if psi.ncols() == 0 {
        return Err(SynthesisError::DegenerateAnnihilator(i));
    }
    let mid = middle(&lay, g, dims, i, vars.p[i], &vars.scales, dual, alpha, gamma * gamma);
    Ok(mid.congruence(&(&lay.f * &psi)))
}

/// Dual condition `Φᵀ Gᵀ M̄ G Φ`, required `≻ 0`.
#[allow(clippy::too_many_arguments)]
pub fn build_synthesis_dual(
    primal: &QmiSet,
    spec: &VertexPerformance,
    g: &InterconnectionGraph,
    dims: &[usize],
    i: usize,
    vars: &SynthesisVars,
    beta: f64,
    gamma: f64,
) -> Result<AffineSym, SynthesisError> {
    check_vertex(primal, spec, g, i)?;
    let lay = Layout::new(primal, spec, g.neighbors(i).len());
    let ann = lay.annihilator();
    if ann.ncols() == 0 {
        return Err(SynthesisError::DegenerateAnnihilator(i));
    }
    let phi = phi_basis(&spec.d_z, lay.u_in_outputs());
    debug_assert_eq!(phi.nrows(), ann.ncols());
    if phi.ncols() == 0 {
        return Err(SynthesisError::DegenerateAnnihilator(i));
    }
    let mid = middle(&lay, g, dims, i, vars.p_bar[i], &vars.scales_bar, primal, beta, 1.0 / (gamma * gamma));
    Ok(mid.congruence(&(&ann * &phi)))
}

/// Joint problem at fixed `(α, γ)`; one `α` for every vertex.
pub fn build_synthesis_problem(
    data: &SynthesisData,
    g: &InterconnectionGraph,
    spec: &PerformanceSpec,
    alpha: f64,
    gamma: f64,
) -> Result<LmiProblem, SynthesisError> {
    let l = g.vertices();
    if data.primals.len() != l || data.duals.len() != l || spec.vertices.len() != l {
        return Err(SynthesisError::DimensionMismatch(format!(
            "data for {} vertices, spec for {}, graph has {l}",
            data.primals.len(),
            spec.vertices.len()
        )));
    }
    let dims = data.state_dims();
    let mut b = LmiBuilder::new();
    let vars = SynthesisVars::declare(&mut b, g, &dims);
    for i in 0..l {
        let sp = &spec.vertices[i];
        let e9 = build_synthesis_primal(&data.duals[i], sp, g, &dims, i, &vars, alpha, gamma)?;
        b.constrain(&format!("primal_{i}"), e9, Sense::NegDef);
        let e10 = build_synthesis_dual(&data.primals[i], sp, g, &dims, i, &vars, 1.0 / alpha, gamma)?;
        b.constrain(&format!("dual_{i}"), e10, Sense::PosDef);
        b.constrain(&format!("coupling_{i}"), coupling_lmi(vars.p[i], vars.p_bar[i], dims[i]), Sense::PosSemiDef);
    }
    Ok(b.build()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisWitness {
    pub gamma: f64,
    pub alpha: f64,
    pub p: Vec<Mat>,
    pub p_bar: Vec<Mat>,
    pub scales: ScaleValues,
    pub scales_bar: ScaleValues,
    /// Controller interconnection dimensions `n_ij = 3nᵢ`, per vertex.
    pub controller_link_dims: Vec<usize>,
    pub problem: LmiProblem,
    pub assignment: Assignment,
}

impl SynthesisWitness {
    pub fn replay(&self, tol: f64) -> bool {
        check_feasible_at(&self.problem, &self.assignment, tol).is_ok_and(|r| r.pass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisOutcome {
    Feasible(Box<SynthesisWitness>),
    /// No grid point satisfied the conditions.
    Unknown,
    Inconclusive(String),
}

fn extract_scales(problem: &LmiProblem, g: &InterconnectionGraph, prefix: &str, a: &Assignment) -> ScaleValues {
    let mut s = ScaleValues::default();
    for &(lo, hi) in g.edges() {
        for (i, j) in [(lo, hi), (hi, lo)] {
            let id = problem.var_by_name(&format!("{prefix}11_{i}_{j}")).expect("declared");
            s.x11.insert((i, j), a[&id].clone());
        }
        let id = problem.var_by_name(&format!("{prefix}12_{hi}_{lo}")).expect("declared");
        s.x12.insert((hi, lo), a[&id].clone());
    }
    s
}

/// Try every grid value at level `γ`; the first feasible one wins.
pub fn certify_synthesis_existence(
    data: &SynthesisData,
    g: &InterconnectionGraph,
    spec: &PerformanceSpec,
    gamma: f64,
    grid: &AlphaGrid,
    opts: &SolveOptions,
) -> Result<SynthesisOutcome, SynthesisError> {
    let alphas = grid.validate()?;
    let mut inconclusive = None;
    for alpha in alphas {
        let problem = build_synthesis_problem(data, g, spec, alpha, gamma)?;
        let out = solve(&problem, opts)?;
        match (out.status, out.assignment) {
            (SolveStatus::Feasible | SolveStatus::Optimal, Some(a)) => {
                let l = g.vertices();
                let get = |name: String| a[&problem.var_by_name(&name).expect("declared")].clone();
                let w = SynthesisWitness {
                    gamma,
                    alpha,
                    p: (0..l).map(|i| get(format!("P_{i}"))).collect(),
                    p_bar: (0..l).map(|i| get(format!("Pbar_{i}"))).collect(),
                    scales: extract_scales(&problem, g, "X", &a),
                    scales_bar: extract_scales(&problem, g, "Xbar", &a),
                    controller_link_dims: data.state_dims().iter().map(|n| 3 * n).collect(),
                    problem,
                    assignment: a,
                };
                return Ok(SynthesisOutcome::Feasible(Box::new(w)));
            }
            (SolveStatus::Inconclusive, _) => {
                inconclusive = Some(format!("alpha = {alpha}: {}", out.diagnostic.unwrap_or_default()));
            }
            _ => {}
        }
    }
    Ok(match inconclusive {
        Some(msg) => SynthesisOutcome::Inconclusive(msg),
        None => SynthesisOutcome::Unknown,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub solve: SolveOptions,
    pub bisect: BisectOptions,
    pub grid: AlphaGrid,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            bisect: BisectOptions::new(1e-3),
            grid: AlphaGrid::Default,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub gamma: f64,
    pub witness: SynthesisWitness,
    /// Largest level not found certifiable.
    pub lower: f64,
    pub bracket_uncertain: bool,
    pub evaluations: usize,
}

/// Smallest certifiable `γ` in `[lo, hi]`, up to the bisection tolerance.
pub fn min_gamma_synthesis(
    data: &SynthesisData,
    g: &InterconnectionGraph,
    spec: &PerformanceSpec,
    (lo, hi): (f64, f64),
    opts: &SynthesisOptions,
) -> Result<SynthesisResult, SynthesisError> {
    opts.grid.validate()?;
    let mut err = None;
    let pred = |gamma: f64| match certify_synthesis_existence(data, g, spec, gamma, &opts.grid, &opts.solve) {
        Ok(SynthesisOutcome::Feasible(w)) => Verdict::Feasible(*w),
        Ok(SynthesisOutcome::Unknown) => Verdict::Infeasible,
        Ok(SynthesisOutcome::Inconclusive(m)) => Verdict::Inconclusive(m),
        Err(e) => {
            let msg = e.to_string();
            err.get_or_insert(e);
            Verdict::Inconclusive(msg)
        }
    };
    let res = bisect_gamma_with(pred, lo, hi, &opts.bisect);
    if let Some(e) = err {
        return Err(e);
    }
    let r = res?;
    Ok(SynthesisResult {
        gamma: r.gamma,
        witness: r.witness,
        lower: r.lower,
        bracket_uncertain: r.bracket_uncertain,
        evaluations: r.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::eval_at;
    use crate::matrixcore::numerical_rank;
    use crate::truthoracle::{generate_experiment, random_cycle_system, ExperimentConfig, NoiseModel, SystemModel};

    fn cycle_data(l: usize, sigma: f64, seed: u64) -> (SystemModel, SynthesisData, InterconnectionGraph) {
        let sys = random_cycle_system(l, (0.0, 1.0), (0.0, 0.1), seed).unwrap();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, sigma, NoiseModel::Interval, seed + 1)).unwrap();
        let d = SynthesisData::from_subsystems(&e.subsystems, &e.subsystem_bounds).unwrap();
        let g = sys.structure.as_ref().unwrap().graph.clone();
        (sys, d, g)
    }

    #[test]
    fn psi_for_state_measurement() {
        let psi = psi_basis(&Mat::identity(2, 2), 3);
        assert_eq!(psi.shape(), (5, 3));
        assert!(psi.rows(0, 2).amax() < 1e-12);
        let all = psi_basis(&Mat::zeros(1, 2), 3);
        assert_eq!(all.ncols(), 5);
        let partial = psi_basis(&Mat::from_row_slice(1, 2, &[1.0, 0.0]), 2);
        assert_eq!(partial.ncols(), 3);
        let c = hstack(&[&Mat::from_row_slice(1, 2, &[1.0, 0.0]), &Mat::zeros(1, 2)]).unwrap();
        assert!((c * &partial).amax() < 1e-12);
        assert_eq!(numerical_rank(&partial, 1e-9), 3);
    }

    #[test]
    fn phi_kernels() {
        let phi0 = phi_basis(&Mat::zeros(1, 1), 2);
        assert_eq!(phi0.ncols(), 3);
        assert!(phi0.row(2).amax() < 1e-12);
        let phi1 = phi_basis(&Mat::identity(1, 1), 0);
        assert_eq!(phi1.ncols(), 1);
        assert!((phi1[(0, 0)] + phi1[(1, 0)]).abs() < 1e-12);
        let dz = Mat::from_row_slice(2, 2, &[0.3, -1.2, 0.7, 2.0]);
        let phi = phi_basis(&dz, 3);
        let m = hstack(&[&Mat::zeros(2, 3), &Mat::identity(2, 2), &dz.transpose()]).unwrap();
        assert_eq!(phi.ncols(), 5);
        assert!((m * phi).amax() <= 1e-10);
    }

    #[test]
    fn coupling_examples() {
        let mut b = LmiBuilder::new();
        let p = b.sym_var("P", 1, SignConstraint::None);
        let q = b.sym_var("Q", 1, SignConstraint::None);
        let e = coupling_lmi(p, q, 1);
        let mut a = Assignment::new();
        a.insert(p, Mat::identity(1, 1));
        a.insert(q, Mat::identity(1, 1));
        let eig = eval_at(&e, b.decls(), &a).unwrap().eigenvalues();
        assert!((eig[0]).abs() < 1e-12 && (eig[1] - 2.0).abs() < 1e-12);
        a.insert(q, Mat::identity(1, 1) * 0.5);
        assert!(eval_at(&e, b.decls(), &a).unwrap().min_eigenvalue() < 0.0);
    }

    #[test]
    fn annihilator_is_exact() {
        let (_, d, g) = cycle_data(3, 0.05, 9);
        let sp = PerformanceSpec::state(&g, &[1, 1, 1], &[1, 1, 1]);
        let lay = Layout::new(&d.primals[0], &sp.vertices[0], 2);
        let ann = lay.annihilator();
        assert!((ann.transpose() * &lay.f).amax() < 1e-14);
        // Rows x, x₊, out(2), in(2), l, p(4), w, z; columns x, in(2), l, w.
        assert_eq!(lay.f.shape(), (13, 5));
        assert_eq!(ann.ncols(), 13 - 5);
    }

    #[test]
    fn example_vertex_dimension_audit() {
        let (_, d, g) = cycle_data(4, 0.05, 3);
        let dims = [1, 1, 1, 1];
        let sp = PerformanceSpec::state(&g, &dims, &[1, 1, 1, 1]);
        let mut b = LmiBuilder::new();
        let vars = SynthesisVars::declare(&mut b, &g, &dims);
        let e9 = build_synthesis_primal(&d.duals[0], &sp.vertices[0], &g, &dims, 0, &vars, 1.0, 2.0).unwrap();
        let e10 = build_synthesis_dual(&d.primals[0], &sp.vertices[0], &g, &dims, 0, &vars, 1.0, 2.0).unwrap();
        // Ψ drops the measured x column; Φ drops u from the 8 output coordinates.
        assert_eq!(e9.dim(), 4);
        assert_eq!(e10.dim(), 7);
    }

    #[test]
    fn loose_level_feasible_and_replays() {
        let (_, d, g) = cycle_data(3, 1e-3, 5);
        let sp = PerformanceSpec::state(&g, &[1, 1, 1], &[1, 1, 1]);
        let out = certify_synthesis_existence(&d, &g, &sp, 100.0, &AlphaGrid::Default, &SolveOptions::default()).unwrap();
        let SynthesisOutcome::Feasible(w) = out else {
            panic!("expected feasible, got {out:?}");
        };
        assert!(w.replay(1e-7));
        assert_eq!(w.controller_link_dims, vec![3, 3, 3]);
        for (p, pb) in w.p.iter().zip(&w.p_bar) {
            let m = vstack(&[&hstack(&[p, &Mat::identity(1, 1)]).unwrap(), &hstack(&[&Mat::identity(1, 1), pb]).unwrap()])
                .unwrap();
            assert!(SymMat::symmetrized(m).min_eigenvalue() >= -1e-7);
        }
    }

    #[test]
    fn finer_grid_never_worse() {
        let (_, d, g) = cycle_data(3, 0.05, 11);
        let sp = PerformanceSpec::state(&g, &[1, 1, 1], &[1, 1, 1]);
        let coarse = min_gamma_synthesis(&d, &g, &sp, (0.1, 100.0), &SynthesisOptions::default()).unwrap();
        let fine = min_gamma_synthesis(
            &d,
            &g,
            &sp,
            (0.1, 100.0),
            &SynthesisOptions {
                grid: AlphaGrid::Custom(vec![0.5, 1.0, 2.0]),
                ..SynthesisOptions::default()
            },
        )
        .unwrap();
        assert!(fine.gamma <= coarse.gamma * (1.0 + 2e-3), "{} vs {}", fine.gamma, coarse.gamma);
        assert!(fine.witness.replay(1e-7));
    }

    #[test]
    fn single_vertex_near_noiseless() {
        // z = x₊ contains w directly, so no controller beats 1; doing nothing gives
        // the open-loop gain of (A, I, I, 0).
        use crate::truthoracle::{as_single_vertex, hinf_norm};
        let a = Mat::from_row_slice(2, 2, &[0.8, 0.2, -0.1, 0.7]);
        let open = SystemModel::lumped(a.clone(), Mat::identity(2, 2), Mat::identity(2, 2), Mat::zeros(2, 2)).unwrap();
        let sys = as_single_vertex(&SystemModel::lumped(a, Mat::from_row_slice(2, 1, &[1.0, 0.5]), Mat::identity(2, 2), Mat::zeros(2, 1)).unwrap());
        let e = generate_experiment(&sys, &ExperimentConfig::new(40, 1e-4, NoiseModel::Interval, 2)).unwrap();
        let d = SynthesisData::from_subsystems(&e.subsystems, &e.subsystem_bounds).unwrap();
        let g = InterconnectionGraph::edgeless(1);
        let sp = PerformanceSpec::state(&g, &[2], &[1]);
        let opts = SynthesisOptions {
            grid: AlphaGrid::logspace(-6.0, 2.0, 17),
            ..SynthesisOptions::default()
        };
        let r = min_gamma_synthesis(&d, &g, &sp, (0.1, 100.0), &opts).unwrap();
        let bench = hinf_norm(&open).unwrap();
        assert!(r.gamma >= 1.0 - 1e-3, "{}", r.gamma);
        assert!(r.gamma <= 1.1 * bench, "{} vs {bench}", r.gamma);
        assert!(r.witness.replay(1e-7));
    }

    #[test]
    fn bad_grid_rejected() {
        let (_, d, g) = cycle_data(3, 0.05, 1);
        let sp = PerformanceSpec::state(&g, &[1, 1, 1], &[1, 1, 1]);
        let bad = SynthesisOptions {
            grid: AlphaGrid::Custom(vec![]),
            ..SynthesisOptions::default()
        };
        assert!(matches!(
            min_gamma_synthesis(&d, &g, &sp, (0.1, 10.0), &bad),
            Err(SynthesisError::InvalidGrid(_))
        ));
        assert_eq!(AlphaGrid::Extended.values().len(), 13);
        assert!((AlphaGrid::Extended.values()[6] - 1.0).abs() < 1e-12);
    }
}
