//! Data-based dissipativity and H∞ certification, lumped and interconnected.
//!
//! The lumped condition is `Fᵀ M F ≺ 0` over columns `(x, l, u)` with the
//! outer factor rows `x, l | l, (x, u) | u, y` and middle
//! `diag(−P, P | −α[[R_D, S_Dᵀ], [S_D, Q_D]] | −[[Q, S], [Sᵀ, R]])`.
//! The interconnected condition adds, per vertex, the channels
//! `out = 𝟏 ⊗ xᵢ` and `in = x_{𝒩ᵢ}` weighted by edge scales that cancel
//! when the vertex conditions are summed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::datadriven::{
    dual_qmi, primal_qmi_lumped, primal_qmi_structured, DataError, NoiseBound, QmiKind, QmiSet, SubsystemData,
    TrajectoryData,
};
use crate::graph::InterconnectionGraph;
use crate::lmi::{check_feasible_at, AffineSym, Assignment, LmiBuilder, LmiError, LmiProblem, Sense, SignConstraint, VarId};
use crate::matrixcore::{
    block_diag, definiteness, hstack, selector, vstack, Definiteness, Mat, SymMat, DEFAULT_COND_LIMIT,
};
use crate::sdpsolve::{solve, SolveError, SolveOptions, SolveOutcome, SolveStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("dual Q block of vertex {vertex} is not negative definite ({definiteness:?})")]
    DualQNotNegative { vertex: usize, definiteness: Definiteness },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Quadratic supply `[u; y]ᵀ [[Q, S], [Sᵀ, R]] [u; y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyRate {
    pub q: SymMat,
    pub s: Mat,
    pub r: SymMat,
}

impl SupplyRate {
    /// `Q = γ²I`, `S = 0`, `R = −I`.
    pub fn hinf(gamma: f64, m: usize, p: usize) -> Self {
        Self {
            q: SymMat::identity(m).scale(gamma * gamma),
            s: Mat::zeros(m, p),
            r: -&SymMat::identity(p),
        }
    }

    fn stacked(&self) -> SymMat {
        let top = hstack(&[self.q.as_mat(), &self.s]).expect("rows agree");
        let bot = hstack(&[&self.s.transpose(), self.r.as_mat()]).expect("rows agree");
        SymMat::symmetrized(vstack(&[&top, &bot]).expect("cols agree"))
    }
}

/// How the performance level enters the problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Performance {
    /// Fixed supply rate; feasibility only.
    Supply(SupplyRate),
    /// H∞ supply with `t = γ²` minimized.
    MinimizeHinf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub solve: SolveOptions,
    pub cond_limit: f64,
    /// Reject vertices whose dual `Q` block is not negative definite.
    pub require_negative_q_d: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            cond_limit: DEFAULT_COND_LIMIT,
            require_negative_q_d: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertStatus {
    /// Conditions satisfied; the bound holds for every data-consistent system.
    Certified,
    /// Conditions infeasible; nothing can be concluded.
    Unknown,
    Inconclusive,
}

/// Problem and solver point, kept for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub problem: LmiProblem,
    pub assignment: Assignment,
}

impl Witness {
    pub fn replay(&self, tol: f64) -> bool {
        check_feasible_at(&self.problem, &self.assignment, tol).is_ok_and(|r| r.pass)
    }
}

/// Numeric scale blocks keyed like [`ScaleSet`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleValues {
    pub x11: BTreeMap<(usize, usize), Mat>,
    pub x12: BTreeMap<(usize, usize), Mat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationResult {
    pub status: CertStatus,
    /// Certified level (`√t` of the returned point) when minimizing.
    pub gamma: Option<f64>,
    pub p: Vec<Mat>,
    pub alpha: Vec<f64>,
    pub scales: ScaleValues,
    pub witness: Option<Witness>,
    pub iterations: usize,
    pub gap: f64,
    pub diagnostic: Option<String>,
    /// Definiteness of each dual `Q` block (one entry per vertex).
    pub q_d_definiteness: Vec<Definiteness>,
}

/// Edge-indexed scale variables.
///
/// `x11[(i, j)]` weights vertex `i`'s outgoing channel to `j` (size `nᵢ`);
/// `x12[(hi, lo)]` is the single cross block of edge `{hi, lo}` (`n_hi × n_lo`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleSet {
    pub x11: BTreeMap<(usize, usize), VarId>,
    pub x12: BTreeMap<(usize, usize), VarId>,
}

impl ScaleSet {
    pub fn declare(b: &mut LmiBuilder, g: &InterconnectionGraph, dims: &[usize], prefix: &str) -> Self {
        let mut s = ScaleSet::default();
        for &(lo, hi) in g.edges() {
            for (i, j) in [(lo, hi), (hi, lo)] {
                let v = b.sym_var(&format!("{prefix}11_{i}_{j}"), dims[i], SignConstraint::None);
                s.x11.insert((i, j), v);
            }
            let v = b.rect_var(&format!("{prefix}12_{hi}_{lo}"), dims[hi], dims[lo]);
            s.x12.insert((hi, lo), v);
        }
        s
    }

    pub fn values(&self, a: &Assignment) -> ScaleValues {
        ScaleValues {
            x11: self.x11.iter().map(|(k, v)| (*k, a[v].clone())).collect(),
            x12: self.x12.iter().map(|(k, v)| (*k, a[v].clone())).collect(),
        }
    }
}

/// `[[Zᵢ¹¹, Zᵢ¹²], [Zᵢ¹²ᵀ, Zᵢ²²]]` on the `(out, in)` channels of vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleBlocks {
    pub z: AffineSym,
    pub out_dim: usize,
    pub in_dim: usize,
}

/// Assemble the scales of vertex `i`; blocks exist for neighbors only.
pub fn assemble_scales(g: &InterconnectionGraph, dims: &[usize], vars: &ScaleSet, i: usize) -> ScaleBlocks {
    let nb = g.neighbors(i);
    let ni = dims[i];
    let out_dim = ni * nb.len();
    let in_dim: usize = nb.iter().map(|&j| dims[j]).sum();
    let mut z = AffineSym::zeros(out_dim + in_dim);
    let mut in_off = out_dim;
    for (k, &j) in nb.iter().enumerate() {
        let out_off = k * ni;
        let nj = dims[j];
        z.add_diag_block(vars.x11[&(i, j)], out_off, ni, -1.0);
        z.add_diag_block(vars.x11[&(j, i)], in_off, nj, 1.0);
        if j <= i {
            z.add_offdiag_block(vars.x12[&(i, j)], (out_off, ni), (in_off, nj), -1.0);
        } else {
            // (X_ji¹²)ᵀ at (out, in) is X_ji¹² at (in, out).
            z.add_offdiag_block(vars.x12[&(j, i)], (in_off, nj), (out_off, ni), 1.0);
        }
        in_off += nj;
    }
    ScaleBlocks { z, out_dim, in_dim }
}

/// Outer factor accumulated row block by row block.
#[derive(Debug, Default)]
struct Outer {
    blocks: Vec<Mat>,
    rows: usize,
}

impl Outer {
    fn push(&mut self, m: Mat) -> usize {
        let off = self.rows;
        self.rows += m.nrows();
        self.blocks.push(m);
        off
    }

    fn build(&self) -> Mat {
        vstack(&self.blocks.iter().collect::<Vec<_>>()).expect("equal column counts")
    }
}

/// `−[[R_D, S_Dᵀ], [S_D, Q_D]]` on the contiguous `(l, p)` rows.
fn data_block(dual: &QmiSet) -> SymMat {
    let top = hstack(&[dual.r.as_mat(), &dual.s.transpose()]).expect("rows agree");
    let bot = hstack(&[&dual.s, dual.q.as_mat()]).expect("rows agree");
    SymMat::symmetrized(-vstack(&[&top, &bot]).expect("cols agree"))
}

fn embed(block: &SymMat, offset: usize, dim: usize) -> SymMat {
    let mut m = Mat::zeros(dim, dim);
    m.view_mut((offset, offset), (block.dim(), block.dim())).copy_from(block.as_mat());
    SymMat::symmetrized(m)
}

struct VertexVars {
    p: VarId,
    alpha: VarId,
}

/// Vertex condition over columns `(x, in, l, u)`. With no neighbors this is
/// exactly the lumped condition over `(x, l, u)`.
#[allow(clippy::too_many_arguments)]
fn vertex_expression(
    dual: &QmiSet,
    c: &Mat,
    d: &Mat,
    vars: &VertexVars,
    scales: Option<&ScaleBlocks>,
    n_neighbors: usize,
    perf: &Performance,
    t: Option<VarId>,
) -> AffineSym {
    let n = dual.dims.n;
    let m = dual.dims.m;
    let n_in = dual.dims.neighbor_total();
    let p_out = c.nrows();
    let cols = n + n_in + n + m;
    let (cx, cin, cl, cu) = (0, n, n + n_in, n + n_in + n);
    let sel = |off: usize, w: usize| selector(off, w, cols);

    let mut outer = Outer::default();
    let r_x = outer.push(sel(cx, n));
    let r_xp = outer.push(sel(cl, n));
    let x_sel = sel(cx, n);
    let out_block = if n_neighbors == 0 {
        Mat::zeros(0, cols)
    } else {
        vstack(&vec![&x_sel; n_neighbors]).expect("cols agree")
    };
    let r_out = outer.push(out_block);
    outer.push(sel(cin, n_in));
    let r_l = outer.push(sel(cl, n));
    outer.push(vstack(&[&sel(cx, n), &sel(cin, n_in), &sel(cu, m)]).expect("cols agree"));
    let r_u = outer.push(sel(cu, m));
    let y = hstack(&[c, &Mat::zeros(p_out, n_in + n), d]).expect("rows agree");
    outer.push(y);
    let f = outer.build();
    let dim = f.nrows();

    let mut mid = AffineSym::zeros(dim);
    mid.add_diag_block(vars.p, r_x, n, -1.0);
    mid.add_diag_block(vars.p, r_xp, n, 1.0);
    if let Some(sb) = scales {
        let s = selector(r_out, sb.out_dim + sb.in_dim, dim);
        mid.add_expr(&sb.z.congruence(&s));
    }
    mid.add_scaled(vars.alpha, &embed(&data_block(dual), r_l, dim));
    match perf {
        Performance::Supply(sr) => {
            mid.add_constant_block(r_u, &-&sr.stacked());
        }
        Performance::MinimizeHinf => {
            let t = t.expect("t declared when minimizing");
            mid.add_scaled(t, &embed(&-&SymMat::identity(m), r_u, dim));
            mid.add_constant_block(r_u + m, &SymMat::identity(p_out));
        }
    }
    mid.congruence(&f)
}

fn check_dual(q: &QmiSet, lumped: bool) -> Result<(), AnalysisError> {
    let ok = if lumped {
        q.kind == QmiKind::DualLumped
    } else {
        matches!(q.kind, QmiKind::DualStructured(_) | QmiKind::DualLumped)
    };
    if !ok {
        return Err(AnalysisError::Data(DataError::WrongKind {
            expected: "dual",
            got: q.kind,
        }));
    }
    Ok(())
}

/// Lumped dissipativity problem in `P ≻ 0`, `α > 0` (and `t` when minimizing).
pub fn build_dissipativity_lmi(dual: &QmiSet, c: &Mat, d: &Mat, perf: &Performance) -> Result<LmiProblem, AnalysisError> {
    check_dual(dual, true)?;
    check_output_dims(dual, c, d, perf)?;
    let dual = dual.normalized();
    let mut b = LmiBuilder::new();
    let p = b.sym_var("P", dual.dims.n, SignConstraint::PosDef);
    let alpha = b.scalar_var("alpha", SignConstraint::PosDef);
    let t = declare_t(&mut b, perf);
    let e = vertex_expression(&dual, c, d, &VertexVars { p, alpha }, None, 0, perf, t);
    b.constrain("dissipativity", e, Sense::NegDef);
    Ok(b.build()?)
}

fn declare_t(b: &mut LmiBuilder, perf: &Performance) -> Option<VarId> {
    match perf {
        Performance::MinimizeHinf => {
            let t = b.scalar_var("t", SignConstraint::NonNegative);
            b.minimize_term(t, 1.0);
            Some(t)
        }
        Performance::Supply(_) => None,
    }
}

fn check_output_dims(dual: &QmiSet, c: &Mat, d: &Mat, perf: &Performance) -> Result<(), AnalysisError> {
    let (n, m) = (dual.dims.n, dual.dims.m);
    if c.ncols() != n || d.shape() != (c.nrows(), m) {
        return Err(AnalysisError::DimensionMismatch(format!(
            "C {:?} and D {:?} do not fit n = {n}, m = {m}",
            c.shape(),
            d.shape()
        )));
    }
    if let Performance::Supply(s) = perf {
        if s.q.dim() != m || s.r.dim() != c.nrows() || s.s.shape() != (m, c.nrows()) {
            return Err(AnalysisError::DimensionMismatch("supply rate does not fit (u, y)".into()));
        }
    }
    Ok(())
}

fn to_result(
    outcome: SolveOutcome,
    problem: LmiProblem,
    p_ids: &[VarId],
    alpha_ids: &[VarId],
    scales: Option<&ScaleSet>,
    minimizing: bool,
    q_d_definiteness: Vec<Definiteness>,
) -> CertificationResult {
    let status = match outcome.status {
        SolveStatus::Optimal | SolveStatus::Feasible => CertStatus::Certified,
        SolveStatus::Infeasible => CertStatus::Unknown,
        SolveStatus::Inconclusive => CertStatus::Inconclusive,
    };
    let mut res = CertificationResult {
        status,
        gamma: None,
        p: Vec::new(),
        alpha: Vec::new(),
        scales: ScaleValues::default(),
        witness: None,
        iterations: outcome.iterations,
        gap: outcome.gap,
        diagnostic: outcome.diagnostic.clone(),
        q_d_definiteness,
    };
    if let Some(a) = outcome.assignment {
        res.p = p_ids.iter().map(|id| a[id].clone()).collect();
        res.alpha = alpha_ids.iter().map(|id| a[id][(0, 0)]).collect();
        if let Some(s) = scales {
            res.scales = s.values(&a);
        }
        if minimizing {
            let t = problem.var_by_name("t").map(|id| a[&id][(0, 0)]);
            res.gamma = t.map(|t| t.max(0.0).sqrt());
        }
        res.witness = Some(Witness {
            problem,
            assignment: a,
        });
    }
    res
}

/// Dual parameterization from lumped data.
pub fn lumped_dual(data: &TrajectoryData, noise: &NoiseBound, cond_limit: f64) -> Result<QmiSet, AnalysisError> {
    Ok(dual_qmi(&primal_qmi_lumped(data, noise)?, cond_limit)?)
}

pub fn certify_dissipativity(
    data: &TrajectoryData,
    noise: &NoiseBound,
    c: &Mat,
    d: &Mat,
    supply: &SupplyRate,
    opts: &AnalysisOptions,
) -> Result<CertificationResult, AnalysisError> {
    let dual = lumped_dual(data, noise, opts.cond_limit)?;
    certify_lumped(&dual, c, d, &Performance::Supply(supply.clone()), opts)
}

pub fn hinf_bound_unstructured(
    data: &TrajectoryData,
    noise: &NoiseBound,
    c: &Mat,
    d: &Mat,
    opts: &AnalysisOptions,
) -> Result<CertificationResult, AnalysisError> {
    let dual = lumped_dual(data, noise, opts.cond_limit)?;
    certify_lumped(&dual, c, d, &Performance::MinimizeHinf, opts)
}

/// Solve the lumped problem for an already-built dual QMI.
pub fn certify_lumped(
    dual: &QmiSet,
    c: &Mat,
    d: &Mat,
    perf: &Performance,
    opts: &AnalysisOptions,
) -> Result<CertificationResult, AnalysisError> {
    let qd = definiteness(&dual.q, 1e-9);
    let problem = build_dissipativity_lmi(dual, c, d, perf)?;
    let outcome = solve(&problem, &opts.solve)?;
    let p = problem.var_by_name("P").expect("declared");
    let a = problem.var_by_name("alpha").expect("declared");
    Ok(to_result(
        outcome,
        problem,
        &[p],
        &[a],
        None,
        matches!(perf, Performance::MinimizeHinf),
        vec![qd],
    ))
}

/// Per-vertex outputs `yᵢ = Cᵢxᵢ + Dᵢuᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexOutput {
    pub c: Mat,
    pub d: Mat,
}

/// Joint problem: one constraint per vertex, coupled through the scales.
pub fn build_interconnected_lmi(
    duals: &[QmiSet],
    g: &InterconnectionGraph,
    outputs: &[VertexOutput],
    perf: &Performance,
    opts: &AnalysisOptions,
) -> Result<(LmiProblem, Vec<Definiteness>), AnalysisError> {
    let l = g.vertices();
    if duals.len() != l || outputs.len() != l {
        return Err(AnalysisError::DimensionMismatch(format!(
            "{} duals and {} outputs for {l} vertices",
            duals.len(),
            outputs.len()
        )));
    }
    let dims: Vec<usize> = duals.iter().map(|q| q.dims.n).collect();
    let mut qds = Vec::with_capacity(l);
    for (i, q) in duals.iter().enumerate() {
        check_dual(q, false)?;
        check_output_dims(q, &outputs[i].c, &outputs[i].d, perf)?;
        let nd: Vec<usize> = g.neighbors(i).iter().map(|&j| dims[j]).collect();
        if nd != q.dims.neighbor_dims {
            return Err(AnalysisError::DimensionMismatch(format!(
                "vertex {i}: data neighbor dims {:?} disagree with graph {:?}",
                q.dims.neighbor_dims, nd
            )));
        }
        let def = definiteness(&q.q, 1e-9);
        if def != Definiteness::NegativeDefinite {
            if opts.require_negative_q_d {
                return Err(AnalysisError::DualQNotNegative {
                    vertex: i,
                    definiteness: def,
                });
            }
            log::debug!("vertex {i}: dual Q block is {def:?}");
        }
        qds.push(def);
    }
    let mut b = LmiBuilder::new();
    let vars: Vec<VertexVars> = (0..l)
        .map(|i| VertexVars {
            p: b.sym_var(&format!("P_{i}"), dims[i], SignConstraint::PosDef),
            alpha: b.scalar_var(&format!("alpha_{i}"), SignConstraint::PosDef),
        })
        .collect();
    let scales = ScaleSet::declare(&mut b, g, &dims, "X");
    let t = declare_t(&mut b, perf);
    for i in 0..l {
        let sb = assemble_scales(g, &dims, &scales, i);
        let nb = g.neighbors(i).len();
        let dual = duals[i].normalized();
        let e = vertex_expression(&dual, &outputs[i].c, &outputs[i].d, &vars[i], Some(&sb), nb, perf, t);
        b.constrain(&format!("vertex_{i}"), e, Sense::NegDef);
    }
    Ok((b.build()?, qds))
}

pub fn structured_duals(
    data: &[SubsystemData],
    noise: &[NoiseBound],
    cond_limit: f64,
) -> Result<Vec<QmiSet>, AnalysisError> {
    if data.len() != noise.len() {
        return Err(AnalysisError::DimensionMismatch("one noise bound per subsystem required".into()));
    }
    data.iter()
        .zip(noise)
        .map(|(d, b)| Ok(dual_qmi(&primal_qmi_structured(d, b)?, cond_limit)?))
        .collect()
}

pub fn certify_interconnected(
    duals: &[QmiSet],
    g: &InterconnectionGraph,
    outputs: &[VertexOutput],
    perf: &Performance,
    opts: &AnalysisOptions,
) -> Result<CertificationResult, AnalysisError> {
    let (problem, qds) = build_interconnected_lmi(duals, g, outputs, perf, opts)?;
    let outcome = solve(&problem, &opts.solve)?;
    let l = g.vertices();
    let p: Vec<VarId> = (0..l).map(|i| problem.var_by_name(&format!("P_{i}")).unwrap()).collect();
    let a: Vec<VarId> = (0..l).map(|i| problem.var_by_name(&format!("alpha_{i}")).unwrap()).collect();
    let mut scales = ScaleSet::default();
    for &(lo, hi) in g.edges() {
        for (i, j) in [(lo, hi), (hi, lo)] {
            scales.x11.insert((i, j), problem.var_by_name(&format!("X11_{i}_{j}")).unwrap());
        }
        scales.x12.insert((hi, lo), problem.var_by_name(&format!("X12_{hi}_{lo}")).unwrap());
    }
    Ok(to_result(
        outcome,
        problem,
        &p,
        &a,
        Some(&scales),
        matches!(perf, Performance::MinimizeHinf),
        qds,
    ))
}

pub fn hinf_bound_structured(
    data: &[SubsystemData],
    noise: &[NoiseBound],
    g: &InterconnectionGraph,
    outputs: &[VertexOutput],
    opts: &AnalysisOptions,
) -> Result<CertificationResult, AnalysisError> {
    let duals = structured_duals(data, noise, opts.cond_limit)?;
    certify_interconnected(&duals, g, outputs, &Performance::MinimizeHinf, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustReport {
    /// Largest eigenvalue of the model-based condition per sample.
    pub max_eigenvalues: Vec<f64>,
    pub violations: usize,
}

/// Evaluate `[I 0; A B]ᵀ diag(−P, P) [I 0; A B] + [0 I; C D]ᵀ (−Π_s) [0 I; C D]`
/// at each member `(A, B)`; every value must be negative definite.
pub fn verify_robust_witness(p: &Mat, samples: &[(Mat, Mat)], c: &Mat, d: &Mat, supply: &SupplyRate) -> RobustReport {
    let n = p.nrows();
    let mut out = Vec::with_capacity(samples.len());
    for (a, b) in samples {
        let m = b.ncols();
        let top = hstack(&[&Mat::identity(n, n), &Mat::zeros(n, m)]).expect("rows agree");
        let ab = hstack(&[a, b]).expect("rows agree");
        let uy_top = hstack(&[&Mat::zeros(m, n), &Mat::identity(m, m)]).expect("rows agree");
        let cd = hstack(&[c, d]).expect("rows agree");
        let val = -top.transpose() * p * &top + ab.transpose() * p * &ab;
        let uy = vstack(&[&uy_top, &cd]).expect("cols agree");
        let val = val - uy.transpose() * supply.stacked().as_mat() * &uy;
        out.push(SymMat::symmetrized(val).max_eigenvalue());
    }
    let violations = out.iter().filter(|&&v| v >= 0.0).count();
    RobustReport {
        max_eigenvalues: out,
        violations,
    }
}

/// Block-diagonal `P` of an interconnected witness, for lumped replay.
pub fn global_p(res: &CertificationResult) -> Mat {
    block_diag(&res.p.iter().collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datadriven::membership_dual;
    use crate::lmi::{eval_at, lower_to_sdp};
    use crate::truthoracle::{example1_structured, example1_system, generate_experiment, ExperimentConfig, NoiseModel};

    fn example_dual(sigma: f64, seed: u64) -> (QmiSet, TrajectoryData, NoiseBound) {
        let e = generate_experiment(&example1_system(), &ExperimentConfig::new(50, sigma, NoiseModel::Ball, seed)).unwrap();
        let dual = lumped_dual(&e.simulation.data, &e.lumped_bound, DEFAULT_COND_LIMIT).unwrap();
        (dual, e.simulation.data, e.lumped_bound)
    }

    #[test]
    fn lumped_dimension_audit() {
        let (dual, ..) = example_dual(0.1, 1);
        let prob = build_dissipativity_lmi(&dual, &Mat::identity(3, 3), &Mat::zeros(3, 3), &Performance::MinimizeHinf)
            .unwrap();
        let main = &prob.constraints()[0];
        assert_eq!(main.expr.dim(), 9);
        // Middle matrix is 21x21 and the outer factor 21x9.
        assert_eq!(main.expr.terms()[0].left.ncols(), 3);
        let l = lower_to_sdp(&prob).unwrap();
        assert_eq!(l.var_map.len(), 6 + 1 + 1);
    }

    #[test]
    fn loose_and_impossible_levels() {
        let (_, data, noise) = example_dual(0.1, 2);
        let (c, d) = (Mat::identity(3, 3), Mat::zeros(3, 3));
        let opts = AnalysisOptions::default();
        let loose = certify_dissipativity(&data, &noise, &c, &d, &SupplyRate::hinf(10.0, 3, 3), &opts).unwrap();
        assert_eq!(loose.status, CertStatus::Certified);
        let w = loose.witness.as_ref().unwrap();
        assert!(w.replay(1e-7));
        let v = eval_at(&w.problem.constraints()[0].expr, w.problem.variables(), &w.assignment).unwrap();
        assert_eq!(definiteness(&v, 0.0), Definiteness::NegativeDefinite);
        let tight = certify_dissipativity(&data, &noise, &c, &d, &SupplyRate::hinf(1.0, 3, 3), &opts).unwrap();
        assert_ne!(tight.status, CertStatus::Certified);
    }

    #[test]
    fn non_dissipative_supply_is_not_certified() {
        // Supply −|u|² − |y|² can never be met by a nontrivial system.
        let (_, data, noise) = example_dual(0.05, 3);
        let supply = SupplyRate {
            q: -&SymMat::identity(3),
            s: Mat::zeros(3, 3),
            r: -&SymMat::identity(3),
        };
        let r = certify_dissipativity(&data, &noise, &Mat::identity(3, 3), &Mat::zeros(3, 3), &supply, &AnalysisOptions::default())
            .unwrap();
        assert_ne!(r.status, CertStatus::Certified);
    }

    #[test]
    fn robust_witness_holds_on_members() {
        let (dual, data, noise) = example_dual(0.1, 4);
        let (c, d) = (Mat::identity(3, 3), Mat::zeros(3, 3));
        let r = hinf_bound_unstructured(&data, &noise, &c, &d, &AnalysisOptions::default()).unwrap();
        let g = r.gamma.unwrap();
        let sys = example1_system();
        let mut samples = vec![(sys.a.clone(), sys.b.clone())];
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        while samples.len() < 40 {
            let da = Mat::from_fn(3, 3, |_, _| rng.random_range(-0.05..0.05));
            let a = &sys.a + da;
            if membership_dual(&a, &sys.b, &dual).unwrap() {
                samples.push((a, sys.b.clone()));
            }
        }
        let rep = verify_robust_witness(&r.p[0], &samples, &c, &d, &SupplyRate::hinf(g, 3, 3));
        assert_eq!(rep.violations, 0, "{:?}", rep.max_eigenvalues);
    }

    #[test]
    fn scales_for_single_edge() {
        let g = InterconnectionGraph::new(2, &[(0, 1)]).unwrap();
        let mut b = LmiBuilder::new();
        let s = ScaleSet::declare(&mut b, &g, &[1, 1], "X");
        assert_eq!(s.x11.len(), 2);
        assert_eq!(s.x12.len(), 1);
        let mut a = Assignment::new();
        a.insert(s.x11[&(0, 1)], Mat::from_element(1, 1, 2.0));
        a.insert(s.x11[&(1, 0)], Mat::from_element(1, 1, 3.0));
        a.insert(s.x12[&(1, 0)], Mat::from_element(1, 1, 5.0));
        let z0 = eval_at(&assemble_scales(&g, &[1, 1], &s, 0).z, b.decls(), &a).unwrap();
        let z1 = eval_at(&assemble_scales(&g, &[1, 1], &s, 1).z, b.decls(), &a).unwrap();
        // Z0 = [[−X01, X10¹²ᵀ], [·, X10]], Z1 = [[−X10, −X10¹²], [·, X01]].
        assert_eq!(z0.as_mat(), &Mat::from_row_slice(2, 2, &[-2.0, 5.0, 5.0, 3.0]));
        assert_eq!(z1.as_mat(), &Mat::from_row_slice(2, 2, &[-3.0, -5.0, -5.0, 2.0]));
    }

    #[test]
    fn cycle_scale_count() {
        let g = InterconnectionGraph::cycle(3).unwrap();
        let mut b = LmiBuilder::new();
        let s = ScaleSet::declare(&mut b, &g, &[1, 1, 1], "X");
        assert_eq!(s.x11.len(), 6);
        for i in 0..3 {
            let sb = assemble_scales(&g, &[1, 1, 1], &s, i);
            assert_eq!((sb.out_dim, sb.in_dim), (2, 2));
        }
    }

    #[test]
    fn interconnection_terms_cancel() {
        // Σᵢ [out; in]ᵀ Zᵢ [out; in] vanishes for any scales and states.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let g = InterconnectionGraph::cycle(4).unwrap();
        let dims = [1, 2, 1, 2];
        let mut b = LmiBuilder::new();
        let s = ScaleSet::declare(&mut b, &g, &dims, "X");
        let mut a = Assignment::new();
        for d in b.decls() {
            let (r, c) = d.kind.shape();
            let m = Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            a.insert(d.id, if r == c { (&m + m.transpose()) * 0.5 } else { m });
        }
        let x: Vec<Mat> = dims.iter().map(|&n| Mat::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0))).collect();
        let mut total = 0.0;
        for i in 0..4 {
            let sb = assemble_scales(&g, &dims, &s, i);
            let z = eval_at(&sb.z, b.decls(), &a).unwrap();
            let nb = g.neighbors(i);
            let mut parts: Vec<&Mat> = nb.iter().map(|_| &x[i]).collect();
            parts.extend(nb.iter().map(|&j| &x[j]));
            let v = vstack(&parts).unwrap();
            total += (v.transpose() * z.as_mat() * &v)[(0, 0)];
        }
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn structured_dimension_audit() {
        let sys = example1_structured();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, 0.1, NoiseModel::Ball, 5)).unwrap();
        let duals = structured_duals(&e.subsystems, &e.subsystem_bounds, DEFAULT_COND_LIMIT).unwrap();
        let g = sys.structure.as_ref().unwrap().graph.clone();
        let outputs: Vec<VertexOutput> =
            (0..3).map(|_| VertexOutput { c: Mat::identity(1, 1), d: Mat::zeros(1, 1) }).collect();
        let (prob, _) =
            build_interconnected_lmi(&duals, &g, &outputs, &Performance::MinimizeHinf, &AnalysisOptions::default())
                .unwrap();
        let mains: Vec<usize> = prob
            .constraints()
            .iter()
            .filter(|c| c.label.starts_with("vertex_"))
            .map(|c| c.expr.dim())
            .collect();
        // Columns (x, in, l, u): 1 + |N| + 1 + 1.
        assert_eq!(mains, vec![4, 5, 4]);
    }

    #[test]
    fn strict_mode_rejects_indefinite_q_d() {
        let sys = example1_structured();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, 0.1, NoiseModel::Ball, 6)).unwrap();
        let duals = structured_duals(&e.subsystems, &e.subsystem_bounds, DEFAULT_COND_LIMIT).unwrap();
        let g = sys.structure.as_ref().unwrap().graph.clone();
        let outputs: Vec<VertexOutput> =
            (0..3).map(|_| VertexOutput { c: Mat::identity(1, 1), d: Mat::zeros(1, 1) }).collect();
        let strict = AnalysisOptions {
            require_negative_q_d: true,
            ..AnalysisOptions::default()
        };
        let any_indefinite = duals.iter().any(|q| definiteness(&q.q, 1e-9) != Definiteness::NegativeDefinite);
        let r = build_interconnected_lmi(&duals, &g, &outputs, &Performance::MinimizeHinf, &strict);
        assert_eq!(r.is_err(), any_indefinite);
    }
}
