//! Dense primal-dual interior-point SDP solver and a monotone bisection driver.
//!
//! The internal engine works on the dual standard form
//! `max bᵀy s.t. Z = C − Σ yₖAₖ ⪰ 0` with primal `min ⟨C,X⟩ s.t. A(X) = b`,
//! using Nesterov–Todd scaling and a Mehrotra predictor-corrector. An LMI
//! `F₀ + Σ yₖFₖ ⪰ 0` maps to `C = F₀`, `Aₖ = −Fₖ`.
//!
//! Feasibility problems (no objective) are solved as `max s s.t. F(y) ⪰ sI,
//! s ≤ 1`, stopping as soon as `F(y)` itself is positive definite.

use nalgebra::{Cholesky, DVector};
use thiserror::Error;

use crate::lmi::{check_feasible_at, lower_to_sdp, Assignment, LmiError, LmiProblem, StandardSdp};
use crate::matrixcore::Mat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Lowering(#[from] LmiError),
    #[error("invalid solve options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Relative primal/dual residual tolerance.
    pub feas_tol: f64,
    /// Ratio below which a primal ray counts as an infeasibility certificate.
    pub infeasibility_tol: f64,
    /// Phase-1 optimum below `-phase1_threshold` is reported as infeasible.
    pub phase1_threshold: f64,
    /// Centering used when the predictor step is unusable.
    pub initial_centering: f64,
    /// Tolerance used to replay returned witnesses.
    pub replay_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            infeasibility_tol: 1e-8,
            phase1_threshold: 1e-7,
            initial_centering: 0.3,
            replay_tol: 1e-6,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        let pos = [
            self.gap_tol,
            self.feas_tol,
            self.infeasibility_tol,
            self.phase1_threshold,
            self.initial_centering,
            self.replay_tol,
        ];
        if self.max_iterations == 0 || pos.iter().any(|v| !(*v > 0.0)) {
            return Err(SolveError::InvalidOptions(
                "iteration count and all tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Objective attained within the gap tolerance.
    Optimal,
    /// Constraints satisfied; no optimality claim.
    Feasible,
    /// A dual certificate of infeasibility was found.
    Infeasible,
    /// Iteration cap, stall or numerical breakdown.
    Inconclusive,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: Option<Assignment>,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub gap: f64,
    pub diagnostic: Option<String>,
}

/// What the engine should do with a lowered problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Minimize,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawStatus {
    Optimal,
    Feasible,
    Infeasible,
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: RawStatus,
    /// Values of the standard-form scalars (empty if none were produced).
    pub y: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

/// Backend contract: solve a lowered problem in the given mode.
pub trait ConicSolver {
    fn solve_standard(&self, sdp: &StandardSdp, mode: SolveMode, opts: &SolveOptions) -> RawSolution;
}

/// The built-in dense NT interior-point engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

pub fn solve(p: &LmiProblem, opts: &SolveOptions) -> Result<SolveOutcome, SolveError> {
    solve_with(&InteriorPoint, p, opts)
}

pub fn solve_with<S: ConicSolver + ?Sized>(
    solver: &S,
    p: &LmiProblem,
    opts: &SolveOptions,
) -> Result<SolveOutcome, SolveError> {
    opts.validate()?;
    let lowered = lower_to_sdp(p)?;
    if lowered.var_map.len() > 5000 {
        log::warn!(
            "problem has {} scalar variables; dense solve will be slow",
            lowered.var_map.len()
        );
    }
    let mode = if p.has_objective() {
        SolveMode::Minimize
    } else {
        SolveMode::Feasibility
    };
    let raw = solver.solve_standard(&lowered.sdp, mode, opts);
    let mut out = SolveOutcome {
        status: SolveStatus::Inconclusive,
        assignment: None,
        objective: None,
        iterations: raw.iterations,
        gap: raw.gap,
        diagnostic: None,
    };
    match raw.status {
        RawStatus::Optimal | RawStatus::Feasible => {
            let a = lowered.var_map.to_assignment(&raw.y);
            let report = check_feasible_at(p, &a, opts.replay_tol)?;
            if !report.pass {
                out.diagnostic = Some(format!(
                    "solver point failed replay (worst margin {:.3e})",
                    report.worst_margin()
                ));
                return Ok(out);
            }
            out.status = if raw.status == RawStatus::Optimal && mode == SolveMode::Minimize {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            };
            if mode == SolveMode::Minimize {
                out.objective = Some(p.objective_value(&a)?);
            }
            out.assignment = Some(a);
        }
        RawStatus::Infeasible => out.status = SolveStatus::Infeasible,
        RawStatus::Inconclusive(msg) => out.diagnostic = Some(msg),
    }
    Ok(out)
}

/// Normalized engine data: blocks with their coefficient lists.
struct Problem {
    dims: Vec<usize>,
    c: Vec<Mat>,
    /// Per block: (variable index, Aₖⱼ).
    a: Vec<Vec<(usize, Mat)>>,
    b: Vec<f64>,
    nvars: usize,
}

impl Problem {
    fn a_op(&self, x: &[Mat]) -> Vec<f64> {
        let mut out = vec![0.0; self.nvars];
        for (j, list) in self.a.iter().enumerate() {
            for (k, ak) in list {
                out[*k] += ak.dot(&x[j]);
            }
        }
        out
    }

    fn a_adj(&self, y: &[f64]) -> Vec<Mat> {
        self.a
            .iter()
            .zip(&self.dims)
            .map(|(list, &n)| {
                let mut m = Mat::zeros(n, n);
                for (k, ak) in list {
                    m += ak * y[*k];
                }
                m
            })
            .collect()
    }

    fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

fn inner(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[Mat]) -> f64 {
    inner(a, a).sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sym(m: Mat) -> Mat {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Largest step `a ≤ 1/ε` such that `X + a·ΔX ⪰ 0`, given `X = LLᵀ`.
fn max_step(l: &Mat, dx: &Mat) -> f64 {
    let n = l.nrows();
    let linv = l
        .clone()
        .solve_lower_triangular(&Mat::identity(n, n))
        .expect("cholesky factor is nonsingular");
    let s = sym(&linv * dx * linv.transpose());
    let lmin = nalgebra::SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

struct Scaling {
    g: Mat,
    ginv: Mat,
    w: Mat,
    d: DVector<f64>,
}

fn nt_scaling(lx: &Mat, lz: &Mat) -> Option<Scaling> {
    let n = lx.nrows();
    let svd = (lz.transpose() * lx).svd(false, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values.clone();
    if d.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let dis = d.map(|s| 1.0 / s.sqrt());
    let ds = d.map(|s| s.sqrt());
    let g = lx * &v * Mat::from_diagonal(&dis);
    let lxinv = lx.clone().solve_lower_triangular(&Mat::identity(n, n))?;
    let ginv = Mat::from_diagonal(&ds) * v.transpose() * lxinv;
    let w = sym(&g * g.transpose());
    Some(Scaling { g, ginv, w, d })
}

impl ConicSolver for InteriorPoint {
    fn solve_standard(&self, sdp: &StandardSdp, mode: SolveMode, opts: &SolveOptions) -> RawSolution {
        Engine::new(sdp, mode).run(opts)
    }
}

/// Maps original blocks/variables to the normalized engine problem.
struct Engine<'a> {
    sdp: &'a StandardSdp,
    mode: SolveMode,
    /// Original block index for each engine block (phase-1 bound block is `None`).
    block_src: Vec<Option<usize>>,
    block_scale: Vec<f64>,
    /// Column scale per original variable; y_orig = y_eng / scale.
    var_scale: Vec<f64>,
    /// Engine index for each original variable (None if unused).
    var_idx: Vec<Option<usize>>,
    obj_scale: f64,
    problem: Problem,
    trivial_infeasible: bool,
}

impl<'a> Engine<'a> {
    fn new(sdp: &'a StandardSdp, mode: SolveMode) -> Self {
        let nv = sdp.num_vars();
        let mut block_src = Vec::new();
        let mut block_scale = Vec::new();
        let mut trivial_infeasible = false;
        for j in 0..sdp.block_dims.len() {
            let mut s = sdp.f0[j].norm();
            for (_, f) in &sdp.coeffs[j] {
                s = s.max(f.norm());
            }
            if sdp.coeffs[j].is_empty() {
                // Constant block: either always satisfied or never.
                let lmin = nalgebra::SymmetricEigen::new(sdp.f0[j].clone())
                    .eigenvalues
                    .iter()
                    .fold(f64::INFINITY, |a, &b| a.min(b));
                if lmin < 0.0 {
                    trivial_infeasible = true;
                }
                continue;
            }
            block_src.push(Some(j));
            block_scale.push(s.max(f64::MIN_POSITIVE));
        }
        let mut col = vec![0.0; nv];
        for (bi, src) in block_src.iter().enumerate() {
            let j = src.unwrap();
            for (k, f) in &sdp.coeffs[j] {
                col[*k] += (f.norm() / block_scale[bi]).powi(2);
            }
        }
        let mut var_idx = vec![None; nv];
        let mut var_scale = vec![1.0; nv];
        let mut next = 0;
        for k in 0..nv {
            if col[k] > 0.0 {
                var_idx[k] = Some(next);
                var_scale[k] = col[k].sqrt();
                next += 1;
            }
        }
        let mut dims = Vec::new();
        let mut cm = Vec::new();
        let mut am = Vec::new();
        for (bi, src) in block_src.iter().enumerate() {
            let j = src.unwrap();
            let s = block_scale[bi];
            dims.push(sdp.block_dims[j]);
            cm.push(&sdp.f0[j] / s);
            am.push(
                sdp.coeffs[j]
                    .iter()
                    .map(|(k, f)| (var_idx[*k].unwrap(), f * (-1.0 / (s * var_scale[*k]))))
                    .collect::<Vec<_>>(),
            );
        }
        let mut b = vec![0.0; next];
        for k in 0..nv {
            if let Some(e) = var_idx[k] {
                b[e] = -sdp.c[k] / var_scale[k];
            }
        }
        let mut obj_scale = 1.0;
        match mode {
            SolveMode::Minimize => {
                obj_scale = norm(&b).max(1e-300);
                if norm(&b) > 0.0 {
                    for v in &mut b {
                        *v /= obj_scale;
                    }
                } else {
                    obj_scale = 1.0;
                }
            }
            SolveMode::Feasibility => {
                let si = next;
                for (n, list) in dims.iter().zip(am.iter_mut()) {
                    list.push((si, Mat::identity(*n, *n)));
                }
                b = vec![0.0; next + 1];
                b[si] = 1.0;
                dims.push(1);
                cm.push(Mat::from_element(1, 1, 1.0));
                am.push(vec![(si, Mat::from_element(1, 1, 1.0))]);
                block_src.push(None);
                block_scale.push(1.0);
                next += 1;
            }
        }
        let problem = Problem {
            dims,
            c: cm,
            a: am,
            b,
            nvars: next,
        };
        Self {
            sdp,
            mode,
            block_src,
            block_scale,
            var_scale,
            var_idx,
            obj_scale,
            problem,
            trivial_infeasible,
        }
    }

    fn original_y(&self, y: &[f64]) -> Vec<f64> {
        (0..self.sdp.num_vars())
            .map(|k| match self.var_idx[k] {
                Some(e) => y[e] / self.var_scale[k],
                None => 0.0,
            })
            .collect()
    }

    /// True iff every original block is positive definite at `y`.
    fn original_feasible(&self, y: &[f64]) -> bool {
        let yo = self.original_y(y);
        (0..self.sdp.block_dims.len()).all(|j| {
            let m = sym(self.sdp.eval_block(j, &yo));
            let scale = self
                .block_src
                .iter()
                .position(|s| *s == Some(j))
                .map_or(1.0, |bi| self.block_scale[bi]);
            Cholesky::new(m / scale).is_some()
        })
    }

    fn finish(&self, status: RawStatus, y: &[f64], iterations: usize, gap: f64) -> RawSolution {
        RawSolution {
            status,
            y: self.original_y(y),
            iterations,
            gap,
        }
    }

    fn run(&self, opts: &SolveOptions) -> RawSolution {
        let p = &self.problem;
        let zero_y = vec![0.0; p.nvars];
        if self.trivial_infeasible {
            return self.finish(RawStatus::Infeasible, &zero_y, 0, f64::NAN);
        }
        if p.dims.is_empty() || (p.nvars == 0 && self.mode == SolveMode::Minimize) {
            let status = if self.original_feasible(&zero_y) {
                RawStatus::Optimal
            } else {
                RawStatus::Inconclusive("no free variables and constraints not satisfied".into())
            };
            return self.finish(status, &zero_y, 0, 0.0);
        }
        if self.mode == SolveMode::Feasibility && self.original_feasible(&zero_y) {
            return self.finish(RawStatus::Feasible, &zero_y, 0, f64::NAN);
        }

        let n_tot = p.total_dim() as f64;
        // Starting point after the usual SDPT3 heuristic.
        let mut x: Vec<Mat> = Vec::new();
        let mut z: Vec<Mat> = Vec::new();
        for (j, &n) in p.dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 10.0f64.max(nf.sqrt());
            let mut eta: f64 = 10.0f64.max(nf.sqrt()).max(p.c[j].norm());
            for (k, ak) in &p.a[j] {
                let an = ak.norm();
                xi = xi.max(nf.sqrt() * (1.0 + p.b[*k].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
            x.push(Mat::identity(n, n) * xi);
            z.push(Mat::identity(n, n) * eta);
        }
        let mut y = vec![0.0; p.nvars];
        let bnorm = norm(&p.b);
        let cnorm = fro(&p.c);
        let mut gap = f64::INFINITY;
        let mut small_steps = 0;
        let mut last_feasible: Option<Vec<f64>> = None;

        for iter in 0..opts.max_iterations {
            let ax = p.a_op(&x);
            let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let aty = p.a_adj(&y);
            let rd: Vec<Mat> = (0..p.dims.len()).map(|j| &p.c[j] - &aty[j] - &z[j]).collect();
            let mu = inner(&x, &z) / n_tot;
            let pobj = inner(&p.c, &x);
            let dobj: f64 = p.b.iter().zip(&y).map(|(b, v)| b * v).sum();
            gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let pinf = norm(&rp) / (1.0 + bnorm);
            let dinf = fro(&rd) / (1.0 + cnorm);
            log::trace!(
                "ipm iter {iter}: pobj {pobj:.6e} dobj {dobj:.6e} gap {gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e} mu {mu:.2e}"
            );

            if self.mode == SolveMode::Feasibility && self.original_feasible(&y) {
                return self.finish(RawStatus::Feasible, &y, iter, gap);
            }
            if self.mode == SolveMode::Minimize && self.original_feasible(&y) {
                last_feasible = Some(y.clone());
            }
            if gap < opts.gap_tol && pinf < opts.feas_tol && dinf < opts.feas_tol {
                return self.converged(&y, pobj, dobj, pinf, iter, gap, opts);
            }
            // Primal ray: A(X) ≈ 0 with ⟨C, X⟩ < 0 certifies LMI infeasibility.
            if pobj < 0.0 && self.mode == SolveMode::Minimize {
                let ratio = norm(&ax) / (-pobj);
                if ratio < opts.infeasibility_tol {
                    return self.finish(RawStatus::Infeasible, &y, iter, gap);
                }
            }
            if dobj > 1e12 && dinf < 1e-3 {
                return self.finish(
                    RawStatus::Inconclusive("objective appears unbounded below".into()),
                    &y,
                    iter,
                    gap,
                );
            }

            let mut lx = Vec::new();
            let mut scal = Vec::new();
            for j in 0..p.dims.len() {
                let (Some(cx), Some(cz)) = (Cholesky::new(sym(x[j].clone())), Cholesky::new(sym(z[j].clone())))
                else {
                    return self.stalled(&y, last_feasible.as_deref(), iter, gap, "iterate lost positive definiteness");
                };
                let (l1, l2) = (cx.l(), cz.l());
                let Some(s) = nt_scaling(&l1, &l2) else {
                    return self.stalled(&y, last_feasible.as_deref(), iter, gap, "scaling breakdown");
                };
                lx.push((l1, l2));
                scal.push(s);
            }

            // Schur complement M_kl = Σ_j ⟨A_kj, W A_lj W⟩.
            let m = p.nvars;
            let mut schur = Mat::zeros(m, m);
            for (j, list) in p.a.iter().enumerate() {
                let w = &scal[j].w;
                let prods: Vec<Mat> = list.iter().map(|(_, ak)| w * ak * w).collect();
                for (i1, (k, ak)) in list.iter().enumerate() {
                    for (i2, (l, _)) in list.iter().enumerate().skip(i1) {
                        let v = ak.dot(&prods[i2]);
                        schur[(*k, *l)] += v;
                        if i2 != i1 {
                            schur[(*l, *k)] += v;
                        }
                    }
                }
            }
            let Some(chol) = factor_schur(schur) else {
                return self.stalled(&y, last_feasible.as_deref(), iter, gap, "Schur complement factorization failed");
            };

            let wrdw: Vec<Mat> = (0..p.dims.len()).map(|j| &scal[j].w * &rd[j] * &scal[j].w).collect();
            let a_wrdw = p.a_op(&wrdw);
            let direction = |rc: &[Mat]| -> (Vec<f64>, Vec<Mat>, Vec<Mat>) {
                let arc = p.a_op(rc);
                let rhs: Vec<f64> = (0..m).map(|k| rp[k] - arc[k] + a_wrdw[k]).collect();
                let dy = chol.solve(&DVector::from_vec(rhs));
                let dyv: Vec<f64> = dy.iter().copied().collect();
                let atdy = p.a_adj(&dyv);
                let dz: Vec<Mat> = (0..p.dims.len()).map(|j| sym(&rd[j] - &atdy[j])).collect();
                let dx: Vec<Mat> = (0..p.dims.len())
                    .map(|j| sym(&rc[j] - &scal[j].w * &dz[j] * &scal[j].w))
                    .collect();
                (dyv, dx, dz)
            };
            let steps = |dx: &[Mat], dz: &[Mat]| -> (f64, f64) {
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for j in 0..p.dims.len() {
                    ap = ap.min(max_step(&lx[j].0, &dx[j]));
                    ad = ad.min(max_step(&lx[j].1, &dz[j]));
                }
                (ap, ad)
            };

            let rc_pred: Vec<Mat> = x.iter().map(|xi| -xi).collect();
            let (_, dxa, dza) = direction(&rc_pred);
            let (apa, ada) = steps(&dxa, &dza);
            let (apa, ada) = (apa.min(1.0), ada.min(1.0));
            let mut mu_aff = 0.0;
            for j in 0..p.dims.len() {
                mu_aff += (&x[j] + &dxa[j] * apa).dot(&(&z[j] + &dza[j] * ada));
            }
            mu_aff /= n_tot;
            let mut sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);
            if !sigma.is_finite() {
                sigma = opts.initial_centering;
            }
            if apa.min(ada) < 0.1 {
                sigma = sigma.max(opts.initial_centering);
            }

            let rc_corr: Vec<Mat> = (0..p.dims.len())
                .map(|j| {
                    let s = &scal[j];
                    let n = p.dims[j];
                    let dxt = &s.ginv * &dxa[j] * s.ginv.transpose();
                    let dzt = s.g.transpose() * &dza[j] * &s.g;
                    let cross = (&dxt * &dzt + &dzt * &dxt) * 0.5;
                    let mut r = -cross;
                    for a in 0..n {
                        r[(a, a)] += sigma * mu - s.d[a] * s.d[a];
                    }
                    let u = Mat::from_fn(n, n, |a, b| 2.0 * r[(a, b)] / (s.d[a] + s.d[b]));
                    sym(&s.g * u * s.g.transpose())
                })
                .collect();
            let (dy, dx, dz) = direction(&rc_corr);
            let (ap, ad) = steps(&dx, &dz);
            let tau = 0.9 + 0.09 * apa.min(ada);
            let ap = (tau * ap).min(1.0);
            let ad = (tau * ad).min(1.0);
            if ap < 1e-10 && ad < 1e-10 {
                small_steps += 1;
                if small_steps >= 3 {
                    return self.stalled(&y, last_feasible.as_deref(), iter, gap, "step length collapsed");
                }
            } else {
                small_steps = 0;
            }
            for j in 0..p.dims.len() {
                x[j] = sym(&x[j] + &dx[j] * ap);
                z[j] = sym(&z[j] + &dz[j] * ad);
            }
            for (yk, d) in y.iter_mut().zip(&dy) {
                *yk += ad * d;
            }
        }
        self.stalled(&y, last_feasible.as_deref(), opts.max_iterations, gap, "iteration limit reached")
    }

    #[allow(clippy::too_many_arguments)]
    fn converged(
        &self,
        y: &[f64],
        pobj: f64,
        dobj: f64,
        pinf: f64,
        iter: usize,
        gap: f64,
        opts: &SolveOptions,
    ) -> RawSolution {
        match self.mode {
            SolveMode::Minimize => self.finish(RawStatus::Optimal, y, iter, gap * self.obj_scale.max(1.0)),
            SolveMode::Feasibility => {
                // The phase-1 optimum s* is bracketed by dobj ≤ s* ≤ pobj.
                let _ = dobj;
                if pobj < -opts.phase1_threshold && pinf < opts.feas_tol {
                    self.finish(RawStatus::Infeasible, y, iter, gap)
                } else if self.original_feasible(y) {
                    self.finish(RawStatus::Feasible, y, iter, gap)
                } else {
                    self.finish(
                        RawStatus::Inconclusive(format!(
                            "phase-1 optimum {pobj:.3e} too close to zero to decide"
                        )),
                        y,
                        iter,
                        gap,
                    )
                }
            }
        }
    }

    fn stalled(&self, y: &[f64], last_feasible: Option<&[f64]>, iter: usize, gap: f64, why: &str) -> RawSolution {
        // A feasible point is still a valid (non-optimal) answer.
        if self.original_feasible(y) {
            return self.finish(RawStatus::Feasible, y, iter, gap);
        }
        if let Some(yf) = last_feasible {
            log::debug!("{why}; falling back to the last feasible iterate");
            return self.finish(RawStatus::Feasible, yf, iter, gap);
        }
        self.finish(RawStatus::Inconclusive(why.to_string()), y, iter, gap)
    }
}

fn factor_schur(m: Mat) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let maxd = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14 * maxd;
    for _ in 0..8 {
        let c = Cholesky::new(&m + Mat::identity(n, n) * reg);
        if c.is_some() {
            return c;
        }
        reg *= 100.0;
    }
    None
}

/// Verdict of a bisection predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict<W> {
    Feasible(W),
    Infeasible,
    Inconclusive(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BisectError {
    #[error("predicate is not feasible at the upper bracket {hi}")]
    NoFeasiblePoint { hi: f64 },
    #[error("monotonicity violated: feasible at {feasible} but infeasible at {infeasible}")]
    MonotonicityViolation { feasible: f64, infeasible: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectOptions {
    pub rel_tol: f64,
    /// Evenly spaced points probed before bisecting, to catch
    /// non-monotone predicates. Zero disables the scan.
    pub prescan: usize,
    pub max_evaluations: usize,
}

impl BisectOptions {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            prescan: 0,
            max_evaluations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectResult<W> {
    /// Smallest γ found feasible.
    pub gamma: f64,
    pub witness: W,
    /// Largest γ not found feasible.
    pub lower: f64,
    /// Some bracketing decision relied on an inconclusive verdict.
    pub bracket_uncertain: bool,
    pub evaluations: usize,
}

pub fn bisect_gamma<W, F>(predicate: F, lo: f64, hi: f64, rel_tol: f64) -> Result<BisectResult<W>, BisectError>
where
    F: FnMut(f64) -> Verdict<W>,
{
    bisect_gamma_with(predicate, lo, hi, &BisectOptions::new(rel_tol))
}

pub fn bisect_gamma_with<W, F>(
    mut predicate: F,
    lo: f64,
    hi: f64,
    opts: &BisectOptions,
) -> Result<BisectResult<W>, BisectError>
where
    F: FnMut(f64) -> Verdict<W>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(BisectError::InvalidBracket { lo, hi });
    }
    let mut evaluations = 0;
    let mut uncertain = false;
    let mut best = match predicate(hi) {
        Verdict::Feasible(w) => w,
        _ => return Err(BisectError::NoFeasiblePoint { hi }),
    };
    evaluations += 1;
    let (mut lo, mut hi) = (lo, hi);
    if opts.prescan > 0 {
        let pts: Vec<f64> = (1..=opts.prescan)
            .map(|k| lo + (hi - lo) * k as f64 / (opts.prescan + 1) as f64)
            .collect();
        let mut lowest_feasible: Option<(f64, W)> = None;
        let mut highest_infeasible: Option<f64> = None;
        for &g in &pts {
            evaluations += 1;
            match predicate(g) {
                Verdict::Feasible(w) => {
                    if let Some(bad) = highest_infeasible {
                        return Err(BisectError::MonotonicityViolation {
                            feasible: g,
                            infeasible: bad,
                        });
                    }
                    if lowest_feasible.is_none() {
                        lowest_feasible = Some((g, w));
                    }
                }
                Verdict::Infeasible => {
                    if let Some((f, _)) = &lowest_feasible {
                        return Err(BisectError::MonotonicityViolation {
                            feasible: *f,
                            infeasible: g,
                        });
                    }
                    highest_infeasible = Some(g);
                }
                Verdict::Inconclusive(msg) => {
                    log::info!("bisection prescan inconclusive at {g}: {msg}");
                    if lowest_feasible.is_none() {
                        uncertain = true;
                        highest_infeasible = Some(g);
                    }
                }
            }
        }
        if let Some(f) = highest_infeasible {
            lo = lo.max(f);
        }
        if let Some((f, w)) = lowest_feasible {
            hi = f;
            best = w;
        }
    }
    let floor = f64::MIN_POSITIVE.sqrt();
    while hi - lo > opts.rel_tol * hi.abs().max(floor) && evaluations < opts.max_evaluations {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        match predicate(mid) {
            Verdict::Feasible(w) => {
                hi = mid;
                best = w;
            }
            Verdict::Infeasible => lo = mid,
            Verdict::Inconclusive(msg) => {
                log::info!("bisection inconclusive at {mid}: {msg}; treated as infeasible");
                uncertain = true;
                lo = mid;
            }
        }
    }
    Ok(BisectResult {
        gamma: hi,
        witness: best,
        lower: lo,
        bracket_uncertain: uncertain,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::{AffineSym, LmiBuilder, Sense, SignConstraint};
    use crate::matrixcore::SymMat;

    #[test]
    fn closed_form_two_by_two() {
        let mut b = LmiBuilder::new();
        let t = b.scalar_var("t", SignConstraint::None);
        let mut e = AffineSym::constant(SymMat::new(Mat::from_row_slice(2, 2, &[0., 1., 1., 0.])).unwrap());
        e.add_scaled(t, &SymMat::identity(2));
        b.constrain("c", e, Sense::PosSemiDef);
        b.minimize_term(t, 1.0);
        let p = b.build().unwrap();
        let out = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        let v = out.objective.unwrap();
        assert!((v - 1.0).abs() <= 1e-6 * 2.0, "t* = {v}");
    }

    #[test]
    fn negative_identity_is_infeasible() {
        let mut b = LmiBuilder::new();
        let t = b.scalar_var("t", SignConstraint::None);
        let mut e = AffineSym::constant(-&SymMat::identity(2));
        e.add_scaled(t, &SymMat::from_diagonal(&[1.0, -1.0]));
        b.constrain("c", e, Sense::PosSemiDef);
        let out = solve(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);

        let mut b = LmiBuilder::new();
        b.constrain("c", AffineSym::constant(-&SymMat::identity(2)), Sense::PosSemiDef);
        let out = solve(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn infeasible_with_variables() {
        // x ≥ 1 and x ≤ −1.
        let mut b = LmiBuilder::new();
        let x = b.scalar_var("x", SignConstraint::None);
        let mut e1 = AffineSym::constant(SymMat::from_diagonal(&[-1.0]));
        e1.add_scaled(x, &SymMat::identity(1));
        let mut e2 = AffineSym::constant(SymMat::from_diagonal(&[-1.0]));
        e2.add_scaled(x, &SymMat::from_diagonal(&[-1.0]));
        b.constrain("lo", e1.clone(), Sense::PosSemiDef);
        b.constrain("hi", e2.clone(), Sense::PosSemiDef);
        let out = solve(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);

        let mut b = LmiBuilder::new();
        let x = b.scalar_var("x", SignConstraint::None);
        let mut e1 = AffineSym::constant(SymMat::from_diagonal(&[-1.0]));
        e1.add_scaled(x, &SymMat::identity(1));
        let mut e2 = AffineSym::constant(SymMat::from_diagonal(&[-1.0]));
        e2.add_scaled(x, &SymMat::from_diagonal(&[-1.0]));
        b.constrain("lo", e1, Sense::PosSemiDef);
        b.constrain("hi", e2, Sense::PosSemiDef);
        b.minimize_term(x, 1.0);
        let out = solve(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn feasibility_problem_returns_witness() {
        let mut b = LmiBuilder::new();
        let p = b.sym_var("P", 3, SignConstraint::PosDef);
        let a = Mat::identity(3, 3) * 0.9;
        // AᵀPA − P ≺ 0
        let mut e = AffineSym::zeros(3);
        e.add_term(p, a.transpose(), a.clone());
        e.add_diag_block(p, 0, 3, -1.0);
        b.constrain("lyap", e, Sense::NegDef);
        let prob = b.build().unwrap();
        let out = solve(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Feasible);
        let w = out.assignment.unwrap();
        assert!(check_feasible_at(&prob, &w, 1e-7).unwrap().pass);
    }

    #[test]
    fn unstable_lyapunov_is_infeasible() {
        let mut b = LmiBuilder::new();
        let p = b.sym_var("P", 2, SignConstraint::PosDef);
        let a = Mat::from_row_slice(2, 2, &[1.2, 0.3, 0.0, 0.5]);
        let mut e = AffineSym::zeros(2);
        e.add_term(p, a.transpose(), a.clone());
        e.add_diag_block(p, 0, 2, -1.0);
        b.constrain("lyap", e, Sense::NegDef);
        let mut t = AffineSym::constant(SymMat::identity(2).scale(-1.0));
        t.add_diag_block(p, 0, 2, 1.0);
        b.constrain("P>I", t, Sense::PosSemiDef);
        let out = solve(&b.build().unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn bisect_threshold_predicate() {
        let r = bisect_gamma(
            |g| if g >= 2.0 { Verdict::Feasible(g) } else { Verdict::Infeasible },
            0.0,
            10.0,
            1e-3,
        )
        .unwrap();
        assert!(r.gamma >= 2.0 && r.gamma <= 2.002, "{}", r.gamma);
        assert_eq!(r.witness, r.gamma);
    }

    #[test]
    fn bisect_always_feasible_goes_to_lo() {
        let r = bisect_gamma(|_| Verdict::Feasible(()), 0.0, 10.0, 1e-3).unwrap();
        assert!(r.gamma < 1e-6);
    }

    #[test]
    fn bisect_errors() {
        assert!(matches!(
            bisect_gamma(|_| Verdict::<()>::Infeasible, 0.0, 1.0, 1e-3),
            Err(BisectError::NoFeasiblePoint { .. })
        ));
        let nonmono = |g: f64| {
            if (g - 2.5).abs() < 1.0 || g >= 9.0 {
                Verdict::Feasible(())
            } else {
                Verdict::Infeasible
            }
        };
        let mut o = BisectOptions::new(1e-3);
        o.prescan = 9;
        assert!(matches!(
            bisect_gamma_with(nonmono, 0.0, 10.0, &o),
            Err(BisectError::MonotonicityViolation { .. })
        ));
    }

    #[test]
    fn bisect_marks_inconclusive_brackets() {
        let r = bisect_gamma(
            |g| {
                if g >= 2.0 {
                    Verdict::Feasible(())
                } else if g > 1.5 {
                    Verdict::Inconclusive("near boundary".into())
                } else {
                    Verdict::Infeasible
                }
            },
            0.0,
            10.0,
            1e-4,
        )
        .unwrap();
        assert!(r.bracket_uncertain);
        assert!(r.gamma >= 2.0);
    }
}
