//! Ground truth for experiments: system models, simulation, seeded data
//! generation and true H∞ norms.

use std::collections::BTreeMap;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::datadriven::{
    box_energy_bound, energy_bound, noise_membership, split_trajectory, DataError, NoiseBound, SubsystemData,
    TrajectoryData,
};
use crate::graph::{GraphError, InterconnectionGraph};
use crate::lmi::{AffineSym, LmiBuilder, LmiProblem, Sense, SignConstraint};
use crate::matrixcore::{block_diag, hstack, spectral_norm, spectral_radius, Mat, SymMat};
use crate::sdpsolve::{bisect_gamma, solve, SolveOptions, SolveStatus, Verdict};

/// Grid size of the frequency-domain cross-check.
pub const FREQUENCY_GRID_POINTS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("system is not Schur stable (spectral radius {0:.6})")]
    Unstable(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("generated noise violates its declared bound (subsystem {0:?})")]
    MembershipViolation(Option<usize>),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("norm computation failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-vertex view of an interconnected system.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub graph: InterconnectionGraph,
    pub a: Vec<Mat>,
    /// `A_ij` for every ordered pair `(i, j)` with `{i, j}` an edge.
    pub coupling: BTreeMap<(usize, usize), Mat>,
    pub b: Vec<Mat>,
    pub c: Vec<Mat>,
    pub d: Vec<Mat>,
}

impl Structure {
    pub fn state_dims(&self) -> Vec<usize> {
        self.a.iter().map(|a| a.nrows()).collect()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.b.iter().map(|b| b.ncols()).collect()
    }

    /// `A_{𝒩ᵢ} = row_{j∈𝒩ᵢ} A_ij` in ascending neighbor order.
    pub fn neighbor_row(&self, i: usize) -> Mat {
        let blocks: Vec<&Mat> = self
            .graph
            .neighbors(i)
            .into_iter()
            .map(|j| &self.coupling[&(i, j)])
            .collect();
        if blocks.is_empty() {
            Mat::zeros(self.a[i].nrows(), 0)
        } else {
            hstack(&blocks).expect("coupling rows match n_i")
        }
    }
}

/// Discrete-time `x⁺ = Ax + Bu + w`, `y = Cx + Du`, optionally with structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub structure: Option<Structure>,
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    crate::matrixcore::offsets(dims)
}

impl SystemModel {
    pub fn lumped(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self, OracleError> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
            return Err(OracleError::DimensionMismatch(format!(
                "A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            structure: None,
        })
    }

    /// Assemble the lumped matrices; `A_ij` lands at block `(i, j)` on edges only.
    pub fn from_structure(s: Structure) -> Result<Self, OracleError> {
        let l = s.graph.vertices();
        if [s.a.len(), s.b.len(), s.c.len(), s.d.len()].iter().any(|&k| k != l) {
            return Err(OracleError::DimensionMismatch(
                "per-vertex matrix lists must have one entry per vertex".into(),
            ));
        }
        let nd = s.state_dims();
        for (i, ai) in s.a.iter().enumerate() {
            if !ai.is_square()
                || s.b[i].nrows() != nd[i]
                || s.c[i].ncols() != nd[i]
                || s.d[i].shape() != (s.c[i].nrows(), s.b[i].ncols())
            {
                return Err(OracleError::DimensionMismatch(format!("vertex {i} matrices do not conform")));
            }
        }
        for (&(i, j), aij) in &s.coupling {
            if !s.graph.has_edge(i, j) {
                return Err(OracleError::DimensionMismatch(format!("coupling ({i},{j}) is not an edge")));
            }
            if aij.shape() != (nd[i], nd[j]) {
                return Err(OracleError::DimensionMismatch(format!("A_{i}{j} has shape {:?}", aij.shape())));
            }
        }
        for &(i, j) in s.graph.edges() {
            if !s.coupling.contains_key(&(i, j)) || !s.coupling.contains_key(&(j, i)) {
                return Err(OracleError::DimensionMismatch(format!("edge ({i},{j}) lacks coupling blocks")));
            }
        }
        let off = offsets(&nd);
        let n = off[l];
        let mut a = Mat::zeros(n, n);
        for i in 0..l {
            a.view_mut((off[i], off[i]), (nd[i], nd[i])).copy_from(&s.a[i]);
        }
        for (&(i, j), aij) in &s.coupling {
            a.view_mut((off[i], off[j]), (nd[i], nd[j])).copy_from(aij);
        }
        let b = block_diag(&s.b.iter().collect::<Vec<_>>());
        let c = block_diag(&s.c.iter().collect::<Vec<_>>());
        let d = block_diag(&s.d.iter().collect::<Vec<_>>());
        Ok(Self {
            a,
            b,
            c,
            d,
            structure: Some(s),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }
}

fn example1_a() -> Mat {
    Mat::from_row_slice(3, 3, &[0.5, 0.1, 0.0, 0.1, 0.4, 0.1, 0.0, 0.1, 0.6])
}

/// The three-state benchmark with `B = C = I`, `D = 0`.
pub fn example1_system() -> SystemModel {
    SystemModel::lumped(example1_a(), Mat::identity(3, 3), Mat::identity(3, 3), Mat::zeros(3, 3))
        .expect("consistent dimensions")
}

/// Same benchmark viewed as a chain `0 – 1 – 2` of scalar subsystems.
pub fn example1_structured() -> SystemModel {
    let a0 = example1_a();
    let graph = InterconnectionGraph::chain(3);
    let mut coupling = BTreeMap::new();
    for &(i, j) in graph.edges() {
        coupling.insert((i, j), Mat::from_element(1, 1, a0[(i, j)]));
        coupling.insert((j, i), Mat::from_element(1, 1, a0[(j, i)]));
    }
    let one = || Mat::from_element(1, 1, 1.0);
    SystemModel::from_structure(Structure {
        graph,
        a: (0..3).map(|i| Mat::from_element(1, 1, a0[(i, i)])).collect(),
        coupling,
        b: (0..3).map(|_| one()).collect(),
        c: (0..3).map(|_| one()).collect(),
        d: (0..3).map(|_| Mat::zeros(1, 1)).collect(),
    })
    .expect("consistent structure")
}

/// The lumped system treated as a single vertex without edges.
pub fn as_single_vertex(sys: &SystemModel) -> SystemModel {
    SystemModel::from_structure(Structure {
        graph: InterconnectionGraph::edgeless(1),
        a: vec![sys.a.clone()],
        coupling: BTreeMap::new(),
        b: vec![sys.b.clone()],
        c: vec![sys.c.clone()],
        d: vec![sys.d.clone()],
    })
    .expect("single vertex is consistent")
}

/// Scalar subsystems on a cycle: `Aᵢ ~ U[diag]`, `A_ij ~ U[coupling]`, `Bᵢ = Cᵢ = 1`, `Dᵢ = 0`.
///
/// Draw order: every `Aᵢ`, then for each edge `(i, j)`, `i < j`, first `A_ij` then `A_ji`.
pub fn random_cycle_system(
    l: usize,
    diag: (f64, f64),
    coupling_range: (f64, f64),
    seed: u64,
) -> Result<SystemModel, OracleError> {
    let graph = InterconnectionGraph::cycle(l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let a: Vec<Mat> = (0..l).map(|_| Mat::from_element(1, 1, draw(diag))).collect();
    let mut coupling = BTreeMap::new();
    for &(i, j) in graph.edges() {
        coupling.insert((i, j), Mat::from_element(1, 1, draw(coupling_range)));
        coupling.insert((j, i), Mat::from_element(1, 1, draw(coupling_range)));
    }
    let one = || Mat::from_element(1, 1, 1.0);
    let sys = SystemModel::from_structure(Structure {
        graph,
        a,
        coupling,
        b: (0..l).map(|_| one()).collect(),
        c: (0..l).map(|_| one()).collect(),
        d: (0..l).map(|_| Mat::zeros(1, 1)).collect(),
    })?;
    log::debug!("random cycle L={l} seed={seed}: spectral radius {:.4}", sys.spectral_radius());
    Ok(sys)
}

/// Dense Gaussian system rescaled to spectral radius `rho`.
pub fn random_stable_system(n: usize, m: usize, p: usize, rho: f64, seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a0 = g(n, n);
    let r0 = spectral_radius(&a0).max(1e-12);
    let a = a0 * (rho / r0);
    let (b, c, d) = (g(n, m), g(p, n), g(p, m) * 0.3);
    SystemModel::lumped(a, b, c, d).expect("consistent dimensions")
}

/// Simulated run with the injected noise kept for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub data: TrajectoryData,
    pub noise: Mat,
}

impl Simulation {
    /// Split the lumped record into per-vertex data following `sys.structure`.
    pub fn subsystems(&self, sys: &SystemModel) -> Result<Vec<SubsystemData>, OracleError> {
        let s = sys
            .structure
            .as_ref()
            .ok_or_else(|| OracleError::InvalidConfig("system has no interconnection structure".into()))?;
        split_by_structure(&self.data, s)
    }
}

pub fn split_by_structure(d: &TrajectoryData, s: &Structure) -> Result<Vec<SubsystemData>, OracleError> {
    let nd = s.state_dims();
    let md = s.input_dims();
    let (xo, uo) = (offsets(&nd), offsets(&md));
    let xs: Vec<Mat> = (0..nd.len()).map(|i| d.x().rows(xo[i], nd[i]).into_owned()).collect();
    (0..nd.len())
        .map(|i| {
            let own = split_trajectory(xs[i].clone(), d.u_minus().rows(uo[i], md[i]).into_owned())?;
            let nb: Vec<(usize, &Mat)> = s.graph.neighbors(i).into_iter().map(|j| (j, &xs[j])).collect();
            Ok(SubsystemData::new(i, own, &nb)?)
        })
        .collect()
}

pub fn simulate(sys: &SystemModel, u: &Mat, w: &Mat, x0: Option<&[f64]>) -> Result<Simulation, OracleError> {
    let (n, m, n_s) = (sys.n(), sys.m(), u.ncols());
    if u.nrows() != m || w.shape() != (n, n_s) || x0.is_some_and(|x| x.len() != n) {
        return Err(OracleError::DimensionMismatch(format!(
            "u {:?}, w {:?} for n = {n}, m = {m}",
            u.shape(),
            w.shape()
        )));
    }
    let mut x = Mat::zeros(n, n_s + 1);
    if let Some(x0) = x0 {
        x.set_column(0, &nalgebra::DVector::from_row_slice(x0));
    }
    for k in 0..n_s {
        let next = &sys.a * x.column(k) + &sys.b * u.column(k) + w.column(k);
        x.set_column(k + 1, &next);
    }
    Ok(Simulation {
        data: split_trajectory(x, u.clone())?,
        noise: w.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Uniform in the Euclidean ball of radius σ.
    Ball,
    /// Uniform in `[−σ, σ]` per component.
    Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub samples: usize,
    pub sigma: f64,
    pub noise: NoiseModel,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn new(samples: usize, sigma: f64, noise: NoiseModel, seed: u64) -> Self {
        Self {
            samples,
            sigma,
            noise,
            seed,
            x0: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub simulation: Simulation,
    pub lumped_bound: NoiseBound,
    /// Per-vertex data and bounds; empty for unstructured systems.
    pub subsystems: Vec<SubsystemData>,
    pub subsystem_bounds: Vec<NoiseBound>,
}

/// Bound implied by the noise model at level `σ`.
pub fn bound_for(model: NoiseModel, sigma: f64, samples: usize, n: usize) -> Result<NoiseBound, DataError> {
    match model {
        NoiseModel::Ball => energy_bound(sigma, samples, n),
        NoiseModel::Interval => box_energy_bound(sigma, samples, n),
    }
}

/// Draw inputs (all of `u(0..N)`), then noise one time step at a time.
pub fn draw_signals(n: usize, m: usize, cfg: &ExperimentConfig) -> (Mat, Mat) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = Mat::zeros(m, cfg.samples);
    for k in 0..cfg.samples {
        for r in 0..m {
            u[(r, k)] = rng.sample(StandardNormal);
        }
    }
    let mut w = Mat::zeros(n, cfg.samples);
    for k in 0..cfg.samples {
        match cfg.noise {
            NoiseModel::Ball => {
                let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let radius = cfg.sigma * rng.random::<f64>().powf(1.0 / n as f64);
                for v in &mut dir {
                    *v *= radius / norm;
                }
                for (r, v) in dir.into_iter().enumerate() {
                    w[(r, k)] = v;
                }
            }
            NoiseModel::Interval => {
                for r in 0..n {
                    w[(r, k)] = rng.random_range(-cfg.sigma..=cfg.sigma);
                }
            }
        }
    }
    (u, w)
}

pub fn generate_experiment(sys: &SystemModel, cfg: &ExperimentConfig) -> Result<Experiment, OracleError> {
    if !(cfg.sigma > 0.0) || !cfg.sigma.is_finite() {
        return Err(OracleError::InvalidConfig(format!("noise level must be positive, got {}", cfg.sigma)));
    }
    if cfg.samples < sys.n() + sys.m() {
        return Err(OracleError::InvalidConfig(format!(
            "N = {} is below n + m = {}",
            cfg.samples,
            sys.n() + sys.m()
        )));
    }
    let (u, w) = draw_signals(sys.n(), sys.m(), cfg);
    let simulation = simulate(sys, &u, &w, cfg.x0.as_deref())?;
    let lumped_bound = bound_for(cfg.noise, cfg.sigma, cfg.samples, sys.n())?;
    if !noise_membership(&w, &lumped_bound)? {
        return Err(OracleError::MembershipViolation(None));
    }
    let mut subsystems = Vec::new();
    let mut subsystem_bounds = Vec::new();
    if let Some(s) = &sys.structure {
        subsystems = split_by_structure(&simulation.data, s)?;
        let nd = s.state_dims();
        let off = offsets(&nd);
        for (i, &ni) in nd.iter().enumerate() {
            let b = bound_for(cfg.noise, cfg.sigma, cfg.samples, ni)?;
            if !noise_membership(&w.rows(off[i], ni).into_owned(), &b)? {
                return Err(OracleError::MembershipViolation(Some(i)));
            }
            subsystem_bounds.push(b);
        }
    }
    Ok(Experiment {
        simulation,
        lumped_bound,
        subsystems,
        subsystem_bounds,
    })
}

/// `P ≻ 0`, `[A B]ᵀP[A B] − diag(P, γ²I) + [C D]ᵀ[C D] ≺ 0`.
pub fn bounded_real_problem(sys: &SystemModel, gamma: f64) -> LmiProblem {
    let (n, m) = (sys.n(), sys.m());
    let mut b = LmiBuilder::new();
    let p = b.sym_var("P", n, SignConstraint::PosDef);
    let ab = hstack(&[&sys.a, &sys.b]).expect("rows agree");
    let cd = hstack(&[&sys.c, &sys.d]).expect("rows agree");
    let mut constant = cd.transpose() * &cd;
    for k in 0..m {
        constant[(n + k, n + k)] -= gamma * gamma;
    }
    let mut e = AffineSym::constant(SymMat::symmetrized(constant));
    e.add_term(p, ab.transpose(), ab);
    e.add_diag_block(p, 0, n, -1.0);
    b.constrain("bounded-real", e, Sense::NegDef);
    b.build().expect("well-formed problem")
}

/// H∞ norm by bisection on the bounded-real LMI.
pub fn hinf_norm(sys: &SystemModel) -> Result<f64, OracleError> {
    hinf_norm_tol(sys, 1e-7)
}

pub fn hinf_norm_tol(sys: &SystemModel, rel_tol: f64) -> Result<f64, OracleError> {
    let rho = sys.spectral_radius();
    if rho >= 1.0 {
        return Err(OracleError::Unstable(rho));
    }
    let opts = SolveOptions::default();
    let pred = |g: f64| match solve(&bounded_real_problem(sys, g), &opts) {
        Ok(o) if o.status.is_success() => Verdict::Feasible(()),
        Ok(o) if o.status == SolveStatus::Infeasible => Verdict::Infeasible,
        Ok(o) => Verdict::Inconclusive(o.diagnostic.unwrap_or_default()),
        Err(e) => Verdict::Inconclusive(e.to_string()),
    };
    let lo = spectral_norm(&sys.d);
    let mut hi = (2.0 * lo).max(1.0);
    let mut tries = 0;
    while !matches!(pred(hi), Verdict::Feasible(_)) {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(OracleError::Solver("no feasible upper bracket found".into()));
        }
    }
    let r = bisect_gamma(pred, lo, hi, rel_tol).map_err(|e| OracleError::Solver(e.to_string()))?;
    if r.bracket_uncertain {
        log::info!("H-infinity bisection hit inconclusive solves; result is an upper bound");
    }
    Ok(r.gamma)
}

/// Largest singular value of `C(zI − A)⁻¹B + D` at `z = e^{jθ}`.
pub fn gain_at(sys: &SystemModel, theta: f64) -> f64 {
    let n = sys.n();
    let z = Complex::new(theta.cos(), theta.sin());
    let to_c = |m: &Mat| m.map(|v| Complex::new(v, 0.0));
    let mut zi_a: DMatrix<Complex<f64>> = -to_c(&sys.a);
    for k in 0..n {
        zi_a[(k, k)] += z;
    }
    let rhs = to_c(&sys.b);
    let x = zi_a.lu().solve(&rhs).unwrap_or_else(|| DMatrix::from_element(n, sys.m(), Complex::new(f64::INFINITY, 0.0)));
    let g = to_c(&sys.c) * x + to_c(&sys.d);
    if g.is_empty() {
        return 0.0;
    }
    g.singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}

/// Peak gain on a uniform grid of the upper unit half-circle (the response
/// of a real system is conjugate-symmetric), refined locally by golden
/// section around the best grid points.
pub fn frequency_grid_norm(sys: &SystemModel, points: usize) -> Result<f64, OracleError> {
    let rho = sys.spectral_radius();
    if rho >= 1.0 {
        return Err(OracleError::Unstable(rho));
    }
    let points = points.max(2);
    let h = std::f64::consts::PI / (points - 1) as f64;
    let gains: Vec<f64> = (0..points).map(|k| gain_at(sys, k as f64 * h)).collect();
    let mut order: Vec<usize> = (0..points).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut best = gains[order[0]];
    for &k in order.iter().take(8) {
        let lo = (k as f64 - 1.0).max(0.0) * h;
        let hi = ((k as f64 + 1.0) * h).min(std::f64::consts::PI);
        best = best.max(golden_max(|t| gain_at(sys, t), lo, hi, 60));
    }
    Ok(best)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd).max(f(a)).max(f(b));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// Stack block rows of a lumped matrix by vertex (helper for fixtures).
pub fn vertex_rows(m: &Mat, dims: &[usize], i: usize) -> Mat {
    let off = offsets(dims);
    m.rows(off[i], dims[i]).into_owned()
}

/// Block `(i, j)` of a lumped square matrix.
pub fn vertex_block(m: &Mat, dims: &[usize], i: usize, j: usize) -> Mat {
    let off = offsets(dims);
    m.view((off[i], off[j]), (dims[i], dims[j])).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn simulate_trivial_cases() {
        let sys = SystemModel::lumped(Mat::zeros(2, 2), Mat::identity(2, 2), Mat::identity(2, 2), Mat::zeros(2, 2))
            .unwrap();
        let u = Mat::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let s = simulate(&sys, &u, &Mat::zeros(2, 3), None).unwrap();
        assert_eq!(s.data.x_plus(), u);

        let sys = SystemModel::lumped(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let w = Mat::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let s = simulate(&sys, &Mat::zeros(1, 3), &w, None).unwrap();
        assert_eq!(s.data.x(), &Mat::from_row_slice(1, 4, &[0.0, 1.0, 0.5, 0.25]));
    }

    #[test]
    fn example1_data_equation_residual() {
        let sys = example1_system();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, 0.1, NoiseModel::Ball, 3)).unwrap();
        let d = &e.simulation.data;
        let r = d.x_plus() - &sys.a * d.x_minus() - &sys.b * d.u_minus() - &e.simulation.noise;
        assert!(r.amax() <= 1e-12);
    }

    #[test]
    fn structured_assembly_matches_example() {
        let s = example1_structured();
        assert_eq!(s.a, example1_system().a);
        assert_eq!(s.structure.as_ref().unwrap().neighbor_row(1), Mat::from_row_slice(1, 2, &[0.1, 0.1]));
    }

    #[test]
    fn scalar_and_delay_norms() {
        let sys = SystemModel::lumped(scalar(0.5), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let g = hinf_norm(&sys).unwrap();
        assert!((g - 2.0).abs() <= 1e-5, "{g}");
        let delay =
            SystemModel::lumped(Mat::zeros(2, 2), Mat::identity(2, 2), Mat::identity(2, 2), Mat::zeros(2, 2)).unwrap();
        let g = hinf_norm(&delay).unwrap();
        assert!((g - 1.0).abs() <= 1e-5, "{g}");
    }

    #[test]
    fn unstable_rejected() {
        let sys = SystemModel::lumped(scalar(1.1), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        assert!(matches!(hinf_norm(&sys), Err(OracleError::Unstable(_))));
        assert!(matches!(frequency_grid_norm(&sys, 64), Err(OracleError::Unstable(_))));
    }

    #[test]
    fn grid_norm_scalar_closed_form() {
        let sys = SystemModel::lumped(scalar(-0.8), scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        // Peak at θ = π: 1/(1 − 0.8).
        let g = frequency_grid_norm(&sys, FREQUENCY_GRID_POINTS).unwrap();
        assert!((g - 5.0).abs() < 1e-9);
    }

    #[test]
    fn cycle_generator_shapes() {
        let s = random_cycle_system(25, (0.0, 1.0), (0.0, 0.1), 1).unwrap();
        let st = s.structure.as_ref().unwrap();
        assert_eq!(st.graph.vertices(), 25);
        assert_eq!(st.graph.edges().len(), 25);
        let dec = random_cycle_system(4, (0.0, 1.0), (0.0, 0.0), 2).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(dec.a[(i, j)], 0.0);
                }
            }
        }
        assert!(random_cycle_system(2, (0.0, 1.0), (0.0, 0.1), 1).is_err());
    }

    #[test]
    fn cycle_generator_golden_l3() {
        let s = random_cycle_system(3, (0.0, 1.0), (0.0, 0.1), 42).unwrap();
        let again = random_cycle_system(3, (0.0, 1.0), (0.0, 0.1), 42).unwrap();
        assert_eq!(s, again);
        let golden = golden_l3();
        assert!((&s.a - golden).amax() < 1e-15, "{}", s.a);
    }

    fn golden_l3() -> Mat {
        Mat::from_row_slice(3, 3, &GOLDEN_L3_SEED42)
    }

    // Frozen from the first seeded draw.
    const GOLDEN_L3_SEED42: [f64; 9] = [
        0.6818961923066713,
        0.06273605211973403,
        0.014995887029032496,
        0.028859387914118264,
        0.950275407672484,
        0.08038727671756268,
        0.030804055959790966,
        0.0771248780802857,
        0.4275164028565197,
    ];

    #[test]
    fn experiment_bounds_hold_for_both_models() {
        let sys = example1_structured();
        for (model, sigma) in [(NoiseModel::Ball, 0.05), (NoiseModel::Interval, 0.05), (NoiseModel::Ball, 1e-6)] {
            let e = generate_experiment(&sys, &ExperimentConfig::new(50, sigma, model, 11)).unwrap();
            assert_eq!(e.subsystems.len(), 3);
            let expected = match model {
                NoiseModel::Ball => 50.0 * sigma * sigma * 1.0,
                NoiseModel::Interval => 50.0 * sigma * sigma,
            };
            assert!((e.subsystem_bounds[0].r_w().as_mat()[(0, 0)] - expected).abs() < 1e-15);
            let lumped_r = e.lumped_bound.r_w().as_mat()[(0, 0)];
            let lumped_expected = match model {
                NoiseModel::Ball => 50.0 * sigma * sigma,
                NoiseModel::Interval => 150.0 * sigma * sigma,
            };
            assert!((lumped_r - lumped_expected).abs() < 1e-14);
        }
        assert!(generate_experiment(&sys, &ExperimentConfig::new(50, 0.0, NoiseModel::Ball, 1)).is_err());
    }

    #[test]
    fn same_seed_same_inputs_across_noise_levels() {
        let a = draw_signals(3, 3, &ExperimentConfig::new(20, 0.05, NoiseModel::Ball, 5));
        let b = draw_signals(3, 3, &ExperimentConfig::new(20, 1e-4, NoiseModel::Ball, 5));
        assert_eq!(a.0, b.0);
        assert!((&a.1 * (1e-4 / 0.05) - b.1).amax() < 1e-15);
    }
}
