//! `netcert` command-line runner.
//!
//! Every command reads one JSON config (unknown keys rejected). Output files
//! are written to `--out` when given and overwritten on each run; timings go
//! to stderr only, so identical configs produce identical files.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{
    certify_interconnected, certify_lumped, structured_duals, AnalysisError, AnalysisOptions, CertStatus, CertificationResult,
    Performance, VertexOutput,
};
use crate::datadriven::io::{load_dataset, save_dataset, Dataset, NoiseKindTag, NoiseSpec};
use crate::datadriven::{dual_qmi, primal_qmi_lumped, DataError, NoiseBound, SubsystemData, TrajectoryData};
use crate::graph::InterconnectionGraph;
use crate::matrixcore::Mat;
use crate::sdpsolve::{BisectError, BisectOptions};
use crate::synthesis::{min_gamma_synthesis, AlphaGrid, PerformanceSpec, SynthesisData, SynthesisError, SynthesisOptions};
use crate::truthoracle::{
    as_single_vertex, bound_for, example1_structured, generate_experiment, hinf_norm, random_cycle_system,
    random_stable_system, ExperimentConfig, NoiseModel, OracleError, SystemModel,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "netcert", version, about = "Data-driven H∞ certificates for interconnected systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Overrides `synthesis.alpha_grid`.
    #[arg(long, global = true, value_enum)]
    pub alpha_grid: Option<GridFlag>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Model-based H∞ norm of the configured system.
    TrueNorm,
    /// Certified H∞ bounds from data over a noise sweep.
    Analyze,
    /// Smallest certifiable level for distributed control.
    Synth,
    /// Simulate and write trajectory CSVs plus a manifest.
    GenData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Lumped,
    Structured,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridFlag {
    Default,
    Extended,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemSpec>,
    pub experiment: Option<ExperimentSpec>,
    /// Manifest path, relative to the config file.
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Example1,
    RandomCycle {
        vertices: usize,
        seed: u64,
        #[serde(default = "default_diag")]
        diag: (f64, f64),
        #[serde(default = "default_coupling")]
        coupling: (f64, f64),
    },
    RandomStable {
        n: usize,
        m: usize,
        p: usize,
        rho: f64,
        seed: u64,
    },
    Explicit {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
}

fn default_diag() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_coupling() -> (f64, f64) {
    (0.0, 0.1)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    /// Generate data once at this level; `sigmas` then only set the bound.
    pub data_sigma: Option<f64>,
}

fn default_samples() -> usize {
    50
}

fn default_noise() -> NoiseModel {
    NoiseModel::Ball
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub require_negative_q_d: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    #[serde(default = "default_interval")]
    pub gamma_interval: (f64, f64),
    #[serde(default = "default_grid")]
    pub alpha_grid: GridSpec,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        Self {
            gamma_interval: default_interval(),
            alpha_grid: default_grid(),
            rel_tol: default_rel_tol(),
        }
    }
}

fn default_interval() -> (f64, f64) {
    (0.1, 100.0)
}

fn default_grid() -> GridSpec {
    GridSpec::Named("default".into())
}

fn default_rel_tol() -> f64 {
    1e-3
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Inconclusive(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Inconclusive(_) => EXIT_INCONCLUSIVE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Inconclusive(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Data(d) => d.into(),
            OracleError::Solver(m) => CliError::Inconclusive(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Data(d) => d.into(),
            AnalysisError::DualQNotNegative { .. } => CliError::Data(e.to_string()),
            AnalysisError::DimensionMismatch(m) => CliError::Usage(m),
            other => CliError::Inconclusive(other.to_string()),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Data(d) => d.into(),
            SynthesisError::DimensionMismatch(m) | SynthesisError::InvalidGrid(m) => CliError::Usage(m),
            other => CliError::Inconclusive(other.to_string()),
        }
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config <path> is required".into()))?;
    let cfg = read_config(path)?;
    match cli.command {
        Command::TrueNorm => cmd_true_norm(cli, &cfg, stdout),
        Command::Analyze => cmd_analyze(cli, &cfg, path, stdout),
        Command::Synth => cmd_synth(cli, &cfg, stdout),
        Command::GenData => cmd_gen_data(cli, &cfg, stdout),
    }
}

fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn rows_to_mat(name: &str, rows: &[Vec<f64>]) -> Result<Mat, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Usage(format!("matrix '{name}' has ragged rows")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn build_system(spec: &SystemSpec) -> Result<SystemModel, OracleError> {
    match spec {
        SystemSpec::Example1 => Ok(example1_structured()),
        SystemSpec::RandomCycle {
            vertices,
            seed,
            diag,
            coupling,
        } => random_cycle_system(*vertices, *diag, *coupling, *seed),
        SystemSpec::RandomStable { n, m, p, rho, seed } => {
            if !(*rho > 0.0 && *rho < 1.0) {
                return Err(OracleError::InvalidConfig(format!("rho must lie in (0, 1), got {rho}")));
            }
            Ok(random_stable_system(*n, *m, *p, *rho, *seed))
        }
        SystemSpec::Explicit { a, b, c, d } => {
            let conv = |n: &str, r: &[Vec<f64>]| rows_to_mat(n, r).map_err(|e| OracleError::InvalidConfig(e.message().into()));
            SystemModel::lumped(conv("a", a)?, conv("b", b)?, conv("c", c)?, conv("d", d)?)
        }
    }
}

fn system(cfg: &RunConfig) -> Result<SystemModel, CliError> {
    let spec = cfg
        .system
        .as_ref()
        .ok_or_else(|| CliError::Usage("config has no 'system' section".into()))?;
    Ok(build_system(spec)?)
}

fn experiment(cli: &Cli, cfg: &RunConfig) -> Result<ExperimentSpec, CliError> {
    let mut e = cfg
        .experiment
        .clone()
        .ok_or_else(|| CliError::Usage("config has no 'experiment' section".into()))?;
    if let Some(s) = cli.seed {
        e.seed = s;
    }
    if e.sigmas.is_empty() {
        return Err(CliError::Usage("experiment.sigmas is empty".into()));
    }
    if let Some(bad) = e.sigmas.iter().chain(e.data_sigma.iter()).find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(CliError::Usage(format!("noise levels must be positive, got {bad}")));
    }
    Ok(e)
}

fn out_dir(cli: &Cli) -> Result<Option<&Path>, CliError> {
    if let Some(d) = &cli.out {
        fs::create_dir_all(d).map_err(|e| CliError::Usage(format!("{}: {e}", d.display())))?;
    }
    Ok(cli.out.as_deref())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json(dir: Option<&Path>, name: &str, v: &serde_json::Value) -> Result<(), CliError> {
    if let Some(d) = dir {
        let s = serde_json::to_string_pretty(v).expect("serializable");
        write_file(&d.join(name), &(s + "\n"))?;
    }
    Ok(())
}

fn write_csv(dir: Option<&Path>, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(d) = dir {
        let path = d.join(name);
        let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

fn cmd_true_norm(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let sys = system(cfg)?;
    let t = Instant::now();
    let gamma = hinf_norm(&sys)?;
    eprintln!("true-norm: {:.1} ms", t.elapsed().as_secs_f64() * 1e3);
    let _ = writeln!(stdout, "gamma0 = {gamma:.6}");
    write_json(out_dir(cli)?, "true_norm.json", &json!({ "gamma": gamma }))?;
    Ok(EXIT_OK)
}

/// Data and bounds for one row of an analysis or synthesis sweep.
struct Sample {
    sigma: f64,
    lumped: TrajectoryData,
    lumped_bound: NoiseBound,
    subsystems: Vec<SubsystemData>,
    subsystem_bounds: Vec<NoiseBound>,
    seed: Option<u64>,
}

fn generated_samples(sys: &SystemModel, e: &ExperimentSpec) -> Result<Vec<Sample>, CliError> {
    let cfg_at = |s: f64| ExperimentConfig::new(e.samples, s, e.noise, e.seed);
    let fixed = match e.data_sigma {
        Some(ds) => Some(generate_experiment(sys, &cfg_at(ds))?),
        None => None,
    };
    let mut out = Vec::with_capacity(e.sigmas.len());
    for &sigma in &e.sigmas {
        let ex = match &fixed {
            Some(f) => f.clone(),
            None => generate_experiment(sys, &cfg_at(sigma))?,
        };
        let lumped_bound = bound_for(e.noise, sigma, e.samples, sys.n())?;
        let subsystem_bounds = ex
            .subsystems
            .iter()
            .map(|s| bound_for(e.noise, sigma, e.samples, s.own.n()))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Sample {
            sigma,
            lumped: ex.simulation.data,
            lumped_bound,
            subsystems: ex.subsystems,
            subsystem_bounds,
            seed: Some(e.seed),
        });
    }
    Ok(out)
}

fn dataset_samples(ds: &Dataset, sigmas: &[f64]) -> Result<Vec<Sample>, CliError> {
    let lumped = ds.lumped()?;
    let subsystems = ds.subsystems()?;
    let levels: Vec<Option<f64>> = if sigmas.is_empty() {
        vec![None]
    } else {
        sigmas.iter().copied().map(Some).collect()
    };
    levels
        .into_iter()
        .map(|s| {
            Ok(Sample {
                sigma: s.unwrap_or(ds.manifest.noise.sigma),
                lumped_bound: ds.bound(lumped.n(), s)?,
                subsystem_bounds: subsystems.iter().map(|d| ds.bound(d.own.n(), s)).collect::<Result<_, _>>()?,
                lumped: lumped.clone(),
                subsystems: subsystems.clone(),
                seed: None,
            })
        })
        .collect()
}

fn status_name(s: CertStatus) -> &'static str {
    match s {
        CertStatus::Certified => "certified",
        CertStatus::Unknown => "unknown",
        CertStatus::Inconclusive => "inconclusive",
    }
}

fn worst_code(codes: impl IntoIterator<Item = i32>) -> i32 {
    codes.into_iter().fold(EXIT_OK, |acc, c| match (acc, c) {
        (EXIT_INCONCLUSIVE, _) | (_, EXIT_INCONCLUSIVE) => EXIT_INCONCLUSIVE,
        (EXIT_UNKNOWN, _) | (_, EXIT_UNKNOWN) => EXIT_UNKNOWN,
        _ => EXIT_OK,
    })
}

fn cert_code(s: CertStatus) -> i32 {
    match s {
        CertStatus::Certified => EXIT_OK,
        CertStatus::Unknown => EXIT_UNKNOWN,
        CertStatus::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn cmd_analyze(cli: &Cli, cfg: &RunConfig, cfg_path: &Path, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let sys = cfg.system.as_ref().map(build_system).transpose()?;
    let (samples, graph) = if let Some(rel) = &cfg.data {
        let base = cfg_path.parent().unwrap_or(Path::new("."));
        let ds = load_dataset(&base.join(rel))?;
        let sigmas = cfg.experiment.as_ref().map(|e| e.sigmas.clone()).unwrap_or_default();
        let g = InterconnectionGraph::new(ds.trajectories.len(), &ds.manifest.edges)
            .map_err(|e| CliError::Data(e.to_string()))?;
        (dataset_samples(&ds, &sigmas)?, g)
    } else {
        let sys = sys.as_ref().ok_or_else(|| CliError::Usage("config needs 'system' or 'data'".into()))?;
        let sys = if sys.structure.is_some() { sys.clone() } else { as_single_vertex(sys) };
        let g = sys.structure.as_ref().expect("structured").graph.clone();
        (generated_samples(&sys, &experiment(cli, cfg)?)?, g)
    };
    let modes: Vec<Mode> = cli.mode.map_or_else(|| vec![Mode::Lumped, Mode::Structured], |m| vec![m]);
    let gamma_true = match &sys {
        Some(s) => Some(hinf_norm(s)?),
        None => None,
    };
    let opts = AnalysisOptions {
        require_negative_q_d: cfg.analysis.require_negative_q_d,
        ..AnalysisOptions::default()
    };
    let n_total = samples.first().map_or(0, |s| s.lumped.n());
    let (c_l, d_l) = match &sys {
        Some(s) if s.n() == n_total => (s.c.clone(), s.d.clone()),
        _ => {
            let m = samples.first().map_or(0, |s| s.lumped.m());
            (Mat::identity(n_total, n_total), Mat::zeros(n_total, m))
        }
    };
    let outputs: Vec<VertexOutput> = match sys.as_ref().and_then(|s| s.structure.as_ref()) {
        Some(st) if st.graph.vertices() == graph.vertices() => (0..graph.vertices())
            .map(|i| VertexOutput {
                c: st.c[i].clone(),
                d: st.d[i].clone(),
            })
            .collect(),
        _ => samples.first().map_or_else(Vec::new, |s| {
            s.subsystems
                .iter()
                .map(|d| VertexOutput {
                    c: Mat::identity(d.own.n(), d.own.n()),
                    d: Mat::zeros(d.own.n(), d.own.m()),
                })
                .collect()
        }),
    };

    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut codes = Vec::new();
    let _ = writeln!(stdout, "{:>10} {:>10} {:>12} {:>12} {:>12}", "sigma", "mode", "gamma", "status", "gamma_true");
    for s in &samples {
        for &mode in &modes {
            let t = Instant::now();
            let res: CertificationResult = match mode {
                Mode::Lumped => {
                    let dual = dual_qmi(&primal_qmi_lumped(&s.lumped, &s.lumped_bound)?, opts.cond_limit)?;
                    certify_lumped(&dual, &c_l, &d_l, &Performance::MinimizeHinf, &opts)?
                }
                Mode::Structured => {
                    let duals = structured_duals(&s.subsystems, &s.subsystem_bounds, opts.cond_limit)?;
                    certify_interconnected(&duals, &graph, &outputs, &Performance::MinimizeHinf, &opts)?
                }
            };
            eprintln!(
                "analyze: sigma {} {:?}: {:.1} ms",
                s.sigma,
                mode,
                t.elapsed().as_secs_f64() * 1e3
            );
            let status = status_name(res.status);
            let _ = writeln!(
                stdout,
                "{:>10} {:>10} {:>12} {:>12} {:>12}",
                s.sigma,
                format!("{mode:?}").to_lowercase(),
                res.gamma.map_or("-".into(), |g| format!("{g:.6}")),
                status,
                gamma_true.map_or("-".into(), |g| format!("{g:.6}"))
            );
            rows.push(vec![
                format!("{}", s.sigma),
                format!("{mode:?}").to_lowercase(),
                fmt_opt(res.gamma),
                status.to_string(),
                fmt_opt(gamma_true),
            ]);
            records.push(json!({
                "sigma": s.sigma,
                "mode": mode,
                "gamma": res.gamma,
                "status": status,
                "alpha": res.alpha,
                "iterations": res.iterations,
                "seed": s.seed,
            }));
            codes.push(cert_code(res.status));
        }
    }
    let dir = out_dir(cli)?;
    write_csv(dir, "analyze.csv", &["sigma", "mode", "gamma", "status", "gamma_true"], &rows)?;
    write_json(dir, "analyze.json", &json!({ "gamma_true": gamma_true, "runs": records }))?;
    Ok(worst_code(codes))
}

fn grid_from(cli: &Cli, spec: &SynthesisSpec) -> Result<AlphaGrid, CliError> {
    if let Some(f) = cli.alpha_grid {
        return Ok(match f {
            GridFlag::Default => AlphaGrid::Default,
            GridFlag::Extended => AlphaGrid::Extended,
        });
    }
    match &spec.alpha_grid {
        GridSpec::Named(n) if n == "default" => Ok(AlphaGrid::Default),
        GridSpec::Named(n) if n == "extended" => Ok(AlphaGrid::Extended),
        GridSpec::Named(n) => Err(CliError::Usage(format!("unknown alpha grid '{n}'"))),
        GridSpec::Values(v) => Ok(AlphaGrid::Custom(v.clone())),
    }
}

fn cmd_synth(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let sys = system(cfg)?;
    let sys = if sys.structure.is_some() { sys } else { as_single_vertex(&sys) };
    let st = sys.structure.as_ref().expect("structured");
    let g = st.graph.clone();
    let spec = PerformanceSpec::state(&g, &st.state_dims(), &st.input_dims());
    let e = experiment(cli, cfg)?;
    let opts = SynthesisOptions {
        grid: grid_from(cli, &cfg.synthesis)?,
        bisect: BisectOptions::new(cfg.synthesis.rel_tol),
        ..SynthesisOptions::default()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut codes = Vec::new();
    let _ = writeln!(stdout, "{:>10} {:>12} {:>12} {:>12}", "sigma", "gamma", "alpha", "status");
    for s in generated_samples(&sys, &e)? {
        let t = Instant::now();
        let data = SynthesisData::from_subsystems(&s.subsystems, &s.subsystem_bounds)?;
        let (gamma, alpha, status, extra) = match min_gamma_synthesis(&data, &g, &spec, cfg.synthesis.gamma_interval, &opts) {
            Ok(r) => {
                let spectra = |ps: &[Mat]| -> Vec<Vec<f64>> {
                    ps.iter()
                        .map(|p| crate::matrixcore::SymMat::symmetrized(p.clone()).eigenvalues())
                        .collect()
                };
                let extra = json!({
                    "lower": r.lower,
                    "evaluations": r.evaluations,
                    "bracket_uncertain": r.bracket_uncertain,
                    "controller_link_dims": r.witness.controller_link_dims,
                    "p_spectra": spectra(&r.witness.p),
                    "p_bar_spectra": spectra(&r.witness.p_bar),
                });
                let code = if r.bracket_uncertain { EXIT_INCONCLUSIVE } else { EXIT_OK };
                codes.push(code);
                (Some(r.gamma), Some(r.witness.alpha), "feasible", extra)
            }
            Err(SynthesisError::Bisect(BisectError::NoFeasiblePoint { .. })) => {
                codes.push(EXIT_UNKNOWN);
                (None, None, "unknown", json!({}))
            }
            Err(SynthesisError::Bisect(err)) => {
                codes.push(EXIT_INCONCLUSIVE);
                (None, None, "inconclusive", json!({ "reason": err.to_string() }))
            }
            Err(other) => return Err(other.into()),
        };
        eprintln!("synth: sigma {}: {:.1} ms", s.sigma, t.elapsed().as_secs_f64() * 1e3);
        let _ = writeln!(
            stdout,
            "{:>10} {:>12} {:>12} {:>12}",
            s.sigma,
            gamma.map_or("-".into(), |g| format!("{g:.6}")),
            alpha.map_or("-".into(), |a| format!("{a:.4}")),
            status
        );
        rows.push(vec![format!("{}", s.sigma), fmt_opt(gamma), fmt_opt(alpha), status.to_string()]);
        records.push(json!({
            "sigma": s.sigma,
            "gamma": gamma,
            "alpha": alpha,
            "status": status,
            "seed": s.seed,
            "result": extra,
        }));
    }
    let dir = out_dir(cli)?;
    write_csv(dir, "synth.csv", &["sigma", "gamma", "alpha", "status"], &rows)?;
    write_json(dir, "synth.json", &json!({ "runs": records }))?;
    Ok(worst_code(codes))
}

fn cmd_gen_data(cli: &Cli, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let dir = out_dir(cli)?.ok_or_else(|| CliError::Usage("gen-data needs --out <dir>".into()))?;
    let sys = system(cfg)?;
    let e = experiment(cli, cfg)?;
    let sigma = match (e.data_sigma, e.sigmas.as_slice()) {
        (Some(s), _) => s,
        (None, [s]) => *s,
        _ => return Err(CliError::Usage("gen-data needs exactly one noise level".into())),
    };
    let ex = generate_experiment(&sys, &ExperimentConfig::new(e.samples, sigma, e.noise, e.seed))?;
    let (trajs, edges): (Vec<TrajectoryData>, Vec<(usize, usize)>) = match &sys.structure {
        Some(st) => (ex.subsystems.iter().map(|s| s.own.clone()).collect(), st.graph.edges().to_vec()),
        None => (vec![ex.simulation.data.clone()], Vec::new()),
    };
    let kind = match e.noise {
        NoiseModel::Ball => NoiseKindTag::Energy,
        NoiseModel::Interval => NoiseKindTag::Box,
    };
    let manifest = save_dataset(
        dir,
        &trajs,
        &edges,
        NoiseSpec {
            kind,
            sigma,
            samples: e.samples,
        },
    )?;
    let _ = writeln!(stdout, "wrote {} trajectories and {}", trajs.len(), manifest.display());
    Ok(EXIT_OK)
}
