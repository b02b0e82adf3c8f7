//! Trajectory CSV files and the dataset manifest.
//!
//! Each subsystem is one CSV with header `t,x_1..x_n,u_1..u_m` and rows
//! `t = 0..N`; the input cells of the final row are empty. The manifest is
//! JSON listing the files, graph edges and the noise-bound parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{box_energy_bound, energy_bound, split_trajectory, DataError, NoiseBound, SubsystemData, TrajectoryData};
use crate::matrixcore::{vstack, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKindTag {
    /// `Σ‖w_k‖² ≤ Nσ²`.
    Energy,
    /// Per-entry `|w_k| ≤ σ`, relaxed to the energy bound at `σ√n`.
    Box,
    Instrumental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKindTag,
    pub sigma: f64,
    #[serde(rename = "N")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// CSV file names relative to the manifest directory, one per subsystem.
    pub files: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
    pub noise: NoiseSpec,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io(format!("{}: {e}", path.display()))
}

pub fn write_trajectory(path: &Path, d: &TrajectoryData) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let (n, m) = (d.n(), d.m());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    let n_s = d.samples();
    for t in 0..=n_s {
        let mut rec = vec![t.to_string()];
        rec.extend((0..n).map(|i| format!("{:e}", d.x()[(i, t)])));
        if t < n_s {
            rec.extend((0..m).map(|i| format!("{:e}", d.u_minus()[(i, t)])));
        } else {
            rec.extend((0..m).map(|_| String::new()));
        }
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryData, DataError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.first() != Some(&"t") {
        return Err(DataError::Format(format!("{}: first column must be 't'", path.display())));
    }
    let n = names.iter().filter(|h| h.starts_with("x_")).count();
    let m = names.iter().filter(|h| h.starts_with("u_")).count();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .chain((1..=m).map(|i| format!("u_{i}")))
        .collect();
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(DataError::Format(format!(
            "{}: header must be t,x_1..x_n,u_1..u_m",
            path.display()
        )));
    }
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut us: Vec<Vec<f64>> = Vec::new();
    let parse = |s: &str, row: usize| -> Result<f64, DataError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| DataError::Format(format!("{}: row {row}: bad number '{s}'", path.display())))
    };
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(|e| io_err(path, e))?);
    }
    let last = rows.len().saturating_sub(1);
    for (row, rec) in rows.iter().enumerate() {
        let t = parse(&rec[0], row)?;
        if t != row as f64 {
            return Err(DataError::Format(format!(
                "{}: row {row} has t = {t}, expected {row}",
                path.display()
            )));
        }
        xs.push((1..=n).map(|c| parse(&rec[c], row)).collect::<Result<_, _>>()?);
        if row < last {
            us.push((n + 1..=n + m).map(|c| parse(&rec[c], row)).collect::<Result<_, _>>()?);
        }
    }
    if xs.len() < 2 {
        return Err(DataError::Format(format!("{}: need at least two samples", path.display())));
    }
    let x = Mat::from_fn(n, xs.len(), |i, t| xs[t][i]);
    let u = Mat::from_fn(m, us.len(), |i, t| us[t][i]);
    split_trajectory(x, u)
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<(), DataError> {
    let s = serde_json::to_string_pretty(m).map_err(|e| io_err(path, e))?;
    fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, DataError> {
    let s = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&s).map_err(|e| DataError::Format(format!("{}: {e}", path.display())))
}

/// A manifest together with its loaded trajectories.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub trajectories: Vec<TrajectoryData>,
}

impl Dataset {
    /// Stacked trajectory of all subsystems.
    pub fn lumped(&self) -> Result<TrajectoryData, DataError> {
        let xs: Vec<&Mat> = self.trajectories.iter().map(|t| t.x()).collect();
        let us: Vec<&Mat> = self.trajectories.iter().map(|t| t.u_minus()).collect();
        split_trajectory(vstack(&xs)?, vstack(&us)?)
    }

    /// Per-subsystem records with neighbor states taken from the manifest edges.
    pub fn subsystems(&self) -> Result<Vec<SubsystemData>, DataError> {
        let l = self.trajectories.len();
        if let Some(&(a, b)) = self.manifest.edges.iter().find(|(a, b)| *a >= l || *b >= l || a == b) {
            return Err(DataError::Format(format!("edge ({a}, {b}) is invalid for {l} subsystems")));
        }
        (0..l)
            .map(|i| {
                let mut nb: Vec<usize> = self
                    .manifest
                    .edges
                    .iter()
                    .filter_map(|&(a, b)| (a == i).then_some(b).or((b == i).then_some(a)))
                    .collect();
                nb.sort_unstable();
                nb.dedup();
                let recs: Vec<(usize, &Mat)> = nb.iter().map(|&j| (j, self.trajectories[j].x())).collect();
                SubsystemData::new(i, self.trajectories[i].clone(), &recs)
            })
            .collect()
    }

    /// Bound of dimension `n` at the manifest level, or at `sigma` when given.
    pub fn bound(&self, n: usize, sigma: Option<f64>) -> Result<NoiseBound, DataError> {
        let s = sigma.unwrap_or(self.manifest.noise.sigma);
        let samples = self.manifest.noise.samples;
        match self.manifest.noise.kind {
            NoiseKindTag::Energy => energy_bound(s, samples, n),
            NoiseKindTag::Box => box_energy_bound(s, samples, n),
            NoiseKindTag::Instrumental => Err(DataError::Format(
                "instrumental bounds need the instrument matrix and cannot be rebuilt from a manifest".into(),
            )),
        }
    }
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DataError> {
    let manifest = read_manifest(manifest_path)?;
    let dir: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let trajectories = manifest
        .files
        .iter()
        .map(|f| read_trajectory(&dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = trajectories.iter().find(|t| t.samples() != manifest.noise.samples) {
        return Err(DataError::LengthMismatch(format!(
            "manifest declares N = {}, a trajectory has N = {}",
            manifest.noise.samples,
            bad.samples()
        )));
    }
    Ok(Dataset {
        manifest,
        trajectories,
    })
}

/// Write every trajectory as `sub_<i>.csv` next to `manifest.json` in `dir`.
pub fn save_dataset(
    dir: &Path,
    trajectories: &[TrajectoryData],
    edges: &[(usize, usize)],
    noise: NoiseSpec,
) -> Result<PathBuf, DataError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::with_capacity(trajectories.len());
    for (i, t) in trajectories.iter().enumerate() {
        let name = format!("sub_{i}.csv");
        write_trajectory(&dir.join(&name), t)?;
        files.push(name);
    }
    let manifest = Manifest {
        files,
        edges: edges.to_vec(),
        noise,
    };
    let path = dir.join("manifest.json");
    write_manifest(&path, &manifest)?;
    Ok(path)
}
