//! JSON run configurations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use qsdlab_core::{BDSpec, Generator, MultiBDSpec};
use qsdlab_neutron::{Bins, CellPartition, InitLaw, NeutronSpec, Point, QsdMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Spectral triple of a chain.
    Solve,
    /// Spectral triple plus criteria certificate and TV-vs-bound table.
    Certify,
    /// One-dimensional birth-death chain: certificate and S-series.
    Bd,
    /// Multi-type birth-death chain: certificate, cooperation check, dominating series.
    Multibd,
    /// Neutron transport Monte Carlo.
    Neutron,
    /// Summarizes the run directories below `--out`.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Certify => "certify",
            Self::Bd => "bd",
            Self::Multibd => "multibd",
            Self::Neutron => "neutron",
            Self::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "qsdlab", version, about = "Quasi-stationary distributions: solve, certify, simulate")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON configuration (not used by `report`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; for `report`, the directory of runs to summarize.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "QSDLAB_THREADS")]
    pub threads: Option<usize>,
    /// Residual tolerance of the spectral solve.
    #[arg(long)]
    pub tol: Option<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-10;

/// Reads and parses a JSON file, reporting syntax errors by line and column.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    match serde_json::from_str(&text) {
        Ok(v) => Ok((v, bytes)),
        Err(e) => Err(CliError::Config {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            // serde_json appends the position itself.
            msg: e.to_string().rsplit_once(" at line ").map_or_else(|| e.to_string(), |(m, _)| m.to_string()),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub step: f64,
    pub end: f64,
}

impl TimeGrid {
    /// `0, step, 2 step, ..` up to `end` (inclusive up to rounding).
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.end >= 0.0 && self.end.is_finite()) {
            return Err(CliError::Usage("time grid needs step > 0 and a finite end >= 0".into()));
        }
        let n = (self.end / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "four")]
    pub grid_divisions: usize,
}

fn four() -> usize {
    4
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { t0: None, t_max: None, grid_divisions: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "one")]
    pub z: usize,
}

fn default_k_max() -> usize {
    10_000
}

fn one() -> usize {
    1
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { k_max: default_k_max(), z: 1 }
    }
}

pub const DEFAULT_MAX_STARTS: usize = 200;

/// Input of `solve`, `certify`, `bd` and `multibd`: exactly one model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub generator: Option<Generator>,
    #[serde(default)]
    pub bd: Option<BDSpec<f64>>,
    #[serde(default)]
    pub multibd: Option<MultiBDSpec<f64>>,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default = "chain_times")]
    pub times: TimeGrid,
    /// Dirac starts of the TV-vs-bound table; default all states, or an
    /// evenly spaced subset of 200 on larger chains.
    #[serde(default)]
    pub starts: Option<Vec<usize>>,
    #[serde(default)]
    pub series: SeriesConfig,
}

fn chain_times() -> TimeGrid {
    TimeGrid { step: 0.25, end: 20.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsdConfig {
    pub t_star: f64,
    #[serde(default = "both_modes")]
    pub modes: Vec<QsdMode>,
    pub bins: Bins,
    /// Defaults to the run's `N`.
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
}

fn both_modes() -> Vec<QsdMode> {
    vec![QsdMode::Naive, QsdMode::FlemingViot]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub x: Point,
    #[serde(default = "east")]
    pub u: Point,
    pub t: f64,
    pub cells: CellPartition,
    #[serde(default, rename = "N")]
    pub n: Option<usize>,
}

fn east() -> Point {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeutronConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: NeutronSpec,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "uniform")]
    pub init: InitLaw,
    #[serde(default = "neutron_times")]
    pub times: TimeGrid,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub qsd: Option<QsdConfig>,
    #[serde(default)]
    pub bound: Option<BoundConfig>,
}

fn uniform() -> InitLaw {
    InitLaw::Uniform
}

fn neutron_times() -> TimeGrid {
    TimeGrid { step: 0.1, end: 5.0 }
}
