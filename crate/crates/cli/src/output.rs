//! Run directories: JSON and CSV artifacts, the plotting stub and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub struct OutDir {
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: vec![] })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&self.dir, e.into_error()))?;
        self.write(name, &bytes)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.write(name, body.as_bytes())
    }

    /// Writes `plot.py` for the CSV files present, if any.
    pub fn plot_script(&mut self) -> Result<()> {
        let csvs: Vec<String> = self.artifacts.iter().filter(|a| a.ends_with(".csv")).cloned().collect();
        if csvs.is_empty() {
            return Ok(());
        }
        let list = csvs.iter().map(|c| format!("    \"{c}\",")).collect::<Vec<_>>().join("\n");
        self.text("plot.py", &PLOT_STUB.replace("{FILES}", &list))
    }
}

const PLOT_STUB: &str = r#"# Generated by qsdlab. Plots the run's CSV files with matplotlib.
import csv
import pathlib

import matplotlib.pyplot as plt

HERE = pathlib.Path(__file__).resolve().parent
FILES = [
{FILES}
]


def load(name):
    with open(HERE / name, newline="") as f:
        return list(csv.DictReader(f))


def col(rows, key):
    return [float(r[key]) for r in rows]


for name in FILES:
    rows = load(name)
    if not rows:
        continue
    fig, ax = plt.subplots()
    if name == "tv_vs_bound.csv":
        starts = sorted({r["start"] for r in rows}, key=int)
        for s in starts:
            sub = [r for r in rows if r["start"] == s]
            ax.semilogy(col(sub, "t"), col(sub, "tv"), lw=0.5, color="C0")
        sub = [r for r in rows if r["start"] == starts[0]]
        ax.semilogy(col(sub, "t"), col(sub, "bound"), color="C3", label="bound")
        ax.legend()
    elif name == "survival.csv":
        ax.semilogy(col(rows, "t"), col(rows, "survival"))
        ax.fill_between(col(rows, "t"), col(rows, "ci_lo"), col(rows, "ci_hi"), alpha=0.3)
    elif name == "c2_ratio.csv":
        ax.plot(col(rows, "t"), col(rows, "ratio_nu"), label="nu")
        ax.plot(col(rows, "t"), col(rows, "ratio_alpha"), label="alpha")
        ax.legend()
    elif name.startswith("qsd_"):
        ax.bar(range(len(rows)), col(rows, "mass"))
    elif name == "bound.csv":
        ax.scatter(col(rows, "rhs"), col(rows, "empirical"), s=4)
        ax.axline((0, 0), slope=1, color="k", lw=0.5)
    ax.set_title(name)
    fig.savefig(HERE / (name[:-4] + ".png"), dpi=120)
"#;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub lambda0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub gamma_bound: Option<f64>,
    /// `max(TV − bound)` over the TV-vs-bound table; non-positive when the bound holds.
    pub max_tv_slack: Option<f64>,
}

/// Result of one command before it is written down.
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub model: String,
    pub seed: Option<u64>,
    pub summary: Summary,
    pub verdicts: Vec<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub model: String,
    pub config: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    pub artifacts: Vec<String>,
    pub summary: Summary,
    pub verdicts: Vec<String>,
    pub exit_code: i32,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub created_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("qsdlab-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("qsdlab-core".to_string(), qsdlab_core::VERSION.to_string()),
        ("qsdlab-neutron".to_string(), qsdlab_neutron::VERSION.to_string()),
    ])
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
