//! Consolidated summary of a directory of runs.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};
use crate::output::{num, Manifest, OutDir, MANIFEST};

pub const HEADER: [&str; 10] =
    ["run", "command", "model", "lambda0", "c1", "c2", "gamma_bound", "max_tv_slack", "verdicts", "status"];

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn row(run: &str, m: &Manifest) -> Vec<String> {
    let s = &m.summary;
    vec![
        run.to_string(),
        m.command.clone(),
        m.model.clone(),
        opt(s.lambda0),
        opt(s.c1),
        opt(s.c2),
        opt(s.gamma_bound),
        opt(s.max_tv_slack),
        m.verdicts.join(";"),
        "complete".into(),
    ]
}

fn incomplete(run: &str, why: &str) -> Vec<String> {
    let mut r = vec![String::new(); HEADER.len()];
    r[0] = run.to_string();
    r[9] = format!("incomplete: {why}");
    r
}

fn read_manifest(p: &Path) -> std::result::Result<Manifest, String> {
    let text = fs::read_to_string(p).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// One row per run: `dir` itself if it holds a manifest, then each
/// subdirectory in name order. Directories without a readable manifest are
/// listed as incomplete.
pub fn summarize(dir: &Path) -> Result<Vec<Vec<String>>> {
    let mut rows = vec![];
    let own = dir.join(MANIFEST);
    if own.exists() {
        rows.push(match read_manifest(&own) {
            Ok(m) => row(".", &m),
            Err(e) => incomplete(".", &e),
        });
    }
    let mut subdirs: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    subdirs.sort();
    for d in subdirs {
        let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let m = d.join(MANIFEST);
        rows.push(if !m.exists() {
            incomplete(&name, "missing manifest")
        } else {
            match read_manifest(&m) {
                Ok(man) => row(&name, &man),
                Err(e) => incomplete(&name, &e),
            }
        });
    }
    Ok(rows)
}

/// Fixed-width text rendering of the summary.
pub fn render(rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = HEADER.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let s: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(HEADER.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Writes `summary.csv` and `summary.txt` into `dir` and returns the text.
pub fn report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    let rows = summarize(dir)?;
    let text = render(&rows);
    let mut out = OutDir::create(dir)?;
    out.csv("summary.csv", &HEADER, rows)?;
    out.text("summary.txt", &text)?;
    Ok(text)
}
