//! Run CSVs and experiment summaries.
//!
//! Each run CSV starts with a `# schema=1` line followed by the header
//! `step,evals,metric,fit_s,acq_s,ipa_s,seed,strategy,M,problem`. Floats
//! carry 17 significant digits, so reruns of a seeded cell reproduce every
//! column except the three wall-time ones byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ipalloc::engine::RunRecord;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

pub const SCHEMA_LINE: &str = "# schema=1";
pub const HEADER: &str = "step,evals,metric,fit_s,acq_s,ipa_s,seed,strategy,M,problem";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

/// File name of a cell's CSV; `:` in strategy specs becomes `-`.
pub fn csv_name(problem: &str, label: &str, inducing: usize, seed: u64) -> String {
    format!("{problem}_{}_M{inducing}_seed{seed}.csv", label.replace(':', "-"))
}

/// CSV text of one run. The `M` column is 0 for exact-GP runs.
pub fn run_csv(record: &RunRecord, label: &str, inducing: usize) -> String {
    let mut out = format!("{SCHEMA_LINE}\n{HEADER}\n");
    for s in &record.steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.step,
            s.evals,
            float(s.metric),
            float(s.fit_s),
            float(s.acq_s),
            float(s.ipa_s),
            record.seed,
            label,
            inducing,
            record.problem
        )
        .expect("writing to a String");
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub step: usize,
    pub evals: usize,
    pub metric: f64,
    pub fit_s: f64,
    pub acq_s: f64,
    pub ipa_s: f64,
    pub seed: u64,
    pub strategy: String,
    pub m: usize,
    pub problem: String,
}

fn parse_field<T: std::str::FromStr>(raw: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| CliError::SchemaMismatch {
        path: path.to_path_buf(),
        message: format!("line {line}: cannot parse {what} from '{raw}'"),
    })
}

/// Parses a run CSV, checking the schema line and header.
pub fn parse_run_csv(text: &str, path: &Path) -> Result<Vec<CsvRow>> {
    let mismatch = |message: String| CliError::SchemaMismatch {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == SCHEMA_LINE => {}
        other => return Err(mismatch(format!("expected '{SCHEMA_LINE}', found {:?}", other.unwrap_or("")))),
    }
    match lines.next() {
        Some(l) if l.trim() == HEADER => {}
        other => return Err(mismatch(format!("expected header '{HEADER}', found {:?}", other.unwrap_or("")))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let n = i + 3;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(mismatch(format!("line {n}: expected 10 fields, found {}", f.len())));
        }
        rows.push(CsvRow {
            step: parse_field(f[0], "step", path, n)?,
            evals: parse_field(f[1], "evals", path, n)?,
            metric: parse_field(f[2], "metric", path, n)?,
            fit_s: parse_field(f[3], "fit_s", path, n)?,
            acq_s: parse_field(f[4], "acq_s", path, n)?,
            ipa_s: parse_field(f[5], "ipa_s", path, n)?,
            seed: parse_field(f[6], "seed", path, n)?,
            strategy: f[7].to_string(),
            m: parse_field(f[8], "M", path, n)?,
            problem: f[9].trim().to_string(),
        });
    }
    if rows.is_empty() {
        return Err(mismatch("no data rows".into()));
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: String,
    pub model: String,
    pub seed: u64,
    pub csv: String,
    pub final_metric: f64,
    pub total_overhead_s: f64,
    pub steps: usize,
    pub fit_failures: usize,
    pub believed_optimum: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema: u32,
    pub problem: String,
    pub config: crate::config::ExperimentConfig,
    pub runs: Vec<CellSummary>,
}

impl ExperimentSummary {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(SUMMARY_FILE);
        let json = serde_json::to_string_pretty(self).expect("summary serialises");
        write_atomic(&path, format!("{json}\n").as_bytes())?;
        Ok(path)
    }
}
