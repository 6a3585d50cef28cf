//! Aggregation of run CSVs into a per-strategy summary table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{io_err, CliError, Result};
use crate::output::{parse_run_csv, CsvRow};

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub problem: String,
    pub strategy: String,
    pub m: usize,
    pub runs: usize,
    /// Mean final metric over runs.
    pub mean: f64,
    /// Half-width of the 95% t-interval; 0 for a single run.
    pub half_width: f64,
    /// Mean per-step wall-times over acquisition steps.
    pub fit_s: f64,
    pub acq_s: f64,
    pub ipa_s: f64,
}

/// Mean and 95% t-interval half-width.
pub fn t_interval(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Reads every `*.csv` in `dir` (sorted by name).
pub fn load_runs(dir: &Path) -> Result<Vec<(String, Vec<CsvRow>)>> {
    let mut names: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    let mut runs = Vec::with_capacity(names.len());
    for path in names {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let rows = parse_run_csv(&text, &path)?;
        runs.push((path.file_name().unwrap().to_string_lossy().into_owned(), rows));
    }
    if runs.is_empty() {
        return Err(CliError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no run CSVs found"),
        });
    }
    Ok(runs)
}

pub fn aggregate(runs: &[(String, Vec<CsvRow>)]) -> Vec<ReportRow> {
    type Key = (String, String, usize);
    let mut groups: BTreeMap<Key, Vec<&Vec<CsvRow>>> = BTreeMap::new();
    for (_, rows) in runs {
        let r = &rows[0];
        groups.entry((r.problem.clone(), r.strategy.clone(), r.m)).or_default().push(rows);
    }
    groups
        .into_iter()
        .map(|((problem, strategy, m), members)| {
            let finals: Vec<f64> = members
                .iter()
                .map(|rows| rows.iter().max_by_key(|r| r.step).expect("nonempty run").metric)
                .collect();
            let (mean, half_width) = t_interval(&finals);
            let steps: Vec<&CsvRow> = members.iter().flat_map(|rows| rows.iter().filter(|r| r.step > 0)).collect();
            let steps = if steps.is_empty() {
                members.iter().flat_map(|rows| rows.iter()).collect()
            } else {
                steps
            };
            let avg = |f: fn(&CsvRow) -> f64| steps.iter().map(|r| f(r)).sum::<f64>() / steps.len() as f64;
            ReportRow {
                problem,
                strategy,
                m,
                runs: finals.len(),
                mean,
                half_width,
                fit_s: avg(|r| r.fit_s),
                acq_s: avg(|r| r.acq_s),
                ipa_s: avg(|r| r.ipa_s),
            }
        })
        .collect()
}

pub fn render(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<14} {:<16} {:>5} {:>5} {:>14} {:>12} {:>10} {:>10} {:>10}",
        "problem", "strategy", "M", "runs", "final metric", "95% CI ±", "fit s", "acq s", "ipa s"
    )
    .unwrap();
    let mut single = false;
    for r in rows {
        let ci = if r.runs < 2 {
            single = true;
            "n/a*".to_string()
        } else {
            format!("{:.4e}", r.half_width)
        };
        writeln!(
            out,
            "{:<14} {:<16} {:>5} {:>5} {:>14.6e} {:>12} {:>10.4} {:>10.4} {:>10.4}",
            r.problem, r.strategy, r.m, r.runs, r.mean, ci, r.fit_s, r.acq_s, r.ipa_s
        )
        .unwrap();
    }
    if single {
        out.push_str("* single run: the interval degenerates to the point value\n");
    }
    out
}
