//! Output files: `runs.csv`, `summary.json`, `hist_<name>.csv` and the config echo.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::batch::{Batch, RunRecord, OUTCOME_COLUMN};
use crate::harness::histogram::Histogram;
use crate::harness::scenario::ScenarioConfig;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "scenario.cfg";
pub const RECORD_FILE: &str = "record.json";
pub const RECORDS_DIR: &str = "records";

const FLAG_SEPARATOR: &str = ";";

/// Creates `dir`, refusing a non-empty existing directory unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::WouldOverwrite {
                path: dir.to_path_buf(),
            });
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn runs_header(metric_names: &[String]) -> Vec<String> {
    let mut header = vec![
        "run_index".to_string(),
        "seed".into(),
        OUTCOME_COLUMN.into(),
    ];
    header.extend(metric_names.iter().cloned());
    header.push("flags".into());
    header
}

/// Writes one row per run; the header is written even for an empty batch.
pub fn write_runs_csv(path: &Path, metric_names: &[String], records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(runs_header(metric_names))
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let mut row = vec![
            r.run_index.to_string(),
            r.seed.to_string(),
            opt_field(r.g_or_s),
        ];
        row.extend(r.metrics.iter().map(|&m| opt_field(m)));
        row.push(r.flags.join(FLAG_SEPARATOR));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `runs.csv` back into metric names and rows.
pub fn read_runs_csv(path: &Path) -> Result<(Vec<String>, Vec<RunRecord>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let n = header.len();
    if n < 4 || header[..3] != ["run_index", "seed", OUTCOME_COLUMN] || header[n - 1] != "flags" {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let names = header[3..n - 1].to_vec();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != n {
            return Err(parse_err(
                line,
                format!("expected {n} fields, found {}", row.len()),
            ));
        }
        let int = |i: usize| -> Result<u64> {
            row[i].parse().map_err(|_| {
                parse_err(
                    line,
                    format!("{}: not an integer: {:?}", header[i], &row[i]),
                )
            })
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if row[i].is_empty() {
                return Ok(None);
            }
            row[i]
                .parse()
                .map(Some)
                .map_err(|_| parse_err(line, format!("{}: not a number: {:?}", header[i], &row[i])))
        };
        records.push(RunRecord {
            run_index: int(0)? as usize,
            seed: int(1)?,
            g_or_s: opt(2)?,
            metrics: (3..n - 1).map(opt).collect::<Result<_>>()?,
            flags: row[n - 1]
                .split(FLAG_SEPARATOR)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        });
    }
    Ok((names, records))
}

/// Writes `bin_lo,bin_hi,count` rows.
pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["bin_lo", "bin_hi", "count"])
        .map_err(|e| csv_error(path, e))?;
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            c.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn histogram_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("hist_{name}.csv"))
}

pub fn record_path(dir: &Path, run_index: usize) -> PathBuf {
    dir.join(RECORDS_DIR)
        .join(format!("run_{run_index:05}.json"))
}

pub fn write_config(dir: &Path, config: &ScenarioConfig) -> Result<()> {
    write_text(&dir.join(CONFIG_FILE), &config.to_config_text())
}

/// Writes every batch file into an already prepared directory.
pub fn write_batch(dir: &Path, batch: &Batch) -> Result<()> {
    write_config(dir, &batch.config)?;
    write_runs_csv(&dir.join(RUNS_FILE), &batch.metric_names, &batch.records)?;
    write_json(&dir.join(SUMMARY_FILE), &batch.summary)?;
    for (name, h) in &batch.histograms {
        write_histogram_csv(&histogram_path(dir, name), h)?;
    }
    Ok(())
}
