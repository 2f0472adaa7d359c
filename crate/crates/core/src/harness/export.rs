//! CSV and JSON outputs of a sweep, and replay from a run log.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{sweep, ComparisonRow, EpisodeMetrics, ExperimentConfig};
use crate::error::{Error, Result};

pub const LOG_FORMAT: &str = "pcmp-run-log";

/// Everything needed to reproduce and audit a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub format: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ComparisonRow>,
    pub episodes: Vec<Vec<EpisodeMetrics>>,
}

impl RunLog {
    pub fn new(config: ExperimentConfig, rows: Vec<ComparisonRow>, episodes: Vec<Vec<EpisodeMetrics>>) -> Result<Self> {
        Ok(Self { format: LOG_FORMAT.into(), config_hash: config.hash()?, config, rows, episodes })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let log: Self = serde_json::from_str(&text)?;
        if log.format != LOG_FORMAT {
            return Err(Error::Config(format!("{} is not a run log", path.display())));
        }
        Ok(log)
    }
}

/// Long-format line for the absolute and relative result panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub panel: String,
    pub series: String,
    pub r: f64,
    pub value: f64,
    pub spread: f64,
}

pub fn plot_rows(rows: &[ComparisonRow]) -> Vec<PlotRow> {
    let mut out = Vec::with_capacity(rows.len() * 4);
    for row in rows {
        let mut push = |panel: &str, series: &str, value: f64, spread: f64| {
            out.push(PlotRow { panel: panel.into(), series: series.into(), r: row.r, value, spread })
        };
        push("absolute", "collisions", row.collisions, 0.0);
        push("absolute", "path_length", row.path_length, 0.0);
        push("relative", "collisions_avoided_pct", row.avoided_pct, row.avoided_pct_std);
        push("relative", "detour_pct", row.detour_pct, row.detour_pct_std);
    }
    out
}

fn to_csv<T: Serialize>(items: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for item in items {
        w.serialize(item)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Precondition(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_to_csv(rows: &[ComparisonRow]) -> Result<String> {
    to_csv(rows)
}

pub fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<ComparisonRow>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub comparison_csv: PathBuf,
    pub run_log: PathBuf,
    pub plot_csv: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            comparison_csv: dir.join("comparison.csv"),
            run_log: dir.join("run_log.json"),
            plot_csv: dir.join("plot.csv"),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the comparison CSV, the JSON run log and the plot CSV into `dir`.
pub fn write_outputs(dir: &Path, log: &RunLog) -> Result<OutputPaths> {
    if log.rows.is_empty() {
        return Err(Error::Precondition("nothing to export".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths::in_dir(dir);
    write(&paths.comparison_csv, &rows_to_csv(&log.rows)?)?;
    write(&paths.run_log, &serde_json::to_string_pretty(log)?)?;
    write(&paths.plot_csv, &to_csv(&plot_rows(&log.rows))?)?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub identical: bool,
    pub original_csv: String,
    pub replayed_csv: String,
    /// `(line, original, replayed)` for every differing CSV line.
    pub differences: Vec<(usize, String, String)>,
    pub log: RunLog,
}

/// Re-runs the sweep stored in the log at `path` and compares CSV output.
/// A `comparison.csv` next to the log is the reference when present.
pub fn replay(path: &Path) -> Result<ReplayReport> {
    let original = RunLog::load(path)?;
    if original.config.hash()? != original.config_hash {
        return Err(Error::Config("run log config does not match its hash".into()));
    }
    let sibling = path.with_file_name("comparison.csv");
    let original_csv = if sibling.exists() {
        std::fs::read_to_string(&sibling).map_err(|e| Error::io(&sibling, e))?
    } else {
        rows_to_csv(&original.rows)?
    };
    let result = sweep(&original.config, None)?;
    let replayed_csv = rows_to_csv(&result.rows)?;
    let (a, b): (Vec<&str>, Vec<&str>) = (original_csv.lines().collect(), replayed_csv.lines().collect());
    let differences = (0..a.len().max(b.len()))
        .filter_map(|i| {
            let (x, y) = (a.get(i).copied().unwrap_or(""), b.get(i).copied().unwrap_or(""));
            (x != y).then(|| (i + 1, x.to_string(), y.to_string()))
        })
        .collect();
    let log = RunLog::new(original.config.clone(), result.rows, result.episodes)?;
    Ok(ReplayReport { identical: original_csv == replayed_csv, original_csv, replayed_csv, differences, log })
}
