use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Left out of the grid; the reason names the violated requirement.
    Excluded(String),
}

/// Selection tallies for one `(case, n, schedule, scheme)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub case: String,
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub schedule: String,
    pub scheme: String,
    pub reps: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub procedures: Vec<String>,
    /// Index of the procedure counted as correct.
    pub best: usize,
    /// Times each procedure was selected.
    pub counts: Vec<usize>,
    /// Replications in which every procedure failed.
    pub failed: usize,
    /// Per-replication winner, `None` for failed replications.
    pub winners: Vec<Option<usize>>,
    /// First error message seen in the cell, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellRow {
    pub fn freq(&self, j: usize) -> f64 {
        if self.reps == 0 {
            0.0
        } else {
            self.counts[j] as f64 / self.reps as f64
        }
    }

    pub fn best_freq(&self) -> f64 {
        self.freq(self.best)
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub rows: Vec<CellRow>,
}

pub const CSV_HEADER: &str = "case,n,n1,n2,schedule,scheme,procedure,freq,reps,seed";

impl FrequencyTable {
    pub fn find(&self, case: &str, n: usize, schedule: &str, scheme: &str) -> Option<&CellRow> {
        self.rows.iter().find(|r| r.case == case && r.n == n && r.schedule == schedule && r.scheme == scheme)
    }

    /// Cells that ran but had at least one failed replication.
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.failed > 0)
    }

    /// One line per procedure of every cell that ran.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().filter(|r| r.is_ok()) {
            for (j, p) in r.procedures.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.case,
                    r.n,
                    r.n1,
                    r.n2,
                    r.schedule,
                    r.scheme,
                    p,
                    r.freq(j),
                    r.reps,
                    r.seed
                )
                .expect("write to string");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("frequency table: {e}")))
    }

    /// Writes `<prefix>.csv` and `<prefix>.json`.
    pub fn write(&self, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let csv = with_suffix(prefix, "csv");
        let json = with_suffix(prefix, "json");
        std::fs::write(&csv, self.to_csv())?;
        std::fs::write(&json, self.to_json())?;
        Ok((csv, json))
    }
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
