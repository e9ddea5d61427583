//! Reading `(x, y)` data files and running one selection on them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cv::{run_selection, Scheme, SplitSchedule};
use crate::error::{Error, Result};
use crate::estimators::ProcedureSpec;
use crate::rng::Stream;
use crate::scenario::Sample;

/// Smallest data set `select_from_data` accepts.
pub const MIN_ROWS: usize = 20;

/// Parses two-column CSV text. A header is allowed on the first line only.
pub fn parse_csv(text: &str) -> Result<Sample> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 fields, found {}", rec.len()) });
        }
        let parsed: Vec<Option<f64>> = rec.iter().map(|f| f.parse::<f64>().ok()).collect();
        match (parsed[0], parsed[1]) {
            (Some(a), Some(b)) => {
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::Parse { line, message: "non-finite value".into() });
                }
                x.push(a);
                y.push(b);
            }
            _ if line == 1 && parsed.iter().all(Option::is_none) => {}
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("not a number pair: `{}`", rec.iter().collect::<Vec<_>>().join(",")),
                })
            }
        }
    }
    Sample::new(x, y)
}

pub fn read_csv(path: &Path) -> Result<Sample> {
    parse_csv(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub winner: usize,
    pub winner_label: String,
    pub procedures: Vec<String>,
    pub votes: Vec<usize>,
    pub averaged: Vec<f64>,
    pub failures: Vec<Option<String>>,
    pub scheme: String,
    pub schedule: String,
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

/// Selects among `procedures` on observed data. Rows are put in `(x, y)`
/// order first, so the result does not depend on the file's row order.
pub fn select_from_data(
    sample: &Sample,
    procedures: &[ProcedureSpec],
    schedule: SplitSchedule,
    scheme: Scheme,
    seed: u64,
) -> Result<SelectReport> {
    if sample.len() < MIN_ROWS {
        return Err(Error::SampleTooSmall { n: sample.len(), min: MIN_ROWS });
    }
    if procedures.is_empty() {
        return Err(Error::InvalidSpec("no procedures given".into()));
    }
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample.x[a].total_cmp(&sample.x[b]).then(sample.y[a].total_cmp(&sample.y[b])));
    let sorted = sample.subset(&order);
    let mut stream = Stream::new(seed);
    let out = run_selection(procedures, &sorted, schedule, scheme, &mut stream)?;
    Ok(SelectReport {
        winner: out.selected,
        winner_label: procedures[out.selected].label.clone(),
        procedures: procedures.iter().map(|p| p.label.clone()).collect(),
        votes: out.votes,
        averaged: out.averaged,
        failures: out.failures,
        scheme: out.scheme_used,
        schedule: out.schedule_used,
        n: sample.len(),
        n1: out.n1,
        n2: out.n2,
        seed,
    })
}
