//! Seeded Monte Carlo experiments over scenario × n × schedule × scheme grids.
//!
//! Each replication draws its stream from a hash of
//! `(master_seed, case, n, schedule, scheme, replication)`, runs on a worker
//! pool, and is written back by task index. The output therefore does not
//! depend on the thread count or on scheduling.

mod config;
pub mod dataset;
pub mod plot;
mod table;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExcludedCell, ExperimentConfig, Resolved};
pub use table::{CellRow, CellStatus, FrequencyTable, CSV_HEADER};

use crate::cv::{run_selection, Scheme, SchemeKind, SplitSchedule};
use crate::error::{Error, Result};
use crate::estimators::ProcedureSpec;
use crate::rng::{hash_str, Stream};
use crate::scenario::Scenario;

/// Master seed used by [`reproduce_config`].
pub const REPRODUCE_SEED: u64 = 2007;

struct Cell {
    case: usize,
    n: usize,
    schedule: usize,
    scheme: usize,
    n1: usize,
    n2: usize,
    status: CellStatus,
}

/// Estimation and evaluation sizes of the first split a scheme produces.
fn split_sizes(n: usize, schedule: SplitSchedule, scheme: Scheme) -> Result<(usize, usize)> {
    match scheme.kind {
        SchemeKind::KFold(r) => {
            if r < 2 || r > n {
                return Err(Error::InvalidSpec(format!("fold count {r} must lie in [2, {n}]")));
            }
            let largest = n.div_ceil(r);
            Ok((n - largest, largest))
        }
        _ => {
            let n1 = schedule.resolve(n)?;
            Ok((n1, n - n1))
        }
    }
}

fn plan_cells(config: &ExperimentConfig, resolved: &Resolved) -> Vec<Cell> {
    let mut cells = Vec::new();
    let needs = resolved.procedures.iter().map(ProcedureSpec::min_points).max().unwrap_or(1);
    for (ci, sc) in resolved.scenarios.iter().enumerate() {
        for &n in &config.n_grid {
            for (si, sched) in resolved.schedules.iter().enumerate() {
                for (mi, scheme) in resolved.schemes.iter().enumerate() {
                    let (n1, n2, mut status) = match split_sizes(n, *sched, *scheme) {
                        Ok((n1, n2)) => (n1, n2, CellStatus::Ok),
                        Err(e) => (0, 0, CellStatus::Excluded(e.to_string())),
                    };
                    if status == CellStatus::Ok {
                        if config.is_listed_exclusion(&sc.id(), &sched.id(), n) {
                            status = CellStatus::Excluded("listed in the configuration".into());
                        } else if n1 < needs {
                            status = CellStatus::Excluded(format!(
                                "estimation size {n1} below the {needs} points a candidate requires"
                            ));
                        } else if let Some(min) = config.spline_min_estimation {
                            if ExperimentConfig::has_spline(&resolved.procedures) && n1 < min {
                                status = CellStatus::Excluded(format!("spline estimation size {n1} < {min}"));
                            }
                        }
                    }
                    cells.push(Cell { case: ci, n, schedule: si, scheme: mi, n1, n2, status });
                }
            }
        }
    }
    cells
}

/// Outcome of one replication: the winner or an error message.
type RepResult = std::result::Result<usize, String>;

fn run_rep(
    scenario: &Scenario,
    procedures: &[ProcedureSpec],
    n: usize,
    schedule: SplitSchedule,
    scheme: Scheme,
    master_seed: u64,
    rep: usize,
) -> RepResult {
    let mut stream = Stream::from_parts(&[
        master_seed,
        hash_str(&scenario.id()),
        n as u64,
        hash_str(&schedule.id()),
        hash_str(&scheme.id()),
        rep as u64,
    ]);
    let sample = scenario.gen_sample(n, &mut stream).map_err(|e| e.to_string())?;
    run_selection(procedures, &sample, schedule, scheme, &mut stream).map(|o| o.selected).map_err(|e| e.to_string())
}

/// Runs every cell of the grid. Cell-level problems are recorded in the
/// table; only configuration errors abort the run. Artifacts are written
/// when `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<FrequencyTable> {
    let resolved = config.resolve()?;
    let cells = plan_cells(config, &resolved);
    let tasks: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.status == CellStatus::Ok)
        .flat_map(|(i, _)| (0..config.reps).map(move |r| (i, r)))
        .collect();

    let work = || -> Vec<RepResult> {
        tasks
            .par_iter()
            .map(|&(ci, rep)| {
                let c = &cells[ci];
                run_rep(
                    &resolved.scenarios[c.case],
                    &resolved.procedures,
                    c.n,
                    resolved.schedules[c.schedule],
                    resolved.schemes[c.scheme],
                    config.master_seed,
                    rep,
                )
            })
            .collect()
    };
    let results = match config.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let labels: Vec<String> = resolved.procedures.iter().map(|p| p.label.clone()).collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut cursor = 0;
    for c in &cells {
        let sc = &resolved.scenarios[c.case];
        let mut row = CellRow {
            case: sc.id(),
            n: c.n,
            n1: c.n1,
            n2: c.n2,
            schedule: resolved.schedules[c.schedule].id(),
            scheme: resolved.schemes[c.scheme].id(),
            reps: 0,
            seed: config.master_seed,
            status: c.status.clone(),
            procedures: labels.clone(),
            best: sc.best_proc,
            counts: vec![0; labels.len()],
            failed: 0,
            winners: Vec::new(),
            error: None,
        };
        if c.status == CellStatus::Ok {
            row.reps = config.reps;
            for r in &results[cursor..cursor + config.reps] {
                match r {
                    Ok(w) => {
                        row.counts[*w] += 1;
                        row.winners.push(Some(*w));
                    }
                    Err(msg) => {
                        row.failed += 1;
                        row.winners.push(None);
                        row.error.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            cursor += config.reps;
        }
        rows.push(row);
    }
    let table = FrequencyTable { rows };
    if let Some(prefix) = &config.output {
        table.write(std::path::Path::new(prefix))?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 200 replications, n in {100, 200, 400, 800, 1600}.
    Full,
    /// 100 replications, n in {100, 400, 1600}.
    Desk,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Scale::Full),
            "desk" => Ok(Scale::Desk),
            _ => Err(Error::InvalidSpec(format!("unknown scale `{s}`"))),
        }
    }
}

/// The simulation grid for one of the three regression cases: linear,
/// quadratic and spline candidates; single split, RLT and RSV with 100
/// splits. Cases 1 and 2 use ratios 9:1, 5:5, 3:7 and 1:9; case 3 only 9:1
/// and 5:5, without the two smallest sizes at 5:5. Spline cells with fewer
/// than 40 estimation points are excluded.
pub fn reproduce_config(case: u8, scale: Scale) -> Result<ExperimentConfig> {
    if !(1..=3).contains(&case) {
        return Err(Error::InvalidSpec(format!("case must be 1, 2 or 3, got {case}")));
    }
    let (n_grid, reps) = match scale {
        Scale::Full => (vec![100, 200, 400, 800, 1600], 200),
        Scale::Desk => (vec![100, 400, 1600], 100),
    };
    let id = format!("case{case}");
    let schedules: Vec<String> = if case == 3 {
        vec!["ratio:9:1".into(), "ratio:5:5".into()]
    } else {
        ["ratio:9:1", "ratio:5:5", "ratio:3:7", "ratio:1:9"].map(String::from).to_vec()
    };
    let exclude = if case == 3 {
        [100, 200]
            .into_iter()
            .filter(|n| n_grid.contains(n))
            .map(|n| ExcludedCell { case: id.clone(), schedule: "ratio:5:5".into(), n })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ExperimentConfig {
        cases: vec![id],
        procedures: vec!["poly:1".into(), "poly:2".into(), "spline".into()],
        schemes: vec!["single".into(), "rlt:100".into(), "rsv:100".into()],
        schedules,
        n_grid,
        reps,
        master_seed: REPRODUCE_SEED + u64::from(case),
        threads: None,
        output: None,
        sigma: None,
        best: None,
        spline_min_estimation: Some(40),
        exclude,
    })
}

pub fn reproduce_case(case: u8, scale: Scale) -> Result<FrequencyTable> {
    run_experiment(&reproduce_config(case, scale)?)
}
