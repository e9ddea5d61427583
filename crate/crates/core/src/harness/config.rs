use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cv::{Scheme, SplitSchedule};
use crate::error::{Error, Result};
use crate::estimators::{ProcedureKind, ProcedureSpec};
use crate::scenario::Scenario;

/// A grid of simulation cells: every case × n × schedule × scheme, each run
/// for `reps` seeded replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cases: Vec<String>,
    pub procedures: Vec<String>,
    pub schemes: Vec<String>,
    pub schedules: Vec<String>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Path prefix for `<prefix>.csv` and `<prefix>.json`.
    #[serde(default)]
    pub output: Option<String>,
    /// Overrides the noise level of every case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Procedure id counted as correct for each case, parallel to `cases`.
    /// Defaults to the case's own best index into `procedures`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<Vec<String>>,
    /// Cells whose estimation size is below this are excluded when a spline
    /// is among the candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spline_min_estimation: Option<usize>,
    /// Individual cells left out of the grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<ExcludedCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcludedCell {
    pub case: String,
    pub schedule: String,
    pub n: usize,
}

/// A validated configuration with every id resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenarios: Vec<Scenario>,
    pub procedures: Vec<ProcedureSpec>,
    pub schemes: Vec<Scheme>,
    pub schedules: Vec<SplitSchedule>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.reps == 0 {
            return Err(Error::InvalidSpec("reps must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n < 2) {
            return Err(Error::InvalidSpec("n_grid must be non-empty with every n >= 2".into()));
        }
        if self.cases.is_empty() || self.procedures.is_empty() || self.schemes.is_empty() || self.schedules.is_empty() {
            return Err(Error::InvalidSpec("cases, procedures, schemes and schedules must be non-empty".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidSpec("threads must be >= 1".into()));
        }
        let procedures = self.procedures.iter().map(|s| s.parse()).collect::<Result<Vec<ProcedureSpec>>>()?;
        let mut scenarios = Vec::with_capacity(self.cases.len());
        for (i, id) in self.cases.iter().enumerate() {
            let mut sc: Scenario = id.parse()?;
            if let Some(sigma) = self.sigma {
                sc = sc.with_sigma(sigma)?;
            }
            if let Some(best) = &self.best {
                if best.len() != self.cases.len() {
                    return Err(Error::InvalidSpec("`best` must list one procedure per case".into()));
                }
                sc.best_proc = self.procedures.iter().position(|p| p.trim() == best[i].trim()).ok_or_else(|| {
                    Error::InvalidSpec(format!("best procedure `{}` is not among the candidates", best[i]))
                })?;
            }
            if sc.best_proc >= procedures.len() {
                return Err(Error::InvalidSpec(format!(
                    "case `{id}` names best index {} but only {} procedures are listed",
                    sc.best_proc,
                    procedures.len()
                )));
            }
            scenarios.push(sc);
        }
        let schemes = self.schemes.iter().map(|s| s.parse()).collect::<Result<Vec<Scheme>>>()?;
        let schedules = self.schedules.iter().map(|s| s.parse()).collect::<Result<Vec<SplitSchedule>>>()?;
        for ex in &self.exclude {
            ex.schedule.parse::<SplitSchedule>()?;
            ex.case.parse::<Scenario>()?;
        }
        Ok(Resolved { scenarios, procedures, schemes, schedules })
    }

    pub(crate) fn has_spline(procs: &[ProcedureSpec]) -> bool {
        procs.iter().any(|p| matches!(p.kind, ProcedureKind::SmoothingSpline(_)))
    }

    pub(crate) fn is_listed_exclusion(&self, case: &str, schedule: &str, n: usize) -> bool {
        self.exclude.iter().any(|e| e.case == case && e.schedule == schedule && e.n == n)
    }
}
