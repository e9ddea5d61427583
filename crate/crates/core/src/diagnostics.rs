//! Finite-sample probes of the quantities the consistency theory is stated in.
//!
//! | probe              | reports                                                        |
//! |--------------------|----------------------------------------------------------------|
//! | `empirical_norm`   | `‖f - f̂‖_q` for `q = 2, 4, ∞` under the uniform design        |
//! | `rate_slope`       | slope of log risk against log n (exact-rate exponent)          |
//! | `better_prob`      | `P(‖f - f̂_B‖₂ ≥ (1 + c) ‖f - f̂_A‖₂)` at a fixed n               |
//! | `condition_scales` | 95th percentiles of the sup-norm loss and of the L4/L2 ratio   |
//! | `loss_ratio_prob`  | `P(Σ_eval (f - f̂_B)² ≥ (1 + α) Σ_eval (f - f̂_A)²)` on one split |
//!
//! These are evidence at one sample size, not checks of the asymptotic
//! statements themselves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{make_splits, SchemeKind, SplitSchedule};
use crate::error::{Error, Result};
use crate::estimators::{FittedModel, ProcedureSpec};
use crate::rng::{hash_str, Stream};
use crate::scenario::Scenario;

/// Points in the equispaced grid used for sup norms.
pub const SUP_GRID: usize = 10_001;
/// Design draws per replication for L2/L4 losses inside the probes.
pub const LOSS_DRAWS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    L4,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

fn abs_error(model: &FittedModel, scenario: &Scenario, x: f64) -> Result<f64> {
    Ok((scenario.true_f(x)? - model.predict(x)).abs())
}

/// Grid maximum of `|f - f̂|` on `[0, 1]`: a lower bound of the sup norm.
pub fn sup_norm(model: &FittedModel, scenario: &Scenario) -> Result<f64> {
    let mut best = 0.0f64;
    for i in 0..SUP_GRID {
        let x = i as f64 / (SUP_GRID - 1) as f64;
        best = best.max(abs_error(model, scenario, x)?);
    }
    Ok(best)
}

/// `(L2, L4)` empirical norms of `f - f̂` on the given design points.
pub fn norms_on(model: &FittedModel, scenario: &Scenario, xs: &[f64]) -> Result<(f64, f64)> {
    let (mut s2, mut s4) = (0.0, 0.0);
    for &x in xs {
        let e2 = abs_error(model, scenario, x)?.powi(2);
        s2 += e2;
        s4 += e2 * e2;
    }
    let m = xs.len() as f64;
    Ok(((s2 / m).sqrt(), (s4 / m).powf(0.25)))
}

pub fn empirical_norm(
    model: &FittedModel,
    scenario: &Scenario,
    q: NormKind,
    draws: usize,
    stream: &mut Stream,
) -> Result<Estimate> {
    let power = match q {
        NormKind::Linf => return Ok(Estimate { estimate: sup_norm(model, scenario)?, stderr: 0.0 }),
        NormKind::L2 => 2,
        NormKind::L4 => 4,
    };
    if draws < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 draws, got {draws}")));
    }
    let mut vals = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = stream.uniform();
        vals.push(abs_error(model, scenario, x)?.powi(power));
    }
    let m = draws as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let q = f64::from(power);
    let estimate = mean.powf(1.0 / q);
    // delta method for mean^(1/q)
    let stderr = if mean > 0.0 { estimate / (q * mean) * (var / m).sqrt() } else { 0.0 };
    Ok(Estimate { estimate, stderr })
}

fn design(stream: &mut Stream, draws: usize) -> Vec<f64> {
    (0..draws).map(|_| stream.uniform()).collect()
}

fn rep_stream(seed: u64, probe: &str, n: usize, rep: usize) -> Stream {
    Stream::from_parts(&[seed, hash_str(probe), n as u64, rep as u64])
}

/// Squared L2 loss of one fit on a fresh sample of size `n`.
fn squared_loss(proc_: &ProcedureSpec, scenario: &Scenario, n: usize, stream: &mut Stream) -> Result<f64> {
    let sample = scenario.gen_sample(n, stream)?;
    let model = proc_.fit(&sample)?;
    let xs = design(stream, LOSS_DRAWS);
    let (l2, _) = norms_on(&model, scenario, &xs)?;
    Ok(l2 * l2)
}

/// Least-squares slope of `ln(risk)` on `ln(n)`, risk being the Monte Carlo
/// mean of the squared L2 loss.
pub fn rate_slope(proc_: &ProcedureSpec, scenario: &Scenario, n_grid: &[usize], reps: usize, seed: u64) -> Result<f64> {
    let mut sizes = n_grid.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InvalidInput("rate slope needs at least 3 distinct sample sizes".into()));
    }
    if reps < 20 {
        return Err(Error::InvalidInput(format!("rate slope needs reps >= 20, got {reps}")));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in &sizes {
        let losses: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|rep| squared_loss(proc_, scenario, n, &mut rep_stream(seed, "rate", n, rep)))
            .collect::<Result<_>>()?;
        let risk = losses.iter().sum::<f64>() / reps as f64;
        if !(risk > 0.0) {
            return Err(Error::DegenerateRisk);
        }
        points.push(((n as f64).ln(), risk.ln()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 50 {
        return Err(Error::InvalidInput(format!("probe needs reps >= 50, got {reps}")));
    }
    Ok(())
}

/// Paired L2 losses `(A, B)` per replication, fitted on a shared sample and
/// measured on shared design draws.
pub fn paired_losses(
    proc_a: &ProcedureSpec,
    proc_b: &ProcedureSpec,
    scenario: &Scenario,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = rep_stream(seed, "better", n, rep);
            let sample = scenario.gen_sample(n, &mut stream)?;
            let ma = proc_a.fit(&sample)?;
            let mb = proc_b.fit(&sample)?;
            let xs = design(&mut stream, LOSS_DRAWS);
            Ok((norms_on(&ma, scenario, &xs)?.0, norms_on(&mb, scenario, &xs)?.0))
        })
        .collect()
}

pub fn better_prob(
    proc_a: &ProcedureSpec,
    proc_b: &ProcedureSpec,
    scenario: &Scenario,
    n: usize,
    reps: usize,
    c: f64,
    seed: u64,
) -> Result<f64> {
    check_reps(reps)?;
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!("threshold c must be > 0, got {c}")));
    }
    let losses = paired_losses(proc_a, proc_b, scenario, n, reps, seed)?;
    Ok(frequency(&losses, 1.0 + c))
}

fn frequency(pairs: &[(f64, f64)], factor: f64) -> f64 {
    let hits = pairs.iter().filter(|(a, b)| *b >= factor * *a).count();
    hits as f64 / pairs.len() as f64
}

/// 95th percentile (nearest rank) of a non-empty slice.
fn percentile95(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionScales {
    pub sup_scale: f64,
    pub ratio_scale: f64,
}

pub fn condition_scales(
    proc_: &ProcedureSpec,
    scenario: &Scenario,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<ConditionScales> {
    check_reps(reps)?;
    let per_rep: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = rep_stream(seed, "scales", n, rep);
            let sample = scenario.gen_sample(n, &mut stream)?;
            let model = proc_.fit(&sample)?;
            let xs = design(&mut stream, LOSS_DRAWS);
            let (l2, l4) = norms_on(&model, scenario, &xs)?;
            if !(l2 > 0.0) {
                return Err(Error::DegenerateRisk);
            }
            Ok((sup_norm(&model, scenario)?, l4 / l2))
        })
        .collect::<Result<_>>()?;
    Ok(ConditionScales {
        sup_scale: percentile95(per_rep.iter().map(|p| p.0).collect()),
        ratio_scale: percentile95(per_rep.iter().map(|p| p.1).collect()),
    })
}

/// Paired evaluation-set losses `(A, B)` on one random split per replication.
pub fn paired_eval_losses(
    proc_a: &ProcedureSpec,
    proc_b: &ProcedureSpec,
    scenario: &Scenario,
    n: usize,
    schedule: SplitSchedule,
    reps: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = rep_stream(seed, "loss-ratio", n, rep);
            let sample = scenario.gen_sample(n, &mut stream)?;
            let plan = make_splits(n, schedule, SchemeKind::Single, &mut stream)?;
            let split = &plan.splits[0];
            let train = sample.subset(&split.estimation);
            let ma = proc_a.fit(&train)?;
            let mb = proc_b.fit(&train)?;
            let (mut la, mut lb) = (0.0, 0.0);
            for &i in &split.evaluation {
                let x = sample.x[i];
                let f = scenario.true_f(x)?;
                la += (f - ma.predict(x)).powi(2);
                lb += (f - mb.predict(x)).powi(2);
            }
            Ok((la, lb))
        })
        .collect()
}

pub fn loss_ratio_prob(
    proc_a: &ProcedureSpec,
    proc_b: &ProcedureSpec,
    scenario: &Scenario,
    n: usize,
    schedule: SplitSchedule,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    check_reps(reps)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be > 0, got {alpha}")));
    }
    let losses = paired_eval_losses(proc_a, proc_b, scenario, n, schedule, reps, seed)?;
    Ok(frequency(&losses, 1.0 + alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureNorms {
    pub procedure: String,
    pub l2: Estimate,
    pub l4: Estimate,
    pub linf: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProbability {
    pub better: String,
    pub worse: String,
    pub threshold: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Mean over replications, with the standard error across replications.
    pub norms: Vec<ProcedureNorms>,
    pub rate_grid: Vec<usize>,
    /// `None` where the slope is undefined (zero risk or unfittable sizes).
    pub rate_slope: Vec<Option<f64>>,
    pub sup_scale: Vec<f64>,
    pub ratio_scale: Vec<Option<f64>>,
    pub better_prob: Vec<PairProbability>,
    pub loss_ratio_schedule: String,
    pub loss_ratio_prob: Vec<PairProbability>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub c: f64,
    pub alpha: f64,
    pub schedule: SplitSchedule,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self { c: 0.1, alpha: 0.1, schedule: SplitSchedule::ratio(5, 5) }
    }
}

fn mean_se(v: &[f64]) -> Estimate {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    Estimate { estimate: mean, stderr: (var / m).sqrt() }
}

/// Runs every probe for `procedures` on `scenario`. Pairwise probabilities
/// compare the scenario's best procedure against each of the others.
pub fn diagnose(
    procedures: &[ProcedureSpec],
    scenario: &Scenario,
    n: usize,
    reps: usize,
    seed: u64,
    opts: DiagnoseOptions,
) -> Result<DiagnosticsReport> {
    check_reps(reps)?;
    if procedures.is_empty() {
        return Err(Error::InvalidInput("no procedures to diagnose".into()));
    }
    let mut norms = Vec::new();
    let mut sup_scale = Vec::new();
    let mut ratio_scale = Vec::new();
    for (j, p) in procedures.iter().enumerate() {
        let per_rep: Vec<(f64, f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut stream = rep_stream(seed, "norms", n, rep * 1024 + j);
                let sample = scenario.gen_sample(n, &mut stream)?;
                let model = p.fit(&sample)?;
                let xs = design(&mut stream, LOSS_DRAWS);
                let (l2, l4) = norms_on(&model, scenario, &xs)?;
                Ok((l2, l4, sup_norm(&model, scenario)?))
            })
            .collect::<Result<_>>()?;
        let col = |k: usize| -> Vec<f64> { per_rep.iter().map(|r| [r.0, r.1, r.2][k]).collect() };
        norms.push(ProcedureNorms {
            procedure: p.label.clone(),
            l2: mean_se(&col(0)),
            l4: mean_se(&col(1)),
            linf: mean_se(&col(2)),
        });
        sup_scale.push(percentile95(col(2)));
        ratio_scale.push(if per_rep.iter().all(|r| r.0 > 0.0) {
            Some(percentile95(per_rep.iter().map(|r| r.1 / r.0).collect()))
        } else {
            None
        });
    }

    let rate_grid: Vec<usize> = [n / 4, n / 2, n, 2 * n].into_iter().filter(|&m| m >= 20).collect();
    let rate_slope = procedures.iter().map(|p| rate_slope(p, scenario, &rate_grid, reps.max(20), seed).ok()).collect();

    let best = scenario.best_proc.min(procedures.len() - 1);
    let mut better = Vec::new();
    let mut ratio = Vec::new();
    for (j, p) in procedures.iter().enumerate() {
        if j == best {
            continue;
        }
        let a = &procedures[best];
        better.push(PairProbability {
            better: a.label.clone(),
            worse: p.label.clone(),
            threshold: opts.c,
            probability: better_prob(a, p, scenario, n, reps, opts.c, seed)?,
        });
        ratio.push(PairProbability {
            better: a.label.clone(),
            worse: p.label.clone(),
            threshold: opts.alpha,
            probability: loss_ratio_prob(a, p, scenario, n, opts.schedule, reps, opts.alpha, seed)?,
        });
    }
    Ok(DiagnosticsReport {
        scenario: scenario.id(),
        n,
        reps,
        seed,
        norms,
        rate_grid,
        rate_slope,
        sup_scale,
        ratio_scale,
        better_prob: better,
        loss_ratio_schedule: opts.schedule.id(),
        loss_ratio_prob: ratio,
    })
}
