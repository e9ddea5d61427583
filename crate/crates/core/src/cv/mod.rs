//! Cross-validation criterion, split plans and selection rules.
//!
//! All procedures in one selection see the same splits. Ties, both between
//! criteria and between vote counts, go to the lower procedure index.

mod splits;

pub use splits::{
    binomial, combinations, make_splits, Scheme, SchemeKind, SelectionRule, Split, SplitPlan, SplitSchedule,
    EXHAUSTIVE_CAP,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FittedModel, ProcedureSpec};
use crate::rng::Stream;
use crate::scenario::Sample;

/// Criteria closer than this fraction of the evaluation sum of squares of `y`
/// are treated as tied.
pub const TIE_RTOL: f64 = 1e-12;

/// Sum of squared prediction errors on the evaluation points.
pub fn cv_criterion(model: &FittedModel, eval_x: &[f64], eval_y: &[f64]) -> Result<f64> {
    if eval_x.len() != eval_y.len() || eval_x.is_empty() {
        return Err(Error::InvalidInput(format!(
            "evaluation set has {} x and {} y values",
            eval_x.len(),
            eval_y.len()
        )));
    }
    let mut total = 0.0;
    for (&x, &y) in eval_x.iter().zip(eval_y) {
        let p = model.predict(x);
        if !p.is_finite() {
            return Err(Error::NonFinitePrediction { x });
        }
        total += (y - p).powi(2);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: usize,
    /// `[split][procedure]`; `+inf` for disqualified procedures.
    pub per_split_criteria: Vec<Vec<f64>>,
    pub votes: Vec<usize>,
    /// Column means of `per_split_criteria`.
    pub averaged: Vec<f64>,
    /// Per procedure: why it was disqualified, if it was.
    pub failures: Vec<Option<String>>,
    pub scheme_used: String,
    pub schedule_used: String,
    pub n1: usize,
    pub n2: usize,
}

/// Index of the smallest value among `allowed`, lower index winning ties.
fn argmin_tol(values: &[f64], allowed: &[bool], tol: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in values.iter().enumerate() {
        if !allowed[j] {
            continue;
        }
        match best {
            None => best = Some(j),
            Some(b) if v < values[b] - tol => best = Some(j),
            _ => {}
        }
    }
    best
}

/// Per-split criteria for every procedure, plus evaluation-set scales.
struct Evaluated {
    criteria: Vec<Vec<f64>>,
    scales: Vec<f64>,
    failures: Vec<Option<String>>,
}

impl Evaluated {
    fn allowed(&self) -> Vec<bool> {
        self.failures.iter().map(Option::is_none).collect()
    }
}

fn evaluate(procedures: &[ProcedureSpec], sample: &Sample, plan: &SplitPlan) -> Result<Evaluated> {
    if plan.is_empty() {
        return Err(Error::InvalidInput("empty split plan".into()));
    }
    if plan.n != sample.len() {
        return Err(Error::InvalidInput(format!("plan is for n = {}, sample has {}", plan.n, sample.len())));
    }
    if procedures.is_empty() {
        return Err(Error::InvalidInput("no candidate procedures".into()));
    }
    let k = procedures.len();
    let mut criteria = vec![vec![f64::INFINITY; k]; plan.len()];
    let mut scales = Vec::with_capacity(plan.len());
    let mut failures: Vec<Option<String>> = vec![None; k];
    for (s, split) in plan.splits.iter().enumerate() {
        let train = sample.subset(&split.estimation);
        let eval = sample.subset(&split.evaluation);
        scales.push(eval.y.iter().map(|y| y * y).sum::<f64>());
        for (j, proc_) in procedures.iter().enumerate() {
            if failures[j].is_some() {
                continue;
            }
            match proc_.fit(&train).and_then(|m| cv_criterion(&m, &eval.x, &eval.y)) {
                Ok(c) => criteria[s][j] = c,
                Err(e) => {
                    let tagged = Error::ProcedureFailed { index: j, label: proc_.label.clone(), source: Box::new(e) };
                    failures[j] = Some(tagged.to_string());
                    for row in criteria.iter_mut() {
                        row[j] = f64::INFINITY;
                    }
                }
            }
        }
    }
    if failures.iter().all(Option::is_some) {
        return Err(Error::AllProceduresFailed);
    }
    Ok(Evaluated { criteria, scales, failures })
}

fn column_means(criteria: &[Vec<f64>], k: usize) -> Vec<f64> {
    let m = criteria.len() as f64;
    (0..k).map(|j| criteria.iter().map(|row| row[j]).sum::<f64>() / m).collect()
}

fn split_sizes(plan: &SplitPlan) -> (usize, usize) {
    let first = &plan.splits[0];
    (first.estimation.len(), first.evaluation.len())
}

fn per_split_winners(ev: &Evaluated, allowed: &[bool]) -> Vec<usize> {
    ev.criteria
        .iter()
        .zip(&ev.scales)
        .map(|(row, &scale)| argmin_tol(row, allowed, TIE_RTOL * scale).expect("some procedure qualified"))
        .collect()
}

fn tally(winners: &[usize], k: usize) -> Vec<usize> {
    let mut votes = vec![0; k];
    for &w in winners {
        votes[w] += 1;
    }
    votes
}

/// CV-a: average each procedure's criterion over the splits (unweighted),
/// then take the argmin.
pub fn select_averaging(procedures: &[ProcedureSpec], sample: &Sample, plan: &SplitPlan) -> Result<SelectionOutcome> {
    let ev = evaluate(procedures, sample, plan)?;
    let k = procedures.len();
    let allowed = ev.allowed();
    let averaged = column_means(&ev.criteria, k);
    let mean_scale = ev.scales.iter().sum::<f64>() / ev.scales.len() as f64;
    let selected = argmin_tol(&averaged, &allowed, TIE_RTOL * mean_scale).expect("some procedure qualified");
    let votes = tally(&per_split_winners(&ev, &allowed), k);
    let (n1, n2) = split_sizes(plan);
    Ok(SelectionOutcome {
        selected,
        per_split_criteria: ev.criteria,
        votes,
        averaged,
        failures: ev.failures,
        scheme_used: String::new(),
        schedule_used: String::new(),
        n1,
        n2,
    })
}

/// CV-v: each split votes for its argmin; the plurality wins.
pub fn select_voting(procedures: &[ProcedureSpec], sample: &Sample, plan: &SplitPlan) -> Result<SelectionOutcome> {
    let ev = evaluate(procedures, sample, plan)?;
    let k = procedures.len();
    let allowed = ev.allowed();
    let votes = tally(&per_split_winners(&ev, &allowed), k);
    let selected = (0..k)
        .filter(|&j| allowed[j])
        .fold(None::<usize>, |best, j| match best {
            Some(b) if votes[b] >= votes[j] => Some(b),
            _ => Some(j),
        })
        .expect("some procedure qualified");
    let averaged = column_means(&ev.criteria, k);
    let (n1, n2) = split_sizes(plan);
    Ok(SelectionOutcome {
        selected,
        per_split_criteria: ev.criteria,
        votes,
        averaged,
        failures: ev.failures,
        scheme_used: String::new(),
        schedule_used: String::new(),
        n1,
        n2,
    })
}

/// Delete-`n2` CV with one random split.
pub fn select_single(
    procedures: &[ProcedureSpec],
    sample: &Sample,
    schedule: SplitSchedule,
    stream: &mut Stream,
) -> Result<SelectionOutcome> {
    run_selection(procedures, sample, schedule, Scheme::SINGLE, stream)
}

/// Builds the plan for `scheme` from `stream` and applies its rule.
pub fn run_selection(
    procedures: &[ProcedureSpec],
    sample: &Sample,
    schedule: SplitSchedule,
    scheme: Scheme,
    stream: &mut Stream,
) -> Result<SelectionOutcome> {
    let plan = make_splits(sample.len(), schedule, scheme.kind, stream)?;
    let mut out = match scheme.rule {
        SelectionRule::Average => select_averaging(procedures, sample, &plan)?,
        SelectionRule::Vote => select_voting(procedures, sample, &plan)?,
    };
    out.scheme_used = scheme.id();
    out.schedule_used = match scheme.kind {
        SchemeKind::KFold(r) => format!("folds:{r}"),
        _ => schedule.id(),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::fit_mean_model;
    use crate::scenario::Scenario;

    #[test]
    fn criterion_values() {
        let s = Sample::new(vec![0.0, 1.0], vec![1.5, 1.0]).unwrap();
        let line =
            crate::estimators::fit_polynomial(&Sample::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).unwrap(), 1)
                .unwrap();
        // predictions (1.0, 2.0)
        assert!((cv_criterion(&line, &s.x, &s.y).unwrap() - 1.25).abs() < 1e-14);
        assert_eq!(cv_criterion(&line, &[0.0, 1.0], &[1.0, 2.0]).unwrap(), 0.0);
        let zero = fit_mean_model(&s, false);
        assert_eq!(cv_criterion(&zero, &[0.1, 0.2, 0.3], &[1.0, -1.0, 1.0]).unwrap(), 3.0);
        assert!(cv_criterion(&zero, &[0.1], &[]).is_err());
    }

    #[test]
    fn argmin_ties_go_low() {
        let allowed = [true, true, true];
        assert_eq!(argmin_tol(&[1.0, 1.0, 2.0], &allowed, 0.0), Some(0));
        assert_eq!(argmin_tol(&[3.0, 1.0, 1.0], &allowed, 0.0), Some(1));
        assert_eq!(argmin_tol(&[1.0, 0.5, 2.0], &[false, false, true], 0.0), Some(2));
    }

    #[test]
    fn exact_fit_beats_zero() {
        let c1 = Scenario::case(1).unwrap().with_sigma(0.0).unwrap();
        let s = c1.gen_sample(30, &mut Stream::new(1)).unwrap();
        let procs = vec![ProcedureSpec::polynomial(1), ProcedureSpec::zero()];
        let out = select_single(&procs, &s, SplitSchedule::ratio(5, 5), &mut Stream::new(2)).unwrap();
        assert_eq!(out.selected, 0);
        assert!(out.per_split_criteria[0][0] < 1e-20);
        assert_eq!((out.n1, out.n2), (15, 15));
    }

    #[test]
    fn equal_procedures_select_first() {
        let s = Scenario::case(2).unwrap().gen_sample(40, &mut Stream::new(3)).unwrap();
        let procs = vec![ProcedureSpec::polynomial(1), ProcedureSpec::polynomial(1)];
        let out = select_single(&procs, &s, SplitSchedule::ratio(5, 5), &mut Stream::new(4)).unwrap();
        assert_eq!(out.selected, 0);
        let plan =
            make_splits(40, SplitSchedule::ratio(5, 5), SchemeKind::RandomSplits(20), &mut Stream::new(5)).unwrap();
        let v = select_voting(&procs, &s, &plan).unwrap();
        assert_eq!(v.selected, 0);
        assert_eq!(v.votes, vec![20, 0]);
    }

    #[test]
    fn unfittable_procedure_is_disqualified() {
        let s = Scenario::case(3).unwrap().gen_sample(30, &mut Stream::new(6)).unwrap();
        // n1 = 3: the spline cannot be fitted, the mean can
        let procs = vec![ProcedureSpec::spline(), ProcedureSpec::mean()];
        let out = select_single(&procs, &s, SplitSchedule::Explicit(3), &mut Stream::new(7)).unwrap();
        assert_eq!(out.selected, 1);
        assert!(out.failures[0].as_deref().unwrap().contains("spline"));
        assert!(out.per_split_criteria[0][0].is_infinite());

        let only = vec![ProcedureSpec::spline()];
        let r = select_single(&only, &s, SplitSchedule::Explicit(3), &mut Stream::new(7));
        assert!(matches!(r, Err(Error::AllProceduresFailed)));
    }

    #[test]
    fn run_selection_labels() {
        let s = Scenario::case(1).unwrap().gen_sample(40, &mut Stream::new(8)).unwrap();
        let procs = ProcedureSpec::default_trio();
        let out =
            run_selection(&procs, &s, SplitSchedule::ratio(1, 1), "kfold-v:5".parse().unwrap(), &mut Stream::new(1))
                .unwrap();
        assert_eq!(out.scheme_used, "kfold-v:5");
        assert_eq!(out.per_split_criteria.len(), 5);
        assert_eq!(out.votes.iter().sum::<usize>(), 5);
        assert_eq!((out.n1, out.n2), (32, 8));
    }
}
