//! Split schedules, schemes and split plans.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest number of estimation subsets an exhaustive plan may enumerate.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

/// How the estimation size `n1` is chosen for a sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitSchedule {
    /// `n1 : n2 = est : eval`.
    FixedRatio {
        est: u32,
        eval: u32,
    },
    /// `n1 = n - floor(sqrt(n) ln n)`.
    EstimationDominant,
    /// `n1 = ceil(sqrt(n))`.
    EvaluationDominant,
    Explicit(usize),
}

impl SplitSchedule {
    pub fn ratio(est: u32, eval: u32) -> Self {
        SplitSchedule::FixedRatio { est, eval }
    }

    /// Estimation size, clamped to `[1, n - 1]`.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        let nf = n as f64;
        let raw = match *self {
            SplitSchedule::FixedRatio { est, eval } => {
                let tot = u64::from(est) + u64::from(eval);
                ((n as u64 * u64::from(est) + tot / 2) / tot) as usize
            }
            SplitSchedule::EstimationDominant => n.saturating_sub((nf.sqrt() * nf.ln()).floor() as usize),
            SplitSchedule::EvaluationDominant => nf.sqrt().ceil() as usize,
            SplitSchedule::Explicit(k) => {
                if k == 0 || k >= n {
                    return Err(Error::InvalidInput(format!("n1 = {k} outside [1, {}]", n - 1)));
                }
                k
            }
        };
        Ok(raw.clamp(1, n - 1))
    }

    pub fn id(&self) -> String {
        match self {
            SplitSchedule::FixedRatio { est, eval } => format!("ratio:{est}:{eval}"),
            SplitSchedule::EstimationDominant => "est-dom".into(),
            SplitSchedule::EvaluationDominant => "eval-dom".into(),
            SplitSchedule::Explicit(k) => format!("n1:{k}"),
        }
    }
}

impl fmt::Display for SplitSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for SplitSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpec(format!("unknown schedule `{s}`"));
        match s {
            "est-dom" => Ok(SplitSchedule::EstimationDominant),
            "eval-dom" => Ok(SplitSchedule::EvaluationDominant),
            _ => {
                if let Some(rest) = s.strip_prefix("ratio:") {
                    let (a, b) = rest.split_once(':').ok_or_else(bad)?;
                    let est: u32 = a.parse().map_err(|_| bad())?;
                    let eval: u32 = b.parse().map_err(|_| bad())?;
                    if est == 0 || eval == 0 {
                        return Err(bad());
                    }
                    Ok(SplitSchedule::FixedRatio { est, eval })
                } else if let Some(k) = s.strip_prefix("n1:") {
                    let k: usize = k.parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    Ok(SplitSchedule::Explicit(k))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// Which family of splits a plan contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    Single,
    RandomSplits(usize),
    KFold(usize),
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionRule {
    /// Average criteria over splits, then take the argmin (CV-a).
    Average,
    /// Take the argmin per split, then the plurality of winners (CV-v).
    Vote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub rule: SelectionRule,
}

impl Scheme {
    pub const SINGLE: Scheme = Scheme { kind: SchemeKind::Single, rule: SelectionRule::Average };

    pub fn rlt(m: usize) -> Self {
        Scheme { kind: SchemeKind::RandomSplits(m), rule: SelectionRule::Average }
    }

    pub fn rsv(m: usize) -> Self {
        Scheme { kind: SchemeKind::RandomSplits(m), rule: SelectionRule::Vote }
    }

    pub fn id(&self) -> String {
        let suffix = match self.rule {
            SelectionRule::Average => "a",
            SelectionRule::Vote => "v",
        };
        match self.kind {
            SchemeKind::Single => "single".into(),
            SchemeKind::RandomSplits(m) => match self.rule {
                SelectionRule::Average => format!("rlt:{m}"),
                SelectionRule::Vote => format!("rsv:{m}"),
            },
            SchemeKind::KFold(r) => format!("kfold-{suffix}:{r}"),
            SchemeKind::Exhaustive => format!("exhaustive-{suffix}"),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpec(format!("unknown scheme `{s}`"));
        let count = |v: &str, min: usize| -> Result<usize> {
            let k: usize = v.parse().map_err(|_| bad())?;
            if k < min {
                return Err(bad());
            }
            Ok(k)
        };
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let scheme = match (head, arg) {
            ("single", None) => Scheme::SINGLE,
            ("rlt", Some(m)) => Scheme::rlt(count(m, 1)?),
            ("rsv", Some(m)) => Scheme::rsv(count(m, 1)?),
            ("kfold-a", Some(r)) => Scheme { kind: SchemeKind::KFold(count(r, 2)?), rule: SelectionRule::Average },
            ("kfold-v", Some(r)) => Scheme { kind: SchemeKind::KFold(count(r, 2)?), rule: SelectionRule::Vote },
            ("exhaustive-a", None) => Scheme { kind: SchemeKind::Exhaustive, rule: SelectionRule::Average },
            ("exhaustive-v", None) => Scheme { kind: SchemeKind::Exhaustive, rule: SelectionRule::Vote },
            _ => return Err(bad()),
        };
        Ok(scheme)
    }
}

/// One partition of `0..n`. Both halves are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub estimation: Vec<usize>,
    pub evaluation: Vec<usize>,
}

impl Split {
    fn from_mask(mask: &[bool]) -> Self {
        let mut estimation = Vec::new();
        let mut evaluation = Vec::new();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                estimation.push(i);
            } else {
                evaluation.push(i);
            }
        }
        Split { estimation, evaluation }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub splits: Vec<Split>,
    pub scheme: SchemeKind,
}

impl SplitPlan {
    /// A plan built from explicit estimation index sets.
    pub fn explicit(n: usize, estimation_sets: &[Vec<usize>]) -> Result<Self> {
        let mut splits = Vec::with_capacity(estimation_sets.len());
        for set in estimation_sets {
            let mut mask = vec![false; n];
            for &i in set {
                if i >= n || mask[i] {
                    return Err(Error::InvalidInput(format!("bad estimation index {i}")));
                }
                mask[i] = true;
            }
            let split = Split::from_mask(&mask);
            if split.estimation.is_empty() || split.evaluation.is_empty() {
                return Err(Error::InvalidInput("both halves of a split must be non-empty".into()));
            }
            splits.push(split);
        }
        if splits.is_empty() {
            return Err(Error::InvalidInput("empty plan".into()));
        }
        let scheme = if splits.len() == 1 { SchemeKind::Single } else { SchemeKind::RandomSplits(splits.len()) };
        Ok(SplitPlan { n, splits, scheme })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn random_subset_mask(n: usize, n1: usize, stream: &mut Stream) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n1 {
        let j = i + stream.below(n - i);
        idx.swap(i, j);
    }
    let mut mask = vec![false; n];
    for &i in &idx[..n1] {
        mask[i] = true;
    }
    mask
}

pub fn make_splits(n: usize, schedule: SplitSchedule, scheme: SchemeKind, stream: &mut Stream) -> Result<SplitPlan> {
    let splits = match scheme {
        SchemeKind::Single => {
            let n1 = schedule.resolve(n)?;
            vec![Split::from_mask(&random_subset_mask(n, n1, stream))]
        }
        SchemeKind::RandomSplits(m) => {
            if m == 0 {
                return Err(Error::InvalidSpec("random-split count must be >= 1".into()));
            }
            let n1 = schedule.resolve(n)?;
            (0..m).map(|_| Split::from_mask(&random_subset_mask(n, n1, stream))).collect()
        }
        SchemeKind::KFold(r) => {
            if r < 2 || r > n {
                return Err(Error::InvalidSpec(format!("fold count {r} must lie in [2, {n}]")));
            }
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = stream.below(i + 1);
                perm.swap(i, j);
            }
            let (base, extra) = (n / r, n % r);
            let mut start = 0;
            (0..r)
                .map(|f| {
                    let size = base + usize::from(f < extra);
                    let mut mask = vec![true; n];
                    for &i in &perm[start..start + size] {
                        mask[i] = false;
                    }
                    start += size;
                    Split::from_mask(&mask)
                })
                .collect()
        }
        SchemeKind::Exhaustive => {
            let n1 = schedule.resolve(n)?;
            let count = binomial(n, n1);
            if count > EXHAUSTIVE_CAP {
                return Err(Error::ExhaustiveTooLarge { count, cap: EXHAUSTIVE_CAP });
            }
            combinations(n, n1)
                .into_iter()
                .map(|set| {
                    let mut mask = vec![false; n];
                    for i in set {
                        mask[i] = true;
                    }
                    Split::from_mask(&mask)
                })
                .collect()
        }
    };
    Ok(SplitPlan { n, splits, scheme })
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn schedule_resolution() {
        assert_eq!(SplitSchedule::ratio(9, 1).resolve(100).unwrap(), 90);
        assert_eq!(SplitSchedule::ratio(3, 7).resolve(100).unwrap(), 30);
        assert_eq!(SplitSchedule::ratio(1, 9).resolve(5).unwrap(), 1);
        assert_eq!(SplitSchedule::ratio(9, 1).resolve(3).unwrap(), 2);
        // 100 - floor(10 * ln 100) = 100 - 46
        assert_eq!(SplitSchedule::EstimationDominant.resolve(100).unwrap(), 54);
        assert_eq!(SplitSchedule::EstimationDominant.resolve(3).unwrap(), 2);
        assert_eq!(SplitSchedule::EvaluationDominant.resolve(101).unwrap(), 11);
        assert_eq!(SplitSchedule::Explicit(7).resolve(10).unwrap(), 7);
        assert!(SplitSchedule::Explicit(10).resolve(10).is_err());
        assert!(SplitSchedule::ratio(1, 1).resolve(1).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for id in ["ratio:9:1", "ratio:5:5", "est-dom", "eval-dom", "n1:40"] {
            assert_eq!(id.parse::<SplitSchedule>().unwrap().id(), id);
        }
        for id in ["single", "rlt:100", "rsv:100", "kfold-a:5", "kfold-v:10", "exhaustive-a", "exhaustive-v"] {
            assert_eq!(id.parse::<Scheme>().unwrap().id(), id);
        }
        for bad in ["ratio:0:1", "ratio:1", "n1:0", "half"] {
            assert!(bad.parse::<SplitSchedule>().is_err());
        }
        for bad in ["rlt", "rlt:0", "kfold-a:1", "exhaustive", "vote"] {
            assert!(bad.parse::<Scheme>().is_err());
        }
    }

    #[test]
    fn exhaustive_enumerates_every_subset_once() {
        let plan = make_splits(4, SplitSchedule::Explicit(2), SchemeKind::Exhaustive, &mut Stream::new(0)).unwrap();
        assert_eq!(plan.len(), 6);
        let distinct: HashSet<_> = plan.splits.iter().map(|s| s.estimation.clone()).collect();
        assert_eq!(distinct.len(), 6);
        for n in 1..9 {
            for k in 0..=n {
                assert_eq!(combinations(n, k).len() as u128, binomial(n, k));
            }
        }
    }

    #[test]
    fn exhaustive_cap() {
        let r = make_splits(40, SplitSchedule::Explicit(20), SchemeKind::Exhaustive, &mut Stream::new(0));
        assert!(matches!(r, Err(Error::ExhaustiveTooLarge { .. })));
    }

    #[test]
    fn kfold_balanced() {
        let plan = make_splits(10, SplitSchedule::ratio(1, 1), SchemeKind::KFold(4), &mut Stream::new(5)).unwrap();
        let mut sizes: Vec<usize> = plan.splits.iter().map(|s| s.evaluation.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        let mut all: Vec<usize> = plan.splits.iter().flat_map(|s| s.evaluation.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_splits_deterministic_and_partitioning() {
        let a =
            make_splits(50, SplitSchedule::ratio(5, 5), SchemeKind::RandomSplits(100), &mut Stream::new(9)).unwrap();
        let b =
            make_splits(50, SplitSchedule::ratio(5, 5), SchemeKind::RandomSplits(100), &mut Stream::new(9)).unwrap();
        assert_eq!(a, b);
        for s in &a.splits {
            assert_eq!(s.estimation.len(), 25);
            let mut all = s.estimation.clone();
            all.extend(&s.evaluation);
            all.sort_unstable();
            assert_eq!(all, (0..50).collect::<Vec<_>>());
        }
    }

    #[test]
    fn explicit_plan_validation() {
        assert!(SplitPlan::explicit(4, &[vec![0, 0]]).is_err());
        assert!(SplitPlan::explicit(4, &[vec![0, 1, 2, 3]]).is_err());
        assert!(SplitPlan::explicit(4, &[]).is_err());
        assert_eq!(SplitPlan::explicit(4, &[vec![2, 0]]).unwrap().splits[0].estimation, vec![0, 2]);
    }
}
