//! Exact multifold CV for the nested constant-mean models.
//!
//! Model 1 predicts `0`, model 2 predicts the estimation-set mean, data are
//! `y_i = mu + eps_i`. Summed over all `C(n, n1)` estimation subsets, the
//! difference of the two criteria is `K * d` with
//!
//! ```text
//! K = (n-2)! / (n1 * n1! * (n2-1)!)
//! d = n1 (n-1) (n mu² + 2 mu Σε) + (n1+1) (Σε)² - (n1+n) Σε²
//! ```
//!
//! so the selection only needs the sign of `d`, which costs `O(n)`. With
//! `mu = 0`, `d > 0` is the event `F(1, n-1) > (n+n1)/n1` for a Fisher F
//! variable built from `Σε` and `Σ(ε - ε̄)²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::cv::{binomial, combinations, EXHAUSTIVE_CAP};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Largest `n` for which the unnormalized pair is computed.
pub const MAX_EXACT_N: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Instance {
    pub mu: f64,
    pub eps: Vec<f64>,
    pub n1: usize,
}

impl Prop1Instance {
    pub fn new(mu: f64, eps: Vec<f64>, n1: usize) -> Result<Self> {
        let n = eps.len();
        if n < 2 {
            return Err(Error::SampleTooSmall { n, min: 2 });
        }
        if n1 == 0 || n1 >= n {
            return Err(Error::InvalidInput(format!("n1 = {n1} outside [1, {}]", n - 1)));
        }
        if !mu.is_finite() || eps.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("non-finite instance".into()));
        }
        Ok(Self { mu, eps, n1 })
    }

    pub fn n(&self) -> usize {
        self.eps.len()
    }

    pub fn n2(&self) -> usize {
        self.n() - self.n1
    }

    pub fn y(&self) -> Vec<f64> {
        self.eps.iter().map(|e| self.mu + e).collect()
    }

    /// `(Σε, Σε²)`.
    fn sums(&self) -> (f64, f64) {
        self.eps.iter().fold((0.0, 0.0), |(s, q), &e| (s + e, q + e * e))
    }

    /// `(n-2)! / (n1 * n1! * (n2-1)!)`, equal to `C(n-1, n2-1) / (n1 (n-1))`.
    pub fn k_factor(&self) -> f64 {
        let n = self.n();
        binomial(n - 1, self.n2() - 1) as f64 / (self.n1 as f64 * (n - 1) as f64)
    }

    /// Magnitudes of the three terms of `d`; the natural scale for comparing
    /// two evaluations of it.
    pub fn term_scale(&self) -> f64 {
        let (n, n1) = (self.n() as f64, self.n1 as f64);
        let (s, q) = self.sums();
        let mu = self.mu;
        (n1 * (n - 1.0) * (n * mu * mu + 2.0 * mu * s)).abs() + (n1 + 1.0) * s * s + (n1 + n) * q
    }
}

pub fn normalized_cv_diff(inst: &Prop1Instance) -> f64 {
    let (s, q) = inst.sums();
    d_from_sums(inst.n(), inst.n1, inst.mu, s, q)
}

#[inline]
fn d_from_sums(n: usize, n1: usize, mu: f64, sum: f64, sum_sq: f64) -> f64 {
    let (n, n1) = (n as f64, n1 as f64);
    n1 * (n - 1.0) * (n * mu * mu + 2.0 * mu * sum) + (n1 + 1.0) * sum * sum - (n1 + n) * sum_sq
}

/// Unnormalized `(CV(1), CV(2))` summed over all splits.
pub fn closed_cv_pair(inst: &Prop1Instance) -> Result<(f64, f64)> {
    let n = inst.n();
    if n > MAX_EXACT_N {
        return Err(Error::OverflowRisk { n });
    }
    let (s, q) = inst.sums();
    let mu = inst.mu;
    let cv1 = binomial(n - 1, inst.n2() - 1) as f64 * (n as f64 * mu * mu + 2.0 * mu * s + q);
    let cv2 = cv1 - inst.k_factor() * normalized_cv_diff(inst);
    Ok((cv1.max(0.0), cv2.max(0.0)))
}

/// Enumerates every estimation subset of size `n1` and sums the squared
/// evaluation errors of the zero predictor and the subset-mean predictor.
pub fn brute_force_multifold(y: &[f64], n1: usize) -> Result<(f64, f64)> {
    let n = y.len();
    if n1 == 0 || n1 >= n {
        return Err(Error::InvalidInput(format!("n1 = {n1} outside [1, {}]", n.saturating_sub(1))));
    }
    let count = binomial(n, n1);
    if count > EXHAUSTIVE_CAP {
        return Err(Error::ExhaustiveTooLarge { count, cap: EXHAUSTIVE_CAP });
    }
    let (mut cv1, mut cv2) = (0.0, 0.0);
    let mut in_s = vec![false; n];
    for set in combinations(n, n1) {
        in_s.iter_mut().for_each(|m| *m = false);
        let mut mean = 0.0;
        for &i in &set {
            in_s[i] = true;
            mean += y[i];
        }
        mean /= n1 as f64;
        for i in (0..n).filter(|&i| !in_s[i]) {
            cv1 += y[i] * y[i];
            cv2 += (y[i] - mean).powi(2);
        }
    }
    Ok((cv1, cv2))
}

/// Monte Carlo frequency with which multifold CV-a picks model 2
/// (`d > 0`) when `eps ~ N(0, sigma²)`. Each replication draws its own
/// stream from `(seed, rep)`, so the result does not depend on threading.
pub fn selection_prob(n: usize, n1: usize, mu: f64, sigma: f64, reps: usize, seed: u64) -> Result<f64> {
    if n < 2 || n1 == 0 || n1 >= n {
        return Err(Error::InvalidInput(format!("need n >= 2 and 1 <= n1 < n, got n = {n}, n1 = {n1}")));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut stream = Stream::from_parts(&[seed, rep as u64]);
            let (mut s, mut q) = (0.0, 0.0);
            for _ in 0..n {
                let e = sigma * stream.normal();
                s += e;
                q += e * e;
            }
            usize::from(d_from_sums(n, n1, mu, s, q) > 0.0)
        })
        .sum();
    Ok(hits as f64 / reps as f64)
}

/// `P(F(1, n-1) > (n + n1) / n1)`: the exact probability that multifold
/// CV-a picks the larger model when the smaller one is true.
pub fn f_reference_prob(n: usize, n1: usize) -> Result<f64> {
    if n < 2 || n1 == 0 {
        return Err(Error::InvalidInput(format!("need n >= 2 and n1 >= 1, got n = {n}, n1 = {n1}")));
    }
    let threshold = (n + n1) as f64 / n1 as f64;
    let f = FisherSnedecor::new(1.0, (n - 1) as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(f.sf(threshold))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffChecks {
    pub instances: usize,
    pub sign_mismatches: usize,
    /// Largest `|d - d_enum| / term_scale` over the grid.
    pub max_rel_err: f64,
    /// Same for the unnormalized pair, relative to the larger of the two.
    pub max_pair_rel_err: f64,
}

/// Compares the closed forms with enumeration for every `n` in `ns`, every
/// `n1 in 1..n`, every `mu` and `draws` seeded noise vectors.
pub fn verify_grid(ns: &[usize], mus: &[f64], draws: usize, seed: u64) -> Result<DiffChecks> {
    let mut out = DiffChecks::default();
    for &n in ns {
        for n1 in 1..n {
            for (mi, &mu) in mus.iter().enumerate() {
                for d in 0..draws {
                    let mut stream = Stream::from_parts(&[seed, n as u64, n1 as u64, mi as u64, d as u64]);
                    let eps: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
                    let inst = Prop1Instance::new(mu, eps, n1)?;
                    let (b1, b2) = brute_force_multifold(&inst.y(), n1)?;
                    let (c1, c2) = closed_cv_pair(&inst)?;
                    let d = normalized_cv_diff(&inst);
                    let d_enum = (b1 - b2) / inst.k_factor();
                    out.instances += 1;
                    if d.signum() != d_enum.signum() {
                        out.sign_mismatches += 1;
                    }
                    out.max_rel_err = out.max_rel_err.max((d - d_enum).abs() / inst.term_scale());
                    let pair_scale = b1.max(b2).max(f64::MIN_POSITIVE);
                    let pair_err = (c1 - b1).abs().max((c2 - b2).abs()) / pair_scale;
                    out.max_pair_rel_err = out.max_pair_rel_err.max(pair_err);
                }
            }
        }
    }
    Ok(out)
}
