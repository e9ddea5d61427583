//! Data-generating scenarios and seeded samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Noise level of the three built-in regression cases.
pub const DEFAULT_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionId {
    /// `1 + x`
    Case1,
    /// `1 + x + 0.7 (x - 0.5)^2`
    Case2,
    /// `1 + x - exp(-200 (x - 0.25)^2)`
    Case3,
    /// Constant `mu`, stored in `params[0]`.
    MeanModel,
    /// A name with no registered function.
    Custom(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    UniformUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub function_id: FunctionId,
    pub params: Vec<f64>,
    pub sigma: f64,
    pub design: Design,
    /// Index of the truly better procedure within the candidate list the
    /// scenario is run against.
    pub best_proc: usize,
}

impl Scenario {
    pub fn new(function_id: FunctionId, params: Vec<f64>, sigma: f64, best_proc: usize) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if function_id == FunctionId::MeanModel && params.len() != 1 {
            return Err(Error::InvalidSpec("mean model takes exactly one parameter".into()));
        }
        Ok(Self { function_id, params, sigma, design: Design::UniformUnit, best_proc })
    }

    /// Built-in case with the default candidate order
    /// `[poly:1, poly:2, spline]`; the best index is 0, 1 and 2 respectively.
    pub fn case(k: u8) -> Result<Self> {
        let (id, best) = match k {
            1 => (FunctionId::Case1, 0),
            2 => (FunctionId::Case2, 1),
            3 => (FunctionId::Case3, 2),
            _ => return Err(Error::UnknownFunction(format!("case{k}"))),
        };
        Self::new(id, Vec::new(), DEFAULT_SIGMA, best)
    }

    /// `Y = mu + eps`. With candidates `[zero, mean]` the better one is
    /// `zero` when `mu == 0` and `mean` otherwise.
    pub fn mean_model(mu: f64, sigma: f64) -> Result<Self> {
        let best = usize::from(mu != 0.0);
        Self::new(FunctionId::MeanModel, vec![mu], sigma, best)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidSpec(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn true_f(&self, x: f64) -> Result<f64> {
        match &self.function_id {
            FunctionId::Case1 => Ok(1.0 + x),
            FunctionId::Case2 => Ok(1.0 + x + 0.7 * (x - 0.5).powi(2)),
            FunctionId::Case3 => Ok(1.0 + x - (-200.0 * (x - 0.25).powi(2)).exp()),
            FunctionId::MeanModel => Ok(self.params[0]),
            FunctionId::Custom(name) => Err(Error::UnknownFunction(name.clone())),
        }
    }

    /// Draws `n` design points, then `n` standard normal noise terms, from `stream`.
    pub fn gen_sample(&self, n: usize, stream: &mut Stream) -> Result<Sample> {
        if n == 0 {
            return Err(Error::SampleTooSmall { n, min: 1 });
        }
        let x: Vec<f64> = (0..n).map(|_| stream.uniform()).collect();
        let mut y = Vec::with_capacity(n);
        for &xi in &x {
            let f = self.true_f(xi)?;
            y.push(f);
        }
        for yi in y.iter_mut() {
            *yi += self.sigma * stream.normal();
        }
        Sample::new(x, y)
    }

    pub fn residuals(&self, sample: &Sample) -> Result<Vec<f64>> {
        sample.x.iter().zip(&sample.y).map(|(&x, &y)| Ok(y - self.true_f(x)?)).collect()
    }

    /// Registry id, the inverse of [`FromStr`].
    pub fn id(&self) -> String {
        match &self.function_id {
            FunctionId::Case1 => "case1".into(),
            FunctionId::Case2 => "case2".into(),
            FunctionId::Case3 => "case3".into(),
            FunctionId::MeanModel => format!("mean({})", self.params[0]),
            FunctionId::Custom(name) => name.clone(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "case1" => Scenario::case(1),
            "case2" => Scenario::case(2),
            "case3" => Scenario::case(3),
            _ => {
                if let Some(inner) = s.strip_prefix("mean(").and_then(|r| r.strip_suffix(')')) {
                    let mu: f64 =
                        inner.trim().parse().map_err(|_| Error::InvalidSpec(format!("bad mean parameter in `{s}`")))?;
                    if !mu.is_finite() {
                        return Err(Error::InvalidSpec(format!("bad mean parameter in `{s}`")));
                    }
                    Scenario::mean_model(mu, 1.0)
                } else {
                    Err(Error::UnknownFunction(s.to_string()))
                }
            }
        }
    }
}

/// Observed pairs `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!("x has {} values, y has {}", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::SampleTooSmall { n: 0, min: 1 });
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in sample".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Sample {
        Sample { x: idx.iter().map(|&i| self.x[i]).collect(), y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.len() as f64
    }

    pub fn distinct_x(&self) -> usize {
        let mut xs = self.x.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_values() {
        let c1 = Scenario::case(1).unwrap();
        let c2 = Scenario::case(2).unwrap();
        let c3 = Scenario::case(3).unwrap();
        assert_eq!(c1.true_f(0.5).unwrap(), 1.5);
        assert_eq!(c2.true_f(0.5).unwrap(), 1.5);
        assert_eq!(c3.true_f(0.25).unwrap(), 0.25);
        let m = Scenario::mean_model(2.5, 1.0).unwrap();
        assert_eq!(m.true_f(0.9).unwrap(), 2.5);
    }

    #[test]
    fn matches_direct_transcription_on_grid() {
        let cases = [Scenario::case(1).unwrap(), Scenario::case(2).unwrap(), Scenario::case(3).unwrap()];
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let direct =
                [1.0 + x, 1.0 + x + 0.7 * (x - 0.5) * (x - 0.5), 1.0 + x - f64::exp(-200.0 * (x - 0.25) * (x - 0.25))];
            for (c, d) in cases.iter().zip(direct) {
                assert!((c.true_f(x).unwrap() - d).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn custom_is_unknown() {
        let s = Scenario::new(FunctionId::Custom("wiggle".into()), vec![], 0.1, 0).unwrap();
        assert!(matches!(s.true_f(0.1), Err(Error::UnknownFunction(_))));
        assert!(matches!("wiggle".parse::<Scenario>(), Err(Error::UnknownFunction(_))));
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(Scenario::case(1).unwrap().with_sigma(-0.1).is_err());
    }

    #[test]
    fn ids_round_trip() {
        for id in ["case1", "case2", "case3", "mean(0)", "mean(1.5)"] {
            let s: Scenario = id.parse().unwrap();
            assert_eq!(s.id(), id);
        }
    }

    #[test]
    fn deterministic_samples() {
        let c = Scenario::case(1).unwrap();
        let a = c.gen_sample(100, &mut Stream::new(42)).unwrap();
        let b = c.gen_sample(100, &mut Stream::new(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.x.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn zero_noise_is_exact() {
        let c = Scenario::case(1).unwrap().with_sigma(0.0).unwrap();
        let s = c.gen_sample(5, &mut Stream::new(3)).unwrap();
        for (x, y) in s.x.iter().zip(&s.y) {
            assert_eq!(*y, 1.0 + x);
        }
        assert!(c.residuals(&s).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn mean_model_residuals() {
        let m = Scenario::mean_model(2.0, 1.0).unwrap();
        let s = Sample::new(vec![0.1, 0.2], vec![2.1, 1.9]).unwrap();
        let r = m.residuals(&s).unwrap();
        assert!((r[0] - 0.1).abs() < 1e-15 && (r[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn residuals_recover_drawn_noise() {
        let c = Scenario::case(2).unwrap();
        let s = c.gen_sample(50, &mut Stream::new(9)).unwrap();
        let mut replay = Stream::new(9);
        for _ in 0..50 {
            replay.uniform();
        }
        let noise: Vec<f64> = (0..50).map(|_| c.sigma * replay.normal()).collect();
        for (r, e) in c.residuals(&s).unwrap().iter().zip(noise) {
            assert!((r - e).abs() < 1e-12);
        }
    }

    #[test]
    fn large_sample_mean_and_variance() {
        let m = Scenario::mean_model(0.0, 1.0).unwrap();
        let s = m.gen_sample(100_000, &mut Stream::new(1)).unwrap();
        assert!(s.mean_y().abs() < 0.02);

        let c = Scenario::case(1).unwrap();
        let s = c.gen_sample(100_000, &mut Stream::new(2)).unwrap();
        let r = c.residuals(&s).unwrap();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
        assert!((var / 0.09 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::new(vec![0.1], vec![]).is_err());
        assert!(Sample::new(vec![], vec![]).is_err());
        assert!(Sample::new(vec![f64::NAN], vec![1.0]).is_err());
    }
}
