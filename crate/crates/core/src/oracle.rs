//! Stochastic approximations of the pseudogradient.
//!
//! Three schemes share one entry point, [`Oracle::sample_gradient`]:
//! the exact mapping, a fixed mini-batch (SA) and an increasing batch whose
//! size follows a [`BatchSchedule`] (SAA). Per-sample gradients come either
//! from the problem's own structural sampler or from additive Gaussian noise
//! on top of the exact mapping.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::point::JointPoint;
use crate::problem::ViProblem;
use crate::rng::keyed_rng;

/// Largest batch the schedule will hand out; beyond this the request is
/// treated as an overflow.
pub const MAX_BATCH: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `grad J(x, xi) = F(x) + sigma * z` with `z` standard normal per coordinate.
    AdditiveGaussian { sigma: f64 },
    /// Draws come from the problem's structural sampler.
    Structural,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::AdditiveGaussian { sigma } if !(sigma.is_finite() && sigma >= 0.0) => Err(
                Error::config(format!("noise sigma must be finite and nonnegative, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    /// Bound on the per-sample error second moment `E||grad J - F||^2`.
    pub fn per_sample_variance(&self, problem: &ViProblem) -> Option<f64> {
        match *self {
            NoiseModel::AdditiveGaussian { sigma } => Some(sigma * sigma * problem.dim() as f64),
            NoiseModel::Structural => problem.field().sample_variance_bound(problem.feasible()),
        }
    }
}

/// Batch sizes `N_k = ceil(b (k + k0)^(a + 1))`, optionally capped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSchedule {
    b: f64,
    k0: f64,
    a: f64,
    cap: Option<u64>,
}

impl BatchSchedule {
    pub fn new(b: f64, k0: f64, a: f64, cap: Option<u64>) -> Result<Self> {
        for (name, v) in [("b", b), ("k0", k0), ("a", a)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "batch schedule parameter {name} must be positive, got {v}"
                )));
            }
        }
        if cap == Some(0) {
            return Err(Error::config("batch cap must be at least 1"));
        }
        Ok(BatchSchedule { b, k0, a, cap })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    /// Uncapped size `ceil(b (k + k0)^(a + 1))`.
    pub fn raw_batch_size(&self, k: u64) -> Result<u64> {
        if k == 0 {
            return Err(Error::config("batch sizes are defined for k >= 1"));
        }
        let n = (self.b * (k as f64 + self.k0).powf(self.a + 1.0)).ceil();
        if !n.is_finite() || n > MAX_BATCH as f64 {
            return Err(Error::config(format!(
                "batch size at iteration {k} overflows ({n:e} samples)"
            )));
        }
        Ok((n as u64).max(1))
    }

    pub fn batch_size(&self, k: u64) -> Result<u64> {
        let n = match (self.raw_batch_size(k), self.cap) {
            (Ok(n), cap) => cap.map_or(n, |c| n.min(c)),
            // a capped schedule never needs the overflowing value
            (Err(_), Some(c)) if k >= 1 => c,
            (Err(e), _) => return Err(e),
        };
        Ok(n)
    }

    /// Whether the cap is active at iteration `k`.
    pub fn is_capped_at(&self, k: u64) -> bool {
        match self.cap {
            None => false,
            Some(c) => self.raw_batch_size(k).map_or(true, |n| n > c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleScheme {
    Exact,
    /// Fixed mini-batch of `batch` realizations per call.
    Sa { batch: u64 },
    /// Increasing batch following the schedule.
    Saa(BatchSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub scheme: OracleScheme,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl OracleConfig {
    pub fn exact() -> Self {
        OracleConfig {
            scheme: OracleScheme::Exact,
            noise: NoiseModel::Structural,
            seed: 0,
        }
    }
}

/// Address of one oracle call inside a run: iteration index and call slot
/// (extragradient queries the oracle twice per iteration).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawKey {
    pub iteration: u64,
    pub slot: u8,
}

impl DrawKey {
    pub fn new(iteration: u64, slot: u8) -> Self {
        DrawKey { iteration, slot }
    }

    fn stream(&self) -> u64 {
        (self.iteration << 2) | u64::from(self.slot & 3)
    }
}

/// A validated oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle {
    config: OracleConfig,
}

impl Oracle {
    pub fn new(config: OracleConfig) -> Result<Self> {
        config.noise.validate()?;
        if let OracleScheme::Sa { batch: 0 } = config.scheme {
            return Err(Error::config("SA batch size must be at least 1"));
        }
        Ok(Oracle { config })
    }

    pub fn exact() -> Self {
        Oracle {
            config: OracleConfig::exact(),
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Same oracle reading from a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut config = self.config;
        config.seed = seed;
        Oracle { config }
    }

    /// Number of samples the call at iteration `k` averages (0 for exact).
    pub fn batch_size(&self, k: u64) -> Result<u64> {
        match self.config.scheme {
            OracleScheme::Exact => Ok(0),
            OracleScheme::Sa { batch } => Ok(batch),
            OracleScheme::Saa(schedule) => schedule.batch_size(k),
        }
    }

    pub fn is_capped_at(&self, k: u64) -> bool {
        matches!(self.config.scheme, OracleScheme::Saa(s) if s.is_capped_at(k))
    }

    /// Bound on `E||estimate - F(x)||^2` for the call at iteration `k`.
    pub fn error_variance_bound(&self, problem: &ViProblem, k: u64) -> Result<Option<f64>> {
        let n = self.batch_size(k)?;
        if n == 0 {
            return Ok(Some(0.0));
        }
        Ok(self
            .config
            .noise
            .per_sample_variance(problem)
            .map(|v| v / n as f64))
    }

    /// Pseudogradient estimate at `x` and the number of samples it consumed.
    pub fn sample_gradient(
        &self,
        problem: &ViProblem,
        x: &JointPoint,
        key: DrawKey,
    ) -> Result<(JointPoint, u64)> {
        let mut out = x.zeros_like();
        let used = self.sample_into(problem, x, key, &mut out)?;
        Ok((out, used))
    }

    pub fn sample_into(
        &self,
        problem: &ViProblem,
        x: &JointPoint,
        key: DrawKey,
        out: &mut JointPoint,
    ) -> Result<u64> {
        if key.iteration == 0 {
            return Err(Error::config("oracle iterations are numbered from 1"));
        }
        let n = self.batch_size(key.iteration)?;
        if n == 0 {
            problem.evaluate_into(x, out)?;
            return Ok(0);
        }
        problem.feasible().check_point(x)?;
        let mut rng = keyed_rng(self.config.seed, key.stream());
        let field = problem.field();
        let dim = x.len();
        let mut sample = vec![0.0; dim];
        let mut base = Vec::new();
        if let NoiseModel::AdditiveGaussian { .. } = self.config.noise {
            base = vec![0.0; dim];
            field.exact(x.as_slice(), &mut base);
        }
        let mean = out.as_mut_slice();
        mean.fill(0.0);
        for s in 0..n {
            match self.config.noise {
                NoiseModel::AdditiveGaussian { sigma } => {
                    for (v, f) in sample.iter_mut().zip(&base) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = f + sigma * z;
                    }
                }
                NoiseModel::Structural => field.sample(x.as_slice(), &mut rng, &mut sample),
            }
            if let Some(index) = sample.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteSample { sample: s, index });
            }
            // running mean: exact when every sample is identical
            let inv = 1.0 / (s + 1) as f64;
            for (m, v) in mean.iter_mut().zip(&sample) {
                *m += (v - *m) * inv;
            }
        }
        Ok(n)
    }
}

/// `eps = estimate - exact` and its squared norm.
pub fn stochastic_error(estimate: &JointPoint, exact: &JointPoint) -> Result<(JointPoint, f64)> {
    let err = estimate.sub(exact)?;
    let sq = err.norm_sq();
    Ok((err, sq))
}
