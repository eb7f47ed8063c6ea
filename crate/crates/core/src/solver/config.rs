use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracle::{Oracle, OracleScheme};
use crate::problem::ViProblem;

/// `(sqrt(5) - 1) / 2`, the smallest relaxation for which the
/// increasing-batch convergence result applies.
pub const GOLDEN_DELTA: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Relaxed forward-backward, last iterate.
    Srfb,
    /// Relaxed forward-backward returning the averaged iterate.
    Asrfb,
    /// Plain projected forward-backward.
    Sfb,
    /// Extragradient.
    Eg,
    /// Extragradient with extrapolation from the past gradient.
    PastEg,
    Adam,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Srfb,
        Algorithm::Asrfb,
        Algorithm::Sfb,
        Algorithm::Eg,
        Algorithm::PastEg,
        Algorithm::Adam,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Srfb => "srfb",
            Algorithm::Asrfb => "asrfb",
            Algorithm::Sfb => "sfb",
            Algorithm::Eg => "eg",
            Algorithm::PastEg => "pasteg",
            Algorithm::Adam => "adam",
        }
    }

    /// Oracle calls and projections per iteration.
    pub fn cost_per_iteration(&self) -> (u64, u64) {
        match self {
            Algorithm::Eg => (2, 2),
            Algorithm::PastEg => (1, 2),
            _ => (1, 1),
        }
    }

    pub fn is_relaxed(&self) -> bool {
        matches!(self, Algorithm::Srfb | Algorithm::Asrfb)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == lower)
            .or(match lower.as_str() {
                "past-eg" | "past_eg" => Some(Algorithm::PastEg),
                _ => None,
            })
            .ok_or_else(|| Error::config(format!("unknown algorithm `{s}`")))
    }
}

/// Weights of the online average `X^k = (1 - w_k) X^{k-1} + w_k x^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    /// `w_k = 1/k`, the running mean.
    Uniform,
    /// Constant `w` (exponential forgetting). The first weight is 1.
    Constant(f64),
}

impl WeightRule {
    pub fn weight(&self, k: u64) -> f64 {
        match *self {
            WeightRule::Uniform => 1.0 / k as f64,
            WeightRule::Constant(_) if k == 1 => 1.0,
            WeightRule::Constant(w) => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Averaging {
    None,
    /// `X^K = (1/K) sum_{k=1}^K x^k` from a cumulative sum.
    BatchMean,
    Online(WeightRule),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Relaxation weight on the previous relaxed point.
    pub delta: f64,
    /// Uniform step size.
    pub lambda: f64,
    /// Optional per-player step sizes `(lambda_g, lambda_d)`; overrides `lambda`
    /// in the update but not in the residual.
    pub player_lambdas: Option<(f64, f64)>,
    pub iterations: u64,
    pub averaging: Averaging,
    pub adam: AdamParams,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, lambda: f64, iterations: u64) -> Self {
        SolverConfig {
            algorithm,
            delta: GOLDEN_DELTA,
            lambda,
            player_lambdas: None,
            iterations,
            averaging: match algorithm {
                Algorithm::Asrfb => Averaging::BatchMean,
                _ => Averaging::None,
            },
            adam: AdamParams::default(),
            seed: 0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_adam(mut self, adam: AdamParams) -> Self {
        self.adam = adam;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn block_lambdas(&self) -> (f64, f64) {
        self.player_lambdas.unwrap_or((self.lambda, self.lambda))
    }
}

/// Largest step size `1 / (2 delta (2 ell + 1))` covered by the
/// increasing-batch convergence result.
pub fn step_size_bound(ell: f64, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::config(format!(
            "step size bound needs delta > 0, got {delta}"
        )));
    }
    if !(ell.is_finite() && ell >= 0.0) {
        return Err(Error::config(format!(
            "Lipschitz constant must be finite and nonnegative, got {ell}"
        )));
    }
    Ok(1.0 / (2.0 * delta * (2.0 * ell + 1.0)))
}

/// Conditions under which a run proceeds but leaves the convergence theory.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    BelowGoldenThreshold { delta: f64 },
    StepAboveBound { lambda: f64, bound: f64 },
    UnknownLipschitz,
    OracleWithoutGrowingBatch,
    BatchCapped { cap: u64 },
    PerPlayerSteps,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::BelowGoldenThreshold { delta } => write!(
                f,
                "delta = {delta} is below the golden-ratio threshold {GOLDEN_DELTA:.6} (outside theory)"
            ),
            Warning::StepAboveBound { lambda, bound } => write!(
                f,
                "lambda = {lambda} exceeds the step size bound {bound:.6} (outside theory)"
            ),
            Warning::UnknownLipschitz => {
                f.write_str("no Lipschitz constant known; step size bound not checked")
            }
            Warning::OracleWithoutGrowingBatch => f.write_str(
                "oracle uses a fixed batch; last-iterate convergence needs growing batches (outside theory)",
            ),
            Warning::BatchCapped { cap } => write!(
                f,
                "batch schedule capped at {cap}; growth premise fails once the cap binds (outside theory)"
            ),
            Warning::PerPlayerSteps => {
                f.write_str("per-player step sizes are outside theory (a single lambda is analysed)")
            }
        }
    }
}

/// Hard errors for invalid parameters; warnings for runs that are valid but
/// outside the premises of the convergence results.
pub fn validate_config(
    config: &SolverConfig,
    problem: &ViProblem,
    oracle: Option<&Oracle>,
) -> Result<Vec<Warning>> {
    let positive = |name: &str, v: f64| -> Result<()> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::config(format!("{name} must be positive, got {v}")))
        }
    };
    positive("lambda", config.lambda)?;
    if let Some((g, d)) = config.player_lambdas {
        positive("lambda_g", g)?;
        positive("lambda_d", d)?;
    }
    if !(0.0..1.0).contains(&config.delta) {
        return Err(Error::config(format!(
            "delta must lie in [0, 1), got {}",
            config.delta
        )));
    }
    if config.iterations == 0 {
        return Err(Error::config("iteration budget must be at least 1"));
    }
    if let Averaging::Online(WeightRule::Constant(w)) = config.averaging {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::config(format!(
                "online averaging weight must lie in [0, 1], got {w}"
            )));
        }
    }
    if config.algorithm == Algorithm::Asrfb && config.averaging == Averaging::None {
        return Err(Error::config("asrfb requires batch-mean or online averaging"));
    }
    if config.algorithm == Algorithm::Adam {
        let AdamParams { beta1, beta2, eps } = config.adam;
        for (name, beta) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::config(format!("{name} must lie in [0, 1), got {beta}")));
            }
        }
        positive("adam epsilon", eps)?;
    }

    let mut warnings = Vec::new();
    if config.player_lambdas.is_some() {
        warnings.push(Warning::PerPlayerSteps);
    }
    if config.algorithm == Algorithm::Srfb {
        if config.delta < GOLDEN_DELTA {
            warnings.push(Warning::BelowGoldenThreshold {
                delta: config.delta,
            });
        }
        match problem.lipschitz() {
            Some(ell) if config.delta > 0.0 => {
                let bound = step_size_bound(ell, config.delta)?;
                if config.lambda > bound {
                    warnings.push(Warning::StepAboveBound {
                        lambda: config.lambda,
                        bound,
                    });
                }
            }
            Some(_) => {}
            None => warnings.push(Warning::UnknownLipschitz),
        }
        if let Some(oracle) = oracle {
            match oracle.config().scheme {
                OracleScheme::Exact => {}
                OracleScheme::Sa { .. } => warnings.push(Warning::OracleWithoutGrowingBatch),
                OracleScheme::Saa(schedule) => {
                    if let Some(cap) = schedule.cap() {
                        if schedule.is_capped_at(config.iterations) {
                            warnings.push(Warning::BatchCapped { cap });
                        }
                    }
                }
            }
        }
    }
    Ok(warnings)
}
