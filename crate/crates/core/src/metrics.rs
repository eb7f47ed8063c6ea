//! Solution-quality measures and probes of the convergence premises.

use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::oracle::Oracle;
use crate::point::{dot, JointPoint};
use crate::problem::{SampleRng, ViProblem};

/// Natural residual `||x - proj(x - lambda F(x))||`.
pub fn residual(problem: &ViProblem, x: &JointPoint, lambda: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::config(format!("residual needs lambda > 0, got {lambda}")));
    }
    let f = problem.evaluate_F(x)?;
    let trial = x.zip_with(&f, |a, g| a - lambda * g)?;
    let projected = problem.joint_project(&trial)?;
    x.distance(&projected)
}

/// `dist = ||x - x*||` and `rel_dist = dist / ||x0 - x*||`.
pub fn distance_metrics(
    x: &JointPoint,
    x_star: &JointPoint,
    x0: &JointPoint,
) -> Result<(f64, f64)> {
    let initial = x0.distance(x_star)?;
    if initial == 0.0 {
        return Err(Error::config(
            "relative distance undefined: initial point equals the solution",
        ));
    }
    let dist = x.distance(x_star)?;
    Ok((dist, dist / initial))
}

/// Probe points with their mapping values cached, for repeated evaluation of
/// the gap lower bound `max_y <F(y), x - y>`.
#[derive(Debug, Clone)]
pub struct GapProbes {
    values: Vec<JointPoint>,
    offsets: Vec<f64>,
}

impl GapProbes {
    pub fn new(problem: &ViProblem, points: &[JointPoint]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("gap lower bound needs at least one probe point"));
        }
        let mut values = Vec::with_capacity(points.len());
        let mut offsets = Vec::with_capacity(points.len());
        for y in points {
            if !problem.feasible().contains(y) {
                return Err(Error::config("gap probe points must be feasible"));
            }
            let f = problem.evaluate_F(y)?;
            offsets.push(f.dot(y)?);
            values.push(f);
        }
        Ok(GapProbes { values, offsets })
    }

    /// Deterministic grid (joint dimension at most 3), the known solution,
    /// and `random` uniformly drawn feasible points.
    pub fn standard(problem: &ViProblem, random: usize, seed: u64) -> Result<Self> {
        Self::new(problem, &standard_probe_points(problem, random, seed))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn evaluate(&self, x: &JointPoint) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for (f, offset) in self.values.iter().zip(&self.offsets) {
            f.check_same_shape(x)?;
            best = best.max(dot(f.as_slice(), x.as_slice()) - offset);
        }
        Ok(best)
    }
}

pub fn standard_probe_points(problem: &ViProblem, random: usize, seed: u64) -> Vec<JointPoint> {
    let feasible = problem.feasible();
    let mut points = Vec::new();
    if problem.dim() <= 3 {
        points.extend(feasible.grid(11, 2000).unwrap_or_default());
    }
    if let Some(sol) = problem.known_solution() {
        points.push(sol.clone());
    }
    let mut rng = SampleRng::seed_from_u64(seed);
    points.extend((0..random).map(|_| feasible.sample_uniform(&mut rng)));
    points
}

/// Lower bound on the gap `err(x) = max_{y in Omega} <F(y), x - y>` from a
/// finite probe set.
pub fn gap_lower_bound(problem: &ViProblem, x: &JointPoint, probes: &[JointPoint]) -> Result<f64> {
    GapProbes::new(problem, probes)?.evaluate(x)
}

/// Which quantity stands for `R` in the averaged-iterate bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RConvention {
    /// `R` is the squared diameter of the feasible set.
    DiameterSq,
    /// `R` is the diameter.
    Diameter,
}

impl RConvention {
    pub fn value(&self, feasible: &FeasibleSet) -> f64 {
        match self {
            RConvention::DiameterSq => feasible.diameter_sq(),
            RConvention::Diameter => feasible.diameter_sq().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub delta: f64,
    pub lambda: f64,
    pub iterations: u64,
    pub r: f64,
    pub b: f64,
    pub sigma_sq: f64,
}

/// `c = (2 - delta^2) / (1 - delta)`.
pub fn averaging_constant(delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::config(format!(
            "bound constant needs delta in [0, 1), got {delta}"
        )));
    }
    Ok((2.0 - delta * delta) / (1.0 - delta))
}

/// Upper bound `c R / (lambda K) + (2 B^2 + sigma^2) lambda` on the expected
/// gap of the averaged iterate.
pub fn theorem1_bound(inputs: &BoundInputs) -> Result<f64> {
    let c = averaging_constant(inputs.delta)?;
    if !(inputs.lambda.is_finite() && inputs.lambda > 0.0) {
        return Err(Error::config("bound needs lambda > 0"));
    }
    if inputs.iterations == 0 {
        return Err(Error::config("bound needs K >= 1"));
    }
    for (name, v) in [("R", inputs.r), ("B", inputs.b), ("sigma^2", inputs.sigma_sq)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(format!("{name} must be nonnegative, got {v}")));
        }
    }
    Ok(c * inputs.r / (inputs.lambda * inputs.iterations as f64) + bound_asymptote(inputs))
}

/// `(2 B^2 + sigma^2) lambda`, the limit of the bound as `K` grows.
pub fn bound_asymptote(inputs: &BoundInputs) -> f64 {
    (2.0 * inputs.b * inputs.b + inputs.sigma_sq) * inputs.lambda
}

/// Step size minimising the bound for fixed `K`.
pub fn bound_optimal_lambda(inputs: &BoundInputs) -> Result<f64> {
    let c = averaging_constant(inputs.delta)?;
    let noise = 2.0 * inputs.b * inputs.b + inputs.sigma_sq;
    if noise <= 0.0 {
        return Err(Error::config("optimal lambda undefined when B and sigma^2 vanish"));
    }
    Ok((c * inputs.r / (inputs.iterations as f64 * noise)).sqrt())
}

/// Second-moment bound for the oracle: largest `||F(x)||^2` over box vertices
/// (or a grid in low dimension) and random feasible points, plus the oracle's
/// error variance.
pub fn estimate_oracle_bound(problem: &ViProblem, oracle: &Oracle, seed: u64) -> Result<f64> {
    let feasible = problem.feasible();
    let mut points = feasible.vertices(1 << 12).unwrap_or_default();
    if problem.dim() <= 3 {
        points.extend(feasible.grid(21, 20_000).unwrap_or_default());
    }
    points.push(feasible.center());
    let mut rng = SampleRng::seed_from_u64(seed);
    points.extend((0..512).map(|_| feasible.sample_uniform(&mut rng)));
    let mut max_sq = 0.0f64;
    for p in &points {
        max_sq = max_sq.max(problem.evaluate_F(p)?.norm_sq());
    }
    let variance = oracle.error_variance_bound(problem, 1)?.ok_or_else(|| {
        Error::config("oracle error variance is unknown for this problem; supply sigma^2")
    })?;
    Ok(max_sq + variance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub min_inner_product: f64,
    /// First sampled pair with `<F(x) - F(y), x - y> < -1e-10`.
    pub violating_pair: Option<(JointPoint, JointPoint)>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violating_pair.is_none()
    }
}

pub const MONOTONICITY_TOLERANCE: f64 = 1e-10;

/// Samples feasible pairs and reports the smallest `<F(x) - F(y), x - y>`.
pub fn monotonicity_probe(
    problem: &ViProblem,
    num_pairs: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if num_pairs == 0 {
        return Err(Error::config("monotonicity probe needs at least one pair"));
    }
    let mut rng = SampleRng::seed_from_u64(seed);
    let feasible = problem.feasible();
    let mut min = f64::INFINITY;
    let mut violating = None;
    for _ in 0..num_pairs {
        let x = feasible.sample_uniform(&mut rng);
        let y = feasible.sample_uniform(&mut rng);
        let fx = problem.evaluate_F(&x)?;
        let fy = problem.evaluate_F(&y)?;
        let ip = fx.sub(&fy)?.dot(&x.sub(&y)?)?;
        min = min.min(ip);
        if violating.is_none() && ip < -MONOTONICITY_TOLERANCE {
            violating = Some((x, y));
        }
    }
    Ok(MonotonicityReport {
        min_inner_product: min,
        violating_pair: violating,
    })
}

/// Largest sampled ratio `||F(x) - F(y)|| / ||x - y||`; a lower bound on the
/// Lipschitz constant. Coincident pairs are skipped.
pub fn lipschitz_estimate(problem: &ViProblem, num_pairs: usize, seed: u64) -> Result<f64> {
    if num_pairs == 0 {
        return Err(Error::config("Lipschitz estimate needs at least one pair"));
    }
    let mut rng = SampleRng::seed_from_u64(seed);
    let feasible = problem.feasible();
    let mut best = 0.0f64;
    for _ in 0..num_pairs {
        let x = feasible.sample_uniform(&mut rng);
        let y = feasible.sample_uniform(&mut rng);
        let gap = x.distance(&y)?;
        if gap == 0.0 {
            continue;
        }
        let df = problem.evaluate_F(&x)?.distance(&problem.evaluate_F(&y)?)?;
        best = best.max(df / gap);
    }
    Ok(best)
}

/// Both sides of
/// `res(x^k)^2 <= 2||x^k - x^{k+1}||^2 + 4||x_bar^k - x^k||^2 + lambda^2 ||eps_k||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualInequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const RESIDUAL_INEQUALITY_TOLERANCE: f64 = 1e-9;

pub fn residual_inequality_check(
    x_k: &JointPoint,
    x_k1: &JointPoint,
    x_bar_k: &JointPoint,
    eps_norm_sq: f64,
    lambda: f64,
    problem: &ViProblem,
) -> Result<ResidualInequality> {
    let res = residual(problem, x_k, lambda)?;
    let lhs = res * res;
    let rhs = 2.0 * x_k.distance_sq(x_k1)?
        + 4.0 * x_bar_k.distance_sq(x_k)?
        + lambda * lambda * eps_norm_sq;
    Ok(ResidualInequality {
        lhs,
        rhs,
        holds: lhs <= rhs + RESIDUAL_INEQUALITY_TOLERANCE,
    })
}
