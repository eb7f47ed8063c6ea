//! Equilibrium-seeking iterations.
//!
//! Each step function advances a [`SolverState`] by one iteration and
//! returns a [`StepReport`] with the quantities the metrics need. The state
//! is left untouched when a step fails.

mod config;
mod run;
mod state;

pub use config::{
    step_size_bound, validate_config, AdamParams, Algorithm, Averaging, SolverConfig, Warning,
    WeightRule, GOLDEN_DELTA,
};
pub use run::{asrfb_run, run, run_with, Averager, LogOptions, RunOutput, TraceRecord};
pub use state::{BaselineSlots, Counters, SolverState};

use crate::error::{Error, Result};
use crate::oracle::{DrawKey, Oracle};
use crate::point::JointPoint;
use crate::problem::ViProblem;

/// What one iteration looked at.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Iterate before the step, `x^k`.
    pub x_prev: JointPoint,
    /// Relaxed point `x_bar^k` (relaxed algorithms only).
    pub x_bar: Option<JointPoint>,
    /// Point at which the main-update estimate was taken.
    pub query: JointPoint,
    /// Estimate used in the main update.
    pub estimate: JointPoint,
    pub samples: u64,
}

/// `x_bar = (1 - delta) x + delta x_bar_prev`.
pub fn relax(x: &JointPoint, x_bar_prev: &JointPoint, delta: f64) -> Result<JointPoint> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::config(format!("delta must lie in [0, 1), got {delta}")));
    }
    // x + delta (x_bar_prev - x): exact when the two points coincide
    x.zip_with(x_bar_prev, |a, b| a + delta * (b - a))
}

/// `X = (1 - weight) X_prev + weight x_new`.
pub fn online_average_update(
    prev: &JointPoint,
    new: &JointPoint,
    weight: f64,
) -> Result<JointPoint> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::config(format!(
            "averaging weight must lie in [0, 1], got {weight}"
        )));
    }
    if weight == 1.0 {
        prev.check_same_shape(new)?;
        return Ok(new.clone());
    }
    prev.zip_with(new, |p, n| p + weight * (n - p))
}

struct Ctx<'a> {
    problem: &'a ViProblem,
    config: &'a SolverConfig,
    oracle: &'a Oracle,
    iteration: u64,
    counters: Counters,
}

impl Ctx<'_> {
    fn new<'a>(
        problem: &'a ViProblem,
        config: &'a SolverConfig,
        oracle: &'a Oracle,
        state: &SolverState,
    ) -> Result<Ctx<'a>> {
        problem.feasible().check_point(&state.x)?;
        Ok(Ctx {
            problem,
            config,
            oracle,
            iteration: state.k + 1,
            counters: state.counters,
        })
    }

    fn estimate(&mut self, x: &JointPoint, slot: u8) -> Result<JointPoint> {
        let (g, used) =
            self.oracle
                .sample_gradient(self.problem, x, DrawKey::new(self.iteration, slot))?;
        self.counters.grad_evals += 1;
        self.counters.samples_drawn += used;
        Ok(g)
    }

    /// `proj(base - lambda * direction)` with per-block step sizes.
    fn forward_backward(&mut self, base: &JointPoint, direction: &JointPoint) -> Result<JointPoint> {
        base.check_same_shape(direction)?;
        let (lg, ld) = self.config.block_lambdas();
        let n_g = base.n_g();
        let data = base
            .as_slice()
            .iter()
            .zip(direction.as_slice())
            .enumerate()
            .map(|(i, (b, d))| b - if i < n_g { lg } else { ld } * d)
            .collect();
        self.project(JointPoint::from_flat(data, n_g)?)
    }

    fn project(&mut self, mut x: JointPoint) -> Result<JointPoint> {
        self.problem.feasible().project_in_place(&mut x)?;
        self.counters.projections += 1;
        if let Some(index) = x.first_non_finite() {
            return Err(Error::NonFinite {
                index,
                context: format!("{} iterate {}", self.config.algorithm, self.iteration),
            });
        }
        Ok(x)
    }

    fn commit(self, state: &mut SolverState, x_next: JointPoint) {
        state.x = x_next;
        state.counters = self.counters;
        state.k = self.iteration;
    }
}

/// Relaxed forward-backward: `x_bar^k = (1-delta) x^k + delta x_bar^{k-1}`,
/// `x^{k+1} = proj(x_bar^k - lambda F_hat(x^k))`. The oracle is queried at
/// `x^k`, not at the relaxed point.
pub fn srfb_step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    let mut ctx = Ctx::new(problem, config, oracle, state)?;
    let x_bar = relax(&state.x, &state.x_bar_prev, config.delta)?;
    let before = ctx.counters.samples_drawn;
    let estimate = ctx.estimate(&state.x, 0)?;
    let samples = ctx.counters.samples_drawn - before;
    let x_next = ctx.forward_backward(&x_bar, &estimate)?;
    let x_prev = state.x.clone();
    state.x_bar_prev = x_bar.clone();
    ctx.commit(state, x_next);
    Ok(StepReport {
        query: x_prev.clone(),
        x_prev,
        x_bar: Some(x_bar),
        estimate,
        samples,
    })
}

/// `x^{k+1} = proj(x^k - lambda F_hat(x^k))`.
pub fn sfb_step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    let mut ctx = Ctx::new(problem, config, oracle, state)?;
    let estimate = ctx.estimate(&state.x, 0)?;
    let samples = ctx.counters.samples_drawn - state.counters.samples_drawn;
    let x_next = ctx.forward_backward(&state.x, &estimate)?;
    let x_prev = state.x.clone();
    ctx.commit(state, x_next);
    Ok(StepReport {
        query: x_prev.clone(),
        x_prev,
        x_bar: None,
        estimate,
        samples,
    })
}

/// `y = proj(x - lambda F_hat(x))`, `x^{k+1} = proj(x - lambda F_hat(y))`.
pub fn eg_step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    let mut ctx = Ctx::new(problem, config, oracle, state)?;
    let g_x = ctx.estimate(&state.x, 0)?;
    let y = ctx.forward_backward(&state.x, &g_x)?;
    let g_y = ctx.estimate(&y, 1)?;
    let samples = ctx.counters.samples_drawn - state.counters.samples_drawn;
    let x_next = ctx.forward_backward(&state.x, &g_y)?;
    let x_prev = state.x.clone();
    state.slots.eg_midpoint = Some(y.clone());
    ctx.commit(state, x_next);
    Ok(StepReport {
        x_prev,
        x_bar: None,
        query: y,
        estimate: g_y,
        samples,
    })
}

/// `y^k = proj(x^k - lambda g^{k-1})`, `g^k = F_hat(y^k)`,
/// `x^{k+1} = proj(x^k - lambda g^k)`; `g^{-1} = 0`.
pub fn past_eg_step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    let mut ctx = Ctx::new(problem, config, oracle, state)?;
    let zero;
    let past = match &state.slots.past_gradient {
        Some(g) => g,
        None => {
            zero = state.x.zeros_like();
            &zero
        }
    };
    let y = ctx.forward_backward(&state.x, past)?;
    let g = ctx.estimate(&y, 0)?;
    let samples = ctx.counters.samples_drawn - state.counters.samples_drawn;
    let x_next = ctx.forward_backward(&state.x, &g)?;
    let x_prev = state.x.clone();
    state.slots.past_gradient = Some(g.clone());
    ctx.commit(state, x_next);
    Ok(StepReport {
        x_prev,
        x_bar: None,
        query: y,
        estimate: g,
        samples,
    })
}

/// Bias-corrected Adam on the pseudogradient estimate, followed by a
/// projection. Each player descends along its own block of `F`.
pub fn adam_step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    let AdamParams { beta1, beta2, eps } = config.adam;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::config(format!("adam epsilon must be positive, got {eps}")));
    }
    let mut ctx = Ctx::new(problem, config, oracle, state)?;
    let g = ctx.estimate(&state.x, 0)?;
    let samples = ctx.counters.samples_drawn - state.counters.samples_drawn;
    let zeros = state.x.zeros_like();
    let m_prev = state.slots.adam_m.as_ref().unwrap_or(&zeros);
    let v_prev = state.slots.adam_v.as_ref().unwrap_or(&zeros);
    let m = m_prev.zip_with(&g, |m, g| beta1 * m + (1.0 - beta1) * g)?;
    let v = v_prev.zip_with(&g, |v, g| beta2 * v + (1.0 - beta2) * g * g)?;
    let t = ctx.iteration as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let direction = m.zip_with(&v, |m, v| (m / c1) / ((v / c2).sqrt() + eps))?;
    let x_next = ctx.forward_backward(&state.x, &direction)?;
    let x_prev = state.x.clone();
    state.slots.adam_m = Some(m);
    state.slots.adam_v = Some(v);
    ctx.commit(state, x_next);
    Ok(StepReport {
        query: x_prev.clone(),
        x_prev,
        x_bar: None,
        estimate: g,
        samples,
    })
}

/// One iteration of `config.algorithm`.
pub fn step(
    problem: &ViProblem,
    config: &SolverConfig,
    state: &mut SolverState,
    oracle: &Oracle,
) -> Result<StepReport> {
    match config.algorithm {
        Algorithm::Srfb | Algorithm::Asrfb => srfb_step(problem, config, state, oracle),
        Algorithm::Sfb => sfb_step(problem, config, state, oracle),
        Algorithm::Eg => eg_step(problem, config, state, oracle),
        Algorithm::PastEg => past_eg_step(problem, config, state, oracle),
        Algorithm::Adam => adam_step(problem, config, state, oracle),
    }
}
