use crate::error::{Error, Result};
use crate::point::JointPoint;
use crate::problem::ViProblem;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub grad_evals: u64,
    pub projections: u64,
    pub samples_drawn: u64,
}

/// Memory used only by the baselines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineSlots {
    /// Extrapolation point of the last extragradient iteration.
    pub eg_midpoint: Option<JointPoint>,
    /// Gradient reused by PastEG; starts at zero.
    pub past_gradient: Option<JointPoint>,
    pub adam_m: Option<JointPoint>,
    pub adam_v: Option<JointPoint>,
}

/// Iterate memory of a run. `k` counts completed iterations, so `x` is
/// `x^k` and `x_bar_prev` is the relaxed point of the last iteration
/// (`x^0` before the first).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: JointPoint,
    pub x_bar_prev: JointPoint,
    pub avg: Option<JointPoint>,
    pub slots: BaselineSlots,
    pub counters: Counters,
    pub k: u64,
}

impl SolverState {
    /// Fresh state at a feasible `x0`; the relaxation buffer starts at `x0`.
    pub fn new(problem: &ViProblem, x0: JointPoint) -> Result<Self> {
        problem.feasible().check_point(&x0)?;
        if let Some(index) = x0.first_non_finite() {
            return Err(Error::NonFinite {
                index,
                context: "initial point".into(),
            });
        }
        if !problem.feasible().contains(&x0) {
            let projected = problem.joint_project(&x0)?;
            let index = x0
                .as_slice()
                .iter()
                .zip(projected.as_slice())
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            return Err(Error::Infeasible {
                index,
                value: x0.as_slice()[index],
            });
        }
        Ok(SolverState {
            x_bar_prev: x0.clone(),
            x: x0,
            avg: None,
            slots: BaselineSlots::default(),
            counters: Counters::default(),
            k: 0,
        })
    }
}
