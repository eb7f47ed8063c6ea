use std::time::Instant;

use super::{step, validate_config, Algorithm, Averaging, Counters, SolverConfig, SolverState, StepReport};
use crate::error::{Error, Result};
use crate::metrics::{distance_metrics, residual, GapProbes};
use crate::oracle::Oracle;
use crate::point::JointPoint;
use crate::problem::ViProblem;

/// Running average of the iterates `x^1, ..., x^k` (`x^0` excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct Averager {
    mode: Averaging,
    sum: Option<JointPoint>,
    online: Option<JointPoint>,
    count: u64,
}

impl Averager {
    pub fn new(mode: Averaging) -> Self {
        Averager {
            mode,
            sum: None,
            online: None,
            count: 0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &JointPoint) -> Result<()> {
        match self.mode {
            Averaging::None => return Ok(()),
            Averaging::BatchMean => {
                self.sum = Some(match self.sum.take() {
                    None => x.clone(),
                    Some(s) => s.add(x)?,
                });
            }
            Averaging::Online(rule) => {
                let w = rule.weight(self.count + 1);
                self.online = Some(match self.online.take() {
                    None => x.clone(),
                    Some(prev) => super::online_average_update(&prev, x, w)?,
                });
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn current(&self) -> Option<JointPoint> {
        match self.mode {
            Averaging::None => None,
            Averaging::BatchMean => {
                let k = self.count as f64;
                self.sum
                    .as_ref()
                    .map(|s| JointPoint::from_flat(s.as_slice().iter().map(|v| v / k).collect(), s.n_g()).expect("same split"))
            }
            Averaging::Online(_) => self.online.clone(),
        }
    }
}

/// One logged row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: u64,
    pub rel_dist: Option<f64>,
    pub rel_dist_avg: Option<f64>,
    pub residual: Option<f64>,
    /// Gap lower bound of the averaged iterate when averaging is on, of the
    /// last iterate otherwise.
    pub gap_lb: Option<f64>,
    pub counters: Counters,
    /// Cumulative time spent inside solver steps.
    pub wall_ns: Option<u64>,
    /// Whether the batch cap bound at this iteration.
    pub capped: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LogOptions<'a> {
    /// Log at every multiple of `log_every` and at the final iteration.
    pub log_every: u64,
    pub gap_probes: Option<&'a GapProbes>,
    pub record_wall_time: bool,
    pub residual: bool,
}

impl Default for LogOptions<'_> {
    fn default() -> Self {
        LogOptions {
            log_every: 1,
            gap_probes: None,
            record_wall_time: false,
            residual: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub state: SolverState,
    pub average: Option<JointPoint>,
    pub trace: Vec<TraceRecord>,
}

impl RunOutput {
    /// The algorithm's answer: the average for aSRFB, the last iterate otherwise.
    pub fn output_point(&self, algorithm: Algorithm) -> &JointPoint {
        match (algorithm, &self.average) {
            (Algorithm::Asrfb, Some(avg)) => avg,
            _ => &self.state.x,
        }
    }
}

pub fn run(
    problem: &ViProblem,
    config: &SolverConfig,
    oracle: &Oracle,
    x0: JointPoint,
    opts: &LogOptions<'_>,
) -> Result<RunOutput> {
    run_with(problem, config, oracle, x0, opts, |_, _| Ok(()))
}

/// Runs `config.iterations` steps from `x0`, calling `observe` after every
/// step with the new state and the step report.
pub fn run_with<F>(
    problem: &ViProblem,
    config: &SolverConfig,
    oracle: &Oracle,
    x0: JointPoint,
    opts: &LogOptions<'_>,
    observe: F,
) -> Result<RunOutput>
where
    F: FnMut(&SolverState, &StepReport) -> Result<()>,
{
    let state = SolverState::new(problem, x0)?;
    run_from_state(problem, config, oracle, state, opts, observe)
}

/// Averaged relaxed forward-backward from an explicit state; returns the
/// final state, `X^K` and the per-iteration trace.
pub fn asrfb_run(
    problem: &ViProblem,
    config: &SolverConfig,
    state0: SolverState,
    oracle: &Oracle,
) -> Result<(SolverState, JointPoint, Vec<TraceRecord>)> {
    if config.averaging == Averaging::None {
        return Err(Error::config("asrfb requires batch-mean or online averaging"));
    }
    let mut config = config.clone();
    config.algorithm = Algorithm::Asrfb;
    let out = run_from_state(problem, &config, oracle, state0, &LogOptions::default(), |_, _| Ok(()))?;
    let avg = out.average.expect("averaging enabled");
    Ok((out.state, avg, out.trace))
}

pub(crate) fn run_from_state<F>(
    problem: &ViProblem,
    config: &SolverConfig,
    oracle: &Oracle,
    mut state: SolverState,
    opts: &LogOptions<'_>,
    mut observe: F,
) -> Result<RunOutput>
where
    F: FnMut(&SolverState, &StepReport) -> Result<()>,
{
    validate_config(config, problem, Some(oracle))?;
    if opts.log_every == 0 {
        return Err(Error::config("log_every must be at least 1"));
    }
    let x0 = state.x.clone();
    let x_star = problem
        .known_solution()
        .filter(|s| x0.distance_sq(s).is_ok_and(|d| d > 0.0));
    let mut averager = Averager::new(config.averaging);
    let mut trace = Vec::new();
    let mut elapsed_ns: u64 = 0;
    let last = state.k + config.iterations;

    while state.k < last {
        let started = opts.record_wall_time.then(Instant::now);
        let report = step(problem, config, &mut state, oracle)?;
        if let Some(t) = started {
            elapsed_ns += t.elapsed().as_nanos() as u64;
        }
        averager.push(&state.x)?;
        observe(&state, &report)?;

        if state.k.is_multiple_of(opts.log_every) || state.k == last {
            let avg = averager.current();
            let rel = |p: &JointPoint| -> Result<Option<f64>> {
                x_star
                    .map(|s| distance_metrics(p, s, &x0).map(|(_, r)| r))
                    .transpose()
            };
            let gap_target = avg.as_ref().unwrap_or(&state.x);
            trace.push(TraceRecord {
                k: state.k,
                rel_dist: rel(&state.x)?,
                rel_dist_avg: avg.as_ref().map(rel).transpose()?.flatten(),
                residual: if opts.residual {
                    Some(residual(problem, &state.x, config.lambda)?)
                } else {
                    None
                },
                gap_lb: opts.gap_probes.map(|g| g.evaluate(gap_target)).transpose()?,
                counters: state.counters,
                wall_ns: opts.record_wall_time.then_some(elapsed_ns),
                capped: oracle.is_capped_at(state.k),
            });
        }
    }
    state.avg = averager.current();
    Ok(RunOutput {
        average: state.avg.clone(),
        state,
        trace,
    })
}
