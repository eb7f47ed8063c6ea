//! The `run`, `check` and `bound` commands. Each writes its report to `out`
//! and returns the process exit code.

use std::io::Write;
use std::time::Instant;

use svilab_core::benchmarks::Benchmark;
use svilab_core::experiment::{run_experiment, ExperimentOptions, RunSpec, TraceTable};
use svilab_core::metrics::{
    averaging_constant, bound_asymptote, estimate_oracle_bound, lipschitz_estimate,
    monotonicity_probe, theorem1_bound, BoundInputs, RConvention,
};
use svilab_core::solver::{step_size_bound, validate_config, Algorithm, Averaging, GOLDEN_DELTA};
use svilab_core::{Oracle, OracleScheme, ViProblem};

use crate::config::ExperimentConfig;
use crate::output::{render, write_atomic};
use crate::{CliError, ConfigError, EXIT_OK, EXIT_RUN_FAILURE};

const PROBE_PAIRS: usize = 2000;
const BOUND_GAP_PROBES: usize = 64;

fn io(e: std::io::Error) -> CliError {
    CliError::Run(format!("cannot write report: {e}"))
}

fn options(cfg: &ExperimentConfig, gap_probes: usize) -> ExperimentOptions {
    ExperimentOptions {
        replications: cfg.replications,
        log_every: cfg.log_every,
        master_seed: cfg.master_seed,
        gap_probes,
        record_wall_time: cfg.record_wall_time,
        workers: cfg.workers,
        start: cfg.start.clone(),
    }
}

fn run_table(cfg: &ExperimentConfig, bench: &Benchmark, gap_probes: usize) -> Result<TraceTable, CliError> {
    run_experiment(&bench.problem, &cfg.algorithms, &options(cfg, gap_probes))
        .map_err(|e| CliError::Run(e.to_string()))
}

fn report_failures(table: &TraceTable, out: &mut dyn Write) -> Result<i32, CliError> {
    for f in &table.failures {
        writeln!(out, "run {} ({}, replication {}) failed: {}", f.run_id, f.label, f.replication, f.error)
            .map_err(io)?;
    }
    Ok(if table.failures.is_empty() { EXIT_OK } else { EXIT_RUN_FAILURE })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0u64);
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

pub fn cmd_run(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let bench = cfg.problem.build()?;
    for w in &bench.warnings {
        writeln!(out, "warning: {w}").map_err(io)?;
    }
    let started = Instant::now();
    let table = run_table(cfg, &bench, cfg.gap_probes)?;
    let elapsed = started.elapsed();
    write_atomic(&cfg.output_path, &render(&table, cfg.output_format))?;

    writeln!(
        out,
        "{:<16} {:<7} {:>14} {:>14} {:>12} {:>12} {:>14}",
        "name", "method", "rel_dist", "rel_dist_avg", "grad_evals", "projections", "samples_drawn"
    )
    .map_err(io)?;
    let finals = table.final_rows();
    for spec in &cfg.algorithms {
        let rows: Vec<_> = finals.iter().filter(|r| r.label == spec.label).collect();
        let totals = rows.iter().fold([0u64; 3], |acc, r| {
            let c = r.record.counters;
            [acc[0] + c.grad_evals, acc[1] + c.projections, acc[2] + c.samples_drawn]
        });
        writeln!(
            out,
            "{:<16} {:<7} {:>14} {:>14} {:>12} {:>12} {:>14}",
            spec.label,
            spec.solver.algorithm.as_str(),
            fmt_opt(mean(rows.iter().map(|r| r.record.rel_dist))),
            fmt_opt(mean(rows.iter().map(|r| r.record.rel_dist_avg))),
            totals[0],
            totals[1],
            totals[2]
        )
        .map_err(io)?;
    }
    writeln!(
        out,
        "{} rows written to {} in {:.3} s",
        table.rows.len(),
        cfg.output_path.display(),
        elapsed.as_secs_f64()
    )
    .map_err(io)?;
    report_failures(&table, out)
}

/// Premise checks for one convergence result: empty means all hold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Premises(pub Vec<String>);

impl Premises {
    fn require(&mut self, ok: bool, failure: impl Into<String>) {
        if !ok {
            self.0.push(failure.into());
        }
    }

    pub fn verdict(&self) -> String {
        if self.0.is_empty() {
            "premises satisfied".into()
        } else {
            format!("outside theory: {}", self.0.join("; "))
        }
    }
}

/// Facts about the problem shared by every entry's premise check.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFacts {
    pub lipschitz_configured: Option<f64>,
    pub lipschitz_estimate: f64,
    pub min_monotone_product: f64,
    pub monotone: bool,
}

impl ProblemFacts {
    pub fn probe(problem: &ViProblem, seed: u64) -> Result<Self, CliError> {
        let run = |e: svilab_core::Error| CliError::Run(e.to_string());
        let mono = monotonicity_probe(problem, PROBE_PAIRS, seed).map_err(run)?;
        Ok(ProblemFacts {
            lipschitz_configured: problem.lipschitz(),
            lipschitz_estimate: lipschitz_estimate(problem, PROBE_PAIRS, seed).map_err(run)?,
            min_monotone_product: mono.min_inner_product,
            monotone: mono.is_monotone(),
        })
    }

    /// Configured constant when it is at least the sampled estimate,
    /// otherwise the estimate.
    pub fn lipschitz(&self) -> f64 {
        match self.lipschitz_configured {
            Some(l) if l >= self.lipschitz_estimate * (1.0 - 1e-9) => l,
            _ => self.lipschitz_estimate,
        }
    }
}

fn growing_schedule(oracle: &Oracle, iterations: u64, p: &mut Premises) {
    match oracle.config().scheme {
        OracleScheme::Saa(s) => {
            p.require(
                s.b() > 0.0 && s.k0() > 0.0 && s.a() > 0.0,
                format!("batch schedule needs b, k0, a > 0 (got {}, {}, {})", s.b(), s.k0(), s.a()),
            );
            if let Some(cap) = s.cap() {
                p.require(!s.is_capped_at(iterations), format!("batch cap {cap} binds before K = {iterations}"));
            }
        }
        OracleScheme::Sa { .. } => p.0.push("oracle uses a fixed batch, not a growing one".into()),
        OracleScheme::Exact => p.0.push("oracle is exact, not sampled".into()),
    }
}

pub fn theorem1_premises(spec: &RunSpec, facts: &ProblemFacts, variance: Option<f64>) -> Premises {
    let mut p = Premises::default();
    p.require(spec.solver.algorithm == Algorithm::Asrfb, "method is not asrfb");
    p.require(facts.monotone, "monotonicity violated");
    p.require(spec.solver.player_lambdas.is_none(), "per-player step sizes");
    p.require(variance.is_some(), "oracle error variance unknown");
    p
}

pub fn theorem2_premises(spec: &RunSpec, facts: &ProblemFacts, oracle: &Oracle) -> Premises {
    let mut p = srfb_common(spec, facts);
    growing_schedule(oracle, spec.solver.iterations, &mut p);
    p
}

pub fn corollary1_premises(spec: &RunSpec, facts: &ProblemFacts, oracle: &Oracle) -> Premises {
    let mut p = srfb_common(spec, facts);
    p.require(
        matches!(oracle.config().scheme, OracleScheme::Exact),
        "oracle is sampled, not exact",
    );
    p
}

fn srfb_common(spec: &RunSpec, facts: &ProblemFacts) -> Premises {
    let s = &spec.solver;
    let mut p = Premises::default();
    p.require(s.algorithm == Algorithm::Srfb, "method is not srfb");
    p.require(facts.monotone, "monotonicity violated");
    p.require(s.delta >= GOLDEN_DELTA, format!("delta = {} below {GOLDEN_DELTA:.6}", s.delta));
    p.require(s.player_lambdas.is_none(), "per-player step sizes");
    if s.delta > 0.0 {
        let bound = step_size_bound(facts.lipschitz(), s.delta).expect("finite constant");
        p.require(
            s.lambda <= bound * (1.0 + 1e-12),
            format!("lambda = {} exceeds bound {bound:.6}", s.lambda),
        );
    }
    p
}

pub fn cmd_check(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let bench = cfg.problem.build()?;
    let problem = &bench.problem;
    let facts = ProblemFacts::probe(problem, cfg.master_seed)?;
    let (n_g, n_d) = problem.dims();
    let feasible = problem.feasible();
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io);

    w(out, format!("problem: {} (n_g = {n_g}, n_d = {n_d})", problem.name()))?;
    for warning in &bench.warnings {
        w(out, format!("warning: {warning}"))?;
    }
    w(
        out,
        format!(
            "Lipschitz constant: configured {}, sampled estimate {:.6} over {PROBE_PAIRS} pairs",
            facts.lipschitz_configured.map_or("none".into(), |l| format!("{l:.6}")),
            facts.lipschitz_estimate
        ),
    )?;
    w(
        out,
        format!(
            "monotonicity: min <F(x) - F(y), x - y> = {:.6e} over {PROBE_PAIRS} pairs: {}",
            facts.min_monotone_product,
            if facts.monotone { "monotone" } else { "monotonicity violated (outside theory)" }
        ),
    )?;
    w(
        out,
        format!(
            "R: diameter^2 = {:.6}, diameter = {:.6}",
            RConvention::DiameterSq.value(feasible),
            RConvention::Diameter.value(feasible)
        ),
    )?;

    for spec in &cfg.algorithms {
        let s = &spec.solver;
        let oracle = Oracle::new(spec.oracle).map_err(|e| ConfigError::semantic("oracle", e.to_string()))?;
        w(out, String::new())?;
        w(out, format!("[{}] method {}, oracle {}", spec.label, s.algorithm, describe_oracle(&oracle)))?;
        w(out, format!("  delta = {} (range [0, 1); golden threshold {GOLDEN_DELTA:.6})", s.delta))?;
        if s.delta > 0.0 {
            let bound = step_size_bound(facts.lipschitz(), s.delta).expect("finite constant");
            w(
                out,
                format!(
                    "  lambda = {} vs step size bound {bound:.6}: {}",
                    s.lambda,
                    if s.lambda <= bound * (1.0 + 1e-12) { "ok" } else { "above bound" }
                ),
            )?;
        }
        if let OracleScheme::Saa(sched) = oracle.config().scheme {
            let n1 = sched.batch_size(1).unwrap_or(0);
            let nk = sched.batch_size(s.iterations).unwrap_or(0);
            w(out, format!("  batch sizes: N_1 = {n1}, N_K = {nk}"))?;
        }
        let variance = oracle
            .error_variance_bound(problem, 1)
            .map_err(|e| CliError::Run(e.to_string()))?;
        match estimate_oracle_bound(problem, &oracle, cfg.master_seed) {
            Ok(b) => w(out, format!("  B estimate: {b:.6}"))?,
            Err(_) => w(out, "  B estimate: unknown (oracle error variance unknown)".into())?,
        }
        for warning in validate_config(s, problem, Some(&oracle)).map_err(|e| CliError::Run(e.to_string()))? {
            w(out, format!("  warning: {warning}"))?;
        }
        match s.algorithm {
            Algorithm::Asrfb => {
                let p = theorem1_premises(spec, &facts, variance);
                w(out, format!("  Thm 1: {}", p.verdict()))?;
                bound_preview(cfg, spec, problem, &oracle, variance, out)?;
            }
            Algorithm::Srfb => {
                w(out, format!("  Thm 2: {}", theorem2_premises(spec, &facts, &oracle).verdict()))?;
                w(out, format!("  Cor 1: {}", corollary1_premises(spec, &facts, &oracle).verdict()))?;
                if s.averaging != Averaging::None && facts.monotone {
                    w(out, "  averaged iterate tracked; Thm 1 covers it only for asrfb entries".into())?;
                }
            }
            other => w(out, format!("  no convergence result for {other} (baseline, outside theory)"))?,
        }
    }
    Ok(EXIT_OK)
}

fn describe_oracle(oracle: &Oracle) -> String {
    match oracle.config().scheme {
        OracleScheme::Exact => "exact".into(),
        OracleScheme::Sa { batch } => format!("sa(N = {batch})"),
        OracleScheme::Saa(s) => format!(
            "saa(b = {}, k0 = {}, a = {}, cap = {})",
            s.b(),
            s.k0(),
            s.a(),
            s.cap().map_or("none".into(), |c| c.to_string())
        ),
    }
}

fn bound_preview(
    cfg: &ExperimentConfig,
    spec: &RunSpec,
    problem: &ViProblem,
    oracle: &Oracle,
    variance: Option<f64>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let s = &spec.solver;
    let c = averaging_constant(s.delta).expect("validated delta");
    writeln!(out, "  bound constant c = (2 - delta^2)/(1 - delta) = {c:.6}").map_err(io)?;
    match bound_inputs(cfg, spec, problem, oracle, variance, cfg.r_convention) {
        Ok(inputs) => {
            let bound = theorem1_bound(&inputs).expect("validated inputs");
            writeln!(
                out,
                "  Thm 1 bound at K = {}: {bound:.6e} (R = {:.6}, B = {:.6}, sigma^2 = {:.6e}, asymptote {:.6e})",
                s.iterations,
                inputs.r,
                inputs.b,
                inputs.sigma_sq,
                bound_asymptote(&inputs)
            )
            .map_err(io)?;
        }
        Err(e) => writeln!(out, "  Thm 1 bound: unavailable ({e})").map_err(io)?,
    }
    Ok(())
}

/// Bound inputs for one entry: explicit `[bound]` values first, then values
/// derived from the problem and oracle.
pub fn bound_inputs(
    cfg: &ExperimentConfig,
    spec: &RunSpec,
    problem: &ViProblem,
    oracle: &Oracle,
    variance: Option<f64>,
    convention: RConvention,
) -> Result<BoundInputs, ConfigError> {
    let given = cfg.bound.unwrap_or(crate::config::RawBound {
        r: None,
        b: None,
        sigma_sq: None,
    });
    let sigma_sq = match given.sigma_sq.or(variance) {
        Some(v) => v,
        None => {
            return Err(ConfigError::semantic(
                "bound.sigma_sq",
                "oracle error variance cannot be derived; set it in [bound]",
            ))
        }
    };
    let b = match given.b {
        Some(b) => b,
        None => estimate_oracle_bound(problem, oracle, cfg.master_seed)
            .map_err(|e| ConfigError::semantic("bound.b", e.to_string()))?,
    };
    Ok(BoundInputs {
        delta: spec.solver.delta,
        lambda: spec.solver.lambda,
        iterations: spec.solver.iterations,
        r: given.r.unwrap_or_else(|| convention.value(problem.feasible())),
        b,
        sigma_sq,
    })
}

/// One line of the bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub k: u64,
    pub first_term: f64,
    pub bound: f64,
    pub bound_other: f64,
    pub gap_lb_mean: Option<f64>,
}

pub fn bound_row(inputs: &BoundInputs, other_r: f64, k: u64, gap_lb_mean: Option<f64>) -> BoundRow {
    let at_k = BoundInputs { iterations: k, ..*inputs };
    let bound = theorem1_bound(&at_k).expect("validated inputs");
    BoundRow {
        k,
        first_term: bound - bound_asymptote(&at_k),
        bound,
        bound_other: theorem1_bound(&BoundInputs { r: other_r, ..at_k }).expect("validated inputs"),
        gap_lb_mean,
    }
}

pub fn cmd_bound(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let bench = cfg.problem.build()?;
    let problem = &bench.problem;
    let entries: Vec<(usize, &RunSpec)> = cfg
        .algorithms
        .iter()
        .enumerate()
        .filter(|(_, s)| s.solver.algorithm.is_relaxed() && s.solver.averaging != Averaging::None)
        .collect();
    if entries.is_empty() {
        return Err(ConfigError::semantic("algorithm", "bound needs an srfb or asrfb entry with averaging").into());
    }
    let other_convention = match cfg.r_convention {
        RConvention::DiameterSq => RConvention::Diameter,
        RConvention::Diameter => RConvention::DiameterSq,
    };
    let mut inputs = Vec::new();
    for (i, spec) in &entries {
        let oracle = Oracle::new(spec.oracle).map_err(|e| ConfigError::semantic(format!("algorithm[{i}].oracle"), e.to_string()))?;
        let variance = oracle
            .error_variance_bound(problem, 1)
            .map_err(|e| CliError::Run(e.to_string()))?;
        inputs.push(bound_inputs(cfg, spec, problem, &oracle, variance, cfg.r_convention)?);
    }

    let gap_probes = if cfg.gap_probes == 0 { BOUND_GAP_PROBES } else { cfg.gap_probes };
    let table = run_table(cfg, &bench, gap_probes)?;
    let (name, other_name) = match cfg.r_convention {
        RConvention::DiameterSq => ("R=diam^2", "R=diam"),
        RConvention::Diameter => ("R=diam", "R=diam^2"),
    };
    for ((_, spec), inputs) in entries.iter().zip(&inputs) {
        let other_r = if cfg.bound.and_then(|b| b.r).is_some() {
            inputs.r
        } else {
            other_convention.value(problem.feasible())
        };
        writeln!(
            out,
            "[{}] delta = {}, lambda = {}, c = {:.6}, R = {:.6}, B = {:.6}, sigma^2 = {:.6e}, asymptote (2B^2 + sigma^2) lambda = {:.6e}",
            spec.label,
            inputs.delta,
            inputs.lambda,
            averaging_constant(inputs.delta).expect("validated delta"),
            inputs.r,
            inputs.b,
            inputs.sigma_sq,
            bound_asymptote(inputs)
        )
        .map_err(io)?;
        writeln!(
            out,
            "{:>10} {:>14} {:>14} {:>14} {:>14}",
            "K", "first_term", name, other_name, "gap_lb_mean"
        )
        .map_err(io)?;
        let rows: Vec<_> = table.rows.iter().filter(|r| r.label == spec.label).collect();
        let mut ks: Vec<u64> = rows.iter().map(|r| r.record.k).collect();
        ks.sort_unstable();
        ks.dedup();
        for k in ks {
            let gap = mean(rows.iter().filter(|r| r.record.k == k).map(|r| r.record.gap_lb));
            let row = bound_row(inputs, other_r, k, gap);
            writeln!(
                out,
                "{:>10} {:>14.6e} {:>14.6e} {:>14.6e} {:>14}",
                row.k,
                row.first_term,
                row.bound,
                row.bound_other,
                fmt_opt(row.gap_lb_mean)
            )
            .map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    report_failures(&table, out)
}
