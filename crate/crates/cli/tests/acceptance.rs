//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svilab::{execute, parse_config, Cli, Overrides};
use svilab_core::benchmarks::{build_bilinear, build_logistic, BilinearGameSpec, LogisticGameSpec};
use svilab_core::experiment::{run_experiment, ExperimentOptions, RunSpec, TraceTable};
use svilab_core::metrics::{
    estimate_oracle_bound, residual_inequality_check, theorem1_bound, BoundInputs, RConvention,
};
use svilab_core::oracle::{stochastic_error, DrawKey};
use svilab_core::solver::{
    self, relax, step_size_bound, Averager, Averaging, LogOptions, SolverConfig, WeightRule,
};
use svilab_core::{
    Algorithm, BatchSchedule, BoxConstraint, FeasibleSet, JointPoint, NoiseModel, Oracle,
    OracleConfig, OracleScheme,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn saa(cap: Option<u64>) -> OracleScheme {
    OracleScheme::Saa(BatchSchedule::new(1.0, 1.0, 1.0, cap).unwrap())
}

fn oracle(scheme: OracleScheme, seed: u64) -> Oracle {
    Oracle::new(OracleConfig {
        scheme,
        noise: NoiseModel::Structural,
        seed,
    })
    .unwrap()
}

fn within(limit: Duration, elapsed: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {:.2} s, limit {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

fn random_point(rng: &mut ChaCha8Rng, n_g: usize, n_d: usize) -> JointPoint {
    let v = (0..n_g + n_d).map(|_| rng.random_range(-2.0..2.0)).collect();
    JointPoint::from_flat(v, n_g).unwrap()
}

fn relaxation_identities() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for delta in [0.3, 0.618, 0.9] {
        for _ in 0..100 {
            let x = random_point(&mut rng, 3, 2);
            let bar_prev = random_point(&mut rng, 3, 2);
            let next = random_point(&mut rng, 3, 2);
            let star = random_point(&mut rng, 3, 2);
            let bar = relax(&x, &bar_prev, delta).unwrap();
            let bar_next = relax(&next, &bar, delta).unwrap();

            let first = x
                .sub(&bar_prev)
                .unwrap()
                .distance(&x.sub(&bar).unwrap().scale(1.0 / delta))
                .unwrap();
            let rhs = bar_next
                .sub(&star)
                .unwrap()
                .scale(1.0 / (1.0 - delta))
                .sub(&bar.sub(&star).unwrap().scale(delta / (1.0 - delta)))
                .unwrap();
            let second = next.sub(&star).unwrap().distance(&rhs).unwrap();
            let third = (bar_next.distance(&bar).unwrap() - (1.0 - delta) * next.distance(&bar).unwrap()).abs();
            worst = worst.max(first).max(second).max(third);
        }
    }
    if worst > 1e-10 {
        return Err(format!("max deviation {worst:.3e} > 1e-10"));
    }
    within(Duration::from_secs(1), started.elapsed())?;
    Ok(format!(
        "max deviation {worst:.2e} over 300 states (third identity with x_bar^k on the right)"
    ))
}

fn projection_suite() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut idem, mut expansion, mut vi) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..10_000 {
        let boxes: Vec<BoxConstraint> = [3usize, 2]
            .iter()
            .map(|&n| {
                let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let hi = lo.iter().map(|l| l + rng.random_range(0.0..3.0)).collect();
                BoxConstraint::new(lo, hi).unwrap()
            })
            .collect();
        let set = FeasibleSet::new(boxes[0].clone(), boxes[1].clone());
        let u = random_point(&mut rng, 3, 2).scale(3.0);
        let v = random_point(&mut rng, 3, 2).scale(3.0);
        let pu = set.project(&u).unwrap();
        let pv = set.project(&v).unwrap();
        idem = idem.max(set.project(&pu).unwrap().distance(&pu).unwrap());
        expansion = expansion.max(pu.distance(&pv).unwrap() - u.distance(&v).unwrap());
        vi = vi.min(pu.sub(&u).unwrap().dot(&pv.sub(&pu).unwrap()).unwrap());
    }
    if idem > 1e-12 || expansion > 1e-12 || vi < -1e-12 {
        return Err(format!("idempotence {idem:.2e}, expansion {expansion:.2e}, variational {vi:.2e}"));
    }
    within(Duration::from_secs(1), started.elapsed())?;
    Ok(format!(
        "10^4 pairs: idempotence {idem:.1e}, max expansion {expansion:.1e}, min <Pu-u, Pv-Pu> {vi:.1e}"
    ))
}

fn options(replications: u64, log_every: u64, gap_probes: usize, start: JointPoint) -> ExperimentOptions {
    ExperimentOptions {
        replications,
        log_every,
        master_seed: 2024,
        gap_probes,
        record_wall_time: false,
        workers: 0,
        start,
    }
}

fn srfb_config(iterations: u64) -> SolverConfig {
    SolverConfig::new(Algorithm::Srfb, step_size_bound(1.0, 0.7).unwrap(), iterations).with_delta(0.7)
}

fn last_iterate_convergence() -> Outcome {
    let started = Instant::now();
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let spec = RunSpec {
        label: "srfb".into(),
        solver: srfb_config(2000),
        oracle: OracleConfig {
            scheme: saa(Some(10_000)),
            noise: NoiseModel::Structural,
            seed: 0,
        },
    };
    let table = run_experiment(&bench.problem, &[spec], &options(10, 2000, 0, bench.default_start.clone()))
        .map_err(|e| e.to_string())?;
    let finals = table.final_rows();
    if finals.len() != 10 || !table.failures.is_empty() {
        return Err(format!("{} runs finished, {} failed", finals.len(), table.failures.len()));
    }
    let mean = finals.iter().map(|r| r.record.rel_dist.unwrap()).sum::<f64>() / 10.0;
    if mean >= 1e-2 {
        return Err(format!("mean final rel_dist {mean:.3e} >= 1e-2"));
    }
    within(Duration::from_secs(30), started.elapsed())?;
    Ok(format!("mean final rel_dist {mean:.3e} over 10 seeds in {:.1} s", started.elapsed().as_secs_f64()))
}

fn squared_distances(alg: Algorithm, scheme: OracleScheme) -> Vec<f64> {
    let spec = BilinearGameSpec {
        matrix_noise_sd: 0.0,
        ..BilinearGameSpec::with_terms(5, vec![0.0; 5], vec![0.0; 5])
    };
    let bench = build_bilinear(&spec).unwrap();
    let mut config = srfb_config(500);
    config.algorithm = alg;
    let x0 = JointPoint::filled(5, 5, 1e-7);
    let mut d = vec![x0.norm_sq()];
    solver::run_with(&bench.problem, &config, &oracle(scheme, 0), x0, &LogOptions { residual: false, ..LogOptions::default() }, |s, _| {
        d.push(s.x.norm_sq());
        Ok(())
    })
    .unwrap();
    d
}

fn forward_backward_failure() -> Outcome {
    let sfb = squared_distances(Algorithm::Sfb, OracleScheme::Exact);
    if let Some(k) = sfb.windows(2).position(|w| w[1] < w[0]) {
        return Err(format!("sfb squared distance decreased at step {}", k + 1));
    }
    let srfb = squared_distances(Algorithm::Srfb, saa(Some(10_000)));
    let shrink = srfb[0] / srfb[500];
    if shrink < 10.0 {
        return Err(format!("srfb shrank squared distance only {shrink:.2}x"));
    }
    Ok(format!(
        "sfb nondecreasing, grew {:.2e}x; srfb shrank {shrink:.2e}x over 500 steps",
        sfb[500] / sfb[0]
    ))
}

fn cost_accounting() -> Outcome {
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let k = 1000u64;
    for alg in Algorithm::ALL {
        let config = SolverConfig::new(alg, 0.05, k).with_delta(0.7);
        let out = solver::run(&bench.problem, &config, &oracle(OracleScheme::Sa { batch: 1 }, 3), bench.default_start.clone(), &LogOptions { residual: false, ..LogOptions::default() })
            .map_err(|e| e.to_string())?;
        let c = out.state.counters;
        let (g, p) = alg.cost_per_iteration();
        if (c.grad_evals, c.projections) != (g * k, p * k) {
            return Err(format!("{alg}: counters ({}, {}), expected ({}, {})", c.grad_evals, c.projections, g * k, p * k));
        }
    }

    let timed = |alg: Algorithm| -> Duration {
        let mut times: Vec<Duration> = (0..5)
            .map(|r| {
                let config = SolverConfig::new(alg, 0.1, 10_000).with_delta(0.7);
                let started = Instant::now();
                solver::run(&bench.problem, &config, &oracle(OracleScheme::Sa { batch: 1 }, r), bench.default_start.clone(), &LogOptions { residual: false, log_every: 10_000, ..LogOptions::default() })
                    .unwrap();
                started.elapsed()
            })
            .collect();
        times.sort();
        times[2]
    };
    let (srfb, eg) = (timed(Algorithm::Srfb), timed(Algorithm::Eg));
    if srfb >= eg {
        return Err(format!("median srfb {srfb:?} not below eg {eg:?}"));
    }
    Ok(format!(
        "counters exact for all six methods; median wall time at K=10^4: srfb {:.2} ms, eg {:.2} ms",
        srfb.as_secs_f64() * 1e3,
        eg.as_secs_f64() * 1e3
    ))
}

fn averaged_bound_dominance() -> Outcome {
    let started = Instant::now();
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let problem = &bench.problem;
    let oracle_config = OracleConfig {
        scheme: OracleScheme::Sa { batch: 1 },
        noise: NoiseModel::Structural,
        seed: 0,
    };
    let spec = RunSpec {
        label: "asrfb".into(),
        solver: SolverConfig::new(Algorithm::Asrfb, 0.01, 10_000).with_delta(0.5),
        oracle: oracle_config,
    };
    let table: TraceTable = run_experiment(problem, &[spec], &options(20, 100, 64, bench.default_start.clone()))
        .map_err(|e| e.to_string())?;
    let o = Oracle::new(oracle_config).unwrap();
    let b = estimate_oracle_bound(problem, &o, 7).map_err(|e| e.to_string())?;
    let sigma_sq = o.error_variance_bound(problem, 1).unwrap().unwrap();
    let mut lines = Vec::new();
    for k in [100u64, 1000, 10_000] {
        let gaps: Vec<f64> = table.rows.iter().filter(|r| r.record.k == k).map(|r| r.record.gap_lb.unwrap()).collect();
        if gaps.len() != 20 {
            return Err(format!("{} replications logged at K={k}", gaps.len()));
        }
        let gap = gaps.iter().sum::<f64>() / 20.0;
        for conv in [RConvention::DiameterSq, RConvention::Diameter] {
            let bound = theorem1_bound(&BoundInputs {
                delta: 0.5,
                lambda: 0.01,
                iterations: k,
                r: conv.value(problem.feasible()),
                b,
                sigma_sq,
            })
            .unwrap();
            if gap > bound {
                return Err(format!("K={k} {conv:?}: mean gap {gap:.4e} > bound {bound:.4e}"));
            }
        }
        lines.push(format!("K={k}: gap {gap:.3e}"));
    }
    within(Duration::from_secs(60), started.elapsed())?;
    Ok(format!("{} (B={b:.3}, sigma^2={sigma_sq:.3})", lines.join(", ")))
}

fn saa_error_scaling() -> Outcome {
    let started = Instant::now();
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let problem = &bench.problem;
    let x = bench.default_start.clone();
    let exact = problem.evaluate_F(&x).unwrap();
    let scaled: Vec<f64> = (1..=100u64)
        .map(|k| {
            let mut sum = 0.0;
            let mut n = 0;
            for r in 0..100u64 {
                let o = oracle(saa(None), 1000 + r);
                let (est, used) = o.sample_gradient(problem, &x, DrawKey::new(k, 0)).unwrap();
                sum += stochastic_error(&est, &exact).unwrap().1;
                n = used;
            }
            sum / 100.0 * n as f64
        })
        .collect();
    let first = scaled[0];
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi > 3.0 * first || lo < first / 3.0 {
        return Err(format!("E||eps||^2 N_k ranges over [{lo:.3e}, {hi:.3e}], k=1 value {first:.3e}"));
    }
    within(Duration::from_secs(10), started.elapsed())?;
    Ok(format!("E||eps||^2 N_k in [{:.2}, {:.2}] x its k=1 value", lo / first, hi / first))
}

fn residual_inequality() -> Outcome {
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let problem = &bench.problem;
    let config = srfb_config(1000);
    let lambda = config.lambda;
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    solver::run_with(problem, &config, &oracle(saa(Some(10_000)), 5), bench.default_start.clone(), &LogOptions::default(), |s, report| {
        let exact = problem.evaluate_F(&report.x_prev)?;
        let (_, eps_sq) = stochastic_error(&report.estimate, &exact)?;
        let check = residual_inequality_check(&report.x_prev, &s.x, report.x_bar.as_ref().unwrap(), eps_sq, lambda, problem)?;
        worst = worst.max(check.lhs - check.rhs);
        if !check.holds {
            failures += 1;
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    if failures > 0 {
        return Err(format!("violated at {failures} of 1000 steps (max lhs - rhs {worst:.3e})"));
    }
    Ok(format!("held at all 1000 steps, max lhs - rhs {worst:.3e}"))
}

fn logistic_convergence() -> Outcome {
    let started = Instant::now();
    let text = "log_every = 10000\ngap_probes = 0\n[problem]\nkind = \"logistic\"\n\
                [[algorithm]]\nmethod = \"srfb\"\n[[algorithm]]\nmethod = \"eg\"\n[[algorithm]]\nmethod = \"pasteg\"\n";
    let cfg = parse_config(text, None, &Overrides::default()).map_err(|e| e.to_string())?;
    let bench = build_logistic(&LogisticGameSpec::default()).unwrap();
    let table = run_experiment(&bench.problem, &cfg.algorithms, &options(1, cfg.log_every, 0, cfg.start.clone()))
        .map_err(|e| e.to_string())?;
    let target = JointPoint::new(vec![-2.0], vec![0.0]);
    let mut parts = Vec::new();
    for row in table.final_rows() {
        let rel = row.record.rel_dist.unwrap();
        let dist = rel * cfg.start.distance(&target).unwrap();
        if dist >= 1e-2 || row.record.k != 10_000 {
            return Err(format!("{}: distance {dist:.3e} at k={}", row.label, row.record.k));
        }
        parts.push(format!("{} {dist:.2e}", row.label));
    }
    if parts.len() != 3 {
        return Err(format!("{} runs finished", parts.len()));
    }
    within(Duration::from_secs(10), started.elapsed())?;
    Ok(format!("final distance to (-2, 0): {}", parts.join(", ")))
}

fn averaging_equivalence() -> Outcome {
    let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let run = |averaging| {
            let config = SolverConfig::new(Algorithm::Asrfb, 0.05, 1000).with_delta(0.5).with_averaging(averaging);
            solver::run(&bench.problem, &config, &oracle(OracleScheme::Sa { batch: 1 }, seed), bench.default_start.clone(), &LogOptions { residual: false, log_every: 1000, ..LogOptions::default() })
                .unwrap()
                .average
                .unwrap()
        };
        let online = run(Averaging::Online(WeightRule::Uniform));
        let batch = run(Averaging::BatchMean);
        worst = worst.max(online.distance(&batch).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Averager::new(Averaging::Online(WeightRule::Uniform));
        let mut b = Averager::new(Averaging::BatchMean);
        for _ in 0..1000 {
            let p = random_point(&mut rng, 5, 5);
            a.push(&p).unwrap();
            b.push(&p).unwrap();
        }
        worst = worst.max(a.current().unwrap().distance(&b.current().unwrap()).unwrap());
    }
    if worst > 1e-12 {
        return Err(format!("max difference {worst:.3e} > 1e-12"));
    }
    Ok(format!("max difference {worst:.2e} over 10 trajectories of 1000 steps"))
}

fn determinism_and_golden() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = manifest.join("tests/golden/mini.toml");
    let mut outputs = Vec::new();
    for (name, workers) in [("a.csv", "1"), ("b.csv", "0")] {
        let out = dir.path().join(name);
        let cli = Cli::parse_from([
            "svilab",
            "run",
            config.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        let code = execute(&cli, &mut Vec::new(), &mut Vec::new());
        if code != 0 {
            return Err(format!("run exited with {code}"));
        }
        outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    if outputs[0] != outputs[1] {
        return Err("reruns differ".into());
    }
    let golden = fs::read(manifest.join("tests/golden/mini.csv")).map_err(|e| e.to_string())?;
    if outputs[0] != golden {
        return Err("output differs from golden file".into());
    }
    Ok(format!("two runs byte-identical ({} bytes) and equal to golden file", golden.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("relaxation identities", relaxation_identities),
        ("projection suite", projection_suite),
        ("srfb last-iterate convergence on bilinear", last_iterate_convergence),
        ("forward-backward failure on bilinear", forward_backward_failure),
        ("cost accounting", cost_accounting),
        ("averaged-iterate bound dominance", averaged_bound_dominance),
        ("saa error scaling", saa_error_scaling),
        ("residual inequality", residual_inequality),
        ("logistic game convergence", logistic_convergence),
        ("averaging equivalence", averaging_equivalence),
        ("determinism and golden file", determinism_and_golden),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
