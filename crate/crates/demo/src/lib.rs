//! Browser bindings: logistic-game trajectories, bilinear distance curves
//! and the averaged-iterate bound curve. Every export returns a flat
//! `Float64Array` so the page can plot without any glue beyond the
//! generated module.

use svilab_core::benchmarks::{build_bilinear, build_logistic, BilinearGameSpec, LogisticGameSpec};
use svilab_core::metrics::{theorem1_bound, BoundInputs};
use svilab_core::solver::{self, step_size_bound, Averaging, LogOptions};
use svilab_core::{Algorithm, BatchSchedule, JointPoint, NoiseModel, Oracle, OracleConfig, OracleScheme, SolverConfig};
use wasm_bindgen::prelude::*;

pub const MAX_ITERATIONS: u32 = 20_000;

/// Methods in the order their curves appear in every output.
pub const METHODS: [Algorithm; 5] = [
    Algorithm::Srfb,
    Algorithm::Sfb,
    Algorithm::Eg,
    Algorithm::PastEg,
    Algorithm::Adam,
];

#[wasm_bindgen]
pub fn method_names() -> String {
    METHODS.map(|a| a.as_str()).join(",")
}

fn check_iterations(iterations: u32) -> Result<u64, String> {
    if iterations == 0 || iterations > MAX_ITERATIONS {
        return Err(format!("iterations must lie in 1..={MAX_ITERATIONS}"));
    }
    Ok(iterations as u64)
}

/// Paths of every method on the logistic game from `(start_g, start_d)`.
/// `lambda_scale` multiplies the default step size. Layout: for each
/// method, `iterations + 1` pairs `(x_g, x_d)`.
#[wasm_bindgen]
pub fn logistic_trajectories(
    delta: f64,
    lambda_scale: f64,
    iterations: u32,
    start_g: f64,
    start_d: f64,
) -> Result<Vec<f64>, String> {
    let k = check_iterations(iterations)?;
    let bench = build_logistic(&LogisticGameSpec::default()).map_err(|e| e.to_string())?;
    let problem = &bench.problem;
    let ell = problem.lipschitz().expect("logistic game carries a constant");
    let lambda = step_size_bound(ell, delta).map_err(|e| e.to_string())? * lambda_scale;
    let x0 = problem.joint_project(&JointPoint::new(vec![start_g], vec![start_d])).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(METHODS.len() * 2 * (k as usize + 1));
    for alg in METHODS {
        let config = SolverConfig::new(alg, lambda, k).with_delta(delta);
        out.extend_from_slice(x0.as_slice());
        let opts = LogOptions { residual: false, log_every: k, ..LogOptions::default() };
        solver::run_with(problem, &config, &Oracle::exact(), x0.clone(), &opts, |s, _| {
            out.extend_from_slice(s.x.as_slice());
            Ok(())
        })
        .map_err(|e| format!("{alg}: {e}"))?;
    }
    Ok(out)
}

/// Relative distance to the solution of the bilinear game after every
/// step. Layout: one curve of `iterations` values per method, then one for
/// the running average of the relaxed method.
#[wasm_bindgen]
pub fn bilinear_distances(
    delta: f64,
    lambda: f64,
    iterations: u32,
    noise_sd: f64,
    batch_cap: u32,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let k = check_iterations(iterations)?;
    let spec = BilinearGameSpec {
        matrix_noise_sd: noise_sd,
        ..BilinearGameSpec::default()
    };
    let bench = build_bilinear(&spec).map_err(|e| e.to_string())?;
    let problem = &bench.problem;
    let star = problem.known_solution().ok_or("solution lies outside the box")?.clone();
    let x0 = bench.default_start.clone();
    let d0 = x0.distance(&star).map_err(|e| e.to_string())?;
    let schedule = BatchSchedule::new(1.0, 1.0, 1.0, Some(batch_cap.max(1) as u64)).map_err(|e| e.to_string())?;
    let oracle = Oracle::new(OracleConfig {
        scheme: OracleScheme::Saa(schedule),
        noise: NoiseModel::Structural,
        seed: seed as u64,
    })
    .map_err(|e| e.to_string())?;

    let mut out = Vec::with_capacity((METHODS.len() + 1) * k as usize);
    let mut average = Vec::with_capacity(k as usize);
    for alg in METHODS {
        let mut config = SolverConfig::new(alg, lambda, k).with_delta(delta);
        if alg == Algorithm::Srfb {
            config = config.with_averaging(Averaging::BatchMean);
        }
        let mut avg = solver::Averager::new(config.averaging);
        let opts = LogOptions { residual: false, log_every: k, ..LogOptions::default() };
        solver::run_with(problem, &config, &oracle, x0.clone(), &opts, |s, _| {
            out.push(s.x.distance(&star)? / d0);
            if alg == Algorithm::Srfb {
                avg.push(&s.x)?;
                average.push(avg.current().expect("averaging on").distance(&star)? / d0);
            }
            Ok(())
        })
        .map_err(|e| format!("{alg}: {e}"))?;
    }
    out.extend(average);
    Ok(out)
}

/// Averaged-iterate bound `c R/(lambda K) + (2 B^2 + sigma^2) lambda` at
/// `points` log-spaced values of K in `[1, k_max]`. Layout: pairs `(K, bound)`.
#[wasm_bindgen]
pub fn bound_curve(
    delta: f64,
    lambda: f64,
    r: f64,
    b: f64,
    sigma_sq: f64,
    k_max: f64,
    points: u32,
) -> Result<Vec<f64>, String> {
    if !(k_max >= 1.0 && k_max.is_finite()) || points < 2 {
        return Err("need k_max >= 1 and at least two points".into());
    }
    let mut out = Vec::with_capacity(2 * points as usize);
    let mut last = 0;
    for i in 0..points {
        let k = k_max.powf(i as f64 / (points - 1) as f64).round().max(1.0) as u64;
        if k == last {
            continue;
        }
        last = k;
        let inputs = BoundInputs { delta, lambda, iterations: k, r, b, sigma_sq };
        out.push(k as f64);
        out.push(theorem1_bound(&inputs).map_err(|e| e.to_string())?);
    }
    Ok(out)
}
