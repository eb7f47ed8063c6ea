//! Experiment configuration files.
//!
//! One experiment is one TOML file: top-level run settings, a `[problem]`
//! table, one `[[algorithm]]` table per compared method and an optional
//! `[bound]` table. Unknown keys are rejected. See the README for the full
//! schema.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use svilab_core::benchmarks::{
    build_affine, build_bilinear, build_logistic, AffineGameSpec, Benchmark, BilinearGameSpec,
    LogisticGameSpec,
};
use svilab_core::experiment::RunSpec;
use svilab_core::metrics::{lipschitz_estimate, RConvention};
use svilab_core::oracle::{BatchSchedule, NoiseModel, OracleConfig, OracleScheme};
use svilab_core::solver::{
    step_size_bound, AdamParams, Algorithm, Averaging, SolverConfig, WeightRule, GOLDEN_DELTA,
};
use svilab_core::{JointPoint, Oracle};

use crate::ConfigError;

pub const DEFAULT_ITERATIONS: u64 = 10_000;
pub const DEFAULT_BATCH_CAP: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum RConventionName {
    #[serde(rename = "diameter-sq")]
    DiameterSq,
    #[serde(rename = "diameter")]
    Diameter,
}

impl From<RConventionName> for RConvention {
    fn from(r: RConventionName) -> Self {
        match r {
            RConventionName::DiameterSq => RConvention::DiameterSq,
            RConventionName::Diameter => RConvention::Diameter,
        }
    }
}

// ---------------------------------------------------------------------------
// Raw file schema

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    #[serde(default)]
    algorithm: Vec<RawAlgorithm>,
    replications: Option<u64>,
    log_every: Option<u64>,
    output: Option<PathBuf>,
    format: Option<OutputFormat>,
    master_seed: Option<u64>,
    gap_probes: Option<usize>,
    workers: Option<usize>,
    record_wall_time: Option<bool>,
    r_convention: Option<RConventionName>,
    start: Option<Vec<f64>>,
    bound: Option<RawBound>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawProblem {
    Bilinear {
        n: Option<usize>,
        n_g: Option<usize>,
        n_d: Option<usize>,
        a: Option<Vec<f64>>,
        b: Option<Vec<f64>>,
        matrix_mean: Option<f64>,
        matrix_noise_sd: Option<f64>,
        box_halfwidth: Option<f64>,
        seed: Option<u64>,
    },
    Logistic {
        omega: Option<f64>,
        box_halfwidth: Option<f64>,
    },
    CustomFile {
        path: PathBuf,
    },
}

/// Schema of a custom affine game file: `F(x) = matrix * x + offset`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAffineFile {
    n_g: usize,
    n_d: usize,
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    solution: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    method: String,
    name: Option<String>,
    delta: Option<f64>,
    lambda: Option<f64>,
    lambda_g: Option<f64>,
    lambda_d: Option<f64>,
    iterations: Option<u64>,
    averaging: Option<String>,
    online_weight: Option<f64>,
    oracle: Option<RawOracle>,
    adam: Option<RawAdam>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    scheme: String,
    batch: Option<u64>,
    b: Option<f64>,
    k0: Option<f64>,
    a: Option<f64>,
    cap: Option<u64>,
    noise: Option<String>,
    sigma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdam {
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBound {
    /// Overrides the set-size constant derived from the feasible set.
    pub r: Option<f64>,
    /// Oracle second-moment bound.
    pub b: Option<f64>,
    pub sigma_sq: Option<f64>,
}

// ---------------------------------------------------------------------------
// Resolved configuration

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemConfig {
    Bilinear(BilinearGameSpec),
    Logistic(LogisticGameSpec),
    CustomFile { path: PathBuf, spec: AffineGameSpec },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Benchmark, ConfigError> {
        let built = match self {
            ProblemConfig::Bilinear(spec) => build_bilinear(spec),
            ProblemConfig::Logistic(spec) => build_logistic(spec),
            ProblemConfig::CustomFile { spec, .. } => build_affine(spec),
        };
        built.map_err(|e| ConfigError::semantic("problem", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algorithms: Vec<RunSpec>,
    pub replications: u64,
    pub log_every: u64,
    pub output_path: PathBuf,
    pub output_format: OutputFormat,
    pub master_seed: u64,
    pub gap_probes: usize,
    pub workers: usize,
    pub record_wall_time: bool,
    pub r_convention: RConvention,
    pub start: JointPoint,
    pub bound: Option<RawBound>,
}

/// Command-line overrides applied after the file is read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub log_every: Option<u64>,
    pub r_convention: Option<RConvention>,
}

pub fn parse_config_file(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text, path.parent(), overrides)
}

/// Parses and validates configuration text. Relative `custom-file` paths
/// resolve against `base_dir`.
pub fn parse_config(
    text: &str,
    base_dir: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;

    let problem = resolve_problem(raw.problem, base_dir)?;
    let bench = problem.build()?;

    if raw.algorithm.is_empty() {
        return Err(ConfigError::semantic("algorithm", "at least one [[algorithm]] entry is required"));
    }
    let mut names = HashSet::new();
    let mut algorithms = Vec::with_capacity(raw.algorithm.len());
    for (i, entry) in raw.algorithm.into_iter().enumerate() {
        let spec = resolve_algorithm(i, entry, &bench)?;
        if !names.insert(spec.label.clone()) {
            return Err(ConfigError::semantic(
                format!("algorithm[{i}].name"),
                format!("duplicate algorithm name `{}`", spec.label),
            ));
        }
        algorithms.push(spec);
    }

    let replications = raw.replications.unwrap_or(1);
    if replications == 0 {
        return Err(ConfigError::semantic("replications", "must be at least 1"));
    }
    let log_every = overrides.log_every.or(raw.log_every).unwrap_or(10);
    if log_every == 0 {
        return Err(ConfigError::semantic("log_every", "must be at least 1"));
    }

    let start = match raw.start {
        None => bench.default_start.clone(),
        Some(v) => {
            let (n_g, n_d) = bench.problem.dims();
            if v.len() != n_g + n_d {
                return Err(ConfigError::semantic(
                    "start",
                    format!("expected {} coordinates, found {}", n_g + n_d, v.len()),
                ));
            }
            let x = JointPoint::from_flat(v, n_g).expect("length checked");
            if !bench.problem.feasible().contains(&x) {
                return Err(ConfigError::semantic("start", "initial point must be feasible"));
            }
            x
        }
    };
    if let Some(bound) = raw.bound {
        for (key, v) in [("bound.r", bound.r), ("bound.b", bound.b), ("bound.sigma_sq", bound.sigma_sq)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ConfigError::semantic(key, format!("must be nonnegative, got {v}")));
                }
            }
        }
    }

    Ok(ExperimentConfig {
        problem,
        algorithms,
        replications,
        log_every,
        output_path: overrides
            .output
            .clone()
            .or(raw.output)
            .unwrap_or_else(|| PathBuf::from("trace.csv")),
        output_format: overrides.format.or(raw.format).unwrap_or(OutputFormat::Csv),
        master_seed: overrides.seed.or(raw.master_seed).unwrap_or(0),
        gap_probes: raw.gap_probes.unwrap_or(64),
        workers: overrides.workers.or(raw.workers).unwrap_or(0),
        record_wall_time: raw.record_wall_time.unwrap_or(false),
        r_convention: overrides
            .r_convention
            .or(raw.r_convention.map(Into::into))
            .unwrap_or(RConvention::DiameterSq),
        start,
        bound: raw.bound,
    })
}

fn parse_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let (line, column) = err
        .span()
        .map(|span| {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        })
        .unwrap_or((0, 0));
    ConfigError::Parse {
        line,
        column,
        message: err.message().to_string(),
    }
}

fn resolve_problem(raw: RawProblem, base_dir: Option<&Path>) -> Result<ProblemConfig, ConfigError> {
    Ok(match raw {
        RawProblem::Bilinear {
            n,
            n_g,
            n_d,
            a,
            b,
            matrix_mean,
            matrix_noise_sd,
            box_halfwidth,
            seed,
        } => {
            let d = BilinearGameSpec::default();
            let n_default = n.unwrap_or(d.n_g);
            ProblemConfig::Bilinear(BilinearGameSpec {
                n_g: n_g.unwrap_or(n_default),
                n_d: n_d.unwrap_or(n_default),
                a,
                b,
                matrix_mean: matrix_mean.unwrap_or(d.matrix_mean),
                matrix_noise_sd: matrix_noise_sd.unwrap_or(d.matrix_noise_sd),
                box_halfwidth: box_halfwidth.unwrap_or(d.box_halfwidth),
                seed: seed.unwrap_or(d.seed),
            })
        }
        RawProblem::Logistic {
            omega,
            box_halfwidth,
        } => {
            let d = LogisticGameSpec::default();
            ProblemConfig::Logistic(LogisticGameSpec {
                omega: omega.unwrap_or(d.omega),
                box_halfwidth: box_halfwidth.unwrap_or(d.box_halfwidth),
            })
        }
        RawProblem::CustomFile { path } => {
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let raw: RawAffineFile = toml::from_str(&text).map_err(|e| parse_error(&text, &e))?;
            ProblemConfig::CustomFile {
                path,
                spec: AffineGameSpec {
                    n_g: raw.n_g,
                    n_d: raw.n_d,
                    matrix: raw.matrix,
                    offset: raw.offset,
                    lower: raw.lower,
                    upper: raw.upper,
                    solution: raw.solution,
                },
            }
        }
    })
}

fn resolve_algorithm(i: usize, raw: RawAlgorithm, bench: &Benchmark) -> Result<RunSpec, ConfigError> {
    let key = |field: &str| format!("algorithm[{i}].{field}");
    let algorithm: Algorithm = raw
        .method
        .parse()
        .map_err(|_| ConfigError::semantic(key("method"), format!("unknown method `{}`", raw.method)))?;

    let delta = raw.delta.unwrap_or(GOLDEN_DELTA);
    if !(0.0..1.0).contains(&delta) {
        return Err(ConfigError::semantic(key("delta"), format!("{delta} is out of range [0, 1)")));
    }
    let lambda = match raw.lambda {
        Some(l) if l.is_finite() && l > 0.0 => l,
        Some(l) => return Err(ConfigError::semantic(key("lambda"), format!("must be positive, got {l}"))),
        None => default_lambda(bench, delta).map_err(|m| ConfigError::semantic(key("lambda"), m))?,
    };
    let player_lambdas = match (raw.lambda_g, raw.lambda_d) {
        (None, None) => None,
        (g, d) => {
            let g = g.unwrap_or(lambda);
            let d = d.unwrap_or(lambda);
            if !(g > 0.0 && d > 0.0 && g.is_finite() && d.is_finite()) {
                return Err(ConfigError::semantic(key("lambda_g"), "per-player step sizes must be positive"));
            }
            Some((g, d))
        }
    };
    let iterations = raw.iterations.unwrap_or(DEFAULT_ITERATIONS);
    if iterations == 0 {
        return Err(ConfigError::semantic(key("iterations"), "must be at least 1"));
    }
    let averaging = match raw.averaging.as_deref().unwrap_or("batch-mean") {
        "none" => {
            if raw.online_weight.is_some() {
                return Err(ConfigError::semantic(key("online_weight"), "only valid with averaging = \"online\""));
            }
            Averaging::None
        }
        "batch-mean" => Averaging::BatchMean,
        "online" => match raw.online_weight {
            None => Averaging::Online(WeightRule::Uniform),
            Some(w) if (0.0..=1.0).contains(&w) => Averaging::Online(WeightRule::Constant(w)),
            Some(w) => {
                return Err(ConfigError::semantic(key("online_weight"), format!("{w} is out of range [0, 1]")))
            }
        },
        other => {
            return Err(ConfigError::semantic(
                key("averaging"),
                format!("expected none, batch-mean or online, got `{other}`"),
            ))
        }
    };
    if algorithm == Algorithm::Asrfb && averaging == Averaging::None {
        return Err(ConfigError::semantic(key("averaging"), "asrfb requires averaging"));
    }
    let adam = match raw.adam {
        None => AdamParams::default(),
        Some(a) => {
            let d = AdamParams::default();
            let p = AdamParams {
                beta1: a.beta1.unwrap_or(d.beta1),
                beta2: a.beta2.unwrap_or(d.beta2),
                eps: a.epsilon.unwrap_or(d.eps),
            };
            for (field, v) in [("adam.beta1", p.beta1), ("adam.beta2", p.beta2)] {
                if !(0.0..1.0).contains(&v) {
                    return Err(ConfigError::semantic(key(field), format!("{v} is out of range [0, 1)")));
                }
            }
            if !(p.eps.is_finite() && p.eps > 0.0) {
                return Err(ConfigError::semantic(key("adam.epsilon"), "must be positive"));
            }
            p
        }
    };
    let oracle = resolve_oracle(i, algorithm, raw.oracle, bench)?;

    Ok(RunSpec {
        label: raw.name.unwrap_or_else(|| algorithm.to_string()),
        solver: SolverConfig {
            algorithm,
            delta,
            lambda,
            player_lambdas,
            iterations,
            averaging,
            adam,
            seed: 0,
        },
        oracle,
    })
}

/// `step_size_bound(ell, delta)` with `ell` from the problem, or estimated
/// by sampling when the problem has none.
fn default_lambda(bench: &Benchmark, delta: f64) -> Result<f64, String> {
    if delta == 0.0 {
        return Err("no default step size for delta = 0; set lambda explicitly".into());
    }
    let ell = match bench.problem.lipschitz() {
        Some(l) => l,
        None => lipschitz_estimate(&bench.problem, 2000, 0).map_err(|e| e.to_string())?,
    };
    step_size_bound(ell, delta).map_err(|e| e.to_string())
}

fn resolve_oracle(
    i: usize,
    algorithm: Algorithm,
    raw: Option<RawOracle>,
    bench: &Benchmark,
) -> Result<OracleConfig, ConfigError> {
    let key = |field: &str| format!("algorithm[{i}].oracle.{field}");
    let deterministic = bench
        .problem
        .field()
        .sample_variance_bound(bench.problem.feasible())
        == Some(0.0);
    let Some(raw) = raw else {
        let scheme = if deterministic {
            OracleScheme::Exact
        } else if algorithm == Algorithm::Asrfb {
            OracleScheme::Sa { batch: 1 }
        } else {
            OracleScheme::Saa(
                BatchSchedule::new(1.0, 1.0, 1.0, Some(DEFAULT_BATCH_CAP)).expect("valid defaults"),
            )
        };
        return Ok(OracleConfig {
            scheme,
            noise: NoiseModel::Structural,
            seed: 0,
        });
    };
    let scheme = match raw.scheme.as_str() {
        "exact" => OracleScheme::Exact,
        "sa" => OracleScheme::Sa {
            batch: raw.batch.unwrap_or(1),
        },
        "saa" => OracleScheme::Saa(
            BatchSchedule::new(
                raw.b.unwrap_or(1.0),
                raw.k0.unwrap_or(1.0),
                raw.a.unwrap_or(1.0),
                raw.cap,
            )
            .map_err(|e| ConfigError::semantic(key("scheme"), e.to_string()))?,
        ),
        other => {
            return Err(ConfigError::semantic(
                key("scheme"),
                format!("expected exact, sa or saa, got `{other}`"),
            ))
        }
    };
    if raw.batch.is_some() && !matches!(scheme, OracleScheme::Sa { .. }) {
        return Err(ConfigError::semantic(key("batch"), "only valid with scheme = \"sa\""));
    }
    if (raw.b.is_some() || raw.k0.is_some() || raw.a.is_some() || raw.cap.is_some())
        && !matches!(scheme, OracleScheme::Saa(_))
    {
        return Err(ConfigError::semantic(key("scheme"), "b, k0, a and cap are only valid with scheme = \"saa\""));
    }
    let noise = match (raw.noise.as_deref(), raw.sigma) {
        (None | Some("structural"), None) => NoiseModel::Structural,
        (Some("structural"), Some(_)) => {
            return Err(ConfigError::semantic(key("sigma"), "sigma applies to additive noise only"))
        }
        (None | Some("additive"), Some(sigma)) => {
            NoiseModel::AdditiveGaussian { sigma }
        }
        (Some("additive"), None) => NoiseModel::AdditiveGaussian { sigma: 0.0 },
        (Some(other), _) => {
            return Err(ConfigError::semantic(
                key("noise"),
                format!("expected structural or additive, got `{other}`"),
            ))
        }
    };
    let config = OracleConfig { scheme, noise, seed: 0 };
    Oracle::new(config).map_err(|e| ConfigError::semantic(key("scheme"), e.to_string()))?;
    Ok(config)
}
