//! Benchmark games: the stochastic bilinear game with antidiagonal random
//! matrix, the logistic zero-sum game, and generic affine fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::feasible::{BoxConstraint, FeasibleSet};
use crate::point::JointPoint;
use crate::problem::{Pseudogradient, SampleRng, ViProblem};

/// A constructed problem with its default starting point and any notes
/// raised during construction.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub problem: ViProblem,
    pub default_start: JointPoint,
    pub warnings: Vec<String>,
}

fn default_start(feasible: &FeasibleSet, value: f64) -> JointPoint {
    let (n_g, n_d) = feasible.dims();
    feasible
        .project(&JointPoint::filled(n_g, n_d, value))
        .expect("dims match")
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

// ---------------------------------------------------------------------------
// Bilinear game

/// `J(x_g, x_d) = x_g' M(xi) x_d + x_g' a + x_d' b` with `M(xi)` antidiagonal,
/// entries drawn from `N(matrix_mean, matrix_noise_sd^2)`. The generator
/// minimises `J`, the discriminator maximises it.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearGameSpec {
    pub n_g: usize,
    pub n_d: usize,
    /// Linear terms; drawn uniformly from `[-0.5, 0.5]` when absent.
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub matrix_mean: f64,
    pub matrix_noise_sd: f64,
    pub box_halfwidth: f64,
    pub seed: u64,
}

impl Default for BilinearGameSpec {
    fn default() -> Self {
        BilinearGameSpec {
            n_g: 5,
            n_d: 5,
            a: None,
            b: None,
            matrix_mean: 1.0,
            matrix_noise_sd: 0.1,
            box_halfwidth: 1.0,
            seed: 1,
        }
    }
}

impl BilinearGameSpec {
    pub fn with_terms(n: usize, a: Vec<f64>, b: Vec<f64>) -> Self {
        BilinearGameSpec {
            n_g: n,
            n_d: n,
            a: Some(a),
            b: Some(b),
            ..BilinearGameSpec::default()
        }
    }

    /// The linear terms, drawing the missing ones from the spec seed.
    pub fn resolve_terms(&self) -> (Vec<f64>, Vec<f64>) {
        let mut rng = SampleRng::seed_from_u64(self.seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.5..=0.5)).collect() };
        let a = self.a.clone().unwrap_or_else(|| draw(self.n_g));
        let b = self.b.clone().unwrap_or_else(|| draw(self.n_d));
        (a, b)
    }
}

#[derive(Debug, Clone)]
struct BilinearField {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl BilinearField {
    // The antidiagonal entry on row i is M[i][n-1-i]; (M x_d)_i uses x_d[n-1-i]
    // and (M' x_g)_j uses row n-1-j.
    fn apply(&self, x: &[f64], out: &mut [f64], entry: impl Fn(usize) -> f64) {
        let n = self.n;
        let (xg, xd) = x.split_at(n);
        let (og, od) = out.split_at_mut(n);
        for i in 0..n {
            og[i] = entry(i) * xd[n - 1 - i] + self.a[i];
        }
        for j in 0..n {
            od[j] = -(entry(n - 1 - j) * xg[n - 1 - j] + self.b[j]);
        }
    }
}

impl Pseudogradient for BilinearField {
    fn exact(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out, |_| self.mean)
    }

    fn sample(&self, x: &[f64], rng: &mut SampleRng, out: &mut [f64]) {
        // Entries are drawn into the first block, then overwritten in place.
        let n = self.n;
        let (xg, xd) = x.split_at(n);
        let (og, od) = out.split_at_mut(n);
        for e in og.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *e = self.mean + self.sd * z;
        }
        for j in 0..n {
            od[j] = -(og[n - 1 - j] * xg[n - 1 - j] + self.b[j]);
        }
        for i in 0..n {
            og[i] = og[i] * xd[n - 1 - i] + self.a[i];
        }
    }

    fn sample_variance_bound(&self, feasible: &FeasibleSet) -> Option<f64> {
        let sq: f64 = feasible
            .lower()
            .as_slice()
            .iter()
            .zip(feasible.upper().as_slice())
            .map(|(lo, hi)| (lo * lo).max(hi * hi))
            .sum();
        Some(self.sd * self.sd * sq)
    }
}

/// Builds the bilinear game. The exact mapping is
/// `F(x) = [E[M] x_d + a; -(E[M]' x_g + b)]` and the stationary point solves
/// `E[M] x_d = -a`, `E[M]' x_g = -b`.
pub fn build_bilinear(spec: &BilinearGameSpec) -> Result<Benchmark> {
    if spec.n_g == 0 || spec.n_g != spec.n_d {
        return Err(Error::config(format!(
            "bilinear game needs equal positive player dimensions, got {} and {}",
            spec.n_g, spec.n_d
        )));
    }
    if !(spec.matrix_mean.is_finite() && spec.matrix_mean != 0.0) {
        return Err(Error::config("matrix_mean must be finite and nonzero"));
    }
    if !(spec.matrix_noise_sd.is_finite() && spec.matrix_noise_sd >= 0.0) {
        return Err(Error::config("matrix_noise_sd must be finite and nonnegative"));
    }
    if !(spec.box_halfwidth.is_finite() && spec.box_halfwidth > 0.0) {
        return Err(Error::config("box_halfwidth must be positive"));
    }
    let n = spec.n_g;
    let (a, b) = spec.resolve_terms();
    check_len(n, a.len())?;
    check_len(n, b.len())?;
    if a.iter().chain(&b).any(|v| !v.is_finite()) {
        return Err(Error::config("bilinear terms a and b must be finite"));
    }
    let m = spec.matrix_mean;
    let x_d: Vec<f64> = (0..n).map(|i| -a[n - 1 - i] / m).collect();
    let x_g: Vec<f64> = (0..n).map(|j| -b[n - 1 - j] / m).collect();
    let stationary = JointPoint::new(x_g, x_d);

    let feasible = FeasibleSet::symmetric(n, n, spec.box_halfwidth)?;
    let field = BilinearField {
        n,
        a,
        b,
        mean: m,
        sd: spec.matrix_noise_sd,
    };
    let mut problem =
        ViProblem::new("bilinear", feasible.clone(), Arc::new(field)).with_lipschitz(m.abs())?;
    let mut warnings = Vec::new();
    if feasible.contains(&stationary) {
        problem = problem.with_known_solution(stationary)?;
    } else {
        warnings.push(
            "stationary point lies outside the box; known solution omitted and distance metrics disabled"
                .to_string(),
        );
    }
    Ok(Benchmark {
        default_start: default_start(&feasible, 0.5),
        problem,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Logistic game

/// `min_{x_g} max_{x_d} -log(1 + e^{-x_d w}) - log(1 + e^{x_d x_g})` with
/// scalar players.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticGameSpec {
    pub omega: f64,
    pub box_halfwidth: f64,
}

impl Default for LogisticGameSpec {
    fn default() -> Self {
        LogisticGameSpec {
            omega: -2.0,
            box_halfwidth: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LogisticField {
    omega: f64,
}

impl Pseudogradient for LogisticField {
    fn exact(&self, x: &[f64], out: &mut [f64]) {
        let (g, d) = (x[0], x[1]);
        let s = sigmoid(d * g);
        out[0] = -d * s;
        out[1] = -self.omega * sigmoid(-d * self.omega) + g * s;
    }
}

/// Lipschitz constant of the logistic field on `[-h, h]^2`: Frobenius norm
/// of the entrywise Jacobian bounds (`|s| <= 1`, `s' <= 1/4`).
pub fn logistic_lipschitz_bound(omega: f64, h: f64) -> f64 {
    let q = h * h / 4.0;
    let j11 = q;
    let j12 = 1.0 + q;
    let j22 = omega * omega / 4.0 + q;
    (j11 * j11 + 2.0 * j12 * j12 + j22 * j22).sqrt()
}

pub fn build_logistic(spec: &LogisticGameSpec) -> Result<Benchmark> {
    if !spec.omega.is_finite() {
        return Err(Error::config("omega must be finite"));
    }
    if !(spec.box_halfwidth.is_finite() && spec.box_halfwidth > 0.0) {
        return Err(Error::config("box_halfwidth must be positive"));
    }
    let h = spec.box_halfwidth;
    let feasible = FeasibleSet::symmetric(1, 1, h)?;
    let mut problem = ViProblem::new(
        "logistic",
        feasible.clone(),
        Arc::new(LogisticField { omega: spec.omega }),
    )
    .with_lipschitz(logistic_lipschitz_bound(spec.omega, h))?;
    let solution = JointPoint::new(vec![spec.omega], vec![0.0]);
    let mut warnings = Vec::new();
    if feasible.contains(&solution) {
        problem = problem.with_known_solution(solution)?;
    } else {
        warnings.push(format!(
            "equilibrium ({}, 0) lies outside the box; distance metrics disabled",
            spec.omega
        ));
    }
    Ok(Benchmark {
        default_start: default_start(&feasible, 0.5),
        problem,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Affine fields

/// `F(x) = A x + q` on an explicit box, `A` given row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGameSpec {
    pub n_g: usize,
    pub n_d: usize,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub solution: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct AffineField {
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl Pseudogradient for AffineField {
    fn exact(&self, x: &[f64], out: &mut [f64]) {
        for ((o, row), q) in out.iter_mut().zip(&self.matrix).zip(&self.offset) {
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + q;
        }
    }
}

/// Largest singular value by power iteration on `A' A`, computed on the
/// matrix scaled to unit max-entry.
pub fn spectral_norm(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.first().map_or(0, Vec::len);
    let scale = matrix.iter().flatten().fold(0.0f64, |m, a| m.max(a.abs()));
    if n == 0 || scale == 0.0 {
        return 0.0;
    }
    let matrix: Vec<Vec<f64>> = matrix
        .iter()
        .map(|row| row.iter().map(|a| a / scale).collect())
        .collect();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut sigma = 0.0;
    for _ in 0..500 {
        let av: Vec<f64> = matrix
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, x)| a * x).sum())
            .collect();
        let mut atav = vec![0.0; n];
        for (row, y) in matrix.iter().zip(&av) {
            for (t, a) in atav.iter_mut().zip(row) {
                *t += a * y;
            }
        }
        let norm = atav.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = atav.iter().map(|t| t / norm).collect();
        sigma = norm.sqrt();
    }
    sigma * scale
}

pub fn build_affine(spec: &AffineGameSpec) -> Result<Benchmark> {
    let n = spec.n_g + spec.n_d;
    if spec.n_g == 0 || spec.n_d == 0 {
        return Err(Error::config("affine game needs both players to have variables"));
    }
    check_len(n, spec.matrix.len())?;
    for row in &spec.matrix {
        check_len(n, row.len())?;
    }
    check_len(n, spec.offset.len())?;
    check_len(n, spec.lower.len())?;
    check_len(n, spec.upper.len())?;
    if spec.matrix.iter().flatten().chain(&spec.offset).any(|v| !v.is_finite()) {
        return Err(Error::config("affine matrix and offset must be finite"));
    }
    let feasible = FeasibleSet::new(
        BoxConstraint::new(spec.lower[..spec.n_g].to_vec(), spec.upper[..spec.n_g].to_vec())?,
        BoxConstraint::new(spec.lower[spec.n_g..].to_vec(), spec.upper[spec.n_g..].to_vec())?,
    );
    let field = AffineField {
        matrix: spec.matrix.clone(),
        offset: spec.offset.clone(),
    };
    let mut problem = ViProblem::new("affine", feasible.clone(), Arc::new(field))
        .with_lipschitz(spectral_norm(&spec.matrix))?;
    if let Some(sol) = &spec.solution {
        check_len(n, sol.len())?;
        let sol = JointPoint::from_flat(sol.clone(), spec.n_g)?;
        let scale = 1.0 + problem.evaluate_F(&sol)?.norm();
        if crate::metrics::residual(&problem, &sol, 1.0)? > 1e-8 * scale {
            return Err(Error::config("given solution does not solve the variational inequality"));
        }
        problem = problem.with_known_solution(sol)?;
    }
    let center = feasible.center();
    Ok(Benchmark {
        default_start: center,
        problem,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{monotonicity_probe, residual};
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_bilinear_solution() {
        let spec = BilinearGameSpec::with_terms(1, vec![0.5], vec![-0.5]);
        let bench = build_bilinear(&spec).unwrap();
        let sol = bench.problem.known_solution().unwrap();
        assert_eq!(sol, &JointPoint::new(vec![0.5], vec![-0.5]));
    }

    #[test]
    fn zero_terms_give_origin() {
        let spec = BilinearGameSpec::with_terms(4, vec![0.0; 4], vec![0.0; 4]);
        let bench = build_bilinear(&spec).unwrap();
        assert_eq!(bench.problem.known_solution().unwrap(), &JointPoint::zeros(4, 4));
    }

    #[test]
    fn bilinear_hand_evaluation() {
        let spec = BilinearGameSpec::with_terms(1, vec![1.0], vec![0.0]);
        let bench = build_bilinear(&spec).unwrap();
        let f = bench.problem.evaluate_F(&JointPoint::zeros(1, 1)).unwrap();
        assert_eq!(f, JointPoint::new(vec![1.0], vec![0.0]));
    }

    #[test]
    fn default_bilinear_is_interior_and_stationary() {
        let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
        assert!(bench.warnings.is_empty());
        let sol = bench.problem.known_solution().unwrap();
        let f = bench.problem.evaluate_F(sol).unwrap();
        assert!(f.norm() < 1e-15);
        assert_eq!(bench.problem.lipschitz(), Some(1.0));
        assert_eq!(bench.default_start, JointPoint::filled(5, 5, 0.5));
    }

    #[test]
    fn exterior_stationary_point_is_dropped_with_warning() {
        let mut spec = BilinearGameSpec::with_terms(2, vec![0.0, 3.0], vec![0.0, 0.0]);
        spec.matrix_noise_sd = 0.0;
        let bench = build_bilinear(&spec).unwrap();
        assert!(bench.problem.known_solution().is_none());
        assert_eq!(bench.warnings.len(), 1);
    }

    #[test]
    fn rectangular_bilinear_is_rejected() {
        let spec = BilinearGameSpec {
            n_g: 2,
            n_d: 3,
            ..BilinearGameSpec::default()
        };
        assert!(build_bilinear(&spec).is_err());
    }

    #[test]
    fn bilinear_is_skew_monotone() {
        let bench = build_bilinear(&BilinearGameSpec::default()).unwrap();
        let report = monotonicity_probe(&bench.problem, 2000, 11).unwrap();
        assert!(report.min_inner_product.abs() <= 1e-10);
        assert!(report.is_monotone());
    }

    #[test]
    fn logistic_values() {
        let bench = build_logistic(&LogisticGameSpec::default()).unwrap();
        let p = &bench.problem;
        let at_eq = p.evaluate_F(&JointPoint::new(vec![-2.0], vec![0.0])).unwrap();
        assert_eq!(at_eq, JointPoint::zeros(1, 1));
        let at_origin = p.evaluate_F(&JointPoint::zeros(1, 1)).unwrap();
        assert_eq!(at_origin, JointPoint::new(vec![0.0], vec![1.0]));
        assert_eq!(p.known_solution().unwrap(), &JointPoint::new(vec![-2.0], vec![0.0]));
        for lambda in [1e-3, 0.1, 0.5, 1.0] {
            assert!(residual(p, p.known_solution().unwrap(), lambda).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn sigmoid_symmetry() {
        let mut rng = SampleRng::seed_from_u64(4);
        for _ in 0..1000 {
            let t: f64 = rng.random_range(-30.0..30.0);
            assert_relative_eq!(sigmoid(t) + sigmoid(-t), 1.0, epsilon = 1e-15);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn logistic_lipschitz_default() {
        assert_relative_eq!(logistic_lipschitz_bound(-2.0, 4.0), 91f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn affine_spectral_norm_and_solution() {
        let spec = AffineGameSpec {
            n_g: 1,
            n_d: 1,
            matrix: vec![vec![0.0, 2.0], vec![-2.0, 0.0]],
            offset: vec![1.0, 0.0],
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
            solution: Some(vec![0.0, -0.5]),
        };
        let bench = build_affine(&spec).unwrap();
        assert_relative_eq!(bench.problem.lipschitz().unwrap(), 2.0, epsilon = 1e-9);
        let f = bench
            .problem
            .evaluate_F(bench.problem.known_solution().unwrap())
            .unwrap();
        assert_eq!(f, JointPoint::zeros(1, 1));
        let mut bad = spec.clone();
        bad.offset.pop();
        assert!(build_affine(&bad).is_err());
    }
}
