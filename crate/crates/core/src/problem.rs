//! Stochastic Nash equilibrium problems posed as variational inequalities.

use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::feasible::FeasibleSet;
use crate::point::JointPoint;

/// Generator used for every random draw in the library.
pub type SampleRng = ChaCha8Rng;

/// The pseudogradient of a two-player game: the stacked partial gradients
/// of each player's cost in its own variable.
///
/// `exact` evaluates the expected mapping `F(x)`. `sample` evaluates the
/// per-realization gradient `grad J(x, xi)` for games whose randomness enters
/// through problem data (random matrices and the like); the default is
/// deterministic and returns `F(x)`.
pub trait Pseudogradient: Send + Sync + fmt::Debug {
    fn exact(&self, x: &[f64], out: &mut [f64]);

    fn sample(&self, x: &[f64], _rng: &mut SampleRng, out: &mut [f64]) {
        self.exact(x, out)
    }

    /// Upper bound on `E||sample(x) - exact(x)||^2` over the feasible set,
    /// or `None` when the game cannot provide one.
    fn sample_variance_bound(&self, _feasible: &FeasibleSet) -> Option<f64> {
        Some(0.0)
    }
}

/// Deterministic field backed by a closure.
pub struct FnField<F>(pub F);

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnField")
    }
}

impl<F> Pseudogradient for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn exact(&self, x: &[f64], out: &mut [f64]) {
        (self.0)(x, out)
    }
}

/// A variational inequality `<F(x*), x - x*> >= 0` over a product of boxes.
#[derive(Clone)]
pub struct ViProblem {
    name: String,
    feasible: FeasibleSet,
    field: Arc<dyn Pseudogradient>,
    known_solution: Option<JointPoint>,
    lipschitz: Option<f64>,
}

impl fmt::Debug for ViProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ViProblem")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("known_solution", &self.known_solution)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ViProblem {
    pub fn new(
        name: impl Into<String>,
        feasible: FeasibleSet,
        field: Arc<dyn Pseudogradient>,
    ) -> Self {
        ViProblem {
            name: name.into(),
            feasible,
            field,
            known_solution: None,
            lipschitz: None,
        }
    }

    /// Deterministic problem from a closure `x -> F(x)`.
    pub fn from_fn<F>(name: impl Into<String>, feasible: FeasibleSet, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(name, feasible, Arc::new(FnField(f)))
    }

    pub fn with_known_solution(mut self, solution: JointPoint) -> Result<Self> {
        self.feasible.check_point(&solution)?;
        if !self.feasible.contains(&solution) {
            return Err(Error::InvalidSet(
                "known solution lies outside the feasible set".into(),
            ));
        }
        self.known_solution = Some(solution);
        Ok(self)
    }

    pub fn with_lipschitz(mut self, ell: f64) -> Result<Self> {
        if !(ell.is_finite() && ell >= 0.0) {
            return Err(Error::config(format!(
                "Lipschitz constant must be finite and nonnegative, got {ell}"
            )));
        }
        self.lipschitz = Some(ell);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> (usize, usize) {
        self.feasible.dims()
    }

    pub fn dim(&self) -> usize {
        let (g, d) = self.dims();
        g + d
    }

    pub fn feasible(&self) -> &FeasibleSet {
        &self.feasible
    }

    pub fn field(&self) -> &dyn Pseudogradient {
        self.field.as_ref()
    }

    pub fn known_solution(&self) -> Option<&JointPoint> {
        self.known_solution.as_ref()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn joint_project(&self, x: &JointPoint) -> Result<JointPoint> {
        self.feasible.project(x)
    }

    /// Exact expected pseudogradient `F(x)`.
    #[allow(non_snake_case)]
    pub fn evaluate_F(&self, x: &JointPoint) -> Result<JointPoint> {
        let mut out = x.zeros_like();
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn evaluate_into(&self, x: &JointPoint, out: &mut JointPoint) -> Result<()> {
        self.feasible.check_point(x)?;
        check_len(x.len(), out.len())?;
        self.field.exact(x.as_slice(), out.as_mut_slice());
        match out.first_non_finite() {
            Some(index) => Err(Error::NonFinite {
                index,
                context: format!("pseudogradient of {}", self.name),
            }),
            None => Ok(()),
        }
    }
}
