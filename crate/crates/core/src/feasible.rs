//! Box-shaped feasible sets and their Euclidean projections.

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::point::JointPoint;

/// Per-coordinate interval bounds `lower[i] <= x[i] <= upper[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxConstraint {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxConstraint {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len(lower.len(), upper.len())?;
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidSet(format!(
                    "bound {i} is not finite ([{lo}, {hi}])"
                )));
            }
            if lo > hi {
                return Err(Error::InvalidSet(format!(
                    "lower bound {lo} exceeds upper bound {hi} at coordinate {i}"
                )));
            }
        }
        Ok(BoxConstraint { lower, upper })
    }

    /// The cube `[-halfwidth, halfwidth]^dim`.
    pub fn symmetric(dim: usize, halfwidth: f64) -> Result<Self> {
        Self::new(vec![-halfwidth; dim], vec![halfwidth; dim])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Componentwise clamp of `v` into the box.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, v: &mut [f64]) -> Result<()> {
        check_len(self.len(), v.len())?;
        for ((x, lo), hi) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            // NaN propagates through clamp; callers check finiteness.
            *x = x.clamp(*lo, *hi);
        }
        Ok(())
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        v.len() == self.len()
            && v
                .iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((x, lo), hi)| lo <= x && x <= hi)
    }

    /// Squared Euclidean diameter `sum (upper - lower)^2`.
    pub fn diameter_sq(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            out.push(if lo == hi { *lo } else { rng.random_range(*lo..=*hi) });
        }
    }
}

/// Exact squared diameter of a product of boxes.
pub fn diameter_sq(boxes: &[BoxConstraint]) -> f64 {
    boxes.iter().map(BoxConstraint::diameter_sq).sum()
}

/// The joint feasible set `Omega = Omega_g x Omega_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    g: BoxConstraint,
    d: BoxConstraint,
}

impl FeasibleSet {
    pub fn new(g: BoxConstraint, d: BoxConstraint) -> Self {
        FeasibleSet { g, d }
    }

    pub fn symmetric(n_g: usize, n_d: usize, halfwidth: f64) -> Result<Self> {
        Ok(FeasibleSet {
            g: BoxConstraint::symmetric(n_g, halfwidth)?,
            d: BoxConstraint::symmetric(n_d, halfwidth)?,
        })
    }

    pub fn g_box(&self) -> &BoxConstraint {
        &self.g
    }

    pub fn d_box(&self) -> &BoxConstraint {
        &self.d
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.g.len(), self.d.len())
    }

    pub fn check_point(&self, x: &JointPoint) -> Result<()> {
        check_len(self.g.len(), x.n_g())?;
        check_len(self.d.len(), x.n_d())
    }

    /// Blockwise projection onto `Omega`.
    pub fn project(&self, x: &JointPoint) -> Result<JointPoint> {
        let mut out = x.clone();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    pub fn project_in_place(&self, x: &mut JointPoint) -> Result<()> {
        self.check_point(x)?;
        let n_g = x.n_g();
        let (g, d) = x.as_mut_slice().split_at_mut(n_g);
        self.g.project_in_place(g)?;
        self.d.project_in_place(d)
    }

    pub fn contains(&self, x: &JointPoint) -> bool {
        x.n_g() == self.g.len() && self.g.contains(x.g_block()) && self.d.contains(x.d_block())
    }

    pub fn diameter_sq(&self) -> f64 {
        self.g.diameter_sq() + self.d.diameter_sq()
    }

    pub fn lower(&self) -> JointPoint {
        JointPoint::new(self.g.lower.clone(), self.d.lower.clone())
    }

    pub fn upper(&self) -> JointPoint {
        JointPoint::new(self.g.upper.clone(), self.d.upper.clone())
    }

    pub fn center(&self) -> JointPoint {
        self.lower()
            .zip_with(&self.upper(), |lo, hi| 0.5 * (lo + hi))
            .expect("bounds share a shape")
    }

    /// Uniformly distributed feasible point.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> JointPoint {
        let mut data = Vec::with_capacity(self.g.len() + self.d.len());
        self.g.sample_into(rng, &mut data);
        self.d.sample_into(rng, &mut data);
        JointPoint::from_flat(data, self.g.len()).expect("split within length")
    }

    /// Tensor grid with `per_axis` evenly spaced values on every coordinate
    /// (bounds included). Returns `None` when the grid would exceed
    /// `max_points`.
    pub fn grid(&self, per_axis: usize, max_points: usize) -> Option<Vec<JointPoint>> {
        let lower = self.lower().into_vec();
        let upper = self.upper().into_vec();
        let dim = lower.len();
        let per_axis = per_axis.max(1);
        let total = per_axis.checked_pow(dim as u32)?;
        if total > max_points {
            return None;
        }
        let axis_value = |i: usize, step: usize| {
            if per_axis == 1 {
                0.5 * (lower[i] + upper[i])
            } else {
                lower[i] + (upper[i] - lower[i]) * step as f64 / (per_axis - 1) as f64
            }
        };
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let data = (0..dim)
                .map(|i| {
                    let step = rem % per_axis;
                    rem /= per_axis;
                    axis_value(i, step)
                })
                .collect();
            points.push(JointPoint::from_flat(data, self.g.len()).expect("split within length"));
        }
        Some(points)
    }

    /// All box vertices, or `None` when there are more than `max_points`.
    pub fn vertices(&self, max_points: usize) -> Option<Vec<JointPoint>> {
        self.grid(2, max_points)
    }
}
