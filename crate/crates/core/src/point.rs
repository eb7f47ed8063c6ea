//! Joint decision vectors `col(x_g, x_d)`.

use crate::error::{check_len, Error, Result};

/// Concatenated decision vector of the generator block followed by the
/// discriminator block. Block lengths are fixed at construction and all
/// arithmetic between points is length-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    data: Vec<f64>,
    n_g: usize,
}

impl JointPoint {
    pub fn new(g_block: Vec<f64>, d_block: Vec<f64>) -> Self {
        let n_g = g_block.len();
        let mut data = g_block;
        data.extend(d_block);
        JointPoint { data, n_g }
    }

    /// Builds a point from a flat vector split after `n_g` coordinates.
    pub fn from_flat(data: Vec<f64>, n_g: usize) -> Result<Self> {
        if n_g > data.len() {
            return Err(Error::Dimension {
                expected: n_g,
                found: data.len(),
            });
        }
        Ok(JointPoint { data, n_g })
    }

    pub fn zeros(n_g: usize, n_d: usize) -> Self {
        Self::filled(n_g, n_d, 0.0)
    }

    pub fn filled(n_g: usize, n_d: usize, value: f64) -> Self {
        JointPoint {
            data: vec![value; n_g + n_d],
            n_g,
        }
    }

    /// A zero point with the same block structure as `self`.
    pub fn zeros_like(&self) -> Self {
        JointPoint {
            data: vec![0.0; self.data.len()],
            n_g: self.n_g,
        }
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn n_d(&self) -> usize {
        self.data.len() - self.n_g
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_g, self.n_d())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn g_block(&self) -> &[f64] {
        &self.data[..self.n_g]
    }

    pub fn d_block(&self) -> &[f64] {
        &self.data[self.n_g..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn check_same_shape(&self, other: &JointPoint) -> Result<()> {
        check_len(self.n_g, other.n_g)?;
        check_len(self.data.len(), other.data.len())
    }

    pub fn dot(&self, other: &JointPoint) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &JointPoint) -> Result<JointPoint> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &JointPoint) -> Result<JointPoint> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> JointPoint {
        JointPoint {
            data: self.data.iter().map(|v| v * factor).collect(),
            n_g: self.n_g,
        }
    }

    pub fn distance_sq(&self, other: &JointPoint) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn distance(&self, other: &JointPoint) -> Result<f64> {
        self.distance_sq(other).map(f64::sqrt)
    }

    /// Elementwise combination of two equally shaped points.
    pub fn zip_with(&self, other: &JointPoint, f: impl Fn(f64, f64) -> f64) -> Result<JointPoint> {
        self.check_same_shape(other)?;
        Ok(JointPoint {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            n_g: self.n_g,
        })
    }

    /// Index of the first non-finite coordinate, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_split_at_n_g() {
        let p = JointPoint::new(vec![1.0, 2.0], vec![3.0]);
        assert_eq!(p.dims(), (2, 1));
        assert_eq!(p.g_block(), &[1.0, 2.0]);
        assert_eq!(p.d_block(), &[3.0]);
    }

    #[test]
    fn mismatched_blocks_are_rejected() {
        let p = JointPoint::new(vec![1.0, 2.0], vec![3.0]);
        let q = JointPoint::new(vec![1.0], vec![2.0, 3.0]);
        assert!(matches!(p.sub(&q), Err(Error::Dimension { .. })));
        let r = JointPoint::new(vec![1.0], vec![2.0]);
        assert!(p.dot(&r).is_err());
    }

    #[test]
    fn from_flat_checks_split() {
        assert!(JointPoint::from_flat(vec![0.0; 2], 3).is_err());
        let p = JointPoint::from_flat(vec![0.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(p.d_block(), &[1.0, 2.0]);
    }
}
