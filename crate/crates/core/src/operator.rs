//! Pure vector-to-vector maps shared by the metric, the dynamics probes and the checks.

use std::fmt;
use std::sync::Arc;

pub trait VectorMap: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `apply` together with a bound on the distance from the returned point to the exact image.
    fn apply_certified(&self, x: &[f64]) -> (Vec<f64>, f64) {
        (self.apply(x), 0.0)
    }
}

impl<T: VectorMap + ?Sized> VectorMap for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
    fn apply_certified(&self, x: &[f64]) -> (Vec<f64>, f64) {
        (**self).apply_certified(x)
    }
}

impl<T: VectorMap + ?Sized> VectorMap for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (**self).apply(x)
    }
    fn apply_certified(&self, x: &[f64]) -> (Vec<f64>, f64) {
        (**self).apply_certified(x)
    }
}

/// A closure-backed map.
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnMap { dim, f }
    }
}

impl<F> VectorMap for FnMap<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

impl<F> fmt::Debug for FnMap<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap").field("dim", &self.dim).finish()
    }
}

/// `x ↦ A x + c` for a dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn linear(matrix: Vec<Vec<f64>>) -> Self {
        let n = matrix.len();
        AffineMap {
            matrix,
            offset: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect())
            .collect();
        Self::linear(matrix)
    }

    /// Resolvent `(I + R)^{-1}` of the planar rotation by `angle` radians.
    pub fn rotation_resolvent(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // I + R = [[1+c, -s], [s, 1+c]]
        let a = 1.0 + c;
        let det = a * a + s * s;
        Self::linear(vec![vec![a / det, s / det], vec![-s / det, a / det]])
    }
}

impl VectorMap for AffineMap {
    fn dim(&self) -> usize {
        self.offset.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, c)| crate::linalg::dot(row, x) + c)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_resolvent() {
        let t = AffineMap::rotation_resolvent(std::f64::consts::FRAC_PI_2);
        let y = t.apply(&[2.0, 0.0]);
        // (I+R)^{-1} = 1/2 [[1, 1], [-1, 1]]
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] + 1.0).abs() < 1e-15);
    }
}
