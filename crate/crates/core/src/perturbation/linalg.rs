//! 2x2 matrices and 2-vectors.

use std::ops::{Add, Mul, Neg, Sub};

/// Smallest determinant magnitude accepted by [`Mat2::inverse`].
pub const DET_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2(pub [f64; 2]);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2([0.0, 0.0]);

    pub fn new(a: f64, b: f64) -> Self {
        Vec2([a, b])
    }

    pub fn norm_inf(&self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn scale(&self, s: f64) -> Self {
        let [[a, b], [c, d]] = self.0;
        Mat2([[s * a, s * b], [s * c, s * d]])
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    /// Adjugate inverse; `None` when `|det| < DET_GUARD`.
    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if !(det.abs() >= DET_GUARD) {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some(Mat2([[d / det, -b / det], [-c / det, a / det]]))
    }

    /// Row-sum norm `max_i (|M_i1| + |M_i2|)`.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|r| r[0].abs() + r[1].abs())
            .fold(0.0, f64::max)
    }

    /// `||M|| ||M^{-1}||`, infinite when singular.
    pub fn condition(&self) -> f64 {
        self.inverse()
            .map_or(f64::INFINITY, |inv| self.norm() * inv.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j])
        }))
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        let a = self.0;
        Vec2([
            a[0][0] * v.0[0] + a[0][1] * v.0[1],
            a[1][0] * v.0[0] + a[1][1] * v.0[1],
        ])
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2([-self.0[0], -self.0[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(0.0, 2.0, 2.0, 3.0);
        assert_eq!(m.det(), -4.0);
        let p = m * m.inverse().unwrap();
        assert_eq!(p, Mat2::IDENTITY);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
        assert!(Mat2::new(1e-200, 0.0, 0.0, 1e-200).inverse().is_none());
    }

    #[test]
    fn row_sum_norm() {
        assert_eq!(Mat2::new(1.0, -2.0, 0.5, 0.25).norm(), 3.0);
    }
}
