//! Small dense complex 2×2 algebra for transfer matrices.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn new(m11: C64, m12: C64, m21: C64, m22: C64) -> Self {
        Mat2([[m11, m12], [m21, m22]])
    }

    pub fn identity() -> Self {
        Mat2::new(c(1.0), c(0.0), c(0.0), c(1.0))
    }

    pub fn zero() -> Self {
        Mat2::new(c(0.0), c(0.0), c(0.0), c(0.0))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Inverse via the adjugate.
    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        let [[a, b], [cc, dd]] = self.0;
        Mat2::new(dd / d, -b / d, -cc / d, a / d)
    }

    pub fn adjoint(&self) -> Mat2 {
        let [[a, b], [cc, d]] = self.0;
        Mat2::new(a.conj(), cc.conj(), b.conj(), d.conj())
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let [[a, b], [cc, d]] = self.0;
        Mat2::new(a * s, b * s, cc * s, d * s)
    }

    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Integer power; negative exponents use the inverse.
    pub fn powi(&self, n: i64) -> Mat2 {
        let mut base = if n < 0 { self.inverse() } else { *self };
        let mut e = n.unsigned_abs();
        let mut acc = Mat2::identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Moore–Penrose pseudo-inverse of a rank-one matrix, `N^H / |N|_F^2`.
    pub fn pinv_rank1(&self) -> Mat2 {
        let n2 = self.norm().powi(2);
        self.adjoint().scale(c(1.0 / n2))
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] += o.0[i][j];
            }
        }
        r
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] -= o.0[i][j];
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_power() {
        let m = Mat2::new(c(2.0), C64::new(0.0, 1.0), C64::new(0.0, 3.0), c(-1.0));
        let p = m * m.inverse();
        assert!(p.max_abs_diff(&Mat2::identity()) < 1e-15);
        let m3 = m * m * m;
        assert!(m.powi(3).max_abs_diff(&m3) < 1e-12);
        assert!((m.powi(-2) * m * m).max_abs_diff(&Mat2::identity()) < 1e-12);
    }

    #[test]
    fn rank_one_pinv() {
        // nilpotent rank-one matrix
        let n = Mat2::new(c(1.0), c(1.0), c(-1.0), c(-1.0));
        let p = n.pinv_rank1();
        let npn = n * p * n;
        assert!(npn.max_abs_diff(&n) < 1e-15);
    }
}
