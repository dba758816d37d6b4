//! Reference-interval tools on `[-1, 1]`: Chebyshev–Lobatto nodes with
//! barycentric interpolation and differentiation, Gauss–Legendre rules.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::linalg::C64;

/// Chebyshev–Lobatto points in ascending order, endpoints included.
pub fn cheb_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| {
            // symmetric evaluation keeps the midpoint exactly zero
            let t = std::f64::consts::PI * (2.0 * j as f64 - m) / (2.0 * m);
            t.sin()
        })
        .collect()
}

/// Barycentric weights of the Chebyshev–Lobatto points.
pub fn cheb_bary_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Barycentric interpolation of `values` given at `nodes`.
pub fn bary_eval(nodes: &[f64], weights: &[f64], values: &[C64], x: f64) -> C64 {
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for ((&xj, &wj), &fj) in nodes.iter().zip(weights).zip(values) {
        let d = x - xj;
        if d == 0.0 {
            return fj;
        }
        let t = wj / d;
        num += fj * t;
        den += t;
    }
    num / den
}

/// Row of barycentric coefficients: `p(x) = sum_j row[j] f_j`.
pub fn bary_row(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        row[j] = 1.0;
        return row;
    }
    let mut den = 0.0;
    for (j, (&xj, &wj)) in nodes.iter().zip(weights).enumerate() {
        let t = wj / (x - xj);
        row[j] = t;
        den += t;
    }
    for r in &mut row {
        *r /= den;
    }
    row
}

/// Differentiation matrix for the barycentric interpolant (row-major `n×n`).
/// Diagonal entries use the negative-sum trick for accuracy.
pub fn diff_matrix(nodes: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = weights[j] / weights[i] / (nodes[i] - nodes[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("positive order"));
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_polynomials() {
        let n = 12;
        let x = cheb_lobatto(n);
        let w = cheb_bary_weights(n);
        let f: Vec<C64> = x.iter().map(|&t| C64::new(t.powi(7) - 2.0 * t, t * t)).collect();
        for &t in &[-0.93, -0.2, 0.0, 0.41, 0.999] {
            let p = bary_eval(&x, &w, &f, t);
            assert!((p - C64::new(t.powi(7) - 2.0 * t, t * t)).norm() < 1e-14);
        }
    }

    #[test]
    fn differentiates_smooth_functions() {
        let n = 24;
        let x = cheb_lobatto(n);
        let w = cheb_bary_weights(n);
        let d = diff_matrix(&x, &w);
        for i in 0..n {
            let df: f64 = (0..n).map(|j| d[i * n + j] * (2.0 * x[j]).sin()).sum();
            assert!((df - 2.0 * (2.0 * x[i]).cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(t, wt)| wt * t.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-15);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }
}
