//! Piecewise Chebyshev sampling of one period.
//!
//! Every layer carries its own Chebyshev–Lobatto segment, so interface points
//! appear twice (once as the right end of a layer, once as the left end of the
//! next). Values stored on these one-sided nodes keep jumps of discontinuous
//! components intact.

use crate::linalg::C64;
use crate::medium::LayerStack;
use crate::spectral::{bary_eval, bary_row, cheb_bary_weights, cheb_lobatto, diff_matrix, gauss_legendre};

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub layer: usize,
    pub z0: f64,
    pub z1: f64,
    /// Index of the first node of this segment in the flat sample arrays.
    pub offset: usize,
    /// Normalized constants of the layer.
    pub eps: f64,
    pub mu: f64,
}

impl Segment {
    pub fn width(&self) -> f64 {
        self.z1 - self.z0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZGrid {
    period: f64,
    per_layer: usize,
    segments: Vec<Segment>,
    z: Vec<f64>,
    node_segment: Vec<usize>,
    ref_x: Vec<f64>,
    bary_w: Vec<f64>,
    dmat: Vec<f64>,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
    /// Row-major `gl_x.len() × per_layer` interpolation matrix.
    to_gl: Vec<f64>,
}

impl ZGrid {
    /// `per_layer` Chebyshev–Lobatto nodes on every layer (at least 8).
    pub fn new(stack: &LayerStack, per_layer: usize) -> Self {
        let n = per_layer.max(8);
        let ref_x = cheb_lobatto(n);
        let bary_w = cheb_bary_weights(n);
        let dmat = diff_matrix(&ref_x, &bary_w);
        let (gl_x, gl_w) = gauss_legendre(n);
        let to_gl = gl_x
            .iter()
            .flat_map(|&x| bary_row(&ref_x, &bary_w, x))
            .collect();
        let mut segments = Vec::with_capacity(stack.len());
        let mut z = Vec::with_capacity(n * stack.len());
        let mut node_segment = Vec::with_capacity(n * stack.len());
        let ifaces = stack.interfaces();
        for i in 0..stack.len() {
            let (z0, z1) = (ifaces[i], ifaces[i + 1]);
            let m = stack.medium(i);
            segments.push(Segment {
                layer: i,
                z0,
                z1,
                offset: z.len(),
                eps: m.eps,
                mu: m.mu,
            });
            for (j, &x) in ref_x.iter().enumerate() {
                let zz = if j == 0 {
                    z0
                } else if j == n - 1 {
                    z1
                } else {
                    z0 + 0.5 * (x + 1.0) * (z1 - z0)
                };
                z.push(zz);
                node_segment.push(i);
            }
        }
        Self {
            period: stack.period(),
            per_layer: n,
            segments,
            z,
            node_segment,
            ref_x,
            bary_w,
            dmat,
            gl_x,
            gl_w,
            to_gl,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn per_layer(&self) -> usize {
        self.per_layer
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn node_segment(&self, node: usize) -> &Segment {
        &self.segments[self.node_segment[node]]
    }

    /// Segment index and reference coordinate of `z` after reduction modulo
    /// the period; interfaces belong to the layer on their right.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let zr = z.rem_euclid(self.period);
        let zr = if zr >= self.period { 0.0 } else { zr };
        let s = self
            .segments
            .partition_point(|seg| seg.z0 <= zr)
            .saturating_sub(1);
        let seg = &self.segments[s];
        let x = (2.0 * (zr - seg.z0) / seg.width() - 1.0).clamp(-1.0, 1.0);
        (s, x)
    }

    /// Interpolant of periodic samples at an arbitrary `z`.
    pub fn eval(&self, values: &[C64], z: f64) -> C64 {
        let (s, x) = self.locate(z);
        self.eval_segment(values, s, x)
    }

    pub fn eval_segment(&self, values: &[C64], seg: usize, x: f64) -> C64 {
        let o = self.segments[seg].offset;
        bary_eval(&self.ref_x, &self.bary_w, &values[o..o + self.per_layer], x)
    }

    /// Per-layer spectral derivative of sampled values.
    pub fn differentiate(&self, values: &[C64]) -> Vec<C64> {
        let n = self.per_layer;
        let mut out = vec![C64::new(0.0, 0.0); values.len()];
        for seg in &self.segments {
            let scale = 2.0 / seg.width();
            let v = &values[seg.offset..seg.offset + n];
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += v[j] * self.dmat[i * n + j];
                }
                out[seg.offset + i] = acc * scale;
            }
        }
        out
    }

    /// Values of the interpolant at all Gauss–Legendre points, layer by layer.
    pub fn to_quadrature(&self, values: &[C64]) -> Vec<C64> {
        let n = self.per_layer;
        let q = self.gl_x.len();
        let mut out = Vec::with_capacity(q * self.segments.len());
        for seg in &self.segments {
            let v = &values[seg.offset..seg.offset + n];
            for r in 0..q {
                let row = &self.to_gl[r * n..(r + 1) * n];
                out.push(row.iter().zip(v).map(|(a, b)| b * *a).sum());
            }
        }
        out
    }

    /// Quadrature points in `z` matching [`Self::to_quadrature`].
    pub fn quadrature_points(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|seg| {
                self.gl_x
                    .iter()
                    .map(move |&x| seg.z0 + 0.5 * (x + 1.0) * seg.width())
            })
            .collect()
    }

    /// Quadrature weights matching [`Self::to_quadrature`].
    pub fn quadrature_weights(&self) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|seg| self.gl_w.iter().map(move |&w| 0.5 * w * seg.width()))
            .collect()
    }

    /// Segment of each quadrature point.
    pub fn quadrature_segments(&self) -> Vec<usize> {
        (0..self.segments.len())
            .flat_map(|s| std::iter::repeat_n(s, self.gl_x.len()))
            .collect()
    }

    /// `∫ f dz` over one period.
    pub fn integrate(&self, values: &[C64]) -> C64 {
        self.to_quadrature(values)
            .iter()
            .zip(self.quadrature_weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// True if both grids sample the same points.
    pub fn compatible(&self, other: &ZGrid) -> bool {
        std::ptr::eq(self, other) || (self.per_layer == other.per_layer && self.z == other.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::qw_stack;

    #[test]
    fn nodes_cover_interfaces() {
        let s = qw_stack();
        let g = ZGrid::new(&s, 16);
        assert_eq!(g.len(), 32);
        assert_eq!(g.z()[0], 0.0);
        assert_eq!(g.z()[15], 0.25);
        assert_eq!(g.z()[16], 0.25);
        assert_eq!(g.z()[31], 0.75);
        assert_eq!(g.node_segment(16).eps, 0.5);
    }

    #[test]
    fn quadrature_and_interpolation() {
        let s = qw_stack();
        let g = ZGrid::new(&s, 24);
        let f: Vec<C64> = g.z().iter().map(|&z| C64::new((3.0 * z).cos(), z)).collect();
        let int = g.integrate(&f);
        let exact = C64::new((3.0 * 0.75f64).sin() / 3.0, 0.75 * 0.75 / 2.0);
        assert!((int - exact).norm() < 1e-14);
        let v = g.eval(&f, 0.6);
        assert!((v - C64::new((1.8f64).cos(), 0.6)).norm() < 1e-13);
        // periodic reduction
        let v = g.eval(&f, 0.6 + 3.0 * 0.75);
        assert!((v - C64::new((1.8f64).cos(), 0.6)).norm() < 1e-12);
        let d = g.differentiate(&f);
        for (i, &z) in g.z().iter().enumerate() {
            assert!((d[i] - C64::new(-3.0 * (3.0 * z).sin(), 1.0)).norm() < 1e-11);
        }
    }
}
