//! Six-component fields `Ψ = (E1, E2, E3, H1, H2, H3)` on a period grid, the
//! structure matrices `P`, `Γ1`, `Γ2`, `Γ3`, and the period inner product.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::ZGrid;
use crate::linalg::C64;

pub type Six = [C64; 6];

pub const ZERO6: Six = [C64 { re: 0.0, im: 0.0 }; 6];

#[inline]
pub fn gamma1(v: &Six) -> Six {
    let z = C64::new(0.0, 0.0);
    [z, v[5], -v[4], z, -v[2], v[1]]
}

#[inline]
pub fn gamma2(v: &Six) -> Six {
    let z = C64::new(0.0, 0.0);
    [-v[5], z, v[3], v[2], z, -v[0]]
}

#[inline]
pub fn gamma3(v: &Six) -> Six {
    let z = C64::new(0.0, 0.0);
    [v[4], -v[3], z, -v[1], v[0], z]
}

#[inline]
pub fn gamma(j: usize, v: &Six) -> Six {
    match j {
        1 => gamma1(v),
        2 => gamma2(v),
        3 => gamma3(v),
        _ => panic!("Γ index must be 1, 2 or 3"),
    }
}

#[inline]
pub fn apply_p(eps: f64, mu: f64, v: &Six) -> Six {
    [v[0] * eps, v[1] * eps, v[2] * eps, v[3] * mu, v[4] * mu, v[5] * mu]
}

/// Pointwise `<v, w> = Σ conj(v_j) w_j`.
#[inline]
pub fn dot6(v: &Six, w: &Six) -> C64 {
    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Sampled six-vector field. Components live at the grid nodes; `dc`
/// optionally carries exact `z`-derivatives.
#[derive(Debug, Clone)]
pub struct SixVectorField {
    pub grid: Arc<ZGrid>,
    pub c: [Vec<C64>; 6],
    pub dc: Option<[Vec<C64>; 6]>,
}

impl SixVectorField {
    pub fn zeros(grid: Arc<ZGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            c: std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]),
            dc: None,
        }
    }

    /// Samples `f(node index)`.
    pub fn from_nodes(grid: Arc<ZGrid>, f: impl Fn(usize) -> Six) -> Self {
        let n = grid.len();
        let mut c: [Vec<C64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n));
        for i in 0..n {
            let v = f(i);
            for k in 0..6 {
                c[k].push(v[k]);
            }
        }
        Self { grid, c, dc: None }
    }

    pub fn with_derivative(mut self, f: impl Fn(usize) -> Six) -> Self {
        let d = Self::from_nodes(self.grid.clone(), f);
        self.dc = Some(d.c);
        self
    }

    pub fn node(&self, i: usize) -> Six {
        std::array::from_fn(|k| self.c[k][i])
    }

    /// Exact derivative when present, per-layer spectral derivative otherwise.
    pub fn derivative(&self) -> [Vec<C64>; 6] {
        match &self.dc {
            Some(d) => d.clone(),
            None => std::array::from_fn(|k| self.grid.differentiate(&self.c[k])),
        }
    }

    pub fn derivative_node(&self, i: usize) -> Option<Six> {
        self.dc.as_ref().map(|d| std::array::from_fn(|k| d[k][i]))
    }

    /// Interpolated value at any `z` (periodic reduction).
    pub fn eval(&self, z: f64) -> Six {
        let (s, x) = self.grid.locate(z);
        std::array::from_fn(|k| self.grid.eval_segment(&self.c[k], s, x))
    }

    /// Interpolated derivative at any `z`.
    pub fn eval_derivative(&self, z: f64) -> Six {
        let (s, x) = self.grid.locate(z);
        let d = self.derivative();
        std::array::from_fn(|k| self.grid.eval_segment(&d[k], s, x))
    }

    fn map_nodes(&self, f: impl Fn(usize, &Six) -> Six) -> Self {
        let out = Self::from_nodes(self.grid.clone(), |i| f(i, &self.node(i)));
        match &self.dc {
            Some(d) => {
                let dd = Self::from_nodes(self.grid.clone(), |i| {
                    let v: Six = std::array::from_fn(|k| d[k][i]);
                    f(i, &v)
                });
                Self { dc: Some(dd.c), ..out }
            }
            None => out,
        }
    }

    /// `Γ_j v`.
    pub fn gamma(&self, j: usize) -> Self {
        self.map_nodes(|_, v| gamma(j, v))
    }

    /// `P v` with the normalized layer constants.
    pub fn apply_p(&self) -> Self {
        let g = self.grid.clone();
        self.map_nodes(move |i, v| {
            let s = g.node_segment(i);
            apply_p(s.eps, s.mu, v)
        })
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map_nodes(|_, v| std::array::from_fn(|k| v[k] * a))
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: C64, other: &Self) -> Result<Self> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let c = std::array::from_fn(|k| {
            self.c[k].iter().zip(&other.c[k]).map(|(x, y)| x + a * y).collect()
        });
        let dc = match (&self.dc, &other.dc) {
            (Some(d1), Some(d2)) => Some(std::array::from_fn(|k| {
                d1[k].iter().zip(&d2[k]).map(|(x, y)| x + a * y).collect()
            })),
            _ => None,
        };
        Ok(Self {
            grid: self.grid.clone(),
            c,
            dc,
        })
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.node(i).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `sqrt((v, v))`.
    pub fn l2_norm(&self) -> f64 {
        inner_product(self, self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }
}

/// `(v, w) = ∫_0^b <v, w> dz`, Gauss–Legendre per layer on the interpolants.
pub fn inner_product(v: &SixVectorField, w: &SixVectorField) -> Result<C64> {
    if !v.grid.compatible(&w.grid) {
        return Err(Error::GridMismatch);
    }
    let wts = v.grid.quadrature_weights();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..6 {
        let a = v.grid.to_quadrature(&v.c[k]);
        let b = v.grid.to_quadrature(&w.c[k]);
        acc += a
            .iter()
            .zip(&b)
            .zip(&wts)
            .map(|((x, y), q)| x.conj() * y * *q)
            .sum::<C64>();
    }
    Ok(acc)
}

/// `(v, P w)`.
pub fn inner_p(v: &SixVectorField, w: &SixVectorField) -> Result<C64> {
    inner_product(v, &w.apply_p())
}
