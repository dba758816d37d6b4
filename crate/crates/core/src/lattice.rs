//! Uniform, centred `(ξ, η)` lattices and their discrete Fourier transforms.
//!
//! Points sit at `ξ_j = (j - n/2) dξ`; wavenumbers use the signed FFT order
//! `p_m = 2π m/(n dξ)`, `m ∈ [-n/2, n/2)`. The synthesis convention is
//! `f(ξ_j) = (1/N) Σ_m f̂_m e^{i p_m ξ_j}`, so forward and inverse are exact
//! discrete inverses and `Σ|f|² = (1/N) Σ|f̂|²`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowLattice {
    pub n_xi: usize,
    pub n_eta: usize,
    pub d_xi: f64,
    pub d_eta: f64,
}

fn signed(m: usize, n: usize) -> i64 {
    if m < n.div_ceil(2) || n == 1 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl SlowLattice {
    /// Sizes must be powers of two (1 allowed for a degenerate axis).
    pub fn new(n_xi: usize, n_eta: usize, d_xi: f64, d_eta: f64) -> Result<Self> {
        for (n, name) in [(n_xi, "n_xi"), (n_eta, "n_eta")] {
            if !n.is_power_of_two() {
                return Err(Error::InvalidArgument(format!("{name} = {n} is not a power of two")));
            }
        }
        for (d, name) in [(d_xi, "d_xi"), (d_eta, "d_eta")] {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} = {d} must be positive")));
            }
        }
        Ok(Self { n_xi, n_eta, d_xi, d_eta })
    }

    /// One-dimensional lattice along `ξ`.
    pub fn line(n_xi: usize, d_xi: f64) -> Result<Self> {
        Self::new(n_xi, 1, d_xi, 1.0)
    }

    pub fn len(&self) -> usize {
        self.n_xi * self.n_eta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, `η` fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_eta + j
    }

    pub fn xi(&self, i: usize) -> f64 {
        (i as f64 - (self.n_xi / 2) as f64) * self.d_xi
    }

    pub fn eta(&self, j: usize) -> f64 {
        (j as f64 - (self.n_eta / 2) as f64) * self.d_eta
    }

    pub fn p_xi(&self, m: usize) -> f64 {
        2.0 * PI * signed(m, self.n_xi) as f64 / (self.n_xi as f64 * self.d_xi)
    }

    pub fn p_eta(&self, m: usize) -> f64 {
        if self.n_eta == 1 {
            return 0.0;
        }
        2.0 * PI * signed(m, self.n_eta) as f64 / (self.n_eta as f64 * self.d_eta)
    }

    /// Signed mode numbers `(m_ξ, m_η)` of flat index `k`.
    pub fn mode(&self, k: usize) -> (i64, i64) {
        (signed(k / self.n_eta, self.n_xi), signed(k % self.n_eta, self.n_eta))
    }

    /// Wavevector of flat spectral index `k`.
    pub fn wavevector(&self, k: usize) -> (f64, f64) {
        (self.p_xi(k / self.n_eta), self.p_eta(k % self.n_eta))
    }

    /// True for modes on the outer ring `|m| ≥ n/2 - 1` of a non-degenerate axis.
    pub fn on_boundary(&self, k: usize) -> bool {
        let (a, b) = self.mode(k);
        let edge = |m: i64, n: usize| n > 2 && m.unsigned_abs() as usize + 1 >= n / 2;
        edge(a, self.n_xi) || edge(b, self.n_eta)
    }

    /// Samples `f(ξ, η)` at the lattice points.
    pub fn sample(&self, f: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n_xi {
            for j in 0..self.n_eta {
                out.push(f(self.xi(i), self.eta(j)));
            }
        }
        out
    }

    /// Samples `g(p_ξ, p_η)` on the spectral lattice.
    pub fn sample_spectrum(&self, g: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        (0..self.len())
            .map(|k| {
                let (a, b) = self.wavevector(k);
                g(a, b)
            })
            .collect()
    }
}

/// Planned 2D transforms for one lattice.
#[derive(Clone)]
pub struct Fft2 {
    lattice: SlowLattice,
    fwd_xi: Arc<dyn Fft<f64>>,
    inv_xi: Arc<dyn Fft<f64>>,
    fwd_eta: Arc<dyn Fft<f64>>,
    inv_eta: Arc<dyn Fft<f64>>,
    /// `(-1)^{m_ξ + m_η}` from the centred point origin.
    sign: Vec<f64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("lattice", &self.lattice).finish()
    }
}

impl Fft2 {
    pub fn new(lattice: SlowLattice) -> Self {
        let mut planner = FftPlanner::new();
        let sign = (0..lattice.len())
            .map(|k| {
                let i = k / lattice.n_eta;
                let j = k % lattice.n_eta;
                // e^{-i p_m (n/2) d} = (-1)^m in storage order for even n
                let s = if lattice.n_xi > 1 { i } else { 0 } + if lattice.n_eta > 1 { j } else { 0 };
                if s % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        Self {
            fwd_xi: planner.plan_fft_forward(lattice.n_xi),
            inv_xi: planner.plan_fft_inverse(lattice.n_xi),
            fwd_eta: planner.plan_fft_forward(lattice.n_eta),
            inv_eta: planner.plan_fft_inverse(lattice.n_eta),
            lattice,
            sign,
        }
    }

    pub fn lattice(&self) -> &SlowLattice {
        &self.lattice
    }

    fn transform(&self, data: &mut [C64], xi: &Arc<dyn Fft<f64>>, eta: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.lattice.n_xi, self.lattice.n_eta);
        if ny > 1 {
            for row in data.chunks_exact_mut(ny) {
                eta.process(row);
            }
        }
        if nx > 1 {
            let mut col = vec![C64::new(0.0, 0.0); nx];
            for j in 0..ny {
                for i in 0..nx {
                    col[i] = data[i * ny + j];
                }
                xi.process(&mut col);
                for i in 0..nx {
                    data[i * ny + j] = col[i];
                }
            }
        }
    }

    /// `f̂_m = Σ_j f(ξ_j) e^{-i p_m ξ_j}`.
    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut d = values.to_vec();
        self.transform(&mut d, &self.fwd_xi, &self.fwd_eta);
        for (v, s) in d.iter_mut().zip(&self.sign) {
            *v *= *s;
        }
        d
    }

    /// `f(ξ_j) = (1/N) Σ_m f̂_m e^{i p_m ξ_j}`.
    pub fn inverse(&self, spectrum: &[C64]) -> Vec<C64> {
        let n = self.lattice.len() as f64;
        let mut d: Vec<C64> = spectrum.iter().zip(&self.sign).map(|(v, s)| v * (*s / n)).collect();
        self.transform(&mut d, &self.inv_xi, &self.inv_eta);
        d
    }
}

/// Direct `O(N²)` synthesis, used as an oracle for [`Fft2::inverse`].
pub fn direct_inverse(lattice: &SlowLattice, spectrum: &[C64]) -> Vec<C64> {
    let n = lattice.len() as f64;
    lattice.sample(|x, y| {
        spectrum
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (a, b) = lattice.wavevector(k);
                v * C64::from_polar(1.0, a * x + b * y)
            })
            .sum::<C64>()
            / n
    })
}
