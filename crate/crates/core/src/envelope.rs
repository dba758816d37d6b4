//! Constant-coefficient envelope equations near a stationary point.
//!
//! With `τ1 = ∂ξα1 - ∂ηα2`, `τ2 = ∂ηα1 + ∂ξα2` the system
//!
//! ```text
//! ω̈11^H ∂ξτ1 + ω̈11^E ∂ητ2 + ω̈33 ∂ζ²α1 + (2δω/c) α1 = 0
//! ω̈11^E ∂ξτ2 - ω̈11^H ∂ητ1 + ω̈33 ∂ζ²α2 + (2δω/c) α2 = 0
//! ```
//!
//! splits into two scalar equations `ω̈11^f Δτ + ω̈33 ∂ζ²τ + (2δω/c) τ = 0`,
//! solved by plane waves `e^{i(p_ξ ξ + p_η η) ∓ i p_ζ ζ}`. Every solution is
//! held in modal form ([`ModalEnvelope`]): per envelope, per branch (`H` from
//! `τ1`, `E` from `τ2`) and per sign, one spectrum on the slow lattice. Fields
//! and any of their derivatives are synthesized exactly from it.

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{PointKind, StationaryPoint};
use crate::error::{Error, Result};
use crate::lattice::{Fft2, SlowLattice};
use crate::linalg::{C64, I};

/// Largest scale ratio accepted by the asymptotic construction.
pub const CHI_MAX: f64 = 0.2;
/// Relative size allowed for the spectral zero mode of `τ̂`.
pub const ZERO_MODE_TOLERANCE: f64 = 1e-12;
/// Relative size allowed on the outer spectral ring.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    H,
    E,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::H, Branch::E];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCoefficients {
    pub w11_h: f64,
    pub w11_e: f64,
    pub w33: f64,
    pub delta_omega: f64,
    /// Light speed of the average medium.
    pub c: f64,
    pub chi: f64,
}

impl EnvelopeCoefficients {
    pub fn new(w11_h: f64, w11_e: f64, w33: f64, delta_omega: f64, c: f64, chi: f64) -> Result<Self> {
        let all = [w11_h, w11_e, w33, delta_omega, c, chi];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("envelope coefficients".into()));
        }
        if w11_h <= 0.0 || w11_e <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lateral curvatures must be positive, got {w11_h}, {w11_e}"
            )));
        }
        if w33 == 0.0 {
            return Err(Error::FlatBand { value: w33 });
        }
        if c <= 0.0 {
            return Err(Error::InvalidArgument(format!("c = {c} must be positive")));
        }
        if !(chi > 0.0 && chi <= CHI_MAX) {
            return Err(Error::InvalidArgument(format!("chi = {chi} outside (0, {CHI_MAX}]")));
        }
        Ok(Self {
            w11_h,
            w11_e,
            w33,
            delta_omega,
            c,
            chi,
        })
    }

    /// Coefficients taken from a stationary point's curvatures.
    pub fn from_stationary(sp: &StationaryPoint, delta_omega: f64, chi: f64) -> Result<Self> {
        Self::new(sp.w11_h, sp.w11_e, sp.w33, delta_omega, sp.light_speed, chi)
    }

    pub fn w11(&self, branch: Branch) -> f64 {
        match branch {
            Branch::H => self.w11_h,
            Branch::E => self.w11_e,
        }
    }

    /// `σ = sqrt(ω̈11/|ω̈33|)`, the slope of the characteristics.
    pub fn sigma(&self, branch: Branch) -> f64 {
        (self.w11(branch) / self.w33.abs()).sqrt()
    }

    /// Whether the coefficients match a stationary point to 1e-12 relative.
    pub fn matches(&self, sp: &StationaryPoint) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        let pairs = [
            ("w11_h", self.w11_h, sp.w11_h),
            ("w11_e", self.w11_e, sp.w11_e),
            ("w33", self.w33, sp.w33),
            ("c", self.c, sp.light_speed),
        ];
        for (name, a, b) in pairs {
            if !close(a, b) {
                return Err(Error::CoefficientMismatch(format!("{name}: {a} vs {b}")));
            }
        }
        Ok(())
    }
}

pub fn classify(coeffs: &EnvelopeCoefficients) -> Result<PointKind> {
    if coeffs.w33 == 0.0 {
        Err(Error::FlatBand { value: 0.0 })
    } else if coeffs.w33 < 0.0 {
        Ok(PointKind::Hyperbolic)
    } else {
        Ok(PointKind::Elliptic)
    }
}

/// `p_ζ` of a branch: `sqrt(r)` for `r ≥ 0`, `-i sqrt(-r)` otherwise, so
/// `e^{-i p_ζ ζ}` decays for `ζ > 0`.
pub fn dispersion_pzeta(coeffs: &EnvelopeCoefficients, branch: Branch, p_xi: f64, p_eta: f64) -> C64 {
    let r = -(coeffs.w11(branch) / coeffs.w33) * (p_xi * p_xi + p_eta * p_eta)
        + 2.0 * coeffs.delta_omega / (coeffs.c * coeffs.w33);
    if r >= 0.0 {
        C64::new(r.sqrt(), 0.0)
    } else {
        C64::new(0.0, -(-r).sqrt())
    }
}

/// The four spectra `τ̂_j^±` on a slow lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub lattice: SlowLattice,
    pub tau_plus_1: Vec<C64>,
    pub tau_minus_1: Vec<C64>,
    pub tau_plus_2: Vec<C64>,
    pub tau_minus_2: Vec<C64>,
}

impl SpectralData {
    pub fn new(
        lattice: SlowLattice,
        tau_plus_1: Vec<C64>,
        tau_minus_1: Vec<C64>,
        tau_plus_2: Vec<C64>,
        tau_minus_2: Vec<C64>,
    ) -> Result<Self> {
        for v in [&tau_plus_1, &tau_minus_1, &tau_plus_2, &tau_minus_2] {
            if v.len() != lattice.len() {
                return Err(Error::InvalidEnvelope(format!(
                    "spectrum has {} entries, lattice {}",
                    v.len(),
                    lattice.len()
                )));
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFiniteInput("spectral data".into()));
            }
        }
        Ok(Self {
            lattice,
            tau_plus_1,
            tau_minus_1,
            tau_plus_2,
            tau_minus_2,
        })
    }

    fn arrays(&self) -> [&Vec<C64>; 4] {
        [&self.tau_plus_1, &self.tau_minus_1, &self.tau_plus_2, &self.tau_minus_2]
    }

    fn max_abs(&self) -> f64 {
        self.arrays()
            .iter()
            .flat_map(|v| v.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Zero-mode and boundary-decay guards.
    pub fn check(&self) -> Result<()> {
        let m = self.max_abs();
        if m == 0.0 {
            return Ok(());
        }
        let zero = self.arrays().iter().map(|v| v[0].norm()).fold(0.0, f64::max) / m;
        if zero > ZERO_MODE_TOLERANCE {
            return Err(Error::ZeroModeViolation { value: zero });
        }
        self.check_boundary()
    }

    /// Only the boundary-decay guard.
    pub fn check_boundary(&self) -> Result<()> {
        let m = self.max_abs();
        if m == 0.0 {
            return Ok(());
        }
        let mut ring: f64 = 0.0;
        for k in (0..self.lattice.len()).filter(|&k| self.lattice.on_boundary(k)) {
            for v in self.arrays() {
                ring = ring.max(v[k].norm());
            }
        }
        if ring / m > BOUNDARY_TOLERANCE {
            return Err(Error::SpectralLeakage { value: ring / m });
        }
        Ok(())
    }

    /// Gaussian ring `exp(-(|p| - p0)²/(2 w²))` in both `τ̂1^+` and `τ̂2^+`
    /// (scaled by `a1`, `a2`), zero mode removed.
    pub fn gaussian_ring(lattice: SlowLattice, p0: f64, width: f64, a1: C64, a2: C64) -> Result<Self> {
        let g = lattice.sample_spectrum(|a, b| {
            let r = (a * a + b * b).sqrt();
            C64::new((-(r - p0).powi(2) / (2.0 * width * width)).exp(), 0.0)
        });
        let mut t1: Vec<C64> = g.iter().map(|v| v * a1).collect();
        let mut t2: Vec<C64> = g.iter().map(|v| v * a2).collect();
        t1[0] = C64::new(0.0, 0.0);
        t2[0] = C64::new(0.0, 0.0);
        let z = vec![C64::new(0.0, 0.0); lattice.len()];
        Self::new(lattice, t1, z.clone(), t2, z)
    }
}

/// Modal representation `α_j = Σ_{f,±} A_j^{f,±} e^{i p·ρ ∓ i p_ζ^f ζ}`.
#[derive(Debug, Clone)]
pub struct ModalEnvelope {
    pub lattice: SlowLattice,
    pub coeffs: EnvelopeCoefficients,
    /// `amp[j][branch][sign]`, sign 0 is `+` (`e^{-i p_ζ ζ}`).
    pub amp: [[[Vec<C64>; 2]; 2]; 2],
    /// `p_ζ` per branch at every spectral point.
    pub p_zeta: [Vec<C64>; 2],
    fft: Fft2,
}

/// Derivative orders `(∂ξ, ∂η, ∂ζ)`.
pub type Orders = (u32, u32, u32);

impl ModalEnvelope {
    fn empty(lattice: SlowLattice, coeffs: EnvelopeCoefficients) -> Self {
        let zero = vec![C64::new(0.0, 0.0); lattice.len()];
        let p_zeta = Branch::BOTH.map(|b| {
            lattice.sample_spectrum(|a, e| dispersion_pzeta(&coeffs, b, a, e))
        });
        Self {
            lattice,
            coeffs,
            amp: std::array::from_fn(|_| std::array::from_fn(|_| [zero.clone(), zero.clone()])),
            p_zeta,
            fft: Fft2::new(lattice),
        }
    }

    /// From `τ̂` spectra; see [`recover_alpha`] for the mapping.
    pub fn from_tau(coeffs: &EnvelopeCoefficients, data: &SpectralData) -> Result<Self> {
        data.check()?;
        let mut m = Self::empty(data.lattice, *coeffs);
        let lat = data.lattice;
        for k in 1..lat.len() {
            let (a, b) = lat.wavevector(k);
            let p2 = a * a + b * b;
            if p2 == 0.0 {
                continue;
            }
            for (s, (t1, t2)) in [(0, (&data.tau_plus_1, &data.tau_plus_2)), (1, (&data.tau_minus_1, &data.tau_minus_2))] {
                m.amp[0][0][s][k] = -I * a * t1[k] / p2;
                m.amp[1][0][s][k] = I * b * t1[k] / p2;
                m.amp[0][1][s][k] = -I * b * t2[k] / p2;
                m.amp[1][1][s][k] = -I * a * t2[k] / p2;
            }
        }
        Ok(m)
    }

    /// `η`-independent envelopes from `α̂_j^±` directly: `α1` rides the `H`
    /// branch and `α2` the `E` branch.
    pub fn from_separated(coeffs: &EnvelopeCoefficients, lattice: SlowLattice, spectra: [[Vec<C64>; 2]; 2]) -> Result<Self> {
        if lattice.n_eta != 1 {
            return Err(Error::InvalidEnvelope("separated solver needs an η-independent lattice".into()));
        }
        let mut m = Self::empty(lattice, *coeffs);
        for (j, sp) in spectra.into_iter().enumerate() {
            for (s, v) in sp.into_iter().enumerate() {
                if v.len() != lattice.len() {
                    return Err(Error::InvalidEnvelope("spectrum length does not match lattice".into()));
                }
                m.amp[j][j][s] = v;
            }
        }
        let data = SpectralData::new(
            lattice,
            m.amp[0][0][0].clone(),
            m.amp[0][0][1].clone(),
            m.amp[1][1][0].clone(),
            m.amp[1][1][1].clone(),
        )?;
        data.check_boundary()?;
        Ok(m)
    }

    /// Spectrum of `∂ξ^a ∂η^b ∂ζ^c α_j` at slow height `zeta`.
    pub fn spectrum(&self, j: usize, zeta: f64, (a, b, c): Orders) -> Vec<C64> {
        let lat = &self.lattice;
        (0..lat.len())
            .map(|k| {
                let (px, py) = lat.wavevector(k);
                let lateral = (I * px).powu(a) * (I * py).powu(b);
                let mut acc = C64::new(0.0, 0.0);
                for br in 0..2 {
                    let pz = self.p_zeta[br][k];
                    for (s, sgn) in [(0, -1.0), (1, 1.0)] {
                        let v = self.amp[j][br][s][k];
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let e = (I * pz * (sgn * zeta)).exp();
                        acc += v * (I * pz * sgn).powu(c) * e;
                    }
                }
                acc * lateral
            })
            .collect()
    }

    /// Several derivatives of both envelopes at one `ζ`, sharing the
    /// exponentials; `out[o][j]` is orders `orders[o]` of `α_{j+1}`.
    pub fn field_set(&self, zeta: f64, orders: &[Orders]) -> Vec<[Vec<C64>; 2]> {
        let lat = &self.lattice;
        let n = lat.len();
        // e^{∓ i p_ζ ζ} per branch and sign
        let ex: [[Vec<C64>; 2]; 2] = std::array::from_fn(|br| {
            [-1.0, 1.0].map(|sgn| (0..n).map(|k| (I * self.p_zeta[br][k] * (sgn * zeta)).exp()).collect())
        });
        orders
            .iter()
            .map(|&(a, b, c)| {
                std::array::from_fn(|j| {
                    let spec: Vec<C64> = (0..n)
                        .map(|k| {
                            let (px, py) = lat.wavevector(k);
                            let mut acc = C64::new(0.0, 0.0);
                            for br in 0..2 {
                                for (s, sgn) in [(0, -1.0), (1, 1.0)] {
                                    let v = self.amp[j][br][s][k];
                                    if v != C64::new(0.0, 0.0) {
                                        acc += v * (I * self.p_zeta[br][k] * sgn).powu(c) * ex[br][s][k];
                                    }
                                }
                            }
                            acc * (I * px).powu(a) * (I * py).powu(b)
                        })
                        .collect();
                    self.fft.inverse(&spec)
                })
            })
            .collect()
    }

    /// `∂ξ^a ∂η^b ∂ζ^c α_j` on the lattice points at `zeta`.
    pub fn field(&self, j: usize, zeta: f64, orders: Orders) -> Vec<C64> {
        self.fft.inverse(&self.spectrum(j, zeta, orders))
    }

    /// `τ̂1 = i p_ξ α̂1 - i p_η α̂2`, `τ̂2 = i p_η α̂1 + i p_ξ α̂2` with extra
    /// `∂ζ^c`.
    pub fn tau_spectrum(&self, zeta: f64, c: u32) -> [Vec<C64>; 2] {
        let a1 = self.spectrum(0, zeta, (0, 0, c));
        let a2 = self.spectrum(1, zeta, (0, 0, c));
        let lat = &self.lattice;
        let mut t1 = Vec::with_capacity(lat.len());
        let mut t2 = Vec::with_capacity(lat.len());
        for k in 0..lat.len() {
            let (px, py) = lat.wavevector(k);
            t1.push(I * px * a1[k] - I * py * a2[k]);
            t2.push(I * py * a1[k] + I * px * a2[k]);
        }
        [t1, t2]
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeSolution {
    pub lattice: SlowLattice,
    pub zeta: Vec<f64>,
    /// Arrays shaped `(n_ζ, n_ξ, n_η)`.
    pub alpha1: Array3<C64>,
    pub alpha2: Array3<C64>,
    pub tau1: Array3<C64>,
    pub tau2: Array3<C64>,
    pub coeffs: EnvelopeCoefficients,
    pub modal: ModalEnvelope,
}

fn stack_slices(lattice: &SlowLattice, slices: Vec<Vec<C64>>) -> Array3<C64> {
    let nz = slices.len();
    let flat: Vec<C64> = slices.into_iter().flatten().collect();
    Array3::from_shape_vec((nz, lattice.n_xi, lattice.n_eta), flat).expect("slice sizes match lattice")
}

fn check_zeta(zeta: &[f64]) -> Result<()> {
    if zeta.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFiniteInput("zeta values".into()));
    }
    Ok(())
}

/// `τ1`, `τ2` synthesized directly from `τ̂_j^± e^{∓i p_jζ ζ}`.
pub fn solve_tau_3d(
    coeffs: &EnvelopeCoefficients,
    data: &SpectralData,
    zeta: &[f64],
) -> Result<(Array3<C64>, Array3<C64>)> {
    data.check()?;
    check_zeta(zeta)?;
    let lat = data.lattice;
    let fft = Fft2::new(lat);
    let pz: [Vec<C64>; 2] = Branch::BOTH.map(|b| lat.sample_spectrum(|a, e| dispersion_pzeta(coeffs, b, a, e)));
    let slice = |z: f64, plus: &[C64], minus: &[C64], p: &[C64]| -> Vec<C64> {
        let spec: Vec<C64> = (0..lat.len())
            .map(|k| plus[k] * (-I * p[k] * z).exp() + minus[k] * (I * p[k] * z).exp())
            .collect();
        fft.inverse(&spec)
    };
    let t1: Vec<Vec<C64>> = zeta
        .par_iter()
        .map(|&z| slice(z, &data.tau_plus_1, &data.tau_minus_1, &pz[0]))
        .collect();
    let t2: Vec<Vec<C64>> = zeta
        .par_iter()
        .map(|&z| slice(z, &data.tau_plus_2, &data.tau_minus_2, &pz[1]))
        .collect();
    Ok((stack_slices(&lat, t1), stack_slices(&lat, t2)))
}

/// `α̂1 = -i(p_ξ τ̂1 + p_η τ̂2)/p²`, `α̂2 = -i(p_ξ τ̂2 - p_η τ̂1)/p²` per branch
/// and sign, zero mode set to zero, synthesized at each `ζ`.
pub fn recover_alpha(
    coeffs: &EnvelopeCoefficients,
    data: &SpectralData,
    zeta: &[f64],
) -> Result<(Array3<C64>, Array3<C64>)> {
    check_zeta(zeta)?;
    let modal = ModalEnvelope::from_tau(coeffs, data)?;
    Ok(synthesize_alpha(&modal, zeta))
}

fn synthesize_alpha(modal: &ModalEnvelope, zeta: &[f64]) -> (Array3<C64>, Array3<C64>) {
    let lat = modal.lattice;
    let a = |j| -> Vec<Vec<C64>> { zeta.par_iter().map(|&z| modal.field(j, z, (0, 0, 0))).collect() };
    (stack_slices(&lat, a(0)), stack_slices(&lat, a(1)))
}

fn synthesize_tau(modal: &ModalEnvelope, zeta: &[f64]) -> (Array3<C64>, Array3<C64>) {
    let lat = modal.lattice;
    let pairs: Vec<[Vec<C64>; 2]> = zeta
        .par_iter()
        .map(|&z| modal.tau_spectrum(z, 0).map(|s| modal.fft().inverse(&s)))
        .collect();
    let (t1, t2): (Vec<_>, Vec<_>) = pairs.into_iter().map(|[a, b]| (a, b)).unzip();
    (stack_slices(&lat, t1), stack_slices(&lat, t2))
}

/// Full solution from `τ̂` data: `τ` directly, `α` by recovery.
pub fn solve_envelope(coeffs: &EnvelopeCoefficients, data: &SpectralData, zeta: &[f64]) -> Result<EnvelopeSolution> {
    let (tau1, tau2) = solve_tau_3d(coeffs, data, zeta)?;
    let modal = ModalEnvelope::from_tau(coeffs, data)?;
    let (alpha1, alpha2) = synthesize_alpha(&modal, zeta);
    Ok(EnvelopeSolution {
        lattice: data.lattice,
        zeta: zeta.to_vec(),
        alpha1,
        alpha2,
        tau1,
        tau2,
        coeffs: *coeffs,
        modal,
    })
}

/// `η`-independent solution; `spectra[j] = [α̂_j^+, α̂_j^-]`.
pub fn solve_2d_separated(
    coeffs: &EnvelopeCoefficients,
    spectra: [[Vec<C64>; 2]; 2],
    lattice: SlowLattice,
    zeta: &[f64],
) -> Result<EnvelopeSolution> {
    check_zeta(zeta)?;
    let modal = ModalEnvelope::from_separated(coeffs, lattice, spectra)?;
    let (alpha1, alpha2) = synthesize_alpha(&modal, zeta);
    let (tau1, tau2) = synthesize_tau(&modal, zeta);
    Ok(EnvelopeSolution {
        lattice,
        zeta: zeta.to_vec(),
        alpha1,
        alpha2,
        tau1,
        tau2,
        coeffs: *coeffs,
        modal,
    })
}

/// Splits initial profiles `F` (right mover) and `G` (left mover) into the
/// `±` spectra of a hyperbolic, zero-detuning branch: for `p > 0` the `+`
/// spectrum carries `F̂` and `-` carries `Ĝ`; for `p < 0` the roles swap. The
/// zero mode goes to `+`.
pub fn dalembert_spectra(lattice: &SlowLattice, f: &[C64], g: &[C64]) -> [Vec<C64>; 2] {
    let fft = Fft2::new(*lattice);
    let fh = fft.forward(f);
    let gh = fft.forward(g);
    let mut plus = Vec::with_capacity(lattice.len());
    let mut minus = Vec::with_capacity(lattice.len());
    for k in 0..lattice.len() {
        let (p, _) = lattice.wavevector(k);
        if p > 0.0 {
            plus.push(fh[k]);
            minus.push(gh[k]);
        } else if p < 0.0 {
            plus.push(gh[k]);
            minus.push(fh[k]);
        } else {
            plus.push(fh[k] + gh[k]);
            minus.push(C64::new(0.0, 0.0));
        }
    }
    [plus, minus]
}

/// `α(ξ, ζ) = F(ξ - σζ) + G(ξ + σζ)` evaluated directly from the profile
/// functions, wrapped periodically onto the lattice window.
pub fn dalembert_propagate(
    coeffs: &EnvelopeCoefficients,
    branch: Branch,
    f: &dyn Fn(f64) -> C64,
    g: &dyn Fn(f64) -> C64,
    lattice: &SlowLattice,
    zeta: f64,
) -> Result<Vec<C64>> {
    if coeffs.w33 >= 0.0 {
        return Err(Error::NotHyperbolic { w33: coeffs.w33 });
    }
    if coeffs.delta_omega != 0.0 {
        return Err(Error::NonzeroDetuning {
            delta_omega: coeffs.delta_omega,
        });
    }
    let sigma = coeffs.sigma(branch);
    let period = lattice.n_xi as f64 * lattice.d_xi;
    let lo = lattice.xi(0);
    let wrap = |x: f64| lo + (x - lo).rem_euclid(period);
    Ok((0..lattice.n_xi)
        .map(|i| {
            let x = lattice.xi(i);
            f(wrap(x - sigma * zeta)) + g(wrap(x + sigma * zeta))
        })
        .collect())
}

/// Beam angles `arctan sqrt(ω̈11^f/|ω̈33|)` to the stack normal, `(φ^H, φ^E)`.
pub fn beam_angles(coeffs: &EnvelopeCoefficients) -> Result<(f64, f64)> {
    if coeffs.w33 >= 0.0 {
        return Err(Error::NotHyperbolic { w33: coeffs.w33 });
    }
    Ok((coeffs.sigma(Branch::H).atan(), coeffs.sigma(Branch::E).atan()))
}

fn rel(res: &[C64], scale: f64) -> f64 {
    let r: f64 = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Residual checks of an envelope solution, all relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResiduals {
    pub tau_pde: f64,
    pub alpha_pde: f64,
    pub laplacian: f64,
}

impl EnvelopeSolution {
    /// PDE residuals with lateral derivatives by FFT of the synthesized
    /// slices and exact `ζ`-derivatives of the exponentials.
    pub fn residuals(&self) -> EnvelopeResiduals {
        let m = &self.modal;
        let lat = self.lattice;
        let fft = m.fft();
        let cf = &self.coeffs;
        let shift = 2.0 * cf.delta_omega / cf.c;
        let lap = |v: &[C64]| -> Vec<C64> {
            let mut s = fft.forward(v);
            for (k, x) in s.iter_mut().enumerate() {
                let (a, b) = lat.wavevector(k);
                *x *= -(a * a + b * b);
            }
            fft.inverse(&s)
        };
        let grad = |v: &[C64], dir: usize| -> Vec<C64> {
            let mut s = fft.forward(v);
            for (k, x) in s.iter_mut().enumerate() {
                let (a, b) = lat.wavevector(k);
                *x *= I * if dir == 0 { a } else { b };
            }
            fft.inverse(&s)
        };
        let per_slice: Vec<[f64; 3]> = self
            .zeta
            .par_iter()
            .enumerate()
            .map(|(iz, &z)| {
                let slice = |arr: &Array3<C64>| -> Vec<C64> {
                    arr.index_axis(ndarray::Axis(0), iz).iter().copied().collect()
                };
                let (t1, t2) = (slice(&self.tau1), slice(&self.tau2));
                let (a1, a2) = (slice(&self.alpha1), slice(&self.alpha2));
                let [t1zz, t2zz] = m.tau_spectrum(z, 2).map(|s| fft.inverse(&s));
                let a1zz = m.field(0, z, (0, 0, 2));
                let a2zz = m.field(1, z, (0, 0, 2));
                let mut worst = [0.0f64; 3];
                // τ equations
                for (t, tzz, w) in [(&t1, &t1zz, cf.w11_h), (&t2, &t2zz, cf.w11_e)] {
                    let lt = lap(t);
                    let res: Vec<C64> = (0..lat.len()).map(|k| lt[k] * w + tzz[k] * cf.w33 + t[k] * shift).collect();
                    let scale = l2(&lt) * w + l2(tzz) * cf.w33.abs() + l2(t) * shift.abs();
                    worst[0] = worst[0].max(rel(&res, scale));
                }
                // α system
                let (t1x, t1y) = (grad(&t1, 0), grad(&t1, 1));
                let (t2x, t2y) = (grad(&t2, 0), grad(&t2, 1));
                let r1: Vec<C64> = (0..lat.len())
                    .map(|k| t1x[k] * cf.w11_h + t2y[k] * cf.w11_e + a1zz[k] * cf.w33 + a1[k] * shift)
                    .collect();
                let r2: Vec<C64> = (0..lat.len())
                    .map(|k| t2x[k] * cf.w11_e - t1y[k] * cf.w11_h + a2zz[k] * cf.w33 + a2[k] * shift)
                    .collect();
                let s1 = l2(&t1x) * cf.w11_h + l2(&t2y) * cf.w11_e + l2(&a1zz) * cf.w33.abs() + l2(&a1) * shift.abs();
                let s2 = l2(&t2x) * cf.w11_e + l2(&t1y) * cf.w11_h + l2(&a2zz) * cf.w33.abs() + l2(&a2) * shift.abs();
                worst[1] = rel(&r1, s1).max(rel(&r2, s2));
                // Δα1 = ∂ξτ1 + ∂ητ2, Δα2 = ∂ξτ2 - ∂ητ1
                let (l1, l2a) = (lap(&a1), lap(&a2));
                let d1: Vec<C64> = (0..lat.len()).map(|k| l1[k] - t1x[k] - t2y[k]).collect();
                let d2: Vec<C64> = (0..lat.len()).map(|k| l2a[k] - t2x[k] + t1y[k]).collect();
                worst[2] = rel(&d1, l2(&l1) + l2(&t1x) + l2(&t2y)).max(rel(&d2, l2(&l2a) + l2(&t2x) + l2(&t1y)));
                worst
            })
            .collect();
        let mx = |i: usize| per_slice.iter().map(|w| w[i]).fold(0.0, f64::max);
        EnvelopeResiduals {
            tau_pde: mx(0),
            alpha_pde: mx(1),
            laplacian: mx(2),
        }
    }

    pub fn alpha_slice(&self, j: usize, iz: usize) -> Vec<C64> {
        let arr = if j == 0 { &self.alpha1 } else { &self.alpha2 };
        arr.index_axis(ndarray::Axis(0), iz).iter().copied().collect()
    }
}

/// `α̂` from the polar form `α̂1 = -i(cos θ τ̂1 + sin θ τ̂2)/|p|`,
/// `α̂2 = -i(cos θ τ̂2 - sin θ τ̂1)/|p|`, synthesized by a direct sum; an
/// oracle for the FFT path at `ζ = 0`.
pub fn polar_alpha_oracle(data: &SpectralData) -> (Vec<C64>, Vec<C64>) {
    let lat = data.lattice;
    let mut s1 = vec![C64::new(0.0, 0.0); lat.len()];
    let mut s2 = vec![C64::new(0.0, 0.0); lat.len()];
    for k in 1..lat.len() {
        let (a, b) = lat.wavevector(k);
        let r = a.hypot(b);
        let th = b.atan2(a);
        let t1 = data.tau_plus_1[k] + data.tau_minus_1[k];
        let t2 = data.tau_plus_2[k] + data.tau_minus_2[k];
        s1[k] = -I * (th.cos() * t1 + th.sin() * t2) / r;
        s2[k] = -I * (th.cos() * t2 - th.sin() * t1) / r;
    }
    (
        crate::lattice::direct_inverse(&lat, &s1),
        crate::lattice::direct_inverse(&lat, &s2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hyper(dw: f64) -> EnvelopeCoefficients {
        EnvelopeCoefficients::new(0.8, 0.5, -0.6, dw, 1.0, 0.05).unwrap()
    }

    #[test]
    fn classification() {
        let mut c = hyper(0.0);
        c.w33 = -0.5;
        assert_eq!(classify(&c).unwrap(), PointKind::Hyperbolic);
        c.w33 = 0.5;
        assert_eq!(classify(&c).unwrap(), PointKind::Elliptic);
        c.w33 = 0.0;
        assert!(matches!(classify(&c), Err(Error::FlatBand { .. })));
        assert!(EnvelopeCoefficients::new(1.0, 1.0, -1.0, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn pzeta_branches() {
        let c = EnvelopeCoefficients::new(1.0, 1.0, 0.5, 0.25, 1.0, 0.1).unwrap();
        assert!((dispersion_pzeta(&c, Branch::H, 0.0, 0.0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        let c0 = EnvelopeCoefficients::new(1.0, 1.0, 0.5, 0.0, 1.0, 0.1).unwrap();
        assert_eq!(dispersion_pzeta(&c0, Branch::H, 0.0, 0.0), C64::new(0.0, 0.0));
        let p = dispersion_pzeta(&c, Branch::H, 3.0, 0.0);
        assert!(p.re == 0.0 && p.im < 0.0);
    }

    #[test]
    fn beam_angle_values() {
        let c = EnvelopeCoefficients::new(1.0, 3.0, -1.0, 0.0, 1.0, 0.1).unwrap();
        let (h, e) = beam_angles(&c).unwrap();
        assert!((h - PI / 4.0).abs() < 1e-15);
        assert!((e - PI / 3.0).abs() < 1e-15);
        let el = EnvelopeCoefficients::new(1.0, 3.0, 1.0, 0.0, 1.0, 0.1).unwrap();
        assert!(matches!(beam_angles(&el), Err(Error::NotHyperbolic { .. })));
    }

    #[test]
    fn delta_mode_recovery() {
        let lat = SlowLattice::new(16, 16, 2.0 * PI / 16.0, 2.0 * PI / 16.0).unwrap();
        let c = hyper(0.0);
        let z = vec![C64::new(0.0, 0.0); lat.len()];
        // p_ξ = 1 lives at storage index (1, 0)
        let mut t1 = z.clone();
        t1[lat.index(1, 0)] = C64::new(1.0, 0.0);
        let d = SpectralData::new(lat, t1, z.clone(), z.clone(), z.clone()).unwrap();
        let m = ModalEnvelope::from_tau(&c, &d).unwrap();
        let a1 = m.spectrum(0, 0.0, (0, 0, 0));
        let a2 = m.spectrum(1, 0.0, (0, 0, 0));
        assert!((a1[lat.index(1, 0)] - (-I)).norm() < 1e-15);
        assert!(a2.iter().all(|v| v.norm() < 1e-15));
        let mut t1 = z.clone();
        t1[lat.index(0, 1)] = C64::new(1.0, 0.0);
        let d = SpectralData::new(lat, t1, z.clone(), z.clone(), z.clone()).unwrap();
        let m = ModalEnvelope::from_tau(&c, &d).unwrap();
        let a1 = m.spectrum(0, 0.0, (0, 0, 0));
        let a2 = m.spectrum(1, 0.0, (0, 0, 0));
        assert!(a1.iter().all(|v| v.norm() < 1e-15));
        assert!((a2[lat.index(0, 1)] - I).norm() < 1e-15);
    }

    #[test]
    fn zero_mode_guard() {
        let lat = SlowLattice::new(8, 8, 1.0, 1.0).unwrap();
        let mut t = vec![C64::new(0.0, 0.0); lat.len()];
        t[0] = C64::new(1.0, 0.0);
        let z = vec![C64::new(0.0, 0.0); lat.len()];
        let d = SpectralData::new(lat, t, z.clone(), z.clone(), z).unwrap();
        assert!(matches!(d.check(), Err(Error::ZeroModeViolation { .. })));
    }

    #[test]
    fn ring_spectrum_residuals() {
        let lat = SlowLattice::new(32, 32, 0.5, 0.5).unwrap();
        let d = SpectralData::gaussian_ring(lat, 2.0, 0.4, C64::new(1.0, 0.0), C64::new(0.0, 0.5)).unwrap();
        let sol = solve_envelope(&hyper(0.0), &d, &[0.0, 0.7, 2.5]).unwrap();
        let r = sol.residuals();
        assert!(r.tau_pde <= 1e-10 && r.alpha_pde <= 1e-10 && r.laplacian <= 1e-10, "{r:?}");
    }

    #[test]
    fn polar_oracle_agrees() {
        let lat = SlowLattice::new(16, 16, 0.5, 0.5).unwrap();
        let d = SpectralData::gaussian_ring(lat, 1.5, 0.4, C64::new(1.0, 0.2), C64::new(-0.3, 0.5)).unwrap();
        let (a1, a2) = recover_alpha(&hyper(0.0), &d, &[0.0]).unwrap();
        let (o1, o2) = polar_alpha_oracle(&d);
        let m = o1.iter().chain(&o2).map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in a1.iter().zip(&o1).chain(a2.iter().zip(&o2)) {
            assert!((x - y).norm() <= 1e-12 * m);
        }
    }
}
