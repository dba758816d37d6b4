//! Transfer matrices, the half-trace dispersion function, band edges and
//! Floquet–Bloch amplitudes of the layered medium.
//!
//! Each polarization reduces to a 2×2 system `y' = [[0, i a], [i c, 0]] y` with
//! layer-constant `a`, `c`. The state vectors are
//!
//! | polarization | state         | `a`               | `c`               |
//! |--------------|---------------|-------------------|-------------------|
//! | `Axial`      | `(E0, H0)`    | `k mu`            | `k eps`           |
//! | `TM`         | `(E∥, H⊥)`    | `k mu - p²/(k eps)` | `k eps`         |
//! | `TE`         | `(-E⊥, H∥)`   | `k mu`            | `k eps - p²/(k mu)` |
//!
//! so that at `p∥ = 0` the three monodromies coincide entrywise.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ZGrid;
use crate::linalg::{c, Mat2, C64, I};
use crate::medium::{LayerMedium, LayerStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    TM,
    TE,
    Axial,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::TM => "TM",
            Polarization::TE => "TE",
            Polarization::Axial => "AXIAL",
        })
    }
}

/// `(cos(sqrt(x) d), sin(sqrt(x) d)/sqrt(x))`, entire in `x`.
pub fn cos_sinc(x: f64, d: f64) -> (f64, f64) {
    let t = x * d * d;
    if t.abs() < 1e-4 {
        let cc = 1.0 - t / 2.0 + t * t / 24.0 - t * t * t / 720.0 + t * t * t * t / 40320.0;
        let s = 1.0 - t / 6.0 + t * t / 120.0 - t * t * t / 5040.0 + t * t * t * t / 362880.0;
        (cc, d * s)
    } else if x > 0.0 {
        let k = x.sqrt();
        ((k * d).cos(), (k * d).sin() / k)
    } else {
        let k = (-x).sqrt();
        ((k * d).cosh(), (k * d).sinh() / k)
    }
}

/// Off-diagonal coefficients `(a, c)` of the layer system.
pub fn layer_coefficients(m: &LayerMedium, pol: Polarization, p_par_sq: f64, k: f64) -> Result<(f64, f64)> {
    if !(p_par_sq.is_finite() && k.is_finite()) {
        return Err(Error::NonFiniteInput(format!("p_par_sq = {p_par_sq}, k = {k}")));
    }
    let (a, cc) = match pol {
        Polarization::Axial => (k * m.mu, k * m.eps),
        _ if p_par_sq == 0.0 => (k * m.mu, k * m.eps),
        Polarization::TM => (k * m.mu - p_par_sq / (k * m.eps), k * m.eps),
        Polarization::TE => (k * m.mu, k * m.eps - p_par_sq / (k * m.mu)),
    };
    if !(a.is_finite() && cc.is_finite()) {
        return Err(Error::NonFiniteInput(format!(
            "layer coefficients diverge (k = {k}, p_par_sq = {p_par_sq})"
        )));
    }
    Ok((a, cc))
}

/// Propagator of `y' = [[0, i a], [i c, 0]] y` over a distance `d`.
pub fn propagator_ac(a: f64, cc: f64, d: f64) -> Mat2 {
    let (co, s) = cos_sinc(a * cc, d);
    Mat2::new(c(co), I * (a * s), I * (cc * s), c(co))
}

/// Transfer matrix across one layer with normalized constants `m`, for medium
/// wavenumber `k`.
pub fn layer_propagator(m: &LayerMedium, pol: Polarization, p_par_sq: f64, k: f64) -> Result<Mat2> {
    let (a, cc) = layer_coefficients(m, pol, p_par_sq, k)?;
    Ok(propagator_ac(a, cc, m.thickness))
}

/// Layer coefficients of a stack at one `(pol, p∥², ω)`, ready for repeated
/// propagation.
#[derive(Debug, Clone)]
pub struct TransferSystem {
    pub pol: Polarization,
    pub p_par_sq: f64,
    pub omega: f64,
    pub k: f64,
    coeffs: Vec<(f64, f64)>,
    starts: Vec<f64>,
    thickness: Vec<f64>,
    period: f64,
    /// `M(z_i)`: transfer from 0 to the start of layer `i`; the last entry is `M_b`.
    at_starts: Vec<Mat2>,
}

impl TransferSystem {
    pub fn new(stack: &LayerStack, pol: Polarization, p_par_sq: f64, omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::NonFiniteInput(format!("omega = {omega}")));
        }
        let k = stack.wavenumber(omega);
        let coeffs = (0..stack.len())
            .map(|i| layer_coefficients(&stack.medium(i), pol, p_par_sq, k))
            .collect::<Result<Vec<_>>>()?;
        let thickness: Vec<f64> = stack.layers().iter().map(|l| l.thickness).collect();
        let mut at_starts = Vec::with_capacity(stack.len() + 1);
        let mut m = Mat2::identity();
        at_starts.push(m);
        for (&(a, cc), &d) in coeffs.iter().zip(&thickness) {
            m = propagator_ac(a, cc, d) * m;
            at_starts.push(m);
        }
        Ok(Self {
            pol,
            p_par_sq,
            omega,
            k,
            coeffs,
            starts: stack.layer_starts().to_vec(),
            thickness,
            period: stack.period(),
            at_starts,
        })
    }

    pub fn coefficients(&self, layer: usize) -> (f64, f64) {
        self.coeffs[layer]
    }

    pub fn monodromy(&self) -> Mat2 {
        *self.at_starts.last().expect("non-empty")
    }

    pub fn layer_matrix(&self, layer: usize) -> Mat2 {
        let (a, cc) = self.coeffs[layer];
        propagator_ac(a, cc, self.thickness[layer])
    }

    /// Transfer from the start of `layer` to a point `dz` inside it.
    pub fn within(&self, layer: usize, dz: f64) -> Mat2 {
        let (a, cc) = self.coeffs[layer];
        propagator_ac(a, cc, dz)
    }

    /// Transfer from 0 to the start of `layer`.
    pub fn to_layer_start(&self, layer: usize) -> Mat2 {
        self.at_starts[layer]
    }

    /// Fundamental matrix `M(z)` for any real `z`:
    /// `M(z + n b) = M(z) M_b^n`.
    pub fn fundamental(&self, z: f64) -> Mat2 {
        let n = (z / self.period).floor();
        let mut zl = z - n * self.period;
        let mut n = n as i64;
        if zl >= self.period {
            zl -= self.period;
            n += 1;
        }
        let idx = self.starts.partition_point(|&s| s <= zl).saturating_sub(1);
        let local = self.within(idx, zl - self.starts[idx]) * self.at_starts[idx];
        if n == 0 {
            local
        } else {
            local * self.monodromy().powi(n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy {
    pub m: Mat2,
    pub p_par_sq: f64,
    pub omega: f64,
    pub pol: Polarization,
}

impl Monodromy {
    pub fn half_trace_complex(&self) -> C64 {
        self.m.trace() * 0.5
    }

    /// Eigenvalues of `λ² - tr(M) λ + 1 = 0`.
    pub fn multipliers(&self) -> (C64, C64) {
        let t = self.m.trace();
        let disc = (t * t - 4.0).sqrt();
        ((t + disc) * 0.5, (t - disc) * 0.5)
    }
}

pub fn monodromy(stack: &LayerStack, pol: Polarization, p_par_sq: f64, omega: f64) -> Result<Monodromy> {
    let sys = TransferSystem::new(stack, pol, p_par_sq, omega)?;
    Ok(Monodromy {
        m: sys.monodromy(),
        p_par_sq,
        omega,
        pol,
    })
}

/// Half-trace `F = (M11 + M22)/2`; the dispersion relation is `F = cos(p_z b)`.
pub fn dispersion_f(stack: &LayerStack, pol: Polarization, p_par_sq: f64, omega: f64) -> Result<f64> {
    Ok(monodromy(stack, pol, p_par_sq, omega)?.half_trace_complex().re)
}

/// Derivative estimate with its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub error: f64,
}

/// Central difference of `F` in `ω`, Richardson-extrapolated over `h`, `h/2`.
pub fn df_domega(stack: &LayerStack, pol: Polarization, p_par_sq: f64, omega: f64) -> Result<Derivative> {
    let f = |w: f64| dispersion_f(stack, pol, p_par_sq, w);
    let h = 1e-5 * omega.abs().max(1.0);
    let d1 = (f(omega + h)? - f(omega - h)?) / (2.0 * h);
    let h2 = 0.5 * h;
    let d2 = (f(omega + h2)? - f(omega - h2)?) / (2.0 * h2);
    let value = (4.0 * d2 - d1) / 3.0;
    Ok(Derivative {
        value,
        error: (value - d2).abs(),
    })
}

/// Central difference of `F` in `p∥²` at fixed `ω` (Richardson over `h`, `h/2`).
pub fn df_dpsq(stack: &LayerStack, pol: Polarization, omega: f64) -> Result<Derivative> {
    let f = |q: f64| dispersion_f(stack, pol, q, omega);
    let k = stack.wavenumber(omega);
    let h = 1e-4 * k * k;
    let d1 = (f(h)? - f(-h)?) / (2.0 * h);
    let d2 = (f(0.5 * h)? - f(-0.5 * h)?) / h;
    let value = (4.0 * d2 - d1) / 3.0;
    Ok(Derivative {
        value,
        error: (value - d2).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdge {
    pub omega_star: f64,
    pub p_z_star: f64,
    pub band_index: usize,
    /// `+1` for `F = +1`, `-1` for `F = -1`.
    pub edge_sign: i8,
    /// Gap closure: `∂F/∂ω = 0` at `|F| = 1`, both solutions bounded.
    pub degenerate: bool,
    pub pol: Polarization,
    pub p_par_sq: f64,
}

fn bisect(mut lo: f64, mut hi: f64, mut g_lo: f64, g: impl Fn(f64) -> Result<f64>, tol: impl Fn(f64) -> f64) -> Result<f64> {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol(mid) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if (gm < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn dsign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// All edges `F = ±1` inside `omega_range`.
pub fn band_edges(
    stack: &LayerStack,
    pol: Polarization,
    p_par_sq: f64,
    omega_range: (f64, f64),
    scan_points: usize,
) -> Result<Vec<BandEdge>> {
    let (lo, hi) = omega_range;
    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi <= lo {
        return Err(Error::InvalidArgument(format!("omega range [{lo}, {hi}]")));
    }
    if scan_points < 64 {
        return Err(Error::InvalidArgument(format!("scan_points = {scan_points} < 64")));
    }
    let f = |w: f64| dispersion_f(stack, pol, p_par_sq, w);
    let dfd = |w: f64| df_domega(stack, pol, p_par_sq, w).map(|d| d.value);
    let n = scan_points;
    let step = (hi - lo) / (n - 1) as f64;
    let ws: Vec<f64> = (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect();
    let fs = ws.iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
    let b = stack.period();
    let degenerate_slope = |w: f64, d: f64| d.abs() * w.max(1.0) <= 1e-6;

    // (omega, sign, degenerate)
    let mut found: Vec<(f64, i8, bool)> = Vec::new();
    for s in [1i8, -1] {
        let target = s as f64;
        for i in 0..n - 1 {
            let (g0, g1) = (fs[i] - target, fs[i + 1] - target);
            let root = if g0 == 0.0 {
                Some(ws[i])
            } else if g0 * g1 < 0.0 {
                Some(bisect(ws[i], ws[i + 1], g0, |w| f(w).map(|v| v - target), |w| 1e-13 * w.abs().max(1e-300))?)
            } else if i == n - 2 && g1 == 0.0 {
                Some(ws[i + 1])
            } else {
                None
            };
            if let Some(w) = root {
                let d = dfd(w)?;
                let degenerate = degenerate_slope(w, d);
                if !degenerate {
                    let ds = [dfd(ws[i])?, dfd(0.5 * (ws[i] + ws[i + 1]))?, dfd(ws[i + 1])?];
                    let changes = ds.windows(2).filter(|p| dsign(p[0]) * dsign(p[1]) < 0).count();
                    if changes >= 2 {
                        return Err(Error::BracketTooCoarse { lo: ws[i], hi: ws[i + 1] });
                    }
                }
                found.push((w, s, degenerate));
            }
        }
    }
    // touch points: interior extrema of F reaching |F| = 1
    for i in 1..n - 1 {
        let is_max = fs[i] >= fs[i - 1] && fs[i] > fs[i + 1];
        let is_min = fs[i] <= fs[i - 1] && fs[i] < fs[i + 1];
        if !(is_max || is_min) {
            continue;
        }
        let (a, bb) = (ws[i - 1], ws[i + 1]);
        let da = dfd(a)?;
        let w = if dsign(da) * dsign(dfd(bb)?) < 0 {
            bisect(a, bb, da, dfd, |w| 1e-13 * w.abs().max(1.0))?
        } else {
            ws[i]
        };
        let fv = f(w)?;
        if (fv.abs() - 1.0).abs() <= 1e-8 {
            let s = if fv > 0.0 { 1 } else { -1 };
            found.retain(|&(wf, sf, deg)| !(sf == s && deg && (wf - w).abs() <= 2.0 * step));
            if !found.iter().any(|&(wf, sf, _)| sf == s && (wf - w).abs() <= 1e-9 * w.max(1.0)) {
                found.push((w, s, true));
            }
        }
    }
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(band_index, (w, s, degenerate))| BandEdge {
            omega_star: w,
            p_z_star: if s > 0 { 0.0 } else { PI / b },
            band_index,
            edge_sign: s,
            degenerate,
            pol,
            p_par_sq,
        })
        .collect())
}

/// Frequency on one dispersion sheet: root of `F(ω) = cos(p_z b)` in a
/// monotone bracket.
pub fn band_solve_omega(
    stack: &LayerStack,
    pol: Polarization,
    p_par_sq: f64,
    p_z: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    let target = (p_z * stack.period()).cos();
    let g = |w: f64| dispersion_f(stack, pol, p_par_sq, w).map(|v| v - target);
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if (g_lo < 0.0) == (g_hi < 0.0) {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let samples = 16;
    let mut sign = 0i8;
    for j in 0..=samples {
        let w = lo + (hi - lo) * j as f64 / samples as f64;
        let s = dsign(df_domega(stack, pol, p_par_sq, w)?.value);
        if s != 0 {
            if sign != 0 && s != sign {
                return Err(Error::NonMonotoneBracket { lo, hi });
            }
            sign = s;
        }
    }
    bisect(lo, hi, g_lo, g, |w| 4.0 * f64::EPSILON * w.abs().max(1e-300))
}

/// Root of `F(ω) = cos(p_z b)` closest to `guess`, found by widening a
/// bracket outward in steps of `step`.
pub fn solve_near(
    stack: &LayerStack,
    pol: Polarization,
    p_par_sq: f64,
    p_z: f64,
    guess: f64,
    step: f64,
) -> Result<f64> {
    let target = (p_z * stack.period()).cos();
    let g = |w: f64| dispersion_f(stack, pol, p_par_sq, w).map(|v| v - target);
    let g0 = g(guess)?;
    if g0 == 0.0 {
        return Ok(guess);
    }
    let (mut l_prev, mut gl_prev) = (guess, g0);
    let (mut r_prev, mut gr_prev) = (guess, g0);
    for j in 1..=400 {
        let r = guess + j as f64 * step;
        let gr = g(r)?;
        if gr == 0.0 || (gr < 0.0) != (gr_prev < 0.0) {
            return band_solve_omega(stack, pol, p_par_sq, p_z, (r_prev, r));
        }
        let l = (guess - j as f64 * step).max(0.0);
        if l < l_prev {
            let gl = g(l)?;
            if gl == 0.0 || (gl < 0.0) != (gl_prev < 0.0) {
                return band_solve_omega(stack, pol, p_par_sq, p_z, (l, l_prev));
            }
            l_prev = l;
            gl_prev = gl;
        }
        r_prev = r;
        gr_prev = gr;
    }
    Err(Error::NoRootInBracket {
        lo: l_prev,
        hi: r_prev,
    })
}

/// Sampled Floquet–Bloch solution `(e, h)` of one polarization.
#[derive(Debug, Clone)]
pub struct BlochMode {
    pub grid: Arc<ZGrid>,
    /// Full solution (not the periodic amplitude) at the grid nodes.
    pub e: Vec<C64>,
    pub h: Vec<C64>,
    /// Exact `z`-derivatives from the layer system.
    pub de: Vec<C64>,
    pub dh: Vec<C64>,
    /// State at `z = 0`.
    pub beta: [C64; 2],
    pub p_z: f64,
    pub p_par_sq: f64,
    pub omega: f64,
    pub pol: Polarization,
    pub lambda: C64,
    /// Period origin used to build the eigenvector when `M12` nearly vanished.
    pub origin_shift: Option<f64>,
    pub norm_u_xx: Option<f64>,
    system: TransferSystem,
}

impl BlochMode {
    /// Exact solution at any `z` by propagation from `z = 0`.
    pub fn state_at(&self, z: f64) -> [C64; 2] {
        self.system.fundamental(z).apply(self.beta)
    }

    /// Periodic amplitude `e^{-i p_z z} (e, h)` at the grid nodes.
    pub fn amplitude(&self) -> (Vec<C64>, Vec<C64>) {
        let ph: Vec<C64> = self.grid.z().iter().map(|&z| C64::from_polar(1.0, -self.p_z * z)).collect();
        (
            self.e.iter().zip(&ph).map(|(v, p)| v * p).collect(),
            self.h.iter().zip(&ph).map(|(v, p)| v * p).collect(),
        )
    }

    pub fn system(&self) -> &TransferSystem {
        &self.system
    }

    /// Multiplies the solution by a constant.
    pub fn scale(&mut self, s: C64) {
        for v in self.e.iter_mut().chain(&mut self.h).chain(&mut self.de).chain(&mut self.dh) {
            *v *= s;
        }
        self.beta = [self.beta[0] * s, self.beta[1] * s];
    }

    /// Largest relative defect between the spectral derivative of the samples
    /// and the right side of the layer system.
    pub fn ode_residual(&self) -> f64 {
        let de = self.grid.differentiate(&self.e);
        let dh = self.grid.differentiate(&self.h);
        let scale = self.de.iter().chain(&self.dh).map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let mut worst: f64 = 0.0;
        for seg in self.grid.segments() {
            let (a, cc) = self.system.coefficients(seg.layer);
            for i in seg.offset..seg.offset + self.grid.per_layer() {
                let r1 = de[i] - I * a * self.h[i];
                let r2 = dh[i] - I * cc * self.e[i];
                worst = worst.max(r1.norm().max(r2.norm()) / scale);
            }
        }
        worst
    }
}

fn eigvec(m: &Mat2, lambda: C64) -> [C64; 2] {
    [m.get(0, 1), lambda - m.get(0, 0)]
}

/// Floquet–Bloch solution with multiplier `e^{i p_z b}` on a per-layer
/// Chebyshev grid.
pub fn bloch_amplitude(
    stack: &LayerStack,
    pol: Polarization,
    p_par_sq: f64,
    omega: f64,
    p_z: f64,
    z_samples_per_layer: usize,
) -> Result<BlochMode> {
    let grid = Arc::new(ZGrid::new(stack, z_samples_per_layer));
    bloch_amplitude_on(stack, grid, pol, p_par_sq, omega, p_z)
}

pub fn bloch_amplitude_on(
    stack: &LayerStack,
    grid: Arc<ZGrid>,
    pol: Polarization,
    p_par_sq: f64,
    omega: f64,
    p_z: f64,
) -> Result<BlochMode> {
    let sys = TransferSystem::new(stack, pol, p_par_sq, omega)?;
    let m = sys.monodromy();
    let b = stack.period();
    let residual = (m.trace().re * 0.5 - (p_z * b).cos()).abs();
    if residual > 1e-10 {
        return Err(Error::OffDispersionSurface { residual });
    }
    let lambda = C64::from_polar(1.0, p_z * b);
    let thresh = 1e-10 * m.norm();
    let (beta, origin_shift) = if m.get(0, 1).norm() >= thresh {
        (eigvec(&m, lambda), None)
    } else {
        let thick = (0..stack.len())
            .max_by(|&i, &j| stack.layers()[i].thickness.total_cmp(&stack.layers()[j].thickness))
            .expect("non-empty");
        let zs = stack.layer_starts()[thick] + 0.5 * stack.layers()[thick].thickness;
        let ms = sys.fundamental(zs);
        let shifted = ms * m * ms.inverse();
        if shifted.get(0, 1).norm() < thresh {
            return Err(Error::NoValidOrigin);
        }
        let bs = eigvec(&shifted, lambda);
        (ms.inverse().apply(bs), Some(zs))
    };
    let n = grid.len();
    let mut e = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut de = Vec::with_capacity(n);
    let mut dh = Vec::with_capacity(n);
    for seg in grid.segments() {
        let (a, cc) = sys.coefficients(seg.layer);
        let start = sys.to_layer_start(seg.layer).apply(beta);
        for &z in &grid.z()[seg.offset..seg.offset + grid.per_layer()] {
            let s = propagator_ac(a, cc, z - seg.z0).apply(start);
            e.push(s[0]);
            h.push(s[1]);
            de.push(I * a * s[1]);
            dh.push(I * cc * s[0]);
        }
    }
    let mut mode = BlochMode {
        grid,
        e,
        h,
        de,
        dh,
        beta,
        p_z,
        p_par_sq,
        omega,
        pol,
        lambda,
        origin_shift,
        norm_u_xx: None,
        system: sys,
    };
    let pivot = if mode.e[0].norm() >= mode.h[0].norm() { mode.e[0] } else { mode.h[0] };
    if pivot.norm() > 0.0 {
        mode.scale(pivot.conj() / pivot.norm());
    }
    Ok(mode)
}

/// Linearly growing companion of the bounded band-edge solution:
/// `Ψ2(z + b) = λ Ψ2(z) + Ψ1(z)`.
#[derive(Debug, Clone)]
pub struct SecondSolution {
    pub mode1: BlochMode,
    /// State of `Ψ2` at `z = 0`.
    pub gamma: [C64; 2],
    /// Periodic part `Q = e^{-i p z} Ψ2 - z/(λ b) e^{-i p z} Ψ1` at the grid nodes.
    pub q_e: Vec<C64>,
    pub q_h: Vec<C64>,
    pub lambda: f64,
}

impl SecondSolution {
    pub fn psi2_at(&self, z: f64) -> [C64; 2] {
        self.mode1.system().fundamental(z).apply(self.gamma)
    }

    pub fn psi1_at(&self, z: f64) -> [C64; 2] {
        self.mode1.state_at(z)
    }
}

pub fn second_solution(stack: &LayerStack, edge: &BandEdge, z_samples_per_layer: usize) -> Result<SecondSolution> {
    if edge.degenerate {
        return Err(Error::DegenerateEdge { omega: edge.omega_star });
    }
    let m = monodromy(stack, edge.pol, edge.p_par_sq, edge.omega_star)?.m;
    let lambda = edge.edge_sign as f64;
    let nmat = m - Mat2::identity().scale(c(lambda));
    if nmat.norm() <= 1e-10 * m.norm() {
        return Err(Error::DegenerateEdge { omega: edge.omega_star });
    }
    let mode1 = bloch_amplitude(
        stack,
        edge.pol,
        edge.p_par_sq,
        edge.omega_star,
        edge.p_z_star,
        z_samples_per_layer,
    )?;
    let mut gamma = nmat.pinv_rank1().apply(mode1.beta);
    let b = stack.period();
    let grid = mode1.grid.clone();
    let (u_e, u_h) = mode1.amplitude();
    let mut q_e = Vec::with_capacity(grid.len());
    let mut q_h = Vec::with_capacity(grid.len());
    for seg in grid.segments() {
        let start = mode1.system().to_layer_start(seg.layer).apply(gamma);
        let (a, cc) = mode1.system().coefficients(seg.layer);
        for i in seg.offset..seg.offset + grid.per_layer() {
            let z = grid.z()[i];
            let s = propagator_ac(a, cc, z - seg.z0).apply(start);
            let ph = C64::from_polar(1.0, -edge.p_z_star * z);
            let lin = z / (lambda * b);
            q_e.push(s[0] * ph - u_e[i] * lin);
            q_h.push(s[1] * ph - u_h[i] * lin);
        }
    }
    // P-weighted orthogonalization against the bounded amplitude
    let w_e: Vec<C64> = (0..grid.len()).map(|i| grid.node_segment(i).eps * u_e[i].conj() * q_e[i]).collect();
    let w_h: Vec<C64> = (0..grid.len()).map(|i| grid.node_segment(i).mu * u_h[i].conj() * q_h[i]).collect();
    let n_e: Vec<C64> = (0..grid.len()).map(|i| c(grid.node_segment(i).eps * u_e[i].norm_sqr())).collect();
    let n_h: Vec<C64> = (0..grid.len()).map(|i| c(grid.node_segment(i).mu * u_h[i].norm_sqr())).collect();
    let coef = (grid.integrate(&w_e) + grid.integrate(&w_h)) / (grid.integrate(&n_e) + grid.integrate(&n_h));
    for i in 0..grid.len() {
        q_e[i] -= coef * u_e[i];
        q_h[i] -= coef * u_h[i];
    }
    gamma = [gamma[0] - coef * mode1.beta[0], gamma[1] - coef * mode1.beta[1]];
    Ok(SecondSolution {
        mode1,
        gamma,
        q_e,
        q_h,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{build_stack, qw_stack, Layer};

    fn homogeneous() -> LayerStack {
        build_stack(&[Layer::new(1.0, 1.0, 1.0)], 1.0).unwrap()
    }

    fn qw_f(omega: f64) -> f64 {
        let t = omega / 2.0;
        t.cos().powi(2) - 1.25 * t.sin().powi(2)
    }

    #[test]
    fn propagator_examples() {
        let m = LayerMedium { thickness: 1.0, eps: 1.0, mu: 1.0 };
        let t = layer_propagator(&m, Polarization::Axial, 0.0, 0.0).unwrap();
        assert!(t.max_abs_diff(&Mat2::identity()) < 1e-15);
        let t = layer_propagator(&m, Polarization::Axial, 0.0, PI / 2.0).unwrap();
        assert!(t.trace().norm() < 1e-15);
        let m = LayerMedium { thickness: 0.25, eps: 4.0, mu: 1.0 };
        let t = layer_propagator(&m, Polarization::TM, 0.0, PI).unwrap();
        assert!(t.trace().norm() < 1e-15);
        assert!((t.det() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn zero_frequency_with_lateral_momentum_is_rejected() {
        let m = LayerMedium { thickness: 1.0, eps: 1.0, mu: 1.0 };
        let e = layer_propagator(&m, Polarization::TM, 0.5, 0.0).unwrap_err();
        assert!(matches!(e, Error::NonFiniteInput(_)));
    }

    #[test]
    fn series_branch_is_continuous() {
        for &d in &[0.3, 1.0] {
            for &x in &[1e-4 / (d * d) * 0.999, 1e-4 / (d * d) * 1.001, -1e-4 / (d * d) * 0.999, -1e-4 / (d * d) * 1.001] {
                let (cs, s) = cos_sinc(x, d);
                let k = x.abs().sqrt();
                let (ce, se) = if x > 0.0 {
                    ((k * d).cos(), (k * d).sin() / k)
                } else {
                    ((k * d).cosh(), (k * d).sinh() / k)
                };
                assert!((cs - ce).abs() < 1e-15 && (s - se).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn monodromy_examples() {
        let h = homogeneous();
        for &w in &[0.3, 1.7, 4.0] {
            let m = monodromy(&h, Polarization::Axial, 0.0, w).unwrap();
            assert!((m.m.trace().re - 2.0 * w.cos()).abs() < 1e-14);
        }
        let q = qw_stack();
        let f = dispersion_f(&q, Polarization::Axial, 0.0, PI).unwrap();
        assert!((f + 1.25).abs() < 1e-14);
        let m = monodromy(&q, Polarization::TE, 0.0, 0.0).unwrap();
        assert!(m.m.max_abs_diff(&Mat2::identity()) < 1e-15);
        for &w in &[0.5, 2.0, 3.3, 5.9] {
            assert!((dispersion_f(&q, Polarization::Axial, 0.0, w).unwrap() - qw_f(w)).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_examples() {
        let h = homogeneous();
        let d = df_domega(&h, Polarization::Axial, 0.0, PI / 2.0).unwrap();
        assert!((d.value + 1.0).abs() < 1e-9);
        let q = qw_stack();
        // d/dω [cos²θ - 1.25 sin²θ] = -2.25 sinθ cosθ with θ = ω/2
        let w = PI;
        let exact = -2.25 * (w / 2.0).sin() * (w / 2.0).cos();
        let d = df_domega(&q, Polarization::Axial, 0.0, w).unwrap();
        assert!((d.value - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        let ws = 2.0 * (1.0f64 / 3.0).acos();
        assert!(df_domega(&q, Polarization::Axial, 0.0, ws).unwrap().value < 0.0);
    }

    #[test]
    fn qw_edges() {
        let q = qw_stack();
        let e = band_edges(&q, Polarization::Axial, 0.0, (0.1, 3.0), 256).unwrap();
        assert_eq!(e.len(), 1);
        let ws = 2.0 * (1.0f64 / 3.0).acos();
        assert!((e[0].omega_star - ws).abs() < 1e-11);
        assert_eq!(e[0].edge_sign, -1);
        assert!((e[0].p_z_star - PI / 0.75).abs() < 1e-15);
        assert!(!e[0].degenerate);
        let e = band_edges(&q, Polarization::Axial, 0.0, (3.0, 4.5), 256).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0].omega_star - 2.0 * (PI - (1.0f64 / 3.0).acos())).abs() < 1e-11);
        // the second-order gap of the quarter-wave stack is closed
        let e = band_edges(&q, Polarization::Axial, 0.0, (5.0, 7.5), 256).unwrap();
        assert_eq!(e.len(), 1);
        assert!(e[0].degenerate);
        assert!((e[0].omega_star - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn homogeneous_edges_are_degenerate() {
        let h = homogeneous();
        let e = band_edges(&h, Polarization::Axial, 0.0, (0.1, 10.0), 512).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|x| x.degenerate));
        for (i, x) in e.iter().enumerate() {
            assert!((x.omega_star - (i + 1) as f64 * PI).abs() < 1e-6);
        }
    }

    #[test]
    fn solve_examples() {
        let h = homogeneous();
        let w = band_solve_omega(&h, Polarization::Axial, 0.0, PI / 2.0, (1.0, 2.0)).unwrap();
        assert!((w - PI / 2.0).abs() < 1e-14);
        let q = qw_stack();
        let pz = PI / 0.75;
        let w0 = band_solve_omega(&q, Polarization::Axial, 0.0, pz, (2.0, 3.0)).unwrap();
        assert!((w0 - 2.0 * (1.0f64 / 3.0).acos()).abs() < 1e-13);
        let w1 = solve_near(&q, Polarization::TM, 0.09, pz, w0, 1e-2).unwrap();
        assert!(w1 > w0);
        assert!(matches!(
            band_solve_omega(&q, Polarization::Axial, 0.0, pz, (0.5, 1.0)),
            Err(Error::NoRootInBracket { .. })
        ));
        assert!(matches!(
            band_solve_omega(&h, Polarization::Axial, 0.0, 0.3, (0.1, 4.0)),
            Err(Error::NonMonotoneBracket { .. })
        ));
    }

    #[test]
    fn bloch_modes() {
        let h = homogeneous();
        let m = bloch_amplitude(&h, Polarization::Axial, 0.0, 1.2, 1.2, 16).unwrap();
        let (ue, uh) = m.amplitude();
        for i in 0..ue.len() {
            assert!((ue[i] - ue[0]).norm() < 1e-13 && (uh[i] - uh[0]).norm() < 1e-13);
        }
        let q = qw_stack();
        let ws = 2.0 * (1.0f64 / 3.0).acos();
        let m = bloch_amplitude(&q, Polarization::Axial, 0.0, ws, PI / 0.75, 32).unwrap();
        let n = m.e.len();
        assert!((m.e[n - 1] + m.e[0]).norm() < 1e-10 * m.e[0].norm().max(m.h[0].norm()));
        assert!((m.h[n - 1] + m.h[0]).norm() < 1e-10 * m.e[0].norm().max(m.h[0].norm()));
        let big = if m.e[0].norm() >= m.h[0].norm() { m.e[0] } else { m.h[0] };
        assert!(big.im.abs() < 1e-15 && big.re > 0.0);
        // interior band point
        let w = 1.3;
        let pz = qw_f(w).acos() / 0.75;
        let m = bloch_amplitude(&q, Polarization::Axial, 0.0, w, pz, 32).unwrap();
        assert!(m.ode_residual() < 1e-10);
        assert!(matches!(
            bloch_amplitude(&q, Polarization::Axial, 0.0, w, pz + 0.1, 32),
            Err(Error::OffDispersionSurface { .. })
        ));
    }

    #[test]
    fn second_solution_growth() {
        let q = qw_stack();
        for range in [(0.1, 3.0), (3.0, 4.5)] {
            let edge = band_edges(&q, Polarization::Axial, 0.0, range, 256).unwrap()[0];
            let s = second_solution(&q, &edge, 32).unwrap();
            assert_eq!(s.lambda, -1.0);
            for j in 0..100 {
                let z = -1.3 + 0.037 * j as f64;
                let lhs = s.psi2_at(z + 0.75);
                let p2 = s.psi2_at(z);
                let p1 = s.psi1_at(z);
                let scale = p2[0].norm().max(p2[1].norm()).max(p1[0].norm()).max(1.0);
                for k in 0..2 {
                    assert!((lhs[k] - (-p2[k] + p1[k])).norm() < 1e-9 * scale);
                }
            }
        }
        let h = homogeneous();
        let edge = BandEdge {
            omega_star: PI,
            p_z_star: PI,
            band_index: 0,
            edge_sign: -1,
            degenerate: false,
            pol: Polarization::Axial,
            p_par_sq: 0.0,
        };
        assert!(matches!(second_solution(&h, &edge, 16), Err(Error::DegenerateEdge { .. })));
    }
}
