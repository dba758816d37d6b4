//! Stationary points of the dispersion sheets and their curvatures.
//!
//! At a non-degenerate band edge (`p∥ = 0`, `p_z ∈ {0, π/b}`) the axial Bloch
//! solution `(E0, H0)` defines the pair
//! `φX = e^{-ipz}(E0, 0, 0, 0, H0, 0)`, `φY = e^{-ipz}(0, -E0, 0, H0, 0, 0)`.
//! Curvatures are evaluated three ways: the closed form from the half-trace,
//! integral identities over `φX`, `φY` and their parameter derivatives, and
//! finite differences of the band solver. All are stored; the accessors
//! [`omega33`] and [`omega11`] enforce agreement.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{self, inner_p, inner_product, Six, SixVectorField};
use crate::floquet::{
    band_edges, bloch_amplitude_on, df_domega, df_dpsq, propagator_ac, solve_near, BandEdge, BlochMode, Polarization,
    TransferSystem,
};
use crate::grid::ZGrid;
use crate::linalg::{c, Mat2, C64, I};
use crate::medium::LayerStack;
use crate::spectral::gauss_legendre;

/// Relative agreement required between the three `ω̈33` estimates.
pub const W33_TOLERANCE: f64 = 1e-4;
/// Relative agreement required between integral and FD `ω̈11`.
pub const W11_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointKind {
    Elliptic,
    Hyperbolic,
}

impl std::fmt::Display for PointKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointKind::Elliptic => "elliptic",
            PointKind::Hyperbolic => "hyperbolic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    X,
    Y,
}

#[derive(Debug, Clone, Copy)]
pub struct CurvatureOptions {
    pub z_samples_per_layer: usize,
    pub scan_points: usize,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        Self {
            z_samples_per_layer: 32,
            scan_points: 512,
        }
    }
}

/// Every curvature estimate computed for a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEstimates {
    pub w33_closed: f64,
    pub w33_fd: f64,
    pub w33_identity: f64,
    pub w11_h_integral: f64,
    pub w11_h_fd: f64,
    pub w11_e_integral: f64,
    pub w11_e_fd: f64,
    /// `-2 ∂F/∂p∥² / ∂F/∂ω` for the TM and TE systems.
    pub w11_h_implicit: f64,
    pub w11_e_implicit: f64,
}

impl CurvatureEstimates {
    pub fn w33_spread(&self) -> f64 {
        let r = self.w33_closed.abs();
        ((self.w33_fd - self.w33_closed).abs().max((self.w33_identity - self.w33_closed).abs())
            .max((self.w33_fd - self.w33_identity).abs()))
            / r
    }

    pub fn w11_h_spread(&self) -> f64 {
        (self.w11_h_integral - self.w11_h_fd).abs() / self.w11_h_integral.abs()
    }

    pub fn w11_e_spread(&self) -> f64 {
        (self.w11_e_integral - self.w11_e_fd).abs() / self.w11_e_integral.abs()
    }
}

/// Finite-difference checks that the point is stationary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityCheck {
    pub dw_dpz: f64,
    pub dw_dpar: f64,
    /// `|ω^H(p∥) - ω*|/ω*` and `|ω^E(p∥) - ω*|/ω*` at `p∥ = 1e-5/b`.
    pub touch_tm: f64,
    pub touch_te: f64,
    /// Fitted exponent of `|ω(p*+h) - ω*|` over `h ∈ {π/100b, π/200b, π/400b}`.
    pub gradient_exponent: f64,
}

/// Parameter derivatives of the band-edge amplitudes.
#[derive(Debug, Clone)]
pub struct DerivativeMode {
    pub dphi_dpz_x: SixVectorField,
    pub dphi_dpz_y: SixVectorField,
    pub dphi_dpx_h: SixVectorField,
    pub dphi_dpx_e: SixVectorField,
}

#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub edge: BandEdge,
    pub omega_star: f64,
    pub p_z_star: f64,
    /// Medium wavenumber `k* = n_av ω*`.
    pub k_star: f64,
    /// Light speed of the average medium.
    pub light_speed: f64,
    pub stack: LayerStack,
    /// Axial Bloch solution normalized to `uXX = 1`.
    pub mode: BlochMode,
    pub phi_x: SixVectorField,
    pub phi_y: SixVectorField,
    pub u_xx: f64,
    pub u_yy: f64,
    pub w11_h: f64,
    pub w11_e: f64,
    pub w33: f64,
    pub kind: PointKind,
    pub estimates: CurvatureEstimates,
    pub stationarity: StationarityCheck,
    pub derivatives: DerivativeMode,
}

fn phase(p: f64, z: f64) -> C64 {
    C64::from_polar(1.0, -p * z)
}

/// `φX`, `φY` from an axial mode.
fn basis_pair(mode: &BlochMode) -> (SixVectorField, SixVectorField) {
    let g = mode.grid.clone();
    let z0 = C64::new(0.0, 0.0);
    let p = mode.p_z;
    let amp = |i: usize| {
        let ph = phase(p, g.z()[i]);
        (mode.e[i] * ph, mode.h[i] * ph)
    };
    let damp = |i: usize| {
        let ph = phase(p, g.z()[i]);
        ((mode.de[i] - I * p * mode.e[i]) * ph, (mode.dh[i] - I * p * mode.h[i]) * ph)
    };
    let x = SixVectorField::from_nodes(g.clone(), |i| {
        let (e, h) = amp(i);
        [e, z0, z0, z0, h, z0]
    })
    .with_derivative(|i| {
        let (e, h) = damp(i);
        [e, z0, z0, z0, h, z0]
    });
    let y = SixVectorField::from_nodes(g.clone(), |i| {
        let (e, h) = amp(i);
        [z0, -e, z0, h, z0, z0]
    })
    .with_derivative(|i| {
        let (e, h) = damp(i);
        [z0, -e, z0, h, z0, z0]
    });
    (x, y)
}

/// Axial mode at `(ω, p_z)` on `grid`, gauge-fixed and scaled to `uXX = 1`.
fn normalized_mode(stack: &LayerStack, grid: Arc<ZGrid>, omega: f64, p_z: f64) -> Result<(BlochMode, f64)> {
    let mut mode = bloch_amplitude_on(stack, grid.clone(), Polarization::Axial, 0.0, omega, p_z)?;
    let dens: Vec<C64> = (0..grid.len())
        .map(|i| {
            let s = grid.node_segment(i);
            c(s.eps * mode.e[i].norm_sqr() + s.mu * mode.h[i].norm_sqr())
        })
        .collect();
    let u = grid.integrate(&dens).re;
    mode.scale(c(1.0 / u.sqrt()));
    mode.norm_u_xx = Some(1.0);
    Ok((mode, u))
}

fn omega_at(stack: &LayerStack, pol: Polarization, p_par_sq: f64, p_z: f64, omega_star: f64) -> Result<f64> {
    solve_near(stack, pol, p_par_sq, p_z, omega_star, 1e-3 * omega_star.max(1e-3))
}

fn w33_finite_difference(stack: &LayerStack, p_star: f64, omega_star: f64) -> Result<f64> {
    let b = stack.period();
    let second = |h: f64| -> Result<f64> {
        let wp = omega_at(stack, Polarization::Axial, 0.0, p_star + h, omega_star)?;
        let wm = omega_at(stack, Polarization::Axial, 0.0, p_star - h, omega_star)?;
        Ok((wp + wm - 2.0 * omega_star) / (h * h))
    };
    let h = PI / (50.0 * b);
    let (d1, d2, d3) = (second(h)?, second(0.5 * h)?, second(0.25 * h)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

fn w11_finite_difference(stack: &LayerStack, pol: Polarization, p_star: f64, omega_star: f64) -> Result<f64> {
    let h = 0.02 / stack.period();
    let w1 = omega_at(stack, pol, h * h, p_star, omega_star)?;
    let w2 = omega_at(stack, pol, 4.0 * h * h, p_star, omega_star)?;
    let d1 = 2.0 * (w1 - omega_star) / (h * h);
    let d2 = 2.0 * (w2 - omega_star) / (4.0 * h * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

fn stationarity(stack: &LayerStack, p_star: f64, omega_star: f64) -> Result<StationarityCheck> {
    let b = stack.period();
    let h = PI / (50.0 * b);
    let wp = omega_at(stack, Polarization::Axial, 0.0, p_star + h, omega_star)?;
    let wm = omega_at(stack, Polarization::Axial, 0.0, p_star - h, omega_star)?;
    let dw_dpz = (wp - wm) / (2.0 * h);
    let hp = 0.02 / b;
    // ω depends on p∥ only through p∥², so the symmetric difference is taken
    // on the TM sheet at ±hp explicitly
    let wtp = omega_at(stack, Polarization::TM, hp * hp, p_star, omega_star)?;
    let wtm = omega_at(stack, Polarization::TM, (-hp) * (-hp), p_star, omega_star)?;
    let dw_dpar = (wtp - wtm) / (2.0 * hp);
    let tiny = 1e-5 / b;
    let touch_tm = (omega_at(stack, Polarization::TM, tiny * tiny, p_star, omega_star)? - omega_star).abs() / omega_star;
    let touch_te = (omega_at(stack, Polarization::TE, tiny * tiny, p_star, omega_star)? - omega_star).abs() / omega_star;
    let hs = [PI / (100.0 * b), PI / (200.0 * b), PI / (400.0 * b)];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &hh in &hs {
        let w = omega_at(stack, Polarization::Axial, 0.0, p_star + hh, omega_star)?;
        xs.push(hh.ln());
        ys.push((w - omega_star).abs().ln());
    }
    let gradient_exponent = fit_slope(&xs, &ys);
    Ok(StationarityCheck {
        dw_dpz,
        dw_dpar,
        touch_tm,
        touch_te,
        gradient_exponent,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Builds the stationary point at a non-degenerate axial band edge.
pub fn stationary_point(stack: &LayerStack, edge: &BandEdge, opts: &CurvatureOptions) -> Result<StationaryPoint> {
    if edge.degenerate {
        return Err(Error::DegenerateEdge { omega: edge.omega_star });
    }
    let omega_star = edge.omega_star;
    let p_star = edge.p_z_star;
    let b = stack.period();
    let grid = Arc::new(ZGrid::new(stack, opts.z_samples_per_layer));
    let (mode, _) = normalized_mode(stack, grid.clone(), omega_star, p_star)?;
    let (phi_x, phi_y) = basis_pair(&mode);
    let u_xx = inner_p(&phi_x, &phi_x)?.re;
    let u_yy = inner_p(&phi_y, &phi_y)?.re;
    let k_star = stack.wavenumber(omega_star);
    let light_speed = stack.light_speed();

    let f_w = df_domega(stack, Polarization::Axial, 0.0, omega_star)?.value;
    if f_w.abs() <= 1e-10 {
        return Err(Error::DegenerateEdge { omega: omega_star });
    }
    let w33_closed = -b * b * (p_star * b).cos() / f_w;
    if w33_closed.abs() < 1e-10 {
        return Err(Error::FlatBand { value: w33_closed });
    }

    // integral identities for the lateral curvatures
    let mut int_h = Vec::with_capacity(grid.len());
    let mut int_e = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let s = grid.node_segment(i);
        int_h.push(c(mode.h[i].norm_sqr() / (k_star * s.eps)));
        int_e.push(c(mode.e[i].norm_sqr() / (k_star * s.mu)));
    }
    let w11_h_integral = 2.0 * light_speed * grid.integrate(&int_h).re / u_xx;
    let w11_e_integral = 2.0 * light_speed * grid.integrate(&int_e).re / u_yy;

    let mut partial = StationaryPoint {
        edge: *edge,
        omega_star,
        p_z_star: p_star,
        k_star,
        light_speed,
        stack: stack.clone(),
        derivatives: DerivativeMode {
            dphi_dpz_x: SixVectorField::zeros(grid.clone()),
            dphi_dpz_y: SixVectorField::zeros(grid.clone()),
            dphi_dpx_h: SixVectorField::zeros(grid.clone()),
            dphi_dpx_e: SixVectorField::zeros(grid.clone()),
        },
        mode,
        phi_x,
        phi_y,
        u_xx,
        u_yy,
        w11_h: w11_h_integral,
        w11_e: w11_e_integral,
        w33: w33_closed,
        kind: if w33_closed > 0.0 { PointKind::Elliptic } else { PointKind::Hyperbolic },
        estimates: CurvatureEstimates {
            w33_closed,
            w33_fd: f64::NAN,
            w33_identity: f64::NAN,
            w11_h_integral,
            w11_h_fd: f64::NAN,
            w11_e_integral,
            w11_e_fd: f64::NAN,
            w11_h_implicit: f64::NAN,
            w11_e_implicit: f64::NAN,
        },
        stationarity: StationarityCheck {
            dw_dpz: f64::NAN,
            dw_dpar: f64::NAN,
            touch_tm: f64::NAN,
            touch_te: f64::NAN,
            gradient_exponent: f64::NAN,
        },
    };
    partial.derivatives = derivative_modes(&partial)?;
    let dx = &partial.derivatives.dphi_dpz_x;
    let w33_identity = 2.0 * light_speed * inner_product(&partial.phi_x, &dx.gamma(3))?.re / u_xx;

    let implicit = |pol| -> Result<f64> {
        let fq = df_dpsq(stack, pol, omega_star)?.value;
        let fw = df_domega(stack, pol, 0.0, omega_star)?.value;
        Ok(-2.0 * fq / fw)
    };
    partial.estimates.w33_fd = w33_finite_difference(stack, p_star, omega_star)?;
    partial.estimates.w33_identity = w33_identity;
    partial.estimates.w11_h_fd = w11_finite_difference(stack, Polarization::TM, p_star, omega_star)?;
    partial.estimates.w11_e_fd = w11_finite_difference(stack, Polarization::TE, p_star, omega_star)?;
    partial.estimates.w11_h_implicit = implicit(Polarization::TM)?;
    partial.estimates.w11_e_implicit = implicit(Polarization::TE)?;
    partial.stationarity = stationarity(stack, p_star, omega_star)?;
    Ok(partial)
}

/// Stationary points at all non-degenerate axial band edges in the range.
pub fn find_stationary_points(
    stack: &LayerStack,
    omega_range: (f64, f64),
    opts: &CurvatureOptions,
) -> Result<Vec<StationaryPoint>> {
    let edges = band_edges(stack, Polarization::Axial, 0.0, omega_range, opts.scan_points)?;
    edges
        .par_iter()
        .filter(|e| !e.degenerate)
        .map(|e| stationary_point(stack, e, opts))
        .collect()
}

/// `ω̈33`, checked three ways.
pub fn omega33(sp: &StationaryPoint) -> Result<f64> {
    let e = &sp.estimates;
    if e.w33_closed.abs() < 1e-10 {
        return Err(Error::FlatBand { value: e.w33_closed });
    }
    let spread = e.w33_spread();
    if !(spread <= W33_TOLERANCE) {
        return Err(Error::ConsistencyFailure {
            quantity: "omega33".into(),
            detail: format!(
                "closed {:.12e}, fd {:.12e}, identity {:.12e} (spread {spread:.2e})",
                e.w33_closed, e.w33_fd, e.w33_identity
            ),
        });
    }
    Ok(e.w33_closed)
}

/// `ω̈11` of the TM (`H`) or TE (`E`) sheet, integral identity checked against FD.
pub fn omega11(sp: &StationaryPoint, pol: Polarization) -> Result<f64> {
    let e = &sp.estimates;
    let (val, fd, spread) = match pol {
        Polarization::TM => (e.w11_h_integral, e.w11_h_fd, e.w11_h_spread()),
        Polarization::TE => (e.w11_e_integral, e.w11_e_fd, e.w11_e_spread()),
        Polarization::Axial => {
            return Err(Error::InvalidArgument("omega11 needs TM or TE".into()));
        }
    };
    if !(spread <= W11_TOLERANCE) {
        return Err(Error::ConsistencyFailure {
            quantity: format!("omega11 {pol}"),
            detail: format!("integral {val:.12e}, fd {fd:.12e} (spread {spread:.2e})"),
        });
    }
    Ok(val)
}

/// `A* v = k* P v + i Γ3 v' - p_z* Γ3 v`.
pub fn apply_a_star(sp: &StationaryPoint, v: &SixVectorField) -> Result<SixVectorField> {
    if !v.grid.compatible(&sp.phi_x.grid) {
        return Err(Error::GridMismatch);
    }
    let d = v.derivative();
    let g = v.grid.clone();
    let k = sp.k_star;
    let p = sp.p_z_star;
    Ok(SixVectorField::from_nodes(g.clone(), |i| {
        let s = g.node_segment(i);
        let vi = v.node(i);
        let di: Six = std::array::from_fn(|m| d[m][i]);
        let pv = field::apply_p(s.eps, s.mu, &vi);
        let gd = field::gamma3(&di);
        let gv = field::gamma3(&vi);
        std::array::from_fn(|m| pv[m] * k + I * gd[m] - gv[m] * p)
    }))
}

/// Largest pointwise defect of `A* v - rhs`, relative to the largest of `rhs`
/// and `k* P v`.
pub fn collocation_residual(sp: &StationaryPoint, v: &SixVectorField, rhs: &SixVectorField) -> Result<f64> {
    let av = apply_a_star(sp, v)?;
    let diff = av.axpy(c(-1.0), rhs)?;
    let scale = rhs.max_norm().max(v.apply_p().max_norm() * sp.k_star).max(1e-300);
    Ok(diff.max_norm() / scale)
}

/// `v - (φX, P v)/uXX φX - (φY, P v)/uYY φY`.
pub fn project_out(sp: &StationaryPoint, v: &SixVectorField) -> Result<SixVectorField> {
    let cx = inner_p(&sp.phi_x, v)? / sp.u_xx;
    let cy = inner_p(&sp.phi_y, v)? / sp.u_yy;
    v.axpy(-cx, &sp.phi_x)?.axpy(-cy, &sp.phi_y)
}

/// Periodic solution of `A* v = rhs` in class M (continuous components 1, 2,
/// 4, 5), P-orthogonal to `φX`, `φY`.
///
/// Components (1, 5) and (2, 4) reduce to inhomogeneous copies of the axial
/// system, `w' = K w + g`, solved by variation of parameters with the
/// fundamental matrix; the periodicity defect is removed by the coefficient of
/// the homogeneous solution through the rank-one pseudo-inverse of
/// `M_b - λ`. Components 3 and 6 are algebraic.
pub fn solve_class_m(sp: &StationaryPoint, rhs: &SixVectorField) -> Result<SixVectorField> {
    if !rhs.grid.compatible(&sp.phi_x.grid) {
        return Err(Error::GridMismatch);
    }
    let x = inner_product(&sp.phi_x, rhs)?.norm();
    let y = inner_product(&sp.phi_y, rhs)?.norm();
    let scale = rhs.l2_norm() * sp.phi_x.l2_norm();
    if x > 1e-9 * scale || y > 1e-9 * scale {
        return Err(Error::SolvabilityViolated { x, y });
    }
    let g = rhs.grid.clone();
    let sys = TransferSystem::new(&sp.stack, Polarization::Axial, 0.0, sp.omega_star)?;
    let p = sp.p_z_star;
    let k = sp.k_star;
    let lambda = C64::from_polar(1.0, p * sp.stack.period());
    let n_mat = sys.monodromy() - Mat2::identity().scale(lambda);
    let pinv = n_mat.pinv_rank1();
    let (qx, qw) = gauss_legendre(16);
    let n = g.len();

    // source of each subsystem at z, given the six rhs values there
    let src_a = |z: f64, f: &Six| -> [C64; 2] {
        let e = C64::from_polar(1.0, p * z) * (-I);
        [e * f[4], e * f[0]]
    };
    let src_b = |z: f64, f: &Six| -> [C64; 2] {
        let e = C64::from_polar(1.0, p * z) * (-I);
        [e * f[3], -e * f[1]]
    };
    let solve = |src: &dyn Fn(f64, &Six) -> [C64; 2]| -> (Vec<[C64; 2]>, Vec<[C64; 2]>) {
        // cumulative ∫ M(s)^{-1} g(s) ds at every node
        let mut integral = vec![[C64::new(0.0, 0.0); 2]; n];
        let mut acc = [C64::new(0.0, 0.0); 2];
        for (si, seg) in g.segments().iter().enumerate() {
            let (a, cc) = sys.coefficients(seg.layer);
            let m0_inv = sys.to_layer_start(seg.layer).inverse();
            let o = seg.offset;
            integral[o] = acc;
            for j in o..o + g.per_layer() - 1 {
                let (za, zb) = (g.z()[j], g.z()[j + 1]);
                let half = 0.5 * (zb - za);
                for (&t, &wq) in qx.iter().zip(&qw) {
                    let s = za + half * (t + 1.0);
                    let xref = 2.0 * (s - seg.z0) / seg.width() - 1.0;
                    let f: Six = std::array::from_fn(|m| g.eval_segment(&rhs.c[m], si, xref));
                    let gv = src(s, &f);
                    let v = (m0_inv * propagator_ac(a, cc, -(s - seg.z0))).apply(gv);
                    acc[0] += v[0] * (wq * half);
                    acc[1] += v[1] * (wq * half);
                }
                integral[j + 1] = acc;
            }
        }
        let mb = sys.monodromy();
        let tail = mb.apply(acc);
        let coef = pinv.apply([-tail[0], -tail[1]]);
        let mut w = Vec::with_capacity(n);
        let mut dw = Vec::with_capacity(n);
        for seg in g.segments() {
            let (a, cc) = sys.coefficients(seg.layer);
            let m0 = sys.to_layer_start(seg.layer);
            for j in seg.offset..seg.offset + g.per_layer() {
                let z = g.z()[j];
                let mz = propagator_ac(a, cc, z - seg.z0) * m0;
                let wj = mz.apply([coef[0] + integral[j][0], coef[1] + integral[j][1]]);
                let f = rhs.node(j);
                let gj = src(z, &f);
                dw.push([I * a * wj[1] + gj[0], I * cc * wj[0] + gj[1]]);
                w.push(wj);
            }
        }
        (w, dw)
    };
    let (wa, dwa) = solve(&src_a);
    let (wb, dwb) = solve(&src_b);
    let drhs = rhs.derivative();
    let z0 = C64::new(0.0, 0.0);
    let vals = |i: usize| -> Six {
        let ph = phase(p, g.z()[i]);
        let s = g.node_segment(i);
        [
            wa[i][0] * ph,
            -wb[i][0] * ph,
            rhs.c[2][i] / (k * s.eps),
            wb[i][1] * ph,
            wa[i][1] * ph,
            rhs.c[5][i] / (k * s.mu),
        ]
    };
    let ders = |i: usize| -> Six {
        let ph = phase(p, g.z()[i]);
        let s = g.node_segment(i);
        let d = |w: C64, dw: C64| (dw - I * p * w) * ph;
        [
            d(wa[i][0], dwa[i][0]),
            -d(wb[i][0], dwb[i][0]),
            drhs[2][i] / (k * s.eps),
            d(wb[i][1], dwb[i][1]),
            d(wa[i][1], dwa[i][1]),
            drhs[5][i] / (k * s.mu),
        ]
    };
    let _ = z0;
    let v = SixVectorField::from_nodes(g.clone(), vals).with_derivative(ders);
    project_out(sp, &v)
}

/// `∂φ/∂p_z` at the stationary point from `A* ∂φ = Γ3 φ`.
pub fn dmode_dpz(sp: &StationaryPoint, which: Which) -> Result<SixVectorField> {
    let phi = match which {
        Which::X => &sp.phi_x,
        Which::Y => &sp.phi_y,
    };
    solve_class_m(sp, &phi.gamma(3))
}

/// Closed-form lateral derivatives and the `p_z` derivatives of `φX`, `φY`.
pub fn derivative_modes(sp: &StationaryPoint) -> Result<DerivativeMode> {
    let g = sp.phi_x.grid.clone();
    let k = sp.k_star;
    let m = &sp.mode;
    let p = sp.p_z_star;
    let z0 = C64::new(0.0, 0.0);
    let dphi_dpx_h = SixVectorField::from_nodes(g.clone(), |i| {
        let s = g.node_segment(i);
        [z0, z0, -m.h[i] * phase(p, g.z()[i]) / (k * s.eps), z0, z0, z0]
    })
    .with_derivative(|i| {
        let s = g.node_segment(i);
        [z0, z0, -(m.dh[i] - I * p * m.h[i]) * phase(p, g.z()[i]) / (k * s.eps), z0, z0, z0]
    });
    let dphi_dpx_e = SixVectorField::from_nodes(g.clone(), |i| {
        let s = g.node_segment(i);
        [z0, z0, z0, z0, z0, -m.e[i] * phase(p, g.z()[i]) / (k * s.mu)]
    })
    .with_derivative(|i| {
        let s = g.node_segment(i);
        [z0, z0, z0, z0, z0, -(m.de[i] - I * p * m.e[i]) * phase(p, g.z()[i]) / (k * s.mu)]
    });
    Ok(DerivativeMode {
        dphi_dpz_x: dmode_dpz(sp, Which::X)?,
        dphi_dpz_y: dmode_dpz(sp, Which::Y)?,
        dphi_dpx_h,
        dphi_dpx_e,
    })
}

/// Central finite difference in `p_z` of the gauge-fixed, normalized
/// amplitude (Richardson over `h`, `h/2`), projected off `span{φX, φY}`.
pub fn dmode_dpz_fd(sp: &StationaryPoint, which: Which) -> Result<SixVectorField> {
    let b = sp.stack.period();
    let grid = sp.phi_x.grid.clone();
    let at = |pz: f64| -> Result<SixVectorField> {
        let w = omega_at(&sp.stack, Polarization::Axial, 0.0, pz, sp.omega_star)?;
        let (mode, _) = normalized_mode(&sp.stack, grid.clone(), w, pz)?;
        let (x, y) = basis_pair(&mode);
        let (f, reference) = match which {
            Which::X => (x, &sp.phi_x),
            Which::Y => (y, &sp.phi_y),
        };
        // align the phase with the reference mode; the pivot gauge may flip
        // between neighbouring p_z when |E0(0)| ≈ |H0(0)|
        let ov = inner_p(reference, &f)?;
        Ok(f.scale(ov.conj() / ov.norm()))
    };
    let central = |h: f64| -> Result<SixVectorField> {
        let plus = at(sp.p_z_star + h)?;
        let minus = at(sp.p_z_star - h)?;
        Ok(plus.axpy(c(-1.0), &minus)?.scale(c(0.5 / h)))
    };
    let h = 0.01 / b;
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    let r = d2.scale(c(4.0 / 3.0)).axpy(c(-1.0 / 3.0), &d1)?;
    project_out(sp, &SixVectorField { dc: None, ..r })
}

/// Report of the executable orthogonality and symmetry relations, each
/// normalized by `uXX`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `|(φ^{f2}, Γj φ^{f1})|` for `(f2, f1) ∈ {XX, XY, YX, YY}` and `j = 1..3`.
    pub pairings: [[f64; 3]; 4],
    /// The six cross pairings of the derivative modes that vanish.
    pub cross_pairings: [f64; 6],
    /// `sup |Γ3 ∂φ^{H,E}/∂p_x|`.
    pub gamma3_lateral: f64,
    /// `sup |Γ1 φX + Γ2 φY|`, `sup |Γ1 φY - Γ2 φX|`.
    pub gamma_swap: [f64; 2],
    /// Largest `|(v, A* w) - (A* v, w)| / (|v| |w|)` over random class-M pairs.
    pub symmetry: f64,
    /// The same defect for a test function with a jump in component 1.
    pub negative_control: f64,
    /// `|(φY, Γ2 ∂φH/∂p_y)| uXX` against `-ω̈22^H uYY/(2c)` and the E analogue.
    pub lateral_consistency: [f64; 2],
}

impl IdentityReport {
    /// Largest violation among the relations that must vanish.
    pub fn max_violation(&self) -> f64 {
        self.pairings
            .iter()
            .flatten()
            .chain(&self.cross_pairings)
            .chain(std::iter::once(&self.gamma3_lateral))
            .chain(&self.gamma_swap)
            .chain(std::iter::once(&self.symmetry))
            .chain(&self.lateral_consistency)
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Random `b`-periodic class-M test function with exact derivative. With
/// `jump > 0` component 1 gets a layer-dependent offset, breaking continuity.
pub fn class_m_test_function(grid: Arc<ZGrid>, rng: &mut impl Rng, jump: f64) -> SixVectorField {
    let b = grid.period();
    let kk = 2.0 * PI / b;
    let coef: Vec<[C64; 5]> = (0..6)
        .map(|_| std::array::from_fn(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let layer_scale: Vec<f64> = (0..grid.segments().len()).map(|_| rng.gen_range(0.5..1.5)).collect();
    let g = grid.clone();
    let term = |m: usize, z: f64, deriv: bool| -> C64 {
        (0..5)
            .map(|j| {
                let q = kk * (j as f64 - 2.0);
                let e = C64::from_polar(1.0, q * z);
                if deriv {
                    coef[m][j] * e * I * q
                } else {
                    coef[m][j] * e
                }
            })
            .sum()
    };
    let value = |i: usize, deriv: bool| -> Six {
        let z = g.z()[i];
        let seg = g.node_segment(i);
        let ls = layer_scale[seg.layer];
        std::array::from_fn(|m| {
            let t = term(m, z, deriv);
            match m {
                2 | 5 => t * ls,
                0 if jump > 0.0 && !deriv => t + jump * seg.layer as f64,
                _ => t,
            }
        })
    };
    SixVectorField::from_nodes(grid.clone(), |i| value(i, false)).with_derivative(|i| value(i, true))
}

fn symmetry_defect(sp: &StationaryPoint, v: &SixVectorField, w: &SixVectorField) -> Result<f64> {
    let lhs = inner_product(v, &apply_a_star(sp, w)?)?;
    let rhs = inner_product(&apply_a_star(sp, v)?, w)?;
    Ok((lhs - rhs).norm() / (v.l2_norm() * w.l2_norm()))
}

pub fn identity_suite(sp: &StationaryPoint, seed: u64) -> Result<IdentityReport> {
    let u = sp.u_xx;
    let fx = &sp.phi_x;
    let fy = &sp.phi_y;
    let d = &sp.derivatives;
    let pair = |a: &SixVectorField, b: &SixVectorField| inner_product(a, b).map(|v| v.norm() / u);
    let mut pairings = [[0.0; 3]; 4];
    for (r, (f2, f1)) in [(fx, fx), (fx, fy), (fy, fx), (fy, fy)].into_iter().enumerate() {
        for j in 1..=3 {
            pairings[r][j - 1] = pair(f2, &f1.gamma(j))?;
        }
    }
    // ∂/∂p_y of the lateral amplitudes coincides with ∂/∂p_x
    let cross_pairings = [
        pair(fy, &d.dphi_dpx_h.gamma(1))?,
        pair(fx, &d.dphi_dpx_e.gamma(1))?,
        pair(fx, &d.dphi_dpx_h.gamma(2))?,
        pair(fy, &d.dphi_dpx_e.gamma(2))?,
        pair(fy, &d.dphi_dpz_x.gamma(3))?,
        pair(fx, &d.dphi_dpz_y.gamma(3))?,
    ];
    let gamma3_lateral = d.dphi_dpx_h.gamma(3).max_norm().max(d.dphi_dpx_e.gamma(3).max_norm()) / u.sqrt();
    let swap1 = fx.gamma(1).axpy(c(1.0), &fy.gamma(2))?.max_norm() / u.sqrt();
    let swap2 = fy.gamma(1).axpy(c(-1.0), &fx.gamma(2))?.max_norm() / u.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = fx.grid.clone();
    let mut symmetry: f64 = 0.0;
    for _ in 0..20 {
        let v = class_m_test_function(grid.clone(), &mut rng, 0.0);
        let w = class_m_test_function(grid.clone(), &mut rng, 0.0);
        symmetry = symmetry.max(symmetry_defect(sp, &v, &w)?);
    }
    let v = class_m_test_function(grid.clone(), &mut rng, 0.5);
    let w = class_m_test_function(grid.clone(), &mut rng, 0.0);
    let negative_control = symmetry_defect(sp, &v, &w)?;
    let c2 = 2.0 * sp.light_speed;
    let w22_h = -c2 * inner_product(fy, &d.dphi_dpx_h.gamma(2))?.re / sp.u_yy;
    let w22_e = c2 * inner_product(fx, &d.dphi_dpx_e.gamma(2))?.re / sp.u_xx;
    let lateral_consistency = [
        (w22_h - sp.w11_h).abs() / sp.w11_h.abs(),
        (w22_e - sp.w11_e).abs() / sp.w11_e.abs(),
    ];
    Ok(IdentityReport {
        pairings,
        cross_pairings,
        gamma3_lateral,
        gamma_swap: [swap1, swap2],
        symmetry,
        negative_control,
        lateral_consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::qw_stack;

    fn qw_points() -> Vec<StationaryPoint> {
        let q = qw_stack();
        let mut v = find_stationary_points(&q, (0.1, 3.0), &CurvatureOptions::default()).unwrap();
        v.extend(find_stationary_points(&q, (3.0, 4.5), &CurvatureOptions::default()).unwrap());
        v
    }

    #[test]
    fn qw_point_kinds_and_agreement() {
        let pts = qw_points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].kind, PointKind::Hyperbolic);
        assert_eq!(pts[1].kind, PointKind::Elliptic);
        for sp in &pts {
            omega33(sp).unwrap();
            let h = omega11(sp, Polarization::TM).unwrap();
            let e = omega11(sp, Polarization::TE).unwrap();
            assert!(h > 0.0 && e > 0.0);
            assert!((h - e).abs() > 1e-6 * h);
            assert_eq!(sp.u_xx, sp.u_yy);
            assert!((sp.u_xx - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn a_star_annihilates_modes() {
        let sp = &qw_points()[0];
        for phi in [&sp.phi_x, &sp.phi_y] {
            let r = apply_a_star(sp, phi).unwrap();
            assert!(r.max_norm() <= 1e-9 * phi.max_norm() * sp.k_star);
        }
    }

    #[test]
    fn solvability_rejects_energy_rhs() {
        let sp = &qw_points()[0];
        let e = solve_class_m(sp, &sp.phi_x.apply_p()).unwrap_err();
        assert!(matches!(e, Error::SolvabilityViolated { .. }));
    }

    #[test]
    fn derivative_mode_residual_and_fd() {
        for sp in &qw_points() {
            let rhs = sp.phi_x.gamma(3);
            let r = collocation_residual(sp, &sp.derivatives.dphi_dpz_x, &rhs).unwrap();
            assert!(r <= 1e-9, "residual {r}");
            let fd = dmode_dpz_fd(sp, Which::X).unwrap();
            let diff = fd.axpy(c(-1.0), &sp.derivatives.dphi_dpz_x).unwrap().max_norm();
            let rel = diff / sp.derivatives.dphi_dpz_x.max_norm();
            assert!(rel <= 1e-5, "fd mismatch {rel}");
        }
    }

    #[test]
    fn identity_suite_on_qw() {
        for sp in &qw_points() {
            let rep = identity_suite(sp, 7).unwrap();
            assert!(rep.max_violation() <= 1e-9, "{rep:?}");
            assert!(rep.negative_control >= 1e-3);
        }
    }

    #[test]
    fn homogeneous_has_no_points() {
        let h = crate::medium::build_stack(&[crate::medium::Layer::new(1.0, 1.0, 1.0)], 1.0).unwrap();
        let pts = find_stationary_points(&h, (0.1, 10.0), &CurvatureOptions::default()).unwrap();
        assert!(pts.is_empty());
    }
}
