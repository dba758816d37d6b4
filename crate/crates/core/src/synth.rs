//! Two-scale asymptotic fields near a stationary point.
//!
//! The principal term is `Ψ0 = α1(ρ) Φ^X(z) + α2(ρ) Φ^Y(z)` with slow
//! variables `ρ = (ξ, η, ζ) = χ(x, y, z)`; the first correction is
//!
//! ```text
//! φ1 = -i(∂ξα1 - ∂ηα2) ∂φ^H/∂p_x - i(∂ηα1 + ∂ξα2) ∂φ^E/∂p_x
//!      - i ∂ζα1 ∂φ^X/∂p_z - i ∂ζα2 ∂φ^Y/∂p_z.
//! ```
//!
//! Fields are evaluated lazily, one fast-`z` slice at a time, on the locked
//! lattice `ζ = χ z`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::StationaryPoint;
use crate::envelope::{EnvelopeSolution, ModalEnvelope, Orders, CHI_MAX};
use crate::error::{Error, Result};
use crate::field::{self, Six, ZERO6};
use crate::field::SixVectorField;
use crate::lattice::SlowLattice;
use crate::linalg::{C64, I};

/// Default number of periods spanned by the fast lattice.
pub const DEFAULT_PERIODS: usize = 8;

/// `Φ^X(z)`, `Φ^Y(z)` (full Floquet solutions) at arbitrary `z`.
pub fn basis_fields(sp: &StationaryPoint, z_values: &[f64]) -> (Vec<Six>, Vec<Six>) {
    let z0 = C64::new(0.0, 0.0);
    z_values
        .iter()
        .map(|&z| {
            let [e, h] = sp.mode.state_at(z);
            ([e, z0, z0, z0, h, z0], [z0, -e, z0, h, z0, z0])
        })
        .unzip()
}

/// Value and `z`-derivative of one basis field at a point.
#[derive(Debug, Clone, Copy)]
struct Local {
    v: Six,
    d: Six,
}

/// The six basis fields at one fast point, with `ε`, `μ` there.
#[derive(Debug, Clone, Copy)]
struct FastBasis {
    eps: f64,
    mu: f64,
    x: Local,
    y: Local,
    dh: Local,
    de: Local,
    dx: Local,
    dy: Local,
}

/// Full field `e^{ipz} f(z)` of a periodic amplitude at node `i` shifted by
/// `n` periods.
fn lift_node(f: &SixVectorField, i: usize, z: f64, p: f64) -> Local {
    let ph = C64::from_polar(1.0, p * z);
    let v = f.node(i);
    let d = f.derivative_node(i).unwrap_or(ZERO6);
    Local {
        v: v.map(|a| a * ph),
        d: std::array::from_fn(|k| (d[k] + I * p * v[k]) * ph),
    }
}

fn lift_at(f: &SixVectorField, z: f64, p: f64) -> Local {
    let ph = C64::from_polar(1.0, p * z);
    let v = f.eval(z);
    let d = f.eval_derivative(z);
    Local {
        v: v.map(|a| a * ph),
        d: std::array::from_fn(|k| (d[k] + I * p * v[k]) * ph),
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticField {
    pub sp: StationaryPoint,
    pub modal: ModalEnvelope,
    pub chi: f64,
    pub delta_omega: f64,
    /// 0: principal term only; 1: with the first correction.
    pub order: u8,
    /// Fast lattice: grid nodes repeated over `periods` periods.
    pub fast_z: Vec<f64>,
    fast_node: Vec<usize>,
}

fn fast_lattice(sp: &StationaryPoint, periods: usize) -> (Vec<f64>, Vec<usize>) {
    let g = &sp.phi_x.grid;
    let b = g.period();
    let mut z = Vec::with_capacity(periods * g.len());
    let mut node = Vec::with_capacity(periods * g.len());
    for n in 0..periods {
        for i in 0..g.len() {
            z.push(g.z()[i] + n as f64 * b);
            node.push(i);
        }
    }
    (z, node)
}

/// `Ψ0 = α1 Φ^X + α2 Φ^Y`.
pub fn principal_field(sp: &StationaryPoint, env: &EnvelopeSolution, chi: f64) -> Result<AsymptoticField> {
    build(sp, env, chi, 0)
}

/// `Ψ0 + χ φ1` with the canonical zero homogeneous part.
pub fn first_order_field(sp: &StationaryPoint, env: &EnvelopeSolution, chi: f64) -> Result<AsymptoticField> {
    let d = &sp.derivatives;
    if [&d.dphi_dpz_x, &d.dphi_dpz_y, &d.dphi_dpx_h, &d.dphi_dpx_e]
        .iter()
        .any(|f| f.dc.is_none() || f.max_norm() == 0.0)
    {
        return Err(Error::MissingDerivativeMode);
    }
    build(sp, env, chi, 1)
}

fn build(sp: &StationaryPoint, env: &EnvelopeSolution, chi: f64, order: u8) -> Result<AsymptoticField> {
    env.coeffs.matches(sp)?;
    if !(0.0..=CHI_MAX).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi = {chi} outside [0, {CHI_MAX}]")));
    }
    let (fast_z, fast_node) = fast_lattice(sp, DEFAULT_PERIODS);
    Ok(AsymptoticField {
        sp: sp.clone(),
        modal: env.modal.clone(),
        chi,
        delta_omega: env.coeffs.delta_omega,
        order,
        fast_z,
        fast_node,
    })
}

const ORDERS0: [Orders; 4] = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)];
const ORDERS1: [Orders; 10] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (0, 0, 1),
    (2, 0, 0),
    (0, 2, 0),
    (1, 1, 0),
    (1, 0, 1),
    (0, 1, 1),
    (0, 0, 2),
];

fn order_index(o: Orders) -> usize {
    ORDERS1.iter().position(|&x| x == o).expect("order listed")
}

/// `L2` and sup norms of the residual relative to the field, plus the `E`
/// and `H` component groups separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub sup: f64,
    pub l2_e: f64,
    pub l2_h: f64,
}

/// Pointwise `s = ½ Re(Ē × H)` and `u = ¼(ε|E|² + μ|H|²)`.
pub fn diagnostics_point(eps: f64, mu: f64, v: &Six) -> ([f64; 3], f64) {
    let e = [v[0], v[1], v[2]];
    let h = [v[3], v[4], v[5]];
    let cross = [
        e[1].conj() * h[2] - e[2].conj() * h[1],
        e[2].conj() * h[0] - e[0].conj() * h[2],
        e[0].conj() * h[1] - e[1].conj() * h[0],
    ];
    let s = cross.map(|x| 0.5 * x.re);
    let u = 0.25 * (eps * e.iter().map(|x| x.norm_sqr()).sum::<f64>() + mu * h.iter().map(|x| x.norm_sqr()).sum::<f64>());
    (s, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticField {
    pub s: Vec<[f64; 3]>,
    pub u: Vec<f64>,
    /// Largest `|<Ψ, Γj Ψ> - 4 s_j|` and `|<Ψ, P Ψ> - 4u|`, relative to
    /// `max(4u)`.
    pub identity_defect: f64,
}

/// Diagnostics of arbitrary point values with their `ε`, `μ`.
pub fn diagnostics(values: &[(f64, f64, Six)]) -> DiagnosticField {
    let mut s = Vec::with_capacity(values.len());
    let mut u = Vec::with_capacity(values.len());
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (eps, mu, v) in values {
        let (si, ui) = diagnostics_point(*eps, *mu, v);
        for j in 1..=3 {
            let g = field::dot6(v, &field::gamma(j, v));
            defect = defect.max((g - C64::new(4.0 * si[j - 1], 0.0)).norm());
        }
        let pe = field::dot6(v, &field::apply_p(*eps, *mu, v));
        defect = defect.max((pe - C64::new(4.0 * ui, 0.0)).norm());
        scale = scale.max(4.0 * ui);
        s.push(si);
        u.push(ui);
    }
    DiagnosticField {
        s,
        u,
        identity_defect: if scale > 0.0 { defect / scale } else { defect },
    }
}

/// Period average of `s_z` for `Φ^X` (`which = 0`) or `Φ^Y`, relative to `uXX`.
pub fn period_averaged_sz(sp: &StationaryPoint, which: usize) -> Result<f64> {
    let f = if which == 0 { &sp.phi_x } else { &sp.phi_y };
    let g = f.grid.clone();
    let sz: Vec<C64> = (0..g.len())
        .map(|i| {
            let s = g.node_segment(i);
            C64::new(diagnostics_point(s.eps, s.mu, &f.node(i)).0[2], 0.0)
        })
        .collect();
    Ok(g.integrate(&sz).re / g.period() / sp.u_xx)
}

impl AsymptoticField {
    pub fn lattice(&self) -> &SlowLattice {
        &self.modal.lattice
    }

    fn p(&self) -> f64 {
        self.sp.p_z_star
    }

    fn basis_node(&self, idx: usize) -> FastBasis {
        let z = self.fast_z[idx];
        let i = self.fast_node[idx];
        let seg = self.sp.phi_x.grid.node_segment(i);
        let d = &self.sp.derivatives;
        let p = self.p();
        FastBasis {
            eps: seg.eps,
            mu: seg.mu,
            x: lift_node(&self.sp.phi_x, i, z, p),
            y: lift_node(&self.sp.phi_y, i, z, p),
            dh: lift_node(&d.dphi_dpx_h, i, z, p),
            de: lift_node(&d.dphi_dpx_e, i, z, p),
            dx: lift_node(&d.dphi_dpz_x, i, z, p),
            dy: lift_node(&d.dphi_dpz_y, i, z, p),
        }
    }

    fn basis_at(&self, z: f64) -> FastBasis {
        let (s, _) = self.sp.phi_x.grid.locate(z);
        let seg = &self.sp.phi_x.grid.segments()[s];
        let d = &self.sp.derivatives;
        let p = self.p();
        FastBasis {
            eps: seg.eps,
            mu: seg.mu,
            x: lift_at(&self.sp.phi_x, z, p),
            y: lift_at(&self.sp.phi_y, z, p),
            dh: lift_at(&d.dphi_dpx_h, z, p),
            de: lift_at(&d.dphi_dpx_e, z, p),
            dx: lift_at(&d.dphi_dpz_x, z, p),
            dy: lift_at(&d.dphi_dpz_y, z, p),
        }
    }

    fn orders(&self) -> &'static [Orders] {
        if self.order == 0 {
            &ORDERS0
        } else {
            &ORDERS1
        }
    }

    /// `Ψ` (value, or `z`-derivative when `dz`) at one lattice point with
    /// envelope derivative accessor `a(j, orders)` already shifted by the
    /// slow derivative being taken.
    fn combine(&self, b: &FastBasis, dz: bool, a: &dyn Fn(usize, Orders) -> C64) -> Six {
        let pick = |l: &Local| if dz { l.d } else { l.v };
        let (x, y) = (pick(&b.x), pick(&b.y));
        let mut out: Six = std::array::from_fn(|k| a(0, (0, 0, 0)) * x[k] + a(1, (0, 0, 0)) * y[k]);
        if self.order >= 1 {
            let c1 = -I * self.chi;
            let wh = a(0, (1, 0, 0)) - a(1, (0, 1, 0));
            let we = a(0, (0, 1, 0)) + a(1, (1, 0, 0));
            let (dh, de, dx, dy) = (pick(&b.dh), pick(&b.de), pick(&b.dx), pick(&b.dy));
            for k in 0..6 {
                out[k] += c1 * (wh * dh[k] + we * de[k] + a(0, (0, 0, 1)) * dx[k] + a(1, (0, 0, 1)) * dy[k]);
            }
        }
        out
    }

    fn slice_with(&self, b: &FastBasis, set: &[[Vec<C64>; 2]], orders: &[Orders]) -> Vec<Six> {
        let n = self.lattice().len();
        let idx = |o: Orders| orders.iter().position(|&x| x == o);
        (0..n)
            .map(|k| {
                self.combine(b, false, &|j, o| idx(o).map_or(C64::new(0.0, 0.0), |i| set[i][j][k]))
            })
            .collect()
    }

    /// `Ψ` over the slow lattice at fast-lattice index `idx`.
    pub fn psi_slice(&self, idx: usize) -> Vec<Six> {
        let b = self.basis_node(idx);
        let zeta = self.chi * self.fast_z[idx];
        let orders = self.orders();
        let set = self.modal.field_set(zeta, orders);
        self.slice_with(&b, &set, orders)
    }

    /// `Ψ` over the slow lattice at an arbitrary `z` (`ζ = χ z`).
    pub fn psi_at(&self, z: f64) -> Vec<Six> {
        let b = self.basis_at(z);
        let orders = self.orders();
        let set = self.modal.field_set(self.chi * z, orders);
        self.slice_with(&b, &set, orders)
    }

    /// `ε`, `μ` and `Ψ` triples of one fast slice, for [`diagnostics`].
    pub fn diagnostics_slice(&self, idx: usize) -> DiagnosticField {
        let b = self.basis_node(idx);
        let vals: Vec<(f64, f64, Six)> = self.psi_slice(idx).into_iter().map(|v| (b.eps, b.mu, v)).collect();
        diagnostics(&vals)
    }

    /// Centroid `Σ ξ |Ψ|² / Σ |Ψ|²` over the slow lattice at `z`.
    pub fn centroid_xi(&self, z: f64) -> f64 {
        let lat = *self.lattice();
        let psi = self.psi_at(z);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..lat.n_xi {
            for j in 0..lat.n_eta {
                let w: f64 = psi[lat.index(i, j)].iter().map(|v| v.norm_sqr()).sum();
                num += lat.xi(i) * w;
                den += w;
            }
        }
        num / den
    }

    /// Residual of the scaled Maxwell system
    /// `k* P Ψ + iΓ3 ∂zΨ + iχ Γ·∇ρ Ψ + χ²(δω/c) P Ψ` over the fast lattice.
    pub fn maxwell_residual(&self) -> ResidualNorms {
        let lat = *self.lattice();
        let k = self.sp.k_star;
        let chi = self.chi;
        let shift = chi * chi * self.delta_omega / self.sp.light_speed;
        let orders: &[Orders] = &ORDERS1;
        let need_second = self.order >= 1;
        let parts: Vec<[f64; 6]> = (0..self.fast_z.len())
            .into_par_iter()
            .map(|idx| {
                let b = self.basis_node(idx);
                let zeta = chi * self.fast_z[idx];
                let used: &[Orders] = if need_second { orders } else { &ORDERS0 };
                let set = self.modal.field_set(zeta, used);
                let get = |j: usize, o: Orders, k: usize| -> C64 {
                    let oi = if need_second {
                        order_index(o)
                    } else {
                        match ORDERS0.iter().position(|&x| x == o) {
                            Some(i) => i,
                            None => return C64::new(0.0, 0.0),
                        }
                    };
                    set[oi][j][k]
                };
                let mut acc = [0.0f64; 6];
                for pt in 0..lat.len() {
                    let base = |j: usize, o: Orders| get(j, o, pt);
                    let psi = self.combine(&b, false, &base);
                    let psi_z = self.combine(&b, true, &base);
                    let slow = |da: u32, db: u32, dc: u32| {
                        self.combine(&b, false, &|j, (a, bb, c)| get(j, (a + da, bb + db, c + dc), pt))
                    };
                    let (px, py, pz) = (slow(1, 0, 0), slow(0, 1, 0), slow(0, 0, 1));
                    let pp = field::apply_p(b.eps, b.mu, &psi);
                    let g3z = field::gamma3(&psi_z);
                    let g1 = field::gamma1(&px);
                    let g2 = field::gamma2(&py);
                    let g3 = field::gamma3(&pz);
                    let mut e2 = 0.0;
                    let mut h2 = 0.0;
                    let mut sup: f64 = 0.0;
                    for c in 0..6 {
                        let r = pp[c] * k + I * g3z[c] + I * chi * (g1[c] + g2[c] + g3[c]) + pp[c] * shift;
                        if c < 3 {
                            e2 += r.norm_sqr();
                        } else {
                            h2 += r.norm_sqr();
                        }
                        sup = sup.max(r.norm());
                    }
                    let psi2: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
                    acc[0] += e2;
                    acc[1] += h2;
                    acc[2] += psi2;
                    acc[3] = acc[3].max(sup);
                    acc[4] = acc[4].max(psi2.sqrt());
                }
                acc
            })
            .collect();
        let (mut e2, mut h2, mut p2, mut sup, mut psup) = (0.0, 0.0, 0.0, 0.0f64, 0.0f64);
        for a in &parts {
            e2 += a[0];
            h2 += a[1];
            p2 += a[2];
            sup = sup.max(a[3]);
            psup = psup.max(a[4]);
        }
        ResidualNorms {
            l2: ((e2 + h2) / p2).sqrt(),
            sup: sup / psup,
            l2_e: (e2 / p2).sqrt(),
            l2_h: (h2 / p2).sqrt(),
        }
    }
}

/// Residual of `field` (convenience wrapper).
pub fn maxwell_residual(field: &AsymptoticField) -> ResidualNorms {
    field.maxwell_residual()
}
