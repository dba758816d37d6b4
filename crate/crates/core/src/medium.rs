//! One period of a piecewise-constant layered medium.
//!
//! Layers keep their physical relative permittivity and permeability. The
//! thickness-weighted means `eps_av`, `mu_av` set the internal scale: all wave
//! computations use `eps / eps_av`, `mu / mu_av` together with the medium
//! wavenumber `k = sqrt(eps_av * mu_av) * omega` (vacuum light speed `c = 1`).
//! Dispersion relations are therefore stated in physical `omega`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A homogeneous slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub thickness: f64,
    pub eps: f64,
    pub mu: f64,
}

impl Layer {
    pub fn new(thickness: f64, eps: f64, mu: f64) -> Self {
        Self { thickness, eps, mu }
    }
}

/// Normalized constants of a single layer as seen by the wave equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerMedium {
    pub thickness: f64,
    pub eps: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Layer>,
    starts: Vec<f64>,
    period: f64,
    eps_av: f64,
    mu_av: f64,
}

/// Medium parameters at a point. `eps`/`mu` are the physical values; the
/// normalized ones are `eps_norm`/`mu_norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumSample {
    pub eps: f64,
    pub mu: f64,
    pub eps_norm: f64,
    pub mu_norm: f64,
    pub layer_index: usize,
    pub z_local: f64,
}

fn check_positive(index: usize, name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { index, name, value })
    }
}

/// Validates the layers, rescales thicknesses by `unit_scale` and computes the
/// normalization constants.
pub fn build_stack(layers: &[Layer], unit_scale: f64) -> Result<LayerStack> {
    if layers.is_empty() {
        return Err(Error::EmptyStack);
    }
    if !(unit_scale.is_finite() && unit_scale > 0.0) {
        return Err(Error::NonFiniteInput(format!("unit_scale = {unit_scale}")));
    }
    for (i, l) in layers.iter().enumerate() {
        check_positive(i, "thickness", l.thickness)?;
        check_positive(i, "eps", l.eps)?;
        check_positive(i, "mu", l.mu)?;
    }
    let layers: Vec<Layer> = layers
        .iter()
        .map(|l| Layer::new(l.thickness / unit_scale, l.eps, l.mu))
        .collect();
    let mut starts = Vec::with_capacity(layers.len());
    let mut acc = 0.0;
    for l in &layers {
        starts.push(acc);
        acc += l.thickness;
    }
    let period = acc;
    // an already-normalized stack keeps its values bit-for-bit
    let snap = |v: f64| if (v - 1.0).abs() <= 8.0 * f64::EPSILON { 1.0 } else { v };
    let eps_av = snap(layers.iter().map(|l| l.thickness * l.eps).sum::<f64>() / period);
    let mu_av = snap(layers.iter().map(|l| l.thickness * l.mu).sum::<f64>() / period);
    Ok(LayerStack {
        layers,
        starts,
        period,
        eps_av,
        mu_av,
    })
}

impl LayerStack {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Period `b`.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eps_av(&self) -> f64 {
        self.eps_av
    }

    pub fn mu_av(&self) -> f64 {
        self.mu_av
    }

    /// `sqrt(eps_av * mu_av)`.
    pub fn index_av(&self) -> f64 {
        (self.eps_av * self.mu_av).sqrt()
    }

    /// Wavenumber in the average medium, `k = sqrt(eps_av mu_av) omega / c`.
    pub fn wavenumber(&self, omega: f64) -> f64 {
        self.index_av() * omega
    }

    /// Light speed of the average medium in internal units, the `c` that
    /// appears in `omega / c` of the normalized equations.
    pub fn light_speed(&self) -> f64 {
        1.0 / self.index_av()
    }

    /// Start coordinate of each layer within `[0, b)`.
    pub fn layer_starts(&self) -> &[f64] {
        &self.starts
    }

    /// Layer boundaries `0 = z_0 < z_1 < ... < z_N = b`.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut v = self.starts.clone();
        v.push(self.period);
        v
    }

    pub fn medium(&self, index: usize) -> LayerMedium {
        let l = &self.layers[index];
        LayerMedium {
            thickness: l.thickness,
            eps: l.eps / self.eps_av,
            mu: l.mu / self.mu_av,
        }
    }

    /// Layers expressed in normalized units.
    pub fn normalized_layers(&self) -> Vec<Layer> {
        (0..self.len())
            .map(|i| {
                let m = self.medium(i);
                Layer::new(m.thickness, m.eps, m.mu)
            })
            .collect()
    }

    /// Layer containing `z` after reduction to `[0, b)`; interfaces belong to
    /// the layer on their right.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let zr = z.rem_euclid(self.period);
        // rem_euclid may round up to exactly b for tiny negative z
        let zr = if zr >= self.period { 0.0 } else { zr };
        let idx = self.starts.partition_point(|&s| s <= zr).saturating_sub(1);
        (idx, zr - self.starts[idx])
    }

    pub fn sample_profile(&self, z: f64) -> MediumSample {
        let (layer_index, z_local) = self.locate(z);
        let l = &self.layers[layer_index];
        MediumSample {
            eps: l.eps,
            mu: l.mu,
            eps_norm: l.eps / self.eps_av,
            mu_norm: l.mu / self.mu_av,
            layer_index,
            z_local,
        }
    }
}

/// Quarter-wave-like stack used throughout the tests: `d = 0.25, eps = 4`
/// followed by `d = 0.5, eps = 1`.
pub fn qw_stack() -> LayerStack {
    build_stack(
        &[Layer::new(0.25, 4.0, 1.0), Layer::new(0.5, 1.0, 1.0)],
        1.0,
    )
    .expect("valid stack")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn homogeneous_identity() {
        let s = build_stack(&[Layer::new(1.0, 1.0, 1.0)], 1.0).unwrap();
        assert_eq!(s.period(), 1.0);
        assert_eq!(s.eps_av(), 1.0);
        assert_eq!(s.mu_av(), 1.0);
    }

    #[test]
    fn qw_weighted_mean() {
        let s = qw_stack();
        assert_eq!(s.period(), 0.75);
        assert!((s.eps_av() - 2.0).abs() < 1e-15);
        assert_eq!(s.mu_av(), 1.0);
    }

    #[test]
    fn rejects_bad_layers() {
        assert_eq!(build_stack(&[], 1.0), Err(Error::EmptyStack));
        let e = build_stack(&[Layer::new(0.5, -1.0, 1.0)], 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveParameter { name: "eps", .. }));
        let e = build_stack(&[Layer::new(0.0, 1.0, 1.0)], 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveParameter { name: "thickness", .. }));
        let e = build_stack(&[Layer::new(1.0, 1.0, f64::NAN)], 1.0).unwrap_err();
        assert!(matches!(e, Error::NonPositiveParameter { name: "mu", .. }));
    }

    #[test]
    fn unit_scale_rescales_thickness() {
        let s = build_stack(&[Layer::new(250.0, 4.0, 1.0), Layer::new(500.0, 1.0, 1.0)], 1000.0)
            .unwrap();
        assert!((s.period() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sampling_examples() {
        let s = qw_stack();
        assert_eq!(s.sample_profile(0.1).eps, 4.0);
        assert_eq!(s.sample_profile(0.25).eps, 1.0);
        assert_eq!(s.sample_profile(0.85).eps, 4.0);
        assert_eq!(s.sample_profile(0.0).layer_index, 0);
        assert_eq!(s.sample_profile(-0.1).eps, 1.0);
        assert_eq!(s.sample_profile(0.1).eps_norm, 2.0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let s = build_stack(
            &[
                Layer::new(0.3, 7.3, 1.3),
                Layer::new(0.17, 2.1, 0.6),
                Layer::new(0.41, 11.0, 1.9),
            ],
            1.0,
        )
        .unwrap();
        let again = build_stack(&s.normalized_layers(), 1.0).unwrap();
        for (a, b) in again.normalized_layers().iter().zip(s.normalized_layers()) {
            assert!((a.eps - b.eps).abs() <= f64::EPSILON * b.eps);
            assert!((a.mu - b.mu).abs() <= f64::EPSILON * b.mu);
        }
    }

    proptest! {
        #[test]
        fn periodic_extension(z in 0.0f64..0.75, k in -1_000_000i64..1_000_000) {
            let s = qw_stack();
            // keep clear of interfaces, where rounding of z + k b may cross sides
            let near = s.interfaces().iter().any(|&zi| (z - zi).abs() < 1e-6);
            prop_assume!(!near);
            let a = s.sample_profile(z);
            let b = s.sample_profile(z + k as f64 * s.period());
            prop_assert_eq!(a.eps, b.eps);
            prop_assert_eq!(a.mu, b.mu);
            prop_assert_eq!(a.layer_index, b.layer_index);
        }
    }
}
