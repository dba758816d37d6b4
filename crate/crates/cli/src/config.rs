//! Run configuration: one TOML file with nested sections.
//!
//! ```toml
//! seed = 7
//!
//! [medium]
//! unit_scale = 1.0
//!
//! [[layer]]
//! thickness = 0.25
//! eps = 4.0
//! mu = 1.0
//!
//! [bands]
//! omega_range = [0.1, 4.5]
//! scan_points = 512
//! ```
//!
//! Every section except the layers has defaults.

use std::path::Path;

use serde::Deserialize;
use twoscale_core::curvature::CurvatureOptions;
use twoscale_core::envelope::CHI_MAX;
use twoscale_core::floquet::Polarization;
use twoscale_core::medium::{build_stack, Layer, LayerStack};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    medium: MediumSection,
    #[serde(default)]
    layer: Vec<Layer>,
    #[serde(default)]
    bands: BandsSection,
    #[serde(default)]
    stationary: StationarySection,
    #[serde(default)]
    envelope: EnvelopeSection,
    #[serde(default)]
    synth: SynthSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MediumSection {
    pub unit_scale: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        Self { unit_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSection {
    pub omega_range: [f64; 2],
    pub scan_points: usize,
    pub polarization: Polarization,
    pub p_par_sq: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self {
            omega_range: [0.1, 4.5],
            scan_points: 512,
            polarization: Polarization::Axial,
            p_par_sq: 0.0,
        }
    }
}

/// Which stationary point drives the envelope and synthesis stages.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// First hyperbolic point in the range.
    Hyperbolic,
    /// First elliptic point in the range.
    Elliptic,
    /// The point with this index in the report.
    Index(usize),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StationarySection {
    pub z_samples_per_layer: usize,
    pub select: Selection,
}

impl Default for StationarySection {
    fn default() -> Self {
        Self {
            z_samples_per_layer: 32,
            select: Selection::Hyperbolic,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    /// Gaussian ring spectrum in `τ̂` (3D) or Gaussian `α1` (when `n_eta = 1`).
    Gaussian,
    /// A single plane wave in `τ̂1`.
    Plane,
    /// `τ̂` spectra read from a JSON file.
    File,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeSection {
    pub chi: f64,
    pub delta_omega: f64,
    pub profile: ProfileKind,
    pub n_xi: usize,
    pub n_eta: usize,
    pub d_xi: f64,
    pub d_eta: f64,
    pub n_zeta: usize,
    pub d_zeta: f64,
    /// Ring radius and width (Gaussian) or wavevector (plane).
    pub p0: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub amplitude_1: [f64; 2],
    pub amplitude_2: [f64; 2],
    pub file: Option<String>,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        Self {
            chi: 0.05,
            delta_omega: 0.0,
            profile: ProfileKind::Gaussian,
            n_xi: 32,
            n_eta: 32,
            d_xi: 0.5,
            d_eta: 0.5,
            n_zeta: 5,
            d_zeta: 0.5,
            p0: 1.5,
            width: 0.4,
            center: [0.0, 0.0],
            amplitude_1: [1.0, 0.0],
            amplitude_2: [0.0, 0.7],
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub order: u8,
    pub periods: usize,
    pub samples_per_period: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            order: 1,
            periods: 8,
            samples_per_period: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            formats: vec![Format::Csv, Format::Bin],
        }
    }
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub layers: Vec<Layer>,
    pub stack: LayerStack,
    pub medium: MediumSection,
    pub bands: BandsSection,
    pub stationary: StationarySection,
    pub envelope: EnvelopeSection,
    pub synth: SynthSection,
    pub output: OutputSection,
}

fn cfg_err(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn finite(field: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be finite, got {v}")))
    }
}

fn positive(field: &str, v: f64) -> CliResult<()> {
    finite(field, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be positive, got {v}")))
    }
}

fn pow2(field: &str, n: usize) -> CliResult<()> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(cfg_err(field, format!("must be a power of two, got {n}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err("toml", e.to_string().trim_end().to_string()))?;
        Self::validate(raw)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(raw: RawConfig) -> CliResult<Self> {
        if raw.layer.is_empty() {
            return Err(cfg_err("layer", "missing [[layer]] section: at least one layer is required"));
        }
        positive("medium.unit_scale", raw.medium.unit_scale)?;
        let stack = build_stack(&raw.layer, raw.medium.unit_scale).map_err(|e| cfg_err("layer", e.to_string()))?;

        let b = &raw.bands;
        let [lo, hi] = b.omega_range;
        positive("bands.omega_range", lo)?;
        positive("bands.omega_range", hi)?;
        if lo >= hi {
            return Err(cfg_err("bands.omega_range", format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if b.scan_points < 64 {
            return Err(cfg_err("bands.scan_points", format!("must be at least 64, got {}", b.scan_points)));
        }
        finite("bands.p_par_sq", b.p_par_sq)?;
        if raw.stationary.z_samples_per_layer < 8 {
            return Err(cfg_err("stationary.z_samples_per_layer", "must be at least 8"));
        }

        let e = &raw.envelope;
        if !(e.chi > 0.0 && e.chi <= CHI_MAX) {
            return Err(cfg_err("envelope.chi", format!("must lie in (0, {CHI_MAX}], got {}", e.chi)));
        }
        finite("envelope.delta_omega", e.delta_omega)?;
        pow2("envelope.n_xi", e.n_xi)?;
        pow2("envelope.n_eta", e.n_eta)?;
        positive("envelope.d_xi", e.d_xi)?;
        positive("envelope.d_eta", e.d_eta)?;
        positive("envelope.d_zeta", e.d_zeta)?;
        if e.n_zeta == 0 {
            return Err(cfg_err("envelope.n_zeta", "must be at least 1"));
        }
        positive("envelope.width", e.width)?;
        finite("envelope.p0", e.p0)?;
        for (name, v) in [
            ("envelope.center", e.center),
            ("envelope.amplitude_1", e.amplitude_1),
            ("envelope.amplitude_2", e.amplitude_2),
        ] {
            finite(name, v[0])?;
            finite(name, v[1])?;
        }
        if e.profile == ProfileKind::File && e.file.is_none() {
            return Err(cfg_err("envelope.file", "profile = \"file\" needs a file path"));
        }

        let s = &raw.synth;
        if s.order > 1 {
            return Err(cfg_err("synth.order", format!("must be 0 or 1, got {}", s.order)));
        }
        if s.periods == 0 {
            return Err(cfg_err("synth.periods", "must be at least 1"));
        }
        pow2("synth.samples_per_period", s.samples_per_period)?;
        if raw.output.dir.is_empty() {
            return Err(cfg_err("output.dir", "must not be empty"));
        }

        Ok(Self {
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
            layers: raw.layer,
            stack,
            medium: raw.medium,
            bands: raw.bands,
            stationary: raw.stationary,
            envelope: raw.envelope,
            synth: raw.synth,
            output: raw.output,
        })
    }

    pub fn curvature_options(&self) -> CurvatureOptions {
        CurvatureOptions {
            z_samples_per_layer: self.stationary.z_samples_per_layer,
            scan_points: self.bands.scan_points,
        }
    }

    pub fn omega_range(&self) -> (f64, f64) {
        (self.bands.omega_range[0], self.bands.omega_range[1])
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

/// The default configuration: the two-layer test stack of the crate docs.
pub const DEFAULT_CONFIG: &str = include_str!("../../../configs/qw.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_parses() {
        let c = RunConfig::from_toml(DEFAULT_CONFIG).unwrap();
        assert_eq!(c.layers.len(), 2);
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn missing_layers_named() {
        let e = RunConfig::from_toml("seed = 1\n").unwrap_err();
        match e {
            CliError::Config { field, .. } => assert_eq!(field, "layer"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chi_guard() {
        let text = DEFAULT_CONFIG.replace("chi = 0.05", "chi = 0.5");
        let e = RunConfig::from_toml(&text).unwrap_err();
        assert!(matches!(e, CliError::Config { ref field, .. } if field == "envelope.chi"), "{e:?}");
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let e = RunConfig::from_toml("[[layer]]\nthickness = 1.0\neps = 1.0\nmu = 1.0\ncolour = 3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("colour") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn lattice_sizes_must_be_powers_of_two() {
        let text = DEFAULT_CONFIG.replace("n_xi = 32", "n_xi = 48");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
