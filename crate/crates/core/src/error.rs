use thiserror::Error;

/// Errors raised by the band-structure, curvature, envelope and synthesis stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("layer stack is empty")]
    EmptyStack,
    #[error("layer {index}: {name} must be positive and finite, got {value}")]
    NonPositiveParameter {
        index: usize,
        name: &'static str,
        value: f64,
    },
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no root of the dispersion relation in [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
    #[error("dF/dω changes sign inside [{lo}, {hi}]")]
    NonMonotoneBracket { lo: f64, hi: f64 },
    #[error("scan cell [{lo}, {hi}] holds more than one extremum of F; raise scan_points")]
    BracketTooCoarse { lo: f64, hi: f64 },
    #[error("point is off the dispersion surface: |F - cos(p_z b)| = {residual:e}")]
    OffDispersionSurface { residual: f64 },
    #[error("M12 vanishes for every candidate period origin")]
    NoValidOrigin,
    #[error("degenerate band edge at ω = {omega}: both Floquet solutions are bounded")]
    DegenerateEdge { omega: f64 },
    #[error("fields are sampled on different grids")]
    GridMismatch,
    #[error("flat band: ω33 = {value:e}")]
    FlatBand { value: f64 },
    #[error("{quantity} estimates disagree: {detail}")]
    ConsistencyFailure { quantity: String, detail: String },
    #[error("right-hand side violates the solvability conditions: |(φX,F)| = {x:e}, |(φY,F)| = {y:e}")]
    SolvabilityViolated { x: f64, y: f64 },
    #[error("spectral data carries a nonzero zero mode ({value:e} of max)")]
    ZeroModeViolation { value: f64 },
    #[error("spectrum does not decay at the lattice boundary ({value:e} of max)")]
    SpectralLeakage { value: f64 },
    #[error("envelope equations are not hyperbolic (ω33 = {w33})")]
    NotHyperbolic { w33: f64 },
    #[error("D'Alembert propagation requires δω = 0, got {delta_omega}")]
    NonzeroDetuning { delta_omega: f64 },
    #[error("envelope coefficients do not match the stationary point: {0}")]
    CoefficientMismatch(String),
    #[error("first-order field requested without derivative modes")]
    MissingDerivativeMode,
    #[error("invalid envelope input: {0}")]
    InvalidEnvelope(String),
    #[error("config error in {field}: {message}")]
    Config { field: String, message: String },
    #[error("export integrity error: {0}")]
    ExportIntegrity(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that signal a numerical consistency problem rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ConsistencyFailure { .. }
                | Error::SolvabilityViolated { .. }
                | Error::OffDispersionSurface { .. }
                | Error::NoValidOrigin
                | Error::BracketTooCoarse { .. }
                | Error::NonMonotoneBracket { .. }
                | Error::NoRootInBracket { .. }
                | Error::FlatBand { .. }
                | Error::DegenerateEdge { .. }
                | Error::ZeroModeViolation { .. }
                | Error::SpectralLeakage { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
