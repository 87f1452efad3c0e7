use thiserror::Error;

/// Failures raised by the cavity model, the pulse pipeline and the optimizers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cavity geometry: {0}")]
    InvalidGeometry(String),

    #[error("rates are not producible by any valid geometry: {0}")]
    Inconsistent(String),

    #[error("degenerate coupling: t_ex = {t_ex} is within 1e-12 of alpha_loss = {alpha_loss}")]
    DegenerateCoupling { t_ex: f64, alpha_loss: f64 },

    #[error("optimizer bracket failure: {0}")]
    BracketFailure(String),

    #[error("time grid too small: truncated norm deficit {deficit:.3e}")]
    GridTooSmall { deficit: f64 },

    #[error("aliasing detected: {fraction:.3e} of the energy sits at the grid edges")]
    AliasingDetected { fraction: f64 },

    #[error("time grid too coarse: dt = {dt:.3e} exceeds 0.1/kappa = {limit:.3e}")]
    GridTooCoarse { dt: f64, limit: f64 },

    #[error("integrator tolerance not met at t = {t:.6e} (step {step:.3e})")]
    ToleranceNotMet { t: f64, step: f64 },

    #[error("insufficient probe spectral power at detuning {delta}")]
    InsufficientSpectralPower { delta: f64 },

    #[error("invalid gate amplitudes: {0}")]
    InvalidAmplitudes(String),

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad user input or configuration.
    Input,
    /// A numerical routine failed (tolerance, bracket, grid).
    Numerical,
    /// File system or serialization failure.
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidGeometry(_)
            | Error::Inconsistent(_)
            | Error::InvalidAmplitudes(_)
            | Error::InvalidArgument(_)
            | Error::InvalidSweep(_)
            | Error::InvalidWaveform(_) => ErrorKind::Input,
            Error::DegenerateCoupling { .. }
            | Error::BracketFailure(_)
            | Error::GridTooSmall { .. }
            | Error::AliasingDetected { .. }
            | Error::GridTooCoarse { .. }
            | Error::ToleranceNotMet { .. }
            | Error::InsufficientSpectralPower { .. } => ErrorKind::Numerical,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
