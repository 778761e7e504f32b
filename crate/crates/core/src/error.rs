use thiserror::Error;

/// Errors raised by the physics and numerics layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value:e} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    /// The axion-like mode cannot propagate: `n^2 <= 0`.
    #[error("evanescent mode: n^2 = {n_sq:e}{}", at_y(*.y))]
    Evanescent { n_sq: f64, y: Option<f64> },

    #[error("ray turning point (caustic) reached at y = {y:e} m")]
    TurningPoint { y: f64 },

    #[error("index profile has zero gradient; the ray is a straight line")]
    DegenerateProfile,

    #[error("y = {y:e} m is not reachable on the ray branch selected by the entry state")]
    BranchMismatch { y: f64 },

    #[error("closed-form trajectory requires normal entry, got l_y = {l_y:e}")]
    ObliqueEntry { l_y: f64 },

    #[error("y = {y:e} m lies outside the profile domain [{min:e}, {max:e}]")]
    OutOfDomain { y: f64, min: f64, max: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("ODE step size underflow at arclength {arclength:e} m")]
    StepUnderflow { arclength: f64 },

    #[error("geometric factor is undefined for a zero reference field")]
    UndefinedGeometricFactor,

    #[error("exact enumeration of {passes} passes exceeds the limit of {limit}")]
    TooDeep { passes: usize, limit: usize },

    #[error("growth fit failed: {0}")]
    Fit(String),

    #[error("degenerate intensity profile: {0}")]
    DegenerateIntensity(String),
}

fn at_y(y: Option<f64>) -> String {
    match y {
        Some(y) => format!(" at y = {y:e} m"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        reason,
    }
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(name))
    }
}
