//! Transversely inhomogeneous field, per-mode index profiles and ray
//! propagation through them.
//!
//! The field points along x and varies linearly along y; light enters
//! along z. Within the magnetized region each mode sees its own index
//! `n(y)` and bends toward increasing `n`.

mod trajectory;

pub use trajectory::{
    trajectories_to_csv, trajectory_closed_form, trajectory_ode, trajectory_quadrature,
    ClosedFormRay, OdeTrajectory, RayPoint, Trajectory, TRAJECTORY_CSV_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mixing::{self, MediumParams, Mode};

/// `B(y) = b0 + b1 (y - y0)`, valid on `[y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFieldProfile {
    /// eV^2
    pub b0: f64,
    /// eV^2 / m
    pub b1: f64,
    /// m
    pub y0: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl LinearFieldProfile {
    pub fn new(b0: f64, b1: f64, y0: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let f = LinearFieldProfile {
            b0,
            b1,
            y0,
            y_min,
            y_max,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0.is_finite() && self.b0 >= 0.0) {
            return Err(domain("b0", self.b0, "must be >= 0"));
        }
        if !self.b1.is_finite() {
            return Err(Error::NonFinite("b1"));
        }
        if !(self.y_min.is_finite() && self.y_max.is_finite() && self.y_min <= self.y_max) {
            return Err(domain(
                "y_min",
                self.y_min,
                "domain must satisfy y_min <= y_max",
            ));
        }
        if !(self.y_min..=self.y_max).contains(&self.y0) {
            return Err(domain(
                "y0",
                self.y0,
                "reference point must lie in the domain",
            ));
        }
        for y in [self.y_min, self.y_max] {
            if self.field_at(y) < 0.0 {
                return Err(domain(
                    "B(y)",
                    y,
                    "field becomes negative inside the domain",
                ));
            }
        }
        Ok(())
    }

    pub fn field_at(&self, y: f64) -> f64 {
        self.b0 + self.b1 * (y - self.y0)
    }
}

/// How the per-mode index is obtained from the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexModel {
    /// Maximal-mixing indices `n = 1 +- g_a B / (2 omega)`.
    #[default]
    Symmetric,
    /// Full eigenvalue expression, differentiated analytically in `B`.
    Exact,
}

/// A refractive index as a function of the transverse coordinate.
pub trait IndexField {
    fn n(&self, y: f64) -> f64;

    fn dn_dy(&self, y: f64) -> f64;

    /// `n(y_ref + dy) - n(y_ref)`. Implementations should avoid the
    /// cancellation of the naive difference when `n` is within rounding of
    /// 1, and use `dy` itself rather than a rounded `y_ref + dy`.
    fn delta_n(&self, y_ref: f64, dy: f64) -> f64 {
        self.n(y_ref + dy) - self.n(y_ref)
    }

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Linear index profile `n(y) = n0 + b (y - y0)` of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    pub mode: Mode,
    pub n0: f64,
    /// `n0 - 1`, kept separately because it is often below f64 resolution.
    pub n0_excess: f64,
    /// dn/dy, 1/m
    pub b: f64,
    pub y0: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl IndexProfile {
    /// A bare linear profile, for direct use in the trajectory solvers.
    pub fn linear(mode: Mode, n0: f64, b: f64, y0: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let p = IndexProfile {
            mode,
            n0,
            n0_excess: n0 - 1.0,
            b,
            y0,
            y_min,
            y_max,
        };
        for y in [y_min, y_max] {
            if p.n(y).is_nan() || p.n(y) <= 0.0 {
                return Err(domain("n(y)", y, "index must stay positive on the domain"));
            }
        }
        Ok(p)
    }
}

impl IndexField for IndexProfile {
    fn n(&self, y: f64) -> f64 {
        self.n0 + self.b * (y - self.y0)
    }

    fn dn_dy(&self, _y: f64) -> f64 {
        self.b
    }

    fn delta_n(&self, _y_ref: f64, dy: f64) -> f64 {
        self.b * dy
    }

    fn domain(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }
}

/// Index profile of `mode` in the given field, linearized about `field.y0`.
pub fn index_profile(
    params: &MediumParams,
    field: &LinearFieldProfile,
    mode: Mode,
    model: IndexModel,
) -> Result<IndexProfile> {
    params.validate()?;
    field.validate()?;
    let at_ref = params.with_field(field.b0);
    let (n0, n0_excess, b) = match model {
        IndexModel::Symmetric => {
            let beta = at_ref.beta();
            let slope = params.g_a * field.b1 / (2.0 * params.omega);
            let excess = mode.sign() * beta;
            (1.0 + excess, excess, mode.sign() * slope)
        }
        IndexModel::Exact => {
            let (n, excess, dn_db) = mixing::index_and_field_derivative(&at_ref, mode)?;
            (n, excess, dn_db * field.b1)
        }
    };
    // The full index must be real everywhere the ray may travel.
    for y in [field.y_min, field.y0, field.y_max] {
        let n_sq = match model {
            IndexModel::Symmetric => {
                let n = 1.0 + mode.sign() * params.with_field(field.field_at(y)).beta();
                n * n.abs()
            }
            IndexModel::Exact => match mixing::solve(&params.with_field(field.field_at(y))) {
                Ok(sol) => sol.index(mode).powi(2),
                Err(Error::Evanescent { n_sq, .. }) => n_sq,
                Err(e) => return Err(e),
            },
        };
        if n_sq <= 0.0 {
            return Err(Error::Evanescent { n_sq, y: Some(y) });
        }
    }
    let profile = IndexProfile {
        mode,
        n0,
        n0_excess,
        b,
        y0: field.y0,
        y_min: field.y_min,
        y_max: field.y_max,
    };
    for y in [field.y_min, field.y_max] {
        let n = profile.n(y);
        if n <= 0.0 {
            return Err(Error::Evanescent {
                n_sq: n * n.abs(),
                y: Some(y),
            });
        }
    }
    Ok(profile)
}

/// Position, direction and mode of a ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub y: f64,
    pub z: f64,
    pub l_y: f64,
    pub mode: Mode,
}

impl RayState {
    pub fn normal(y: f64, z: f64, mode: Mode) -> Self {
        RayState {
            y,
            z,
            l_y: 0.0,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::NonFinite("ray position"));
        }
        if !(self.l_y.is_finite() && self.l_y.abs() < 1.0) {
            return Err(domain(
                "l_y",
                self.l_y,
                "tangent component must lie in (-1, 1)",
            ));
        }
        Ok(())
    }

    pub fn l_z(&self) -> f64 {
        (1.0 - self.l_y * self.l_y).sqrt()
    }
}

/// Transverse tangent component at `y` for a ray that entered at `entry`.
///
/// Uses the invariant `n l_z = const`, so `l_y^2 = 1 - C / n^2` with
/// `C = n_e^2 (1 - l_ye^2)`. For normal entry the ray has moved toward
/// increasing index, so the sign follows `y - y_e`; for oblique entry the
/// sign of the entry direction is kept (the branch before any turning
/// point).
pub fn tangent_ly<F: IndexField + ?Sized>(field: &F, y: f64, entry: &RayState) -> Result<f64> {
    entry.validate()?;
    let (lo, hi) = field.domain();
    if !(lo..=hi).contains(&y) {
        return Err(Error::OutOfDomain {
            y,
            min: lo,
            max: hi,
        });
    }
    let n_e = field.n(entry.y);
    let n = field.n(y);
    let delta = field.delta_n(entry.y, y - entry.y);
    let numerator = delta * (n + n_e) + n_e * n_e * entry.l_y * entry.l_y;
    if numerator < 0.0 {
        return Err(Error::TurningPoint { y });
    }
    let magnitude = numerator.sqrt() / n;
    let sign = if entry.l_y != 0.0 {
        entry.l_y.signum()
    } else if y == entry.y {
        0.0
    } else {
        (y - entry.y).signum()
    };
    Ok(sign * magnitude)
}

/// Refraction angles of the two modes after a path of `length` through the
/// gradient region, their splitting and the geometric factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingAngles {
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub delta_theta: f64,
    /// `(b1 / b0) L`; `None` when `b0 = 0`.
    pub geometric_factor: Option<f64>,
}

pub fn splitting_angle(
    params: &MediumParams,
    field: &LinearFieldProfile,
    length: f64,
    model: IndexModel,
) -> Result<SplittingAngles> {
    if !(length.is_finite() && length > 0.0) {
        return Err(domain("length", length, "must be > 0"));
    }
    let angle = |mode| -> Result<f64> {
        let p = index_profile(params, field, mode, model)?;
        Ok(p.b * length / p.n0)
    };
    let theta_plus = angle(Mode::Plus)?;
    let theta_minus = angle(Mode::Minus)?;
    Ok(SplittingAngles {
        theta_plus,
        theta_minus,
        delta_theta: theta_plus - theta_minus,
        geometric_factor: geometric_factor(field, length).ok(),
    })
}

/// `f_G = (b1 / b0) L = L d ln B / dy`.
pub fn geometric_factor(field: &LinearFieldProfile, length: f64) -> Result<f64> {
    if field.b0 == 0.0 {
        return Err(Error::UndefinedGeometricFactor);
    }
    Ok(field.b1 / field.b0 * length)
}
