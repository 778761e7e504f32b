//! Ray paths through an index profile: analytic for linear profiles,
//! quadrature of `dz/dy` for any monotone profile, and direct integration
//! of the ray equation as an independent check.

use std::cell::Cell;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{tangent_ly, IndexField, IndexProfile, RayState};
use crate::error::{Error, Result};
use crate::mixing::Mode;
use crate::numerics::ode::{self, OdeOptions};
use crate::numerics::quadrature::{self, QuadOptions};
use crate::output::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub y: f64,
    pub z: f64,
    pub l_y: f64,
}

/// A sampled ray path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mode: Mode,
    pub points: Vec<RayPoint>,
}

impl Trajectory {
    pub fn last(&self) -> &RayPoint {
        self.points.last().expect("trajectories are never empty")
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "y_m,z_m,l_y,mode";

pub fn trajectories_to_csv(trajectories: &[Trajectory]) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for t in trajectories {
        for p in &t.points {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_num(p.y),
                fmt_num(p.z),
                fmt_num(p.l_y),
                t.mode.as_str()
            );
        }
    }
    out
}

/// Analytic path of a normally-entering ray on a linear profile.
///
/// With `n = n_e + b (y - y_e)` and `n l_z = n_e`:
///
/// ```text
/// z - z_e = (n_e / |b|) arccosh(n / n_e)
/// y - y_e = sign(b) (2 n_e / |b|) sinh^2(|b| (z - z_e) / (2 n_e))
/// ```
///
/// The ray always moves toward increasing `n`, so a negative gradient
/// mirrors the path about `y_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormRay {
    pub mode: Mode,
    n_e: f64,
    slope: f64,
    dir: f64,
    y_e: f64,
    z_e: f64,
    y_min: f64,
    y_max: f64,
}

impl ClosedFormRay {
    pub fn new(profile: &IndexProfile, entry: &RayState) -> Result<Self> {
        entry.validate()?;
        if entry.l_y != 0.0 {
            return Err(Error::ObliqueEntry { l_y: entry.l_y });
        }
        if profile.b == 0.0 {
            return Err(Error::DegenerateProfile);
        }
        if !(profile.y_min..=profile.y_max).contains(&entry.y) {
            return Err(Error::OutOfDomain {
                y: entry.y,
                min: profile.y_min,
                max: profile.y_max,
            });
        }
        Ok(ClosedFormRay {
            mode: profile.mode,
            n_e: profile.n(entry.y),
            slope: profile.b.abs(),
            dir: profile.b.signum(),
            y_e: entry.y,
            z_e: entry.z,
            y_min: profile.y_min,
            y_max: profile.y_max,
        })
    }

    /// Transverse direction the ray bends toward.
    pub fn direction(&self) -> f64 {
        self.dir
    }

    fn check_y(&self, y: f64) -> Result<f64> {
        if !(self.y_min..=self.y_max).contains(&y) {
            return Err(Error::OutOfDomain {
                y,
                min: self.y_min,
                max: self.y_max,
            });
        }
        let s = self.dir * (y - self.y_e);
        if s < 0.0 {
            return Err(Error::BranchMismatch { y });
        }
        Ok(s)
    }

    pub fn z_at(&self, y: f64) -> Result<f64> {
        let s = self.check_y(y)?;
        let eps = self.slope * s / self.n_e;
        // arccosh(1 + eps) without cancellation for tiny eps
        let acosh = (eps + (eps * (2.0 + eps)).sqrt()).ln_1p();
        Ok(self.z_e + self.n_e / self.slope * acosh)
    }

    pub fn y_at(&self, z: f64) -> f64 {
        let half = (self.slope * (z - self.z_e) / (2.0 * self.n_e)).sinh();
        self.y_e + self.dir * 2.0 * self.n_e / self.slope * half * half
    }

    pub fn ly_at(&self, y: f64) -> Result<f64> {
        let s = self.check_y(y)?;
        let delta = self.slope * s;
        let n = self.n_e + delta;
        Ok(self.dir * (delta * (n + self.n_e)).sqrt() / n)
    }

    /// `l_y` after a longitudinal distance `z - z_e`: `l_z = sech`, so
    /// `l_y = tanh(|b| (z - z_e) / n_e)`.
    pub fn ly_at_z(&self, z: f64) -> f64 {
        self.dir * (self.slope * (z - self.z_e) / self.n_e).tanh()
    }

    /// Samples `samples + 1` points uniformly in `sqrt(|y - y_e|)`.
    pub fn sample_to_y(&self, y_end: f64, samples: usize) -> Result<Trajectory> {
        let s_end = self.check_y(y_end)?;
        let samples = samples.max(1);
        let u_end = s_end.sqrt();
        let points = (0..=samples)
            .map(|i| {
                let u = u_end * i as f64 / samples as f64;
                let y = if i == samples {
                    y_end
                } else {
                    self.y_e + self.dir * u * u
                };
                Ok(RayPoint {
                    y,
                    z: self.z_at(y)?,
                    l_y: self.ly_at(y)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            mode: self.mode,
            points,
        })
    }

    /// Samples `samples + 1` points uniformly in `z` up to `z_end`.
    pub fn sample_to_z(&self, z_end: f64, samples: usize) -> Result<Trajectory> {
        let samples = samples.max(1);
        let points: Vec<RayPoint> = (0..=samples)
            .map(|i| {
                let z = self.z_e + (z_end - self.z_e) * i as f64 / samples as f64;
                RayPoint {
                    y: self.y_at(z),
                    z,
                    l_y: self.ly_at_z(z),
                }
            })
            .collect();
        let end = points.last().expect("non-empty").y;
        if !(self.y_min..=self.y_max).contains(&end) {
            return Err(Error::OutOfDomain {
                y: end,
                min: self.y_min,
                max: self.y_max,
            });
        }
        Ok(Trajectory {
            mode: self.mode,
            points,
        })
    }
}

/// Closed-form path from `entry` (normal incidence) to `y_end`.
pub fn trajectory_closed_form(
    profile: &IndexProfile,
    entry: &RayState,
    y_end: f64,
    samples: usize,
) -> Result<Trajectory> {
    ClosedFormRay::new(profile, entry)?.sample_to_y(y_end, samples)
}

/// Path from `entry` to `y_end` by adaptive quadrature of
/// `dz/dy = n_e l_ze / sqrt(n^2 - n_e^2 l_ze^2)`.
///
/// The substitution `y = y_e +- u^2` removes the inverse-square-root
/// singularity at normal entry. Works for any index field that is monotone
/// along the path; a turning point before `y_end` is an error.
pub fn trajectory_quadrature<F: IndexField + ?Sized>(
    field: &F,
    entry: &RayState,
    y_end: f64,
    samples: usize,
    opts: &QuadOptions,
) -> Result<Trajectory> {
    entry.validate()?;
    let (lo, hi) = field.domain();
    for y in [entry.y, y_end] {
        if !(lo..=hi).contains(&y) {
            return Err(Error::OutOfDomain {
                y,
                min: lo,
                max: hi,
            });
        }
    }
    let dir = if entry.l_y != 0.0 {
        entry.l_y.signum()
    } else {
        let g = field.dn_dy(entry.y);
        if g == 0.0 {
            return Err(Error::DegenerateProfile);
        }
        g.signum()
    };
    let point = |y: f64, z: f64| -> Result<RayPoint> {
        Ok(RayPoint {
            y,
            z,
            l_y: tangent_ly(field, y, entry)?,
        })
    };
    if y_end == entry.y {
        return Ok(Trajectory {
            mode: entry.mode,
            points: vec![point(entry.y, entry.z)?],
        });
    }
    if (y_end - entry.y).signum() != dir {
        return Err(Error::BranchMismatch { y: y_end });
    }

    let n_e = field.n(entry.y);
    let invariant = n_e * entry.l_z();
    let tail = n_e * n_e * entry.l_y * entry.l_y;
    let turning: Cell<Option<f64>> = Cell::new(None);
    let integrand = |u: f64| -> f64 {
        let dy = dir * u * u;
        let y = entry.y + dy;
        let d = field.delta_n(entry.y, dy) * (field.n(y) + n_e) + tail;
        if d <= 0.0 {
            if turning.get().is_none() {
                turning.set(Some(y));
            }
            return f64::NAN;
        }
        2.0 * u * invariant / d.sqrt()
    };

    let samples = samples.max(1);
    let u_end = (y_end - entry.y).abs().sqrt();
    let seg_opts = QuadOptions {
        abs_tol: opts.abs_tol / samples as f64,
        ..*opts
    };
    let mut points = Vec::with_capacity(samples + 1);
    points.push(point(entry.y, entry.z)?);
    let mut z = entry.z;
    let mut u_prev = 0.0;
    for i in 1..=samples {
        let u = u_end * i as f64 / samples as f64;
        let piece = quadrature::integrate(integrand, u_prev, u, &seg_opts);
        if let Some(y) = turning.get() {
            return Err(Error::TurningPoint { y });
        }
        z += piece?.value;
        let y = if i == samples {
            y_end
        } else {
            entry.y + dir * u * u
        };
        points.push(point(y, z)?);
        u_prev = u;
    }
    Ok(Trajectory {
        mode: entry.mode,
        points,
    })
}

/// Result of integrating the ray equation.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub trajectory: Trajectory,
    /// Largest deviation of `|l|` from 1 before renormalization, over all
    /// accepted steps.
    pub max_tangent_drift: f64,
}

/// Integrates `dl/ds = (1/n) [grad n - l (l . grad n)]` together with
/// `dr/ds = l` over `arclength`, renormalizing `l` after every step.
pub fn trajectory_ode<F: IndexField + ?Sized>(
    field: &F,
    entry: &RayState,
    arclength: f64,
    opts: &OdeOptions,
) -> Result<OdeTrajectory> {
    entry.validate()?;
    let opts = OdeOptions {
        max_step: Some(opts.max_step.unwrap_or(arclength / 64.0)),
        ..*opts
    };
    let rhs = |_s: f64, x: &[f64; 4]| -> [f64; 4] {
        let g = field.dn_dy(x[0]) / field.n(x[0]);
        [x[2], x[3], g * (1.0 - x[2] * x[2]), -g * x[2] * x[3]]
    };
    let mut points = vec![RayPoint {
        y: entry.y,
        z: entry.z,
        l_y: entry.l_y,
    }];
    let mut drift = 0.0f64;
    let (lo, hi) = field.domain();
    let mut escaped = None;
    ode::integrate(
        rhs,
        0.0,
        [entry.y, entry.z, entry.l_y, entry.l_z()],
        arclength,
        &opts,
        |_, x| {
            let norm = x[2].hypot(x[3]);
            drift = drift.max((norm - 1.0).abs());
            x[2] /= norm;
            x[3] /= norm;
            if escaped.is_none() && !(lo..=hi).contains(&x[0]) {
                escaped = Some(x[0]);
            }
            points.push(RayPoint {
                y: x[0],
                z: x[1],
                l_y: x[2],
            });
        },
    )?;
    if let Some(y) = escaped {
        return Err(Error::OutOfDomain {
            y,
            min: lo,
            max: hi,
        });
    }
    Ok(OdeTrajectory {
        trajectory: Trajectory {
            mode: entry.mode,
            points,
        },
        max_tangent_drift: drift,
    })
}
