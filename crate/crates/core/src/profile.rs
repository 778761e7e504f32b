//! Intensity of a Gaussian beam whose center has been scattered over many
//! ray positions, and the resulting drop of the central intensity.
//!
//! The composite intensity is `I(y) = sum_i w_i G(y - y_i; s_i)` with
//! `s_i^2 = sigma^2 + v_i`, where `v_i` is the spread of the rays pooled in
//! center `i` (zero for single rays). Metrics are evaluated on this closed
//! form; the sampled grid is only for export and for the power check. The
//! central deficit uses `1 - r e^{-x} = -expm1(ln r - x)`, so shifts many
//! orders of magnitude below `sigma` keep full relative precision.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cavity::AngleLatticeSummary;
use crate::error::{domain, Error, Result};
use crate::output::fmt_num;

/// Grid step as a fraction of the narrowest component width.
const GRID_STEPS_PER_SIGMA: f64 = 64.0;
/// Grid half-extent beyond the outermost center, in component widths.
const GRID_EXTENT_SIGMAS: f64 = 10.0;
const MAX_GRID_POINTS: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBeam {
    /// Standard deviation of the intensity profile, m.
    pub waist_sigma: f64,
    pub total_power: f64,
}

impl GaussianBeam {
    pub fn new(waist_sigma: f64, total_power: f64) -> Result<Self> {
        let b = GaussianBeam {
            waist_sigma,
            total_power,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist_sigma.is_finite() && self.waist_sigma > 0.0) {
            return Err(domain("waist_sigma", self.waist_sigma, "must be > 0"));
        }
        if !(self.total_power.is_finite() && self.total_power > 0.0) {
            return Err(domain("total_power", self.total_power, "must be > 0"));
        }
        Ok(())
    }

    pub fn fwhm(&self) -> f64 {
        2.0 * (2.0 * LN_2).sqrt() * self.waist_sigma
    }
}

/// A displaced copy of the beam carrying `weight` of the power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamCenter {
    pub y: f64,
    pub weight: f64,
    /// Additional variance of the center position, m^2.
    pub var: f64,
}

impl BeamCenter {
    pub fn point(y: f64, weight: f64) -> Self {
        BeamCenter {
            y,
            weight,
            var: 0.0,
        }
    }
}

/// Centers from a bifurcation lattice, one per angle node.
pub fn centers_from_lattice(nodes: &[AngleLatticeSummary]) -> Vec<BeamCenter> {
    nodes
        .iter()
        .filter(|n| n.weight > 0.0)
        .map(|n| BeamCenter {
            y: n.mean_y,
            weight: n.weight,
            var: n.var_y.max(0.0),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeProfile {
    pub sigma: f64,
    pub centers: Vec<BeamCenter>,
    /// `(y, I(y))` on a grid symmetric about 0.
    pub grid: Vec<(f64, f64)>,
}

impl CompositeProfile {
    pub fn total_weight(&self) -> f64 {
        self.centers.iter().map(|c| c.weight).sum()
    }

    pub fn intensity(&self, y: f64) -> f64 {
        self.centers
            .iter()
            .map(|c| {
                let s2 = self.sigma * self.sigma + c.var;
                let d = y - c.y;
                c.weight * (-0.5 * d * d / s2).exp() / (2.0 * PI * s2).sqrt()
            })
            .sum()
    }

    /// Trapezoid integral of the sampled grid.
    pub fn grid_power(&self) -> f64 {
        self.grid
            .windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    }

    fn widest(&self) -> f64 {
        self.centers
            .iter()
            .map(|c| (self.sigma * self.sigma + c.var).sqrt())
            .fold(self.sigma, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y_m,intensity\n");
        for &(y, i) in &self.grid {
            let _ = writeln!(out, "{},{}", fmt_num(y), fmt_num(i));
        }
        out
    }
}

pub fn compose_intensity(beam: &GaussianBeam, centers: &[BeamCenter]) -> Result<CompositeProfile> {
    beam.validate()?;
    if centers.is_empty() {
        return Err(Error::DegenerateIntensity("no beam centers".into()));
    }
    for c in centers {
        if !(c.weight.is_finite() && c.weight >= 0.0) {
            return Err(domain("center weight", c.weight, "must be >= 0"));
        }
        if !(c.y.is_finite() && c.var.is_finite() && c.var >= 0.0) {
            return Err(Error::NonFinite("beam center"));
        }
    }
    let mut profile = CompositeProfile {
        sigma: beam.waist_sigma,
        centers: centers.to_vec(),
        grid: Vec::new(),
    };
    let reach = centers.iter().map(|c| c.y.abs()).fold(0.0, f64::max);
    let extent = reach + GRID_EXTENT_SIGMAS * profile.widest();
    let mut step = beam.waist_sigma / GRID_STEPS_PER_SIGMA;
    let mut half_points = (extent / step).ceil() as usize;
    if 2 * half_points + 1 > MAX_GRID_POINTS {
        half_points = MAX_GRID_POINTS / 2;
        step = extent / half_points as f64;
    }
    profile.grid = (0..=2 * half_points)
        .map(|i| {
            let y = (i as f64 - half_points as f64) * step;
            (y, profile.intensity(y))
        })
        .collect();
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileMetrics {
    pub fwhm: f64,
    pub peak: f64,
    pub peak_y: f64,
    /// `1 - I(0) / I_0(0)`, where `I_0` is the unshifted reference beam
    /// carrying the same total power as the composite.
    pub central_deficit: f64,
    pub reference_fwhm: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// Outermost point where `f` drops through `level`, searching from `from`
/// in direction `dir`.
fn half_max_crossing<F: Fn(f64) -> f64>(
    f: F,
    from: f64,
    dir: f64,
    scale: f64,
    limit: f64,
    level: f64,
) -> Option<f64> {
    let mut inside = from;
    let mut outside = from + dir * scale;
    while f(outside) >= level {
        inside = outside;
        outside += dir * scale;
        if (outside - from).abs() > limit {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Some(0.5 * (inside + outside))
}

pub fn metrics(profile: &CompositeProfile, reference: &GaussianBeam) -> Result<ProfileMetrics> {
    reference.validate()?;
    let total = profile.total_weight();
    if total.is_nan() || total <= 0.0 || profile.grid.is_empty() {
        return Err(Error::DegenerateIntensity(
            "profile carries no power".into(),
        ));
    }
    let f = |y: f64| profile.intensity(y);
    let (mut peak_y, mut peak) = profile.grid[0];
    for &(y, i) in &profile.grid {
        if i > peak {
            peak = i;
            peak_y = y;
        }
    }
    let step = profile
        .grid
        .get(1)
        .map_or(profile.sigma, |p| p.0 - profile.grid[0].0);
    let refined = golden_max(f, peak_y - step, peak_y + step);
    if f(refined) >= peak {
        peak_y = refined;
        peak = f(refined);
    }
    let scale = 0.25 * profile.sigma;
    let limit = profile.grid.last().map_or(0.0, |p| p.0.abs()) * 2.0 + 10.0 * profile.widest();
    let right = half_max_crossing(f, peak_y, 1.0, scale, limit, 0.5 * peak);
    let left = half_max_crossing(f, peak_y, -1.0, scale, limit, 0.5 * peak);
    let (Some(right), Some(left)) = (right, left) else {
        return Err(Error::DegenerateIntensity(
            "no half-maximum crossing".into(),
        ));
    };

    let s = reference.waist_sigma;
    let deficit = profile
        .centers
        .iter()
        .map(|c| {
            let ln_ratio = -0.5 * (c.var / (s * s)).ln_1p();
            let s2 = s * s + c.var;
            c.weight * -(ln_ratio - 0.5 * c.y * c.y / s2).exp_m1()
        })
        .sum::<f64>()
        / total;
    Ok(ProfileMetrics {
        fwhm: right - left,
        peak,
        peak_y,
        central_deficit: deficit.clamp(0.0, 1.0),
        reference_fwhm: reference.fwhm(),
    })
}

/// Bookkeeping for a background-suppression gain applied to the
/// instantaneous deficit. The gain is an input; nothing here derives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationReport {
    pub instantaneous_deficit: f64,
    pub gain: f64,
    pub reported_deficit: f64,
    pub gain_provenance: String,
}

pub const GAIN_PROVENANCE: &str =
    "user-supplied integration/bandwidth gain; not derived from any model quantity";

pub fn modulation_report(deficit: f64, gain: f64) -> Result<ModulationReport> {
    if !(gain.is_finite() && gain >= 1.0) {
        return Err(domain("gain", gain, "must be >= 1"));
    }
    if !(deficit.is_finite() && deficit >= 0.0) {
        return Err(domain("deficit", deficit, "must be >= 0"));
    }
    Ok(ModulationReport {
        instantaneous_deficit: deficit,
        gain,
        reported_deficit: deficit * gain,
        gain_provenance: GAIN_PROVENANCE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn beam() -> GaussianBeam {
        GaussianBeam::new(1e-3, 1.0).unwrap()
    }

    fn pair(delta: f64) -> Vec<BeamCenter> {
        vec![
            BeamCenter::point(delta, 0.5),
            BeamCenter::point(-delta, 0.5),
        ]
    }

    #[test]
    fn single_center_is_the_pure_gaussian() {
        let b = beam();
        let p = compose_intensity(&b, &[BeamCenter::point(0.0, 1.0)]).unwrap();
        let s = b.waist_sigma;
        for y in [0.0, 3e-4, -1.7e-3] {
            let g = (-0.5 * y * y / (s * s)).exp() / ((2.0 * PI).sqrt() * s);
            assert_relative_eq!(p.intensity(y), g, max_relative = 1e-15);
        }
        let m = metrics(&p, &b).unwrap();
        assert_relative_eq!(m.fwhm, 2.0 * (2.0 * LN_2).sqrt() * s, max_relative = 1e-6);
        assert_eq!(m.central_deficit, 0.0);
        assert!(m.peak_y.abs() < 1e-7 * s);
    }

    #[test]
    fn power_is_conserved_on_the_grid() {
        let centers = vec![
            BeamCenter::point(2e-4, 0.3),
            BeamCenter::point(-5e-4, 0.2),
            BeamCenter {
                y: 1e-4,
                weight: 0.4,
                var: 1e-7,
            },
        ];
        let p = compose_intensity(&beam(), &centers).unwrap();
        assert!((p.grid_power() - 0.9).abs() < 1e-10);
        let first = p.grid.first().unwrap().0;
        let last = p.grid.last().unwrap().0;
        assert_eq!(first, -last);
    }

    #[test]
    fn two_center_central_intensity() {
        let b = beam();
        let delta = 1e-6;
        let p = compose_intensity(&b, &pair(delta)).unwrap();
        let s = b.waist_sigma;
        let ratio = p.intensity(0.0) * (2.0 * PI).sqrt() * s;
        assert_relative_eq!(
            ratio,
            (-0.5 * delta * delta / (s * s)).exp(),
            max_relative = 1e-14
        );
        let m = metrics(&p, &b).unwrap();
        assert_relative_eq!(m.central_deficit, 5e-7, max_relative = 1e-6);
    }

    #[test]
    fn deficit_is_quadratic_in_small_shifts() {
        let b = beam();
        for r in [1e-5, 1e-4, 1e-3] {
            let d = |x: f64| {
                metrics(&compose_intensity(&b, &pair(x * 1e-3)).unwrap(), &b)
                    .unwrap()
                    .central_deficit
            };
            assert!((d(2.0 * r) / d(r) - 4.0).abs() < 0.04);
        }
    }

    #[test]
    fn tiny_shifts_keep_relative_precision() {
        // spread/sigma = 1e-13: the deficit 5e-27 must still come out exact.
        let b = beam();
        let m = metrics(&compose_intensity(&b, &pair(1e-16)).unwrap(), &b).unwrap();
        assert_relative_eq!(m.central_deficit, 5e-27, max_relative = 1e-12);
    }

    #[test]
    fn coincident_centers_keep_reference_fwhm() {
        let b = beam();
        let centers = vec![BeamCenter::point(0.0, 0.25); 4];
        let m = metrics(&compose_intensity(&b, &centers).unwrap(), &b).unwrap();
        assert_relative_eq!(m.fwhm, b.fwhm(), max_relative = 1e-12);
    }

    #[test]
    fn empty_or_dark_profiles_rejected() {
        assert!(compose_intensity(&beam(), &[]).is_err());
        assert!(compose_intensity(&beam(), &[BeamCenter::point(0.0, -1.0)]).is_err());
        let dark = compose_intensity(&beam(), &[BeamCenter::point(0.0, 0.0)]).unwrap();
        assert!(matches!(
            metrics(&dark, &beam()),
            Err(Error::DegenerateIntensity(_))
        ));
    }

    #[test]
    fn modulation_bookkeeping() {
        let r = modulation_report(3e-7, 1.0).unwrap();
        assert_eq!(r.reported_deficit, 3e-7);
        let r = modulation_report(1e-9, 1e5).unwrap();
        assert_relative_eq!(r.reported_deficit, 1e-4, max_relative = 1e-12);
        assert_eq!(modulation_report(0.0, 1e8).unwrap().reported_deficit, 0.0);
        assert!(modulation_report(1e-9, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn deficit_grows_with_spread(d in 1e-7f64..5e-4, f in 1.01f64..3.0) {
            let b = beam();
            let m1 = metrics(&compose_intensity(&b, &pair(d)).unwrap(), &b).unwrap();
            let m2 = metrics(&compose_intensity(&b, &pair(d * f)).unwrap(), &b).unwrap();
            prop_assert!(m2.central_deficit >= m1.central_deficit);
            prop_assert!((0.0..=1.0).contains(&m2.central_deficit));
        }

        #[test]
        fn deficit_is_even_in_shift(d in 1e-7f64..5e-4, w in 0.05f64..1.0) {
            let b = beam();
            let a = metrics(&compose_intensity(&b, &[BeamCenter::point(d, w)]).unwrap(), &b).unwrap();
            let c = metrics(&compose_intensity(&b, &[BeamCenter::point(-d, w)]).unwrap(), &b).unwrap();
            prop_assert_eq!(a.central_deficit, c.central_deficit);
        }
    }
}
