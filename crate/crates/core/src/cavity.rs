//! Multi-pass bifurcation of a beam between two planar mirrors.
//!
//! Every pass through the gradient region splits each beam into the two
//! mixed modes, which are deflected by `+-theta_mode`. The mirror projects
//! back onto the photon state, so both daughters split again on the next
//! pass: after `N` passes there are `2^N` rays. Within a pass the transverse
//! offset grows parabolically, so a ray with slope `a` leaves with
//!
//! ```text
//! y' = y + (a + s theta_mode / 2) L,    a' = a + s theta_mode,    s = +-1
//! ```
//!
//! All rays with the same net number of `+` minus `-` choices share a slope,
//! so the tree collapses onto an integer angle lattice `k` (`a = k
//! theta_mode`). [`propagate_moments`] carries the exact weight, mean and
//! variance of `y` per lattice node at O(N^2) total cost; [`enumerate_exact`]
//! builds the full tree for small `N` and is the brute-force check.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{domain, Error, Result};
use crate::output::fmt_num;

/// Largest depth accepted by [`enumerate_exact`] (2^22 leaves).
pub const MAX_ENUMERATION_PASSES: usize = 22;

const PARALLEL_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    /// Field-region length per pass, m.
    pub pass_length: f64,
    pub passes: usize,
    /// Per-mode deflection per pass, rad (half the splitting angle).
    pub theta_mode: f64,
    /// `(w_plus, w_minus)`, summing to 1.
    pub split_weights: (f64, f64),
    /// Fraction of intensity lost at each mirror, in `[0, 1)`.
    pub axion_loss: f64,
}

impl CavityConfig {
    pub fn symmetric(pass_length: f64, passes: usize, theta_mode: f64) -> Self {
        CavityConfig {
            pass_length,
            passes,
            theta_mode,
            split_weights: (0.5, 0.5),
            axion_loss: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pass_length.is_finite() && self.pass_length > 0.0) {
            return Err(domain("pass_length", self.pass_length, "must be > 0"));
        }
        if self.passes == 0 {
            return Err(domain("passes", 0.0, "must be >= 1"));
        }
        if !(self.theta_mode.is_finite() && self.theta_mode >= 0.0) {
            return Err(domain("theta_mode", self.theta_mode, "must be >= 0"));
        }
        let (wp, wm) = self.split_weights;
        if !(wp.is_finite() && wm.is_finite() && wp >= 0.0 && wm >= 0.0) {
            return Err(domain("split_weights", wp.min(wm), "weights must be >= 0"));
        }
        if ((wp + wm) - 1.0).abs() > 1e-12 {
            return Err(domain("split_weights", wp + wm, "weights must sum to 1"));
        }
        if !(self.axion_loss.is_finite() && (0.0..1.0).contains(&self.axion_loss)) {
            return Err(domain("axion_loss", self.axion_loss, "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Transverse displacement over one pass for a ray on lattice node `k`
    /// choosing branch `s`.
    fn step(&self, k: i64, s: f64) -> f64 {
        (k as f64 * self.theta_mode + 0.5 * s * self.theta_mode) * self.pass_length
    }

    fn child_weights(&self) -> (f64, f64) {
        let keep = 1.0 - self.axion_loss;
        (self.split_weights.0 * keep, self.split_weights.1 * keep)
    }
}

/// One ray of the full bifurcation tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamNode {
    pub y: f64,
    pub angle: f64,
    /// Net number of `+` minus `-` deflections.
    pub angle_index: i64,
    pub weight: f64,
    pub depth: usize,
}

/// Every leaf of the `2^N` tree.
pub fn enumerate_exact(config: &CavityConfig) -> Result<Vec<BeamNode>> {
    config.validate()?;
    if config.passes > MAX_ENUMERATION_PASSES {
        return Err(Error::TooDeep {
            passes: config.passes,
            limit: MAX_ENUMERATION_PASSES,
        });
    }
    let (wp, wm) = config.child_weights();
    let mut nodes = vec![BeamNode {
        y: 0.0,
        angle: 0.0,
        angle_index: 0,
        weight: 1.0,
        depth: 0,
    }];
    for _ in 0..config.passes {
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for n in &nodes {
            for (s, w) in [(1i64, wp), (-1i64, wm)] {
                let k = n.angle_index + s;
                next.push(BeamNode {
                    y: n.y + config.step(n.angle_index, s as f64),
                    angle: k as f64 * config.theta_mode,
                    angle_index: k,
                    weight: n.weight * w,
                    depth: n.depth + 1,
                });
            }
        }
        nodes = next;
    }
    Ok(nodes)
}

/// Pooled statistics of all rays sharing one slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleLatticeSummary {
    pub angle_index: i64,
    pub angle: f64,
    pub weight: f64,
    pub mean_y: f64,
    /// Weighted variance of `y` about `mean_y`, m^2.
    pub var_y: f64,
}

impl AngleLatticeSummary {
    /// Weighted second moment `E[y^2]`.
    pub fn m2_y(&self) -> f64 {
        self.var_y + self.mean_y * self.mean_y
    }

    pub fn std_y(&self) -> f64 {
        self.var_y.max(0.0).sqrt()
    }

    fn shifted(&self, dy: f64, dk: i64, w: f64, theta: f64) -> Self {
        let k = self.angle_index + dk;
        AngleLatticeSummary {
            angle_index: k,
            angle: k as f64 * theta,
            weight: self.weight * w,
            mean_y: self.mean_y + dy,
            var_y: self.var_y,
        }
    }

    /// Exact pooling of two groups on the same node.
    fn pool(a: &Self, b: &Self) -> Self {
        let w = a.weight + b.weight;
        if w == 0.0 {
            return AngleLatticeSummary { weight: 0.0, ..*a };
        }
        let fa = a.weight / w;
        let fb = b.weight / w;
        let d = b.mean_y - a.mean_y;
        AngleLatticeSummary {
            angle_index: a.angle_index,
            angle: a.angle,
            weight: w,
            mean_y: a.mean_y + fb * d,
            var_y: fa * a.var_y + fb * b.var_y + fa * fb * d * d,
        }
    }
}

/// The lattice after `depth` passes, ordered by increasing angle index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleLattice {
    pub depth: usize,
    pub nodes: Vec<AngleLatticeSummary>,
}

impl AngleLattice {
    fn initial() -> Self {
        AngleLattice {
            depth: 0,
            nodes: vec![AngleLatticeSummary {
                angle_index: 0,
                angle: 0.0,
                weight: 1.0,
                mean_y: 0.0,
                var_y: 0.0,
            }],
        }
    }

    /// One pass. Node `j` of the new lattice (angle index `2j - depth - 1`)
    /// collects the `+` branch of old node `j - 1` and the `-` branch of old
    /// node `j`, always pooled in that order, so the result does not depend
    /// on how the map is scheduled.
    fn advance(&self, config: &CavityConfig) -> Self {
        let (wp, wm) = config.child_weights();
        let theta = config.theta_mode;
        let old = &self.nodes;
        let build = |j: usize| -> AngleLatticeSummary {
            let from_plus = (j > 0).then(|| {
                let n = &old[j - 1];
                n.shifted(config.step(n.angle_index, 1.0), 1, wp, theta)
            });
            let from_minus = old
                .get(j)
                .map(|n| n.shifted(config.step(n.angle_index, -1.0), -1, wm, theta));
            match (from_plus, from_minus) {
                (Some(a), Some(b)) => AngleLatticeSummary::pool(&a, &b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => unreachable!("every new node has a parent"),
            }
        };
        let len = old.len() + 1;
        let nodes = if len >= PARALLEL_THRESHOLD {
            (0..len).into_par_iter().map(build).collect()
        } else {
            (0..len).map(build).collect()
        };
        AngleLattice {
            depth: self.depth + 1,
            nodes,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.weight).sum()
    }

    pub fn mean_y(&self) -> f64 {
        let w = self.total_weight();
        if w == 0.0 {
            return 0.0;
        }
        self.nodes.iter().map(|n| n.weight * n.mean_y).sum::<f64>() / w
    }

    /// Standard deviation of `y` over all rays (intensity-weighted).
    pub fn std_y(&self) -> f64 {
        let w = self.total_weight();
        if w == 0.0 {
            return 0.0;
        }
        let mean = self.mean_y();
        let var = self
            .nodes
            .iter()
            .map(|n| n.weight * (n.var_y + (n.mean_y - mean).powi(2)))
            .sum::<f64>()
            / w;
        var.max(0.0).sqrt()
    }

    /// Standard deviation of the ray slopes.
    pub fn angle_std(&self) -> f64 {
        let w = self.total_weight();
        if w == 0.0 {
            return 0.0;
        }
        let mean = self.nodes.iter().map(|n| n.weight * n.angle).sum::<f64>() / w;
        let var = self
            .nodes
            .iter()
            .map(|n| n.weight * (n.angle - mean).powi(2))
            .sum::<f64>()
            / w;
        var.sqrt()
    }

    pub fn weighted_separation(&self) -> f64 {
        weighted_separation(&self.nodes)
    }
}

pub const LATTICE_CSV_HEADER: &str = "angle_index,angle_rad,weight,mean_y_m,std_y_m";

pub fn lattice_to_csv(nodes: &[AngleLatticeSummary]) -> String {
    let mut out = String::from(LATTICE_CSV_HEADER);
    out.push('\n');
    for n in nodes {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            n.angle_index,
            fmt_num(n.angle),
            fmt_num(n.weight),
            fmt_num(n.mean_y),
            fmt_num(n.std_y())
        );
    }
    out
}

/// `E|Y|` for `Y ~ N(mean, var)`.
fn mean_abs_normal(mean: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return mean.abs();
    }
    let sd = var.sqrt();
    let r = mean / sd;
    sd * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * r * r).exp()
        + mean * erf(r / std::f64::consts::SQRT_2)
}

/// Intensity-weighted mean distance from the axis, `sum_k w_k E|y|_k`,
/// treating the rays of each node as normally distributed about the node
/// mean.
pub fn weighted_separation(nodes: &[AngleLatticeSummary]) -> f64 {
    nodes
        .iter()
        .filter(|n| n.weight > 0.0)
        .map(|n| n.weight * mean_abs_normal(n.mean_y, n.var_y))
        .sum()
}

/// `sum_i w_i |y_i|` over explicit rays.
pub fn weighted_separation_exact(nodes: &[BeamNode]) -> f64 {
    nodes.iter().map(|n| n.weight * n.y.abs()).sum()
}

/// Least-squares power law `spread = A z^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

/// Minimum span of `z` (as a ratio) accepted by [`fit_growth_exponent`].
pub const MIN_FIT_SPAN: f64 = 100.0;

/// Fits `log(spread)` against `log(z)` over `(z, spread)` checkpoints
/// covering at least two decades.
pub fn fit_growth_exponent(checkpoints: &[(f64, f64)]) -> Result<GrowthFit> {
    if checkpoints.len() < 2 {
        return Err(Error::Fit("need at least two checkpoints".into()));
    }
    if let Some(&(z, s)) = checkpoints
        .iter()
        .find(|(z, s)| !(z.is_finite() && *z > 0.0 && s.is_finite() && *s > 0.0))
    {
        return Err(Error::Fit(format!(
            "non-positive checkpoint (z = {z:e}, spread = {s:e})"
        )));
    }
    let (zmin, zmax) = checkpoints
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(z, _)| {
            (lo.min(z), hi.max(z))
        });
    if zmax / zmin < MIN_FIT_SPAN * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "checkpoints span {:.3} decades, need 2",
            (zmax / zmin).log10()
        )));
    }
    let pts: Vec<(f64, f64)> = checkpoints.iter().map(|&(z, s)| (z.ln(), s.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(GrowthFit {
        exponent,
        prefactor: intercept.exp(),
        residual,
    })
}

/// Spread statistics at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub passes: usize,
    /// Total path length `passes * L`, m.
    pub z_total: f64,
    pub std_y: f64,
    pub weighted_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub passes: usize,
    pub total_weight: f64,
    pub mean_y: f64,
    pub std_y: f64,
    pub weighted_separation: f64,
    pub angle_std: f64,
    /// Power-law fit of `std_y` against `z_total`; absent when the spread
    /// vanishes or the checkpoints span less than two decades.
    pub fit: Option<GrowthFit>,
    /// Exponent of the two straight, non-resplitting beams.
    pub linear_control_exponent: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl SpreadReport {
    pub fn fitted_exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.exponent)
    }

    pub fn spread_pairs(&self) -> Vec<(f64, f64)> {
        self.checkpoints
            .iter()
            .map(|c| (c.z_total, c.std_y))
            .collect()
    }
}

/// Pass counts at which the spread is recorded: about `per_decade`
/// logarithmically spaced values in `1..=passes`, always including
/// `passes`.
pub fn checkpoint_schedule(passes: usize, per_decade: usize) -> Vec<usize> {
    let per_decade = per_decade.max(1) as f64;
    let mut out: Vec<usize> = Vec::new();
    let mut i = 0.0;
    loop {
        let p = 10f64.powf(i / per_decade).round() as usize;
        if p > passes {
            break;
        }
        if out.last() != Some(&p) {
            out.push(p);
        }
        i += 1.0;
    }
    if out.last() != Some(&passes) {
        out.push(passes);
    }
    out
}

/// `(z_total, spread)` for two beams that split once and then travel in
/// straight lines at `+-theta_mode`.
pub fn linear_two_beam_checkpoints(config: &CavityConfig, schedule: &[usize]) -> Vec<(f64, f64)> {
    schedule
        .iter()
        .map(|&p| {
            let z = p as f64 * config.pass_length;
            (z, config.theta_mode * z)
        })
        .collect()
}

pub const DEFAULT_CHECKPOINTS_PER_DECADE: usize = 10;

/// Runs the lattice recursion for `config.passes` passes.
pub fn propagate_moments(
    config: &CavityConfig,
) -> Result<(Vec<AngleLatticeSummary>, SpreadReport)> {
    propagate_moments_with(config, DEFAULT_CHECKPOINTS_PER_DECADE)
}

pub fn propagate_moments_with(
    config: &CavityConfig,
    per_decade: usize,
) -> Result<(Vec<AngleLatticeSummary>, SpreadReport)> {
    let lattice = propagate_lattice(config, per_decade, |_, _| {})?;
    let (lattice, checkpoints) = lattice;
    let pairs: Vec<(f64, f64)> = checkpoints.iter().map(|c| (c.z_total, c.std_y)).collect();
    let schedule: Vec<usize> = checkpoints.iter().map(|c| c.passes).collect();
    let linear = fit_growth_exponent(&linear_two_beam_checkpoints(config, &schedule))
        .ok()
        .map(|f| f.exponent);
    let report = SpreadReport {
        passes: config.passes,
        total_weight: lattice.total_weight(),
        mean_y: lattice.mean_y(),
        std_y: lattice.std_y(),
        weighted_separation: lattice.weighted_separation(),
        angle_std: lattice.angle_std(),
        fit: fit_growth_exponent(&pairs).ok(),
        linear_control_exponent: linear,
        checkpoints,
    };
    Ok((lattice.nodes, report))
}

/// Lattice recursion with a per-pass observer; returns the final lattice and
/// the checkpoint statistics.
pub fn propagate_lattice<O>(
    config: &CavityConfig,
    per_decade: usize,
    mut observe: O,
) -> Result<(AngleLattice, Vec<Checkpoint>)>
where
    O: FnMut(usize, &AngleLattice),
{
    config.validate()?;
    let schedule = checkpoint_schedule(config.passes, per_decade);
    let mut next_checkpoint = schedule.iter().peekable();
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut lattice = AngleLattice::initial();
    for pass in 1..=config.passes {
        lattice = lattice.advance(config);
        observe(pass, &lattice);
        if next_checkpoint.peek() == Some(&&pass) {
            next_checkpoint.next();
            checkpoints.push(Checkpoint {
                passes: pass,
                z_total: pass as f64 * config.pass_length,
                std_y: lattice.std_y(),
                weighted_separation: lattice.weighted_separation(),
            });
        }
    }
    Ok((lattice, checkpoints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn one_pass_two_beams() {
        let cfg = CavityConfig::symmetric(1.0, 1, 2e-3);
        let leaves = enumerate_exact(&cfg).unwrap();
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].weight, 0.5);
        assert_eq!(leaves[1].weight, 0.5);
        assert_eq!(leaves[0].y, 1e-3);
        assert_eq!(leaves[1].y, -1e-3);
        assert_eq!(leaves[0].angle, 2e-3);
    }

    #[test]
    fn tree_sizes_and_conservation() {
        for n in [2usize, 3, 10] {
            let leaves = enumerate_exact(&CavityConfig::symmetric(1.0, n, 1e-3)).unwrap();
            assert_eq!(leaves.len(), 1 << n);
            assert_eq!(leaves.iter().map(|l| l.weight).sum::<f64>(), 1.0);
            assert!(leaves.iter().all(|l| l.depth == n));
        }
    }

    #[test]
    fn enumeration_depth_guard() {
        let cfg = CavityConfig::symmetric(1.0, 23, 1e-3);
        assert_eq!(
            enumerate_exact(&cfg),
            Err(Error::TooDeep {
                passes: 23,
                limit: 22
            })
        );
    }

    #[test]
    fn config_validation() {
        let ok = CavityConfig::symmetric(1.0, 4, 1e-3);
        assert!(ok.validate().is_ok());
        assert!(CavityConfig { passes: 0, ..ok }.validate().is_err());
        assert!(CavityConfig {
            pass_length: 0.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(CavityConfig {
            theta_mode: -1.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(CavityConfig {
            split_weights: (0.7, 0.7),
            ..ok
        }
        .validate()
        .is_err());
        assert!(CavityConfig {
            axion_loss: 1.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_deflection_keeps_everything_on_axis() {
        let (nodes, report) = propagate_moments(&CavityConfig::symmetric(1.0, 500, 0.0)).unwrap();
        assert!(nodes.iter().all(|n| n.mean_y == 0.0 && n.var_y == 0.0));
        assert_eq!(report.std_y, 0.0);
        assert_eq!(report.weighted_separation, 0.0);
        assert!(report.fit.is_none());
    }

    #[test]
    fn separation_of_symmetric_pair() {
        let d = 3e-4;
        let node = |k, y| AngleLatticeSummary {
            angle_index: k,
            angle: 0.0,
            weight: 0.5,
            mean_y: y,
            var_y: 0.0,
        };
        assert_eq!(weighted_separation(&[node(1, d), node(-1, -d)]), d);
        assert_eq!(weighted_separation(&[node(0, 0.0), node(0, 0.0)]), 0.0);
    }

    #[test]
    fn mean_abs_normal_limits() {
        assert_relative_eq!(
            mean_abs_normal(0.0, 4.0),
            2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(mean_abs_normal(50.0, 1.0), 50.0, max_relative = 1e-14);
        assert_relative_eq!(mean_abs_normal(-50.0, 1.0), 50.0, max_relative = 1e-14);
    }

    #[test]
    fn random_walk_variance_closed_form() {
        // y_N = theta L sum_i s_i (N - i + 1/2), so
        // var = theta^2 L^2 (N^3/3 - N/12).
        let (theta, l) = (1e-3, 2.0);
        for n in [1usize, 7, 64, 300] {
            let (_, r) = propagate_moments(&CavityConfig::symmetric(l, n, theta)).unwrap();
            let nf = n as f64;
            let expect = theta * l * (nf.powi(3) / 3.0 - nf / 12.0).sqrt();
            assert_relative_eq!(r.std_y, expect, max_relative = 1e-10);
            assert_relative_eq!(r.angle_std, theta * nf.sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn loss_and_weights_are_applied_per_pass() {
        let cfg = CavityConfig {
            split_weights: (0.8, 0.2),
            axion_loss: 0.1,
            ..CavityConfig::symmetric(1.0, 12, 1e-3)
        };
        let (_, r) = propagate_moments(&cfg).unwrap();
        assert_relative_eq!(r.total_weight, 0.9f64.powi(12), max_relative = 1e-12);
        let leaves = enumerate_exact(&cfg).unwrap();
        let w: f64 = leaves.iter().map(|l| l.weight).sum();
        assert_relative_eq!(w, 0.9f64.powi(12), max_relative = 1e-12);
        assert!(r.mean_y > 0.0);
    }

    #[test]
    fn schedule_is_log_spaced_and_ends_at_passes() {
        let s = checkpoint_schedule(1000, 10);
        assert_eq!(s.first(), Some(&1));
        assert_eq!(s.last(), Some(&1000));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(checkpoint_schedule(7, 10).last(), Some(&7));
    }

    #[test]
    fn linear_control_fits_unit_exponent() {
        let cfg = CavityConfig::symmetric(1.0, 1000, 1e-6);
        let pts = linear_two_beam_checkpoints(&cfg, &checkpoint_schedule(1000, 10));
        let fit = fit_growth_exponent(&pts).unwrap();
        assert!((fit.exponent - 1.0).abs() < 1e-6);
        let scaled: Vec<_> = pts.iter().map(|&(z, s)| (10.0 * z, s)).collect();
        let fit2 = fit_growth_exponent(&scaled).unwrap();
        assert!((fit2.exponent - fit.exponent).abs() < 1e-9);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(fit_growth_exponent(&[(1.0, 1.0), (10.0, 2.0)]).is_err());
        assert!(fit_growth_exponent(&[(1.0, 0.0), (1000.0, 2.0)]).is_err());
        assert!(fit_growth_exponent(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let (nodes, _) = propagate_moments(&CavityConfig::symmetric(1.0, 5, 1e-3)).unwrap();
        let csv = lattice_to_csv(&nodes);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("angle_index,angle_rad,weight,mean_y_m,std_y_m\n-5,"));
    }

    proptest! {
        #[test]
        fn spread_is_linear_in_theta(theta in 1e-12f64..1e-3, f in 0.1f64..10.0, n in 1usize..60) {
            let (_, a) = propagate_moments(&CavityConfig::symmetric(1.0, n, theta)).unwrap();
            let (_, b) = propagate_moments(&CavityConfig::symmetric(1.0, n, theta * f)).unwrap();
            prop_assert!((b.std_y / a.std_y - f).abs() < 1e-10 * f);
        }

        #[test]
        fn spread_grows_with_passes(theta in 1e-9f64..1e-3, n in 1usize..80) {
            let cfg = CavityConfig::symmetric(0.5, n + 1, theta);
            let (_, report) = propagate_moments_with(&cfg, 1000).unwrap();
            let stds: Vec<f64> = report.checkpoints.iter().map(|c| c.std_y).collect();
            prop_assert!(stds.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn symmetric_split_has_zero_mean(theta in 1e-9f64..1e-2, n in 1usize..200) {
            let (_, r) = propagate_moments(&CavityConfig::symmetric(1.0, n, theta)).unwrap();
            prop_assert!(r.mean_y.abs() <= 1e-15 * r.std_y.max(f64::MIN_POSITIVE) * n as f64);
        }
    }
}
