//! The scenario pipeline: mixing, ray paths, cavity bifurcation, beam
//! profile, and the manifest tying their numbers together.

use std::f64::consts::{PI, SQRT_2};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{
    LossSetting, NamedLoss, NamedWeights, PhysicsContext, Scenario, ScenarioError, ScenarioName,
    SplitWeights,
};
use crate::cavity::{self, AngleLatticeSummary, CavityConfig, SpreadReport};
use crate::field_ray::{
    self, trajectories_to_csv, trajectory_ode, trajectory_quadrature, ClosedFormRay, IndexField,
    IndexModel, IndexProfile, RayPoint, RayState, SplittingAngles, Trajectory,
};
use crate::mixing::{self, Mode, ModeSolution, QTerms};
use crate::numerics::ode::OdeOptions;
use crate::numerics::quadrature::QuadOptions;
use crate::profile::{self, BeamCenter, ModulationReport, ProfileMetrics};
use crate::units::{self, Constants};

/// Every file the pipeline can write, in the order written.
pub const OUTPUT_FILES: [&str; 7] = [
    "indices.json",
    "trajectories.csv",
    "lattice.csv",
    "spread.json",
    "profile.csv",
    "metrics.json",
    "manifest.json",
];

/// Headline numbers of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub delta_theta: f64,
    pub geometric_factor: Option<f64>,
    pub std_y: Option<f64>,
    pub weighted_separation: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub central_deficit: Option<f64>,
    pub reported_deficit: Option<f64>,
}

#[derive(Serialize)]
struct IndicesFile<'a> {
    omega_ev: f64,
    b0_ev2: f64,
    q_terms: &'a QTerms,
    solution: &'a ModeSolution,
    beta: f64,
    symmetric_n_plus: f64,
    symmetric_n_minus: f64,
    index_model: IndexModel,
    profiles: &'a [IndexProfile],
    splitting: &'a SplittingAngles,
}

#[derive(Serialize)]
struct SpreadFile<'a> {
    cavity: &'a CavityConfig,
    analytic_std_y: f64,
    analytic_weighted_separation: f64,
    asymptotic_exponent: f64,
    quoted_exponent: f64,
    #[serde(flatten)]
    report: &'a SpreadReport,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    waist_sigma_m: f64,
    total_power: f64,
    metrics: &'a ProfileMetrics,
    /// `E[y^2] / (2 sigma^2)`, the small-shift limit of the deficit.
    small_shift_deficit: f64,
    /// Waist at which the same ray spread gives a `1e-9` deficit.
    waist_for_1e_minus_9_deficit_m: Option<f64>,
    grid_power: f64,
    modulation: Option<&'a ModulationReport>,
}

#[derive(Debug, Clone, Serialize)]
struct TrajectoryCheck {
    mode: Mode,
    y_end: f64,
    quadrature_z_rel_err: f64,
    ode_y_rel_err: f64,
    ode_ly_rel_err: f64,
    ode_max_tangent_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Reference {
    label: &'static str,
    quoted: f64,
    computed: Option<f64>,
    unit: &'static str,
    /// `log10(computed / quoted)`.
    orders_of_magnitude: Option<f64>,
}

impl Reference {
    fn new(label: &'static str, quoted: f64, computed: Option<f64>, unit: &'static str) -> Self {
        let orders = computed
            .filter(|c| *c > 0.0 && quoted > 0.0)
            .map(|c| (c / quoted).log10());
        Reference {
            label,
            quoted,
            computed,
            unit,
            orders_of_magnitude: orders,
        }
    }
}

#[derive(Serialize)]
struct Derived {
    omega_ev: f64,
    b0_ev2: f64,
    b1_ev2_per_m: f64,
    g_a_ev_inv: f64,
    m_a_ev: f64,
    q_gamma: f64,
    q_a: f64,
    q_m: f64,
    phi: f64,
    beta: f64,
    n_plus_excess: f64,
    n_minus_excess: f64,
    theta_plus: f64,
    theta_minus: f64,
    delta_theta: f64,
    geometric_factor: Option<f64>,
    theta_mode: Option<f64>,
    split_weights: Option<(f64, f64)>,
    axion_loss: Option<f64>,
}

#[derive(Serialize)]
struct ConstantsRecord {
    alpha: f64,
    electron_mass_ev: f64,
    gauss_to_ev2: f64,
    b_crit_gauss: f64,
    b_crit_natural_ev2: f64,
    b_crit_mismatch: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'static str,
    config_sha256: String,
    config: &'a super::ScenarioConfig,
    constants: ConstantsRecord,
    derived: Derived,
    trajectory_checks: Vec<TrajectoryCheck>,
    reference_values: Vec<Reference>,
    gain_provenance: Option<&'static str>,
    files: Vec<String>,
}

fn write(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| ScenarioError::io(&path, e))?;
    files.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Straight path for a mode that sees no gradient.
fn straight(mode: Mode, y0: f64, length: f64, samples: usize) -> Trajectory {
    let samples = samples.max(1);
    Trajectory {
        mode,
        points: (0..=samples)
            .map(|i| RayPoint {
                y: y0,
                z: length * i as f64 / samples as f64,
                l_y: 0.0,
            })
            .collect(),
    }
}

fn trace(
    s: &Scenario,
    profile: &IndexProfile,
) -> Result<(Trajectory, Option<TrajectoryCheck>), ScenarioError> {
    let entry = RayState::normal(s.field.y0, 0.0, profile.mode);
    if profile.b == 0.0 {
        return Ok((
            straight(profile.mode, s.field.y0, s.length, s.samples),
            None,
        ));
    }
    let ray = ClosedFormRay::new(profile, &entry).context("closed-form ray")?;
    let path = ray
        .sample_to_z(s.length, s.samples)
        .context("closed-form ray")?;
    let end = *path.last();
    if end.y == entry.y {
        return Ok((path, None));
    }

    let quad = trajectory_quadrature(profile, &entry, end.y, 1, &QuadOptions::default())
        .context("quadrature ray")?;
    let n_e = profile.n(entry.y);
    let x = profile.b.abs() * s.length / n_e;
    let arclength = if x < 1e-4 {
        s.length * (1.0 + x * x / 6.0)
    } else {
        n_e / profile.b.abs() * x.sinh()
    };
    let ode = trajectory_ode(profile, &entry, arclength, &OdeOptions::default())
        .context("ray equation")?;
    let o = ode.trajectory.last();
    let check = TrajectoryCheck {
        mode: profile.mode,
        y_end: end.y,
        quadrature_z_rel_err: rel_err(quad.last().z, end.z),
        ode_y_rel_err: rel_err(o.y, ray.y_at(o.z)),
        ode_ly_rel_err: rel_err(o.l_y, ray.ly_at_z(o.z)),
        ode_max_tangent_drift: ode.max_tangent_drift,
    };
    Ok((path, Some(check)))
}

/// Exact spread of the affine walk: `y_N = theta L sum_j s_j (N - j + 1/2)`
/// with independent signs of mean `mu`.
fn analytic_std(c: &CavityConfig) -> f64 {
    let (wp, wm) = c.split_weights;
    let mu = (wp - wm) / (wp + wm);
    let n = c.passes as f64;
    c.theta_mode * c.pass_length * ((1.0 - mu * mu) * (n * n * n / 3.0 - n / 12.0)).sqrt()
}

fn config_hash(config: &super::ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs the full pipeline for `scenario` and writes its outputs to `out_dir`.
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunSummary, ScenarioError> {
    fs::create_dir_all(out_dir).map_err(|e| ScenarioError::io(out_dir, e))?;
    let mut files = Vec::new();

    let q = mixing::compute_q_terms(&s.medium).context("mixing")?;
    let sol = mixing::mode_solution(&q, s.medium.omega).context("mixing")?;
    let beta = s.medium.beta();
    let (sym_plus, sym_minus) = mixing::symmetric_indices(beta).context("mixing")?;
    let profiles = Mode::BOTH
        .iter()
        .map(|&m| field_ray::index_profile(&s.medium, &s.field, m, s.index_model))
        .collect::<Result<Vec<_>, _>>()
        .context("index profile")?;
    let splitting = field_ray::splitting_angle(&s.medium, &s.field, s.length, s.index_model)
        .context("splitting")?;
    let indices = IndicesFile {
        omega_ev: s.medium.omega,
        b0_ev2: s.medium.b_field,
        q_terms: &q,
        solution: &sol,
        beta,
        symmetric_n_plus: sym_plus,
        symmetric_n_minus: sym_minus,
        index_model: s.index_model,
        profiles: &profiles,
        splitting: &splitting,
    };
    write(out_dir, "indices.json", &to_json(&indices), &mut files)?;

    let mut paths = Vec::new();
    let mut checks = Vec::new();
    for p in &profiles {
        let (path, check) = trace(s, p)?;
        paths.push(path);
        checks.extend(check);
    }
    write(
        out_dir,
        "trajectories.csv",
        &trajectories_to_csv(&paths),
        &mut files,
    )?;

    let phi = sol.phi;
    let mut cavity_out: Option<(CavityConfig, Vec<AngleLatticeSummary>, SpreadReport)> = None;
    if let Some(plan) = &s.cavity {
        let split_weights = match plan.split_weights {
            SplitWeights::Named(NamedWeights::Equal) => (0.5, 0.5),
            SplitWeights::Named(NamedWeights::Mixing) => (phi.cos().powi(2), phi.sin().powi(2)),
            SplitWeights::Pair([a, b]) => (a, b),
        };
        let axion_loss = match plan.axion_loss {
            LossSetting::Named(NamedLoss::Mixing) => phi.sin().powi(2),
            LossSetting::Named(NamedLoss::None) => 0.0,
            LossSetting::Fraction(x) => x,
        };
        let config = CavityConfig {
            pass_length: s.length,
            passes: plan.passes,
            theta_mode: 0.5 * splitting.delta_theta.abs(),
            split_weights,
            axion_loss,
        };
        let (nodes, report) = cavity::propagate_moments_with(&config, plan.checkpoints_per_decade)
            .context("cavity")?;
        write(
            out_dir,
            "lattice.csv",
            &cavity::lattice_to_csv(&nodes),
            &mut files,
        )?;
        let std = analytic_std(&config);
        let spread = SpreadFile {
            cavity: &config,
            analytic_std_y: std,
            analytic_weighted_separation: std * (2.0 / PI).sqrt(),
            asymptotic_exponent: 1.5,
            quoted_exponent: SQRT_2,
            report: &report,
        };
        write(out_dir, "spread.json", &to_json(&spread), &mut files)?;
        cavity_out = Some((config, nodes, report));
    }

    let mut profile_out: Option<(ProfileMetrics, Option<ModulationReport>)> = None;
    if let Some(beam) = &s.beam {
        let mut centers = match &cavity_out {
            Some((_, nodes, _)) => profile::centers_from_lattice(nodes),
            None => vec![BeamCenter::point(s.field.y0, 1.0)],
        };
        for c in &mut centers {
            c.weight *= beam.total_power;
        }
        let composite = profile::compose_intensity(beam, &centers).context("beam profile")?;
        write(out_dir, "profile.csv", &composite.to_csv(), &mut files)?;
        let m = profile::metrics(&composite, beam).context("beam profile")?;
        let total = composite.total_weight();
        let second_moment = centers
            .iter()
            .map(|c| c.weight * (c.var + c.y * c.y))
            .sum::<f64>()
            / total;
        let sigma = beam.waist_sigma;
        let modulation = s
            .gain
            .map(|g| profile::modulation_report(m.central_deficit, g))
            .transpose()
            .context("modulation")?;
        let metrics_file = MetricsFile {
            waist_sigma_m: sigma,
            total_power: beam.total_power,
            metrics: &m,
            small_shift_deficit: second_moment / (2.0 * sigma * sigma),
            waist_for_1e_minus_9_deficit_m: (second_moment > 0.0)
                .then(|| (second_moment / 2e-9).sqrt()),
            grid_power: composite.grid_power(),
            modulation: modulation.as_ref(),
        };
        write(out_dir, "metrics.json", &to_json(&metrics_file), &mut files)?;
        profile_out = Some((m, modulation));
    }

    let consts = Constants::standard();
    let derived = Derived {
        omega_ev: s.medium.omega,
        b0_ev2: s.medium.b_field,
        b1_ev2_per_m: s.field.b1,
        g_a_ev_inv: s.medium.g_a,
        m_a_ev: s.medium.m_a,
        q_gamma: q.q_gamma,
        q_a: q.q_a,
        q_m: q.q_m,
        phi,
        beta,
        n_plus_excess: sol.n_plus_excess,
        n_minus_excess: sol.n_minus_excess,
        theta_plus: splitting.theta_plus,
        theta_minus: splitting.theta_minus,
        delta_theta: splitting.delta_theta,
        geometric_factor: splitting.geometric_factor,
        theta_mode: cavity_out.as_ref().map(|c| c.0.theta_mode),
        split_weights: cavity_out.as_ref().map(|c| c.0.split_weights),
        axion_loss: cavity_out.as_ref().map(|c| c.0.axion_loss),
    };
    let references = reference_values(
        s,
        &splitting,
        cavity_out.as_ref().map(|c| (&c.0, &c.2)),
        profile_out.as_ref(),
    );
    let gain_provenance = profile_out
        .as_ref()
        .and_then(|p| p.1.as_ref())
        .map(|_| profile::GAIN_PROVENANCE);
    let mut manifest_files = files.clone();
    manifest_files.push("manifest.json".to_string());
    let manifest = Manifest {
        tool: "axmix",
        version: env!("CARGO_PKG_VERSION"),
        scenario: s.name.as_str(),
        config_sha256: config_hash(&s.config),
        config: &s.config,
        constants: ConstantsRecord {
            alpha: consts.alpha,
            electron_mass_ev: consts.m_e,
            gauss_to_ev2: consts.gauss_to_ev2,
            b_crit_gauss: consts.b_crit,
            b_crit_natural_ev2: consts.b_crit_natural(),
            b_crit_mismatch: consts.b_crit_mismatch(),
        },
        derived,
        trajectory_checks: checks,
        reference_values: references,
        gain_provenance,
        files: manifest_files.clone(),
    };
    write(out_dir, "manifest.json", &to_json(&manifest), &mut files)?;

    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        files,
        delta_theta: splitting.delta_theta,
        geometric_factor: splitting.geometric_factor,
        std_y: cavity_out.as_ref().map(|c| c.2.std_y),
        weighted_separation: cavity_out.as_ref().map(|c| c.2.weighted_separation),
        fitted_exponent: cavity_out.as_ref().and_then(|c| c.2.fitted_exponent()),
        central_deficit: profile_out.as_ref().map(|p| p.0.central_deficit),
        reported_deficit: profile_out
            .as_ref()
            .and_then(|p| p.1.as_ref())
            .map(|m| m.reported_deficit),
    })
}

/// Quoted order-of-magnitude figures next to the values this run produces.
fn reference_values(
    s: &Scenario,
    splitting: &SplittingAngles,
    cavity: Option<(&CavityConfig, &SpreadReport)>,
    profile: Option<&(ProfileMetrics, Option<ModulationReport>)>,
) -> Vec<Reference> {
    let cfg = &s.config;
    let consts = Constants::standard();
    let dtheta = splitting.delta_theta.abs();
    let mut out = vec![
        Reference::new(
            "critical field B_crit",
            units::B_CRIT_GAUSS,
            units::natural_to_gauss(consts.b_crit_natural()).ok(),
            "G",
        ),
        Reference::new(
            "coupling g_a, upper end of range",
            1e-10,
            Some(cfg.medium.g_a_gev_inv),
            "GeV^-1",
        ),
        Reference::new(
            "coupling g_a, lower end of range",
            1e-14,
            Some(cfg.medium.g_a_gev_inv),
            "GeV^-1",
        ),
    ];
    let lab = matches!(s.name, ScenarioName::LabCavity | ScenarioName::Custom);
    let magnetar = matches!(s.name, ScenarioName::Magnetar | ScenarioName::Custom);
    if lab {
        let wavelength = cfg.medium.wavelength_m.or_else(|| {
            cfg.medium
                .omega_ev
                .map(|w| 2.0 * PI * units::HBAR_C_EV_M / w)
        });
        let f_g = splitting.geometric_factor;
        out.extend([
            Reference::new(
                "laboratory field strength, low",
                1e4,
                Some(cfg.field.b0_gauss),
                "G",
            ),
            Reference::new(
                "laboratory field strength, high",
                1e5,
                Some(cfg.field.b0_gauss),
                "G",
            ),
            Reference::new(
                "laboratory field region size",
                1.0,
                Some(cfg.ray.length_m),
                "m",
            ),
            Reference::new(
                "laboratory field gradient",
                1e6,
                Some(cfg.field.b1_gauss_per_m),
                "G/m",
            ),
            Reference::new("laboratory geometric factor f_G", 50.0, f_g, "1"),
            Reference::new("photon wavelength", 1e-6, wavelength, "m"),
            Reference::new(
                "splitting angle per unit coupling",
                1e-5,
                (cfg.medium.g_a_gev_inv > 0.0).then(|| dtheta / cfg.medium.g_a_gev_inv),
                "rad GeV",
            ),
            Reference::new("single-pass splitting angle", 1e-15, Some(dtheta), "rad"),
            Reference::new("effective cavity length", 1e5, None, "m"),
            Reference::new(
                "splitting over 1e5 m of unbroken path",
                1e-10,
                Some(dtheta * 1e5 / cfg.ray.length_m),
                "rad",
            ),
        ]);
        let (z_total, sep, std, exponent, theta) = match cavity {
            Some((c, r)) => (
                Some(c.passes as f64 * c.pass_length),
                Some(r.weighted_separation),
                Some(r.std_y),
                r.fitted_exponent(),
                Some(c.theta_mode),
            ),
            None => (None, None, None, None, None),
        };
        out.extend([
            Reference::new("bifurcation path length", 1e4, z_total, "m"),
            Reference::new("per-mode deflection theta", 1e-15, theta, "rad"),
            Reference::new("average separation of beam intensity", 1e-9, sep, "m"),
            Reference::new("ray spread after 1e4 bounces", 1e-9, std, "m"),
            Reference::new("ray density growth exponent", SQRT_2, exponent, "1"),
            Reference::new(
                "instantaneous FWHM intensity drop",
                1e-9,
                profile.map(|p| p.0.central_deficit),
                "E_0",
            ),
            Reference::new(
                "integrated FWHM intensity drop",
                1e-4,
                profile
                    .and_then(|p| p.1.as_ref())
                    .map(|m| m.reported_deficit),
                "1",
            ),
        ]);
    }
    if magnetar {
        let f_g = splitting.geometric_factor;
        out.extend([
            Reference::new(
                "magnetar field strength",
                1e16,
                Some(cfg.field.b0_gauss),
                "G",
            ),
            Reference::new("magnetar radius", 1e5, None, "m"),
            Reference::new("magnetar geometric factor f_G", 0.1, f_g, "1"),
            Reference::new(
                "magnetar field gradient",
                1e11,
                Some(cfg.field.b1_gauss_per_m),
                "G/m",
            ),
            Reference::new("magnetar splitting angle", 1e-2, Some(dtheta), "rad"),
        ]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, ScenarioConfig};

    #[test]
    fn analytic_std_matches_small_enumeration() {
        let c = CavityConfig {
            pass_length: 1.0,
            passes: 10,
            theta_mode: 1e-3,
            split_weights: (0.3, 0.7),
            axion_loss: 0.1,
        };
        let leaves = cavity::enumerate_exact(&c).unwrap();
        let w: f64 = leaves.iter().map(|l| l.weight).sum();
        let mean = leaves.iter().map(|l| l.weight * l.y).sum::<f64>() / w;
        let var = leaves
            .iter()
            .map(|l| l.weight * (l.y - mean).powi(2))
            .sum::<f64>()
            / w;
        assert!(rel_err(var.sqrt(), analytic_std(&c)) < 1e-12);
    }

    #[test]
    fn magnetar_writes_only_mixing_and_ray_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_config(&preset("magnetar").unwrap()).unwrap();
        let summary = run(&s, dir.path()).unwrap();
        assert_eq!(
            summary.files,
            ["indices.json", "trajectories.csv", "manifest.json"]
        );
        assert!(summary.std_y.is_none());
    }

    #[test]
    fn evanescent_mode_is_a_physics_error() {
        let mut cfg: ScenarioConfig = preset("magnetar").unwrap();
        cfg.medium.m_a_ev = 1.0;
        let s = Scenario::from_config(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run(&s, dir.path()),
            Err(ScenarioError::Physics { .. })
        ));
    }

    #[test]
    fn hash_is_stable_hex() {
        let cfg = preset("lab_cavity").unwrap();
        let h = config_hash(&cfg);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&cfg.clone()));
    }
}
