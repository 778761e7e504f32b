//! Photon-axion dispersion matrix, its diagonalization and the two mixed
//! propagation modes.
//!
//! For a field `B` along x and light polarized along the field, the
//! amplitudes `(A, a)` satisfy `[(w^2 - k^2) I + M] (A, a) = 0` with
//!
//! ```text
//! M = | Q_g     -i Q_M |      Q_g = w^2 (7 alpha / 45 pi) (B / B_crit)^2
//!     | i Q_M    Q_a   |      Q_a = -m_a^2,  Q_M = w g_a B
//! ```
//!
//! The eigenvalues `lambda_+- = k^2 - w^2` give the refraction indices
//! `n_+-^2 = 1 + lambda_+- / w^2`. The mixing angle obeys
//! `tan 2 phi = 2 Q_M / (Q_g - Q_a)`, which diagonalizes `M` exactly and
//! reaches 45 degrees when `Q_g = Q_a`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, finite, Error, Result};
use crate::units::Constants;

/// The two mixed propagation modes: `Plus` is photon-like (`n >= 1`),
/// `Minus` is axion-like (`n <= 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Plus,
    Minus,
}

impl Mode {
    pub const BOTH: [Mode; 2] = [Mode::Plus, Mode::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Mode::Plus => 1.0,
            Mode::Minus => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Plus => "plus",
            Mode::Minus => "minus",
        }
    }
}

/// Physical inputs in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Photon energy, eV.
    pub omega: f64,
    /// External field, eV^2.
    pub b_field: f64,
    /// Axion-photon coupling, eV^-1.
    pub g_a: f64,
    /// Axion mass, eV.
    pub m_a: f64,
}

impl MediumParams {
    pub fn new(omega: f64, b_field: f64, g_a: f64, m_a: f64) -> Result<Self> {
        let p = MediumParams {
            omega,
            b_field,
            g_a,
            m_a,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(domain("omega", self.omega, "must be > 0"));
        }
        if !(self.b_field.is_finite() && self.b_field >= 0.0) {
            return Err(domain("b_field", self.b_field, "must be >= 0"));
        }
        if !(self.g_a.is_finite() && self.g_a >= 0.0) {
            return Err(domain("g_a", self.g_a, "must be >= 0"));
        }
        if !(self.m_a.is_finite() && self.m_a >= 0.0) {
            return Err(domain("m_a", self.m_a, "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_field(&self, b_field: f64) -> Self {
        MediumParams { b_field, ..*self }
    }

    /// `beta = g_a B / (2 omega)`, the symmetric-mixing index offset.
    pub fn beta(&self) -> f64 {
        self.g_a * self.b_field / (2.0 * self.omega)
    }
}

/// Entries of the dispersion matrix, eV^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTerms {
    pub q_gamma: f64,
    pub q_a: f64,
    pub q_m: f64,
}

/// `7 alpha / (45 pi)`, the vacuum-polarization prefactor of `Q_g`.
pub fn vacuum_polarization_coefficient() -> f64 {
    7.0 * Constants::standard().alpha / (45.0 * PI)
}

pub fn compute_q_terms(p: &MediumParams) -> Result<QTerms> {
    p.validate()?;
    let ratio = p.b_field / Constants::standard().b_crit_natural();
    let q = QTerms {
        q_gamma: finite(
            "q_gamma",
            p.omega * p.omega * vacuum_polarization_coefficient() * ratio * ratio,
        )?,
        q_a: finite("q_a", -p.m_a * p.m_a)?,
        q_m: finite("q_m", p.omega * p.g_a * p.b_field)?,
    };
    Ok(q)
}

/// Hermitian dispersion matrix `M` (without the `(w^2 - k^2) I` part).
pub fn dispersion_matrix(q: &QTerms) -> [[Complex64; 2]; 2] {
    [
        [Complex64::new(q.q_gamma, 0.0), Complex64::new(0.0, -q.q_m)],
        [Complex64::new(0.0, q.q_m), Complex64::new(q.q_a, 0.0)],
    ]
}

/// Eigenvalues, indices and mixing angle of the two modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub n_plus: f64,
    pub n_minus: f64,
    /// `n_plus - 1` computed without cancellation.
    pub n_plus_excess: f64,
    /// `n_minus - 1` computed without cancellation.
    pub n_minus_excess: f64,
    /// Mixing angle, radians.
    pub phi: f64,
}

impl ModeSolution {
    pub fn index(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Plus => self.n_plus,
            Mode::Minus => self.n_minus,
        }
    }

    pub fn excess(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Plus => self.n_plus_excess,
            Mode::Minus => self.n_minus_excess,
        }
    }

    pub fn lambda(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Plus => self.lambda_plus,
            Mode::Minus => self.lambda_minus,
        }
    }

    /// Wavenumber of a mode, `k^2 = omega^2 + lambda`.
    pub fn wavenumber(&self, mode: Mode, omega: f64) -> f64 {
        (omega * omega + self.lambda(mode)).sqrt()
    }
}

fn eigenvalues(q: &QTerms) -> (f64, f64) {
    let mean = 0.5 * (q.q_gamma + q.q_a);
    let radius = (0.5 * (q.q_gamma - q.q_a)).hypot(q.q_m);
    // Larger-magnitude root directly, the other from the product of roots.
    let det = q.q_gamma * q.q_a - q.q_m * q.q_m;
    if mean >= 0.0 {
        let plus = mean + radius;
        let minus = if plus != 0.0 {
            det / plus
        } else {
            mean - radius
        };
        (plus, minus)
    } else {
        let minus = mean - radius;
        (det / minus, minus)
    }
}

/// Index and `n - 1` from `n^2 = 1 + x`.
fn index_from(x: f64) -> (f64, f64) {
    let n = (1.0 + x).sqrt();
    (n, x / (1.0 + n))
}

pub fn mode_solution(q: &QTerms, omega: f64) -> Result<ModeSolution> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(domain("omega", omega, "must be > 0"));
    }
    let (lambda_plus, lambda_minus) = eigenvalues(q);
    let w2 = omega * omega;
    let n_minus_sq = 1.0 + lambda_minus / w2;
    if n_minus_sq <= 0.0 {
        return Err(Error::Evanescent {
            n_sq: n_minus_sq,
            y: None,
        });
    }
    let (n_plus, n_plus_excess) = index_from(lambda_plus / w2);
    let (n_minus, n_minus_excess) = index_from(lambda_minus / w2);
    let phi = 0.5 * (2.0 * q.q_m).atan2(q.q_gamma - q.q_a);
    let sol = ModeSolution {
        lambda_plus: finite("lambda_plus", lambda_plus)?,
        lambda_minus: finite("lambda_minus", lambda_minus)?,
        n_plus: finite("n_plus", n_plus)?,
        n_minus: finite("n_minus", n_minus)?,
        n_plus_excess,
        n_minus_excess,
        phi: finite("phi", phi)?,
    };
    Ok(sol)
}

/// Convenience: q-terms and mode solution for a medium.
pub fn solve(p: &MediumParams) -> Result<ModeSolution> {
    mode_solution(&compute_q_terms(p)?, p.omega)
}

/// Index of one mode and its derivative with respect to the field strength,
/// `(n, n - 1, dn/dB)`, from the full eigenvalue expression.
pub fn index_and_field_derivative(p: &MediumParams, mode: Mode) -> Result<(f64, f64, f64)> {
    let q = compute_q_terms(p)?;
    let sol = mode_solution(&q, p.omega)?;
    let w2 = p.omega * p.omega;
    let d_q_gamma = 2.0 * w2 * vacuum_polarization_coefficient() * p.b_field
        / Constants::standard().b_crit_natural().powi(2);
    let d_q_m = p.omega * p.g_a;
    let half_diff = 0.5 * (q.q_gamma - q.q_a);
    let radius = half_diff.hypot(q.q_m);
    let d_radius = if radius > 0.0 {
        (half_diff * 0.5 * d_q_gamma + q.q_m * d_q_m) / radius
    } else {
        // B -> 0+ with m_a = 0: radius ~ omega g_a B.
        d_q_m
    };
    let d_lambda = 0.5 * d_q_gamma + mode.sign() * d_radius;
    let n = sol.index(mode);
    Ok((
        n,
        sol.excess(mode),
        finite("dn/dB", d_lambda / (2.0 * n * w2))?,
    ))
}

/// Symmetric-mixing indices `(1 + beta, 1 - beta)`.
pub fn symmetric_indices(beta: f64) -> Result<(f64, f64)> {
    if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
        return Err(domain("beta", beta, "must satisfy 0 <= beta < 1"));
    }
    Ok((1.0 + beta, 1.0 - beta))
}

/// `[[cos phi, i sin phi], [i sin phi, cos phi]]`.
pub fn mixing_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new(phi.cos(), 0.0);
    let s = Complex64::new(0.0, phi.sin());
    [[c, s], [s, c]]
}

/// Applies the mixing matrix to pure photon/axion amplitudes.
pub fn mix_states(
    phi: f64,
    photon_amp: Complex64,
    axion_amp: Complex64,
) -> Result<(Complex64, Complex64)> {
    finite("phi", phi)?;
    let r = mixing_matrix(phi);
    let out = (
        r[0][0] * photon_amp + r[0][1] * axion_amp,
        r[1][0] * photon_amp + r[1][1] * axion_amp,
    );
    if !(out.0.is_finite() && out.1.is_finite()) {
        return Err(Error::NonFinite("mix_states"));
    }
    Ok(out)
}

/// Eigenvectors of the dispersion matrix in the `(A, a)` basis, i.e. the
/// columns of the mixing matrix: `(cos, i sin)` for `Plus` and
/// `(i sin, cos)` for `Minus`.
pub fn eigenstate(phi: f64, mode: Mode) -> [Complex64; 2] {
    let r = mixing_matrix(phi);
    match mode {
        Mode::Plus => [r[0][0], r[1][0]],
        Mode::Minus => [r[0][1], r[1][1]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{gauss_to_natural, wavelength_to_omega};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn lab() -> MediumParams {
        MediumParams::new(1.24, gauss_to_natural(1e5).unwrap(), 1e-19, 1e-5).unwrap()
    }

    fn residual(q: &QTerms, phi: f64, mode: Mode, lambda: f64) -> f64 {
        let m = dispersion_matrix(q);
        let v = eigenstate(phi, mode);
        let mut r = 0.0f64;
        for i in 0..2 {
            let mv = m[i][0] * v[0] + m[i][1] * v[1];
            r = r.max((mv - v[i] * lambda).norm());
        }
        r
    }

    #[test]
    fn lab_q_terms() {
        // Values from an mpmath evaluation of the three formulas.
        let q = compute_q_terms(&lab()).unwrap();
        assert_relative_eq!(q.q_gamma, 2.851_534_749_941_045e-21, max_relative = 1e-9);
        assert_relative_eq!(q.q_a, -1.0e-10, max_relative = 1e-15);
        assert_relative_eq!(q.q_m, 2.422_374_362_143_385e-16, max_relative = 1e-12);
    }

    #[test]
    fn zero_field_q_terms() {
        let q = compute_q_terms(&MediumParams::new(1.24, 0.0, 1e-19, 1e-5).unwrap()).unwrap();
        assert_eq!((q.q_gamma, q.q_m), (0.0, 0.0));
        assert_relative_eq!(q.q_a, -1e-10, max_relative = 1e-15);
        let q = compute_q_terms(&MediumParams::new(1.24, 0.0, 1e-19, 0.0).unwrap()).unwrap();
        assert_eq!((q.q_gamma, q.q_m, q.q_a), (0.0, 0.0, 0.0));
    }

    #[test]
    fn invalid_medium_rejected() {
        assert!(MediumParams::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(MediumParams::new(1.0, -1.0, 0.0, 0.0).is_err());
        assert!(MediumParams::new(1.0, 1.0, -1.0, 0.0).is_err());
        assert!(MediumParams::new(1.0, 1.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn decoupled_limit() {
        let omega = 2.0;
        let q = QTerms {
            q_gamma: 0.3,
            q_a: -0.5,
            q_m: 0.0,
        };
        let s = mode_solution(&q, omega).unwrap();
        assert_eq!(s.phi, 0.0);
        assert_relative_eq!(s.n_plus, (1.0f64 + 0.3 / 4.0).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.n_minus, (1.0f64 - 0.5 / 4.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn maximal_mixing() {
        let omega = 1.5;
        let q = QTerms {
            q_gamma: 0.0,
            q_a: 0.0,
            q_m: 0.2,
        };
        let s = mode_solution(&q, omega).unwrap();
        assert_eq!(s.phi, FRAC_PI_4);
        assert_relative_eq!(s.n_plus * s.n_plus, 1.0 + 0.2 / 2.25, max_relative = 1e-14);
        assert_relative_eq!(
            s.n_minus * s.n_minus,
            1.0 - 0.2 / 2.25,
            max_relative = 1e-14
        );
    }

    #[test]
    fn lab_mixing_angle() {
        // tan 2 phi = 2 Q_M / (Q_g + m_a^2), evaluated with mpmath.
        let s = solve(&lab()).unwrap();
        assert_relative_eq!(s.phi, 2.422_374_362_055_358e-6, max_relative = 1e-9);
        assert!(s.n_plus >= 1.0 && s.n_minus <= 1.0);
    }

    #[test]
    fn evanescent_axion_mode() {
        let p = MediumParams::new(1e-6, 0.0, 0.0, 1e-5).unwrap();
        match solve(&p) {
            Err(Error::Evanescent { n_sq, .. }) => assert!(n_sq < 0.0),
            other => panic!("expected evanescent error, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_index_values() {
        assert_eq!(symmetric_indices(0.0).unwrap(), (1.0, 1.0));
        let p = MediumParams::new(
            wavelength_to_omega(1e-6).unwrap(),
            gauss_to_natural(1e5).unwrap(),
            1e-19,
            0.0,
        )
        .unwrap();
        // beta = g B / (2 omega) from mpmath at omega = 1.24 eV: 7.877e-17.
        assert_relative_eq!(
            lab().beta(),
            7.877_127_868_572_403e-17,
            max_relative = 1e-12
        );
        let (np, nm) = symmetric_indices(p.beta()).unwrap();
        assert_eq!((np, nm), (1.0 + p.beta(), 1.0 - p.beta()));
        assert!(symmetric_indices(1.0).is_err());
        assert!(symmetric_indices(-0.1).is_err());
    }

    #[test]
    fn symmetric_agrees_with_general_to_second_order() {
        let omega = 1.0;
        for beta in [1e-16, 1e-8, 1e-3, 1e-2] {
            let q = QTerms {
                q_gamma: 0.0,
                q_a: 0.0,
                q_m: 2.0 * beta * omega * omega,
            };
            let s = mode_solution(&q, omega).unwrap();
            assert!((s.n_plus_excess - beta).abs() < 3.0 * beta * beta);
            assert!((s.n_minus_excess + beta).abs() < 3.0 * beta * beta);
        }
    }

    #[test]
    fn mix_states_examples() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let a = Complex64::new(0.3, -0.2);
        let b = Complex64::new(-0.7, 0.1);
        assert_eq!(mix_states(0.0, a, b).unwrap(), (a, b));
        let (p, x) = mix_states(FRAC_PI_4, one, zero).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p - Complex64::new(h, 0.0)).norm() < 1e-15);
        assert!((x - Complex64::new(0.0, h)).norm() < 1e-15);
        assert!(mix_states(f64::NAN, one, zero).is_err());
    }

    #[test]
    fn mixed_field_derivative_matches_finite_difference() {
        let p = MediumParams::new(1.0, 0.3, 0.4, 0.2).unwrap();
        for mode in Mode::BOTH {
            let (_, _, d) = index_and_field_derivative(&p, mode).unwrap();
            let h = 1e-6;
            let up = solve(&p.with_field(p.b_field + h)).unwrap().index(mode);
            let dn = solve(&p.with_field(p.b_field - h)).unwrap().index(mode);
            assert_relative_eq!(d, (up - dn) / (2.0 * h), max_relative = 1e-7);
        }
    }

    proptest! {
        #[test]
        fn eigenvector_residual(
            qg in 0.0f64..2.0, ma in 0.0f64..1.5, qm in 0.0f64..2.0, omega in 2.0f64..5.0
        ) {
            let q = QTerms { q_gamma: qg, q_a: -ma * ma, q_m: qm };
            let s = mode_solution(&q, omega).unwrap();
            let norm = qg.abs() + ma * ma + 2.0 * qm;
            for mode in Mode::BOTH {
                prop_assert!(residual(&q, s.phi, mode, s.lambda(mode)) <= 1e-12 * norm.max(1e-300));
            }
        }

        #[test]
        fn index_sign_structure(
            qg in 0.0f64..1.0, ma in 0.0f64..0.9, qm in 0.0f64..1.0
        ) {
            let q = QTerms { q_gamma: qg, q_a: -ma * ma, q_m: qm };
            let s = mode_solution(&q, 2.0).unwrap();
            prop_assert!(s.lambda_plus >= s.lambda_minus);
            prop_assert!(s.n_plus >= 1.0 && s.n_minus <= 1.0);
            prop_assert!(s.n_plus_excess >= 0.0 && s.n_minus_excess <= 0.0);
            if qg > -q.q_a {
                prop_assert!(s.phi >= 0.0 && s.phi < FRAC_PI_4);
            }
            if ma > 0.0 && qg > 0.0 {
                prop_assert!(qg - q.q_a > 0.0);
            }
        }

        #[test]
        fn phi_increases_toward_quarter_pi(d in 1e-3f64..10.0, r1 in 0.0f64..100.0, f in 1.01f64..10.0) {
            let mk = |r: f64| {
                let q = QTerms { q_gamma: d, q_a: 0.0, q_m: r * d };
                mode_solution(&q, 1e3).unwrap().phi
            };
            prop_assert!(mk(r1 * f) >= mk(r1));
            prop_assert!(mk(r1 * f) < FRAC_PI_4);
        }

        #[test]
        fn mixing_is_unitary(phi in -3.0f64..3.0, ar in -1.0f64..1.0, ai in -1.0f64..1.0,
                             br in -1.0f64..1.0, bi in -1.0f64..1.0) {
            let a = Complex64::new(ar, ai);
            let b = Complex64::new(br, bi);
            let (x, y) = mix_states(phi, a, b).unwrap();
            let before = a.norm_sqr() + b.norm_sqr();
            prop_assert!((x.norm_sqr() + y.norm_sqr() - before).abs() <= 1e-12 * before.max(1.0));
            let r = mixing_matrix(phi);
            for i in 0..2 {
                for j in 0..2 {
                    let rr: Complex64 = (0..2).map(|k| r[i][k] * r[j][k].conj()).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((rr - id).norm() < 1e-12);
                }
            }
        }
    }
}
