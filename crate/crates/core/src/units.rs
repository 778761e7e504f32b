//! Natural-unit (Heaviside-Lorentz, hbar = c = 1) conversions.
//!
//! Energies are carried in eV, lengths in meters and magnetic fields in eV^2
//! once they cross the input boundary. The gauss-to-eV^2 factor is derived
//! from SI constants, so the quoted critical field `4.4e13 G` can be checked
//! against `m_e^2 / e` instead of being used to define the conversion.

use std::f64::consts::PI;
use std::sync::LazyLock;

use crate::error::{domain, Error, Result};

/// Fine-structure constant.
pub const ALPHA: f64 = 7.297_352_569_3e-3;
/// Electron mass in eV.
pub const ELECTRON_MASS_EV: f64 = 510_998.95;
/// Reduced Planck constant times c, eV m.
pub const HBAR_C_EV_M: f64 = 1.973_269_804e-7;
/// Vacuum permeability, N A^-2.
pub const MU0_SI: f64 = 1.256_637_062_12e-6;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;
/// Quoted QED critical field in gauss.
pub const B_CRIT_GAUSS: f64 = 4.4e13;
/// eV per GeV^-1 conversion: 1 GeV^-1 = 1e-9 eV^-1.
pub const EV_INV_PER_GEV_INV: f64 = 1e-9;

/// Physical constants used across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub alpha: f64,
    /// eV
    pub m_e: f64,
    /// gauss
    pub b_crit: f64,
    /// eV^2 per gauss
    pub gauss_to_ev2: f64,
    /// eV nm
    pub hc: f64,
}

static STANDARD: LazyLock<Constants> = LazyLock::new(|| Constants {
    alpha: ALPHA,
    m_e: ELECTRON_MASS_EV,
    b_crit: B_CRIT_GAUSS,
    // B^2 (HL) = B_SI^2 / mu0 as an energy density, converted J/m^3 -> eV^4.
    gauss_to_ev2: 1e-4 * (HBAR_C_EV_M.powi(3) / (MU0_SI * ELEMENTARY_CHARGE_C)).sqrt(),
    hc: 2.0 * PI * HBAR_C_EV_M * 1e9,
});

impl Constants {
    pub fn standard() -> &'static Constants {
        &STANDARD
    }

    /// `m_e^2 / e` with `e = sqrt(4 pi alpha)`, in eV^2.
    pub fn b_crit_natural(&self) -> f64 {
        self.m_e * self.m_e / (4.0 * PI * self.alpha).sqrt()
    }

    /// Relative mismatch between the quoted critical field (converted) and
    /// `m_e^2 / e`.
    pub fn b_crit_mismatch(&self) -> f64 {
        let converted = self.b_crit * self.gauss_to_ev2;
        (converted - self.b_crit_natural()) / self.b_crit_natural()
    }

    /// Fails unless every constant is positive and the critical field
    /// agrees with `m_e^2 / e` to 2%.
    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("m_e", self.m_e),
            ("b_crit", self.b_crit),
            ("gauss_to_ev2", self.gauss_to_ev2),
            ("hc", self.hc),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(name, v, "constant must be positive"));
            }
        }
        let mismatch = self.b_crit_mismatch();
        if mismatch.abs() > 0.02 {
            return Err(domain(
                "b_crit",
                mismatch,
                "critical field disagrees with m_e^2/e by more than 2%",
            ));
        }
        Ok(())
    }
}

pub fn gauss_to_natural(b_gauss: f64) -> Result<f64> {
    if !b_gauss.is_finite() || b_gauss < 0.0 {
        return Err(domain("field (G)", b_gauss, "must be finite and >= 0"));
    }
    Ok(b_gauss * Constants::standard().gauss_to_ev2)
}

pub fn natural_to_gauss(b_ev2: f64) -> Result<f64> {
    if !b_ev2.is_finite() || b_ev2 < 0.0 {
        return Err(domain("field (eV^2)", b_ev2, "must be finite and >= 0"));
    }
    Ok(b_ev2 / Constants::standard().gauss_to_ev2)
}

/// Field gradient in G/m to eV^2/m. Gradients may be negative.
pub fn gradient_to_natural(g_gauss_per_m: f64) -> Result<f64> {
    if !g_gauss_per_m.is_finite() {
        return Err(Error::NonFinite("field gradient"));
    }
    Ok(g_gauss_per_m * Constants::standard().gauss_to_ev2)
}

/// Photon energy in eV for a vacuum wavelength in meters.
pub fn wavelength_to_omega(lambda_m: f64) -> Result<f64> {
    if !lambda_m.is_finite() || lambda_m <= 0.0 {
        return Err(domain("wavelength", lambda_m, "must be finite and > 0"));
    }
    Ok(Constants::standard().hc * 1e-9 / lambda_m)
}

/// Axion-photon coupling from GeV^-1 to eV^-1.
pub fn coupling_to_natural(g_gev_inv: f64) -> Result<f64> {
    if !g_gev_inv.is_finite() || g_gev_inv < 0.0 {
        return Err(domain("g_a", g_gev_inv, "must be finite and >= 0"));
    }
    Ok(g_gev_inv * EV_INV_PER_GEV_INV)
}
