//! Susceptibilities and hybridisation functions.
//!
//! Frequency-domain convention: `b(t) = ∫ b(ω) e^{−iωt} dω/2π`, and
//! `b†(ω)` denotes `[b(−ω)]†`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::couplings::Couplings;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Lorentzian susceptibility `[−i(ω − ω₀) + width/2]⁻¹`.
#[inline]
pub fn chi(omega: f64, omega0: f64, width: f64) -> Complex64 {
    Complex64::new(width / 2.0, -(omega - omega0)).inv()
}

/// Mechanical susceptibility `μ(ω) = χ(ω, ω_j) − χ*(−ω, ω_j)`.
#[inline]
pub fn mu(omega: f64, omega_j: f64, gamma: f64) -> Complex64 {
    chi(omega, omega_j, gamma) - chi(-omega, omega_j, gamma).conj()
}

/// Optical susceptibility `η_c(ω) = χ(ω, −Δ) − χ*(−ω, −Δ)` with width κ.
#[inline]
pub fn eta_c(omega: f64, detuning: f64, kappa: f64) -> Complex64 {
    chi(omega, -detuning, kappa) - chi(-omega, -detuning, kappa).conj()
}

/// `Re[i η_c(ω)]`, the combination that sets both the optical spring and
/// the cavity-mediated rotation.
#[inline]
pub fn re_i_eta(omega: f64, detuning: f64, kappa: f64) -> f64 {
    (I * eta_c(omega, detuning, kappa)).re
}

/// Backaction prefactor `M_j(ω) = 1 + g_j² μ_j(ω) η_c(ω)`.
pub fn big_m(omega: f64, g: f64, omega_j: f64, gamma: f64, detuning: f64, kappa: f64) -> Complex64 {
    1.0 + g * g * mu(omega, omega_j, gamma) * eta_c(omega, detuning, kappa)
}

/// Whether the hybridisation functions include the backaction prefactors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backaction {
    /// `M_j ≡ 1`.
    #[default]
    Unity,
    /// Full `M_j(ω)`.
    Full,
}

/// Mechanical and optical resonances entering the susceptibilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonances {
    pub omega_x: f64,
    pub omega_y: f64,
    /// Mechanical damping Γ [rad/s].
    pub gamma: f64,
    pub detuning: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hybridisation {
    /// Interference term `G = iη_c g_x g_y + g_xy` [rad/s].
    pub g: Complex64,
    pub r_xy: Complex64,
    pub r_yx: Complex64,
}

/// Interference term `G(ω) = iη_c(ω) g_x g_y + g_xy`.
pub fn interference(omega: f64, c: &Couplings, detuning: f64, kappa: f64) -> Complex64 {
    I * eta_c(omega, detuning, kappa) * (c.g_x * c.g_y) + c.g_xy
}

/// Hybridisation functions `R_xy = iμ_x G / M_x`, `R_yx = iμ_y G / M_y`.
pub fn hybridisation(omega: f64, c: &Couplings, res: &Resonances, backaction: Backaction) -> Hybridisation {
    let g = interference(omega, c, res.detuning, res.kappa);
    let mu_x = mu(omega, res.omega_x, res.gamma);
    let mu_y = mu(omega, res.omega_y, res.gamma);
    let (m_x, m_y) = match backaction {
        Backaction::Unity => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
        Backaction::Full => {
            let eta = eta_c(omega, res.detuning, res.kappa);
            (1.0 + c.g_x * c.g_x * mu_x * eta, 1.0 + c.g_y * c.g_y * mu_y * eta)
        }
    };
    Hybridisation {
        g,
        r_xy: I * mu_x * g / m_x,
        r_yx: I * mu_y * g / m_y,
    }
}

/// A complex function sampled on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexResponse {
    omega: Vec<f64>,
    values: Vec<Complex64>,
}

impl ComplexResponse {
    pub fn new(omega: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if omega.len() != values.len() {
            return Err(Error::invalid("values", "one value per grid point required"));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("omega", "grid must be strictly increasing"));
        }
        Ok(ComplexResponse { omega, values })
    }

    /// Evaluates `f` at each grid point.
    pub fn sample(omega: &[f64], f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = omega.iter().map(|&w| f(w)).collect();
        Self::new(omega.to_vec(), values)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::hz_to_rad;
    use crate::{ExperimentConfig, OperatingPoint};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn chi_on_resonance_and_half_width() {
        let (w0, width) = (1.0e6, 300.0);
        let on = chi(w0, w0, width);
        assert_eq!(on, Complex64::new(2.0 / width, 0.0));
        let half = chi(w0 + width / 2.0, w0, width).norm();
        assert_relative_eq!(half, 2.0 / width / 2f64.sqrt(), max_relative = 1e-14);
        assert!(chi(w0 + 1e9, w0, width).norm() < 1e-8);
    }

    #[test]
    fn eta_large_detuning_limit() {
        let (kappa, omega) = (hz_to_rad(396e3), hz_to_rad(150e3));
        let delta = -100.0 * omega;
        let expected = -2.0 * delta / (kappa * kappa / 4.0 + delta * delta);
        assert_relative_eq!(re_i_eta(omega, delta, kappa), expected, max_relative = 0.02);
    }

    #[test]
    fn mu_between_split_modes_is_nearly_imaginary() {
        let (wx, wy, gamma) = (hz_to_rad(163e3), hz_to_rad(142e3), hz_to_rad(10.0));
        let m = mu(wy, wx, gamma);
        assert_relative_eq!(m.norm(), 1.0 / (wx - wy), max_relative = 0.1);
        assert!(m.re.abs() < 1e-3 * m.im.abs());
        // Direct evaluation gives i/(ω_y − ω_x).
        assert!(m.im * (wy - wx) > 0.0);
    }

    #[test]
    fn decoupled_backaction_is_unity() {
        let m = big_m(1e6, 0.0, 1.1e6, 60.0, -2e6, 2.5e6);
        assert_eq!(m, Complex64::new(1.0, 0.0));
        let far = big_m(1e6, 1e5, 5e6, 60.0, -2e6, 2.5e6);
        assert!((far - 1.0).norm() < 0.01);
    }

    /// At the reference node the cross-mode prefactors stay close to one
    /// while the same-mode prefactors carry the full backaction.
    #[test]
    fn cross_mode_backaction_is_small() {
        for delta_khz in [-176.0, -360.0] {
            let cfg = ExperimentConfig::reference().with_detuning(hz_to_rad(delta_khz * 1e3));
            let p = OperatingPoint::new(&cfg).unwrap();
            let r = p.resonances();
            let c = &p.couplings;
            let mx_at_y = big_m(r.omega_y, c.g_x, r.omega_x, r.gamma, r.detuning, r.kappa);
            let my_at_x = big_m(r.omega_x, c.g_y, r.omega_y, r.gamma, r.detuning, r.kappa);
            let mx_at_x = big_m(r.omega_x, c.g_x, r.omega_x, r.gamma, r.detuning, r.kappa);
            assert!((mx_at_y - 1.0).norm() < 0.15, "{mx_at_y}");
            assert!((my_at_x - 1.0).norm() < 0.15, "{my_at_x}");
            assert!((mx_at_x - 1.0).norm() > 100.0 * (mx_at_y - 1.0).norm());
        }
    }

    #[test]
    fn no_coupling_no_hybridisation() {
        let p = OperatingPoint::new(&ExperimentConfig::reference()).unwrap();
        let mut c = p.couplings;
        c.g_x = 0.0;
        c.g_xy = 0.0;
        let h = hybridisation(p.shifts.omega_x, &c, &p.resonances(), Backaction::Full);
        assert_eq!(h.g, Complex64::new(0.0, 0.0));
        assert_eq!(h.r_xy, Complex64::new(0.0, 0.0));
        assert_eq!(h.r_yx, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn large_detuning_interference_is_real_and_flat() {
        let phi = 0.3 * std::f64::consts::PI;
        let delta = hz_to_rad(-5e6);
        let cfg = ExperimentConfig::reference().with_phi(phi).with_detuning(delta);
        let p = OperatingPoint::new(&cfg).unwrap();
        let c = &p.couplings;
        let kappa = cfg.kappa;
        let gx = interference(p.shifts.omega_x, c, delta, kappa);
        let gy = interference(p.shifts.omega_y, c, delta, kappa);
        let cot2 = (1.0 / phi.tan()).powi(2);
        let expected =
            c.g_x * c.g_y * (-2.0 * delta / (delta * delta + kappa * kappa / 4.0)) * (1.0 - cot2);
        for g in [gx, gy] {
            assert!(g.im.abs() < 0.01 * g.re.abs());
            assert_relative_eq!(g.re, expected, max_relative = 0.01);
        }
        assert_relative_eq!(gx.re, gy.re, max_relative = 0.01);
    }

    #[test]
    fn interference_suppressed_at_quarter_position() {
        let phi = std::f64::consts::FRAC_PI_4;
        let kappa = hz_to_rad(396e3);
        let cfg = ExperimentConfig::reference().with_phi(phi);
        let dp = crate::params::derive_params(&cfg).unwrap();
        let delta = -10.0 * dp.omega0_x.max(kappa);
        let p = OperatingPoint::new(&cfg.with_detuning(delta)).unwrap();
        let c = &p.couplings;
        let scale = c.g_x * c.g_y * 2.0 * delta.abs() / (delta * delta + kappa * kappa / 4.0);
        let g = interference(p.shifts.omega_y, c, delta, kappa);
        assert!(g.norm() / scale.abs() < 0.05);
    }

    #[test]
    fn peaks_are_anticorrelated() {
        for delta_khz in [-176.0, -360.0] {
            let cfg = ExperimentConfig::reference()
                .with_phi(0.22 * std::f64::consts::TAU)
                .with_detuning(hz_to_rad(delta_khz * 1e3));
            let p = OperatingPoint::new(&cfg).unwrap();
            let r = p.resonances();
            let at_y = hybridisation(p.shifts.omega_y, &p.couplings, &r, Backaction::Unity);
            let at_x = hybridisation(p.shifts.omega_x, &p.couplings, &r, Backaction::Unity);
            assert!(at_y.r_xy.re * at_x.r_yx.re < 0.0);
            // Far from the cavity resonance the two magnitudes also agree.
            if delta_khz < -300.0 {
                let sum = (at_y.r_xy.re + at_x.r_yx.re).abs();
                let mean = 0.5 * (at_y.r_xy.re.abs() + at_x.r_yx.re.abs());
                assert!(sum < 0.1 * mean, "sum {sum} mean {mean}");
            }
        }
    }

    #[test]
    fn complex_response_requires_increasing_grid() {
        assert!(ComplexResponse::sample(&[1.0, 1.0], |_| Complex64::new(0.0, 0.0)).is_err());
        let r = ComplexResponse::sample(&[1.0, 2.0, 3.0], |w| chi(w, 2.0, 1.0)).unwrap();
        assert_eq!(r.values()[1], Complex64::new(2.0, 0.0));
    }

    proptest! {
        #[test]
        fn eta_is_odd_under_conjugation(w in 1e3f64..1e7, d in -1e7f64..1e7, k in 1e3f64..1e7) {
            let lhs = eta_c(-w, d, k);
            let rhs = -eta_c(w, d, k).conj();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * eta_c(w, d, k).norm().max(1e-300));
        }

        #[test]
        fn two_term_forms_match_chi(w in -1e7f64..1e7, w0 in 1e4f64..1e7, g in 1.0f64..1e6) {
            let m = mu(w, w0, g);
            let direct = chi(w, w0, g) - chi(-w, w0, g).conj();
            prop_assert_eq!(m, direct);
            let e = eta_c(w, -w0, g);
            let direct = chi(w, w0, g) - chi(-w, w0, g).conj();
            prop_assert_eq!(e, direct);
        }
    }
}
