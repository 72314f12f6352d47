//! Optomechanical coupling rates and the competing frequency shifts.
//!
//! Signs follow the linearised coherent-scattering potential:
//! `g_x = −E_d k sinθ sinφ X_zpf`, `g_y = −E_d k cosθ sinφ Y_zpf`, and the
//! direct coupling `g_xy = g_x g_y · 2Δ cot²φ / (Δ² + κ²/4)`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Axis, Error, Result};
use crate::params::{cos_position, mean_field, DerivedParams, MeanField};
use crate::response::{eta_c, re_i_eta};
use crate::roots::bisect;

/// Linear and direct couplings at one trap position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    /// Coupling of x to the cavity [rad/s].
    pub g_x: f64,
    /// Coupling of y to the cavity [rad/s].
    pub g_y: f64,
    /// Direct x–y coupling [rad/s].
    pub g_xy: f64,
    /// `g_x` at the node (sin φ = 1).
    pub g_x_node: f64,
    /// `g_y` at the node.
    pub g_y_node: f64,
    pub phi: f64,
    pub theta: f64,
    pub mean_field: MeanField,
}

impl Couplings {
    pub fn new(dp: &DerivedParams, theta: f64, phi: f64, detuning: f64, kappa: f64) -> Self {
        let (g_x_node, g_y_node) = coupling_rates(dp, theta, FRAC_PI_2);
        let sin_phi = phi.sin();
        let cos_phi = cos_position(phi);
        let mf = mean_field(dp.drive_rate, phi, detuning, kappa);
        // g_x g_y cot²φ written as A cos²φ stays finite at the antinode.
        let g_xy = g_x_node * g_y_node * detuning_factor(detuning, kappa) * cos_phi * cos_phi;
        Couplings {
            g_x: g_x_node * sin_phi,
            g_y: g_y_node * sin_phi,
            g_xy,
            g_x_node,
            g_y_node,
            phi,
            theta,
            mean_field: mf,
        }
    }

    /// `A = g_x g_y / sin²φ = E_d² k² X_zpf Y_zpf sinθ cosθ`.
    pub fn rotation_amplitude(&self) -> f64 {
        self.g_x_node * self.g_y_node
    }

    pub fn g(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.g_x,
            Axis::Y => self.g_y,
        }
    }

    /// Same couplings with every rate set to zero.
    pub fn decoupled(&self) -> Self {
        Couplings {
            g_x: 0.0,
            g_y: 0.0,
            g_xy: 0.0,
            g_x_node: 0.0,
            g_y_node: 0.0,
            ..*self
        }
    }
}

/// `B = 2Δ / (Δ² + κ²/4)`.
#[inline]
pub fn detuning_factor(detuning: f64, kappa: f64) -> f64 {
    2.0 * detuning / (detuning * detuning + kappa * kappa / 4.0)
}

/// `(g_x, g_y)` at trap position `phi`.
pub fn coupling_rates(dp: &DerivedParams, theta: f64, phi: f64) -> (f64, f64) {
    let common = -dp.drive_rate * dp.wavenumber * phi.sin();
    (common * theta.sin() * dp.x_zpf, common * theta.cos() * dp.y_zpf)
}

/// `g_xy = g_x g_y · 2Δ cot²φ / (Δ² + κ²/4)`. Rejects `phi = 0`.
pub fn direct_coupling(g_x: f64, g_y: f64, phi: f64, detuning: f64, kappa: f64) -> Result<f64> {
    if phi <= 0.0 {
        return Err(Error::SingularPosition);
    }
    let cot = cos_position(phi) / phi.sin();
    Ok(g_x * g_y * detuning_factor(detuning, kappa) * cot * cot)
}

/// `g_xy = −g_x g_y · 2 Re(ᾱ) cos φ / (E_d sin²φ)`.
pub fn direct_coupling_from_alpha(
    g_x: f64,
    g_y: f64,
    phi: f64,
    alpha: num_complex::Complex64,
    drive_rate: f64,
) -> Result<f64> {
    if phi <= 0.0 {
        return Err(Error::SingularPosition);
    }
    let s = phi.sin();
    Ok(-g_x * g_y * 2.0 * alpha.re * cos_position(phi) / (drive_rate * s * s))
}

/// Static co-trapping shifts `(δω²_x, δω²_y)` from the mean scattered field.
///
/// With `include_waist_term = false` the `2/w²` contribution is dropped.
pub fn cs_stiffening(
    dp: &DerivedParams,
    mf: &MeanField,
    theta: f64,
    phi: f64,
    include_waist_term: bool,
) -> (f64, f64) {
    use crate::constants::HBAR;
    let prefactor = dp.drive_rate * HBAR / dp.mass * 2.0 * mf.alpha_r() * cos_position(phi);
    let k2 = dp.wavenumber * dp.wavenumber;
    let (wx, wy) = if include_waist_term {
        (2.0 / (dp.waist_x * dp.waist_x), 2.0 / (dp.waist_y * dp.waist_y))
    } else {
        (0.0, 0.0)
    };
    let (s, c) = theta.sin_cos();
    (prefactor * (k2 * s * s + wx), prefactor * (k2 * c * c + wy))
}

/// Optical spring `δω²_OS = ω₀ Re{−2i g² η_c(ω₀)}`.
pub fn optical_spring(g: f64, omega0: f64, detuning: f64, kappa: f64) -> f64 {
    -2.0 * g * g * omega0 * re_i_eta(omega0, detuning, kappa)
}

/// Optical damping `Γ_opt = 2 g² Re η_c(ω)`; positive means cooling.
pub fn optical_damping(g: f64, omega: f64, detuning: f64, kappa: f64) -> f64 {
    2.0 * g * g * eta_c(omega, detuning, kappa).re
}

/// How the corrected frequencies are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftModel {
    /// `ω² = ω₀² − 2g²ω₀[Re(iη_c) + 2Δcot²φ/(κ²/4+Δ²)]`.
    Simplified,
    /// Tweezer trap plus full co-trapping plus optical spring.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShifts {
    pub model: ShiftModel,
    /// Co-trapping shift δω²_CS,x [rad²/s²].
    pub cs_x: f64,
    pub cs_y: f64,
    /// Optical spring shift δω²_OS,x [rad²/s²].
    pub os_x: f64,
    pub os_y: f64,
    /// Corrected frequency [rad/s].
    pub omega_x: f64,
    pub omega_y: f64,
}

impl FrequencyShifts {
    pub fn omega(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.omega_x,
            Axis::Y => self.omega_y,
        }
    }

    pub fn total(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.cs_x + self.os_x,
            Axis::Y => self.cs_y + self.os_y,
        }
    }
}

fn simplified_cs(dp: &DerivedParams, c: &Couplings, axis: Axis, detuning: f64, kappa: f64) -> f64 {
    // −2 g² ω₀ · 2Δ cot²φ / D with g cot φ = g_node cos φ
    let g_node = match axis {
        Axis::X => c.g_x_node,
        Axis::Y => c.g_y_node,
    };
    let gc = g_node * cos_position(c.phi);
    -2.0 * gc * gc * dp.omega0(axis) * detuning_factor(detuning, kappa)
}

pub fn corrected_frequencies(
    dp: &DerivedParams,
    c: &Couplings,
    detuning: f64,
    kappa: f64,
    model: ShiftModel,
) -> Result<FrequencyShifts> {
    let (cs_x, cs_y) = match model {
        ShiftModel::Simplified => (
            simplified_cs(dp, c, Axis::X, detuning, kappa),
            simplified_cs(dp, c, Axis::Y, detuning, kappa),
        ),
        ShiftModel::Full => cs_stiffening(dp, &c.mean_field, c.theta, c.phi, true),
    };
    let os_x = optical_spring(c.g_x, dp.omega0_x, detuning, kappa);
    let os_y = optical_spring(c.g_y, dp.omega0_y, detuning, kappa);
    let wx2 = dp.omega0_x * dp.omega0_x + cs_x + os_x;
    let wy2 = dp.omega0_y * dp.omega0_y + cs_y + os_y;
    if wx2 < 0.0 {
        return Err(Error::Unstable { axis: Axis::X, omega_sq: wx2 });
    }
    if wy2 < 0.0 {
        return Err(Error::Unstable { axis: Axis::Y, omega_sq: wy2 });
    }
    Ok(FrequencyShifts {
        model,
        cs_x,
        cs_y,
        os_x,
        os_y,
        omega_x: wx2.sqrt(),
        omega_y: wy2.sqrt(),
    })
}

/// Trap position in `(0, π/2)` where the simplified shifts of `axis`
/// cancel, or `None` if they never do.
pub fn frequency_cancellation(
    dp: &DerivedParams,
    theta: f64,
    detuning: f64,
    kappa: f64,
    axis: Axis,
) -> Option<f64> {
    let shift = |phi: f64| {
        let c = Couplings::new(dp, theta, phi, detuning, kappa);
        let cs = simplified_cs(dp, &c, axis, detuning, kappa);
        let os = optical_spring(c.g(axis), dp.omega0(axis), detuning, kappa);
        cs + os
    };
    bisect(shift, 1e-9, FRAC_PI_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{hz_to_rad, TWO_PI};
    use crate::params::derive_params;
    use crate::ExperimentConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn reference() -> (ExperimentConfig, DerivedParams) {
        let cfg = ExperimentConfig::reference();
        let dp = derive_params(&cfg).unwrap();
        (cfg, dp)
    }

    #[test]
    fn antinode_has_no_linear_coupling() {
        let (cfg, dp) = reference();
        assert_eq!(coupling_rates(&dp, cfg.theta, 0.0), (0.0, 0.0));
    }

    #[test]
    fn symmetric_trap_at_45_degrees_gives_equal_rates() {
        let mut cfg = ExperimentConfig::reference();
        cfg.waist_y = cfg.waist_x;
        cfg.theta = FRAC_PI_4;
        let dp = derive_params(&cfg).unwrap();
        let (gx, gy) = coupling_rates(&dp, cfg.theta, 1.0);
        assert_relative_eq!(gx, gy, max_relative = 1e-15);
    }

    /// Node values at θ = 49°, re-derived from scratch: E_d, k and the zpf
    /// amplitudes are recomputed here without going through `derive_params`.
    #[test]
    fn node_rates_golden() {
        use crate::constants::*;
        let (cfg, dp) = reference();
        let (gx, gy) = coupling_rates(&dp, cfg.theta, FRAC_PI_2);

        let r = 60.1e-9f64;
        let vol = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
        let m = 1850.0 * vol;
        let alpha = 3.0 * EPSILON_0 * vol * (1.1 / 4.1);
        let e_tw = (4.0 * 0.485 / (0.928e-6 * 1.068e-6 * std::f64::consts::PI * EPSILON_0 * SPEED_OF_LIGHT)).sqrt();
        let w_c = TWO_PI * SPEED_OF_LIGHT / 1064e-9;
        let v_c = std::f64::consts::PI / 4.0 * 61e-6f64.powi(2) * 12.23e-3;
        let e_c = (HBAR * w_c / (2.0 * EPSILON_0 * v_c)).sqrt();
        let th = 49f64.to_radians();
        let e_d = alpha * e_c * e_tw * th.sin() / (2.0 * HBAR);
        let k = TWO_PI / 1064e-9;
        let wx = (alpha * e_tw * e_tw / (m * 0.928e-6f64.powi(2))).sqrt();
        let wy = (alpha * e_tw * e_tw / (m * 1.068e-6f64.powi(2))).sqrt();
        let xz = (HBAR / (2.0 * m * wx)).sqrt();
        let yz = (HBAR / (2.0 * m * wy)).sqrt();
        assert_relative_eq!(gx, -e_d * k * th.sin() * xz, max_relative = 1e-12);
        assert_relative_eq!(gy, -e_d * k * th.cos() * yz, max_relative = 1e-12);

        // Frozen after the first validated run.
        assert_relative_eq!(rad_to_hz(gx), -23_936.58, max_relative = 1e-6);
        assert_relative_eq!(rad_to_hz(gy), -22_322.19, max_relative = 1e-6);
    }

    #[test]
    fn direct_coupling_edge_cases() {
        let (kappa, delta) = (hz_to_rad(396e3), hz_to_rad(-360e3));
        assert_eq!(direct_coupling(1e5, 1e5, FRAC_PI_2, delta, kappa).unwrap(), 0.0);
        assert!(matches!(
            direct_coupling(1e5, 1e5, 0.0, delta, kappa),
            Err(Error::SingularPosition)
        ));
        let gxy = direct_coupling(1e5, 2e5, 0.7, delta, kappa).unwrap();
        assert!(gxy < 0.0);
        let gxy = direct_coupling(-1e5, 2e5, 0.7, delta, kappa).unwrap();
        assert!(gxy > 0.0);
    }

    #[test]
    fn both_direct_coupling_forms_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let gx = rng.random_range(-2e5..2e5);
            let gy = rng.random_range(-2e5..2e5);
            let phi = rng.random_range(0.01..FRAC_PI_2);
            let delta = rng.random_range(-3e6..-1e4);
            let kappa = rng.random_range(1e4..5e6);
            let ed = rng.random_range(1e8..1e11);
            let mf = mean_field(ed, phi, delta, kappa);
            let a = direct_coupling(gx, gy, phi, delta, kappa).unwrap();
            let b = direct_coupling_from_alpha(gx, gy, phi, mf.alpha, ed).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn couplings_struct_matches_free_functions() {
        let (cfg, dp) = reference();
        for phi in [0.2, 0.7, 1.3] {
            let c = Couplings::new(&dp, cfg.theta, phi, cfg.detuning, cfg.kappa);
            let (gx, gy) = coupling_rates(&dp, cfg.theta, phi);
            assert_relative_eq!(c.g_x, gx, max_relative = 1e-14);
            assert_relative_eq!(c.g_y, gy, max_relative = 1e-14);
            let gxy = direct_coupling(gx, gy, phi, cfg.detuning, cfg.kappa).unwrap();
            assert_relative_eq!(c.g_xy, gxy, max_relative = 1e-12);
        }
        let node = Couplings::new(&dp, cfg.theta, FRAC_PI_2, cfg.detuning, cfg.kappa);
        assert_eq!(node.g_xy, 0.0);
        // The antinode keeps a finite static cross term.
        let anti = Couplings::new(&dp, cfg.theta, 0.0, cfg.detuning, cfg.kappa);
        assert_eq!(anti.g_x, 0.0);
        assert!(anti.g_xy != 0.0);
    }

    #[test]
    fn stiffening_edge_cases() {
        let (cfg, dp) = reference();
        let c = Couplings::new(&dp, cfg.theta, FRAC_PI_2, cfg.detuning, cfg.kappa);
        assert_eq!(cs_stiffening(&dp, &c.mean_field, cfg.theta, FRAC_PI_2, true), (0.0, 0.0));
        let c = Couplings::new(&dp, cfg.theta, 0.5, cfg.detuning, cfg.kappa);
        let (sx, sy) = cs_stiffening(&dp, &c.mean_field, cfg.theta, 0.5, true);
        assert!(sx > 0.0 && sy > 0.0);
    }

    /// Dropping `2/w²` removes exactly `2/(w² k² sin²θ)` relative to the
    /// `k²` term, about 12 % for the reference waists.
    #[test]
    fn waist_term_size() {
        let (cfg, dp) = reference();
        let c = Couplings::new(&dp, cfg.theta, 0.5, cfg.detuning, cfg.kappa);
        let (full, _) = cs_stiffening(&dp, &c.mean_field, cfg.theta, 0.5, true);
        let (bare, _) = cs_stiffening(&dp, &c.mean_field, cfg.theta, 0.5, false);
        let expected = 2.0 / (cfg.waist_x.powi(2) * dp.wavenumber.powi(2) * cfg.theta.sin().powi(2));
        assert_relative_eq!((full - bare) / bare, expected, max_relative = 1e-12);
        assert!(expected > 0.11 && expected < 0.125);
    }

    #[test]
    fn optical_spring_softens_at_node() {
        let (cfg, dp) = reference();
        assert_eq!(optical_spring(0.0, dp.omega0_x, cfg.detuning, cfg.kappa), 0.0);
        let (gx, gy) = coupling_rates(&dp, cfg.theta, FRAC_PI_2);
        assert!(optical_spring(gx, dp.omega0_x, cfg.detuning, cfg.kappa) < 0.0);
        assert!(optical_spring(gy, dp.omega0_y, cfg.detuning, cfg.kappa) < 0.0);
        let node = optical_spring(gx, dp.omega0_x, cfg.detuning, cfg.kappa);
        let (gx0, _) = coupling_rates(&dp, cfg.theta, 1e-6);
        let near_antinode = optical_spring(gx0, dp.omega0_x, cfg.detuning, cfg.kappa);
        assert!(near_antinode.abs() < 1e-11 * node.abs());
    }

    #[test]
    fn node_softening_and_unstable_rejection() {
        let (cfg, dp) = reference();
        let c = Couplings::new(&dp, cfg.theta, FRAC_PI_2, cfg.detuning, cfg.kappa);
        let f = corrected_frequencies(&dp, &c, cfg.detuning, cfg.kappa, ShiftModel::Full).unwrap();
        assert!(f.omega_x < dp.omega0_x && f.omega_y < dp.omega0_y);

        let mut strong = c;
        strong.g_x *= 30.0;
        assert!(matches!(
            corrected_frequencies(&dp, &strong, cfg.detuning, cfg.kappa, ShiftModel::Full),
            Err(Error::Unstable { axis: Axis::X, .. })
        ));
    }

    /// Simplified and full models differ only by the `2/w²` co-trapping term.
    #[test]
    fn simplified_equals_full_without_waist_term() {
        let (cfg, dp) = reference();
        for phi in [0.0, 0.3, 0.8, FRAC_PI_2] {
            let c = Couplings::new(&dp, cfg.theta, phi, cfg.detuning, cfg.kappa);
            let s = corrected_frequencies(&dp, &c, cfg.detuning, cfg.kappa, ShiftModel::Simplified).unwrap();
            let (bx, by) = cs_stiffening(&dp, &c.mean_field, cfg.theta, phi, false);
            assert_relative_eq!(s.cs_x, bx, max_relative = 1e-12, epsilon = 1e-6);
            assert_relative_eq!(s.cs_y, by, max_relative = 1e-12, epsilon = 1e-6);
        }
        // At the node there is no co-trapping and the two models coincide.
        let c = Couplings::new(&dp, cfg.theta, FRAC_PI_2, cfg.detuning, cfg.kappa);
        let s = corrected_frequencies(&dp, &c, cfg.detuning, cfg.kappa, ShiftModel::Simplified).unwrap();
        let f = corrected_frequencies(&dp, &c, cfg.detuning, cfg.kappa, ShiftModel::Full).unwrap();
        assert_eq!(s.omega_x, f.omega_x);
    }

    #[test]
    fn frequencies_return_near_cancellation_point() {
        let (cfg, dp) = reference();
        for delta_khz in [-176.0, -360.0] {
            let delta = hz_to_rad(delta_khz * 1e3);
            let phi_c = crate::rotation::cancellation_point(cfg.kappa, delta, dp.omega0_y).unwrap();
            let c = Couplings::new(&dp, cfg.theta, phi_c, delta, cfg.kappa);
            let f = corrected_frequencies(&dp, &c, delta, cfg.kappa, ShiftModel::Full).unwrap();
            assert!((f.omega_x - dp.omega0_x).abs() / dp.omega0_x < 0.01);
            assert!((f.omega_y - dp.omega0_y).abs() / dp.omega0_y < 0.01);
            let root = frequency_cancellation(&dp, cfg.theta, delta, cfg.kappa, Axis::Y).unwrap();
            assert!((root - phi_c).abs() / TWO_PI < 0.01);
        }
    }

    #[test]
    fn rate_product_peaks_at_45_degrees() {
        let mut cfg = ExperimentConfig::reference();
        cfg.waist_y = cfg.waist_x;
        let product = |theta: f64| {
            let mut c = cfg.clone();
            c.theta = theta;
            let dp = derive_params(&c).unwrap();
            // E_d carries its own sinθ; strip it to isolate sinθ cosθ.
            let (gx, gy) = coupling_rates(&dp, theta, 1.0);
            (gx * gy / theta.sin().powi(2)).abs()
        };
        let best = product(FRAC_PI_4);
        for theta in [0.3, 0.6, 0.7, 0.9, 1.1, 1.4] {
            assert!(product(theta) < best);
        }
    }

    proptest! {
        #[test]
        fn red_detuning_opposing_signs(delta_khz in -2000.0f64..-1.0, phi in 0.0f64..FRAC_PI_2) {
            // κ/2 above both trap frequencies keeps Re(iη_c) > 0 for all Δ.
            let (cfg, dp) = reference();
            let delta = hz_to_rad(delta_khz * 1e3);
            let c = Couplings::new(&dp, cfg.theta, phi, delta, cfg.kappa);
            let (sx, sy) = cs_stiffening(&dp, &c.mean_field, cfg.theta, phi, true);
            prop_assert!(sx >= 0.0 && sy >= 0.0);
            prop_assert!(optical_spring(c.g_x, dp.omega0_x, delta, cfg.kappa) <= 0.0);
            prop_assert!(optical_spring(c.g_y, dp.omega0_y, delta, cfg.kappa) <= 0.0);
        }

        #[test]
        fn rate_signs_follow_polarisation(theta in 0.01f64..3.13, phi in 0.01f64..1.56) {
            let mut cfg = ExperimentConfig::reference();
            cfg.theta = theta;
            let dp = derive_params(&cfg).unwrap();
            let (gx, gy) = coupling_rates(&dp, theta, phi);
            prop_assert_eq!((gx * gy).signum(), (theta.sin() * theta.cos()).signum());
        }
    }
}
