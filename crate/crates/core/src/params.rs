//! Experimental configuration, derived physical constants and the cavity
//! mean field.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, rad_to_hz, EPSILON_0, HBAR, SPEED_OF_LIGHT, TWO_PI};
use crate::error::{Error, Result};

/// Default nanosphere density (fused silica) [kg/m³].
pub const DEFAULT_DENSITY: f64 = 1850.0;
/// Default relative permittivity (fused silica).
pub const DEFAULT_PERMITTIVITY: f64 = 2.1;
/// Default gas damping rate, Γ/2π [Hz].
pub const DEFAULT_GAS_DAMPING_HZ: f64 = 10.0;
/// Default bath temperature [K].
pub const DEFAULT_TEMPERATURE: f64 = 300.0;

/// Raw experimental inputs.
///
/// Rates (`kappa`, `kappa_in`, `detuning`, `gas_damping`) are angular
/// frequencies in rad/s. The JSON form stores them in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigFile", into = "ConfigFile")]
pub struct ExperimentConfig {
    /// Tweezer wavelength [m].
    pub wavelength: f64,
    /// Tweezer power [W].
    pub tweezer_power: f64,
    /// Tweezer waist along x [m].
    pub waist_x: f64,
    /// Tweezer waist along y [m].
    pub waist_y: f64,
    /// Particle radius [m].
    pub particle_radius: f64,
    /// Material density [kg/m³].
    pub density: f64,
    /// Relative permittivity.
    pub permittivity: f64,
    /// Cavity length [m].
    pub cavity_length: f64,
    /// Cavity mode waist [m].
    pub cavity_waist: f64,
    /// Cavity linewidth κ [rad/s].
    pub kappa: f64,
    /// Input coupling rate [rad/s]. Recorded only.
    pub kappa_in: f64,
    /// Detuning Δ [rad/s]; negative is red.
    pub detuning: f64,
    /// Polarisation angle θ [rad].
    pub theta: f64,
    /// Trap position φ on the standing wave [rad]; 0 antinode, π/2 node.
    pub phi: f64,
    /// Gas damping Γ [rad/s].
    pub gas_damping: f64,
    /// Bath temperature [K].
    pub temperature: f64,
    /// Chamber pressure [mbar]. Metadata only.
    pub pressure_mbar: Option<f64>,
}

/// On-disk form of [`ExperimentConfig`]: SI units, rates in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    wavelength: f64,
    tweezer_power: f64,
    waist_x: f64,
    waist_y: f64,
    particle_radius: f64,
    #[serde(default = "default_density")]
    density: f64,
    #[serde(default = "default_permittivity")]
    permittivity: f64,
    cavity_length: f64,
    cavity_waist: f64,
    kappa: f64,
    kappa_in: f64,
    detuning: f64,
    theta: f64,
    phi: f64,
    #[serde(default = "default_gas_damping")]
    gas_damping: f64,
    #[serde(default = "default_temperature")]
    temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pressure_mbar: Option<f64>,
}

fn default_density() -> f64 {
    DEFAULT_DENSITY
}
fn default_permittivity() -> f64 {
    DEFAULT_PERMITTIVITY
}
fn default_gas_damping() -> f64 {
    DEFAULT_GAS_DAMPING_HZ
}
fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

impl TryFrom<ConfigFile> for ExperimentConfig {
    type Error = Error;

    fn try_from(f: ConfigFile) -> Result<Self> {
        let cfg = ExperimentConfig {
            wavelength: f.wavelength,
            tweezer_power: f.tweezer_power,
            waist_x: f.waist_x,
            waist_y: f.waist_y,
            particle_radius: f.particle_radius,
            density: f.density,
            permittivity: f.permittivity,
            cavity_length: f.cavity_length,
            cavity_waist: f.cavity_waist,
            kappa: hz_to_rad(f.kappa),
            kappa_in: hz_to_rad(f.kappa_in),
            detuning: hz_to_rad(f.detuning),
            theta: f.theta,
            phi: f.phi,
            gas_damping: hz_to_rad(f.gas_damping),
            temperature: f.temperature,
            pressure_mbar: f.pressure_mbar,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<ExperimentConfig> for ConfigFile {
    fn from(c: ExperimentConfig) -> Self {
        ConfigFile {
            wavelength: c.wavelength,
            tweezer_power: c.tweezer_power,
            waist_x: c.waist_x,
            waist_y: c.waist_y,
            particle_radius: c.particle_radius,
            density: c.density,
            permittivity: c.permittivity,
            cavity_length: c.cavity_length,
            cavity_waist: c.cavity_waist,
            kappa: rad_to_hz(c.kappa),
            kappa_in: rad_to_hz(c.kappa_in),
            detuning: rad_to_hz(c.detuning),
            theta: c.theta,
            phi: c.phi,
            gas_damping: rad_to_hz(c.gas_damping),
            temperature: c.temperature,
            pressure_mbar: c.pressure_mbar,
        }
    }
}

impl ExperimentConfig {
    /// The reference set-up: 1064 nm tweezer at 0.485 W, 60.1 nm silica
    /// sphere, 12.23 mm cavity with κ/2π = 396 kHz, θ = 49°, trapped at the
    /// node with Δ/2π = −360 kHz.
    pub fn reference() -> Self {
        ExperimentConfig {
            wavelength: 1064e-9,
            tweezer_power: 0.485,
            waist_x: 0.928e-6,
            waist_y: 1.068e-6,
            particle_radius: 60.1e-9,
            density: DEFAULT_DENSITY,
            permittivity: DEFAULT_PERMITTIVITY,
            cavity_length: 12.23e-3,
            cavity_waist: 61e-6,
            kappa: hz_to_rad(396e3),
            kappa_in: hz_to_rad(162e3),
            detuning: hz_to_rad(-360e3),
            theta: 49f64.to_radians(),
            phi: FRAC_PI_2,
            gas_damping: hz_to_rad(DEFAULT_GAS_DAMPING_HZ),
            temperature: DEFAULT_TEMPERATURE,
            pressure_mbar: Some(3e-3),
        }
    }

    /// Parses the JSON config format. Syntax errors carry the byte offset.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ExperimentConfig>(text).map_err(|e| {
            // Validation failures raised from `try_from` surface as data
            // errors; keep their message but they have no useful position.
            let (line, column) = (e.line(), e.column());
            Error::ConfigSyntax {
                offset: byte_offset(text, line, column),
                line,
                column,
                message: e.to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        ExperimentConfig {
            phi,
            ..self.clone()
        }
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        ExperimentConfig {
            detuning,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wavelength", self.wavelength),
            ("tweezer_power", self.tweezer_power),
            ("waist_x", self.waist_x),
            ("waist_y", self.waist_y),
            ("particle_radius", self.particle_radius),
            ("density", self.density),
            ("cavity_length", self.cavity_length),
            ("cavity_waist", self.cavity_waist),
            ("kappa", self.kappa),
            ("kappa_in", self.kappa_in),
            ("gas_damping", self.gas_damping),
            ("temperature", self.temperature),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.permittivity.is_finite() && self.permittivity > 1.0) {
            return Err(Error::invalid(
                "permittivity",
                format!("relative permittivity must exceed 1, got {}", self.permittivity),
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        if !(0.0..PI).contains(&self.theta) {
            return Err(Error::invalid("theta", format!("must lie in [0, pi), got {}", self.theta)));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.phi) {
            return Err(Error::invalid("phi", format!("must lie in [0, pi/2], got {}", self.phi)));
        }
        Ok(())
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Physical constants derived from an [`ExperimentConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Particle mass [kg].
    pub mass: f64,
    /// Polarizability [C·m²/V].
    pub polarizability: f64,
    /// Tweezer field amplitude [V/m].
    pub tweezer_field: f64,
    /// Cavity field amplitude per photon [V/m].
    pub cavity_field: f64,
    /// Cavity mode volume [m³].
    pub mode_volume: f64,
    /// Cavity resonance [rad/s].
    pub cavity_frequency: f64,
    /// Coherent-scattering drive rate E_d [rad/s].
    pub drive_rate: f64,
    /// Wavenumber [rad/m].
    pub wavenumber: f64,
    /// Bare tweezer frequency along x [rad/s].
    pub omega0_x: f64,
    /// Bare tweezer frequency along y [rad/s].
    pub omega0_y: f64,
    /// Zero-point amplitude along x [m].
    pub x_zpf: f64,
    /// Zero-point amplitude along y [m].
    pub y_zpf: f64,
    /// Free spectral range [Hz].
    pub fsr_hz: f64,
    /// Tweezer waists, carried along for the co-trapping correction [m].
    pub waist_x: f64,
    pub waist_y: f64,
}

impl DerivedParams {
    pub fn omega0(&self, axis: crate::Axis) -> f64 {
        match axis {
            crate::Axis::X => self.omega0_x,
            crate::Axis::Y => self.omega0_y,
        }
    }
}

/// Derives all physical constants from the raw configuration.
pub fn derive_params(cfg: &ExperimentConfig) -> Result<DerivedParams> {
    cfg.validate()?;

    let volume = 4.0 / 3.0 * PI * cfg.particle_radius.powi(3);
    let mass = cfg.density * volume;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("particle_radius", "particle mass evaluates to zero"));
    }
    let eps_r = cfg.permittivity;
    let polarizability = 3.0 * EPSILON_0 * volume * (eps_r - 1.0) / (eps_r + 2.0);

    let tweezer_field_sq =
        4.0 * cfg.tweezer_power / (cfg.waist_x * cfg.waist_y * PI * SPEED_OF_LIGHT * EPSILON_0);
    let tweezer_field = tweezer_field_sq.sqrt();

    let cavity_frequency = TWO_PI * SPEED_OF_LIGHT / cfg.wavelength;
    let mode_volume = PI / 4.0 * cfg.cavity_waist.powi(2) * cfg.cavity_length;
    let cavity_field = (HBAR * cavity_frequency / (2.0 * EPSILON_0 * mode_volume)).sqrt();

    let drive_rate =
        polarizability * cavity_field * tweezer_field * cfg.theta.sin() / (2.0 * HBAR);
    let wavenumber = TWO_PI / cfg.wavelength;

    let stiffness = polarizability * tweezer_field_sq / mass;
    let omega0_x = (stiffness / cfg.waist_x.powi(2)).sqrt();
    let omega0_y = (stiffness / cfg.waist_y.powi(2)).sqrt();

    Ok(DerivedParams {
        mass,
        polarizability,
        tweezer_field,
        cavity_field,
        mode_volume,
        cavity_frequency,
        drive_rate,
        wavenumber,
        omega0_x,
        omega0_y,
        x_zpf: (HBAR / (2.0 * mass * omega0_x)).sqrt(),
        y_zpf: (HBAR / (2.0 * mass * omega0_y)).sqrt(),
        fsr_hz: SPEED_OF_LIGHT / (2.0 * cfg.cavity_length),
        waist_x: cfg.waist_x,
        waist_y: cfg.waist_y,
    })
}

/// Mean intracavity field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanField {
    pub alpha: Complex64,
    pub n_photons: f64,
}

impl MeanField {
    pub fn alpha_r(&self) -> f64 {
        self.alpha.re
    }

    pub fn alpha_i(&self) -> f64 {
        self.alpha.im
    }
}

/// `cos φ` evaluated as `sin(π/2 − φ)` so that the node gives exactly zero.
#[inline]
pub(crate) fn cos_position(phi: f64) -> f64 {
    (FRAC_PI_2 - phi).sin()
}

/// Steady state of the cavity driven by coherent scattering,
/// `ᾱ = −i E_d cos φ / (iΔ − κ/2)`.
pub fn mean_field(drive_rate: f64, phi: f64, detuning: f64, kappa: f64) -> MeanField {
    debug_assert!(kappa > 0.0);
    let alpha = Complex64::new(0.0, -drive_rate * cos_position(phi))
        / Complex64::new(-kappa / 2.0, detuning);
    MeanField {
        alpha,
        n_photons: alpha.norm_sqr(),
    }
}
