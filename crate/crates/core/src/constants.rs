//! Physical constants (CODATA 2018, SI).

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380_649e-23;

pub use std::f64::consts::TAU as TWO_PI;

/// Converts an ordinary frequency in Hz to rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TWO_PI
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
