//! Frequency-domain solution of the linearised quantum Langevin equations.
//!
//! State vector `(b_x, b_x†, b_y, b_y†, a, a†)` with
//! `H/ħ = Σ ω_j b_j†b_j − Δ a†a + Σ g_j q_j Q − g_xy q_x q_y + Σ k_j q_j²/2`,
//! `q_j = b_j + b_j†`, `Q = a + a†`. The static spring `k_j` carries the
//! co-trapping shift so that `ω_j² = (ω_j⁰)² + δω²_CS,j`.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::couplings::{optical_damping, optical_spring};
use crate::error::{Error, Result};
use crate::grid::{FrequencyGrid, MIN_POINTS_PER_LINEWIDTH};
use crate::params::{DerivedParams, ExperimentConfig};
use crate::point::OperatingPoint;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Points whose 1-norm condition number exceeds this are flagged.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Bath occupations and mechanical damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Mechanical damping Γ [rad/s].
    pub gamma: f64,
    pub n_x: f64,
    pub n_y: f64,
    /// Occupation of the optical input, zero for vacuum.
    pub n_opt: f64,
}

impl NoiseModel {
    /// `n̄_j = k_B T / (ħ ω_j⁰)` and an optical vacuum.
    pub fn thermal(cfg: &ExperimentConfig, dp: &DerivedParams) -> Self {
        let n = |w: f64| BOLTZMANN * cfg.temperature / (HBAR * w);
        NoiseModel {
            gamma: cfg.gas_damping,
            n_x: n(dp.omega0_x),
            n_y: n(dp.omega0_y),
            n_opt: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma", "damping must be positive"));
        }
        for (name, n) in [("n_x", self.n_x), ("n_y", self.n_y), ("n_opt", self.n_opt)] {
            if !(n >= 0.0) || !n.is_finite() {
                return Err(Error::invalid(name, "occupation must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Symmetrised weights `2n + 1` per input channel.
    fn weights(&self) -> [f64; 6] {
        let (wx, wy, wo) = (2.0 * self.n_x + 1.0, 2.0 * self.n_y + 1.0, 2.0 * self.n_opt + 1.0);
        [wx, wx, wy, wy, wo, wo]
    }
}

/// Coefficients of the linearised two-mode plus cavity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// Bare tweezer frequencies [rad/s].
    pub omega0_x: f64,
    pub omega0_y: f64,
    /// Static squared-frequency shifts [rad²/s²].
    pub spring_x: f64,
    pub spring_y: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub g_xy: f64,
    pub detuning: f64,
    pub kappa: f64,
    /// Zero-point amplitudes [m].
    pub x_zpf: f64,
    pub y_zpf: f64,
    pub noise: NoiseModel,
}

/// Drift matrix `M(ω)` and diagonal input map `N` with `M v = N v_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSystem {
    pub matrix: Matrix6<Complex64>,
    pub input: Vector6<f64>,
}

impl LinearModel {
    pub fn from_point(p: &OperatingPoint) -> Self {
        let (c, d) = (&p.couplings, &p.derived);
        LinearModel {
            omega0_x: d.omega0_x,
            omega0_y: d.omega0_y,
            spring_x: p.shifts.cs_x,
            spring_y: p.shifts.cs_y,
            g_x: c.g_x,
            g_y: c.g_y,
            g_xy: c.g_xy,
            detuning: p.config.detuning,
            kappa: p.config.kappa,
            x_zpf: d.x_zpf,
            y_zpf: d.y_zpf,
            noise: NoiseModel::thermal(&p.config, d),
        }
    }

    /// Two bare thermal oscillators next to an empty cavity.
    pub fn uncoupled(cfg: &ExperimentConfig, dp: &DerivedParams) -> Self {
        LinearModel {
            omega0_x: dp.omega0_x,
            omega0_y: dp.omega0_y,
            spring_x: 0.0,
            spring_y: 0.0,
            g_x: 0.0,
            g_y: 0.0,
            g_xy: 0.0,
            detuning: cfg.detuning,
            kappa: cfg.kappa,
            x_zpf: dp.x_zpf,
            y_zpf: dp.y_zpf,
            noise: NoiseModel::thermal(cfg, dp),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.kappa > 0.0) {
            return Err(Error::invalid("kappa", "cavity linewidth must be positive"));
        }
        let all = [
            self.omega0_x, self.omega0_y, self.spring_x, self.spring_y, self.g_x, self.g_y,
            self.g_xy, self.detuning, self.x_zpf, self.y_zpf,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model", "all rates must be finite"));
        }
        Ok(())
    }

    pub fn drift(&self, omega: f64) -> DriftSystem {
        let gamma = self.noise.gamma;
        let (kx, ky) = (
            self.spring_x / (2.0 * self.omega0_x),
            self.spring_y / (2.0 * self.omega0_y),
        );
        let gc = -self.g_xy;
        let z = Complex64::new;
        let mut m = Matrix6::<Complex64>::zeros();

        let mech = [(0, self.omega0_x, kx, self.g_x, 2), (2, self.omega0_y, ky, self.g_y, 0)];
        for (r, w0, k, g, other) in mech {
            // b_j row, then b_j† row with every coupling sign reversed.
            m[(r, r)] = z(gamma / 2.0, -(omega - w0));
            m[(r + 1, r + 1)] = z(gamma / 2.0, -(omega + w0));
            for (row, s) in [(r, 1.0), (r + 1, -1.0)] {
                m[(row, r)] += I * (s * k);
                m[(row, r + 1)] += I * (s * k);
                m[(row, other)] += I * (s * gc);
                m[(row, other + 1)] += I * (s * gc);
                m[(row, 4)] += I * (s * g);
                m[(row, 5)] += I * (s * g);
            }
        }
        m[(4, 4)] = z(self.kappa / 2.0, -(omega + self.detuning));
        m[(5, 5)] = z(self.kappa / 2.0, -(omega - self.detuning));
        for (row, s) in [(4, 1.0), (5, -1.0)] {
            m[(row, 0)] += I * (s * self.g_x);
            m[(row, 1)] += I * (s * self.g_x);
            m[(row, 2)] += I * (s * self.g_y);
            m[(row, 3)] += I * (s * self.g_y);
        }

        let (sg, sk) = (gamma.sqrt(), self.kappa.sqrt());
        DriftSystem {
            matrix: m,
            input: Vector6::new(sg, sg, sg, sg, sk, sk),
        }
    }

    /// Transfer rows from the six inputs to `x` and `y`, plus the 1-norm
    /// condition number of the drift matrix.
    pub fn transfer(&self, omega: f64) -> Result<([Complex64; 6], [Complex64; 6], f64)> {
        let sys = self.drift(omega);
        let inv = sys
            .matrix
            .lu()
            .try_inverse()
            .ok_or(Error::Singular { omega })?;
        let cond = one_norm(&sys.matrix) * one_norm(&inv);
        if !cond.is_finite() {
            return Err(Error::Singular { omega });
        }
        let mut tx = [Complex64::new(0.0, 0.0); 6];
        let mut ty = tx;
        for k in 0..6 {
            let n = sys.input[k];
            tx[k] = (inv[(0, k)] + inv[(1, k)]) * (self.x_zpf * n);
            ty[k] = (inv[(2, k)] + inv[(3, k)]) * (self.y_zpf * n);
        }
        Ok((tx, ty, cond))
    }

    /// Expected peak `(frequency, linewidth)` of each mode from the
    /// single-mode optical spring and damping.
    pub fn expected_peaks(&self) -> [(f64, f64); 2] {
        let gamma = self.noise.gamma;
        let peak = |w0: f64, spring: f64, g: f64| {
            let w2 = w0 * w0 + spring + optical_spring(g, w0, self.detuning, self.kappa);
            let w = w2.max(0.0).sqrt();
            let width = gamma + optical_damping(g, w, self.detuning, self.kappa);
            (w, width.max(gamma))
        };
        [
            peak(self.omega0_x, self.spring_x, self.g_x),
            peak(self.omega0_y, self.spring_y, self.g_y),
        ]
    }

    /// Default span with dense sampling around both expected peaks.
    pub fn adaptive_grid(&self, n: usize) -> Result<FrequencyGrid> {
        let lo = 0.7 * self.omega0_x.min(self.omega0_y);
        let hi = 1.3 * self.omega0_x.max(self.omega0_y);
        FrequencyGrid::adaptive(lo, hi, n, &self.expected_peaks(), 200.0, 8)
    }
}

fn one_norm(m: &Matrix6<Complex64>) -> f64 {
    (0..6)
        .map(|c| (0..6).map(|r| m[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Provenance of a [`SpectraSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SpectraMetadata {
    /// `full_qlt`, `synthetic`, `crosstalk` or `file`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LinearModel>,
    /// Grid indices whose solve exceeded [`CONDITION_LIMIT`].
    #[serde(default)]
    pub ill_conditioned: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// One-sided symmetrised displacement spectra [m²/Hz] on a grid [rad/s],
/// normalised so that `∫ S_xx dω/2π = ⟨x²⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraSet {
    pub omega: Vec<f64>,
    pub sxx: Vec<f64>,
    pub syy: Vec<f64>,
    pub sxy: Vec<f64>,
    pub metadata: SpectraMetadata,
}

impl SpectraSet {
    pub fn new(omega: Vec<f64>, sxx: Vec<f64>, syy: Vec<f64>, sxy: Vec<f64>, source: &str) -> Result<Self> {
        let n = omega.len();
        if sxx.len() != n || syy.len() != n || sxy.len() != n {
            return Err(Error::invalid("spectra", "all channels need one value per grid point"));
        }
        FrequencyGrid::from_points(omega.clone())?;
        Ok(SpectraSet {
            omega,
            sxx,
            syy,
            sxy,
            metadata: SpectraMetadata {
                source: source.to_string(),
                ..Default::default()
            },
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Trapezoidal `∫ S dω/2π` of one channel.
    pub fn integrate(values: &[f64], omega: &[f64]) -> f64 {
        omega
            .windows(2)
            .zip(values.windows(2))
            .map(|(w, v)| 0.5 * (v[0] + v[1]) * (w[1] - w[0]))
            .sum::<f64>()
            / std::f64::consts::TAU
    }
}

/// Full solver output on `grid`.
///
/// Points are solved in parallel; each value depends only on its own
/// frequency so results are identical for any thread count.
pub fn compute_spectra(grid: &FrequencyGrid, model: &LinearModel) -> Result<SpectraSet> {
    model.validate()?;
    let weights = model.noise.weights();
    let rows: Vec<Result<(f64, f64, f64, f64)>> = grid
        .omega()
        .par_iter()
        .map(|&w| {
            let (tx, ty, cond) = model.transfer(w)?;
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for k in 0..6 {
                sxx += tx[k].norm_sqr() * weights[k];
                syy += ty[k].norm_sqr() * weights[k];
                sxy += (tx[k].conj() * ty[k]).re * weights[k];
            }
            Ok((sxx, syy, sxy, cond))
        })
        .collect();

    let n = grid.len();
    let (mut sxx, mut syy, mut sxy) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut ill = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        let (a, b, c, cond) = r?;
        sxx.push(a);
        syy.push(b);
        sxy.push(c);
        if cond > CONDITION_LIMIT {
            ill.push(i);
        }
    }

    let mut warnings = Vec::new();
    for (label, (center, width)) in ["x", "y"].iter().zip(model.expected_peaks()) {
        let count = grid.points_within(center, width);
        if count < MIN_POINTS_PER_LINEWIDTH {
            warnings.push(format!(
                "grid under-resolves the {label} peak: {count} points per linewidth (minimum {MIN_POINTS_PER_LINEWIDTH})"
            ));
        }
    }
    if !ill.is_empty() {
        warnings.push(format!("{} points exceeded the condition limit {CONDITION_LIMIT:e}", ill.len()));
    }

    Ok(SpectraSet {
        omega: grid.omega().to_vec(),
        sxx,
        syy,
        sxy,
        metadata: SpectraMetadata {
            source: "full_qlt".into(),
            config: None,
            model: Some(*model),
            ill_conditioned: ill,
            warnings,
        },
    })
}

fn check_separation(omega_x: f64, omega_y: f64) -> Result<()> {
    let separation = (omega_x - omega_y).abs();
    if !(separation > 1e-9 * omega_x.abs().max(omega_y.abs())) {
        return Err(Error::DegenerateModes { separation });
    }
    Ok(())
}

/// `S_xy ≈ Re[G(ω)]/(ω_x − ω_y) · (S_yy − S_xx)`.
pub fn sxy_approx(sxx: &[f64], syy: &[f64], g: &[Complex64], omega_x: f64, omega_y: f64) -> Result<Vec<f64>> {
    check_separation(omega_x, omega_y)?;
    if sxx.len() != syy.len() || g.len() != sxx.len() {
        return Err(Error::invalid("spectra", "channel lengths differ"));
    }
    let split = omega_x - omega_y;
    Ok(sxx
        .iter()
        .zip(syy)
        .zip(g)
        .map(|((a, b), g)| g.re / split * (b - a))
        .collect())
}

/// `S_xy ≈ Φ (S_yy − S_xx)` with a constant angle.
pub fn sxy_approx_constant(sxx: &[f64], syy: &[f64], phi: f64) -> Result<Vec<f64>> {
    if sxx.len() != syy.len() {
        return Err(Error::invalid("spectra", "channel lengths differ"));
    }
    Ok(sxx.iter().zip(syy).map(|(a, b)| phi * (b - a)).collect())
}

/// Constant-angle approximation with `Φ = G/(ω_x − ω_y)`.
pub fn angle_from_interference(g: f64, omega_x: f64, omega_y: f64) -> Result<f64> {
    check_separation(omega_x, omega_y)?;
    Ok(g / (omega_x - omega_y))
}
