//! Peak fitting, mode-angle extraction and detector cross-talk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_oscillator, Start};
use crate::qlt::SpectraSet;

/// Estimates whose `S_yy − S_xx` is this small relative to the PSDs are
/// marked unreliable.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Largest accepted cross-talk angle [rad].
pub const MAX_CROSSTALK: f64 = 10.0 * std::f64::consts::PI / 180.0;

/// Frequency interval `[lo, hi]` [rad/s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("window", "needs finite lo < hi"));
        }
        Ok(Window { lo, hi })
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.lo && omega <= self.hi
    }

    fn range(&self, omega: &[f64]) -> std::ops::Range<usize> {
        omega.partition_point(|&w| w < self.lo)..omega.partition_point(|&w| w <= self.hi)
    }
}

/// Damped-oscillator fit `S = C / [(ω² − ω₀²)² + γ²ω²] + baseline`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    /// ω₀ [rad/s].
    pub center: f64,
    /// Full width γ [rad/s].
    pub width: f64,
    /// `C` [m²/Hz · rad⁴/s⁴].
    pub amplitude: f64,
    /// Height above baseline at ω₀ [m²/Hz].
    pub height: f64,
    pub baseline: f64,
    /// `∫ peak dω/2π = C / (4γω₀²)` [m²].
    pub area: f64,
    pub residual_norm: f64,
    /// Variances of (center, width, height, baseline).
    pub covariance_diag: [f64; 4],
    pub window: Window,
    pub iterations: usize,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs above `threshold`, merged unless the valley between two runs drops
/// below half of the smaller maximum.
fn peak_runs(y: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &v) in y.iter().enumerate() {
        match (v > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, y.len()));
    }
    let peak = |r: (usize, usize)| y[r.0..r.1].iter().cloned().fold(f64::MIN, f64::max);
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        if let Some(last) = merged.last_mut() {
            let valley = y[last.1..r.0].iter().cloned().fold(f64::MAX, f64::min);
            if valley >= 0.5 * peak(*last).min(peak(r)) {
                last.1 = r.1;
                continue;
            }
        }
        merged.push(r);
    }
    merged
}

/// Full width at half maximum around `idx`, by linear interpolation.
fn half_width(omega: &[f64], y: &[f64], idx: usize, base: f64) -> Option<f64> {
    let half = base + 0.5 * (y[idx] - base);
    let cross = |a: usize, b: usize| omega[a] + (half - y[a]) / (y[b] - y[a]) * (omega[b] - omega[a]);
    let left = (1..=idx).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i));
    let right = (idx..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (omega[idx] - l)),
        (None, Some(r)) => Some(2.0 * (r - omega[idx])),
        (None, None) => None,
    }
}

/// Fits one peak of a spectrum channel inside `window`.
pub fn fit_peak(omega: &[f64], psd: &[f64], window: Window) -> Result<PeakFit> {
    if omega.len() != psd.len() {
        return Err(Error::invalid("psd", "one value per grid point required"));
    }
    let range = window.range(omega);
    let (w, y) = (&omega[range.clone()], &psd[range]);
    if w.len() < 5 {
        return Err(Error::invalid("window", "fewer than 5 grid points inside"));
    }
    let no_peak = Error::NoPeak { lo: window.lo, hi: window.hi };
    let threshold = 3.0 * median(y);
    let runs = peak_runs(y, threshold);
    match runs.len() {
        0 => return Err(no_peak),
        1 => {}
        count => {
            return Err(Error::MultiplePeaks {
                count,
                lo: window.lo,
                hi: window.hi,
            })
        }
    }
    let (s, e) = runs[0];
    let idx = s + (s..e).fold(0, |best, i| if y[i] > y[s + best] { i - s } else { best });
    let base = y.iter().cloned().fold(f64::MAX, f64::min).max(0.0);
    let height = y[idx] - base;
    if !(height > 0.0) {
        return Err(no_peak);
    }
    let width = half_width(w, y, idx, base)
        .filter(|v| *v > 0.0)
        .unwrap_or((window.hi - window.lo) / 4.0);

    let sol = fit_oscillator(
        w,
        y,
        Start {
            center: w[idx],
            width,
            height: y[idx],
            baseline: base,
        },
    )?;
    if !window.contains(sol.center) {
        return Err(Error::PeakOutsideWindow {
            center: sol.center,
            lo: window.lo,
            hi: window.hi,
        });
    }
    if !(sol.height > 0.0) || !(sol.width > 0.0) {
        return Err(no_peak);
    }
    let amplitude = sol.height * sol.width * sol.width * sol.center * sol.center;
    Ok(PeakFit {
        center: sol.center,
        width: sol.width,
        amplitude,
        height: sol.height,
        baseline: sol.baseline,
        area: amplitude / (4.0 * sol.width * sol.center * sol.center),
        residual_norm: sol.residual_norm,
        covariance_diag: sol.variances,
        window,
        iterations: sol.iterations,
    })
}

fn window_around(omega: &[f64], y: &[f64]) -> Result<(f64, Window)> {
    let idx = (0..y.len())
        .max_by(|&a, &b| y[a].total_cmp(&y[b]))
        .ok_or_else(|| Error::invalid("spectra", "empty spectrum"))?;
    let base = y.iter().cloned().fold(f64::MAX, f64::min).max(0.0);
    let width = half_width(omega, y, idx, base).unwrap_or(omega[omega.len() - 1] - omega[0]);
    let (first, last) = (omega[0], omega[omega.len() - 1]);
    let center = omega[idx];
    Ok((
        center,
        Window {
            lo: (center - 5.0 * width).max(first),
            hi: (center + 5.0 * width).min(last),
        },
    ))
}

/// Windows of `±5γ` around the S_xx and S_yy maxima, split at the midpoint
/// of the two peaks when they overlap.
pub fn default_windows(s: &SpectraSet) -> Result<(Window, Window)> {
    if s.len() < 5 {
        return Err(Error::invalid("spectra", "too few grid points"));
    }
    let (cx, mut wx) = window_around(&s.omega, &s.sxx)?;
    let (cy, mut wy) = window_around(&s.omega, &s.syy)?;
    let mid = 0.5 * (cx + cy);
    if cx > cy && wx.lo < wy.hi {
        wx.lo = wx.lo.max(mid);
        wy.hi = wy.hi.min(mid);
    } else if cy > cx && wy.lo < wx.hi {
        wy.lo = wy.lo.max(mid);
        wx.hi = wx.hi.min(mid);
    }
    Ok((Window::new(wx.lo, wx.hi)?, Window::new(wy.lo, wy.hi)?))
}

/// Per-peak angles from `S_xy ≈ Φ (S_yy − S_xx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub phi_x: f64,
    pub phi_y: f64,
    pub reliable_x: bool,
    pub reliable_y: bool,
    /// Subtracted cross-talk bias, zero until [`debias`] is applied.
    pub bias: AngleBias,
    pub debiased_x: f64,
    pub debiased_y: f64,
    pub fit_x: PeakFit,
    pub fit_y: PeakFit,
}

impl AngleEstimate {
    /// Mean of the debiased per-peak angles.
    pub fn average(&self) -> f64 {
        0.5 * (self.debiased_x + self.debiased_y)
    }
}

/// Cross-talk bias per peak window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngleBias {
    pub x: f64,
    pub y: f64,
}

impl AngleBias {
    /// The larger of the two in magnitude.
    pub fn dominant(&self) -> f64 {
        if self.x.abs() >= self.y.abs() {
            self.x
        } else {
            self.y
        }
    }
}

fn window_angle(s: &SpectraSet, window: Window) -> (f64, bool) {
    let r = window.range(&s.omega);
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0f64);
    for i in r.clone() {
        let d = s.syy[i] - s.sxx[i];
        num += d * s.sxy[i];
        den += d * d;
        scale = scale.max(s.sxx[i].abs()).max(s.syy[i].abs());
    }
    let n = r.len().max(1) as f64;
    let reliable = den > 0.0 && (den / n).sqrt() > NOISE_FLOOR * scale;
    (if den > 0.0 { num / den } else { f64::NAN }, reliable)
}

/// Fits both peaks and regresses `S_xy` on `S_yy − S_xx` in each window.
pub fn extract_mode_angle(s: &SpectraSet, window_x: Window, window_y: Window) -> Result<AngleEstimate> {
    let fit_x = fit_peak(&s.omega, &s.sxx, window_x)?;
    let fit_y = fit_peak(&s.omega, &s.syy, window_y)?;
    let (phi_x, reliable_x) = window_angle(s, window_x);
    let (phi_y, reliable_y) = window_angle(s, window_y);
    Ok(AngleEstimate {
        phi_x,
        phi_y,
        reliable_x,
        reliable_y,
        bias: AngleBias::default(),
        debiased_x: phi_x,
        debiased_y: phi_y,
        fit_x,
        fit_y,
    })
}

/// Detection mixing `y′ = y cos β + x sin β`; the x channel is unchanged.
pub fn crosstalk(s: &SpectraSet, beta: f64) -> Result<SpectraSet> {
    if !(beta.abs() < MAX_CROSSTALK) {
        return Err(Error::invalid("beta", "cross-talk angle must be below 10 degrees"));
    }
    let (sb, cb) = beta.sin_cos();
    let mut out = s.clone();
    for i in 0..s.len() {
        out.syy[i] = cb * cb * s.syy[i] + sb * sb * s.sxx[i] + 2.0 * sb * cb * s.sxy[i];
        out.sxy[i] = cb * s.sxy[i] + sb * s.sxx[i];
    }
    if beta != 0.0 {
        out.metadata.source = "crosstalk".into();
    }
    Ok(out)
}

/// Bias that cross-talk `beta` induces on spectra with the same PSDs but no
/// correlation.
pub fn estimate_bias(s: &SpectraSet, beta: f64, window_x: Window, window_y: Window) -> Result<AngleBias> {
    let mut reference = s.clone();
    reference.sxy.iter_mut().for_each(|v| *v = 0.0);
    let mixed = crosstalk(&reference, beta)?;
    let e = extract_mode_angle(&mixed, window_x, window_y)?;
    Ok(AngleBias { x: e.phi_x, y: e.phi_y })
}

/// Subtracts `bias` from the raw estimates.
pub fn debias(estimate: &AngleEstimate, bias: AngleBias) -> AngleEstimate {
    AngleEstimate {
        bias,
        debiased_x: estimate.phi_x - bias.x,
        debiased_y: estimate.phi_y - bias.y,
        ..*estimate
    }
}
