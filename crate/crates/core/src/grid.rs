//! Frequency grids for spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DerivedParams;

/// Default number of points of the uniform grid.
pub const DEFAULT_POINTS: usize = 4001;

/// Relative spacing below which merged grid points are treated as one.
pub const MERGE_TOLERANCE: f64 = 1e-9;
/// Minimum number of samples per linewidth before a refinement warning.
pub const MIN_POINTS_PER_LINEWIDTH: usize = 8;

/// Strictly increasing set of angular frequencies [rad/s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    omega: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;

    fn try_from(omega: Vec<f64>) -> Result<Self> {
        Self::from_points(omega)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.omega
    }
}

impl FrequencyGrid {
    pub fn from_points(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::invalid("grid", "at least one point required"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("grid", "points must be finite"));
        }
        if omega.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", "points must be strictly increasing"));
        }
        Ok(FrequencyGrid { omega })
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive. A single point
    /// sits at the midpoint.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid", "at least one point required"));
        }
        if !(hi > lo) {
            return Err(Error::invalid("grid", "upper bound must exceed lower bound"));
        }
        Self::from_points(linspace(lo, hi, n))
    }

    /// [`DEFAULT_POINTS`] points over `[0.7 ω⁰_y, 1.3 ω⁰_x]`.
    pub fn default_for(dp: &DerivedParams) -> Self {
        Self::with_points(dp, DEFAULT_POINTS).expect("reference span is valid")
    }

    /// `n` points over the default span.
    pub fn with_points(dp: &DerivedParams, n: usize) -> Result<Self> {
        let lo = 0.7 * dp.omega0_x.min(dp.omega0_y);
        let hi = 1.3 * dp.omega0_x.max(dp.omega0_y);
        Self::uniform(lo, hi, n)
    }

    /// Uniform grid plus dense patches around each `(center, linewidth)`:
    /// `±half_span` linewidths sampled at `per_linewidth` points per
    /// linewidth.
    pub fn adaptive(
        lo: f64,
        hi: f64,
        n: usize,
        peaks: &[(f64, f64)],
        half_span: f64,
        per_linewidth: usize,
    ) -> Result<Self> {
        let mut omega = Self::uniform(lo, hi, n)?.omega;
        for &(center, width) in peaks {
            if !(width > 0.0) || per_linewidth == 0 {
                return Err(Error::invalid("grid", "linewidth and density must be positive"));
            }
            let a = (center - half_span * width).max(lo);
            let b = (center + half_span * width).min(hi);
            if b <= a {
                continue;
            }
            let count = (((b - a) / width) * per_linewidth as f64).ceil() as usize + 1;
            omega.extend(linspace(a, b, count));
        }
        omega.sort_by(f64::total_cmp);
        // Merged windows can leave near-coincident points; keep them apart
        // by more than text serialisation resolves.
        omega.dedup_by(|b, a| *b - *a <= MERGE_TOLERANCE * a.abs().max(b.abs()));
        Self::from_points(omega)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Number of points inside `center ± width/2`.
    pub fn points_within(&self, center: f64, width: f64) -> usize {
        let lo = self.omega.partition_point(|&w| w < center - width / 2.0);
        let hi = self.omega.partition_point(|&w| w <= center + width / 2.0);
        hi - lo
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
