//! Mode rotation angle and the cancellation point.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::linspace;
use crate::params::cos_position;
use crate::point::OperatingPoint;
use crate::response::{hybridisation, re_i_eta, Backaction};

/// Rotation angle of the mechanical modes at one operating point.
///
/// Per-peak angles use the sign convention of `S_xy ≈ Φ (S_yy − S_xx)`:
/// `phi_x_peak = −Re R_yx(ω_x)` and `phi_y_peak = Re R_xy(ω_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAngle {
    /// Cavity-mediated part `Re(iη_c(ω_y)) g_x g_y / (ω_x − ω_y)`.
    pub phi_dyn: f64,
    /// Static part `g_xy / (ω_x − ω_y)`.
    pub phi_cs: f64,
    pub phi_total: f64,
    pub phi_x_peak: f64,
    pub phi_y_peak: f64,
    /// `½(Re R_xy(ω_y) − Re R_yx(ω_x))`.
    pub phi_average: f64,
    /// Corrected frequencies used [rad/s].
    pub omega_x: f64,
    pub omega_y: f64,
}

pub fn mode_angle(p: &OperatingPoint, backaction: Backaction) -> Result<ModeAngle> {
    let (wx, wy) = (p.shifts.omega_x, p.shifts.omega_y);
    let separation = wx - wy;
    if !(separation.abs() > 1e-9 * wx.max(wy)) {
        return Err(Error::DegenerateModes {
            separation: separation.abs(),
        });
    }
    let c = &p.couplings;
    let res = p.resonances();
    let phi_dyn = re_i_eta(wy, res.detuning, res.kappa) * c.g_x * c.g_y / separation;
    let phi_cs = c.g_xy / separation;
    let at_y = hybridisation(wy, c, &res, backaction);
    let at_x = hybridisation(wx, c, &res, backaction);
    Ok(ModeAngle {
        phi_dyn,
        phi_cs,
        phi_total: phi_dyn + phi_cs,
        phi_x_peak: -at_x.r_yx.re,
        phi_y_peak: at_y.r_xy.re,
        phi_average: 0.5 * (at_y.r_xy.re - at_x.r_yx.re),
        omega_x: wx,
        omega_y: wy,
    })
}

/// `Φ(φ) = A/(ω_x − ω_y) · (Re[iη_c(ω_y)] sin²φ + B cos²φ)`.
pub fn phi_of_position(phi: f64, a: f64, b: f64, re_i_eta_y: f64, omega_x: f64, omega_y: f64) -> f64 {
    let (s, c) = (phi.sin(), cos_position(phi));
    a / (omega_x - omega_y) * (re_i_eta_y * s * s + b * c * c)
}

fn c_phi_parts(kappa: f64, delta: f64, omega_y: f64) -> (f64, f64) {
    let d = delta * delta + kappa * kappa / 4.0;
    let gap = d - omega_y * omega_y;
    (gap * gap + (kappa * omega_y).powi(2), gap * d)
}

/// `C_φ = [(D − ω_y²)² + (κω_y)²] / [(D − ω_y²) D]`, `D = Δ² + κ²/4`.
pub fn c_phi(kappa: f64, delta: f64, omega_y: f64) -> f64 {
    let (num, den) = c_phi_parts(kappa, delta, omega_y);
    num / den
}

/// `φ_c = atan √C_φ`, or `None` inside the ellipse `Δ² + κ²/4 ≤ ω_y²`.
pub fn cancellation_point(kappa: f64, delta: f64, omega_y: f64) -> Option<f64> {
    let (num, den) = c_phi_parts(kappa, delta, omega_y);
    if den > 0.0 {
        Some((num / den).sqrt().atan())
    } else {
        None
    }
}

/// `φ_c` over a `(κ, Δ)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationMap {
    /// κ values [rad/s].
    pub kappa: Vec<f64>,
    /// Δ values [rad/s].
    pub delta: Vec<f64>,
    pub omega_y: f64,
    /// Row-major over κ, then Δ. `None` marks the undefined region.
    values: Vec<Option<f64>>,
}

/// One contour level as a set of polylines in `(κ, Δ)` [rad/s].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub level_over_2pi: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

pub fn phic_map(
    kappa_range: (f64, f64),
    delta_range: (f64, f64),
    omega_y: f64,
    resolution: usize,
) -> Result<CancellationMap> {
    if resolution == 0 {
        return Err(Error::invalid("resolution", "must be at least 1"));
    }
    if !(kappa_range.0 > 0.0) || !(kappa_range.1 >= kappa_range.0) {
        return Err(Error::invalid("kappa_range", "needs 0 < lo <= hi"));
    }
    if !(delta_range.1 >= delta_range.0) || !delta_range.0.is_finite() || !delta_range.1.is_finite() {
        return Err(Error::invalid("delta_range", "needs finite lo <= hi"));
    }
    if resolution > 1 && (kappa_range.0 == kappa_range.1 || delta_range.0 == delta_range.1) {
        return Err(Error::invalid("resolution", "empty range needs resolution 1"));
    }
    if !(omega_y > 0.0) {
        return Err(Error::invalid("omega_y", "must be positive"));
    }
    let kappa = linspace(kappa_range.0, kappa_range.1, resolution);
    let delta = linspace(delta_range.0, delta_range.1, resolution);
    let values = (0..kappa.len() * delta.len())
        .into_par_iter()
        .map(|idx| cancellation_point(kappa[idx / delta.len()], delta[idx % delta.len()], omega_y))
        .collect();
    Ok(CancellationMap {
        kappa,
        delta,
        omega_y,
        values,
    })
}

type EdgeKey = (u8, usize, usize);

impl CancellationMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.delta.len() + j]
    }

    /// Number of defined cells.
    pub fn defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    fn level_value(&self, i: usize, j: usize, level: f64) -> Option<f64> {
        self.get(i, j).map(|p| p / TAU - level)
    }

    /// Crossing on a grid edge, refined by bisection on the exact `φ_c`
    /// where the edge stays in the defined region.
    fn edge_point(&self, key: EdgeKey, level: f64) -> [f64; 2] {
        let (dir, i, j) = key;
        let (i2, j2) = if dir == 0 { (i + 1, j) } else { (i, j + 1) };
        let a = self.level_value(i, j, level).unwrap();
        let b = self.level_value(i2, j2, level).unwrap();
        let at = |t: f64| {
            [
                self.kappa[i] + t * (self.kappa[i2] - self.kappa[i]),
                self.delta[j] + t * (self.delta[j2] - self.delta[j]),
            ]
        };
        let linear = a / (a - b);
        let exact = |t: f64| {
            let p = at(t);
            cancellation_point(p[0], p[1], self.omega_y).map(|v| v / TAU - level)
        };
        let defined = (1..16).all(|k| exact(k as f64 / 16.0).is_some());
        let t = if defined {
            crate::roots::bisect(|t| exact(t).unwrap_or(f64::NAN), 0.0, 1.0).unwrap_or(linear)
        } else {
            linear
        };
        at(t)
    }

    /// Marching-squares contour of `φ_c/2π = level`. Cells touching the
    /// undefined region are skipped.
    pub fn contour(&self, level_over_2pi: f64) -> Contour {
        let level = level_over_2pi;
        let (nk, nd) = (self.kappa.len(), self.delta.len());
        let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
        for i in 0..nk.saturating_sub(1) {
            for j in 0..nd.saturating_sub(1) {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let vals: Option<Vec<f64>> = corners.iter().map(|&(a, b)| self.level_value(a, b, level)).collect();
                let Some(v) = vals else { continue };
                let edges: [EdgeKey; 4] = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)];
                let pairs = [(0, 1), (1, 2), (3, 2), (0, 3)];
                let crossed: Vec<usize> = (0..4)
                    .filter(|&e| (v[pairs[e].0] >= 0.0) != (v[pairs[e].1] >= 0.0))
                    .collect();
                match crossed.len() {
                    2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                    4 => {
                        let centre = v.iter().sum::<f64>() / 4.0;
                        if (centre >= 0.0) == (v[0] >= 0.0) {
                            segments.push((edges[0], edges[1]));
                            segments.push((edges[2], edges[3]));
                        } else {
                            segments.push((edges[0], edges[3]));
                            segments.push((edges[1], edges[2]));
                        }
                    }
                    _ => {}
                }
            }
        }
        let polylines = join_segments(&segments)
            .into_iter()
            .map(|chain| chain.into_iter().map(|k| self.edge_point(k, level)).collect())
            .collect();
        Contour {
            level_over_2pi,
            polylines,
        }
    }
}

/// Joins segments sharing an edge into chains, open chains first.
fn join_segments(segments: &[(EdgeKey, EdgeKey)]) -> Vec<Vec<EdgeKey>> {
    let mut adjacency: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();
    let walk = |start: EdgeKey, used: &mut Vec<bool>| {
        let mut chain = vec![start];
        let mut node = start;
        while let Some(&s) = adjacency[&node].iter().find(|&&s| !used[s]) {
            used[s] = true;
            let (a, b) = segments[s];
            node = if a == node { b } else { a };
            chain.push(node);
        }
        chain
    };
    let ends: Vec<EdgeKey> = adjacency
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(k, _)| *k)
        .collect();
    for e in ends {
        if adjacency[&e].iter().any(|&s| !used[s]) {
            chains.push(walk(e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            chains.push(walk(segments[s].0, &mut used));
        }
    }
    chains
}

/// Trap position in `(0, π/2)` where [`phi_of_position`] vanishes.
pub fn rotation_root(a: f64, b: f64, re_i_eta_y: f64, omega_x: f64, omega_y: f64) -> Option<f64> {
    crate::roots::bisect(
        |phi| phi_of_position(phi, a, b, re_i_eta_y, omega_x, omega_y),
        1e-9,
        FRAC_PI_2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::hz_to_rad;
    use crate::couplings::detuning_factor;
    use crate::ExperimentConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const KAPPA_KHZ: f64 = 396.0;

    fn phic_over_2pi(delta_khz: f64, omega_y_khz: f64) -> Option<f64> {
        cancellation_point(hz_to_rad(KAPPA_KHZ * 1e3), hz_to_rad(delta_khz * 1e3), hz_to_rad(omega_y_khz * 1e3))
            .map(|p| p / TAU)
    }

    #[test]
    fn reference_cancellation_points() {
        let far = phic_over_2pi(-360.0, 136.0).unwrap();
        assert!((far - 0.125).abs() <= 0.002, "{far}");
        let near = phic_over_2pi(-176.0, 136.0).unwrap();
        assert!((0.138..=0.150).contains(&near), "{near}");
    }

    #[test]
    fn boundary_is_undefined() {
        // κ/2 = ω_y, Δ = 0 puts D exactly on ω_y².
        let w = 1.0e6;
        assert!(cancellation_point(2.0 * w, 0.0, w).is_none());
        assert!(cancellation_point(2.0 * w, -0.1 * w, w).is_some());
        assert!(cancellation_point(1.0 * w, -0.1 * w, w).is_none());
    }

    #[test]
    fn far_detuning_tends_to_one_eighth() {
        let p = phic_over_2pi(-50_000.0, 136.0).unwrap();
        assert!((p - 0.125).abs() < 1e-3);
    }

    #[test]
    fn maximum_along_reference_linewidth() {
        let best = (1..2000)
            .map(|i| phic_over_2pi(-(i as f64), 136.0).unwrap())
            .fold(0.0, f64::max);
        assert!((best - 0.17).abs() < 0.01, "{best}");
    }

    #[test]
    fn map_undefined_region_is_the_ellipse() {
        let wy = hz_to_rad(136e3);
        let m = phic_map((1e3, 4.0 * wy), (-2.0 * wy, 0.0), wy, 81).unwrap();
        for (i, &k) in m.kappa.iter().enumerate() {
            for (j, &d) in m.delta.iter().enumerate() {
                let inside = (k / (2.0 * wy)).powi(2) + (d / wy).powi(2) <= 1.0;
                assert_eq!(m.get(i, j).is_none(), inside);
            }
        }
    }

    #[test]
    fn single_cell_map() {
        let m = phic_map((1e6, 1e6), (-2e6, -2e6), 8e5, 1).unwrap();
        assert_eq!((m.kappa.len(), m.delta.len()), (1, 1));
        assert_eq!(m.get(0, 0), cancellation_point(1e6, -2e6, 8e5));
        assert!(m.contour(0.13).polylines.is_empty());
    }

    #[test]
    fn contour_levels() {
        let wy = hz_to_rad(136e3);
        let m = phic_map((hz_to_rad(10e3), hz_to_rad(1.2e6)), (hz_to_rad(-600e3), 0.0), wy, 241).unwrap();
        let c = m.contour(0.2);
        assert!(!c.polylines.is_empty());
        for line in &c.polylines {
            for p in line {
                assert!(p[1].abs() < wy, "{:?}", p);
                let v = cancellation_point(p[0], p[1], wy).unwrap() / TAU;
                assert!((v - 0.2).abs() < 1e-9);
                
            }
        }
        let c = m.contour(0.125);
        assert!(c.polylines.iter().all(|l| l.len() >= 2));
    }

    #[test]
    fn root_of_rotation_is_cancellation_point() {
        let cfg = ExperimentConfig::reference();
        let p = OperatingPoint::new(&cfg.with_phi(FRAC_PI_2)).unwrap();
        let a = p.couplings.rotation_amplitude();
        let wy = p.derived.omega0_y;
        let wx = p.derived.omega0_x;
        for delta_khz in [-176.0, -360.0, -1000.0] {
            let delta = hz_to_rad(delta_khz * 1e3);
            let b = detuning_factor(delta, cfg.kappa);
            let r = re_i_eta(wy, delta, cfg.kappa);
            let phic = cancellation_point(cfg.kappa, delta, wy).unwrap();
            let scale = (a / (wx - wy)).abs() * r.abs().max(b.abs());
            assert!(phi_of_position(phic, a, b, r, wx, wy).abs() < 1e-10 * scale);
            let root = rotation_root(a, b, r, wx, wy).unwrap();
            assert_relative_eq!(root, phic, max_relative = 1e-12);
            let scaled = rotation_root(7.3 * a, b, r, wx, wy).unwrap();
            assert_eq!(scaled.to_bits(), root.to_bits());
            // Grid argmin of |Φ| lands on φ_c.
            let step = FRAC_PI_2 / 2000.0;
            let argmin = (1..=2000)
                .map(|i| i as f64 * step)
                .min_by(|x, y| {
                    phi_of_position(*x, a, b, r, wx, wy)
                        .abs()
                        .total_cmp(&phi_of_position(*y, a, b, r, wx, wy).abs())
                })
                .unwrap();
            assert!((argmin - phic).abs() <= step);
        }
    }

    #[test]
    fn node_value() {
        let (a, b, r, wx, wy) = (2.0e9, -3.0e-6, 4.0e-6, 1.0e6, 0.9e6);
        assert_relative_eq!(phi_of_position(FRAC_PI_2, a, b, r, wx, wy), a * r / (wx - wy), max_relative = 1e-15);
    }

    #[test]
    fn mode_angle_decomposition() {
        let cfg = ExperimentConfig::reference();
        let node = mode_angle(&OperatingPoint::new(&cfg).unwrap(), Backaction::Unity).unwrap();
        assert_eq!(node.phi_cs, 0.0);
        assert_eq!(node.phi_total, node.phi_dyn);
        for phi_frac in [0.05, 0.1, 0.2] {
            let p = OperatingPoint::new(&cfg.with_phi(phi_frac * TAU)).unwrap();
            let m = mode_angle(&p, Backaction::Unity).unwrap();
            assert!(m.phi_dyn * m.phi_cs < 0.0);
            assert_eq!(m.phi_total, m.phi_dyn + m.phi_cs);
        }
    }

    #[test]
    fn averaged_angle_matches_interference_prefactor() {
        let cases = [(-360.0, 0.25), (-360.0, 0.22), (-360.0, 0.2), (-176.0, 0.25)];
        for (delta_khz, phi_frac) in cases {
            {
                let cfg = ExperimentConfig::reference()
                    .with_phi(phi_frac * TAU)
                    .with_detuning(hz_to_rad(delta_khz * 1e3));
                let p = OperatingPoint::new(&cfg).unwrap();
                let m = mode_angle(&p, Backaction::Unity).unwrap();
                let g = crate::response::interference(m.omega_y, &p.couplings, cfg.detuning, cfg.kappa);
                let approx = g.re / (m.omega_x - m.omega_y);
                assert!((m.phi_average / approx - 1.0).abs() < 0.1, "{} {}", m.phi_average, approx);
            }
        }
    }

    #[test]
    fn frequency_and_rotation_cancellation_are_close() {
        let cfg = ExperimentConfig::reference();
        let dp = crate::params::derive_params(&cfg).unwrap();
        for delta_khz in [-176.0, -360.0] {
            let delta = hz_to_rad(delta_khz * 1e3);
            let phic = cancellation_point(cfg.kappa, delta, hz_to_rad(136e3)).unwrap();
            let freq =
                crate::couplings::frequency_cancellation(&dp, cfg.theta, delta, cfg.kappa, crate::Axis::Y).unwrap();
            assert!((freq - phic).abs() / TAU <= 0.01);
        }
    }

    #[test]
    fn detuning_orders_cancellation_points() {
        let near = phic_over_2pi(-176.0, 136.0).unwrap();
        let far = phic_over_2pi(-360.0, 136.0).unwrap();
        assert!(near > far);
    }

    proptest! {
        #[test]
        fn ellipse_condition(kappa_khz in 1.0f64..2000.0, delta_khz in -1000.0f64..1000.0) {
            let (k, d, w) = (hz_to_rad(kappa_khz * 1e3), hz_to_rad(delta_khz * 1e3), hz_to_rad(136e3));
            let inside = d * d + k * k / 4.0 < w * w;
            prop_assert_eq!(c_phi(k, d, w) < 0.0, inside);
        }

        #[test]
        fn power_and_polarisation_do_not_move_root(scale in 0.01f64..100.0, delta_khz in -3000.0f64..-200.0) {
            let (k, d) = (hz_to_rad(396e3), hz_to_rad(delta_khz * 1e3));
            let (wx, wy) = (hz_to_rad(163e3), hz_to_rad(142e3));
            let (b, r) = (detuning_factor(d, k), re_i_eta(wy, d, k));
            let base = rotation_root(1e9, b, r, wx, wy).unwrap();
            prop_assert_eq!(rotation_root(1e9 * scale, b, r, wx, wy).unwrap().to_bits(), base.to_bits());
        }
    }
}
