//! Levenberg–Marquardt fit of `S(ω) = C / [(ω² − ω₀²)² + γ²ω²] + b`.
//!
//! The model is rewritten as `h γ²ω₀² / [(ω² − ω₀²)² + γ²ω²] + b` so that
//! `h` is the peak height. Parameters are scaled by the initial centre,
//! width and height: `ω₀ = ω_c + γ_e δ`, `γ = γ_e r`, `h = S_p a`,
//! `b = S_p β`.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

pub(crate) const MAX_ITERATIONS: usize = 200;
pub(crate) const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Start {
    pub center: f64,
    pub width: f64,
    pub height: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Solution {
    pub center: f64,
    pub width: f64,
    pub height: f64,
    pub baseline: f64,
    pub residual_norm: f64,
    /// Variances of (center, width, height, baseline).
    pub variances: [f64; 4],
    pub iterations: usize,
}

struct Problem<'a> {
    omega: &'a [f64],
    y: Vec<f64>,
    start: Start,
}

impl Problem<'_> {
    fn physical(&self, p: &Vector4<f64>) -> (f64, f64) {
        (self.start.center + self.start.width * p[0], self.start.width * p[1])
    }

    fn residuals(&self, p: &Vector4<f64>) -> Vec<f64> {
        let (w0, g) = self.physical(p);
        self.omega
            .iter()
            .zip(&self.y)
            .map(|(&w, &y)| {
                let split = (w - w0) * (w + w0);
                let l = g * g * w0 * w0 / (split * split + g * g * w * w);
                p[2] * l + p[3] - y
            })
            .collect()
    }

    fn cost(&self, p: &Vector4<f64>) -> f64 {
        0.5 * self.residuals(p).iter().map(|r| r * r).sum::<f64>()
    }

    /// Normal equations `JᵀJ` and `Jᵀr`.
    fn normal(&self, p: &Vector4<f64>) -> (Matrix4<f64>, Vector4<f64>) {
        let (w0, g) = self.physical(p);
        let ge = self.start.width;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&w, &y) in self.omega.iter().zip(&self.y) {
            let split = (w - w0) * (w + w0);
            let d = split * split + g * g * w * w;
            let n = g * g * w0 * w0;
            let l = n / d;
            let dl_dw0 = (2.0 * g * g * w0 * d + n * 4.0 * w0 * split) / (d * d);
            let dl_dg = (2.0 * g * w0 * w0 * d - n * 2.0 * g * w * w) / (d * d);
            let row = Vector4::new(p[2] * ge * dl_dw0, p[2] * ge * dl_dg, l, 1.0);
            let r = p[2] * l + p[3] - y;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        (jtj, jtr)
    }
}

pub(crate) fn fit_oscillator(omega: &[f64], y: &[f64], start: Start) -> Result<Solution> {
    let scale = start.height;
    let problem = Problem {
        omega,
        y: y.iter().map(|v| v / scale).collect(),
        start,
    };
    let mut p = Vector4::new(0.0, 1.0, 1.0, start.baseline / scale);
    let mut cost = problem.cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = problem.normal(&p);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                lambda *= 4.0;
                continue;
            };
            let trial = p + step;
            let trial_cost = problem.cost(&trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let drop = cost - trial_cost;
                let small_step = step.norm() <= TOLERANCE * (p.norm() + TOLERANCE);
                p = trial;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if drop <= TOLERANCE * cost || small_step || trial_cost == 0.0 {
                    converged = true;
                }
                cost = trial_cost;
                break;
            }
            lambda *= 4.0;
        }
        // No downhill step exists at any damping: a local minimum.
        if !improved {
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitDiverged { iterations });
    }

    let (jtj, _) = problem.normal(&p);
    let dof = (omega.len() as f64 - 4.0).max(1.0);
    let sigma2 = 2.0 * cost / dof;
    let cov = jtj.try_inverse().unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let ge = start.width;
    let (center, width) = problem.physical(&p);
    Ok(Solution {
        center,
        width: width.abs(),
        height: p[2] * scale,
        baseline: p[3] * scale,
        residual_norm: (2.0 * cost).sqrt() * scale,
        variances: [
            sigma2 * cov[(0, 0)] * ge * ge,
            sigma2 * cov[(1, 1)] * ge * ge,
            sigma2 * cov[(2, 2)] * scale * scale,
            sigma2 * cov[(3, 3)] * scale * scale,
        ],
        iterations,
    })
}
