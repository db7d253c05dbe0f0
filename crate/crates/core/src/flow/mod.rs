//! Flow matching with a closed-form velocity.
//!
//! Source and target are independent zero-mean Gaussians that are diagonal
//! in the spectral basis, with per-mode standard deviations `a` and `b`.
//! Under the linear path `f_t = (1-t) f_0 + t f_1`, the marginal velocity
//! `E[f_1 - f_0 | f_t = x]` is linear in each mode:
//!
//! ```text
//! u(x, t) = x · (t b² - (1-t) a²) / ((1-t)² a² + t² b²)
//! ```
//!
//! which stands in for a trained denoiser. Trajectories are integrated with
//! the midpoint rule on a uniform grid.

mod demo;
mod metrics;

pub use demo::{
    convergence_table, run_demo, ConvergenceRow, DemoConfig, DemoOutput, DemoReport, ModeVariance, DEFAULT_TARGET_TAU,
};
pub use metrics::{cov, mass_distance, mmd, nearest_reference};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::MassMatrix;
use crate::linalg::Spectrum;
use crate::spectral::{dot, SpectralCoeffs, VertexField};

pub const DEFAULT_STEPS: usize = 100;

/// Per-mode standard deviations of a spectrally diagonal Gaussian source and
/// target.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralGaussianTarget {
    source_std: Vec<f64>,
    target_std: Vec<f64>,
}

impl SpectralGaussianTarget {
    pub fn new(source_std: Vec<f64>, target_std: Vec<f64>) -> Result<Self> {
        if source_std.len() != target_std.len() {
            return Err(Error::LengthMismatch {
                what: "target deviations",
                expected: source_std.len(),
                found: target_std.len(),
            });
        }
        for (name, v) in [("source deviation", &source_std), ("target deviation", &target_std)] {
            if let Some(&x) = v.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::NonPositive { name, value: x });
            }
        }
        Ok(Self { source_std, target_std })
    }

    /// Matérn source `gain/(λ_i + τ)` and Matérn target `1/(λ_i + τ')` over the
    /// first `k` eigenvalues.
    pub fn matern(eigenvalues: &[f64], k: usize, tau: f64, target_tau: f64, gain: f64) -> Result<Self> {
        if k > eigenvalues.len() {
            return Err(Error::OutOfRange {
                what: "mode count",
                index: k,
                valid: format!("0..={}", eigenvalues.len()),
            });
        }
        let a = eigenvalues[..k].iter().map(|l| gain / (l + tau)).collect();
        let b = eigenvalues[..k].iter().map(|l| 1.0 / (l + target_tau)).collect();
        Self::new(a, b)
    }

    pub fn len(&self) -> usize {
        self.source_std.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_std.is_empty()
    }

    pub fn source_std(&self) -> &[f64] {
        &self.source_std
    }

    pub fn target_std(&self) -> &[f64] {
        &self.target_std
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub steps: usize,
    /// Independent scalar channels per sample.
    pub channels: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            channels: 1,
        }
    }
}

impl FlowConfig {
    pub fn validate(self) -> Result<Self> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if self.channels == 0 {
            return Err(Error::InvalidInput("channels must be at least 1".into()));
        }
        Ok(self)
    }
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "time",
            index: 0,
            valid: format!("[0, 1], got {t}"),
        })
    }
}

/// `(1-t) f0 + t f1`.
pub fn linear_path(f0: &[f64], f1: &[f64], t: f64) -> Result<VertexField> {
    check_time(t)?;
    if f0.len() != f1.len() {
        return Err(Error::LengthMismatch {
            what: "path endpoint",
            expected: f0.len(),
            found: f1.len(),
        });
    }
    VertexField::new(f0.iter().zip(f1).map(|(a, b)| (1.0 - t) * a + t * b).collect())
}

/// Velocity of one mode with source deviation `a` and target deviation `b`.
pub fn mode_velocity(x: f64, t: f64, a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    let s = 1.0 - t;
    x * (t * b2 - s * a2) / (s * s * a2 + t * t * b2)
}

pub fn marginal_velocity(x: &[f64], t: f64, target: &SpectralGaussianTarget) -> Result<SpectralCoeffs> {
    check_time(t)?;
    if x.len() != target.len() {
        return Err(Error::LengthMismatch {
            what: "spectral state",
            expected: target.len(),
            found: x.len(),
        });
    }
    SpectralCoeffs::new(
        x.iter()
            .zip(target.source_std.iter().zip(&target.target_std))
            .map(|(&xi, (&a, &b))| mode_velocity(xi, t, a, b))
            .collect(),
    )
}

/// Midpoint-rule solution at `t = 1` of `dx/dt = u(x, t)` for one mode.
pub fn integrate_mode(x0: f64, a: f64, b: f64, steps: usize) -> f64 {
    let dt = 1.0 / steps as f64;
    let mut x = x0;
    for s in 0..steps {
        let t = s as f64 * dt;
        let half = x + 0.5 * dt * mode_velocity(x, t, a, b);
        x += dt * mode_velocity(half, t + 0.5 * dt, a, b);
    }
    x
}

/// Exact solution at `t = 1`: the flow rescales each mode by `b/a`.
pub fn closed_form(x0: f64, a: f64, b: f64) -> f64 {
    x0 * b / a
}

/// Transports `f0` along the flow: projects onto the target's modes,
/// integrates each coefficient, and adds back the untouched remainder.
pub fn integrate(
    f0: &[f64],
    target: &SpectralGaussianTarget,
    spectrum: &Spectrum,
    mass: &MassMatrix,
    config: &FlowConfig,
) -> Result<VertexField> {
    let config = config.validate()?;
    let n = spectrum.dim();
    for (what, len) in [("initial field", f0.len()), ("mass matrix", mass.dim())] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    if target.len() > spectrum.len() {
        return Err(Error::OutOfRange {
            what: "target mode count",
            index: target.len(),
            valid: format!("0..={}", spectrum.len()),
        });
    }
    let weighted: Vec<f64> = f0.iter().zip(mass.diag()).map(|(f, w)| f * w).collect();
    let mut out = f0.to_vec();
    for (j, phi) in spectrum.vectors().take(target.len()).enumerate() {
        let x0 = dot(&weighted, phi);
        let x1 = integrate_mode(x0, target.source_std[j], target.target_std[j], config.steps);
        let delta = x1 - x0;
        out.iter_mut().zip(phi).for_each(|(o, p)| *o += delta * p);
    }
    VertexField::new(out)
}
