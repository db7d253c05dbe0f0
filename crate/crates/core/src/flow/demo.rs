use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{cotan_laplacian, lumped_mass, MassMatrix, DEFAULT_TAU};
use crate::linalg::{generalized_eigs, Spectrum};
use crate::mesh::TriMesh;
use crate::noise::{par_samples, MaternSampler};
use crate::rng::RngStream;
use crate::spectral::{dot, Projector, VertexField};

use super::{closed_form, cov, integrate, integrate_mode, mmd, FlowConfig, SpectralGaussianTarget};

pub const DEFAULT_TARGET_TAU: f64 = 10.0;
/// Reference samples use streams from here on, away from generated ones.
const REFERENCE_STREAM: u64 = 1 << 47;
const CONVERGENCE_STEPS: [usize; 4] = [25, 50, 100, 200];
/// Scalar trajectory used for the convergence table: `a = 1`, `b = 2`, `x0 = 0.5`.
const PROBE: (f64, f64, f64) = (1.0, 2.0, 0.5);
const CLOSED_FORM_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoConfig {
    pub samples: usize,
    /// Generated samples compared against the reference set.
    pub mmd_samples: usize,
    pub steps: usize,
    pub channels: usize,
    pub seed: u64,
    pub tau: f64,
    pub target_tau: f64,
    /// Scalar applied to the source noise.
    pub gain: f64,
    /// Modes moved by the flow; all of them when `None`.
    pub modes: Option<usize>,
    pub variance_modes: usize,
    pub variance_threshold: f64,
    pub mmd_ratio_threshold: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            samples: 5000,
            mmd_samples: 1000,
            steps: super::DEFAULT_STEPS,
            channels: 1,
            seed: 0,
            tau: DEFAULT_TAU,
            target_tau: DEFAULT_TARGET_TAU,
            gain: 1.0,
            modes: None,
            variance_modes: 30,
            variance_threshold: 0.05,
            mmd_ratio_threshold: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeVariance {
    pub index: usize,
    pub eigenvalue: f64,
    pub target_variance: f64,
    pub empirical_variance: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub error: f64,
    /// Error at the previous (coarser) row divided by this one.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub vertex_count: usize,
    pub config: DemoConfig,
    pub mmd: f64,
    /// Between the two halves of the reference set.
    pub mmd_reference: f64,
    pub mmd_ratio: f64,
    pub cov: f64,
    pub cov_reference: f64,
    pub per_mode_variance_error: Vec<ModeVariance>,
    pub max_variance_error: f64,
    pub convergence: Vec<ConvergenceRow>,
    /// `log2` of the finest error ratio.
    pub observed_order: f64,
    pub closed_form_error: f64,
    pub pass: bool,
}

/// A report plus the generated fields, one `Vec` of channels per sample.
#[derive(Clone, Debug)]
pub struct DemoOutput {
    pub report: DemoReport,
    pub generated: Vec<Vec<VertexField>>,
}

fn stack(channels: &[VertexField]) -> Vec<f64> {
    channels.iter().flat_map(|c| c.iter().copied()).collect()
}

/// Maps a source sample through the exact flow: each moved mode is rescaled
/// by `b/a`.
fn transport_exactly(f0: &[f64], target: &SpectralGaussianTarget, spectrum: &Spectrum, m: &MassMatrix) -> Vec<f64> {
    let weighted = m.apply(f0);
    let mut out = f0.to_vec();
    for (j, phi) in spectrum.vectors().take(target.len()).enumerate() {
        let x0 = dot(&weighted, phi);
        let delta = closed_form(x0, target.source_std()[j], target.target_std()[j]) - x0;
        out.iter_mut().zip(phi).for_each(|(o, p)| *o += delta * p);
    }
    out
}

pub fn convergence_table() -> Vec<ConvergenceRow> {
    let (a, b, x0) = PROBE;
    let exact = closed_form(x0, a, b);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for steps in CONVERGENCE_STEPS {
        let error = (integrate_mode(x0, a, b, steps) - exact).abs();
        let ratio = rows.last().map(|r| r.error / error);
        rows.push(ConvergenceRow { steps, error, ratio });
    }
    rows
}

fn validate(cfg: &DemoConfig) -> Result<()> {
    if cfg.samples < 2 || cfg.mmd_samples == 0 || cfg.mmd_samples > cfg.samples {
        return Err(Error::InvalidInput(format!(
            "need samples >= 2 and 1 <= mmd_samples <= samples, got {} and {}",
            cfg.samples, cfg.mmd_samples
        )));
    }
    for (name, value) in [("tau", cfg.tau), ("target tau", cfg.target_tau), ("gain", cfg.gain)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositive { name, value });
        }
    }
    FlowConfig {
        steps: cfg.steps,
        channels: cfg.channels,
    }
    .validate()?;
    Ok(())
}

/// Draws Matérn noise, transports it to the in-family target with screening
/// `target_tau`, and scores the result.
pub fn run_demo(mesh: &TriMesh, cfg: &DemoConfig) -> Result<DemoOutput> {
    validate(cfg)?;
    let n = mesh.vertex_count();
    let l = cotan_laplacian(mesh)?;
    let m = lumped_mass(mesh)?;
    let spectrum = generalized_eigs(&l, &m, n)?;
    let k = cfg.modes.unwrap_or(n);
    let target = SpectralGaussianTarget::matern(spectrum.eigenvalues(), k, cfg.tau, cfg.target_tau, cfg.gain)?;
    let source = MaternSampler::new(&l, &m, cfg.tau)?;
    let flow = FlowConfig {
        steps: cfg.steps,
        channels: cfg.channels,
    };

    let generated = par_samples(cfg.samples, |i| {
        (0..cfg.channels)
            .map(|c| {
                let f0 = source
                    .sample(&mut RngStream::for_channel(cfg.seed, i as u64, c as u64))?
                    .scaled(cfg.gain);
                integrate(&f0, &target, &spectrum, &m, &flow)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let variance_modes = cfg.variance_modes.min(n);
    let projector = Projector::new(&spectrum, &m, variance_modes)?;
    let mut sum = vec![0.0; variance_modes];
    let mut sum_sq = vec![0.0; variance_modes];
    for field in generated.iter().flatten() {
        for (j, c) in projector.project(field).into_iter().enumerate() {
            sum[j] += c;
            sum_sq[j] += c * c;
        }
    }
    let draws = (cfg.samples * cfg.channels) as f64;
    let per_mode: Vec<ModeVariance> = (0..variance_modes)
        .map(|j| {
            let mean = sum[j] / draws;
            let var = (sum_sq[j] - draws * mean * mean) / (draws - 1.0);
            let std = if j < k {
                target.target_std()[j]
            } else {
                cfg.gain / (spectrum.eigenvalues()[j] + cfg.tau)
            };
            let want = std * std;
            ModeVariance {
                index: j + 1,
                eigenvalue: spectrum.eigenvalues()[j],
                target_variance: want,
                empirical_variance: var,
                relative_error: (var - want).abs() / want,
            }
        })
        .collect();
    let max_variance_error = per_mode.iter().map(|v| v.relative_error).fold(0.0, f64::max);

    let reference = par_samples(2 * cfg.mmd_samples, |i| {
        let channels = (0..cfg.channels)
            .map(|c| {
                let mut rng = RngStream::for_channel(cfg.seed, REFERENCE_STREAM + i as u64, c as u64);
                let f0 = source.sample(&mut rng)?.scaled(cfg.gain);
                VertexField::new(transport_exactly(&f0, &target, &spectrum, &m))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(stack(&channels))
    })?;
    let (half_a, half_b) = reference.split_at(cfg.mmd_samples);
    let gen_set: Vec<Vec<f64>> = generated[..cfg.mmd_samples].iter().map(|s| stack(s)).collect();
    let mmd_gen = mmd(&gen_set, half_a, &m)?;
    let mmd_reference = mmd(half_b, half_a, &m)?;
    let mmd_ratio = mmd_gen / mmd_reference;
    let cov_gen = cov(&gen_set, half_a, &m)?;
    let cov_reference = cov(half_b, half_a, &m)?;

    let convergence = convergence_table();
    let (a, b, x0) = PROBE;
    let closed_form_error = (integrate_mode(x0, a, b, cfg.steps) - closed_form(x0, a, b)).abs();
    let observed_order = convergence.last().and_then(|r| r.ratio).map_or(f64::NAN, f64::log2);

    let pass = max_variance_error <= cfg.variance_threshold
        && mmd_ratio <= cfg.mmd_ratio_threshold
        && closed_form_error <= CLOSED_FORM_TOL;
    Ok(DemoOutput {
        report: DemoReport {
            vertex_count: n,
            config: cfg.clone(),
            mmd: mmd_gen,
            mmd_reference,
            mmd_ratio,
            cov: cov_gen,
            cov_reference,
            per_mode_variance_error: per_mode,
            max_variance_error,
            convergence,
            observed_order,
            closed_form_error,
            pass,
        },
        generated,
    })
}
