//! Monte-Carlo checks of triangulation agnosticism.
//!
//! Given meshes of one surface and a sampler, [`run`] estimates per-mode
//! coefficient statistics on each mesh and checks
//!
//! 1. per-frequency independence (off-diagonal correlations),
//! 2. matching per-frequency laws between meshes (W2 of fitted Gaussians
//!    against the eigenvalue-difference bound),
//! 3. bounded tail variance beyond mode `k`,
//!
//! plus, optionally, scale invariance of normalized Matérn noise. Every
//! threshold and slack ends up in the report next to the measured value.

mod checks;
mod scale;
mod stats;

pub use checks::{
    check_property1, check_property2, check_property3, default_epsilon, match_modes, MatchedPair, Property1Result,
    Property2Report, Property3Result, TailTheory, DEFAULT_CORRELATION_THRESHOLD, DEFAULT_MATCH_TOL, DEFAULT_TAIL_K,
    EPSILON_FACTOR, MAX_CORRELATION_BLOCK, SLACK_SIGMAS,
};
pub use scale::{
    fixed_tau_scale_report, relative_deviation, scale_invariance_test, ScaleEntry, ScaleReport, SCALE_TEST_SAMPLES,
    SCALE_THRESHOLD,
};
pub use stats::{
    correlation_matrix, empirical_spectral_stats, Histogram, ModeRecord, SpectralStats, StatsOptions, DEFAULT_BINS,
    HISTOGRAM_SIGMAS, MIN_SAMPLES,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{cotan_laplacian, lumped_mass, Screening, DEFAULT_TAU};
use crate::linalg::generalized_eigs;
use crate::mesh::TriMesh;
use crate::noise::{NoiseModel, Sampler, SamplerSpec};

/// Streams of mesh `j` start at `j << MESH_STREAM_SHIFT`.
pub const MESH_STREAM_SHIFT: u32 = 48;
/// Modes tracked beyond the requested pair count, so that matching can skip
/// over modes that shifted between triangulations.
const MATCH_MARGIN: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleConfig {
    pub c: f64,
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub sampler: SamplerSpec,
    pub samples: usize,
    pub seed: u64,
    /// Matched mode pairs compared by property 2.
    pub pairs: usize,
    pub match_tol: f64,
    pub correlation_threshold: f64,
    pub correlation_block: usize,
    pub tail_k: usize,
    /// Property 3 threshold; twice the Weyl-predicted tail when `None`.
    pub epsilon: Option<f64>,
    pub histogram_indices: Vec<usize>,
    pub bins: usize,
    pub scale: Option<ScaleConfig>,
}

impl VerifyConfig {
    pub fn new(sampler: SamplerSpec) -> Self {
        Self {
            sampler,
            samples: 20_000,
            seed: 0,
            pairs: 30,
            match_tol: DEFAULT_MATCH_TOL,
            correlation_threshold: DEFAULT_CORRELATION_THRESHOLD,
            correlation_block: MAX_CORRELATION_BLOCK,
            tail_k: DEFAULT_TAIL_K,
            epsilon: None,
            histogram_indices: vec![2, 10, 30],
            bins: DEFAULT_BINS,
            scale: None,
        }
    }

    /// τ used for bounds and the default ε: the sampler's fixed τ, else the
    /// default.
    pub fn protocol_tau(&self) -> f64 {
        match self.sampler.screening {
            Screening::Tau(t) => t,
            Screening::Normalized(_) => DEFAULT_TAU,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshSummary {
    pub name: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub area: f64,
    /// Screening of the Matérn-family samplers on this mesh.
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgnosticismReport {
    pub model: NoiseModel,
    pub sample_count: usize,
    pub seed: u64,
    pub meshes: Vec<MeshSummary>,
    pub property1: Vec<Property1Result>,
    /// First mesh against each of the others.
    pub property2: Vec<Property2Report>,
    pub property3: Vec<Property3Result>,
    pub scale: Option<ScaleReport>,
    /// Same comparison at fixed τ; never affects `pass`.
    pub fixed_tau_scale: Option<ScaleReport>,
    pub pass: bool,
}

impl AgnosticismReport {
    fn recompute_pass(&mut self) {
        self.pass = self.property1.iter().all(|p| p.pass)
            && self.property2.iter().all(|p| p.pass)
            && self.property3.iter().all(|p| p.pass)
            && self.scale.as_ref().is_none_or(|s| s.pass);
    }
}

/// A report plus the per-mesh statistics it was computed from.
#[derive(Clone, Debug)]
pub struct Verification {
    pub report: AgnosticismReport,
    pub stats: Vec<SpectralStats>,
}

/// Runs all checks on `meshes` (at least one; property 2 needs two).
pub fn run(meshes: &[(String, TriMesh)], cfg: &VerifyConfig) -> Result<Verification> {
    if meshes.is_empty() {
        return Err(Error::InvalidInput("no meshes to verify".into()));
    }
    let tau = cfg.protocol_tau();
    let epsilon = match cfg.epsilon {
        Some(e) if e > 0.0 => e,
        Some(e) => {
            return Err(Error::NonPositive {
                name: "epsilon",
                value: e,
            })
        }
        None => default_epsilon(cfg.tail_k, tau, meshes[0].1.total_area()),
    };
    let hist_max = cfg.histogram_indices.iter().copied().max().unwrap_or(0);
    let wanted = (cfg.pairs + MATCH_MARGIN)
        .max(cfg.correlation_block)
        .max(cfg.tail_k.saturating_sub(1))
        .max(hist_max);

    let mut summaries = Vec::new();
    let mut all_stats = Vec::new();
    let mut property1 = Vec::new();
    let mut property3 = Vec::new();
    for (j, (name, mesh)) in meshes.iter().enumerate() {
        let l = cotan_laplacian(mesh)?;
        let m = lumped_mass(mesh)?;
        let spectrum = generalized_eigs(&l, &m, mesh.vertex_count())?;
        let sampler = match cfg.sampler.model {
            NoiseModel::Explicit => {
                let Screening::Tau(t) = cfg.sampler.screening else {
                    return Err(Error::InvalidInput("model 'explicit' needs a fixed tau".into()));
                };
                let k = cfg.sampler.explicit_modes.unwrap_or(mesh.vertex_count());
                Sampler::Explicit {
                    spectrum: spectrum.truncated(k),
                    tau: t,
                }
            }
            _ => Sampler::build(mesh, &cfg.sampler)?,
        };
        let (sampler_tau, gamma) = match &sampler {
            Sampler::Matern(s) => (Some(s.tau()), s.gamma()),
            Sampler::Explicit { tau, .. } => (Some(*tau), None),
            _ => (None, None),
        };
        let opts = StatsOptions {
            modes: wanted.min(mesh.vertex_count()),
            correlation_block: cfg.correlation_block,
            histogram_indices: cfg.histogram_indices.clone(),
            bins: cfg.bins,
        };
        let stats = empirical_spectral_stats(
            &sampler,
            &spectrum,
            &m,
            cfg.samples,
            cfg.seed,
            (j as u64) << MESH_STREAM_SHIFT,
            &opts,
        )?;
        property1.push(check_property1(name, &stats, cfg.correlation_threshold)?);
        let theory = sampler_tau.map(|t| TailTheory {
            eigenvalues: spectrum.eigenvalues(),
            tau: t,
        });
        property3.push(check_property3(name, &stats, cfg.tail_k, epsilon, theory)?);
        summaries.push(MeshSummary {
            name: name.clone(),
            vertex_count: mesh.vertex_count(),
            face_count: mesh.face_count(),
            area: m.total(),
            tau: sampler_tau,
            gamma,
        });
        all_stats.push(stats);
    }

    let bound_tau = summaries[0].tau.unwrap_or(tau);
    let property2 = (1..meshes.len())
        .map(|j| {
            check_property2(
                (&meshes[0].0, &all_stats[0]),
                (&meshes[j].0, &all_stats[j]),
                bound_tau,
                cfg.match_tol,
                cfg.pairs,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let (scale, fixed_tau_scale) = match &cfg.scale {
        Some(sc) => (
            Some(scale_invariance_test(&meshes[0].1, sc.c, &sc.scales, cfg.seed)?),
            Some(fixed_tau_scale_report(&meshes[0].1, tau, &sc.scales, cfg.seed)?),
        ),
        None => (None, None),
    };

    let mut report = AgnosticismReport {
        model: cfg.sampler.model,
        sample_count: cfg.samples,
        seed: cfg.seed,
        meshes: summaries,
        property1,
        property2,
        property3,
        scale,
        fixed_tau_scale,
        pass: false,
    };
    report.recompute_pass();
    Ok(Verification {
        report,
        stats: all_stats,
    })
}
