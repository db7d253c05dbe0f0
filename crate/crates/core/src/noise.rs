//! Noise samplers: naïve iid, white, Matérn, normalized Matérn and the
//! explicit spectral sum.
//!
//! Every sampler is a pure function of its inputs and an [`RngStream`].
//! Batch helpers key stream `i` to sample `i`, so batches are identical no
//! matter how rayon schedules them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{
    cotan_laplacian, lumped_mass, normalization_gamma, screened_operator, Laplacian, MassMatrix, Screening,
};
use crate::linalg::{factorize, generalized_eigs, SpdFactor, Spectrum};
use crate::mesh::TriMesh;
use crate::rng::RngStream;
use crate::spectral::VertexField;

/// τ used by the "no screening" ablation, relative to Γ.
pub const NO_SCREENING_RATIO: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseModel {
    Naive,
    White,
    Matern,
    MaternNormalized,
    Explicit,
}

impl NoiseModel {
    pub fn name(self) -> &'static str {
        match self {
            NoiseModel::Naive => "naive",
            NoiseModel::White => "white",
            NoiseModel::Matern => "matern",
            NoiseModel::MaternNormalized => "matern-normalized",
            NoiseModel::Explicit => "explicit",
        }
    }
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            NoiseModel::Naive,
            NoiseModel::White,
            NoiseModel::Matern,
            NoiseModel::MaternNormalized,
            NoiseModel::Explicit,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| Error::InvalidInput(format!("unknown noise model '{s}'")))
    }
}

/// iid `N(0, 1)` per vertex.
pub fn sample_naive(n: usize, rng: &mut RngStream) -> VertexField {
    VertexField::from_raw(rng.normals(n))
}

/// `w_i = n_i / √M_ii`.
pub fn sample_white(m: &MassMatrix, rng: &mut RngStream) -> VertexField {
    VertexField::from_raw(m.diag().iter().map(|mi| rng.normal() / mi.sqrt()).collect())
}

/// `f = (L + τM)⁻¹ √M n` with `factor` built from `L + τM`.
pub fn sample_matern(factor: &SpdFactor, m: &MassMatrix, rng: &mut RngStream) -> Result<VertexField> {
    let normals = rng.normals(m.dim());
    sample_matern_from_normals(factor, m, &normals)
}

/// [`sample_matern`] with the standard normal draw supplied by the caller.
pub fn sample_matern_from_normals(factor: &SpdFactor, m: &MassMatrix, normals: &[f64]) -> Result<VertexField> {
    if normals.len() != m.dim() {
        return Err(Error::LengthMismatch {
            what: "normal draw",
            expected: m.dim(),
            found: normals.len(),
        });
    }
    let rhs: Vec<f64> = normals.iter().zip(m.diag()).map(|(z, mi)| z * mi.sqrt()).collect();
    factor.solve(&rhs).map(VertexField::from_raw)
}

/// Normalized Matérn noise: `τ = cΓ`, output `√Γ f`. Builds the operators
/// and factorization on every call; use [`MaternSampler::normalized`] for
/// batches.
pub fn sample_matern_normalized(mesh: &TriMesh, c: f64, rng: &mut RngStream) -> Result<VertexField> {
    MaternSampler::from_mesh(mesh, Screening::Normalized(c))?.sample(rng)
}

/// `f = Σ_{i≤k} χ_i/(λ_i + τ) φ_i` with `χ ~ N(0, I_k)`.
pub fn sample_explicit(spectrum: &Spectrum, tau: f64, k: usize, rng: &mut RngStream) -> Result<VertexField> {
    check_modes(spectrum, k)?;
    let chi = rng.normals(k);
    sample_explicit_from_chi(spectrum, tau, &chi)
}

/// [`sample_explicit`] with the spectral draw `χ` supplied by the caller;
/// `k = chi.len()`.
pub fn sample_explicit_from_chi(spectrum: &Spectrum, tau: f64, chi: &[f64]) -> Result<VertexField> {
    check_modes(spectrum, chi.len())?;
    check_tau(tau)?;
    let mut out = vec![0.0; spectrum.dim()];
    for (j, (&x, phi)) in chi.iter().zip(spectrum.vectors()).enumerate() {
        let w = x / (spectrum.eigenvalues()[j] + tau);
        for (o, p) in out.iter_mut().zip(phi) {
            *o += w * p;
        }
    }
    Ok(VertexField::from_raw(out))
}

fn check_modes(spectrum: &Spectrum, k: usize) -> Result<()> {
    if k > spectrum.len() {
        return Err(Error::OutOfRange {
            what: "mode count",
            index: k,
            valid: format!("0..={}", spectrum.len()),
        });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive {
            name: "tau",
            value: tau,
        })
    }
}

/// A prefactorized Matérn sampler for one mesh. Cheap to share across
/// threads; each call to [`MaternSampler::sample`] is one triangular solve
/// pair.
#[derive(Debug)]
pub struct MaternSampler {
    mass: MassMatrix,
    factor: SpdFactor,
    tau: f64,
    gamma: Option<f64>,
    output_scale: f64,
}

impl MaternSampler {
    /// Algorithm with a fixed `τ`.
    pub fn new(l: &Laplacian, m: &MassMatrix, tau: f64) -> Result<Self> {
        let factor = factorize(&screened_operator(l, m, tau)?)?;
        Ok(Self {
            mass: m.clone(),
            factor,
            tau,
            gamma: None,
            output_scale: 1.0,
        })
    }

    /// Normalized variant: `τ = cΓ`, output multiplied by `√Γ`.
    pub fn normalized(l: &Laplacian, m: &MassMatrix, c: f64) -> Result<Self> {
        Screening::Normalized(c).validate()?;
        let gamma = normalization_gamma(l, m)?;
        let mut s = Self::new(l, m, c * gamma)?;
        s.gamma = Some(gamma);
        s.output_scale = gamma.sqrt();
        Ok(s)
    }

    /// Ablation without screening: `τ = 1e-8 Γ`, just enough to keep the
    /// operator definite.
    pub fn unscreened(l: &Laplacian, m: &MassMatrix) -> Result<Self> {
        let gamma = normalization_gamma(l, m)?;
        let mut s = Self::new(l, m, NO_SCREENING_RATIO * gamma)?;
        s.gamma = Some(gamma);
        Ok(s)
    }

    pub fn from_mesh(mesh: &TriMesh, screening: Screening) -> Result<Self> {
        let l = cotan_laplacian(mesh)?;
        let m = lumped_mass(mesh)?;
        match screening.validate()? {
            Screening::Tau(tau) => Self::new(&l, &m, tau),
            Screening::Normalized(c) => Self::normalized(&l, &m, c),
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Γ, if it was computed.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<VertexField> {
        let normals = rng.normals(self.mass.dim());
        self.sample_from_normals(&normals)
    }

    pub fn sample_from_normals(&self, normals: &[f64]) -> Result<VertexField> {
        let f = sample_matern_from_normals(&self.factor, &self.mass, normals)?;
        if self.output_scale == 1.0 {
            return Ok(f);
        }
        Ok(VertexField::from_raw(f.iter().map(|v| v * self.output_scale).collect()))
    }
}

/// Any of the five noise models, with its per-mesh precomputation done.
#[derive(Debug)]
pub enum Sampler {
    Naive { n: usize },
    White { mass: MassMatrix },
    Matern(MaternSampler),
    Explicit { spectrum: Spectrum, tau: f64 },
}

/// What to build a [`Sampler`] from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplerSpec {
    pub model: NoiseModel,
    pub screening: Screening,
    /// Replaces the screening with the `τ = 1e-8 Γ` ablation (Matérn only).
    pub no_screening: bool,
    /// Modes for the explicit sampler; all vertices when `None`.
    pub explicit_modes: Option<usize>,
}

impl SamplerSpec {
    pub fn new(model: NoiseModel, screening: Screening) -> Self {
        Self {
            model,
            screening,
            no_screening: false,
            explicit_modes: None,
        }
    }
}

impl Sampler {
    pub fn build(mesh: &TriMesh, spec: &SamplerSpec) -> Result<Self> {
        let screening = spec.screening.validate()?;
        let wrong = |what: &str| {
            Err(Error::InvalidInput(format!(
                "model '{}' needs {what}",
                spec.model.name()
            )))
        };
        match spec.model {
            NoiseModel::Naive => Ok(Sampler::Naive { n: mesh.vertex_count() }),
            NoiseModel::White => Ok(Sampler::White {
                mass: lumped_mass(mesh)?,
            }),
            NoiseModel::Matern | NoiseModel::MaternNormalized => {
                let l = cotan_laplacian(mesh)?;
                let m = lumped_mass(mesh)?;
                if spec.no_screening {
                    if spec.model != NoiseModel::Matern {
                        return wrong("screening");
                    }
                    return MaternSampler::unscreened(&l, &m).map(Sampler::Matern);
                }
                match (spec.model, screening) {
                    (NoiseModel::Matern, Screening::Tau(tau)) => MaternSampler::new(&l, &m, tau),
                    (NoiseModel::MaternNormalized, Screening::Normalized(c)) => MaternSampler::normalized(&l, &m, c),
                    (NoiseModel::Matern, _) => return wrong("a fixed tau"),
                    _ => return wrong("a normalization constant c"),
                }
                .map(Sampler::Matern)
            }
            NoiseModel::Explicit => {
                let Screening::Tau(tau) = screening else {
                    return wrong("a fixed tau");
                };
                let l = cotan_laplacian(mesh)?;
                let m = lumped_mass(mesh)?;
                let k = spec.explicit_modes.unwrap_or(mesh.vertex_count());
                let spectrum = generalized_eigs(&l, &m, k)?;
                Ok(Sampler::Explicit { spectrum, tau })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Sampler::Naive { n } => *n,
            Sampler::White { mass } => mass.dim(),
            Sampler::Matern(s) => s.mass().dim(),
            Sampler::Explicit { spectrum, .. } => spectrum.dim(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<VertexField> {
        match self {
            Sampler::Naive { n } => Ok(sample_naive(*n, rng)),
            Sampler::White { mass } => Ok(sample_white(mass, rng)),
            Sampler::Matern(s) => s.sample(rng),
            Sampler::Explicit { spectrum, tau } => sample_explicit(spectrum, *tau, spectrum.len(), rng),
        }
    }

    /// `count` samples in parallel; sample `i` uses stream `first + i`.
    pub fn sample_batch(&self, seed: u64, first: u64, count: usize) -> Result<Vec<VertexField>> {
        par_samples(count, |i| self.sample(&mut RngStream::new(seed, first + i as u64)))
    }

    /// Independent scalar channels of one vector-valued sample.
    pub fn sample_channels(&self, seed: u64, sample: u64, channels: usize) -> Result<Vec<VertexField>> {
        (0..channels as u64)
            .map(|c| self.sample(&mut RngStream::for_channel(seed, sample, c)))
            .collect()
    }
}

/// Runs `draw(i)` for `i in 0..count` on the rayon pool and returns the
/// results in index order.
pub fn par_samples<T, F>(count: usize, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(draw).collect()
}
