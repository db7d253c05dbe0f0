use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::MassMatrix;
use crate::linalg::Spectrum;
use crate::noise::{par_samples, Sampler};
use crate::rng::RngStream;
use crate::spectral::Projector;

/// Fewest samples any statistic is computed from.
pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_BINS: usize = 64;
/// Histogram half-width in empirical standard deviations.
pub const HISTOGRAM_SIGMAS: f64 = 4.0;

const CHUNK: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// `bins` equal bins over `center ± half_width`; values outside the range
    /// are counted in the end bins.
    pub fn build(values: &[f64], center: f64, half_width: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let half_width = if half_width > 0.0 { half_width } else { 1.0 };
        let lo = center - half_width;
        let width = 2.0 * half_width / bins as f64;
        let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v - lo) / width).floor();
            let b = if b.is_nan() {
                0
            } else {
                b.clamp(0.0, (bins - 1) as f64) as usize
            };
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Moments of one spectral coefficient; `index` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeRecord {
    pub index: usize,
    pub eigenvalue: f64,
    pub sample_count: usize,
    pub empirical_mean: f64,
    /// Unbiased (N - 1) estimate.
    pub empirical_variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

impl ModeRecord {
    pub fn sigma(&self) -> f64 {
        self.empirical_variance.sqrt()
    }
}

/// Per-mode statistics of one sampler on one mesh, plus the whole-field
/// energy moments needed for tail sums beyond the tracked modes.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralStats {
    pub sample_count: usize,
    pub vertex_count: usize,
    pub area: f64,
    /// Modes `1..=records.len()`.
    pub records: Vec<ModeRecord>,
    /// Sample mean of `‖f‖²_M`.
    pub mean_energy: f64,
    /// `‖mean f‖²_M`.
    pub mean_field_energy: f64,
    /// Pearson correlations among the first `correlation.len()` modes.
    #[serde(skip)]
    pub correlation: Vec<Vec<f64>>,
}

impl SpectralStats {
    pub fn record(&self, index: usize) -> Option<&ModeRecord> {
        index.checked_sub(1).and_then(|i| self.records.get(i))
    }

    /// Unbiased variance sum over modes `k..=n` (1-based), from the energy
    /// identity `Σ_i Var f̂_i = E‖f‖²_M - ‖E f‖²_M` minus the tracked head.
    pub fn tail_variance(&self, k: usize) -> Result<f64> {
        let n = self.vertex_count;
        if k == 0 || k > n + 1 {
            return Err(Error::OutOfRange {
                what: "tail start",
                index: k,
                valid: format!("1..={}", n + 1),
            });
        }
        if k == n + 1 {
            return Ok(0.0);
        }
        if k - 1 > self.records.len() {
            return Err(Error::OutOfRange {
                what: "tail start",
                index: k,
                valid: format!("1..={} (modes tracked: {})", self.records.len() + 1, self.records.len()),
            });
        }
        let samples = self.sample_count as f64;
        let biased = (samples - 1.0) / samples;
        let total = self.mean_energy - self.mean_field_energy;
        let head: f64 = self.records[..k - 1]
            .iter()
            .map(|r| r.empirical_variance * biased)
            .sum();
        Ok(((total - head) / biased).max(0.0))
    }

    /// `index,bin_left,bin_right,count` rows for every histogram.
    pub fn write_histograms_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,bin_left,bin_right,count")?;
        for r in &self.records {
            if let Some(h) = &r.histogram {
                for (b, c) in h.counts.iter().enumerate() {
                    writeln!(out, "{},{},{},{}", r.index, h.edges[b], h.edges[b + 1], c)?;
                }
            }
        }
        Ok(())
    }

    /// `index,eigenvalue,empirical_mean,empirical_variance` rows.
    pub fn write_variances_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue,empirical_mean,empirical_variance")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.index, r.eigenvalue, r.empirical_mean, r.empirical_variance
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsOptions {
    /// Track modes `1..=modes`.
    pub modes: usize,
    /// Size of the leading block whose correlations are kept.
    pub correlation_block: usize,
    /// 1-based modes that get histograms.
    pub histogram_indices: Vec<usize>,
    pub bins: usize,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            modes: 30,
            correlation_block: 30,
            histogram_indices: vec![2, 10, 30],
            bins: DEFAULT_BINS,
        }
    }
}

/// Draws `samples` fields (sample `i` on stream `first_stream + i`),
/// projects each onto the leading modes and accumulates moments. The
/// reduction is sequential in sample order, so the result does not depend
/// on thread scheduling.
pub fn empirical_spectral_stats(
    sampler: &Sampler,
    spectrum: &Spectrum,
    mass: &MassMatrix,
    samples: usize,
    seed: u64,
    first_stream: u64,
    opts: &StatsOptions,
) -> Result<SpectralStats> {
    let coeffs = collect(sampler, spectrum, mass, samples, seed, first_stream, opts.modes)?;
    stats_from_coeffs(spectrum, mass, coeffs, opts)
}

/// Projected coefficients of each sample plus energy moments.
pub(crate) struct CoeffSamples {
    pub(crate) coeffs: Vec<Vec<f64>>,
    pub(crate) mean_energy: f64,
    pub(crate) mean_field_energy: f64,
}

fn collect(
    sampler: &Sampler,
    spectrum: &Spectrum,
    mass: &MassMatrix,
    samples: usize,
    seed: u64,
    first_stream: u64,
    modes: usize,
) -> Result<CoeffSamples> {
    if samples < MIN_SAMPLES {
        return Err(Error::Insufficient(format!(
            "{samples} samples requested, at least {MIN_SAMPLES} are needed"
        )));
    }
    if sampler.dim() != mass.dim() {
        return Err(Error::LengthMismatch {
            what: "sampler",
            expected: mass.dim(),
            found: sampler.dim(),
        });
    }
    let proj = Projector::new(spectrum, mass, modes)?;
    let n = mass.dim();
    let mut coeffs = Vec::with_capacity(samples);
    let mut energy = 0.0;
    let mut field_sum = vec![0.0; n];
    let mut start = 0;
    while start < samples {
        let len = CHUNK.min(samples - start);
        let chunk = par_samples(len, |i| {
            let stream = first_stream + (start + i) as u64;
            let f = sampler.sample(&mut RngStream::new(seed, stream))?;
            let e: f64 = f.iter().zip(mass.diag()).map(|(v, w)| v * v * w).sum();
            Ok((proj.project(&f), e, f))
        })?;
        for (c, e, f) in chunk {
            coeffs.push(c);
            energy += e;
            field_sum.iter_mut().zip(f.iter()).for_each(|(s, v)| *s += v);
        }
        start += len;
    }
    let inv = 1.0 / samples as f64;
    let mean_field_energy = field_sum
        .iter()
        .zip(mass.diag())
        .map(|(s, w)| (s * inv) * (s * inv) * w)
        .sum();
    Ok(CoeffSamples {
        coeffs,
        mean_energy: energy * inv,
        mean_field_energy,
    })
}

pub(crate) fn stats_from_coeffs(
    spectrum: &Spectrum,
    mass: &MassMatrix,
    samples: CoeffSamples,
    opts: &StatsOptions,
) -> Result<SpectralStats> {
    let count = samples.coeffs.len();
    let modes = samples.coeffs.first().map_or(0, Vec::len);
    for &i in &opts.histogram_indices {
        if i == 0 || i > modes {
            return Err(Error::OutOfRange {
                what: "histogram index",
                index: i,
                valid: format!("1..={modes}"),
            });
        }
    }
    let (means, vars) = moments(&samples.coeffs)?;
    let records = (0..modes)
        .map(|j| {
            let histogram = opts.histogram_indices.contains(&(j + 1)).then(|| {
                let column: Vec<f64> = samples.coeffs.iter().map(|c| c[j]).collect();
                Histogram::build(&column, means[j], HISTOGRAM_SIGMAS * vars[j].sqrt(), opts.bins)
            });
            ModeRecord {
                index: j + 1,
                eigenvalue: spectrum.eigenvalues()[j],
                sample_count: count,
                empirical_mean: means[j],
                empirical_variance: vars[j],
                histogram,
            }
        })
        .collect();
    let correlation = correlation_matrix(&samples.coeffs, opts.correlation_block.min(modes))?;
    Ok(SpectralStats {
        sample_count: count,
        vertex_count: mass.dim(),
        area: mass.total(),
        records,
        mean_energy: samples.mean_energy,
        mean_field_energy: samples.mean_field_energy,
        correlation,
    })
}

fn moments(coeffs: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let count = coeffs.len();
    if count < MIN_SAMPLES {
        return Err(Error::Insufficient(format!(
            "{count} samples, at least {MIN_SAMPLES} are needed"
        )));
    }
    let modes = coeffs[0].len();
    let mut means = vec![0.0; modes];
    for c in coeffs {
        means.iter_mut().zip(c).for_each(|(m, v)| *m += v);
    }
    means.iter_mut().for_each(|m| *m /= count as f64);
    let mut vars = vec![0.0; modes];
    for c in coeffs {
        for ((s, v), m) in vars.iter_mut().zip(c).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    vars.iter_mut().for_each(|s| *s /= (count - 1) as f64);
    Ok((means, vars))
}

/// Pearson correlations among the first `block` coefficients.
pub fn correlation_matrix(coeffs: &[Vec<f64>], block: usize) -> Result<Vec<Vec<f64>>> {
    let (means, vars) = moments(coeffs)?;
    if block > means.len() {
        return Err(Error::OutOfRange {
            what: "correlation block",
            index: block,
            valid: format!("0..={}", means.len()),
        });
    }
    let mut cov = vec![vec![0.0; block]; block];
    for c in coeffs {
        for a in 0..block {
            let da = c[a] - means[a];
            for b in a..block {
                cov[a][b] += da * (c[b] - means[b]);
            }
        }
    }
    let denom = (coeffs.len() - 1) as f64;
    let mut corr = vec![vec![0.0; block]; block];
    for a in 0..block {
        for b in a..block {
            let sd = (vars[a] * vars[b]).sqrt();
            let r = if sd > 0.0 { cov[a][b] / denom / sd } else { 0.0 };
            corr[a][b] = r;
            corr[b][a] = r;
        }
    }
    Ok(corr)
}
