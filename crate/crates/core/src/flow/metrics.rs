//! Set distances between generated and reference samples.
//!
//! A sample is one field per vertex, or several channels stacked one after
//! another. The distance is the mass-weighted l2 norm normalized by the total
//! mass, `d(f, g) = sqrt(Σ_i M_ii (f_i - g_i)² / Σ_i M_ii)`, summed over
//! channels inside the root.

use crate::error::{Error, Result};
use crate::fem::MassMatrix;

fn check_len(len: usize, m: &MassMatrix) -> Result<()> {
    if len == 0 || !len.is_multiple_of(m.dim()) {
        return Err(Error::LengthMismatch {
            what: "sample",
            expected: m.dim(),
            found: len,
        });
    }
    Ok(())
}

pub fn mass_distance(f: &[f64], g: &[f64], m: &MassMatrix) -> Result<f64> {
    check_len(f.len(), m)?;
    if f.len() != g.len() {
        return Err(Error::LengthMismatch {
            what: "sample",
            expected: f.len(),
            found: g.len(),
        });
    }
    let w = m.diag();
    let sum: f64 = f
        .iter()
        .zip(g)
        .enumerate()
        .map(|(i, (a, b))| w[i % w.len()] * (a - b) * (a - b))
        .sum();
    Ok((sum / m.total()).sqrt())
}

/// Index and distance of the closest reference; ties go to the lowest index.
pub fn nearest_reference<T: AsRef<[f64]>>(sample: &[f64], reference: &[T], m: &MassMatrix) -> Result<(usize, f64)> {
    let mut best = None::<(usize, f64)>;
    for (j, r) in reference.iter().enumerate() {
        let d = mass_distance(sample, r.as_ref(), m)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best.ok_or_else(|| Error::Insufficient("reference set is empty".into()))
}

fn nonempty<T>(set: &[T], what: &str) -> Result<()> {
    if set.is_empty() {
        Err(Error::Insufficient(format!("{what} set is empty")))
    } else {
        Ok(())
    }
}

/// Minimum matching distance: mean over generated samples of the distance to
/// the nearest reference sample.
pub fn mmd<G: AsRef<[f64]>, R: AsRef<[f64]>>(generated: &[G], reference: &[R], m: &MassMatrix) -> Result<f64> {
    nonempty(generated, "generated")?;
    nonempty(reference, "reference")?;
    let mut total = 0.0;
    for g in generated {
        total += nearest_reference(g.as_ref(), reference, m)?.1;
    }
    Ok(total / generated.len() as f64)
}

/// Coverage: fraction of reference samples that are the nearest reference of
/// at least one generated sample.
pub fn cov<G: AsRef<[f64]>, R: AsRef<[f64]>>(generated: &[G], reference: &[R], m: &MassMatrix) -> Result<f64> {
    nonempty(generated, "generated")?;
    nonempty(reference, "reference")?;
    let mut hit = vec![false; reference.len()];
    for g in generated {
        hit[nearest_reference(g.as_ref(), reference, m)?.0] = true;
    }
    Ok(hit.iter().filter(|&&h| h).count() as f64 / reference.len() as f64)
}
