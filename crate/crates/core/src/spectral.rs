//! Spectral coefficients, reconstruction and the Matérn spectral law.
//!
//! Modes are numbered from 1 in every user-facing place (reports, CSV, CLI
//! flags): mode 1 is the constant mode with eigenvalue 0. Slices and
//! [`Spectrum::vector`] use zero-based positions, so mode `i` lives at
//! position `i - 1`.

use std::io::Write;
use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::MassMatrix;
use crate::linalg::Spectrum;

/// A scalar per vertex, all entries finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct VertexField(Vec<f64>);

impl VertexField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("vertex field", &values)?;
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Skips the finiteness check for values produced by this crate's own
    /// arithmetic on finite inputs.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.0.iter_mut().for_each(|v| *v *= factor);
        self
    }
}

impl Deref for VertexField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Coefficients `f̂` aligned with the leading modes of a [`Spectrum`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SpectralCoeffs(Vec<f64>);

impl SpectralCoeffs {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("spectral coefficients", &values)?;
        Ok(Self(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for SpectralCoeffs {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("{what}: entry {i} is not finite"))),
        None => Ok(()),
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, found })
    }
}

/// `fᵀ M g` with the lumped (diagonal) mass.
pub fn inner_product_m(f: &[f64], g: &[f64], m: &MassMatrix) -> Result<f64> {
    check_len("first field", m.dim(), f.len())?;
    check_len("second field", m.dim(), g.len())?;
    Ok(f.iter().zip(g).zip(m.diag()).map(|((a, b), w)| a * w * b).sum())
}

/// `f̂_i = fᵀ M φ_i` for every mode in `spectrum`.
pub fn spectral_coeffs(f: &[f64], spectrum: &Spectrum, m: &MassMatrix) -> Result<SpectralCoeffs> {
    check_len("mass matrix", spectrum.dim(), m.dim())?;
    check_len("vertex field", spectrum.dim(), f.len())?;
    let weighted: Vec<f64> = f.iter().zip(m.diag()).map(|(a, w)| a * w).collect();
    Ok(SpectralCoeffs::from_raw(
        spectrum.vectors().map(|phi| dot(&weighted, phi)).collect(),
    ))
}

/// `Σ f̂_i φ_i` over the leading `coeffs.len()` modes.
pub fn reconstruct(coeffs: &[f64], spectrum: &Spectrum) -> Result<VertexField> {
    if coeffs.len() > spectrum.len() {
        return Err(Error::LengthMismatch {
            what: "spectral coefficients",
            expected: spectrum.len(),
            found: coeffs.len(),
        });
    }
    let mut out = vec![0.0; spectrum.dim()];
    for (c, phi) in coeffs.iter().zip(spectrum.vectors()) {
        for (o, p) in out.iter_mut().zip(phi) {
            *o += c * p;
        }
    }
    VertexField::new(out)
}

/// Precomputed `M φ_i` for fast repeated projection onto the leading modes.
#[derive(Clone, Debug)]
pub struct Projector {
    n: usize,
    weighted: Vec<f64>,
}

impl Projector {
    pub fn new(spectrum: &Spectrum, m: &MassMatrix, modes: usize) -> Result<Self> {
        check_len("mass matrix", spectrum.dim(), m.dim())?;
        if modes > spectrum.len() {
            return Err(Error::OutOfRange {
                what: "mode count",
                index: modes,
                valid: format!("0..={}", spectrum.len()),
            });
        }
        let weighted = spectrum
            .vectors()
            .take(modes)
            .flat_map(|phi| phi.iter().zip(m.diag()).map(|(p, w)| p * w))
            .collect();
        Ok(Self {
            n: spectrum.dim(),
            weighted,
        })
    }

    pub fn modes(&self) -> usize {
        self.weighted.len() / self.n.max(1)
    }

    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n, "field length does not match projector");
        self.weighted.chunks_exact(self.n).map(|w| dot(w, f)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Variance of the Matérn spectral coefficient at eigenvalue `lambda`.
pub fn theoretical_variance(lambda: f64, tau: f64) -> f64 {
    (lambda + tau).powi(-2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeylTail {
    /// `Σ_{i≥k} 1/(λ_i + τ)²` over the available spectrum.
    pub tail: f64,
    /// `Σ_{i≥k} A²/i²` over the same index range.
    pub analytic_bound: f64,
}

/// Tail variance of the Matérn law from mode `k` (1-based) to the end of
/// `eigenvalues`. `k = len + 1` is the empty tail and gives zeros.
pub fn weyl_tail(eigenvalues: &[f64], k: usize, tau: f64, area: f64) -> Result<WeylTail> {
    let len = eigenvalues.len();
    if k == 0 || k > len + 1 {
        return Err(Error::OutOfRange {
            what: "tail start",
            index: k,
            valid: format!("1..={}", len + 1),
        });
    }
    let mut tail = 0.0;
    let mut analytic_bound = 0.0;
    // smallest terms first
    for i in (k..=len).rev() {
        tail += theoretical_variance(eigenvalues[i - 1], tau);
        analytic_bound += area * area / (i * i) as f64;
    }
    Ok(WeylTail { tail, analytic_bound })
}

/// `Σ_{i≥k}^∞ 1/((4π/A)(i-1) + τ)²`, the tail variance predicted by Weyl's
/// law for a surface of area `A`. The first 10⁵ terms are summed directly and
/// the remainder is closed with a midpoint-corrected integral.
pub fn weyl_predicted_tail(k: usize, tau: f64, area: f64) -> f64 {
    let slope = 4.0 * std::f64::consts::PI / area;
    let start = k.max(1);
    let end = start + 100_000;
    let head: f64 = (start..end)
        .rev()
        .map(|i| (slope * (i - 1) as f64 + tau).powi(-2))
        .sum();
    // ∫_{end-1/2}^{∞} (slope·(x-1) + τ)^{-2} dx
    head + 1.0 / (slope * (slope * (end as f64 - 1.5) + tau))
}

/// Least-squares slope of `λ_j` against `j` for 1-based `j` in
/// `from..=to`.
pub fn weyl_slope(eigenvalues: &[f64], from: usize, to: usize) -> Result<f64> {
    if from == 0 || to <= from || to > eigenvalues.len() {
        return Err(Error::OutOfRange {
            what: "slope range end",
            index: to,
            valid: format!("from >= 1, from < to <= {}", eigenvalues.len()),
        });
    }
    let js: Vec<f64> = (from..=to).map(|j| j as f64).collect();
    let ls = &eigenvalues[from - 1..to];
    let n = js.len() as f64;
    let jm = js.iter().sum::<f64>() / n;
    let lm = ls.iter().sum::<f64>() / n;
    let sxy: f64 = js.iter().zip(ls).map(|(j, l)| (j - jm) * (l - lm)).sum();
    let sxx: f64 = js.iter().map(|j| (j - jm).powi(2)).sum();
    Ok(sxy / sxx)
}

/// `index,eigenvalue,coefficient` rows, index 1-based.
pub fn write_coeffs_csv<W: Write>(spectrum: &Spectrum, coeffs: &[f64], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "index,eigenvalue,coefficient")?;
    for (i, (l, c)) in spectrum.eigenvalues().iter().zip(coeffs).enumerate() {
        writeln!(out, "{},{},{}", i + 1, l, c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{cotan_laplacian, lumped_mass};
    use crate::linalg::generalized_eigs;
    use crate::mesh::{icosphere, TriMesh};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    struct Fixture {
        m: MassMatrix,
        spectrum: Spectrum,
    }

    fn full(mesh: &TriMesh) -> Fixture {
        let l = cotan_laplacian(mesh).unwrap();
        let m = lumped_mass(mesh).unwrap();
        let spectrum = generalized_eigs(&l, &m, mesh.vertex_count()).unwrap();
        Fixture { m, spectrum }
    }

    fn level2() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| full(&icosphere(2)))
    }

    fn random_field(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn inner_product_examples() {
        let fx = level2();
        let n = fx.m.dim();
        let ones = vec![1.0; n];
        let area = inner_product_m(&ones, &ones, &fx.m).unwrap();
        assert!((area - fx.m.total()).abs() < 1e-12);
        let ortho = inner_product_m(fx.spectrum.vector(0), fx.spectrum.vector(1), &fx.m).unwrap();
        assert!(ortho.abs() < 1e-8);

        let (f, g) = (random_field(n, 1), random_field(n, 2));
        let mut naive = 0.0;
        for i in 0..n {
            naive += fx.m.diag()[i] * f[i] * g[i];
        }
        assert!((inner_product_m(&f, &g, &fx.m).unwrap() - naive).abs() < 1e-14);
        assert!(matches!(
            inner_product_m(&f[1..], &g, &fx.m),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn coeffs_of_eigenvector_and_constant() {
        let fx = level2();
        let j = 7;
        let c = spectral_coeffs(fx.spectrum.vector(j), &fx.spectrum, &fx.m).unwrap();
        for (i, v) in c.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-8);
        }
        let c = spectral_coeffs(&vec![2.5; fx.m.dim()], &fx.spectrum, &fx.m).unwrap();
        assert!((c[0] - 2.5 * fx.m.total().sqrt()).abs() < 1e-8);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn reconstruct_examples() {
        let fx = level2();
        let mut e = vec![0.0; 5];
        e[3] = 1.0;
        assert_eq!(reconstruct(&e, &fx.spectrum).unwrap().as_slice(), fx.spectrum.vector(3));
        let zero = reconstruct(&[0.0; 4], &fx.spectrum).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        assert!(reconstruct(&vec![0.0; fx.spectrum.len() + 1], &fx.spectrum).is_err());
    }

    #[test]
    fn truncated_residual_matches_dropped_energy() {
        let fx = level2();
        let f = random_field(fx.m.dim(), 3);
        let c = spectral_coeffs(&f, &fx.spectrum, &fx.m).unwrap();
        let k = 40;
        let approx = reconstruct(&c[..k], &fx.spectrum).unwrap();
        let resid: Vec<f64> = f.iter().zip(approx.iter()).map(|(a, b)| a - b).collect();
        let energy = inner_product_m(&resid, &resid, &fx.m).unwrap();
        let dropped: f64 = c[k..].iter().map(|v| v * v).sum();
        assert!((energy - dropped).abs() < 1e-8);
    }

    #[test]
    fn projector_matches_direct_projection() {
        let fx = level2();
        let f = random_field(fx.m.dim(), 4);
        let p = Projector::new(&fx.spectrum, &fx.m, 20).unwrap();
        let direct = spectral_coeffs(&f, &fx.spectrum, &fx.m).unwrap();
        for (a, b) in p.project(&f).iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(p.modes(), 20);
    }

    #[test]
    fn variance_law_examples() {
        assert!((theoretical_variance(0.0, 100.0) - 1e-4).abs() < 1e-18);
        assert!((theoretical_variance(100.0, 100.0) - 2.5e-5).abs() < 1e-18);
        assert!(theoretical_variance(1e12, 100.0) < 1e-23);
    }

    #[test]
    fn weyl_tail_examples() {
        let t = weyl_tail(&[0.0], 1, 100.0, 1.0).unwrap();
        assert!((t.tail - 1e-4).abs() < 1e-18);
        let eigs = [0.0, 1.0, 2.0];
        assert_eq!(weyl_tail(&eigs, 4, 100.0, 1.0).unwrap().tail, 0.0);
        assert!(weyl_tail(&eigs, 0, 100.0, 1.0).is_err());
        assert!(weyl_tail(&eigs, 5, 100.0, 1.0).is_err());

        let fx = level2();
        let area = fx.m.total();
        let t = weyl_tail(fx.spectrum.eigenvalues(), 50, 100.0, area).unwrap();
        assert!(t.tail <= t.analytic_bound);
    }

    #[test]
    fn weyl_prediction_brackets_direct_sum() {
        // direct partial sum of the same series, long enough to converge
        let (k, tau, area) = (30, 100.0, 4.0 * std::f64::consts::PI);
        let direct: f64 = (k..20_000_000).rev().map(|i| (((i - 1) as f64) + tau).powi(-2)).sum();
        let rest = 1.0 / (20_000_000.0 - 1.0 + tau);
        let predicted = weyl_predicted_tail(k, tau, area);
        assert!((predicted - direct - rest).abs() / predicted < 1e-7);
    }

    #[test]
    fn weyl_slope_on_sphere() {
        let fx = full(&icosphere(3));
        let slope = weyl_slope(fx.spectrum.eigenvalues(), 20, 100).unwrap();
        let expect = 4.0 * std::f64::consts::PI / fx.m.total();
        assert!((slope - expect).abs() / expect < 0.25, "{slope} vs {expect}");
        assert!((weyl_slope(&[0.0, 2.0, 4.0, 6.0], 1, 4).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn coeffs_csv() {
        let fx = level2();
        let mut buf = Vec::new();
        write_coeffs_csv(&fx.spectrum.truncated(2), &[1.5, -2.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,eigenvalue,coefficient");
        assert!(lines[2].starts_with("2,") && lines[2].ends_with(",-2"));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(VertexField::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralCoeffs::new(vec![f64::INFINITY]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn parseval_and_round_trip(seed in any::<u64>()) {
            let fx = level2();
            let f = random_field(fx.m.dim(), seed);
            let c = spectral_coeffs(&f, &fx.spectrum, &fx.m).unwrap();
            let energy = inner_product_m(&f, &f, &fx.m).unwrap();
            let sum: f64 = c.iter().map(|v| v * v).sum();
            prop_assert!((energy - sum).abs() <= 1e-7 * energy);
            let back = reconstruct(&c, &fx.spectrum).unwrap();
            let err = back.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm = f.iter().map(|b| b * b).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-7 * norm);
        }

        #[test]
        fn variance_strictly_decreasing(l in 0.0f64..1e6, dl in 1e-3f64..1e3, tau in 1e-3f64..1e4, dt in 1e-3f64..1e3) {
            prop_assert!(theoretical_variance(l + dl, tau) < theoretical_variance(l, tau));
            prop_assert!(theoretical_variance(l, tau + dt) < theoretical_variance(l, tau));
        }

        #[test]
        fn tail_non_increasing_in_k(mut eigs in proptest::collection::vec(0.0f64..1e4, 1..60), tau in 1e-2f64..1e3) {
            eigs.sort_by(f64::total_cmp);
            let tails: Vec<f64> = (1..=eigs.len() + 1)
                .map(|k| weyl_tail(&eigs, k, tau, 1.0).unwrap().tail)
                .collect();
            prop_assert!(tails.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
