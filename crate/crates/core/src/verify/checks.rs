use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{weyl_predicted_tail, weyl_tail};

use super::stats::{SpectralStats, MIN_SAMPLES};

pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.03;
pub const MAX_CORRELATION_BLOCK: usize = 30;
pub const DEFAULT_MATCH_TOL: f64 = 0.05;
/// Monte-Carlo slack in standard errors.
pub const SLACK_SIGMAS: f64 = 3.0;
pub const DEFAULT_TAIL_K: usize = 30;
/// Default ε as a multiple of the Weyl-predicted tail.
pub const EPSILON_FACTOR: f64 = 2.0;
/// Eigenvalues below this are treated as equal when matching.
const MATCH_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Property1Result {
    pub mesh: String,
    pub block: usize,
    pub sample_count: usize,
    pub max_abs_correlation: f64,
    /// 1-based modes attaining the maximum.
    pub worst_pair: [usize; 2],
    pub threshold: f64,
    pub pass: bool,
}

/// Largest off-diagonal `|corr(f̂_i, f̂_j)|` over the stored block.
pub fn check_property1(mesh: &str, stats: &SpectralStats, threshold: f64) -> Result<Property1Result> {
    if stats.sample_count < MIN_SAMPLES {
        return Err(Error::Insufficient(format!(
            "{} samples, at least {MIN_SAMPLES} are needed",
            stats.sample_count
        )));
    }
    let block = stats.correlation.len();
    if !(2..=MAX_CORRELATION_BLOCK).contains(&block) {
        return Err(Error::OutOfRange {
            what: "correlation block",
            index: block,
            valid: format!("2..={MAX_CORRELATION_BLOCK}"),
        });
    }
    let mut max = 0.0;
    let mut worst = [1, 2];
    for a in 0..block {
        for b in a + 1..block {
            let r = stats.correlation[a][b].abs();
            if r > max {
                max = r;
                worst = [a + 1, b + 1];
            }
        }
    }
    Ok(Property1Result {
        mesh: mesh.to_string(),
        block,
        sample_count: stats.sample_count,
        max_abs_correlation: max,
        worst_pair: worst,
        threshold,
        pass: max <= threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchedPair {
    pub index_a: usize,
    pub index_b: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// `|σ_A - σ_B|`, the 2-Wasserstein distance of the fitted Gaussians.
    pub w2: f64,
    pub w2_squared: f64,
    /// `|λ_A - λ_B| / τ²`.
    pub bound: f64,
    pub bound_squared: f64,
    /// Three standard errors of `σ_A - σ_B`.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Property2Report {
    pub mesh_a: String,
    pub mesh_b: String,
    pub tau: f64,
    pub match_tol: f64,
    pub requested_pairs: usize,
    pub pairs: Vec<MatchedPair>,
    pub failed_pairs: usize,
    pub pass: bool,
}

/// Standard error of a sample standard deviation, from the χ² standard
/// error `Var·√(2/(N-1))` of the variance.
fn sigma_standard_error(sigma: f64, samples: usize) -> f64 {
    sigma / (2.0 * (samples as f64 - 1.0)).sqrt()
}

/// Greedy value-based matching: each tracked mode of A, in ascending order,
/// takes the closest unused mode of B within `match_tol · max(λ_A, λ_B)`.
/// Stops after `pairs` matches.
pub fn match_modes(lambda_a: &[f64], lambda_b: &[f64], match_tol: f64, pairs: usize) -> Vec<(usize, usize)> {
    let mut used = vec![false; lambda_b.len()];
    let mut out = Vec::with_capacity(pairs);
    for (i, &la) in lambda_a.iter().enumerate() {
        if out.len() == pairs {
            break;
        }
        let best = lambda_b
            .iter()
            .enumerate()
            .filter(|&(j, &lb)| !used[j] && (la - lb).abs() <= match_tol * la.max(lb) + MATCH_FLOOR)
            .min_by(|x, y| (la - x.1).abs().total_cmp(&(la - y.1).abs()));
        if let Some((j, _)) = best {
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

pub fn check_property2(
    (name_a, stats_a): (&str, &SpectralStats),
    (name_b, stats_b): (&str, &SpectralStats),
    tau: f64,
    match_tol: f64,
    pairs: usize,
) -> Result<Property2Report> {
    if !(tau > 0.0) {
        return Err(Error::NonPositive {
            name: "tau",
            value: tau,
        });
    }
    let la: Vec<f64> = stats_a.records.iter().map(|r| r.eigenvalue).collect();
    let lb: Vec<f64> = stats_b.records.iter().map(|r| r.eigenvalue).collect();
    let matched = match_modes(&la, &lb, match_tol, pairs);
    if matched.is_empty() {
        return Err(Error::Insufficient(
            "no eigenvalues could be matched between the meshes".into(),
        ));
    }
    let tau4 = tau.powi(4);
    let pairs_out: Vec<MatchedPair> = matched
        .into_iter()
        .map(|(i, j)| {
            let (ra, rb) = (&stats_a.records[i], &stats_b.records[j]);
            let (sa, sb) = (ra.sigma(), rb.sigma());
            let w2 = (sa - sb).abs();
            let dl = (ra.eigenvalue - rb.eigenvalue).abs();
            let bound = dl / (tau * tau);
            let slack = SLACK_SIGMAS
                * sigma_standard_error(sa, ra.sample_count).hypot(sigma_standard_error(sb, rb.sample_count));
            MatchedPair {
                index_a: ra.index,
                index_b: rb.index,
                lambda_a: ra.eigenvalue,
                lambda_b: rb.eigenvalue,
                sigma_a: sa,
                sigma_b: sb,
                w2,
                w2_squared: w2 * w2,
                bound,
                bound_squared: dl * dl / tau4,
                slack,
                pass: w2 <= bound + slack,
            }
        })
        .collect();
    let failed = pairs_out.iter().filter(|p| !p.pass).count();
    Ok(Property2Report {
        mesh_a: name_a.to_string(),
        mesh_b: name_b.to_string(),
        tau,
        match_tol,
        requested_pairs: pairs,
        pairs: pairs_out,
        failed_pairs: failed,
        pass: failed == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Property3Result {
    pub mesh: String,
    /// 1-based first mode of the tail.
    pub k: usize,
    pub tail_variance: f64,
    pub threshold: f64,
    /// `Σ_{i≥k} 1/(λ_i + τ)²` over the mesh spectrum, when the sampler
    /// follows the Matérn law.
    pub theoretical_tail: Option<f64>,
    pub pass: bool,
}

/// Spectral data behind the theoretical tail.
pub struct TailTheory<'a> {
    pub eigenvalues: &'a [f64],
    pub tau: f64,
}

pub fn check_property3(
    mesh: &str,
    stats: &SpectralStats,
    k: usize,
    epsilon: f64,
    theory: Option<TailTheory<'_>>,
) -> Result<Property3Result> {
    let tail_variance = stats.tail_variance(k)?;
    let theoretical_tail = theory
        .map(|t| weyl_tail(t.eigenvalues, k, t.tau, stats.area).map(|w| w.tail))
        .transpose()?;
    Ok(Property3Result {
        mesh: mesh.to_string(),
        k,
        tail_variance,
        threshold: epsilon,
        theoretical_tail,
        pass: tail_variance < epsilon,
    })
}

/// Twice the Weyl-predicted tail variance from mode `k` on a surface of area
/// `area`; mesh-independent by construction.
pub fn default_epsilon(k: usize, tau: f64, area: f64) -> f64 {
    EPSILON_FACTOR * weyl_predicted_tail(k, tau, area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::stats::ModeRecord;

    fn stats(lambdas: &[f64], sigmas: &[f64], n: usize) -> SpectralStats {
        SpectralStats {
            sample_count: n,
            vertex_count: 100,
            area: 1.0,
            records: lambdas
                .iter()
                .zip(sigmas)
                .enumerate()
                .map(|(i, (&l, &s))| ModeRecord {
                    index: i + 1,
                    eigenvalue: l,
                    sample_count: n,
                    empirical_mean: 0.0,
                    empirical_variance: s * s,
                    histogram: None,
                })
                .collect(),
            mean_energy: 0.0,
            mean_field_energy: 0.0,
            correlation: vec![],
        }
    }

    #[test]
    fn matching_is_value_based() {
        let a = [0.0, 2.0, 2.01, 6.0];
        let b = [0.0, 1.99, 2.02, 4.0, 6.1];
        assert_eq!(match_modes(&a, &b, 0.05, 10), vec![(0, 0), (1, 1), (2, 2), (3, 4)]);
        assert_eq!(match_modes(&a, &b, 0.05, 2), vec![(0, 0), (1, 1)]);
        assert!(match_modes(&[1.0], &[2.0], 0.05, 1).is_empty());
    }

    #[test]
    fn identical_stats_have_zero_distance() {
        let s = stats(&[0.0, 2.0, 6.0], &[0.01, 0.009, 0.008], 20_000);
        let r = check_property2(("a", &s), ("a", &s), 100.0, 0.05, 30).unwrap();
        assert_eq!(r.pairs.len(), 3);
        assert!(r.pass);
        assert!(r.pairs.iter().all(|p| p.w2 == 0.0 && p.bound == 0.0));
    }

    #[test]
    fn distance_and_bound_arithmetic() {
        let a = stats(&[10.0], &[1.0 / 110.0], 20_000);
        let b = stats(&[10.2], &[0.5 / 110.0], 20_000);
        let r = check_property2(("a", &a), ("b", &b), 100.0, 0.05, 30).unwrap();
        let p = &r.pairs[0];
        assert!((p.w2 - 0.5 / 110.0).abs() < 1e-15);
        assert!((p.bound - 0.2 / 1e4).abs() < 1e-15);
        assert!((p.bound_squared - 0.04 / 1e8).abs() < 1e-18);
        assert!(!p.pass && !r.pass);
        assert_eq!(r.failed_pairs, 1);
        assert!(check_property2(("a", &a), ("b", &stats(&[50.0], &[1.0], 200)), 100.0, 0.05, 3).is_err());
    }

    #[test]
    fn property1_flags_dependence() {
        let mut s = stats(&[0.0, 1.0, 2.0], &[1.0; 3], 1000);
        s.correlation = vec![vec![1.0, 0.01, 0.02], vec![0.01, 1.0, 0.99], vec![0.02, 0.99, 1.0]];
        let r = check_property1("m", &s, 0.03).unwrap();
        assert!(!r.pass);
        assert_eq!(r.worst_pair, [2, 3]);
        s.sample_count = 50;
        assert!(matches!(check_property1("m", &s, 0.03), Err(Error::Insufficient(_))));
    }

    #[test]
    fn epsilon_is_twice_prediction() {
        let e = default_epsilon(30, 100.0, 4.0 * std::f64::consts::PI);
        assert!((e / weyl_predicted_tail(30, 100.0, 4.0 * std::f64::consts::PI) - 2.0).abs() < 1e-15);
        // slope 1: Σ_{i≥30} 1/(i + 99)² ≈ 1/128.5
        assert!((e / 2.0 - 1.0 / 128.5).abs() < 1e-5);
    }
}
