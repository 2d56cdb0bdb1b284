//! Estimator diagnostics: running means, batch-means asymptotic variance,
//! effective sample size, and the replicate-based normality check used to
//! probe the adaptive CLT at desk scale.

use crate::error::{Result, StereoError};
use crate::stats::{self, TestResult};

/// Prefix means f_hat_t of a value sequence.
pub fn running_estimator(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        out.push(sum / (i + 1) as f64);
    }
    out
}

/// Batch-means estimate of the asymptotic variance sigma^2 in
/// sqrt(n) (f_hat - truth) -> N(0, sigma^2).
#[derive(Debug, Clone, Copy)]
pub struct BatchMeansReport {
    pub estimate: f64,
    pub n_batches: usize,
    pub batch_size: usize,
    pub sigma2_hat: f64,
    pub std_error: f64,
}

pub fn batch_means(values: &[f64], n_batches: usize) -> Result<BatchMeansReport> {
    let n = values.len();
    if n_batches < 2 || n / n_batches < 2 {
        return Err(StereoError::InvalidConfig(format!(
            "batch means needs >= 2 batches of >= 2 points, got {n} points in {n_batches} batches"
        )));
    }
    let m = n / n_batches;
    let used = m * n_batches;
    let mut batch_means_vec = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        batch_means_vec.push(stats::mean(&values[b * m..(b + 1) * m]));
    }
    let estimate = stats::mean(&values[..used]);
    let sigma2_hat = m as f64 * stats::variance(&batch_means_vec);
    Ok(BatchMeansReport {
        estimate,
        n_batches,
        batch_size: m,
        sigma2_hat,
        std_error: (sigma2_hat / used as f64).sqrt(),
    })
}

/// Effective sample size by Geyer's initial positive sequence, clamped to n.
pub fn effective_sample_size(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 4 {
        return n as f64;
    }
    let m = stats::mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let acov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut tau = 1.0; // 2 * sum of paired correlations - 1, built up below
    let mut lag = 1;
    let max_lag = (n - 2).min(20_000);
    while lag < max_lag {
        let pair = (acov(lag) + acov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    (n as f64 / tau).min(n as f64)
}

/// Replicate-based CLT probe: standardized estimates against N(0, 1).
#[derive(Debug, Clone, Copy)]
pub struct NormalityReport {
    pub n_replicates: usize,
    pub sigma2_pooled: f64,
    /// `None` when the pooled variance vanished (degenerate functional).
    pub anderson_darling: Option<TestResult>,
}

impl NormalityReport {
    pub fn passes(&self, alpha: f64) -> bool {
        match self.anderson_darling {
            Some(r) => r.p_value > alpha,
            None => true, // skipped, flagged by sigma2_pooled == 0
        }
    }
}

/// Runs `n_replicates` traces via `run_replicate(replicate_index)` and
/// applies [`clt_from_traces`].
pub fn clt_replicate_test(
    n_replicates: usize,
    truth: f64,
    n_batches: usize,
    mut run_replicate: impl FnMut(u64) -> Vec<f64>,
) -> Result<NormalityReport> {
    let traces: Vec<Vec<f64>> = (0..n_replicates).map(|rep| run_replicate(rep as u64)).collect();
    clt_from_traces(&traces, truth, n_batches)
}

/// Forms f_hat per replicate trace, standardizes by the pooled batch-means
/// sigma, and applies the Anderson-Darling normality test.
pub fn clt_from_traces(
    traces: &[Vec<f64>],
    truth: f64,
    n_batches: usize,
) -> Result<NormalityReport> {
    let n_replicates = traces.len();
    let mut estimates = Vec::with_capacity(n_replicates);
    let mut sigma2_sum = 0.0;
    let mut t_len = 0usize;
    for (rep, trace) in traces.iter().enumerate() {
        if rep == 0 {
            t_len = trace.len();
        } else if trace.len() != t_len {
            return Err(StereoError::InvalidConfig(
                "replicates must produce equal-length traces".into(),
            ));
        }
        let bm = batch_means(trace, n_batches)?;
        sigma2_sum += bm.sigma2_hat;
        estimates.push(stats::mean(trace));
    }
    let sigma2_pooled = sigma2_sum / n_replicates as f64;
    if sigma2_pooled < 1e-300 {
        return Ok(NormalityReport {
            n_replicates,
            sigma2_pooled: 0.0,
            anderson_darling: None,
        });
    }
    let scale = (t_len as f64 / sigma2_pooled).sqrt();
    let standardized: Vec<f64> = estimates.iter().map(|e| (e - truth) * scale).collect();
    Ok(NormalityReport {
        n_replicates,
        sigma2_pooled,
        anderson_darling: Some(stats::anderson_darling_normal(&standardized)),
    })
}

/// Outcome of a seeded statistical assertion re-run on fresh seeds when the
/// first attempt fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckVerdict {
    Pass,
    /// Failed once but passed on a fresh seed; expected at the stated
    /// significance level.
    Flaky,
    /// Failed on three independent seeds.
    Broken,
}

/// Runs `check(seed)` on `seeds[0]`; on failure retries the remaining seeds.
/// Three failures classify the assertion as broken rather than unlucky.
pub fn classified_check(seeds: [u64; 3], mut check: impl FnMut(u64) -> bool) -> CheckVerdict {
    if check(seeds[0]) {
        return CheckVerdict::Pass;
    }
    let mut failures = 1;
    for &s in &seeds[1..] {
        if check(s) {
            return CheckVerdict::Flaky;
        }
        failures += 1;
    }
    debug_assert_eq!(failures, 3);
    CheckVerdict::Broken
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn running_estimator_basics() {
        let constant = vec![2.5; 100];
        assert!(running_estimator(&constant).iter().all(|&v| v == 2.5));

        let alternating: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for (i, v) in running_estimator(&alternating).into_iter().enumerate() {
            assert!(v.abs() <= 1.0 / (i + 1) as f64 + 1e-15);
        }

        let mut rng = chain_rng(131, 0);
        let iid: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let last = *running_estimator(&iid).last().unwrap();
        assert!(last.abs() < 3.0 / (10_000f64).sqrt());
    }

    #[test]
    fn batch_means_iid_and_constant() {
        let mut rng = chain_rng(132, 0);
        let iid: Vec<f64> = (0..100_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = batch_means(&iid, 100).unwrap();
        assert!((r.sigma2_hat - 1.0).abs() < 0.2, "sigma2 {}", r.sigma2_hat);

        let flat = vec![1.0; 1000];
        let r = batch_means(&flat, 10).unwrap();
        assert!(r.sigma2_hat.abs() < 1e-20);
        assert_eq!(r.batch_size * r.n_batches, 1000);

        assert!(batch_means(&flat[..3], 2).is_err());
    }

    #[test]
    fn batch_means_ar1_asymptotic_variance() {
        // AR(1) with rho = 0.5 and unit innovations-variance marginal:
        // sigma^2 = (1 + rho) / (1 - rho) = 3
        let mut rng = chain_rng(133, 0);
        let rho = 0.5f64;
        let innov = (1.0 - rho * rho).sqrt();
        let mut x = 0.0;
        let trace: Vec<f64> = (0..100_000)
            .map(|_| {
                x = rho * x + innov * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let r = batch_means(&trace, 100).unwrap();
        assert!((r.sigma2_hat - 3.0).abs() < 0.75, "sigma2 {}", r.sigma2_hat);
    }

    #[test]
    fn ess_iid_and_correlated() {
        let mut rng = chain_rng(134, 0);
        let n = 100_000;
        let iid: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let e = effective_sample_size(&iid);
        assert!(e <= n as f64);
        assert!((e - n as f64).abs() < 0.15 * n as f64, "iid ESS {e}");

        let rho = 0.9f64;
        let mut x = 0.0;
        let ar: Vec<f64> = (0..n)
            .map(|_| {
                x = rho * x + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let e = effective_sample_size(&ar);
        let expect = n as f64 * (1.0 - rho) / (1.0 + rho);
        assert!((e - expect).abs() < 0.25 * expect, "AR ESS {e} vs {expect}");
    }

    #[test]
    fn clt_probe_accepts_gaussian_replicates() {
        let report = clt_replicate_test(200, 0.0, 25, |rep| {
            let mut rng = chain_rng(135, rep);
            (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        })
        .unwrap();
        assert!(report.passes(stats::DEFAULT_ALPHA), "{report:?}");
        assert!((report.sigma2_pooled - 1.0).abs() < 0.1);
    }

    #[test]
    fn clt_probe_flags_degenerate_functionals() {
        let report = clt_replicate_test(50, 1.0, 10, |_| vec![1.0; 500]).unwrap();
        assert_eq!(report.sigma2_pooled, 0.0);
        assert!(report.anderson_darling.is_none());
    }

    #[test]
    fn clt_probe_rejects_skewed_replicates() {
        // exponential means are visibly non-normal at this replicate count
        let report = clt_replicate_test(400, 0.0, 5, |rep| {
            let mut rng = chain_rng(136, rep);
            // heavily skewed: squared normals, tiny trace length
            (0..10).map(|_| rng.sample::<f64, _>(StandardNormal)).map(|v: f64| v * v - 1.0).collect()
        })
        .unwrap();
        let ad = report.anderson_darling.unwrap();
        assert!(ad.p_value < 0.05, "skew not detected: {ad:?}");
    }

    #[test]
    fn classified_check_distinguishes_flaky_from_broken() {
        assert_eq!(classified_check([1, 2, 3], |_| true), CheckVerdict::Pass);
        let mut first = true;
        assert_eq!(
            classified_check([1, 2, 3], |_| {
                let ok = !first;
                first = false;
                ok
            }),
            CheckVerdict::Flaky
        );
        assert_eq!(classified_check([1, 2, 3], |_| false), CheckVerdict::Broken);
    }
}
