//! Statistical test procedures and the special functions backing them.
//!
//! Everything here is classical: Lanczos log-gamma, regularized incomplete
//! gamma (series + continued fraction), the Kolmogorov distribution, and the
//! Marsaglia & Marsaglia (2004) evaluation of the Anderson-Darling null
//! distribution. The special functions are validated in the unit tests
//! against closed forms (chi-square with even degrees of freedom, erf(1),
//! classical critical values).
//!
//! All hypothesis tests in the crate report p-values and are asserted at the
//! 0.1% significance level unless a caller states otherwise.

/// Significance level used by the repository's statistical assertions.
pub const DEFAULT_ALPHA: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
#[allow(clippy::excessive_precision)] // published coefficients kept verbatim
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Lower regularized incomplete gamma P(a, x).
pub fn reg_inc_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "reg_inc_gamma domain");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series representation
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // continued fraction for Q(a, x), modified Lentz
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        reg_inc_gamma(dof / 2.0, x / 2.0)
    }
}

/// Error function via the incomplete gamma identity erf(x) = P(1/2, x^2).
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * reg_inc_gamma(0.5, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// CDF of the Kolmogorov distribution, K(x) = P(sup|B(t)| <= x).
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.18 {
        // theta-function form, rapidly convergent for small x
        let f = (2.0 * std::f64::consts::PI).sqrt() / x;
        let t = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 0..8u32 {
            let m = (2 * k + 1) as f64;
            sum += (-m * m * t).exp();
        }
        f * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=8u32 {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * (-2.0 * kf * kf * x * x).exp();
        }
        1.0 - 2.0 * sum
    }
}

// ---------------------------------------------------------------------------
// Anderson-Darling (fully specified null), Marsaglia & Marsaglia 2004
// ---------------------------------------------------------------------------

fn ad_inf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247105
                    - (0.0649821 - (0.0347962 - (0.0116720 - 0.00168691 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
            .exp())
        .exp()
    }
}

fn ad_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let mut t = x / c;
        t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n
    } else {
        let t = (x - c) / (0.8 - c);
        let t = -0.00022633
            + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
        t * (0.04213 + 0.01365 / n) / n
    }
}

/// CDF of the Anderson-Darling statistic under a fully specified null.
pub fn anderson_darling_cdf(n: usize, a2: f64) -> f64 {
    let x = ad_inf(a2);
    (x + ad_errfix(n as f64, x)).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Test procedures
// ---------------------------------------------------------------------------

/// Outcome of a single hypothesis test.
#[derive(Debug, Clone, Copy)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `samples` against the CDF `cdf`
/// of a continuous null. Uses the Stephens finite-sample correction.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    ks_test_with_left(samples, &cdf, &cdf)
}

/// KS test against a null with atoms: `cdf(x) = P(X <= x)` and
/// `cdf_left(x) = P(X < x)`. The p-value is conservative for discrete nulls.
pub fn ks_test_with_left(
    samples: &[f64],
    cdf: impl Fn(f64) -> f64,
    cdf_left: impl Fn(f64) -> f64,
) -> TestResult {
    let n = samples.len();
    assert!(n > 0, "ks_test needs samples");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let lo = cdf_left(x) - i as f64 / nf;
        let hi = (i as f64 + 1.0) / nf - cdf(x);
        d = d.max(lo).max(hi);
    }
    let scaled = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    TestResult {
        statistic: d,
        p_value: 1.0 - kolmogorov_cdf(scaled),
    }
}

/// Chi-square goodness-of-fit test of observed counts against expected
/// probabilities. Bins with expected count below `min_expected` are merged
/// into their right neighbour (the last bin merges left).
pub fn chi2_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> TestResult {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    // merge small-expectation bins
    let mut obs_merged: Vec<f64> = Vec::new();
    let mut exp_merged: Vec<f64> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (o, p) in observed.iter().zip(probs) {
        acc_o += *o as f64;
        acc_e += p * nf;
        if acc_e >= min_expected {
            obs_merged.push(acc_o);
            exp_merged.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs_merged.last_mut(), exp_merged.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs_merged.push(acc_o);
            exp_merged.push(acc_e);
        }
    }
    let k = obs_merged.len();
    assert!(k >= 2, "chi2_gof needs at least 2 merged bins");
    let stat: f64 = obs_merged
        .iter()
        .zip(&exp_merged)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    TestResult {
        statistic: stat,
        p_value: 1.0 - chi2_cdf(stat, (k - 1) as f64),
    }
}

/// Chi-square independence test on a contingency table (rows x cols of
/// counts). Empty rows and columns are dropped.
pub fn chi2_independence(table: &[Vec<u64>]) -> TestResult {
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let ncols = table[0].len();
    let col_tot: Vec<f64> = (0..ncols)
        .map(|j| table.iter().map(|r| r[j] as f64).sum())
        .collect();
    let n: f64 = row_tot.iter().sum();
    let rows: Vec<usize> = (0..table.len()).filter(|&i| row_tot[i] > 0.0).collect();
    let cols: Vec<usize> = (0..ncols).filter(|&j| col_tot[j] > 0.0).collect();
    assert!(rows.len() >= 2 && cols.len() >= 2, "degenerate contingency table");
    let mut stat = 0.0;
    for &i in &rows {
        for &j in &cols {
            let e = row_tot[i] * col_tot[j] / n;
            let o = table[i][j] as f64;
            stat += (o - e) * (o - e) / e;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as f64;
    TestResult {
        statistic: stat,
        p_value: 1.0 - chi2_cdf(stat, dof),
    }
}

/// Anderson-Darling test of `samples` against the standard normal.
pub fn anderson_darling_normal(samples: &[f64]) -> TestResult {
    let n = samples.len();
    assert!(n >= 8, "anderson_darling_normal needs >= 8 samples");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let mut a2 = -nf;
    for i in 0..n {
        let fi = normal_cdf(sorted[i]).clamp(1e-15, 1.0 - 1e-15);
        let fr = normal_cdf(sorted[n - 1 - i]).clamp(1e-15, 1.0 - 1e-15);
        a2 -= (2.0 * i as f64 + 1.0) / nf * (fi.ln() + (1.0 - fr).ln());
    }
    TestResult {
        statistic: a2,
        p_value: 1.0 - anderson_darling_cdf(n, a2),
    }
}

// ---------------------------------------------------------------------------
// Empirical summaries
// ---------------------------------------------------------------------------

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Median by sorting a copy.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample skewness (biased, adequate for symmetry checks).
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Sample autocorrelation at a given lag.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    assert!(lag < n);
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let num: f64 = (0..n - lag).map(|i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    num / denom
}

/// Composite Simpson quadrature of `f` over [a, b] with `n` subintervals
/// (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n.is_multiple_of(2) { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}
