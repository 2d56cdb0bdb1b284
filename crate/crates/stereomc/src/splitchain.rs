//! Split-chain laboratory on finite-state kernels.
//!
//! Uniform ergodicity of a kernel is equivalent to an entrywise minorisation
//! `P^T(x, .) >= eps * nu(.)`. On a finite state space the maximal such pair
//! is computable exactly (column minima), and the split chain
//!
//! ```text
//! X_{(n+1)T} ~ nu                 if Y_n = 1,
//! X_{(n+1)T} ~ eta(X_{nT}, .)    if Y_n = 0,      Y_n ~ iid Bern(eps),
//! eta = (P^T - eps nu) / (1 - eps),
//! ```
//!
//! can be simulated and checked against exact linear-algebra oracles: the
//! residual identity, geometric renewal gaps, the renewal-time stationarity
//! series, and the two-step regeneration structure of the atom. These
//! finite chains stand in for the stereographic kernels, whose minorisation
//! constants exist but are not computable.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Result, StereoError};
use crate::stats::{self, TestResult};

// ---------------------------------------------------------------------------
// Kernels and minorisation
// ---------------------------------------------------------------------------

/// A row-stochastic transition matrix with the horizon T at which the
/// minorisation is taken.
#[derive(Debug, Clone)]
pub struct FiniteKernel {
    p: DMatrix<f64>,
    t_pow: usize,
}

impl FiniteKernel {
    pub fn new(p: DMatrix<f64>, t_pow: usize) -> Result<Self> {
        if p.nrows() != p.ncols() || p.nrows() == 0 {
            return Err(StereoError::InvalidConfig("kernel must be square and non-empty".into()));
        }
        if t_pow == 0 {
            return Err(StereoError::InvalidConfig("horizon T must be >= 1".into()));
        }
        for i in 0..p.nrows() {
            let row_sum: f64 = p.row(i).iter().sum();
            if (row_sum - 1.0).abs() > 1e-12 {
                return Err(StereoError::InvalidConfig(format!(
                    "row {i} sums to {row_sum}, not 1"
                )));
            }
            if p.row(i).iter().any(|&e| e < 0.0) {
                return Err(StereoError::InvalidConfig(format!("row {i} has a negative entry")));
            }
        }
        Ok(Self { p, t_pow })
    }

    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// P^T, the kernel the minorisation applies to.
    pub fn horizon_kernel(&self) -> DMatrix<f64> {
        let mut out = self.p.clone();
        for _ in 1..self.t_pow {
            out *= &self.p;
        }
        out
    }
}

/// An entrywise minorisation P^T(x, .) >= eps * nu(.).
#[derive(Debug, Clone)]
pub struct Minorisation {
    pub epsilon: f64,
    pub nu: DVector<f64>,
}

/// The maximal entrywise minorisation of P^T: nu proportional to the column
/// minima, eps their sum. Errors when every column of P^T has a zero.
pub fn extract_minorisation(kernel: &FiniteKernel) -> Result<Minorisation> {
    let pt = kernel.horizon_kernel();
    let n = pt.nrows();
    let mins = DVector::from_fn(n, |j, _| pt.column(j).min());
    let epsilon: f64 = mins.iter().sum();
    if epsilon <= 0.0 {
        return Err(StereoError::NotMinorisable);
    }
    Ok(Minorisation { epsilon, nu: mins / epsilon })
}

/// Stationary distribution of a row-stochastic matrix (unique for the
/// Doeblin chains used here), by direct linear solve of pi^T (P - I) = 0
/// with the normalization row appended.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    a.lu()
        .solve(&b)
        .ok_or_else(|| StereoError::Numerical("singular stationary system".into()))
}

// ---------------------------------------------------------------------------
// The split chain
// ---------------------------------------------------------------------------

/// Endpoint of one segment together with its regeneration flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitState {
    pub endpoint: usize,
    pub y: bool,
}

/// The split chain built from a kernel and its minorisation.
#[derive(Debug, Clone)]
pub struct SplitChain {
    pt: DMatrix<f64>,
    minor: Minorisation,
    /// Residual kernel eta; `None` when eps = 1 (iid chain).
    eta: Option<DMatrix<f64>>,
    /// Per-row cumulative distributions for O(log n) sampling.
    eta_cdf: Option<DMatrix<f64>>,
    nu_cdf: DVector<f64>,
}

fn row_cdfs(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        let mut acc = 0.0;
        for j in 0..m.ncols() {
            acc += m[(i, j)];
            out[(i, j)] = acc;
        }
    }
    out
}

fn sample_cdf_row<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    cdf.iter().position(|&c| u <= c).unwrap_or(cdf.len() - 1)
}

impl SplitChain {
    pub fn new(kernel: &FiniteKernel, minor: Minorisation) -> Result<Self> {
        let pt = kernel.horizon_kernel();
        let n = pt.nrows();
        let eps = minor.epsilon;
        if !(0.0 < eps && eps <= 1.0) {
            return Err(StereoError::InvalidConfig(format!("epsilon {eps} outside (0, 1]")));
        }
        // verify the minorisation entrywise at construction
        for i in 0..n {
            for j in 0..n {
                if pt[(i, j)] < eps * minor.nu[j] - 1e-12 {
                    return Err(StereoError::InvalidConfig(format!(
                        "minorisation fails at ({i},{j}): {} < {}",
                        pt[(i, j)],
                        eps * minor.nu[j]
                    )));
                }
            }
        }
        let eta = if eps < 1.0 {
            let mut eta = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    eta[(i, j)] = ((pt[(i, j)] - eps * minor.nu[j]) / (1.0 - eps)).max(0.0);
                }
                // rows sum to 1 up to rounding; renormalize exactly
                let s: f64 = eta.row(i).iter().sum();
                for j in 0..n {
                    eta[(i, j)] /= s;
                }
            }
            Some(eta)
        } else {
            None
        };
        let eta_cdf = eta.as_ref().map(row_cdfs);
        let nu_cdf = {
            let mut acc = 0.0;
            DVector::from_fn(n, |j, _| {
                acc += minor.nu[j];
                acc
            })
        };
        Ok(Self { pt, minor, eta, eta_cdf, nu_cdf })
    }

    pub fn epsilon(&self) -> f64 {
        self.minor.epsilon
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.minor.nu
    }

    pub fn eta(&self) -> Option<&DMatrix<f64>> {
        self.eta.as_ref()
    }

    pub fn horizon_kernel(&self) -> &DMatrix<f64> {
        &self.pt
    }

    /// Y_0 ~ Bern(eps), removing the skew a fixed flag would put on the
    /// first return time.
    pub fn init<R: Rng + ?Sized>(&self, endpoint: usize, rng: &mut R) -> SplitState {
        SplitState { endpoint, y: rng.gen::<f64>() < self.minor.epsilon }
    }

    /// One split transition: the next endpoint from nu or the residual
    /// kernel according to the current flag, and a fresh Bern(eps) flag
    /// independent of everything.
    pub fn step<R: Rng + ?Sized>(&self, s: SplitState, rng: &mut R) -> SplitState {
        let endpoint = if s.y || self.eta.is_none() {
            sample_cdf_row(self.nu_cdf.as_slice(), rng)
        } else {
            let cdf = self.eta_cdf.as_ref().unwrap();
            sample_cdf_row(cdf.row(s.endpoint).transpose().as_slice(), rng)
        };
        SplitState { endpoint, y: rng.gen::<f64>() < self.minor.epsilon }
    }

    /// Simulates `n` further states after [`SplitChain::init`].
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: usize,
        n: usize,
        rng: &mut R,
    ) -> Vec<SplitState> {
        let mut out = Vec::with_capacity(n + 1);
        let mut s = self.init(start, rng);
        out.push(s);
        for _ in 0..n {
            s = self.step(s, rng);
            out.push(s);
        }
        out
    }

    /// Exact check of eps*nu + (1-eps)*eta = P^T; returns the max absolute
    /// entry error.
    pub fn residual_identity_error(&self) -> f64 {
        let n = self.pt.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let rebuilt = self.minor.epsilon * self.minor.nu[j]
                    + match &self.eta {
                        Some(eta) => (1.0 - self.minor.epsilon) * eta[(i, j)],
                        None => 0.0,
                    };
                worst = worst.max((rebuilt - self.pt[(i, j)]).abs());
            }
        }
        worst
    }

    /// The renewal-time stationarity series
    /// `eps * sum_{n>=1} (1-eps)^{n-1} nu eta^{n-1}`, truncated once the
    /// geometric tail drops below 1e-12. This is the law of the endpoint at
    /// renewal times, and equals the stationary distribution of P^T.
    pub fn renewal_stationarity_series(&self) -> DVector<f64> {
        let eps = self.minor.epsilon;
        let mut acc = self.minor.nu.clone() * eps;
        if let Some(eta) = &self.eta {
            let mut term = self.minor.nu.transpose(); // row vector nu eta^n
            let mut weight = eps;
            loop {
                weight *= 1.0 - eps;
                if weight < 1e-12 {
                    break;
                }
                term *= eta;
                acc += (term.transpose()) * weight;
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

fn total_variation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    0.5 * a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Renewal gap statistics against Geom(eps).
#[derive(Debug)]
pub struct ReturnTimeReport {
    pub n_gaps: usize,
    pub mean_gap: f64,
    pub expected_mean: f64,
    pub ks: TestResult,
    pub chi2: TestResult,
    pub lag1_autocorr: f64,
    pub lag2_autocorr: f64,
}

impl ReturnTimeReport {
    pub fn passes(&self, alpha: f64) -> bool {
        let n = self.n_gaps as f64;
        self.ks.p_value > alpha
            && self.chi2.p_value > alpha
            && self.lag1_autocorr.abs() < 3.0 / n.sqrt()
            && self.lag2_autocorr.abs() < 3.0 / n.sqrt()
    }
}

/// Simulates the chain until roughly `target_gaps` renewals have been seen
/// and tests the inter-arrival sequence against iid Geom(eps).
pub fn verify_return_times<R: Rng + ?Sized>(
    chain: &SplitChain,
    target_gaps: usize,
    rng: &mut R,
) -> ReturnTimeReport {
    let eps = chain.epsilon();
    let horizon = ((target_gaps + 2) as f64 / eps).ceil() as usize * 2;
    let states = chain.run(0, horizon, rng);
    let renewal_times: Vec<usize> = states
        .iter()
        .enumerate()
        .filter_map(|(n, s)| s.y.then_some(n))
        .collect();
    let gaps: Vec<f64> = renewal_times
        .windows(2)
        .take(target_gaps)
        .map(|w| (w[1] - w[0]) as f64)
        .collect();
    let mean_gap = stats::mean(&gaps);
    // geometric law on {1, 2, ...}: P(G <= t) and its left limit P(G < t)
    let cdf = move |t: f64| {
        if t < 1.0 {
            0.0
        } else {
            1.0 - (1.0 - eps).powi(t.floor() as i32)
        }
    };
    let cdf_left = move |t: f64| {
        if t <= 1.0 {
            0.0
        } else {
            1.0 - (1.0 - eps).powi(t.ceil() as i32 - 1)
        }
    };
    let ks = stats::ks_test_with_left(&gaps, cdf, cdf_left);
    // chi-square against the geometric pmf with a lumped tail
    let max_bin = ((1.0f64 - eps).ln().recip() * (5.0 / gaps.len() as f64).ln()).ceil() as usize;
    let max_bin = max_bin.clamp(2, 200);
    let mut observed = vec![0u64; max_bin + 1];
    for &g in &gaps {
        let idx = (g as usize - 1).min(max_bin);
        observed[idx] += 1;
    }
    let mut probs = vec![0.0; max_bin + 1];
    for (j, p) in probs.iter_mut().enumerate().take(max_bin) {
        *p = eps * (1.0 - eps).powi(j as i32);
    }
    probs[max_bin] = (1.0 - eps).powi(max_bin as i32);
    let chi2 = stats::chi2_gof(&observed, &probs, 5.0);
    ReturnTimeReport {
        n_gaps: gaps.len(),
        mean_gap,
        expected_mean: 1.0 / eps,
        ks,
        chi2,
        lag1_autocorr: stats::autocorrelation(&gaps, 1),
        lag2_autocorr: stats::autocorrelation(&gaps, 2),
    }
}

/// Renewal-time stationarity: the truncated series against the stationary
/// vector of P^T (exact oracle), plus the empirical law of the endpoint at
/// renewal times sigma_k, k >= 2.
#[derive(Debug)]
pub struct RenewalStationarityReport {
    pub series_error: f64,
    pub empirical_tv: f64,
    pub n_renewals: usize,
}

impl RenewalStationarityReport {
    pub fn passes(&self) -> bool {
        self.series_error < 1e-9 && self.empirical_tv < 0.02
    }
}

pub fn verify_renewal_stationarity<R: Rng + ?Sized>(
    chain: &SplitChain,
    target_renewals: usize,
    rng: &mut R,
) -> Result<RenewalStationarityReport> {
    let pi = stationary_distribution(chain.horizon_kernel())?;
    let series = chain.renewal_stationarity_series();
    let series_error = (&series - &pi).amax();

    let eps = chain.epsilon();
    let horizon = ((target_renewals + 2) as f64 / eps).ceil() as usize * 2;
    let states = chain.run(0, horizon, rng);
    let mut counts = vec![0u64; chain.nu().len()];
    let mut seen = 0usize;
    let mut used = 0usize;
    for s in &states {
        if s.y {
            seen += 1;
            if seen >= 2 && used < target_renewals {
                counts[s.endpoint] += 1;
                used += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let empirical =
        DVector::from_fn(counts.len(), |i, _| counts[i] as f64 / total.max(1) as f64);
    Ok(RenewalStationarityReport {
        series_error,
        empirical_tv: total_variation(&empirical, &pi),
        n_renewals: used,
    })
}

/// Two-step regeneration structure of the atom.
#[derive(Debug)]
pub struct AtomIndependenceReport {
    /// Contingency test of (X_n, X_{n+2}) given Y_n = 1; independence holds.
    pub lag2_given_renewal: TestResult,
    /// TV distance of the law of X_{n+1} given Y_n = 1 from nu.
    pub nu_tv: f64,
    /// Contingency test of (X_n, X_{n+1}) over all n: the unconditional
    /// lag-1 dependence that a regenerating but autocorrelated chain keeps.
    pub lag1_unconditional: TestResult,
    pub n_pairs: usize,
}

pub fn verify_atom_independence<R: Rng + ?Sized>(
    chain: &SplitChain,
    target_pairs: usize,
    rng: &mut R,
) -> AtomIndependenceReport {
    let n_states = chain.nu().len();
    let eps = chain.epsilon();
    let horizon = ((target_pairs + 2) as f64 / eps).ceil() as usize * 6;
    let states = chain.run(0, horizon, rng);

    // pairs (X_n, X_{n+2}) at renewals, spaced >= 5 apart so the chi-square
    // sees close-to-independent rows
    let mut table = vec![vec![0u64; n_states]; n_states];
    let mut nu_counts = vec![0u64; n_states];
    let mut last_used: isize = -10;
    let mut n_pairs = 0usize;
    for n in 0..states.len().saturating_sub(2) {
        if states[n].y && n as isize - last_used >= 5 && n_pairs < target_pairs {
            table[states[n].endpoint][states[n + 2].endpoint] += 1;
            nu_counts[states[n + 1].endpoint] += 1;
            last_used = n as isize;
            n_pairs += 1;
        }
    }
    let lag2_given_renewal = stats::chi2_independence(&table);
    let total: u64 = nu_counts.iter().sum();
    let empirical_nu =
        DVector::from_fn(n_states, |i, _| nu_counts[i] as f64 / total.max(1) as f64);
    let nu_tv = total_variation(&empirical_nu, chain.nu());

    // unconditional lag-1 pairs, thinned the same way
    let mut lag1 = vec![vec![0u64; n_states]; n_states];
    let mut idx = 0;
    while idx + 1 < states.len() && lag1.iter().flatten().sum::<u64>() < target_pairs as u64 {
        lag1[states[idx].endpoint][states[idx + 1].endpoint] += 1;
        idx += 5;
    }
    AtomIndependenceReport {
        lag2_given_renewal,
        nu_tv,
        lag1_unconditional: stats::chi2_independence(&lag1),
        n_pairs,
    }
}

/// Random Doeblin chain: every entry at least `floor`, rows normalized.
pub fn random_doeblin_chain<R: Rng + ?Sized>(
    n_states: usize,
    floor: f64,
    rng: &mut R,
) -> FiniteKernel {
    let mut p = DMatrix::zeros(n_states, n_states);
    for i in 0..n_states {
        let mut row: Vec<f64> = (0..n_states).map(|_| floor + rng.gen::<f64>()).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|e| *e /= s);
        for (j, e) in row.into_iter().enumerate() {
            p[(i, j)] = e;
        }
    }
    FiniteKernel::new(p, 1).unwrap()
}
