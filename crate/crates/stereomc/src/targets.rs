//! Target distributions on R^d.
//!
//! Targets are compiled-in models plus an affine wrapper for building
//! non-centered, non-spherical test cases whose optimal preconditioning is
//! known by construction. Log-densities are exact (normalizing constants
//! included where closed-form) and gradients are analytic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StereoError};
use crate::stats::ln_gamma;

/// A target density on R^d exposing the log-density and, when available,
/// its gradient.
pub trait Target {
    fn dim(&self) -> usize;

    /// log pi(x); finite for all finite x.
    fn log_density(&self, x: &DVector<f64>) -> f64;

    /// grad_x log pi(x), or `None` for gradient-free targets.
    fn log_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>>;

    fn has_gradient(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Gaussian
// ---------------------------------------------------------------------------

/// Covariance description for [`Gaussian`].
#[derive(Debug, Clone)]
pub enum CovScale {
    Identity,
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

/// Multivariate normal N(mean, cov).
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    ln_det_cov: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: CovScale) -> Result<Self> {
        let d = mean.len();
        let (precision, ln_det_cov) = match cov {
            CovScale::Identity => (DMatrix::identity(d, d), 0.0),
            CovScale::Diagonal(v) => {
                if v.len() != d {
                    return Err(StereoError::DimensionMismatch { expected: d, got: v.len() });
                }
                if v.iter().any(|&e| e <= 0.0) {
                    return Err(StereoError::InvalidScale(
                        "non-positive diagonal covariance entry".into(),
                    ));
                }
                let prec = DMatrix::from_diagonal(&v.map(|e| 1.0 / e));
                let ld = v.iter().map(|e| e.ln()).sum();
                (prec, ld)
            }
            CovScale::Full(m) => {
                if m.nrows() != d || m.ncols() != d {
                    return Err(StereoError::DimensionMismatch { expected: d, got: m.nrows() });
                }
                let chol = m
                    .clone()
                    .cholesky()
                    .ok_or_else(|| StereoError::InvalidScale("covariance not SPD".into()))?;
                let ld = 2.0 * chol.l().diagonal().iter().map(|e| e.ln()).sum::<f64>();
                (chol.inverse(), ld)
            }
        };
        Ok(Self { mean, precision, ln_det_cov })
    }

    /// Standard normal N(0, I_d).
    pub fn standard(d: usize) -> Self {
        Self::new(DVector::zeros(d), CovScale::Identity).unwrap()
    }
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.mean.len() as f64;
        let diff = x - &self.mean;
        let quad = diff.dot(&(&self.precision * &diff));
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.ln_det_cov + quad)
    }

    fn log_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let diff = x - &self.mean;
        Some(-(&self.precision * diff))
    }
}

// ---------------------------------------------------------------------------
// Multivariate t
// ---------------------------------------------------------------------------

/// Spherical multivariate t-distribution with `dof` degrees of freedom:
/// log pi(x) = const - (dof + d)/2 * log(1 + |x|^2 / dof).
#[derive(Debug, Clone)]
pub struct StudentT {
    dof: f64,
    d: usize,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(dof: f64, d: usize) -> Result<Self> {
        if !(dof > 0.0) {
            return Err(StereoError::InvalidConfig(format!(
                "student_t dof must be > 0, got {dof}"
            )));
        }
        let df = d as f64;
        let ln_norm = ln_gamma((dof + df) / 2.0)
            - ln_gamma(dof / 2.0)
            - 0.5 * df * (dof * std::f64::consts::PI).ln();
        Ok(Self { dof, d, ln_norm })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }
}

impl Target for StudentT {
    fn dim(&self) -> usize {
        self.d
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let df = self.d as f64;
        self.ln_norm - 0.5 * (self.dof + df) * (1.0 + x.norm_squared() / self.dof).ln()
    }

    fn log_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let df = self.d as f64;
        let coef = -(self.dof + df) / (self.dof + x.norm_squared());
        Some(x * coef)
    }
}

// ---------------------------------------------------------------------------
// Affine wrapper
// ---------------------------------------------------------------------------

/// Affine image of an inner target: if X ~ inner, this is the law of
/// A X + shift. Used to construct targets with a known non-trivial optimal
/// precondition (mean = A m + shift, covariance = A C A^T).
pub struct Affine<T: Target> {
    inner: T,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    shift: DVector<f64>,
    ln_abs_det: f64,
}

impl<T: Target> Affine<T> {
    pub fn new(inner: T, a: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let d = inner.dim();
        if a.nrows() != d || a.ncols() != d || shift.len() != d {
            return Err(StereoError::DimensionMismatch { expected: d, got: a.nrows() });
        }
        let lu = a.clone().lu();
        let det = lu.determinant();
        if det.abs() < 1e-300 {
            return Err(StereoError::InvalidScale("affine map is singular".into()));
        }
        let a_inv = lu
            .try_inverse()
            .ok_or_else(|| StereoError::InvalidScale("affine map not invertible".into()))?;
        Ok(Self {
            inner,
            a,
            a_inv,
            shift,
            ln_abs_det: det.abs().ln(),
        })
    }

    /// Pure translation.
    pub fn shifted(inner: T, shift: DVector<f64>) -> Result<Self> {
        let d = inner.dim();
        Self::new(inner, DMatrix::identity(d, d), shift)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }
}

impl<T: Target> Target for Affine<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let y = &self.a_inv * (x - &self.shift);
        self.inner.log_density(&y) - self.ln_abs_det
    }

    fn log_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let y = &self.a_inv * (x - &self.shift);
        let g = self.inner.log_gradient(&y)?;
        Some(self.a_inv.transpose() * g)
    }

    fn has_gradient(&self) -> bool {
        self.inner.has_gradient()
    }
}
