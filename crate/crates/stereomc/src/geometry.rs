//! The preconditioned stereographic projection between R^d and the punctured
//! unit sphere S^d, the induced log-density on the sphere, and tangent-space
//! operations shared by all three samplers.
//!
//! The chart is parametrised by gamma = (mu, Sigma): a point z on S^d maps to
//!
//! ```text
//! x = Sigma^{1/2} * z_{1:d} / (1 - z_{d+1}) + mu,
//! ```
//!
//! with inverse `u = Sigma^{-1/2}(x - mu)`, `z_{1:d} = 2u/(|u|^2+1)`,
//! `z_{d+1} = (|u|^2-1)/(|u|^2+1)`. The North pole `(0,..,0,1)` is the image
//! of infinity; every sphere-to-plane map here rejects its neighbourhood with
//! a typed [`StereoError::PoleSingularity`] instead of producing infinities.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, StereoError};
use crate::targets::Target;

/// Latitudes at or above `1 - POLE_GUARD` are treated as the North pole.
pub const POLE_GUARD: f64 = 1e-14;

/// Eigenvalue floor applied before taking the matrix square root.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Precondition
// ---------------------------------------------------------------------------

/// The transformation parameter gamma = (mu, Sigma) with cached symmetric
/// principal square root and inverse root.
#[derive(Debug, Clone)]
pub struct Precondition {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    sigma_half: DMatrix<f64>,
    sigma_half_inv: DMatrix<f64>,
}

impl Precondition {
    /// Builds a precondition from a location and an SPD scale matrix.
    ///
    /// `sigma` must be symmetric to 1e-12 relative; eigenvalues are floored
    /// at [`EIGENVALUE_FLOOR`] before rooting. The principal symmetric root
    /// is used throughout (any other root differs by an orthogonal factor
    /// and changes individual samples but not the pushforward law).
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(StereoError::DimensionMismatch {
                expected: d,
                got: sigma.nrows(),
            });
        }
        let scale = sigma.amax().max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(StereoError::InvalidScale(format!(
                        "asymmetry at ({i},{j}): {} vs {}",
                        sigma[(i, j)],
                        sigma[(j, i)]
                    )));
                }
            }
        }
        let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (sigma[(i, j)] + sigma[(j, i)]));
        let eig = sym.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(StereoError::InvalidScale(format!(
                "non-positive eigenvalue {:e}",
                eig.eigenvalues.min()
            )));
        }
        let roots = eig.eigenvalues.map(|l| l.max(EIGENVALUE_FLOOR).sqrt());
        let q = &eig.eigenvectors;
        let sigma_half = q * DMatrix::from_diagonal(&roots) * q.transpose();
        let sigma_half_inv = q * DMatrix::from_diagonal(&roots.map(|r| 1.0 / r)) * q.transpose();
        Ok(Self {
            mu,
            sigma: sym,
            sigma_half,
            sigma_half_inv,
        })
    }

    /// Identity precondition scaled by `scale`: gamma = (0, scale * I_d).
    pub fn isotropic(d: usize, scale: f64) -> Result<Self> {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d) * scale)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_half(&self) -> &DMatrix<f64> {
        &self.sigma_half
    }

    pub fn sigma_half_inv(&self) -> &DMatrix<f64> {
        &self.sigma_half_inv
    }

    /// Whitened coordinates u = Sigma^{-1/2}(x - mu).
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.sigma_half_inv * (x - &self.mu)
    }
}

// ---------------------------------------------------------------------------
// SpherePoint / PhasePoint
// ---------------------------------------------------------------------------

/// A point on the punctured unit sphere S^d, stored as d+1 Cartesian
/// coordinates. Construction enforces unit norm (1e-12) and the North-pole
/// guard.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    z: DVector<f64>,
}

impl SpherePoint {
    pub fn new(z: DVector<f64>) -> Result<Self> {
        let deviation = (z.norm() - 1.0).abs();
        if deviation > 1e-12 {
            return Err(StereoError::NotUnit { deviation });
        }
        let lat = z[z.len() - 1];
        if lat >= 1.0 - POLE_GUARD {
            return Err(StereoError::PoleSingularity {
                latitude: lat,
                guard: POLE_GUARD,
            });
        }
        Ok(Self { z })
    }

    /// Normalizes `v` onto the sphere, then applies the same checks as `new`.
    pub fn from_unnormalized(v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if n < 1e-300 {
            return Err(StereoError::NotUnit { deviation: 1.0 });
        }
        Self::new(v / n)
    }

    /// South pole (0, ..., 0, -1) of S^d.
    pub fn south_pole(d: usize) -> Self {
        let mut z = DVector::zeros(d + 1);
        z[d] = -1.0;
        Self { z }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.z
    }

    /// Ambient dimension d of the plane this sphere charts.
    pub fn dim(&self) -> usize {
        self.z.len() - 1
    }

    /// The last coordinate z_{d+1}. Latitude 0 is the equator; latitude near
    /// 1 corresponds to very large |x|.
    pub fn latitude(&self) -> f64 {
        self.z[self.z.len() - 1]
    }
}

/// An orthonormal position-velocity pair (z, v) with v tangent to S^d at z.
#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub z: SpherePoint,
    pub v: DVector<f64>,
}

impl PhasePoint {
    pub fn new(z: SpherePoint, v: DVector<f64>) -> Result<Self> {
        let deviation = (v.norm() - 1.0).abs();
        if deviation > 1e-10 {
            return Err(StereoError::NotUnit { deviation });
        }
        let dot = z.coords().dot(&v).abs();
        if dot > 1e-10 {
            return Err(StereoError::InvalidScale(format!(
                "velocity not tangent: z.v = {dot:e}"
            )));
        }
        Ok(Self { z, v })
    }

    /// Assembles a pair without invariant checks. For sampler internals that
    /// construct provably orthonormal pairs (flows, reflections).
    pub(crate) fn new_unchecked(z: DVector<f64>, v: DVector<f64>) -> Self {
        Self {
            z: SpherePoint { z },
            v,
        }
    }

    /// Projects v back onto the tangent sphere at z and renormalizes both.
    /// Used by long event loops to shed accumulated rounding drift.
    pub fn orthonormalized(&self) -> Self {
        let z = self.z.coords() / self.z.coords().norm();
        let mut v = &self.v - &z * z.dot(&self.v);
        v /= v.norm();
        Self {
            z: SpherePoint { z },
            v,
        }
    }

    /// Worst-case deviation from the orthonormality invariants.
    pub fn orthonormality_error(&self) -> f64 {
        let zn = (self.z.coords().norm() - 1.0).abs();
        let vn = (self.v.norm() - 1.0).abs();
        let dot = self.z.coords().dot(&self.v).abs();
        zn.max(vn).max(dot)
    }
}

// ---------------------------------------------------------------------------
// Projection maps
// ---------------------------------------------------------------------------

/// Stereographic projection SP_gamma: S^d -> R^d.
pub fn sp_forward(p: &Precondition, z: &SpherePoint) -> Result<DVector<f64>> {
    let d = p.dim();
    if z.dim() != d {
        return Err(StereoError::DimensionMismatch {
            expected: d,
            got: z.dim(),
        });
    }
    let lat = z.latitude();
    let denom = 1.0 - lat;
    if denom < POLE_GUARD {
        return Err(StereoError::PoleSingularity {
            latitude: lat,
            guard: POLE_GUARD,
        });
    }
    let w = z.coords().rows(0, d) / denom;
    Ok(p.sigma_half() * w + p.mu())
}

/// Inverse projection SP_gamma^{-1}: R^d -> S^d. Total on finite inputs;
/// |z| = 1 holds identically in the formula.
pub fn sp_inverse(p: &Precondition, x: &DVector<f64>) -> Result<SpherePoint> {
    let d = p.dim();
    if x.len() != d {
        return Err(StereoError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let u = p.whiten(x);
    let r2 = u.norm_squared();
    let denom = r2 + 1.0;
    let mut z = DVector::zeros(d + 1);
    for i in 0..d {
        z[i] = 2.0 * u[i] / denom;
    }
    z[d] = (r2 - 1.0) / denom;
    // guard against rounding drift before invariant checks
    let n = z.norm();
    SpherePoint::new(z / n)
}

/// Log of the transformed density pi_gamma(z) up to an additive constant:
///
/// ```text
/// log pi_gamma(z) = log pi(x) - d * log(1 - z_{d+1}) + const(gamma)
/// ```
///
/// The gamma-dependent constant (-1/2 log|Sigma|) is dropped: values are
/// comparable only at a fixed precondition, which is all the samplers need
/// inside one adaptive epoch. Do not difference values across preconditions.
pub fn log_pi_gamma(p: &Precondition, target: &dyn Target, z: &SpherePoint) -> Result<f64> {
    let x = sp_forward(p, z)?;
    let d = p.dim() as f64;
    Ok(target.log_density(&x) - d * (1.0 - z.latitude()).ln())
}

/// Gradient of log pi_gamma at z, projected onto the tangent space of S^d:
/// `g - (z.g) z` with g obtained from the target's Euclidean gradient by the
/// chain rule through the projection.
pub fn tangent_gradient(p: &Precondition, target: &dyn Target, z: &SpherePoint) -> Result<DVector<f64>> {
    let d = p.dim();
    let lat = z.latitude();
    let denom = 1.0 - lat;
    if denom < POLE_GUARD {
        return Err(StereoError::PoleSingularity {
            latitude: lat,
            guard: POLE_GUARD,
        });
    }
    let x = sp_forward(p, z)?;
    let gx = target
        .log_gradient(&x)
        .ok_or(StereoError::GradientUnavailable)?;
    // s = Sigma^{1/2} grad_x, w = z_{1:d}/(1 - z_{d+1})
    let s = p.sigma_half() * gx;
    let w = z.coords().rows(0, d) / denom;
    let mut g = DVector::zeros(d + 1);
    for i in 0..d {
        g[i] = s[i] / denom;
    }
    g[d] = (s.dot(&w) + d as f64) / denom;
    let zc = z.coords();
    let radial = zc.dot(&g);
    Ok(g - zc * radial)
}

/// Uniform draw from the tangent sphere {v in S^d : v.z = 0}: a standard
/// Gaussian in R^{d+1} with the z-component projected out, normalized.
/// Resamples in the measure-zero event of a near-zero projection.
pub fn sample_tangent_uniform<R: Rng + ?Sized>(z: &SpherePoint, rng: &mut R) -> DVector<f64> {
    let n = z.coords().len();
    loop {
        let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let radial = z.coords().dot(&v);
        v -= z.coords() * radial;
        let norm = v.norm();
        if norm >= 1e-12 {
            return v / norm;
        }
    }
}

/// Great-circle flow from an orthonormal pair: returns
/// `(z0 cos t + v0 sin t, v0 cos t - z0 sin t)`.
pub fn geodesic(z0: &DVector<f64>, v0: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
    let (s, c) = t.sin_cos();
    (z0 * c + v0 * s, v0 * c - z0 * s)
}

/// [`geodesic`] on a [`PhasePoint`], without re-validating invariants.
pub fn flow(phase: &PhasePoint, t: f64) -> PhasePoint {
    let (z, v) = geodesic(phase.z.coords(), &phase.v, t);
    PhasePoint {
        z: SpherePoint { z },
        v,
    }
}
