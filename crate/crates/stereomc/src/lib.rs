//! # stereomc
//!
//! Monte Carlo sampling through the preconditioned stereographic projection:
//! the sphere-based samplers SRW (random walk Metropolis), SSS (geodesic
//! slice sampler with shrinkage) and SBPS (bouncy particle process), their
//! Adapting-Increasingly-Rarely adaptive versions, a split-chain laboratory
//! for regeneration structure on finite kernels, and a benchmark harness for
//! heavy-tailed targets where gradient-based Euclidean samplers stall.
//!
//! The sphere chart maps a point z on S^d to `x = Sigma^{1/2} z_{1:d} /
//! (1 - z_{d+1}) + mu`, pulling the tails of a heavy-tailed target onto a
//! bounded neighbourhood of the North pole. Sampling happens on the sphere;
//! every sample is pushed back to R^d. The adaptive controller re-estimates
//! `(mu, Sigma)` at polynomially spaced times so the target's mass ends up
//! spread around the equator.
//!
//! ## Where to start
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example srw_basics        # projection + random walk
//! cargo run --release --example slice_sampler     # shrinkage slice sampling
//! cargo run --release --example bouncy_particle   # PDMP events and skeletons
//! cargo run --release --example adaptive_heavy_tail  # AIR on a t_2 target
//! cargo run --release --example split_chain_lab   # regeneration checks
//! cargo run --release --example hmc_contrast      # why the sphere helps
//! ```
//!
//! The same functionality is scriptable through the thin `stereomc` binary
//! (`run`, `plot`, `verify`, `presets`); see the README.
//!
//! ## Library sketch
//!
//! ```rust
//! use nalgebra::DVector;
//! use stereomc::geometry::Precondition;
//! use stereomc::srw::{srw_step, SrwConfig, SrwState};
//! use stereomc::targets::Gaussian;
//!
//! let d = 3;
//! let target = Gaussian::standard(d);
//! let p = Precondition::isotropic(d, d as f64).unwrap();
//! let cfg = SrwConfig::new(0.5).unwrap();
//! let mut rng = stereomc::rng::chain_rng(7, 0);
//! let mut state = SrwState::from_x(&p, &target, &DVector::zeros(d)).unwrap();
//! let mut mean = 0.0;
//! for _ in 0..2000 {
//!     srw_step(&mut state, &cfg, &p, &target, &mut rng).unwrap();
//!     mean += state.x[0] / 2000.0;
//! }
//! assert!(mean.abs() < 0.5);
//! ```

// `!(x > 0.0)` rejects NaN configuration values; `x <= 0.0` would let them
// through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hmc;
pub mod rng;
pub mod sbps;
pub mod splitchain;
pub mod srw;
pub mod sss;
pub mod stats;
pub mod targets;
pub mod trace;

pub use error::{Result, StereoError};
