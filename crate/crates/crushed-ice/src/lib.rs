//! Stochastic simulation laboratory for diffusion among many small random obstacles.
//!
//! The library centers on one physical picture: a diffusing particle in a region
//! peppered with `kappa_n` tiny absorbing balls. As the balls shrink and multiply
//! at the capacity-balanced rate, the hard first-entrance time becomes
//! indistinguishable from a soft exponential clock whose spatial rate is the
//! limiting capacity density, and hard-obstacle Dirichlet solutions converge to
//! solutions of a relaxed problem with a killing term. Everything here exists to
//! generate, measure, and cross-check that convergence numerically:
//!
//! * [`model`] — domains, obstacle realizations, the random center model, and a
//!   uniform-grid spatial index for fast nearest-obstacle queries.
//! * [`capacity`] — classical potential kernels, closed-form ball capacities,
//!   a walk-on-spheres Monte Carlo capacity estimator, the anisotropic
//!   frozen-coefficient transform, and scaling-law diagnostics.
//! * [`paths`] — adaptive Euler simulation of the diffusion with obstacle
//!   entrance detection, domain exit, horizon truncation, and additive
//!   functionals accumulated along the path.
//! * [`stopping`] — randomized stopping times driven by exponential clocks,
//!   empirical laws, two-sample Kolmogorov–Smirnov tests, a truncated metric for
//!   stable convergence, and the capacity–hitting-probability bound.
//! * [`energy`] — resolvent (Green) kernels, Monte Carlo energy pairings of
//!   measures, and the iid/evenness energy diagnostics.
//! * [`solvers`] — Feynman–Kac Monte Carlo evaluation of hard-obstacle,
//!   relaxed, and Schrödinger-potential Dirichlet solutions, plus a
//!   finite-difference reference solver.
//! * [`harness`] — reproducible experiment orchestration with CSV/JSON output.
//!
//! Every sampler is driven by counter-based substreams of a single master seed
//! ([`rng::substream`]), so runs are bitwise reproducible regardless of worker
//! count. See the `examples/` directory for one runnable entry point per major
//! capability, and the `cilab` binary for the experiment CLI.

pub mod capacity;
pub mod energy;
pub mod error;
pub mod fields;
pub mod geom;
pub mod harness;
pub mod hazard;
pub mod model;
pub mod paths;
pub mod rng;
pub mod solvers;
pub mod special;
pub mod stats;
pub mod stopping;

pub use capacity::{ClassicalKernelSpec, DiffusionMatrix};
pub use error::{Error, Result};
pub use fields::ScalarField;
pub use model::{Domain, ObstacleSet, RandomCenterModel};
pub use paths::{DiffusionSpec, PathEvent, PathOutcome};
pub use solvers::{DirichletProblem, GridSolution};
pub use stats::Estimate;
