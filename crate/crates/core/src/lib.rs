//! Time-periodic solutions of doubly nonlinear parabolic equations
//!
//! ```text
//!     α(∂ₜu) − ∇·(a |∇u|^{m−2} ∇u) = f    in (0, L) × (0, T)
//!     u = 0 on the boundary,  u(·, 0) = u(·, T)
//! ```
//!
//! The solver is built as a regularization cascade. Each stage is a convex or
//! monitored problem that the next stage warm-starts from:
//!
//! * [`variational`] minimizes the elliptic-in-time functional whose stationary
//!   points solve the auxiliary periodic problem with an extra forcing `h`,
//!   optionally through the Moreau–Yosida envelope of the diffusion energy.
//! * [`cascade`] solves the fixed point `h = −α(u_h')` by Newton (or damped Picard with
//!   Anderson acceleration), drives the elliptic parameter ε to zero, and for
//!   `m ≤ p` walks the power-perturbation path `μ → 0`.
//! * [`verify`] holds manufactured-solution studies, invariant checks, growth
//!   audits and structural-stability (Mosco) experiments.
//!
//! The crate is `no_std` with `alloc`; file formats, configuration and the
//! command-line front end live in the companion `dnp` crate.

#![no_std]
#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::redundant_closure_call
)]

extern crate alloc;

pub mod anderson;
pub mod cascade;
pub mod convex;
pub mod error;
pub mod forcing;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod nonlinearity;
pub mod norms;
pub mod problem;
pub mod rng;
pub mod trajectory;
pub mod variational;
pub mod verify;

pub use cascade::{CascadeParams, FixedPointMethod, SolveReport, StageRecord, StageResult};
pub use convex::{DiffusionField, LpMetric, PerturbedFunctional, PhiConfig, StateEnergy};
pub use error::{Error, Result};
pub use forcing::ForcingSpec;
pub use mesh::{SpatialMesh, TemporalMesh};
pub use nonlinearity::Nonlinearity;
pub use problem::ProblemSpec;
pub use trajectory::{DualTrajectory, PeriodicTrajectory, Trajectory};
