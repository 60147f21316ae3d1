//! Numerical treatment of a singular stochastic control problem for
//! carbon-emission compliance.
//!
//! A firm holds an emission surplus `X` (emissions over quota, driven by
//! `dX = -a dθ - db + ν dZ`) and can reduce emissions at rate `a` (quadratic
//! running cost `(m/2)a²`) or buy allowances at the market price `S`
//! (geometric Brownian motion, `dS = S(μ dθ + σ dW)`). Unsettled surplus at
//! the horizon costs `X_T⁺ · S_T`. The value function solves an HJB
//! variational inequality with the gradient constraint `∂Φ/∂x ≤ s`; the
//! constraint region is separated from the continuation region by a free
//! boundary surface `x(y, t)`.
//!
//! The crate solves the problem twice, by methodologically independent
//! routes, and cross-validates:
//!
//! * [`penalty`] — the obstacle unknown `v = ∂u/∂x` via a penalized
//!   parabolic equation, stepped by ADI-preconditioned implicit iteration;
//! * [`obstacle`] — the integrated unknown `u` via implicit steps plus a
//!   gradient-projection sweep.
//!
//! Post-processing lives in [`free_boundary`] (level-set extraction of the
//! trading boundary) and [`policy`] (feedback-policy extraction and Monte
//! Carlo replay of the cost functional). [`model`] holds the validated
//! market parameters and the closed-form quantities used as test oracles.

pub mod commands;
pub mod config;
pub mod free_boundary;
pub mod grid;
pub mod model;
pub mod obstacle;
pub mod penalty;
pub mod policy;
pub mod tridiag;

pub use config::RunConfig;
pub use free_boundary::FreeBoundary;
pub use grid::{Grid, GridSpec, SurfaceKind, ValueSurface};
pub use model::{BoundConstants, ModelParams, PenaltyConfig};
pub use penalty::{SolverConfig, StepReport};
pub use policy::{Policy, SimReport};
