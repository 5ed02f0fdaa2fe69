//! Differentiable mass-spring soft robots steered toward light by a single
//! morphology-agnostic controller, co-designed with an evolutionary search
//! over voxel body plans.
//!
//! The crate is organized around the experiment pipeline:
//!
//! - [`morphospace`]: voxel body plans, canonical forms, and expression into
//!   mass-spring networks.
//! - [`physics`]: forward simulation over procedural terrain, recorded so it
//!   can be replayed backward.
//! - [`controller`]: the shared sensor-to-actuator MLP with input/output
//!   masking.
//! - [`gradients`]: reverse-mode differentiation of a rollout's loss with
//!   respect to controller parameters, plus the finite-difference oracle.
//! - [`training`]: Adam, gradient clipping, cosine-with-restarts schedules,
//!   and the pretraining loop.
//! - [`envgen`]: random robots, terrains, lights, and the fixed evaluation
//!   suite.
//! - [`evolution`]: the genetic algorithm and its three control regimes.
//! - [`run`]: run configuration, persistence layout, and the pipelines the
//!   command-line tool drives.
//!
//! The narrative guide in `book/` walks through the same modules with
//! runnable examples; its code blocks compile as doc-tests of this crate.

pub mod math;
pub mod controller;
pub mod morphospace;
pub mod physics;
pub mod rng;
