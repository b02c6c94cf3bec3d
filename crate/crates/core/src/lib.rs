//! Closed-loop simulator and controller toolkit for keeping a quadrotor on
//! station behind a moving ground target while continuously aiming at it.
//!
//! The crate provides three interchangeable controllers for the same pursuit
//! problem, a fixed-step plant simulator, and a benchmarking harness:
//!
//! * [`eer`] — egocentric regulator: maps the tracking error into a virtual
//!   body-aligned frame where the dynamics reduce to a double integrator,
//!   applies a precomputed LQR gain, and recovers thrust/pitch/roll
//!   analytically. No per-step iteration.
//! * [`gpm`] — direct pseudospectral baseline: Legendre-Gauss collocation of
//!   the receding-horizon optimal control problem, solved each step by an
//!   augmented-Lagrangian BFGS method with analytic gradients.
//! * [`bvp`] — indirect baseline: the first-order optimality system
//!   (state + costate) under a near-hover model, solved each step as a
//!   two-point boundary value problem by damped-Newton collocation.
//!
//! [`sim`] runs the 50 Hz control / 1 kHz integration loop, records traces,
//! and computes tracking/latency metrics; [`config`] loads the TOML run
//! configuration; the `quadtarget` binary exposes `simulate`, `bench`, and
//! `selfcheck` subcommands.

pub mod bvp;
pub mod care;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod eer;
pub mod gpm;
mod linalg;
pub mod selfcheck;
pub mod sim;

pub use dynamics::{
    Attitude, ControlInput, CostWeights, InertialState, PlantParams, TargetMotion, TargetState,
    TargetingErrors,
};
pub use sim::{Controller, Metrics, Scenario, SimTrace};
