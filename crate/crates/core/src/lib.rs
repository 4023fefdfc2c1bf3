//! Self-triggered zero-order-hold control with control barrier and control
//! Lyapunov certificates.
//!
//! At each update instant a min-norm QP picks the input subject to every
//! barrier constraint and a CLF decrease constraint. The input is then held
//! for the shortest of the certified safe periods (one per barrier) and the
//! CLF update period, clamped to `[tau_min, tau_max]`.
//!
//! The double integrator with a box safe set is provided as a ready-made plant
//! in [`mod@double_integrator`]; arbitrary control-affine plants are built from
//! closures via [`AffineSystem`], [`BarrierCertificate`] and
//! [`LyapunovCertificate`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod cli;
pub mod double_integrator;
pub mod error;
pub mod qp;
pub mod simulator;
pub mod system;
pub mod trigger;

pub use certificates::{
    eta, lyapunov_value, validate_gain_row, zeta, AffineRow, BarrierCertificate, LieTerms,
    LyapunovCertificate, SafetySpec,
};
pub use double_integrator::{DoubleIntegratorSetup, Plant};
pub use error::{Error, Result};
pub use qp::{QpProblem, QpRow, QpSolution, Sense};
pub use simulator::{compare, integrate_held, run, Mode, SimConfig, SimTrace, Termination};
pub use system::{double_integrator, estimate_lipschitz, AffineSystem, StateVector, Vector};
pub use trigger::{
    cbf_safe_period, clf_update_period, decide, trajectory_bound, zeta_lower_bound, Limiting,
    RootMethod, TrajectoryBound, TriggerConfig, TriggerDecision,
};
