//! One-dimensional heavy piston between two ideal gases.
//!
//! A piston of mass `M = epsilon^{-2}` separates gas particles bouncing
//! between the walls at 0 and 1. The crate simulates the exact dynamics with
//! hard-core collisions ([`hardcore`]) or a smooth short-range potential of
//! width `delta` ([`softcore`]), solves the averaged slow-time equations
//! ([`averaged`]), and runs convergence studies comparing the two
//! ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod averaged;
pub mod error;
pub mod fit;
pub mod hardcore;
pub mod harness;
pub mod io;
pub mod model;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod softcore;

pub use averaged::{
    averaged_energy, averaged_period, avg_field_hard, avg_field_npiston, avg_field_soft,
    effective_hamiltonian, npiston_hamiltonian, phase_integrals, solve_averaged, solve_npiston,
    AveragedModel, AveragedTrajectory, NPistonState, NPistonTrajectory,
};
pub use error::{Error, Result};
pub use fit::{
    convergence_slope, loglog_fit, slope_above_floor, two_variable_fit, SlopeFit, SLOPE_WINDOW,
};
pub use hardcore::{
    AngleState, Collision, Event, EventKind, EventRecord, EvolveOptions, EvolveSummary, Observer,
};
pub use harness::{
    collision_rate_audit, convergence_study, hard_soft_comparison, sup_deviation, ComparisonReport,
    ConvergenceReport, Deviation, EnsembleSpec, ErrorRow, ErrorTable, Setup, SlowPath,
};
pub use model::{
    membership, pressures, slow_state_of, CompactSet, FullState, Side, SlowMode, SlowState,
    SystemConfig,
};
pub use ode::{dopri5, Solution, SolverOptions};
pub use profile::{Profile, TabulatedProfile};
pub use softcore::{SoftCore, StepControl};
