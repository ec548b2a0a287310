//! Simulation and verification toolkit for generalized urn processes.
//!
//! An urn holds balls labeled by elements of a finite set `G`. At each step a
//! batch of new balls is drawn from `Multinomial(T(p_n), k_{n+1} - k_n)`,
//! where `p_n` is the current empirical label distribution and `T` is a map
//! of the probability simplex over `G` into itself. The crate provides
//!
//! * finite groups as validated Cayley tables with subgroup enumeration
//!   ([`group`]),
//! * the simplex transformations of interest (group convolution, the
//!   `k`-draw parity rule, a one-locus selection model), their fixed points,
//!   and sampling-based checkers for the contraction, boundary-repulsion,
//!   and growth-rate conditions ([`simplex`], [`checks`]),
//! * a reproducible integer-count simulation engine ([`engine`]) with CSV
//!   trajectory export ([`io`]),
//! * supermartingale drift monitors and exact small-instance enumeration
//!   oracles that certify the Monte Carlo engine ([`diagnostics`], [`exact`]).

pub mod checks;
pub mod diagnostics;
pub mod engine;
pub mod exact;
pub mod group;
pub mod io;
pub mod simplex;

pub use checks::{check_a1, check_a2, check_a3, A1Options, A2Options, CheckError, ConditionReport};
pub use diagnostics::{
    convergence_verdict, exact_conditional_drift, exact_distribution, monte_carlo_drift,
    robbins_siegmund_monitor, ConvergenceVerdict, DiagnosticsError, DriftRecord, MonitorOptions,
    MonitorReport,
};
pub use engine::{
    run, run_sweep, EngineError, GrowthSchedule, RunConfig, Snapshot, StopRule, Trajectory,
    UrnState,
};
pub use group::{FiniteGroup, GroupError, Subgroup};
pub use simplex::{Distribution, FixedPointSet, SimplexError, SimplexMap};
