//! Simulation of continuously monitored Kerr-mode networks fed by linear
//! Gaussian quantum sources, and binary discrimination of the source states
//! from heterodyne records.
//!
//! The measurement chain is a set of `M` linear source modes (squeezed,
//! driven, possibly thermal) coupled one-way through circulators into `K`
//! Kerr modes whose decay channels are heterodyne-monitored. Three solver
//! layers are provided:
//!
//! * [`nvk`] — a semi-analytic weak-nonlinearity solver (nonlinear van Kampen
//!   expansion): nonlinear working point, Lyapunov covariance, Hessian-driven
//!   mean shift, and closed-form filtered measurement statistics;
//! * [`steom`] — stochastic truncated cumulant equations of motion, i.e.
//!   measurement-conditioned integration of first- and second-order cumulants
//!   emitting raw heterodyne records;
//! * [`oracle`] — exact references: closed-form steady-state moments of the
//!   driven Kerr oscillator in the complex-P representation, and dense
//!   Fock-space master-equation steady states for one- and two-mode chains.
//!
//! [`readout`] converts records into filtered features, [`metrics`] computes
//! discrimination and correlation measures, and [`tasks`] holds the canonical
//! benchmark definitions, amplifier baselines and parameter sweeps.

pub mod chain;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod nvk;
pub mod oracle;
pub mod readout;
pub mod steom;
pub mod tasks;

pub use chain::{ChainSpec, Layout, LinearizedSystem};
pub use error::{CoreError, Result};
pub use linalg::{CMat, CVec};
pub use metrics::{DiscriminationReport, GaussianState};
pub use nvk::{ExpansionPoint, FilterMode, NvkSolution};
pub use readout::{FeatureSet, FeatureVector, GaussianSummary};
pub use steom::{CumulantState, SdeConfig, Trajectory};
pub use tasks::{TaskDef, TaskId};

/// Vacuum quadrature variance in the convention used everywhere here.
pub const SIGMA_VAC_SQ: f64 = 0.5;
