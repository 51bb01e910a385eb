//! Core engine for learning a causal Bayesian network over cellular
//! configuration parameters and KPIs, and for recommending configurations by
//! exact probabilistic inference.
//!
//! The crate is `no_std` (with `alloc`) so the algorithmic core can be embedded
//! anywhere; all file, network and CLI concerns live in the companion `cbn`
//! crate. The pipeline stages map onto the modules below:
//!
//! * [`variable`] / [`data`] / [`discretize`] — telemetry typing, quantile
//!   binning and the config/measurement/KPI partition.
//! * [`constraint`] — elicited mandatory/prohibited edge sets, prompt
//!   construction, response parsing and ensemble majority voting.
//! * [`dag`] / [`cpd`] / [`bn`] — the model itself: acyclic structure,
//!   conditional probability tables, the factorized joint and parameter
//!   estimation.
//! * [`scoring`] / [`search`] / [`pc`] — decomposable structure scores (BIC,
//!   K2, BDeu) with the constraint reward/penalty terms, constrained
//!   hill-climbing, an exhaustive small-instance oracle and a PC-algorithm
//!   baseline.
//! * [`inference`] — variable elimination, expected utility and configuration
//!   recommendation with confidence/entropy reporting.
//! * [`adapt`] — incremental CPD blending and full relearning.
//! * [`eval`] — structural metrics against a ground-truth DAG and KPI reports.
//! * [`sim`] / [`worlds`] — forward sampling from a ground-truth network,
//!   baseline recommenders and the closed-loop runner.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod bn;
pub mod constraint;
pub mod cpd;
pub mod dag;
pub mod data;
pub mod discretize;
pub mod error;
pub mod eval;
pub mod inference;
pub mod math;
pub mod pc;
pub mod scoring;
pub mod search;
pub mod sim;
pub mod variable;
pub mod worlds;

pub use bn::BayesianNetwork;
pub use constraint::ConstraintSet;
pub use dag::Dag;
pub use data::{DiscreteDataset, RawDataset};
pub use error::{Error, Result};
pub use inference::Recommendation;
pub use variable::{Direction, Kind, Role, VariableSpec};
