//! Decision-level evaluation of probabilistic ensemble forecasts.
//!
//! An ensemble forecast is judged by the decisions it leads to. For a decision
//! task (a finite action set plus a cost `c(a, y)` over outcomes), every
//! ensemble picks the action with the lowest Monte-Carlo expected cost; the
//! cost the ensemble anticipated is then compared with the cost incurred once
//! the observation arrives. Their absolute difference, the cost gap, measures
//! decision (mis)calibration, while the incurred cost itself measures decision
//! quality.
//!
//! Crate layout:
//!
//! - [`grid_store`]: gridded ensembles, observations and region masks, with CSV
//!   and binary I/O and alignment into per-case views.
//! - [`decision`]: action spaces, cost functions, the Bayes decision rule,
//!   per-observation cost gaps and their aggregation.
//! - [`tasks`]: frost protection, heat protection and wind power dispatch
//!   tasks, plus the wind speed to power transform.
//! - [`diagnostics`]: CRPS, randomized PIT histograms and spread-skill ratio.
//! - [`synthetic`]: a data-generating process with known conditional laws and
//!   forecasters with controllable miscalibration.
//! - [`report`]: run configuration, sweeps, report files and model comparison.
//!
//! ```
//! use decical::bayes_action;
//! use decical::tasks::{frost_cost, FrostTaskParams, PROTECT};
//!
//! let cost = frost_cost(&FrostTaskParams { theta: 0.0, cost_ratio: 0.5 }).unwrap();
//! // members in °C
//! let (action, expected) = bayes_action(&[-1.0, 0.5, 2.0, 4.0], &cost).unwrap();
//! assert_eq!(action, PROTECT);
//! assert!((expected - 55.0 / 24.0).abs() < 1e-12);
//! ```

pub mod decision;
pub mod diagnostics;
pub mod grid_store;
pub mod report;
mod seeding;
pub mod synthetic;
pub mod tasks;

pub use decision::{
    aggregate, bayes_action, evaluate, expected_cost, relative_improvement, ActionSpace,
    AggregateResult, CostFunction, DecisionRecord, GroupBy, Metric, Weighting,
};
pub use diagnostics::{crps_ensemble, spread_skill_ratio, CrpsEstimator};
pub use grid_store::{
    align, load_ensemble, load_mask, load_observations, AlignedView, EnsembleDataset, GridSpec,
    ObservationDataset, RegionMask, Variable,
};
pub use report::{run_compare, run_diagnostics, run_evaluate, ReportError, RunConfig};
pub use synthetic::{generate, ForecasterKind, ForecasterSpec, SyntheticDgp};
pub use tasks::Task;
