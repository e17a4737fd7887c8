//! Decision-theoretic structure selection for discrete Bayesian networks.
//!
//! Given a complete categorical sample and an ordering of the variables, the
//! library scores every parent subset of each child with the Dirichlet
//! marginal likelihood, turns the scores into a posterior over each child's
//! subset lattice, and picks the parent set that minimizes posterior expected
//! loss. Three families of loss are supported:
//!
//! - 0-1 loss, whose Bayes action is the posterior mode;
//! - general per-child loss tables, solved by exhaustive risk minimization;
//! - disintegrable losses built from per-arc pairwise costs with the `⊕` sum,
//!   solved arc by arc with a linear-time rule.
//!
//! The [`oracle`] module holds brute-force reimplementations (sequential
//! Pólya-urn scoring, exhaustive lattice search, full decision-tree folding)
//! used by the test suites and the `verify` CLI subcommand.

pub mod cli;
pub mod dataset;
pub mod decision;
pub mod error;
pub mod formats;
pub mod loss;
pub mod modelspace;
pub mod numeric;
pub mod oracle;
pub mod scoring;
pub mod search;
pub mod verify;

pub use dataset::{CategoricalDataset, ContingencyCounts, VariableSpec};
pub use decision::{bayes_action, map_action, risk, Posterior, RiskReport};
pub use error::{Error, Result};
pub use loss::{DisintegrableLoss, LossSpec, LossTable, PairwiseLoss};
pub use modelspace::{CandidateParents, DagModel, LocalModel, VariableOrdering};
pub use scoring::{DirichletPrior, LocalPosterior, ModelPrior, PriorScheme};
pub use search::{learn, select_local, LearnConfig, LearnDiagnostics};
