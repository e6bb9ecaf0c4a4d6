//! View-driven duplicate cleaning.
//!
//! Records are scored by how much their removal changes a user's view
//! (Earth Mover's Distance between the two materialized results), and an
//! active-learning loop asks a labeler about the candidate pairs whose
//! tuples matter most to that view. Cleaning stops once consecutive views
//! stop changing.
//!
//! The crate is organized bottom-up:
//!
//! - [`relation`]: typed records, ground truth, and applying duplicate decisions.
//! - [`view`]: select/bin/group/aggregate/order/limit views and their provenance.
//! - [`distance`]: tuple distance, EMD between view results, impact scores, convergence.
//! - [`pairs`]: similarity functions, feature vectors, and blocking.
//! - [`classifier`]: class-weighted SVM, bootstrap ensembles, holdout F1.
//! - [`sampling`]: weighted sampling without replacement.
//! - [`engine`]: pair scores, selection strategies, and the cleaning session.
//! - [`synth`]: seeded synthetic datasets with planted duplicates.

pub mod catalog;
pub mod classifier;
pub mod distance;
pub mod engine;
pub mod error;
pub mod labeler;
pub mod pairs;
pub mod relation;
pub mod sampling;
pub mod seed;
pub mod synth;
pub mod view;

pub use error::{Error, Result};
pub use relation::{AttributeType, GroundTruth, PairKey, Record, RecordId, Relation, Value};
pub use view::{ViewResult, ViewSpec};
