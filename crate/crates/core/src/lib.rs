//! Computerized assessment of developmental dysgraphia from online handwriting.
//!
//! The pipeline runs from raw tablet recordings to model explanations:
//!
//! 1. [`signal`]: SVC ingestion, validation and stroke segmentation.
//! 2. [`features`]: temporal, kinematic, dynamic, spatial and other features,
//!    reduced to named scalars and collected in a [`features::FeatureMatrix`].
//! 3. [`stats`]: confound regression, Mann-Whitney U, Spearman correlation
//!    and Benjamini-Hochberg FDR.
//! 4. [`boost`]: second-order gradient-boosted trees, randomized
//!    hyperparameter search under repeated stratified k-fold CV, and the
//!    classification/regression metrics.
//! 5. [`explain`]: path-dependent TreeSHAP attributions.
//!
//! [`synth`] generates cohorts with controlled group differences for testing
//! the whole chain end to end.

pub mod features;
pub mod signal;
pub mod stats;
pub mod boost;
pub mod explain;
pub mod synth;

pub use features::{FeatureConfig, FeatureMatrix};
pub use signal::{Sample, Session};
