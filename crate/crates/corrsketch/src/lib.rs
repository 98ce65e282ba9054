//! Fixed-size correlation sketches over (key, numeric value) column pairs.
//!
//! Sketches summarize a column pair with the entries whose keys hash to the
//! smallest unit-interval values. Joining two sketches on key hashes yields a
//! uniform random sample of the post-join value pairs, which feeds:
//!
//! - correlation estimators ([`correlation`]): Pearson, Spearman, rank-based
//!   inverse normal, Qn, and a bootstrap estimator with percentile intervals;
//! - distribution-free confidence intervals for Pearson estimates
//!   ([`bounds`]);
//! - cardinality, intersection, and containment estimates ([`setstats`]);
//! - risk-penalized ranking of candidate columns ([`ranking`]);
//! - a persistent inverted index answering top-k join-correlation queries
//!   ([`index`]).
//!
//! [`tableio`] parses delimited tables into sketchable column pairs, and
//! [`synthbench`] generates synthetic corpora and runs the evaluation
//! harness (RMSE, coverage, MAP/nDCG, runtime comparisons).

pub mod bounds;
pub mod correlation;
pub mod hashing;
pub mod index;
pub mod ranking;
pub mod setstats;
pub mod sketch;
pub mod synthbench;
pub mod tableio;

mod wire;

pub use hashing::{KeyHash, UnitValue};
pub use sketch::{
    build_sketch, sketch_join, Aggregate, CorrelationSketch, PairedSample, SketchBuilder,
    ValueRange,
};
