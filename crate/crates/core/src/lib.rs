//! Toolkit for the instruction-step sequencing benchmark.
//!
//! A manual's steps are shown in scrambled order and a system must recover the authored
//! order. This crate covers the pieces around such a system:
//!
//! * [`model`]: manuals, permutations (slot → position), scrambled instances, reference sets.
//! * [`decoding`]: global orders from pairwise precedence matrices (exhaustive, topological
//!   with cycle breaking, beam).
//! * [`metrics`]: Acc, PMR, Dist, L_q, L_r and Kendall's τ, multi-reference evaluation and
//!   manual-completion retrieval metrics.
//! * [`agreement`]: relation encodings, Cohen's kappa and alternative-order agreement.
//! * [`plans`]: seeded corruption plans for sequence-aware pretraining.
//! * [`corpus`]: manifests, splits, scrambling, majority-voted references, file records.
//! * [`report`]: batch evaluation and rendered tables.
//!
//! Numeric code is generic over [`Scalar`] (metrics, agreement) or [`Real`] (decoding). Exact
//! rationals work wherever logarithms are not needed:
//!
//! ```
//! use stepseq::{agreement, Permutation, Rational};
//!
//! let gt = Permutation::from_sequence(&[0, 1, 2]).unwrap();
//! let a = Permutation::from_sequence(&[0, 2, 1]).unwrap();
//! let b = Permutation::from_sequence(&[1, 0, 2]).unwrap();
//! let k: Rational = agreement::restricted_kappa(&gt, &a, &b).unwrap();
//! assert_eq!(k, Rational::from_integer(-1));
//! ```

pub mod agreement;
pub mod corpus;
pub mod decoding;
pub mod error;
pub mod metrics;
pub mod model;
pub mod plans;
pub mod report;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, RecordError, Result};
pub use model::{Manual, Modality, OrderPrediction, Permutation, ReferenceSet, ScrambledInstance, Source, Step};
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Rational = num_rational::Ratio<i64>;

pub type PairwiseMatrix = decoding::PairwiseMatrix<f64>;
pub type PairwiseMatrixF32 = decoding::PairwiseMatrix<f32>;
pub type MetricReport = metrics::MetricReport<f64>;
pub type ExactMetricReport = metrics::MetricReport<Rational>;
pub type AggregateReport = metrics::AggregateReport<f64>;
pub type CompletionMetrics = metrics::CompletionMetrics<f64>;
pub type Prediction = OrderPrediction<f64>;
