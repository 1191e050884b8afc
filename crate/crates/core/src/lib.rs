//! Spatial point pattern statistics for categorized point data.
//!
//! Two families of locational probabilities are computed from a labeled
//! point set:
//!
//! - first order: per-category Gaussian kernel intensity ([`intensity`]),
//! - second order: local co-location quotient signatures compared by cosine
//!   similarity ([`colocation`]),
//!
//! and combined with externally supplied classifier probabilities by a
//! fitted convex combination ([`fusion`]). [`synth`] generates seeded point
//! processes and a noisy classifier for experiments and tests.
//!
//! Batch routines take a [`Strategy`]; with the default `parallel` feature
//! they fan out over rayon, and serial and parallel results are
//! bit-identical.

// `!(x > 0.0)` guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colocation;
pub mod dataset;
pub mod error;
pub mod fusion;
pub mod index;
pub mod intensity;
pub mod par;
pub mod prob;
pub mod split;
pub mod synth;

pub use colocation::{Anchor, GlobalClqTable, LclqConfig, LclqModel, LclqVector};
pub use dataset::{ingest_csv, BBox, Category, PointDataset, PointRecord};
pub use error::{Error, Result};
pub use fusion::{EvalReport, FitOptions, FitReport, FusionWeights, ProbTable, Source, SourceMask};
pub use index::SpatialIndex;
pub use intensity::{GridSpec, IntensityModel, KdeConfig, Raster};
pub use par::Strategy;
pub use prob::ProbVector;
pub use split::{split_dataset, Split, SplitAssignment};
