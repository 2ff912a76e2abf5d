//! Analysis of research productivity trajectories over academic careers.
//!
//! The pipeline turns per-faculty publication records into career-year
//! count series, corrects them for database coverage and field-wide growth,
//! fits a two-segment linear trend with a change point, decides by
//! information criteria whether the kink is warranted, checks how stable the
//! fitted shape is under publication-date noise and classifies the result.
//! Inequality metrics, authorship-order analysis and a synthetic cohort
//! generator with known ground truth round it out.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod authorship;
pub mod calibrate;
pub mod classify;
pub mod countmodels;
pub mod inequality;
pub mod ingest;
pub mod perturb;
pub mod piecewise;
pub mod rng;
pub mod synthgen;

pub use calibrate::AdjustmentModel;
pub use ingest::{CareerSeries, FacultyRecord, PublicationRecord, Source};
pub use piecewise::{Criterion, ModelChoice, PiecewiseParams, Theta};
