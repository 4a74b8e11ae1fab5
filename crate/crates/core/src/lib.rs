//! Synthetic in-cabin data generation, a dual-head hands-on-wheel classifier,
//! and the tooling for data-centric iteration on its errors.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod iteration;
pub mod labeling;
pub mod nn;
pub mod pipeline;
pub mod render;
pub mod scenegen;
pub mod seeding;
pub mod triage;

pub use error::{Error, Result};
