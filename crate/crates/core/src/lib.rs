//! Multi-agent aero-acoustic-structural design pipeline.

// `!(x > y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod aero;
pub mod geometry;
pub mod knowledge;
pub mod model;
pub mod optimizer;
pub mod pipeline;
pub mod planner;
pub mod recovery;
pub mod scheduler;
pub mod structures;
pub mod workspace;
