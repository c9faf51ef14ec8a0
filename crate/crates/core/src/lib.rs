//! Multi-object tracking with color-histogram particle filters, scored and
//! repaired by an online-learned graph of pairwise object layout.
//!
//! Each object keeps a set of particle-filter trackers. Every frame the
//! learned edge distributions propose recovery candidates, all trackers are
//! advanced, and one tracker per object is chosen by greedy maximization of
//! a scene-graph score. The chosen layout is voted back into the model.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod appearance;
pub mod candidates;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod optimize;
pub mod particle;
pub mod pipeline;
pub mod sim;
pub mod sweep;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::{BBox, Point2};
pub use tracker::{Tracker, TrackerParams};
