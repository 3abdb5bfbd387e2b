//! Modelling and monitoring of activities of daily living (ADLs).
//!
//! A complex activity (eating lunch, cooking, ...) is described as a set of
//! weighted atomic activities, each performed on a context attribute. From
//! that description the crate counts every way the activity can be carried
//! out, builds semantic definitions for a knowledge base, and runs a
//! four-branch decision procedure over observed activity traces to flag a
//! user who is lying down and no longer acting, outside of a zone where
//! lying is normal.
//!
//! Alongside the symbolic path sits a plain k-nearest-neighbor classifier
//! over wearable accelerometer/gyroscope records, together with the
//! ingestion, splitting and confusion-matrix tooling needed to evaluate it.

pub mod activity_model;
pub mod dataset;
pub mod edscca;
pub mod error;
pub mod evaluation;
pub mod knn;
pub mod labels;
pub mod pipeline;
pub mod trace_sim;
pub mod zone_model;

pub use error::{Error, Result};
