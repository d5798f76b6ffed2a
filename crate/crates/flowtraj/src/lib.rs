//! Extraction of long-range motion trajectories from dense optical-flow
//! sequences.
//!
//! The pipeline ingests per-frame flow maps (Middlebury `.flo` files or
//! synthetic fields), samples and filters flow vectors, aggregates them in
//! spatiotemporal cells, advects a dense particle grid to obtain streaklines
//! and streak flow, places short streamlines by farthest-point seeding, and
//! links them across memory windows with a discrete MRF into long-range
//! trajectories. A matching framework scores extracted trajectories against
//! annotated ones, and a segmentation stage labels the trajectory-derived
//! flow field.

pub mod advection;
pub mod bspline;
pub mod cells;
pub mod config;
pub mod evaluation;
pub mod flow;
pub mod geom;
pub mod hungarian;
pub mod kmeans;
pub mod linking;
pub mod outliers;
pub mod pgm;
pub mod pipeline;
pub mod rkf45;
pub mod sampling;
pub mod segmentation;
pub mod streamlines;
pub mod trajectory;
pub mod trwbp;

pub use flow::{FlowMap, VideoVolumeConfig};
pub use sampling::FlowVector;
pub use trajectory::Trajectory;
