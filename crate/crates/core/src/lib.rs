//! Path planning on a probabilistic roadmap among moving obstacles, using
//! learned short-horizon predictions to penalize edges at risk of collision.

pub mod digest;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod prediction;
pub mod riskgraph;
pub mod roadmap;
pub mod seeds;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Point2, Rect, Segment};
