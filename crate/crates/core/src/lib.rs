//! 3D multi-object tracking with appearance features.
//!
//! The library maintains a world model of static 3D objects: per-frame
//! detections are associated to Kalman-filtered tracks through a gated
//! Hungarian solve over a convex combination of squared-Mahalanobis
//! position costs and min-cosine appearance costs. Around the tracker sit
//! the HOTA/MOTA evaluation stack, a deterministic synthetic greenhouse
//! scene generator, JSONL record formats, and an experiment grid runner
//! with paired significance testing.

pub mod association;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kalman;
pub mod metrics;
pub mod simgen;
pub mod tracker;
pub mod trajectory;
pub mod types;

pub use error::{Error, Result};
pub use types::{Detection, FeatureVector, Gaussian3, Track, WorldModel};

// The linear-algebra types in the public API come from nalgebra; re-export
// it so downstream crates match versions without a separate dependency.
pub use nalgebra;
