//! Spatial question-answer generation from posed RGB-D scans.

pub mod camera;
pub mod eval;
pub mod generate;
pub mod geometry;
pub mod grounding;
pub mod keyframe;
pub mod ply;
pub mod pipeline;
pub mod qa;
pub mod raster;
pub mod scene;
pub mod synthetic;
pub mod task;
pub mod taxonomy;
pub mod visibility;
