//! Classical segmentation of overlapped lipid droplets in microscopy images.
//!
//! The pipeline binarizes a tile, labels foreground regions, passes convex
//! regions through and splits clumped ones along dark dividing curves found
//! between paired concave boundary points. Around it sit whole-slide tiling
//! and stitching, dataset export, a synthetic scene generator with exact
//! ground truth, instance-level evaluation metrics, feature-based
//! post-filtering, and a closed-form evaluator of the Mask R-CNN loss.

pub mod config;
pub mod dataset;
pub mod filter;
pub mod loss;
pub mod metrics;
pub mod preproc;
pub mod raster;
pub mod scene;
pub mod splitter;
pub mod synth;
pub mod wsi;

pub use config::PipelineConfig;
