//! Raster primitives, boundary tracing and per-instance shape features.

mod contour;
mod features;
mod hull;
mod image;
mod instance;
pub mod label;
pub mod png;

pub use self::contour::{extract_contour, trace_outer, Contour};
pub(crate) use self::contour::smooth_closed;
pub use self::features::{
    compute_shape_features, eccentricity_from_moments, ShapeFeatures, DEGENERATE_ECCENTRICITY,
};
pub use self::hull::{convex_hull, count_lattice_in_convex, polygon_area2};
pub use self::image::{
    to_grayscale, to_grayscale_with, BinaryMask, ColorImage, GrayImage, GrayscaleMode, REC601,
};
pub use self::instance::{InstanceMask, PixelBox};
pub use self::label::{is_connected, label_components, Connectivity, Labels};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1")]
    ZeroSize,
    #[error("pixel buffer has {got} values, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("intensity outside [0, 1]")]
    IntensityOutOfRange,
    #[error("mask has no foreground")]
    EmptyMask,
    #[error("mask foreground is not 8-connected")]
    Disconnected,
    #[error("mask does not fit inside its frame")]
    OutOfFrame,
    #[error("invalid contour: {0}")]
    InvalidContour(&'static str),
    #[error("points are collinear or too few for a hull")]
    CollinearInput,
    #[error("image i/o: {0}")]
    Io(String),
}
