//! Deterministic geometric and raster primitives shared by every pipeline stage.

pub mod components;
pub mod contour;
pub mod homography;
pub mod mask;
pub mod raster;
pub mod shapes;
pub mod warp;

pub use components::{label_components, Component, Connectivity, Labelling};
pub use contour::{trace_contours, Contour, ContourKind};
pub use homography::{apply_homography, estimate_homography, Homography};
pub use mask::Mask;
pub use raster::{overlap_ratio, rasterize_polygon};
pub use shapes::{polygon_to_bbox, BoundingBox, Point2, Polygon};
pub use warp::{warp_gray, warp_mask};
