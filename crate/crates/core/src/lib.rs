//! Superpixel-integrated grids (Sigrids).
//!
//! A Sigrid replaces a dense image with a small regular grid of superpixel
//! descriptors. The pipeline, in order:
//!
//! - [`slic`] segments an [`Image`] into superpixels.
//! - [`gridmap`] merges superpixels with near-coincident centroids and
//!   assigns each remaining one to the grid cell under its centroid,
//!   discarding the smaller region when two land in the same cell.
//! - [`descriptors`] computes color and shape descriptors per region.
//! - [`assembly`] places descriptors into cells, turns pixel masks into
//!   per-cell labels and expands cell labels back to pixels.
//! - [`metrics`] scores predictions at cell and pixel level.
//! - [`format`] reads and writes the SGRD and SGPD files, and
//!   [`pipeline`] drives all of the above over files and directories.

pub mod assembly;
pub mod augment;
pub mod color;
pub mod config;
pub mod descriptors;
mod dsu;
pub mod error;
pub mod format;
pub mod geometry;
pub mod gridmap;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod rle;
pub mod slic;
pub mod synth;

pub use assembly::{
    backproject, build_sigrid, max_iou, rasterize_labels, CellEntry, CellLabelGrid, Sigrid, EMPTY,
};
pub use descriptors::{compute_descriptors, hu_moments_raw, DescriptorConfig, DescriptorVector};
pub use error::{Error, Result};
pub use gridmap::{
    assign_cells, map_to_grid, merge_close_centroids, min_collision_free_grid, CellIndex,
    GridAssignment, GridSpec,
};
pub use imaging::{load_image, load_mask, relabel_compact, Image, Mask, Superpixelation};
pub use metrics::{evaluate, iou, max_f_beta, MetricsReport};
pub use slic::{slic_segment, superpixel_centroids, SlicParams};
