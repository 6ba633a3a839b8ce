//! Void detection for BGA solder-ball X-ray images.
//!
//! The pipeline segments individual solder balls from a multi-ball
//! radiograph, then searches each ball for voids (gas pockets that show up
//! brighter than the surrounding solder):
//!
//! 1. **Segmentation** ([`ball_segment`]) — per-slice adaptive thresholding,
//!    circle detection, radius-mode filtering, and interpolation of balls
//!    hidden by occlusion.
//! 2. **Edge detection** ([`edge_detect`]) — Laplacian-of-Gaussian zero
//!    crossings, split into closed contours (filled directly) and open edge
//!    pixels (passed to the ring scanner).
//! 3. **Ring scanning** ([`void_scan`]) — each concentric pixel ring is
//!    scanned angularly from positive edge to negative edge; spans that sit
//!    far enough above the ring background become 1D voids.
//! 4. **Assembly** ([`void_assemble`]) — 1D voids are stacked across rings
//!    into 2D voids, merged with the closed-contour fills, labeled, filtered
//!    by minimum area, and measured as a void percentage per ball.
//!
//! [`baseline`] implements the reference approach (join nearest open-contour
//! endpoints, then fill) used for comparisons, and [`synth_bench`] generates
//! seeded synthetic images with exact pixel ground truth for scoring both
//! methods.

pub mod ball_segment;
pub mod baseline;
pub mod edge_detect;
pub mod raster;
pub mod render;
pub mod synth_bench;
#[cfg(test)]
pub(crate) mod test_util;
pub mod void_assemble;
pub mod void_scan;

pub use ball_segment::{BallRegion, Provenance, SegmentationParams};
pub use edge_detect::EdgeParams;
pub use raster::{BinaryMask, GrayImage, LabelMap, RingSample};
pub use synth_bench::{GroundTruth, ScoreCard, SynthSpec};
pub use void_assemble::{AssemblyParams, InspectParams, InspectionReport, VoidRegion};
pub use void_scan::ScanParams;
