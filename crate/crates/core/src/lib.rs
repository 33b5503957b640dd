//! slumkit: tooling for slum instance segmentation from satellite imagery.
//!
//! The crate covers everything around the segmentation network itself:
//!
//! - [`geometry`]: polygon rasterization, bit-packed masks, RLE, set operations
//! - [`dataset`]: scene/annotation datasets and external prediction files
//! - [`transforms`]: resize-and-pad preprocessing and data augmentation
//! - [`metrics`]: mask IoU, greedy matching, PR curves and AP₅₀ reports
//! - [`losses`]: classification, box and mask loss kernels with gradients
//! - [`change`]: mask-subtraction change detection between two epochs
//! - [`synth`]: seeded generator of labeled synthetic scenes and growth pairs
//!
//! Model inference happens elsewhere; predictions come in through
//! [`dataset::load_predictions`].

pub mod change;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod numfmt;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
pub use geometry::{CombineOp, PixelBox, Point, Polygon, RasterMask, RleMask};
