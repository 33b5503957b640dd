//! Polygon rasterization, bit-packed binary masks, run-length encoding and
//! mask set operations.

mod mask;
mod polygon;
mod raster;
mod rle;

pub use mask::{CombineOp, PixelBox, RasterMask};
pub use polygon::{Point, Polygon};
pub use raster::{edge_crossing, rasterize_into, rasterize_polygon, rasterize_union};
pub use rle::{rle_decode, rle_encode, RleMask};

use crate::error::Result;

pub fn mask_combine(a: &RasterMask, b: &RasterMask, op: CombineOp) -> Result<RasterMask> {
    a.combine(b, op)
}

pub fn mask_area(mask: &RasterMask) -> u64 {
    mask.area()
}

pub fn bounding_box(mask: &RasterMask) -> Result<PixelBox> {
    mask.bounding_box()
}
