//! PNG input/output for scene images, masks and label rasters.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::{GrayImage, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::geometry::RasterMask;

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::ImageLoad {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::ImageWrite {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// 0/255 grayscale rendering of a mask.
pub fn mask_to_gray(mask: &RasterMask) -> GrayImage {
    GrayImage::from_fn(mask.width(), mask.height(), |x, y| {
        Luma([if mask.get(x, y) { 255 } else { 0 }])
    })
}

pub fn save_mask(mask: &RasterMask, path: &Path) -> Result<()> {
    mask_to_gray(mask)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::ImageWrite {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

/// Writes an 8-bit palette PNG; `indices` are row-major palette entries.
pub fn save_indexed(
    width: u32,
    height: u32,
    indices: &[u8],
    palette: &[[u8; 3]],
    path: &Path,
) -> Result<()> {
    let write_err = |reason: String| Error::ImageWrite {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(palette.iter().flatten().copied().collect::<Vec<u8>>());
    let mut writer = enc.write_header().map_err(|e| write_err(e.to_string()))?;
    writer
        .write_image_data(indices)
        .map_err(|e| write_err(e.to_string()))?;
    writer.finish().map_err(|e| write_err(e.to_string()))
}
