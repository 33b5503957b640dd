//! Two-epoch change detection by binary mask subtraction.
//!
//! Each epoch's predicted instances are merged into one union mask; the two
//! unions are compared pixel by pixel. Percent change is relative to the
//! earlier epoch's area, positive for growth.

use std::path::Path;

use serde::Serialize;

use crate::dataset::Detection;
use crate::error::{Error, Result};
use crate::geometry::{CombineOp, RasterMask};
use crate::imaging;
use crate::numfmt::round_sig6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeStatus {
    /// Earlier area is nonzero, so a percentage is defined.
    Changed,
    NoSlumEither,
    NewSettlement,
}

impl ChangeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChangeStatus::Changed => "changed",
            ChangeStatus::NoSlumEither => "no_slum_either",
            ChangeStatus::NewSettlement => "new_settlement",
        }
    }
}

/// Per-pixel change label; the discriminant is the palette index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ChangeLabel {
    Background = 0,
    Stable = 1,
    Added = 2,
    Removed = 3,
}

/// Palette for [`ChangeLabel`] indices: black, gray, green, red.
pub const CHANGE_PALETTE: [[u8; 3]; 4] = [[0, 0, 0], [128, 128, 128], [0, 200, 0], [220, 0, 0]];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeRaster {
    width: u32,
    height: u32,
    labels: Vec<ChangeLabel>,
}

impl ChangeRaster {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn label(&self, x: u32, y: u32) -> ChangeLabel {
        self.labels[y as usize * self.width as usize + x as usize]
    }

    pub fn labels(&self) -> &[ChangeLabel] {
        &self.labels
    }

    pub fn count(&self, label: ChangeLabel) -> u64 {
        self.labels.iter().filter(|&&l| l == label).count() as u64
    }

    /// Pixels carrying `label`, as a mask.
    pub fn mask_of(&self, label: ChangeLabel) -> RasterMask {
        let px: Vec<bool> = self.labels.iter().map(|&l| l == label).collect();
        RasterMask::from_pixels(self.width, self.height, &px).expect("consistent dims")
    }

    /// Writes an indexed-color PNG using [`CHANGE_PALETTE`].
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let idx: Vec<u8> = self.labels.iter().map(|&l| l as u8).collect();
        imaging::save_indexed(self.width, self.height, &idx, &CHANGE_PALETTE, path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeResult {
    pub area_before: u64,
    pub area_after: u64,
    /// Defined only for [`ChangeStatus::Changed`].
    pub percent_change: Option<f64>,
    pub status: ChangeStatus,
    pub change_map: ChangeRaster,
}

#[derive(Serialize)]
struct ChangeJson {
    before_px: u64,
    after_px: u64,
    percent: Option<f64>,
    status: ChangeStatus,
}

impl ChangeResult {
    /// `{"before_px", "after_px", "percent", "status"}`; `percent` is null
    /// when no base area exists.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChangeJson {
            before_px: self.area_before,
            after_px: self.area_after,
            percent: self.percent_change.map(round_sig6),
            status: self.status,
        })
        .expect("change result serializes")
    }

    /// Signed percentage with two decimals (`+35.25`), or `n/a`.
    pub fn percent_display(&self) -> String {
        match self.percent_change {
            Some(p) => format!("{p:+.2}"),
            None => "n/a".to_string(),
        }
    }
}

/// Union of the detections scoring at least `score_floor`.
pub fn scene_union_mask(
    detections: &[Detection],
    score_floor: f64,
    width: u32,
    height: u32,
) -> Result<RasterMask> {
    let mut mask = RasterMask::new(width, height)?;
    for d in detections {
        if d.mask.dims() != (width, height) {
            return Err(Error::DimensionMismatch {
                left: (width, height),
                right: d.mask.dims(),
            });
        }
        if d.score >= score_floor {
            mask.combine_in_place(&d.mask.decode(), CombineOp::Union)?;
        }
    }
    Ok(mask)
}

/// Compares an earlier and a later union mask.
pub fn detect_change(before: &RasterMask, after: &RasterMask) -> Result<ChangeResult> {
    if before.dims() != after.dims() {
        return Err(Error::DimensionMismatch {
            left: before.dims(),
            right: after.dims(),
        });
    }
    let (area_before, area_after) = (before.area(), after.area());
    let (status, percent_change) = match (area_before, area_after) {
        (0, 0) => (ChangeStatus::NoSlumEither, None),
        (0, _) => (ChangeStatus::NewSettlement, None),
        (b, a) => (
            ChangeStatus::Changed,
            Some(100.0 * (a as f64 - b as f64) / b as f64),
        ),
    };
    let labels = (0..before.len())
        .map(|i| match (before.get_flat(i), after.get_flat(i)) {
            (true, true) => ChangeLabel::Stable,
            (false, true) => ChangeLabel::Added,
            (true, false) => ChangeLabel::Removed,
            (false, false) => ChangeLabel::Background,
        })
        .collect();
    Ok(ChangeResult {
        area_before,
        area_after,
        percent_change,
        status,
        change_map: ChangeRaster {
            width: before.width(),
            height: before.height(),
            labels,
        },
    })
}
