use serde::{Deserialize, Serialize};

use super::RasterMask;
use crate::error::{Error, Result};

/// Run-length encoded binary mask.
///
/// `runs` alternate 0-runs and 1-runs in row-major order and always start
/// with a 0-run, which is the only run allowed to be empty. That makes the
/// encoding unique per mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RleWire")]
pub struct RleMask {
    width: u32,
    height: u32,
    runs: Vec<u64>,
}

#[derive(Deserialize)]
struct RleWire {
    width: u32,
    height: u32,
    runs: Vec<u64>,
}

impl TryFrom<RleWire> for RleMask {
    type Error = Error;

    fn try_from(w: RleWire) -> Result<Self> {
        RleMask::new(w.width, w.height, w.runs)
    }
}

impl RleMask {
    pub fn new(width: u32, height: u32, runs: Vec<u64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::MalformedRle(format!(
                "zero dimension {width}x{height}"
            )));
        }
        if let Some(i) = runs.iter().skip(1).position(|&r| r == 0) {
            return Err(Error::MalformedRle(format!(
                "zero-length run at position {}",
                i + 1
            )));
        }
        let expected = width as u64 * height as u64;
        let total = runs
            .iter()
            .try_fold(0u64, |acc, &r| acc.checked_add(r))
            .ok_or_else(|| Error::MalformedRle("run total overflows".into()))?;
        if total != expected {
            return Err(Error::MalformedRle(format!(
                "runs sum to {total}, expected {width}x{height} = {expected}"
            )));
        }
        Ok(RleMask {
            width,
            height,
            runs,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn runs(&self) -> &[u64] {
        &self.runs
    }

    /// Set-pixel count, read off the 1-runs.
    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).sum()
    }

    pub fn encode(mask: &RasterMask) -> RleMask {
        let n = mask.len();
        let mut runs = Vec::new();
        let mut pos = 0;
        let mut value = false;
        while pos < n {
            let next = mask.next_change(pos, value);
            runs.push((next - pos) as u64);
            pos = next;
            value = !value;
        }
        RleMask {
            width: mask.width(),
            height: mask.height(),
            runs,
        }
    }

    pub fn decode(&self) -> RasterMask {
        let mut mask = RasterMask::new(self.width, self.height).expect("validated dims");
        let mut pos = 0usize;
        for (i, &r) in self.runs.iter().enumerate() {
            let end = pos + r as usize;
            if i % 2 == 1 {
                mask.fill_flat(pos, end);
            }
            pos = end;
        }
        mask
    }
}

pub fn rle_encode(mask: &RasterMask) -> RleMask {
    RleMask::encode(mask)
}

pub fn rle_decode(rle: &RleMask) -> RasterMask {
    rle.decode()
}
