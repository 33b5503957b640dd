use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Dense binary pixel grid, row-major, bit-packed into `u64` words.
///
/// Pixel `(x, y)` lives at flat index `y * width + x`. Bits past
/// `width * height` in the last word are always zero, so derived equality is
/// pixel equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl PixelBox {
    pub fn width(&self) -> u32 {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Union,
    Intersection,
    /// `a AND NOT b`.
    Difference,
}

impl std::fmt::Debug for RasterMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "RasterMask({}x{}, area {})",
            self.width,
            self.height,
            self.area()
        )?;
        if self.len() <= 256 {
            for y in 0..self.height {
                f.write_str("\n  ")?;
                for x in 0..self.width {
                    f.write_str(if self.get(x, y) { "#" } else { "." })?;
                }
            }
        }
        Ok(())
    }
}

impl RasterMask {
    /// All-zero mask.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let n = width as usize * height as usize;
        Ok(RasterMask {
            width,
            height,
            words: vec![0; n.div_ceil(WORD)],
        })
    }

    /// All-one mask.
    pub fn full(width: u32, height: u32) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        m.words.fill(u64::MAX);
        m.clear_tail();
        Ok(m)
    }

    /// Builds a mask from row-major pixel values; `pixels.len()` must equal
    /// `width * height`.
    pub fn from_pixels(width: u32, height: u32, pixels: &[bool]) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        if pixels.len() != m.len() {
            return Err(Error::DimensionMismatch {
                left: (width, height),
                right: (pixels.len() as u32, 1),
            });
        }
        for (i, &p) in pixels.iter().enumerate() {
            if p {
                m.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        Ok(m)
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        Ok(m)
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

    /// Total pixel count.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.get_flat(self.index(x, y))
    }

    #[inline]
    pub fn get_flat(&self, i: usize) -> bool {
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = self.index(x, y);
        if value {
            self.words[i / WORD] |= 1 << (i % WORD);
        } else {
            self.words[i / WORD] &= !(1 << (i % WORD));
        }
    }

    /// Sets the flat index range `[start, end)` to one.
    pub(crate) fn fill_flat(&mut self, start: usize, end: usize) {
        if start >= end {
            return;
        }
        let (first, last) = (start / WORD, (end - 1) / WORD);
        let lo = u64::MAX << (start % WORD);
        let hi = u64::MAX >> (WORD - 1 - (end - 1) % WORD);
        if first == last {
            self.words[first] |= lo & hi;
        } else {
            self.words[first] |= lo;
            for w in &mut self.words[first + 1..last] {
                *w = u64::MAX;
            }
            self.words[last] |= hi;
        }
    }

    /// Sets pixels `x0..x1` of row `y`.
    pub fn fill_row_span(&mut self, y: u32, x0: u32, x1: u32) {
        let x1 = x1.min(self.width);
        if x0 >= x1 || y >= self.height {
            return;
        }
        let base = y as usize * self.width as usize;
        self.fill_flat(base + x0 as usize, base + x1 as usize);
    }

    fn clear_tail(&mut self) {
        let rem = self.len() % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// First flat index `>= pos` whose bit differs from `value`, or `len()`.
    pub(crate) fn next_change(&self, pos: usize, value: bool) -> usize {
        let n = self.len();
        if pos >= n {
            return n;
        }
        let mut idx = pos / WORD;
        let flip = if value { u64::MAX } else { 0 };
        let mut word = (self.words[idx] ^ flip) & (u64::MAX << (pos % WORD));
        loop {
            if word != 0 {
                return (idx * WORD + word.trailing_zeros() as usize).min(n);
            }
            idx += 1;
            if idx == self.words.len() {
                return n;
            }
            word = self.words[idx] ^ flip;
        }
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    fn check_dims(&self, other: &RasterMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    /// Per-pixel boolean combination of two equally sized masks.
    pub fn combine(&self, other: &RasterMask, op: CombineOp) -> Result<RasterMask> {
        let mut out = self.clone();
        out.combine_in_place(other, op)?;
        Ok(out)
    }

    pub fn combine_in_place(&mut self, other: &RasterMask, op: CombineOp) -> Result<()> {
        self.check_dims(other)?;
        let pairs = self.words.iter_mut().zip(&other.words);
        match op {
            CombineOp::Union => pairs.for_each(|(a, b)| *a |= b),
            CombineOp::Intersection => pairs.for_each(|(a, b)| *a &= b),
            CombineOp::Difference => pairs.for_each(|(a, b)| *a &= !b),
        }
        Ok(())
    }

    pub fn union(&self, other: &RasterMask) -> Result<RasterMask> {
        self.combine(other, CombineOp::Union)
    }

    pub fn intersection(&self, other: &RasterMask) -> Result<RasterMask> {
        self.combine(other, CombineOp::Intersection)
    }

    pub fn difference(&self, other: &RasterMask) -> Result<RasterMask> {
        self.combine(other, CombineOp::Difference)
    }

    pub fn complement(&self) -> RasterMask {
        let mut out = self.clone();
        out.words.iter_mut().for_each(|w| *w = !*w);
        out.clear_tail();
        out
    }

    /// `|self ∩ other|` without allocating.
    pub fn intersection_area(&self, other: &RasterMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as u64)
            .sum())
    }

    /// `|self ∪ other|` without allocating.
    pub fn union_area(&self, other: &RasterMask) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as u64)
            .sum())
    }

    /// Tightest inclusive box around the set pixels.
    pub fn bounding_box(&self) -> Result<PixelBox> {
        let mut bbox: Option<PixelBox> = None;
        let w = self.width as usize;
        let mut pos = self.next_change(0, false);
        while pos < self.len() {
            let end = self.next_change(pos, true);
            // a run may wrap across rows
            let (y0, y1) = ((pos / w) as u32, ((end - 1) / w) as u32);
            let (x0, x1) = if y0 == y1 {
                ((pos % w) as u32, ((end - 1) % w) as u32)
            } else {
                (0, self.width - 1)
            };
            bbox = Some(match bbox {
                None => PixelBox {
                    x_min: x0,
                    y_min: y0,
                    x_max: x1,
                    y_max: y1,
                },
                Some(b) => PixelBox {
                    x_min: b.x_min.min(x0),
                    y_min: b.y_min.min(y0),
                    x_max: b.x_max.max(x1),
                    y_max: b.y_max.max(y1),
                },
            });
            pos = self.next_change(end, false);
        }
        bbox.ok_or(Error::EmptyMask)
    }

    /// Iterator over `(x, y)` of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                let i = wi * WORD + bit;
                Some(((i % w) as u32, (i / w) as u32))
            })
        })
    }

    /// Row-major pixel values.
    pub fn to_pixels(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get_flat(i)).collect()
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> RasterMask {
        let mut out = RasterMask::new(self.width, self.height).expect("valid dims");
        for (x, y) in self.iter_set() {
            out.set(self.width - 1 - x, y, true);
        }
        out
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> RasterMask {
        let mut out = RasterMask::new(self.width, self.height).expect("valid dims");
        for (x, y) in self.iter_set() {
            out.set(x, self.height - 1 - y, true);
        }
        out
    }

    pub fn rotate_180(&self) -> RasterMask {
        self.flip_horizontal().flip_vertical()
    }
}
