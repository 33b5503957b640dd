use super::{Point, Polygon, RasterMask};
use crate::error::Result;

/// x-coordinate where the edge `a -> b` crosses the horizontal line `y`, if
/// the edge's half-open y-interval `[y_low, y_high)` contains `y`.
///
/// Horizontal edges never cross. Including only the lower endpoint makes a
/// scanline through a shared vertex count exactly once per side.
#[inline]
pub fn edge_crossing(a: Point, b: Point, y: f64) -> Option<f64> {
    let (lo, hi) = if a.y < b.y { (a, b) } else { (b, a) };
    if lo.y == hi.y || y < lo.y || y >= hi.y {
        return None;
    }
    let t = (y - lo.y) / (hi.y - lo.y);
    Some(lo.x + t * (hi.x - lo.x))
}

/// Smallest pixel column whose center `i + 0.5` is `>= x`, clamped to
/// `[0, width]`.
fn first_center_at_or_after(x: f64, width: u32) -> u32 {
    if x.is_nan() || x <= 0.5 {
        return 0;
    }
    if x > width as f64 - 0.5 {
        return width;
    }
    let mut i = (x - 0.5).ceil() as i64;
    // guard the subtraction's rounding so the result agrees with a direct
    // `x <= i + 0.5` comparison
    while i > 0 && x <= (i - 1) as f64 + 0.5 {
        i -= 1;
    }
    while x > i as f64 + 0.5 {
        i += 1;
    }
    i.clamp(0, width as i64) as u32
}

/// Rasterizes `poly` into a `width x height` mask.
///
/// A pixel `(i, j)` is set iff its center `(i + 0.5, j + 0.5)` is inside the
/// polygon under the even-odd rule. Parts of the polygon outside the image
/// are discarded.
pub fn rasterize_polygon(poly: &Polygon, width: u32, height: u32) -> Result<RasterMask> {
    let mut mask = RasterMask::new(width, height)?;
    rasterize_into(poly, &mut mask);
    Ok(mask)
}

/// Rasterizes several polygons into one union mask.
pub fn rasterize_union<'a>(
    polys: impl IntoIterator<Item = &'a Polygon>,
    width: u32,
    height: u32,
) -> Result<RasterMask> {
    let mut mask = RasterMask::new(width, height)?;
    for p in polys {
        rasterize_into(p, &mut mask);
    }
    Ok(mask)
}

/// ORs the rasterization of `poly` into `mask`.
pub fn rasterize_into(poly: &Polygon, mask: &mut RasterMask) {
    let (width, height) = mask.dims();
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly.vertices() {
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let row_lo = first_center_at_or_after(y_min, height);
    let row_hi = first_center_at_or_after(y_max, height);

    let edges: Vec<(Point, Point)> = poly.edges().filter(|(a, b)| a.y != b.y).collect();
    let mut crossings: Vec<f64> = Vec::with_capacity(edges.len());
    for row in row_lo..row_hi.max(row_lo) {
        let yc = row as f64 + 0.5;
        crossings.clear();
        crossings.extend(edges.iter().filter_map(|&(a, b)| edge_crossing(a, b, yc)));
        crossings.sort_unstable_by(f64::total_cmp);
        // centers in [x_{2k}, x_{2k+1}) have an odd number of crossings to
        // their right
        for pair in crossings.chunks_exact(2) {
            let x0 = first_center_at_or_after(pair[0], width);
            let x1 = first_center_at_or_after(pair[1], width);
            mask.fill_row_span(row, x0, x1);
        }
    }
}
