use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in image pixel coordinates (x to the right, y downwards).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// A closed polygon ring. The closing edge from the last vertex back to the
/// first is implicit.
///
/// Always holds at least three finite vertices with no two cyclically
/// consecutive vertices coinciding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Point>", try_from = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = Error;

    fn try_from(vertices: Vec<Point>) -> Result<Self> {
        Polygon::new(vertices)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new<P: Into<Point>>(vertices: impl IntoIterator<Item = P>) -> Result<Self> {
        let vertices: Vec<Point> = vertices.into_iter().map(Into::into).collect();
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "degenerate polygon: {} vertices, need at least 3",
                vertices.len()
            )));
        }
        if let Some(i) = vertices
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::InvalidPolygon(format!(
                "non-finite coordinate at vertex {i}"
            )));
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a == b {
                return Err(Error::InvalidPolygon(format!(
                    "degenerate polygon: vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        Ok(Polygon { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as (start, end) pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed shoelace area; positive when the ring runs counter-clockwise in
    /// a y-up frame.
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges()
            .map(|(a, b)| (b.x - a.x).hypot(b.y - a.y))
            .sum()
    }

    /// Area centroid. Falls back to the vertex mean for zero-area rings.
    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let n = self.vertices.len() as f64;
            let (sx, sy) = self
                .vertices
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            return Point::new(sx / n, sy / n);
        }
        let (cx, cy) = self.edges().fold((0.0, 0.0), |(cx, cy), (p, q)| {
            let cross = p.x * q.y - q.x * p.y;
            (cx + (p.x + q.x) * cross, cy + (p.y + q.y) * cross)
        });
        Point::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Applies `f` to every vertex and revalidates the result.
    pub fn map_points(&self, f: impl Fn(Point) -> Point) -> Result<Polygon> {
        Polygon::new(self.vertices.iter().map(|&p| f(p)))
    }

    /// Sutherland–Hodgman clip against the rectangle `[0, width] x [0, height]`.
    /// Returns `None` when less than a non-degenerate ring remains.
    pub fn clip_to_rect(&self, width: f64, height: f64) -> Option<Polygon> {
        #[derive(Clone, Copy)]
        enum Side {
            Left,
            Right,
            Top,
            Bottom,
        }
        let inside = |p: Point, side: Side| match side {
            Side::Left => p.x >= 0.0,
            Side::Right => p.x <= width,
            Side::Top => p.y >= 0.0,
            Side::Bottom => p.y <= height,
        };
        let intersect = |a: Point, b: Point, side: Side| {
            let t = match side {
                Side::Left => (0.0 - a.x) / (b.x - a.x),
                Side::Right => (width - a.x) / (b.x - a.x),
                Side::Top => (0.0 - a.y) / (b.y - a.y),
                Side::Bottom => (height - a.y) / (b.y - a.y),
            };
            let mut p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            match side {
                Side::Left => p.x = 0.0,
                Side::Right => p.x = width,
                Side::Top => p.y = 0.0,
                Side::Bottom => p.y = height,
            }
            p
        };

        let mut ring = self.vertices.clone();
        for side in [Side::Left, Side::Right, Side::Top, Side::Bottom] {
            if ring.is_empty() {
                break;
            }
            let input = std::mem::take(&mut ring);
            let n = input.len();
            for i in 0..n {
                let cur = input[i];
                let prev = input[(i + n - 1) % n];
                match (inside(prev, side), inside(cur, side)) {
                    (true, true) => ring.push(cur),
                    (true, false) => ring.push(intersect(prev, cur, side)),
                    (false, true) => {
                        ring.push(intersect(prev, cur, side));
                        ring.push(cur);
                    }
                    (false, false) => {}
                }
            }
        }

        ring.dedup();
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        Polygon::new(ring).ok().filter(|p| p.area() > 0.0)
    }
}
