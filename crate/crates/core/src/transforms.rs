//! Preprocessing and augmentation.
//!
//! Images are resampled; annotations never are. Polygon vertices go through
//! the exact same affine map analytically and masks are re-rasterized from
//! the transformed polygons.

use image::{imageops, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, InstanceAnnotation, Scene};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::imaging;

/// Side length of the square network input.
pub const TARGET_SIZE: u32 = 1024;

/// 2x3 affine map `p' = [a b; d e] p + [c; f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [[f64; 3]; 2],
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };

    pub fn translation(dx: f64, dy: f64) -> Affine {
        Affine {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy]],
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Affine {
        Affine {
            m: [[sx, 0.0, 0.0], [0.0, sy, 0.0]],
        }
    }

    /// Rotation by `deg` about `center`; positive angles turn +x towards +y.
    pub fn rotation_about(deg: f64, center: Point) -> Affine {
        let (s, c) = exact_sin_cos(deg);
        Affine {
            m: [
                [c, -s, center.x - c * center.x + s * center.y],
                [s, c, center.y - s * center.x - c * center.y],
            ],
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        let [[a, b, c], [d, e, f]] = self.m;
        Point::new(a * p.x + b * p.y + c, d * p.x + e * p.y + f)
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &Affine) -> Affine {
        let [[a, b, c], [d, e, f]] = self.m;
        let [[a2, b2, c2], [d2, e2, f2]] = other.m;
        Affine {
            m: [
                [a2 * a + b2 * d, a2 * b + b2 * e, a2 * c + b2 * f + c2],
                [d2 * a + e2 * d, d2 * b + e2 * e, d2 * c + e2 * f + f2],
            ],
        }
    }

    pub fn inverse(&self) -> Option<Affine> {
        let [[a, b, c], [d, e, f]] = self.m;
        let det = a * e - b * d;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let (ia, ib, id, ie) = (e / det, -b / det, -d / det, a / det);
        Some(Affine {
            m: [[ia, ib, -(ia * c + ib * f)], [id, ie, -(id * c + ie * f)]],
        })
    }
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90°.
pub fn exact_sin_cos(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        deg.to_radians().sin_cos()
    }
}

fn map_annotations(
    annotations: &[InstanceAnnotation],
    f: impl Fn(Point) -> Point,
) -> Result<Vec<InstanceAnnotation>> {
    annotations
        .iter()
        .map(|a| {
            Ok(InstanceAnnotation {
                scene_id: a.scene_id.clone(),
                category: a.category.clone(),
                polygon: a.polygon.map_points(&f)?,
            })
        })
        .collect()
}

/// Geometry of an aspect-preserving resize into a square canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizePadPlan {
    pub scale_factor: f64,
    pub content_width: u32,
    pub content_height: u32,
    pub pad_left: u32,
    pub pad_top: u32,
    pub pad_right: u32,
    pub pad_bottom: u32,
}

impl ResizePadPlan {
    /// Longer side scaled to `target`; padding split evenly with the odd
    /// pixel going to the bottom/right.
    pub fn new(width: u32, height: u32, target: u32) -> Result<Self> {
        if width == 0 || height == 0 || target == 0 {
            return Err(Error::InvalidDimensions { width, height });
        }
        let scale_factor = target as f64 / width.max(height) as f64;
        let scaled = |v: u32| ((v as f64 * scale_factor).round() as u32).clamp(1, target);
        let (cw, ch) = (scaled(width), scaled(height));
        let (pad_w, pad_h) = (target - cw, target - ch);
        Ok(ResizePadPlan {
            scale_factor,
            content_width: cw,
            content_height: ch,
            pad_left: pad_w / 2,
            pad_top: pad_h / 2,
            pad_right: pad_w - pad_w / 2,
            pad_bottom: pad_h - pad_h / 2,
        })
    }

    pub fn map_point(&self, p: Point) -> Point {
        Point::new(
            p.x * self.scale_factor + self.pad_left as f64,
            p.y * self.scale_factor + self.pad_top as f64,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ResizePadResult {
    pub image: RgbImage,
    pub plan: ResizePadPlan,
    pub annotations: Vec<InstanceAnnotation>,
}

/// Resizes to fit a `TARGET_SIZE` square without changing the aspect ratio
/// and pads the remainder with black.
pub fn resize_pad(image: &RgbImage, annotations: &[InstanceAnnotation]) -> Result<ResizePadResult> {
    let plan = ResizePadPlan::new(image.width(), image.height(), TARGET_SIZE)?;
    let content = if (plan.content_width, plan.content_height) == image.dimensions() {
        image.clone()
    } else {
        imageops::resize(
            image,
            plan.content_width,
            plan.content_height,
            imageops::FilterType::Triangle,
        )
    };
    let mut canvas = RgbImage::new(TARGET_SIZE, TARGET_SIZE);
    imageops::replace(
        &mut canvas,
        &content,
        plan.pad_left as i64,
        plan.pad_top as i64,
    );
    let annotations = map_annotations(annotations, |p| plan.map_point(p))?;
    Ok(ResizePadResult {
        image: canvas,
        plan,
        annotations,
    })
}

/// Loads the scene's image and runs [`resize_pad`] on it with the scene's
/// annotations.
pub fn resize_pad_scene(ds: &Dataset, scene: &Scene) -> Result<ResizePadResult> {
    let image = imaging::load_rgb(&ds.image_path(scene))?;
    let anns: Vec<InstanceAnnotation> = ds.annotations_for(&scene.id).cloned().collect();
    resize_pad(&image, &anns)
}

/// Rigid augmentation, composed as flip, then rotation about the image
/// center, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeomTransform {
    pub flip_h: bool,
    pub flip_v: bool,
    pub angle_deg: f64,
    pub dx: f64,
    pub dy: f64,
}

impl GeomTransform {
    pub fn affine(&self, width: u32, height: u32) -> Affine {
        let (w, h) = (width as f64, height as f64);
        let mut t = Affine::IDENTITY;
        if self.flip_h {
            t = t.then(&Affine {
                m: [[-1.0, 0.0, w], [0.0, 1.0, 0.0]],
            });
        }
        if self.flip_v {
            t = t.then(&Affine {
                m: [[1.0, 0.0, 0.0], [0.0, -1.0, h]],
            });
        }
        if self.angle_deg != 0.0 {
            t = t.then(&Affine::rotation_about(
                self.angle_deg,
                Point::new(w / 2.0, h / 2.0),
            ));
        }
        if self.dx != 0.0 || self.dy != 0.0 {
            t = t.then(&Affine::translation(self.dx, self.dy));
        }
        t
    }
}

/// Samples `img` at continuous position `(x, y)` (pixel centers at
/// half-integers). Positions outside the image are black.
fn sample_bilinear(img: &RgbImage, x: f64, y: f64) -> Rgb<u8> {
    let (w, h) = img.dimensions();
    if !(x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64) {
        return Rgb([0, 0, 0]);
    }
    let (u, v) = (x - 0.5, y - 0.5);
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let clamp_x = |i: f64| i.clamp(0.0, (w - 1) as f64) as u32;
    let clamp_y = |i: f64| i.clamp(0.0, (h - 1) as f64) as u32;
    let (xa, xb, ya, yb) = (
        clamp_x(x0),
        clamp_x(x0 + 1.0),
        clamp_y(y0),
        clamp_y(y0 + 1.0),
    );
    let (p00, p10, p01, p11) = (
        img.get_pixel(xa, ya).0,
        img.get_pixel(xb, ya).0,
        img.get_pixel(xa, yb).0,
        img.get_pixel(xb, yb).0,
    );
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
    }
    Rgb(out)
}

/// Warps the image by inverse mapping and maps the annotations forward.
pub fn apply_geometric(
    image: &RgbImage,
    annotations: &[InstanceAnnotation],
    t: &GeomTransform,
) -> Result<(RgbImage, Vec<InstanceAnnotation>)> {
    let (w, h) = image.dimensions();
    let fwd = t.affine(w, h);
    let inv = fwd.inverse().expect("rigid transforms are invertible");
    let out = if fwd == Affine::IDENTITY {
        image.clone()
    } else {
        RgbImage::from_fn(w, h, |i, j| {
            let src = inv.apply(Point::new(i as f64 + 0.5, j as f64 + 0.5));
            sample_bilinear(image, src.x, src.y)
        })
    };
    let anns = map_annotations(annotations, |p| fwd.apply(p))?;
    Ok((out, anns))
}

/// Hue rotation and saturation scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorJitter {
    pub hue_delta: f64,
    pub sat_factor: f64,
}

impl Default for ColorJitter {
    fn default() -> Self {
        ColorJitter {
            hue_delta: 0.0,
            sat_factor: 1.0,
        }
    }
}

impl ColorJitter {
    pub fn new(hue_delta: f64, sat_factor: f64) -> Result<Self> {
        if !(-180.0..=180.0).contains(&hue_delta) {
            return Err(Error::InvalidConfig(format!(
                "hue delta {hue_delta} outside [-180, 180]"
            )));
        }
        if !(sat_factor > 0.0 && sat_factor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "saturation factor {sat_factor} must be positive"
            )));
        }
        Ok(ColorJitter {
            hue_delta,
            sat_factor,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.hue_delta == 0.0 && self.sat_factor == 1.0
    }
}

/// `(h in [0, 360), s, v)` with `s, v` in `[0, 1]`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|c| c as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Rotates hue and scales saturation per pixel; value is untouched.
/// Gray pixels (zero saturation) are left as they are.
pub fn apply_color(image: &RgbImage, j: &ColorJitter) -> RgbImage {
    if j.is_identity() {
        return image.clone();
    }
    let mut out = image.clone();
    for px in out.pixels_mut() {
        let (h, s, v) = rgb_to_hsv(px.0);
        if s == 0.0 {
            continue;
        }
        let h2 = (h + j.hue_delta).rem_euclid(360.0);
        let s2 = (s * j.sat_factor).clamp(0.0, 1.0);
        px.0 = hsv_to_rgb(h2, s2, v);
    }
    out
}

/// Parameter ranges for random augmentation. `flip_h`/`flip_v` enable a
/// coin-flip for the respective mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub flip_h: bool,
    pub flip_v: bool,
    pub rot_deg: [f64; 2],
    pub trans_px: [f64; 2],
    pub hue_deg: [f64; 2],
    pub sat: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_h: true,
            flip_v: true,
            rot_deg: [-15.0, 15.0],
            trans_px: [-64.0, 64.0],
            hue_deg: [-18.0, 18.0],
            sat: [0.8, 1.25],
        }
    }
}

impl AugmentConfig {
    /// A config whose every draw is the identity.
    pub fn identity() -> Self {
        AugmentConfig {
            flip_h: false,
            flip_v: false,
            rot_deg: [0.0, 0.0],
            trans_px: [0.0, 0.0],
            hue_deg: [0.0, 0.0],
            sat: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, [lo, hi]: [f64; 2]| {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "{name} range [{lo}, {hi}] is empty or inverted"
                )));
            }
            Ok(())
        };
        check("rot_deg", self.rot_deg)?;
        check("trans_px", self.trans_px)?;
        check("hue_deg", self.hue_deg)?;
        check("sat", self.sat)?;
        if self.hue_deg[0] < -180.0 || self.hue_deg[1] > 180.0 {
            return Err(Error::InvalidConfig(
                "hue_deg must lie in [-180, 180]".into(),
            ));
        }
        if self.sat[0] <= 0.0 {
            return Err(Error::InvalidConfig("sat must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: AugmentConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Draws one parameter set. Deterministic in `seed`.
    pub fn sample(&self, seed: u64) -> Result<(GeomTransform, ColorJitter)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |[lo, hi]: [f64; 2]| lo + (hi - lo) * rng.gen::<f64>();
        let flip_h_draw = uniform([0.0, 1.0]) < 0.5;
        let flip_v_draw = uniform([0.0, 1.0]) < 0.5;
        let geom = GeomTransform {
            flip_h: self.flip_h && flip_h_draw,
            flip_v: self.flip_v && flip_v_draw,
            angle_deg: uniform(self.rot_deg),
            dx: uniform(self.trans_px),
            dy: uniform(self.trans_px),
        };
        let jitter = ColorJitter::new(uniform(self.hue_deg), uniform(self.sat))?;
        Ok((geom, jitter))
    }
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub image: RgbImage,
    pub annotations: Vec<InstanceAnnotation>,
    pub transform: GeomTransform,
    pub jitter: ColorJitter,
}

/// Samples parameters from `config` with `seed`, then applies the geometric
/// transform followed by the color jitter.
pub fn augment(
    image: &RgbImage,
    annotations: &[InstanceAnnotation],
    config: &AugmentConfig,
    seed: u64,
) -> Result<Augmented> {
    let (transform, jitter) = config.sample(seed)?;
    let (warped, annotations) = apply_geometric(image, annotations, &transform)?;
    Ok(Augmented {
        image: apply_color(&warped, &jitter),
        annotations,
        transform,
        jitter,
    })
}
