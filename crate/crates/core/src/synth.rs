//! Seeded generator of labeled synthetic scenes.
//!
//! Instances are star-convex polygons (sorted angles, positive radii), so
//! they are always simple. Images are a smooth low-frequency background with
//! high-frequency speckle inside the instances, standing in for the dense
//! roof texture of informal settlements.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, InstanceAnnotation, Scale, Scene, Split, SLUM};
use crate::error::{Error, Result};
use crate::geometry::{rasterize_union, Point, Polygon};
use crate::imaging;

/// Minimum excess of mean local variance inside instances over outside, per
/// unit of `texture_contrast` (squared 8-bit intensity).
pub const TEXTURE_VARIANCE_MARGIN: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    pub n_instances: [u32; 2],
    pub vertices_per_instance: [u32; 2],
    pub instance_radius: [f64; 2],
    pub texture_contrast: f64,
    /// Area multiplier between the two epochs of a pair.
    pub growth_factor: f64,
    /// Scenes written by [`write_corpus`].
    pub n_scenes: u32,
    /// Also emit the later epoch of every scene.
    pub pairs: bool,
    pub scale: Scale,
    pub capture_year: i32,
    pub after_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 256,
            height: 256,
            n_instances: [1, 4],
            vertices_per_instance: [6, 14],
            instance_radius: [12.0, 40.0],
            texture_contrast: 0.6,
            growth_factor: 1.0,
            n_scenes: 4,
            pairs: false,
            scale: Scale::Scale100m,
            capture_year: 2005,
            after_year: 2018,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        if self.n_instances[0] > self.n_instances[1] {
            return bad("n_instances range is inverted".into());
        }
        let [vlo, vhi] = self.vertices_per_instance;
        if vlo < 3 || vlo > vhi {
            return bad(format!(
                "vertices_per_instance [{vlo}, {vhi}] needs 3 <= lo <= hi"
            ));
        }
        let [rlo, rhi] = self.instance_radius;
        let half = self.width.min(self.height) as f64 / 2.0;
        if !(rlo > 0.0 && rlo <= rhi && rhi < half) {
            return bad(format!(
                "instance_radius [{rlo}, {rhi}] must satisfy 0 < lo <= hi < {half}"
            ));
        }
        if !(0.0..=1.0).contains(&self.texture_contrast) {
            return bad(format!(
                "texture_contrast {} outside [0, 1]",
                self.texture_contrast
            ));
        }
        if !(self.growth_factor > 0.0 && self.growth_factor.is_finite()) {
            return bad(format!(
                "growth_factor {} must be positive",
                self.growth_factor
            ));
        }
        Ok(())
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: SynthConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub image: RgbImage,
    pub annotations: Vec<InstanceAnnotation>,
}

/// Seeds for the independent random streams of one scene.
struct Streams {
    layout: u64,
    background: u64,
    speckle_before: u64,
    speckle_after: u64,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Streams {
            layout: rng.gen(),
            background: rng.gen(),
            speckle_before: rng.gen(),
            speckle_after: rng.gen(),
        }
    }
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn star_polygon(cfg: &SynthConfig, rng: &mut impl Rng) -> Polygon {
    let [vlo, vhi] = cfg.vertices_per_instance;
    let n = rng.gen_range(vlo..=vhi) as usize;
    let r_max = cfg.instance_radius[1];
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    // keep the grown outline inside the frame where the frame allows it
    let reach = r_max * cfg.growth_factor.sqrt().max(1.0);
    let center_range = |size: f64| {
        let m = reach.min(size / 2.0);
        [m, size - m]
    };
    let center = Point::new(uniform(rng, center_range(w)), uniform(rng, center_range(h)));
    let step = TAU / n as f64;
    let phase = rng.gen::<f64>() * TAU;
    let vertices: Vec<Point> = (0..n)
        .map(|i| {
            let angle = phase + step * (i as f64 + 0.8 * (rng.gen::<f64>() - 0.5));
            let r = uniform(rng, cfg.instance_radius);
            Point::new(center.x + r * angle.cos(), center.y + r * angle.sin())
        })
        .collect();
    Polygon::new(vertices).expect("distinct angles and positive radii give distinct vertices")
}

fn layout(cfg: &SynthConfig, seed: u64) -> Vec<Polygon> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lo, hi] = cfg.n_instances;
    let n = rng.gen_range(lo..=hi);
    (0..n).map(|_| star_polygon(cfg, &mut rng)).collect()
}

/// Smooth background plus speckle inside `polygons`.
fn render(
    cfg: &SynthConfig,
    polygons: &[Polygon],
    background_seed: u64,
    speckle_seed: u64,
) -> RgbImage {
    let (w, h) = (cfg.width, cfg.height);
    let mut bg_rng = ChaCha8Rng::seed_from_u64(background_seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                bg_rng.gen_range(0.5..2.0) * TAU / w as f64,
                bg_rng.gen_range(0.5..2.0) * TAU / h as f64,
                bg_rng.gen::<f64>() * TAU,
                bg_rng.gen_range(6.0..14.0),
            )
        })
        .collect();
    let base = [
        bg_rng.gen_range(90.0..130.0),
        bg_rng.gen_range(105.0..140.0),
        bg_rng.gen_range(80.0..115.0),
    ];
    let mask = rasterize_union(polygons, w, h).expect("validated dims");
    let amplitude = 80.0 * cfg.texture_contrast.sqrt();
    let mut sp_rng = ChaCha8Rng::seed_from_u64(speckle_seed);

    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let smooth: f64 = waves
                .iter()
                .map(|&(kx, ky, ph, amp)| amp * (kx * fx + ky * fy + ph).sin())
                .sum();
            // one draw per pixel keeps the stream aligned across layouts
            let noise = uniform(&mut sp_rng, [-1.0, 1.0]);
            let (tint, speckle) = if mask.get(x, y) {
                ([25.0, 5.0, -10.0], amplitude * noise)
            } else {
                ([0.0; 3], 0.0)
            };
            let px = [0, 1, 2].map(|c| {
                (base[c] + smooth + tint[c] + speckle)
                    .round()
                    .clamp(0.0, 255.0) as u8
            });
            img.put_pixel(x, y, Rgb(px));
        }
    }
    img
}

fn annotations(scene_id: &str, polygons: Vec<Polygon>) -> Vec<InstanceAnnotation> {
    polygons
        .into_iter()
        .map(|polygon| InstanceAnnotation {
            scene_id: scene_id.to_string(),
            category: SLUM.to_string(),
            polygon,
        })
        .collect()
}

/// One labeled scene; deterministic in `(cfg, seed)`.
pub fn generate_scene(cfg: &SynthConfig, seed: u64, scene_id: &str) -> Result<SynthScene> {
    cfg.validate()?;
    let streams = Streams::new(seed);
    let polygons = layout(cfg, streams.layout);
    let image = render(cfg, &polygons, streams.background, streams.speckle_before);
    Ok(SynthScene {
        image,
        annotations: annotations(scene_id, polygons),
    })
}

/// Scales every polygon about its centroid by `sqrt(growth_factor)` and
/// clips it to the frame; instances that vanish are dropped.
pub fn grow_polygons(
    polygons: &[Polygon],
    growth_factor: f64,
    width: u32,
    height: u32,
) -> Vec<Polygon> {
    let k = growth_factor.sqrt();
    polygons
        .iter()
        .filter_map(|p| {
            let c = p.centroid();
            let grown = p
                .map_points(|v| Point::new(c.x + k * (v.x - c.x), c.y + k * (v.y - c.y)))
                .ok()?;
            grown.clip_to_rect(width as f64, height as f64)
        })
        .collect()
}

/// The same location at two epochs: the later scene's instances are the
/// earlier ones grown by `growth_factor` in area. The background is shared.
pub fn generate_pair(
    cfg: &SynthConfig,
    seed: u64,
    scene_id: &str,
) -> Result<(SynthScene, SynthScene)> {
    cfg.validate()?;
    let streams = Streams::new(seed);
    let before = layout(cfg, streams.layout);
    let after = if cfg.growth_factor == 1.0 {
        before.clone()
    } else {
        grow_polygons(&before, cfg.growth_factor, cfg.width, cfg.height)
    };
    let image_before = render(cfg, &before, streams.background, streams.speckle_before);
    let image_after = render(cfg, &after, streams.background, streams.speckle_after);
    Ok((
        SynthScene {
            image: image_before,
            annotations: annotations(scene_id, before),
        },
        SynthScene {
            image: image_after,
            annotations: annotations(scene_id, after),
        },
    ))
}

pub fn scene_id(index: u32) -> String {
    format!("scene_{index:04}")
}

/// Earlier-epoch dataset, optional later epoch, and images keyed by
/// relative path.
pub type Corpus = (Dataset, Option<Dataset>, Vec<(String, RgbImage)>);

/// Files written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub dataset: PathBuf,
    pub dataset_after: Option<PathBuf>,
}

/// Builds the in-memory corpus: the earlier-epoch dataset and, with
/// `cfg.pairs`, the later one, plus the rendered images keyed by relative
/// path.
pub fn build_corpus(cfg: &SynthConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..cfg.n_scenes).map(|_| rng.gen()).collect();
    let mut images = Vec::new();
    let (mut scenes, mut anns) = (Vec::new(), Vec::new());
    let (mut scenes_after, mut anns_after) = (Vec::new(), Vec::new());
    for (i, &s) in seeds.iter().enumerate() {
        let id = scene_id(i as u32);
        let scene = |dir: &str, year: i32| Scene {
            id: id.clone(),
            image_path: format!("{dir}/{id}.png"),
            width: cfg.width,
            height: cfg.height,
            scale: cfg.scale,
            capture_year: year,
        };
        if cfg.pairs {
            let (b, a) = generate_pair(cfg, s, &id)?;
            scenes.push(scene("images", cfg.capture_year));
            scenes_after.push(scene("images_after", cfg.after_year));
            images.push((format!("images/{id}.png"), b.image));
            images.push((format!("images_after/{id}.png"), a.image));
            anns.extend(b.annotations);
            anns_after.extend(a.annotations);
        } else {
            let b = generate_scene(cfg, s, &id)?;
            scenes.push(scene("images", cfg.capture_year));
            images.push((format!("images/{id}.png"), b.image));
            anns.extend(b.annotations);
        }
    }
    let before = Dataset::new(scenes, anns, Split::Test)?;
    let after = if cfg.pairs {
        Some(Dataset::new(scenes_after, anns_after, Split::Test)?)
    } else {
        None
    };
    Ok((before, after, images))
}

/// Writes `dataset.json` (and `dataset_after.json` for pairs) with PNG
/// images under `out`.
pub fn write_corpus(cfg: &SynthConfig, seed: u64, out: &Path) -> Result<CorpusPaths> {
    let (before, after, images) = build_corpus(cfg, seed)?;
    for dir in ["images", "images_after"] {
        if images
            .iter()
            .any(|(p, _)| p.starts_with(dir) && p[dir.len()..].starts_with('/'))
        {
            let d = out.join(dir);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    for (rel, img) in &images {
        imaging::save_rgb(img, &out.join(rel))?;
    }
    let dataset = out.join("dataset.json");
    before.save(&dataset)?;
    let dataset_after = match after {
        Some(a) => {
            let p = out.join("dataset_after.json");
            a.save(&p)?;
            Some(p)
        }
        None => None,
    };
    Ok(CorpusPaths {
        dataset,
        dataset_after,
    })
}
