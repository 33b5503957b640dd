//! Datasets of scenes with ground-truth polygons, and externally produced
//! predictions.
//!
//! Both travel as JSON. A dataset file looks like
//!
//! ```json
//! {"scenes": [{"id": "s1", "image_path": "images/s1.png", "width": 1280,
//!              "height": 720, "scale": "100m", "capture_year": 2018}],
//!  "annotations": [{"scene_id": "s1", "category": "slum",
//!                   "polygon": [[0, 0], [4, 0], [4, 3]]}],
//!  "split": "test"}
//! ```
//!
//! and a prediction file is a list of
//! `{"scene_id", "category", "score", "mask": {"width", "height", "runs"}}`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rasterize_polygon, Point, Polygon, RasterMask, RleMask};

/// The category every annotation in this corpus carries.
pub const SLUM: &str = "slum";

/// Viewing scale of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scale {
    #[serde(rename = "100m")]
    Scale100m,
    #[serde(rename = "1000m")]
    Scale1000m,
}

impl Scale {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scale::Scale100m => "100m",
            Scale::Scale1000m => "1000m",
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "100m" => Ok(Scale::Scale100m),
            "1000m" => Ok(Scale::Scale1000m),
            other => Err(format!(
                "bad scale tag '{other}' (expected \"100m\" or \"1000m\")"
            )),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One satellite image and its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub image_path: String,
    pub width: u32,
    pub height: u32,
    pub scale: Scale,
    pub capture_year: i32,
}

/// A ground-truth instance outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAnnotation {
    pub scene_id: String,
    pub category: String,
    pub polygon: Polygon,
}

/// A scored predicted instance mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub scene_id: String,
    pub category: String,
    pub score: f64,
    pub mask: RleMask,
}

#[derive(Debug, Clone, Serialize)]
pub struct Dataset {
    scenes: Vec<Scene>,
    annotations: Vec<InstanceAnnotation>,
    split: Split,
    #[serde(skip)]
    scene_index: HashMap<String, usize>,
    #[serde(skip)]
    root: Option<PathBuf>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.scenes == other.scenes
            && self.annotations == other.annotations
            && self.split == other.split
    }
}

#[derive(Deserialize)]
struct RawScene {
    id: String,
    image_path: String,
    width: u32,
    height: u32,
    scale: String,
    capture_year: i32,
}

#[derive(Deserialize)]
struct RawAnnotation {
    scene_id: String,
    #[serde(default = "default_category")]
    category: String,
    polygon: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct RawDataset {
    scenes: Vec<RawScene>,
    #[serde(default)]
    annotations: Vec<RawAnnotation>,
    split: String,
}

#[derive(Deserialize)]
struct RawRle {
    width: u32,
    height: u32,
    runs: Vec<u64>,
}

#[derive(Deserialize)]
struct RawDetection {
    scene_id: String,
    #[serde(default = "default_category")]
    category: String,
    score: f64,
    mask: RawRle,
}

fn default_category() -> String {
    SLUM.to_string()
}

/// Reads a whole file, mapping failures to [`Error::Io`].
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

impl Dataset {
    /// Builds and validates a dataset from parts.
    pub fn new(
        scenes: Vec<Scene>,
        annotations: Vec<InstanceAnnotation>,
        split: Split,
    ) -> Result<Self> {
        let mut scene_index = HashMap::with_capacity(scenes.len());
        for (i, s) in scenes.iter().enumerate() {
            if s.id.is_empty() {
                return Err(Error::validation("scene", i, "empty scene id"));
            }
            if s.width == 0 || s.height == 0 {
                return Err(Error::validation(
                    "scene",
                    i,
                    format!("invalid dimensions {}x{}", s.width, s.height),
                ));
            }
            if scene_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::validation(
                    "scene",
                    i,
                    format!("duplicate scene id '{}'", s.id),
                ));
            }
        }
        for (i, a) in annotations.iter().enumerate() {
            if !scene_index.contains_key(&a.scene_id) {
                return Err(Error::validation(
                    "annotation",
                    i,
                    format!("unknown scene id '{}'", a.scene_id),
                ));
            }
        }
        Ok(Dataset {
            scenes,
            annotations,
            split,
            scene_index,
            root: None,
        })
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let raw: RawDataset = serde_json::from_slice(bytes).map_err(parse_error)?;
        let split = match raw.split.as_str() {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::validation(
                    "dataset",
                    0,
                    format!("bad split '{other}' (expected \"train\" or \"test\")"),
                ))
            }
        };
        let scenes = raw
            .scenes
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let scale = s
                    .scale
                    .parse()
                    .map_err(|e| Error::validation("scene", i, e))?;
                Ok(Scene {
                    id: s.id,
                    image_path: s.image_path,
                    width: s.width,
                    height: s.height,
                    scale,
                    capture_year: s.capture_year,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let annotations = raw
            .annotations
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let polygon =
                    Polygon::new(a.polygon.into_iter().map(Point::from)).map_err(|e| match e {
                        Error::InvalidPolygon(msg) => Error::validation("annotation", i, msg),
                        other => other,
                    })?;
                Ok(InstanceAnnotation {
                    scene_id: a.scene_id,
                    category: a.category,
                    polygon,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(scenes, annotations, split)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serializes")
    }

    /// Writes the dataset as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json_string();
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn annotations(&self) -> &[InstanceAnnotation] {
        &self.annotations
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn scene(&self, id: &str) -> Result<&Scene> {
        self.scene_index
            .get(id)
            .map(|&i| &self.scenes[i])
            .ok_or_else(|| Error::UnknownScene(id.to_string()))
    }

    pub fn scene_position(&self, id: &str) -> Option<usize> {
        self.scene_index.get(id).copied()
    }

    /// Annotations of one scene, in file order.
    pub fn annotations_for<'a>(
        &'a self,
        scene_id: &'a str,
    ) -> impl Iterator<Item = &'a InstanceAnnotation> + 'a {
        self.annotations
            .iter()
            .filter(move |a| a.scene_id == scene_id)
    }

    /// Directory image paths are resolved against, if loaded from disk.
    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    pub fn image_path(&self, scene: &Scene) -> PathBuf {
        match &self.root {
            Some(root) => root.join(&scene.image_path),
            None => PathBuf::from(&scene.image_path),
        }
    }
}

/// Reads and validates a dataset file. Relative image paths resolve against
/// the file's directory.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    let ds = Dataset::from_json_slice(&bytes)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(ds.with_root(root))
}

/// One rasterized mask per annotation of `scene_id`, in annotation order.
pub fn gt_masks(ds: &Dataset, scene_id: &str) -> Result<Vec<RasterMask>> {
    let scene = ds.scene(scene_id)?;
    ds.annotations_for(scene_id)
        .map(|a| rasterize_polygon(&a.polygon, scene.width, scene.height))
        .collect()
}

/// Parses a prediction list, checking scores and RLE structure but not
/// scene membership.
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<Detection>> {
    let raw: Vec<RawDetection> = serde_json::from_slice(bytes).map_err(parse_error)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, d)| {
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::validation(
                    "prediction",
                    i,
                    format!("score {} outside [0, 1]", d.score),
                ));
            }
            let mask = RleMask::new(d.mask.width, d.mask.height, d.mask.runs).map_err(|e| {
                Error::InPrediction {
                    index: i,
                    scene_id: d.scene_id.clone(),
                    source: Box::new(e),
                }
            })?;
            Ok(Detection {
                scene_id: d.scene_id,
                category: d.category,
                score: d.score,
                mask,
            })
        })
        .collect()
}

/// Checks every detection against its scene in `ds`.
pub fn validate_detections(dets: &[Detection], ds: &Dataset) -> Result<()> {
    for (i, d) in dets.iter().enumerate() {
        let scene = ds.scene(&d.scene_id).map_err(|_| {
            Error::validation(
                "prediction",
                i,
                format!("unknown scene id '{}'", d.scene_id),
            )
        })?;
        if d.mask.dims() != (scene.width, scene.height) {
            return Err(Error::validation(
                "prediction",
                i,
                format!(
                    "mask is {}x{} but scene '{}' is {}x{}",
                    d.mask.width(),
                    d.mask.height(),
                    scene.id,
                    scene.width,
                    scene.height
                ),
            ));
        }
    }
    Ok(())
}

pub fn parse_predictions(bytes: &[u8], ds: &Dataset) -> Result<Vec<Detection>> {
    let dets = parse_detections(bytes)?;
    validate_detections(&dets, ds)?;
    Ok(dets)
}

/// Reads a prediction file and validates it against `ds`.
pub fn load_predictions(path: &Path, ds: &Dataset) -> Result<Vec<Detection>> {
    parse_predictions(&read_file(path)?, ds)
}

pub fn detections_to_json(dets: &[Detection]) -> String {
    serde_json::to_string_pretty(dets).expect("detections serialize")
}
