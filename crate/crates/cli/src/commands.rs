use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use slumkit_core::change::{detect_change, scene_union_mask, ChangeResult};
use slumkit_core::dataset::{
    self, detections_to_json, gt_masks, load_dataset, parse_detections, read_file, Dataset,
    Detection, Scene,
};
use slumkit_core::geometry::{rasterize_union, RleMask};
use slumkit_core::imaging;
use slumkit_core::losses::{gradcheck, random_interior_sample, LossKind};
use slumkit_core::metrics::{evaluate as run_evaluation, EvalParams};
use slumkit_core::numfmt::round_sig6;
use slumkit_core::synth::{write_corpus, SynthConfig};
use slumkit_core::transforms::{self, AugmentConfig, ColorJitter, GeomTransform};
use slumkit_core::{Error, RasterMask};

use crate::{AugmentArgs, ChangeArgs, EvaluateArgs, LosscheckArgs, RasterizeArgs, SynthArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Fails unless `path` can be created: its parent must be an existing
/// directory.
fn check_output_file(path: &Path) -> CliResult {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "parent directory does not exist",
            ),
        )
        .into());
    }
    if path.is_dir() {
        return Err(Error::io(path, std::io::Error::other("is a directory")).into());
    }
    Ok(())
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult {
    let mut body = text.to_string();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Scene ids become file names, so they must be plain path components.
fn check_file_stem(id: &str) -> CliResult {
    let bad = id.is_empty()
        || id == "."
        || id == ".."
        || id.chars().any(|c| matches!(c, '/' | '\\' | '\0'));
    if bad {
        return Err(CliError::Usage(format!(
            "scene id {id:?} cannot be used as a file name"
        )));
    }
    Ok(())
}

fn check_unit_interval(name: &str, v: f64, allow_zero: bool) -> CliResult {
    let ok = v.is_finite() && v <= 1.0 && (v > 0.0 || (allow_zero && v == 0.0));
    if !ok {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        return Err(CliError::Usage(format!(
            "{name} must lie in {range}, got {v}"
        )));
    }
    Ok(())
}

pub fn rasterize(a: &RasterizeArgs) -> CliResult {
    let ds = load_dataset(&a.gt)?;
    for s in ds.scenes() {
        check_file_stem(&s.id)?;
    }
    if let Some(p) = &a.as_predictions {
        check_output_file(p)?;
    }
    let per_scene: Vec<(&Scene, Vec<RasterMask>)> = ds
        .scenes()
        .par_iter()
        .map(|s| gt_masks(&ds, &s.id).map(|m| (s, m)))
        .collect::<Result<_, _>>()?;

    create_dir(&a.out)?;
    let mut preds = Vec::new();
    let mut written = 0usize;
    for (scene, masks) in &per_scene {
        for (k, m) in masks.iter().enumerate() {
            imaging::save_mask(m, &a.out.join(format!("{}_{k:03}.png", scene.id)))?;
            written += 1;
            preds.push(Detection {
                scene_id: scene.id.clone(),
                category: dataset::SLUM.to_string(),
                score: 1.0,
                mask: RleMask::encode(m),
            });
        }
    }
    if let Some(p) = &a.as_predictions {
        write_text(p, &detections_to_json(&preds))?;
    }
    println!(
        "wrote {written} masks for {} scenes to {}",
        per_scene.len(),
        a.out.display()
    );
    Ok(())
}

/// Per-scene seed: the run seed mixed with the scene's position.
fn scene_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Serialize)]
struct AugmentRecord {
    scene_id: String,
    seed: u64,
    flip_h: bool,
    flip_v: bool,
    angle_deg: f64,
    dx: f64,
    dy: f64,
    hue_delta: f64,
    sat_factor: f64,
}

impl AugmentRecord {
    fn new(scene_id: &str, seed: u64, t: &GeomTransform, j: &ColorJitter) -> Self {
        AugmentRecord {
            scene_id: scene_id.to_string(),
            seed,
            flip_h: t.flip_h,
            flip_v: t.flip_v,
            angle_deg: round_sig6(t.angle_deg),
            dx: round_sig6(t.dx),
            dy: round_sig6(t.dy),
            hue_delta: round_sig6(j.hue_delta),
            sat_factor: round_sig6(j.sat_factor),
        }
    }
}

pub fn augment(a: &AugmentArgs) -> CliResult {
    let ds = load_dataset(&a.gt)?;
    let cfg = match &a.config {
        Some(p) => AugmentConfig::from_json_slice(&read_file(p)?)?,
        None => AugmentConfig::default(),
    };
    for s in ds.scenes() {
        check_file_stem(&s.id)?;
    }

    let results: Vec<_> = ds
        .scenes()
        .par_iter()
        .enumerate()
        .map(|(i, scene)| -> CliResult<_> {
            let seed = scene_seed(a.seed, i);
            let (image, anns) = if a.no_resize {
                let img = imaging::load_rgb(&ds.image_path(scene))?;
                (
                    img,
                    ds.annotations_for(&scene.id).cloned().collect::<Vec<_>>(),
                )
            } else {
                let r = transforms::resize_pad_scene(&ds, scene)?;
                (r.image, r.annotations)
            };
            let out = transforms::augment(&image, &anns, &cfg, seed)?;
            let record = AugmentRecord::new(&scene.id, seed, &out.transform, &out.jitter);
            let new_scene = Scene {
                image_path: format!("images/{}.png", scene.id),
                width: out.image.width(),
                height: out.image.height(),
                ..scene.clone()
            };
            Ok((new_scene, out.image, out.annotations, record))
        })
        .collect::<CliResult<_>>()?;

    let mut scenes = Vec::new();
    let mut anns = Vec::new();
    let mut records = Vec::new();
    for (s, _, a_, r) in &results {
        scenes.push(s.clone());
        anns.extend(a_.iter().cloned());
        records.push(r);
    }
    let out_ds = Dataset::new(scenes, anns, ds.split())?;

    let images_dir = a.out.join("images");
    create_dir(&images_dir)?;
    for (s, img, _, _) in &results {
        imaging::save_rgb(img, &images_dir.join(format!("{}.png", s.id)))?;
    }
    out_ds.save(&a.out.join("dataset.json"))?;
    let params = serde_json::to_string_pretty(&records).expect("records serialize");
    write_text(&a.out.join("params.json"), &params)?;
    println!(
        "augmented {} scenes into {}",
        results.len(),
        a.out.display()
    );
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    check_unit_interval("--iou-thresh", a.iou_thresh, false)?;
    check_unit_interval("--score-floor", a.score_floor, true)?;
    let ds = load_dataset(&a.gt)?;
    let preds = dataset::load_predictions(&a.pred, &ds)?;
    for p in std::iter::once(&a.out).chain(&a.csv).chain(&a.pr_csv) {
        check_output_file(p)?;
    }
    let params = EvalParams {
        iou_threshold: a.iou_thresh,
        score_floor: a.score_floor,
    };
    let report = run_evaluation(&ds, &preds, &params)?;

    write_text(&a.out, &report.to_json())?;
    if let Some(p) = &a.csv {
        write_text(p, &report.to_csv())?;
    }
    if let Some(p) = &a.pr_csv {
        write_text(p, &report.curve.to_csv())?;
    }
    println!("{}", report.summary());
    Ok(())
}

/// One epoch's input for `change`.
enum Epoch {
    Predictions(Vec<Detection>),
    GroundTruth(Dataset),
}

impl Epoch {
    fn load(path: &Path) -> CliResult<Self> {
        let bytes = read_file(path)?;
        let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
        match first {
            Some(b'[') => Ok(Epoch::Predictions(parse_detections(&bytes)?)),
            Some(b'{') => {
                let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok(Epoch::GroundTruth(
                    Dataset::from_json_slice(&bytes)?.with_root(root),
                ))
            }
            _ => Err(Error::Parse(format!(
                "{}: expected a prediction list or a dataset object",
                path.display()
            ))
            .into()),
        }
    }

    fn dims(&self, scene: &str) -> CliResult<Option<(u32, u32)>> {
        Ok(match self {
            Epoch::Predictions(d) => d
                .iter()
                .find(|d| d.scene_id == scene)
                .map(|d| d.mask.dims()),
            Epoch::GroundTruth(ds) => {
                let s = ds.scene(scene)?;
                Some((s.width, s.height))
            }
        })
    }

    fn union(&self, scene: &str, floor: f64, (w, h): (u32, u32)) -> CliResult<RasterMask> {
        Ok(match self {
            Epoch::Predictions(d) => {
                let mine: Vec<Detection> =
                    d.iter().filter(|d| d.scene_id == scene).cloned().collect();
                scene_union_mask(&mine, floor, w, h)?
            }
            Epoch::GroundTruth(ds) => {
                let polys: Vec<_> = ds.annotations_for(scene).map(|a| &a.polygon).collect();
                rasterize_union(polys, w, h)?
            }
        })
    }
}

pub fn change(a: &ChangeArgs) -> CliResult {
    check_unit_interval("--score-floor", a.score_floor, true)?;
    let scene_after = a.scene_after.as_deref().unwrap_or(&a.scene);
    let (before, after) = rayon::join(|| Epoch::load(&a.before), || Epoch::load(&a.after));
    let (before, after) = (before?, after?);
    for p in a.map.iter().chain(&a.out) {
        check_output_file(p)?;
    }

    let db = before.dims(&a.scene)?;
    let da = after.dims(scene_after)?;
    let dims = match (db, da) {
        (Some(x), Some(y)) if x != y => {
            return Err(Error::DimensionMismatch { left: x, right: y }.into());
        }
        (Some(x), _) | (None, Some(x)) => x,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "scene '{}' has no detections in either input, so its size is unknown",
                a.scene
            )));
        }
    };
    let (mb, ma) = rayon::join(
        || before.union(&a.scene, a.score_floor, dims),
        || after.union(scene_after, a.score_floor, dims),
    );
    let result: ChangeResult = detect_change(&mb?, &ma?)?;

    if let Some(p) = &a.map {
        result.change_map.save_png(p)?;
    }
    if let Some(p) = &a.out {
        write_text(p, &result.to_json())?;
    }
    println!("before_px: {}", result.area_before);
    println!("after_px: {}", result.area_after);
    println!("percent: {}", result.percent_display());
    println!("status: {}", result.status.as_str());
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult {
    let cfg = match &a.config {
        Some(p) => SynthConfig::from_json_slice(&read_file(p)?)?,
        None => SynthConfig::default(),
    };
    cfg.validate()?;
    create_dir(&a.out)?;
    let paths = write_corpus(&cfg, a.seed, &a.out)?;
    println!(
        "wrote {} scenes to {}",
        cfg.n_scenes,
        paths.dataset.display()
    );
    if let Some(p) = paths.dataset_after {
        println!("later epoch: {}", p.display());
    }
    Ok(())
}

pub fn losscheck(a: &LosscheckArgs) -> CliResult {
    use rand::SeedableRng;

    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    if !(a.step > 0.0 && a.step < 1e-2) {
        return Err(CliError::Usage(format!(
            "--step must lie in (0, 0.01), got {}",
            a.step
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let samples: Vec<_> = (0..a.trials)
        .map(|_| random_interior_sample(&mut rng))
        .collect();

    println!(
        "{:<10} {:>7}  {:>12}  result",
        "loss", "trials", "max_rel_err"
    );
    let mut failures = 0;
    for kind in LossKind::ALL {
        let errs = samples
            .par_iter()
            .map(|s| gradcheck(kind, s, a.step))
            .collect::<Result<Vec<f64>, _>>()?;
        let worst = errs.into_iter().fold(0.0f64, f64::max);
        let pass = worst <= a.tol;
        if !pass {
            failures += 1;
        }
        println!(
            "{:<10} {:>7}  {:>12.3e}  {}",
            kind.name(),
            a.trials,
            worst,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failures > 0 {
        return Err(CliError::ChecksFailed(failures));
    }
    Ok(())
}
