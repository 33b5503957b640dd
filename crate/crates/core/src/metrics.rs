//! Mask IoU, greedy detection matching, precision–recall and AP₅₀.
//!
//! Matching follows the usual COCO-family rule: detections are visited in
//! descending score order (ties by input order) and each one claims the
//! still-unmatched ground truth with the highest IoU, provided that IoU
//! reaches the threshold. AP is the area under the monotone precision
//! envelope evaluated at every recall point (no 101-point sampling).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{gt_masks, Dataset, Detection};
use crate::error::{Error, Result};
use crate::geometry::RasterMask;
use crate::numfmt::{fmt_sig6, round_sig6};

/// `|a ∩ b| / |a ∪ b|`, or 0 when both masks are empty.
pub fn pairwise_iou(a: &RasterMask, b: &RasterMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.union_area(b)?;
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

/// Outcome for one detection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionMatch {
    /// Position of the detection in the input list.
    pub det_index: usize,
    pub score: f64,
    pub matched_gt: Option<usize>,
    /// IoU with the matched ground truth; 0 for false positives.
    pub iou: f64,
}

impl DetectionMatch {
    pub fn is_tp(&self) -> bool {
        self.matched_gt.is_some()
    }
}

/// Matching outcome for one scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub scene_id: String,
    /// In processing order: descending score, ties by input order.
    pub detections: Vec<DetectionMatch>,
    pub num_gt: usize,
    pub unmatched_gt: Vec<usize>,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.detections.iter().filter(|d| d.is_tp()).count()
    }

    pub fn fp(&self) -> usize {
        self.detections.len() - self.tp()
    }

    pub fn fn_count(&self) -> usize {
        self.unmatched_gt.len()
    }
}

/// Indices of `scores` sorted by descending score; equal scores keep their
/// input order.
fn descending_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching of scored detection masks against ground-truth masks at
/// `threshold` IoU.
pub fn match_detections(
    gt: &[RasterMask],
    det: &[(RasterMask, f64)],
    threshold: f64,
) -> Result<MatchResult> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "IoU threshold {threshold} outside (0, 1]"
        )));
    }
    let ious: Vec<Vec<f64>> = det
        .iter()
        .map(|(d, _)| gt.iter().map(|g| pairwise_iou(d, g)).collect())
        .collect::<Result<_>>()?;
    Ok(match_with_ious(
        &ious,
        det.iter().map(|(_, s)| *s),
        gt.len(),
        threshold,
    ))
}

/// Greedy matching from a precomputed `[detection][gt]` IoU table.
pub fn match_with_ious(
    ious: &[Vec<f64>],
    scores: impl Iterator<Item = f64>,
    num_gt: usize,
    threshold: f64,
) -> MatchResult {
    let scores: Vec<f64> = scores.collect();
    let mut taken = vec![false; num_gt];
    let detections = descending_order(scores.iter().copied())
        .into_iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &iou) in ious[d].iter().enumerate() {
                if taken[g] || iou < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| iou > b) {
                    best = Some((g, iou));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            DetectionMatch {
                det_index: d,
                score: scores[d],
                matched_gt: best.map(|(g, _)| g),
                iou: best.map_or(0.0, |(_, iou)| iou),
            }
        })
        .collect();
    MatchResult {
        scene_id: String::new(),
        detections,
        num_gt,
        unmatched_gt: (0..num_gt).filter(|&g| !taken[g]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

/// One point per pooled detection, in descending score order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("score,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_sig6(p.score),
                fmt_sig6(p.precision),
                fmt_sig6(p.recall)
            );
        }
        out
    }
}

/// Pools detections across scenes (stable over scene order, then per-scene
/// processing order) and accumulates precision/recall.
///
/// With `total_gt == 0`, recall is reported as 0 at every point.
pub fn pr_curve(results: &[MatchResult], total_gt: usize) -> PrCurve {
    let pooled: Vec<&DetectionMatch> = results.iter().flat_map(|r| &r.detections).collect();
    let order = descending_order(pooled.iter().map(|d| d.score));
    let mut tp = 0usize;
    let points = order
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let d = pooled[i];
            if d.is_tp() {
                tp += 1;
            }
            PrPoint {
                score: d.score,
                precision: tp as f64 / (k + 1) as f64,
                recall: if total_gt == 0 {
                    0.0
                } else {
                    tp as f64 / total_gt as f64
                },
            }
        })
        .collect();
    PrCurve { points }
}

/// Area under the monotone precision envelope, as a percentage.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let pts = &curve.points;
    // envelope[i] = max precision at recall >= recall[i]; recall is
    // non-decreasing along the curve so a suffix max suffices
    let mut envelope = vec![0.0; pts.len()];
    let mut running = 0.0f64;
    for i in (0..pts.len()).rev() {
        running = running.max(pts[i].precision);
        envelope[i] = running;
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, env) in pts.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    100.0 * ap
}

/// IoU between the union of all ground-truth masks and the union of all
/// detection masks.
pub fn union_iou(gt: &[RasterMask], det: &[RasterMask]) -> Result<f64> {
    let dims = gt.first().or(det.first()).map(RasterMask::dims);
    let Some((w, h)) = dims else {
        return Ok(0.0);
    };
    let union_all = |ms: &[RasterMask]| -> Result<RasterMask> {
        let mut u = RasterMask::new(w, h)?;
        for m in ms {
            u.combine_in_place(m, crate::geometry::CombineOp::Union)?;
        }
        Ok(u)
    };
    pairwise_iou(&union_all(gt)?, &union_all(det)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub iou_threshold: f64,
    /// Detections below this score are left out of the union-IoU masks.
    /// AP always uses every detection.
    pub score_floor: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            iou_threshold: 0.5,
            score_floor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneEval {
    pub scene_id: String,
    pub num_gt: usize,
    pub num_det: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ap50: f64,
    pub union_iou: f64,
    pub mean_matched_iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub score_floor: f64,
    /// AP at the matching threshold, in percent.
    pub ap50: f64,
    /// Pixel-level IoU of the pooled union masks over all scenes.
    pub union_iou: f64,
    /// Mean IoU over true-positive matches.
    pub mean_matched_iou: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub num_gt: usize,
    pub num_det: usize,
    pub scenes: Vec<SceneEval>,
    #[serde(skip)]
    pub matches: Vec<MatchResult>,
    #[serde(skip)]
    pub curve: PrCurve,
}

fn mean_matched(results: &[&MatchResult]) -> f64 {
    let (sum, n) = results
        .iter()
        .flat_map(|r| &r.detections)
        .filter(|d| d.is_tp())
        .fold((0.0, 0usize), |(s, n), d| (s + d.iou, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

struct SceneWork {
    result: MatchResult,
    inter: u64,
    union: u64,
    eval: SceneEval,
}

fn evaluate_scene(
    ds: &Dataset,
    scene_id: &str,
    dets: &[&Detection],
    params: &EvalParams,
) -> Result<SceneWork> {
    let scene = ds.scene(scene_id)?;
    let gts = gt_masks(ds, scene_id)?;
    let det_masks: Vec<RasterMask> = dets.iter().map(|d| d.mask.decode()).collect();
    let ious: Vec<Vec<f64>> = det_masks
        .iter()
        .map(|d| gts.iter().map(|g| pairwise_iou(d, g)).collect())
        .collect::<Result<_>>()?;
    let mut result = match_with_ious(
        &ious,
        dets.iter().map(|d| d.score),
        gts.len(),
        params.iou_threshold,
    );
    result.scene_id = scene_id.to_string();

    let mut gt_union = RasterMask::new(scene.width, scene.height)?;
    for g in &gts {
        gt_union.combine_in_place(g, crate::geometry::CombineOp::Union)?;
    }
    let mut det_union = RasterMask::new(scene.width, scene.height)?;
    for (m, d) in det_masks.iter().zip(dets) {
        if d.score >= params.score_floor {
            det_union.combine_in_place(m, crate::geometry::CombineOp::Union)?;
        }
    }
    let inter = gt_union.intersection_area(&det_union)?;
    let union = gt_union.union_area(&det_union)?;

    let curve = pr_curve(std::slice::from_ref(&result), gts.len());
    let eval = SceneEval {
        scene_id: scene_id.to_string(),
        num_gt: gts.len(),
        num_det: dets.len(),
        tp: result.tp(),
        fp: result.fp(),
        fn_: result.fn_count(),
        ap50: average_precision(&curve),
        union_iou: if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        },
        mean_matched_iou: mean_matched(&[&result]),
    };
    Ok(SceneWork {
        result,
        inter,
        union,
        eval,
    })
}

/// Evaluates `preds` against the dataset's ground truth.
///
/// Scenes are processed in parallel on the current rayon pool; the report is
/// assembled in dataset scene order regardless of scheduling.
pub fn evaluate(ds: &Dataset, preds: &[Detection], params: &EvalParams) -> Result<EvalReport> {
    crate::dataset::validate_detections(preds, ds)?;
    if !(params.iou_threshold > 0.0 && params.iou_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "IoU threshold {} outside (0, 1]",
            params.iou_threshold
        )));
    }
    let mut per_scene: Vec<Vec<&Detection>> = vec![Vec::new(); ds.scenes().len()];
    for d in preds {
        let i = ds.scene_position(&d.scene_id).expect("validated");
        per_scene[i].push(d);
    }
    let work: Vec<SceneWork> = ds
        .scenes()
        .par_iter()
        .zip(per_scene.par_iter())
        .map(|(s, dets)| evaluate_scene(ds, &s.id, dets, params))
        .collect::<Result<_>>()?;

    let matches: Vec<MatchResult> = work.iter().map(|w| w.result.clone()).collect();
    let num_gt: usize = matches.iter().map(|m| m.num_gt).sum();
    let curve = pr_curve(&matches, num_gt);
    let (inter, union) = work
        .iter()
        .fold((0u64, 0u64), |(i, u), w| (i + w.inter, u + w.union));
    let tp: usize = matches.iter().map(MatchResult::tp).sum();
    let fp: usize = matches.iter().map(MatchResult::fp).sum();
    let fn_: usize = matches.iter().map(MatchResult::fn_count).sum();
    Ok(EvalReport {
        iou_threshold: params.iou_threshold,
        score_floor: params.score_floor,
        ap50: average_precision(&curve),
        union_iou: if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        },
        mean_matched_iou: mean_matched(&matches.iter().collect::<Vec<_>>()),
        tp,
        fp,
        fn_,
        num_gt,
        num_det: preds.len(),
        scenes: work.into_iter().map(|w| w.eval).collect(),
        matches,
        curve,
    })
}

impl EvalReport {
    /// JSON with floats rounded to 6 significant digits.
    pub fn to_json(&self) -> String {
        let mut rounded = self.clone();
        for v in [
            &mut rounded.iou_threshold,
            &mut rounded.score_floor,
            &mut rounded.ap50,
            &mut rounded.union_iou,
            &mut rounded.mean_matched_iou,
        ] {
            *v = round_sig6(*v);
        }
        for s in &mut rounded.scenes {
            s.ap50 = round_sig6(s.ap50);
            s.union_iou = round_sig6(s.union_iou);
            s.mean_matched_iou = round_sig6(s.mean_matched_iou);
        }
        serde_json::to_string_pretty(&rounded).expect("report serializes")
    }

    /// One row per scene followed by a `TOTAL` row.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("scene_id,num_gt,num_det,tp,fp,fn,ap50,union_iou,mean_matched_iou\n");
        let mut row = |id: &str, g, d, tp, fp, fn_, ap, ui, mi| {
            let _ = writeln!(
                out,
                "{id},{g},{d},{tp},{fp},{fn_},{},{},{}",
                fmt_sig6(ap),
                fmt_sig6(ui),
                fmt_sig6(mi)
            );
        };
        for s in &self.scenes {
            row(
                &s.scene_id,
                s.num_gt,
                s.num_det,
                s.tp,
                s.fp,
                s.fn_,
                s.ap50,
                s.union_iou,
                s.mean_matched_iou,
            );
        }
        row(
            "TOTAL",
            self.num_gt,
            self.num_det,
            self.tp,
            self.fp,
            self.fn_,
            self.ap50,
            self.union_iou,
            self.mean_matched_iou,
        );
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "AP{:.0}: {}\nunion IoU: {}\nmean matched IoU: {}\nTP: {}  FP: {}  FN: {}  (GT {}, detections {})",
            self.iou_threshold * 100.0,
            fmt_sig6(self.ap50),
            fmt_sig6(self.union_iou),
            fmt_sig6(self.mean_matched_iou),
            self.tp,
            self.fp,
            self.fn_,
            self.num_gt,
            self.num_det
        )
    }
}
