//! Brute-force reference implementations used to check the library.
//!
//! Everything here works on plain `Vec<bool>` masks and `(x, y)` tuples and
//! follows the textbook definitions directly, sharing no code with the
//! crate's optimized paths.

#![allow(dead_code)]

pub type Mask = Vec<bool>;

/// Even-odd inside test at every pixel center, with half-open edge
/// intervals (lower endpoint included) and crossings strictly to the right.
pub fn rasterize(poly: &[(f64, f64)], w: u32, h: u32) -> Mask {
    let mut out = vec![false; (w * h) as usize];
    let n = poly.len();
    for j in 0..h {
        for i in 0..w {
            let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
            let mut crossings = 0;
            for e in 0..n {
                let (a, b) = (poly[e], poly[(e + 1) % n]);
                let (lo, hi) = if a.1 < b.1 { (a, b) } else { (b, a) };
                if lo.1 == hi.1 || cy < lo.1 || cy >= hi.1 {
                    continue;
                }
                let x = lo.0 + (cy - lo.1) / (hi.1 - lo.1) * (hi.0 - lo.0);
                if x > cx {
                    crossings += 1;
                }
            }
            out[(j * w + i) as usize] = crossings % 2 == 1;
        }
    }
    out
}

pub fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.0 * b.1 - b.0 * a.1;
    }
    (s / 2.0).abs()
}

pub fn perimeter(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
        })
        .sum()
}

pub fn count(m: &[bool]) -> usize {
    m.iter().filter(|&&b| b).count()
}

pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn union_all(masks: &[Mask], len: usize) -> Mask {
    let mut out = vec![false; len];
    for m in masks {
        for (o, &v) in out.iter_mut().zip(m) {
            *o |= v;
        }
    }
    out
}

/// Positions sorted by descending score, ties by original position, via
/// repeated selection of the best remaining entry.
pub fn by_descending_score(scores: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            if scores[remaining[k]] > scores[remaining[best]] {
                best = k;
            }
        }
        order.push(remaining.remove(best));
    }
    order
}

/// Greedy matching: returns, in processing order, `(det index, score,
/// matched gt)`.
pub fn greedy_match(
    gt: &[Mask],
    dets: &[(Mask, f64)],
    threshold: f64,
) -> Vec<(usize, f64, Option<usize>, f64)> {
    let scores: Vec<f64> = dets.iter().map(|d| d.1).collect();
    let mut used = vec![false; gt.len()];
    let mut out = Vec::new();
    for d in by_descending_score(&scores) {
        let mut best: Option<usize> = None;
        let mut best_iou = -1.0;
        for g in 0..gt.len() {
            if used[g] {
                continue;
            }
            let v = iou(&dets[d].0, &gt[g]);
            if v >= threshold && v > best_iou {
                best = Some(g);
                best_iou = v;
            }
        }
        if let Some(g) = best {
            used[g] = true;
        }
        out.push((
            d,
            dets[d].1,
            best,
            if best.is_some() { best_iou } else { 0.0 },
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleScene {
    pub gt_polys: Vec<Vec<(f64, f64)>>,
    pub width: u32,
    pub height: u32,
    pub gt: Vec<Mask>,
    pub dets: Vec<(Mask, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(precision, recall)` per pooled detection.
    pub pr: Vec<(f64, f64)>,
    pub ap: f64,
    pub union_iou: f64,
    pub mean_matched_iou: f64,
}

/// AP by definition: `sum_i (r_i - r_{i-1}) * max_{j : r_j >= r_i} p_j`,
/// in percent.
pub fn ap_from_pr(pr: &[(f64, f64)]) -> f64 {
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..pr.len() {
        let r = pr[i].1;
        let mut best = 0.0f64;
        for &(p, rj) in pr {
            if rj >= r {
                best = best.max(p);
            }
        }
        ap += (r - prev) * best;
        prev = r;
    }
    100.0 * ap
}

pub fn evaluate(scenes: &[OracleScene], threshold: f64, score_floor: f64) -> OracleReport {
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut matched_ious = Vec::new();
    let (mut inter, mut uni) = (0usize, 0usize);
    let total_gt: usize = scenes.iter().map(|s| s.gt.len()).sum();
    for s in scenes {
        let len = (s.width * s.height) as usize;
        let m = greedy_match(&s.gt, &s.dets, threshold);
        for &(_, score, g, v) in &m {
            pooled.push((score, g.is_some()));
            if g.is_some() {
                tp += 1;
                matched_ious.push(v);
            } else {
                fp += 1;
            }
        }
        let matched: Vec<usize> = m.iter().filter_map(|x| x.2).collect();
        fn_ += (0..s.gt.len()).filter(|g| !matched.contains(g)).count();

        let gu = union_all(&s.gt, len);
        let kept: Vec<Mask> = s
            .dets
            .iter()
            .filter(|d| d.1 >= score_floor)
            .map(|d| d.0.clone())
            .collect();
        let du = union_all(&kept, len);
        inter += gu.iter().zip(&du).filter(|(a, b)| **a && **b).count();
        uni += gu.iter().zip(&du).filter(|(a, b)| **a || **b).count();
    }
    let scores: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let mut hits = 0usize;
    let mut pr = Vec::new();
    for (k, i) in by_descending_score(&scores).into_iter().enumerate() {
        if pooled[i].1 {
            hits += 1;
        }
        let recall = if total_gt == 0 {
            0.0
        } else {
            hits as f64 / total_gt as f64
        };
        pr.push((hits as f64 / (k + 1) as f64, recall));
    }
    OracleReport {
        tp,
        fp,
        fn_,
        ap: ap_from_pr(&pr),
        pr,
        union_iou: if uni == 0 {
            0.0
        } else {
            inter as f64 / uni as f64
        },
        mean_matched_iou: if matched_ious.is_empty() {
            0.0
        } else {
            matched_ious.iter().sum::<f64>() / matched_ious.len() as f64
        },
    }
}

/// Mean BCE over channel `k` (1-based), probabilities clamped to
/// `[eps, 1 - eps]`.
pub fn mask_bce(probs: &[f64], gt: &[bool], k: usize, m: usize, eps: f64) -> f64 {
    let m2 = m * m;
    let channel = &probs[(k - 1) * m2..k * m2];
    let mut total = 0.0;
    for (p, &y) in channel.iter().zip(gt) {
        let p = p.max(eps).min(1.0 - eps);
        let y = if y { 1.0 } else { 0.0 };
        total += y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    -total / m2 as f64
}

/// Softmax cross-entropy without the max-shift.
pub fn softmax_ce(logits: &[f64], target: usize) -> f64 {
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    -(logits[target].exp() / z).ln()
}

pub fn smooth_l1_sum(pred: &[f64; 4], target: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let d = (pred[i] - target[i]).abs();
        s += if d < 1.0 { 0.5 * d * d } else { d - 0.5 };
    }
    s
}

fn random_poly(rng: &mut impl rand::Rng, w: u32, h: u32) -> Vec<(f64, f64)> {
    let cx = rng.gen_range(0.0..w as f64);
    let cy = rng.gen_range(0.0..h as f64);
    let rx = rng.gen_range(2.0..w as f64 / 3.0);
    let ry = rng.gen_range(2.0..h as f64 / 3.0);
    if rng.gen_bool(0.5) {
        vec![
            (cx - rx, cy - ry),
            (cx + rx, cy - ry),
            (cx + rx, cy + ry),
            (cx - rx, cy + ry),
        ]
    } else {
        vec![
            (cx - rx, cy + ry),
            (cx + rx, cy + ry * 0.3),
            (cx - rx * 0.2, cy - ry),
        ]
    }
}

/// A random scene with up to `max_gt` ground-truth polygons and up to
/// `max_det` detections, some of them jittered copies of ground truth.
/// Scores come from a coarse grid so ties occur.
pub fn random_scene(
    rng: &mut impl rand::Rng,
    w: u32,
    h: u32,
    max_gt: usize,
    max_det: usize,
) -> OracleScene {
    let n_gt = rng.gen_range(0..=max_gt);
    let n_det = rng.gen_range(0..=max_det);
    let gt_polys: Vec<_> = (0..n_gt).map(|_| random_poly(rng, w, h)).collect();
    let gt: Vec<Mask> = gt_polys.iter().map(|p| rasterize(p, w, h)).collect();
    let dets = (0..n_det)
        .map(|_| {
            let poly = if !gt_polys.is_empty() && rng.gen_bool(0.7) {
                let src = &gt_polys[rng.gen_range(0..gt_polys.len())];
                let (dx, dy) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
                src.iter().map(|&(x, y)| (x + dx, y + dy)).collect()
            } else {
                random_poly(rng, w, h)
            };
            let score = rng.gen_range(1..=10) as f64 / 10.0;
            (rasterize(&poly, w, h), score)
        })
        .collect();
    OracleScene {
        gt_polys,
        width: w,
        height: h,
        gt,
        dets,
    }
}
