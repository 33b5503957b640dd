//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p slumkit-cli --test acceptance`.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slumkit_core::change::{detect_change, ChangeLabel};
use slumkit_core::dataset::{
    gt_masks, Dataset, Detection, InstanceAnnotation, Scale, Scene, Split,
};
use slumkit_core::geometry::{rasterize_polygon, rasterize_union, rle_decode, rle_encode};
use slumkit_core::losses::{gradcheck, mask_loss, random_interior_sample, LossKind, RoISample};
use slumkit_core::metrics::{evaluate, EvalParams};
use slumkit_core::synth::{build_corpus, generate_pair, SynthConfig};
use slumkit_core::transforms::{apply_geometric, GeomTransform, ResizePadPlan, TARGET_SIZE};
use slumkit_core::{Point, Polygon, RasterMask, RleMask};

type Outcome = Result<String, String>;
type Check = Box<dyn Fn() -> Outcome>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn scene(id: &str, w: u32, h: u32) -> Scene {
    Scene {
        id: id.to_string(),
        image_path: format!("{id}.png"),
        width: w,
        height: h,
        scale: Scale::Scale100m,
        capture_year: 2018,
    }
}

fn detection(scene_id: &str, mask: &RasterMask, score: f64) -> Detection {
    Detection {
        scene_id: scene_id.to_string(),
        category: "slum".into(),
        score,
        mask: RleMask::encode(mask),
    }
}

fn oracle_to_dataset(scenes: &[oracle::OracleScene]) -> (Dataset, Vec<Detection>) {
    let mut sc = Vec::new();
    let mut anns = Vec::new();
    let mut dets = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let id = format!("s{i}");
        sc.push(scene(&id, s.width, s.height));
        for p in &s.gt_polys {
            anns.push(InstanceAnnotation {
                scene_id: id.clone(),
                category: "slum".into(),
                polygon: Polygon::new(p.iter().copied()).unwrap(),
            });
        }
        for (m, score) in &s.dets {
            let mask = RasterMask::from_pixels(s.width, s.height, m).unwrap();
            dets.push(detection(&id, &mask, *score));
        }
    }
    (Dataset::new(sc, anns, Split::Test).unwrap(), dets)
}

fn criterion_1() -> Outcome {
    Ok(
        "published test-set scores (IoU 0.86 / AP50 80.2 at 100 m, 0.73 / 38.3 at 1000 m) \
        and the 35.25% figure need the original imagery and trained network; \
        criteria 2-8 substitute"
            .into(),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = EvalParams::default();
    let mut compared = 0;
    for trial in 0..200 {
        let s = oracle::random_scene(&mut rng, 64, 64, 6, 6);
        let want = oracle::evaluate(std::slice::from_ref(&s), 0.5, 0.5);
        let (ds, dets) = oracle_to_dataset(std::slice::from_ref(&s));
        let got = evaluate(&ds, &dets, &params).map_err(|e| e.to_string())?;
        ensure(
            (got.tp, got.fp, got.fn_) == (want.tp, want.fp, want.fn_),
            || {
                format!(
                    "trial {trial}: counts {:?} vs oracle {:?}",
                    (got.tp, got.fp, got.fn_),
                    (want.tp, want.fp, want.fn_)
                )
            },
        )?;
        let pr: Vec<(f64, f64)> = got
            .curve
            .points
            .iter()
            .map(|p| (p.precision, p.recall))
            .collect();
        ensure(pr == want.pr, || format!("trial {trial}: PR points differ"))?;
        ensure((got.ap50 - want.ap).abs() <= 1e-9, || {
            format!("trial {trial}: AP {} vs oracle {}", got.ap50, want.ap)
        })?;
        compared += dets.len();
    }
    // the same scenes pooled five at a time
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scenes: Vec<_> = (0..200)
        .map(|_| oracle::random_scene(&mut rng, 64, 64, 6, 6))
        .collect();
    for chunk in scenes.chunks(5) {
        let want = oracle::evaluate(chunk, 0.5, 0.5);
        let (ds, dets) = oracle_to_dataset(chunk);
        let got = evaluate(&ds, &dets, &params).map_err(|e| e.to_string())?;
        ensure(
            (got.tp, got.fp, got.fn_) == (want.tp, want.fp, want.fn_),
            || "pooled counts differ".into(),
        )?;
        ensure((got.ap50 - want.ap).abs() <= 1e-9, || {
            format!("pooled AP {} vs {}", got.ap50, want.ap)
        })?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {}", secs(t)))?;
    Ok(format!(
        "200 scenes, {compared} detections, exact counts and PR, AP within 1e-9"
    ))
}

fn criterion_3() -> Outcome {
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| {
        Polygon::new([(x0, y0), (x1, y0), (x1, y1), (x0, y1)]).unwrap()
    };
    let (w, h) = (16, 8);
    let anns = vec![
        InstanceAnnotation {
            scene_id: "s".into(),
            category: "slum".into(),
            polygon: rect(0.0, 0.0, 10.0, 1.0),
        },
        InstanceAnnotation {
            scene_id: "s".into(),
            category: "slum".into(),
            polygon: rect(0.0, 2.0, 10.0, 3.0),
        },
    ];
    let ds = Dataset::new(vec![scene("s", w, h)], anns, Split::Test).map_err(|e| e.to_string())?;
    let row =
        |y: u32, len: u32| RasterMask::from_fn(w, h, move |px, py| py == y && px < len).unwrap();
    // IoU 0.8 with the first GT, then 0.3 and 0.6 with the second
    let dets = vec![
        detection("s", &row(0, 8), 0.9),
        detection("s", &row(2, 3), 0.8),
        detection("s", &row(2, 6), 0.7),
    ];
    let r = evaluate(&ds, &dets, &EvalParams::default()).map_err(|e| e.to_string())?;
    ensure((r.ap50 - 83.33).abs() <= 0.01, || format!("AP {}", r.ap50))?;

    let cfg = SynthConfig {
        n_scenes: 6,
        ..SynthConfig::default()
    };
    let (corpus, _, _) = build_corpus(&cfg, 3).map_err(|e| e.to_string())?;
    let mut perfect = Vec::new();
    for s in corpus.scenes() {
        for m in gt_masks(&corpus, &s.id).map_err(|e| e.to_string())? {
            perfect.push(detection(&s.id, &m, 1.0));
        }
    }
    let p = evaluate(&corpus, &perfect, &EvalParams::default()).map_err(|e| e.to_string())?;
    ensure(p.ap50 == 100.0 && p.union_iou == 1.0, || {
        format!("perfect: AP {} IoU {}", p.ap50, p.union_iou)
    })?;
    Ok(format!(
        "fixture AP {:.4}; perfect predictions AP {} union IoU {}",
        r.ap50, p.ap50, p.union_iou
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let half = RoISample {
        class_logits: vec![0.0; 3],
        box_deltas: vec![[0.0; 4]; 2],
        box_target: [0.0; 4],
        mask_probs: vec![0.5; 2 * 28 * 28],
        gt_class: 1,
        gt_mask: (0..28 * 28).map(|i| i % 3 == 0).collect(),
        mask_size: 28,
    };
    let l = mask_loss(&half).map_err(|e| e.to_string())?.value;
    ensure((l - std::f64::consts::LN_2).abs() <= 1e-9, || {
        format!("mask_loss(0.5) = {l}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let s = random_interior_sample(&mut rng);
        for (i, kind) in LossKind::ALL.into_iter().enumerate() {
            worst[i] = worst[i].max(gradcheck(kind, &s, 1e-6).map_err(|e| e.to_string())?);
        }
        // channels other than the ground-truth class must not matter
        let mut perturbed = s.clone();
        let ch = s.mask_channel();
        for (j, p) in perturbed.mask_probs.iter_mut().enumerate() {
            if !ch.contains(&j) {
                *p = rng.gen_range(0.0..=1.0);
            }
        }
        let a = mask_loss(&s).map_err(|e| e.to_string())?.value;
        let b = mask_loss(&perturbed).map_err(|e| e.to_string())?.value;
        ensure(a == b, || {
            format!("off-channel perturbation changed loss {a} -> {b}")
        })?;
    }
    ensure(worst.iter().all(|&e| e <= 1e-5), || {
        format!("max relative errors {worst:?}")
    })?;
    let t = start.elapsed();
    ensure(t < Duration::from_secs(5), || format!("took {}", secs(t)))?;
    Ok(format!(
        "ln 2 exact to 1e-9; gradcheck max rel err cls {:.1e} box {:.1e} mask {:.1e}; off-channel exact",
        worst[0], worst[1], worst[2]
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let (w, h) = (rng.gen_range(1..80), rng.gen_range(1..80));
        let density: f64 = rng.gen();
        let px: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(density)).collect();
        let m = RasterMask::from_pixels(w, h, &px).unwrap();
        ensure(rle_decode(&rle_encode(&m)) == m, || {
            format!("RLE roundtrip failed on mask {i}")
        })?;
    }
    for _ in 0..500 {
        let (x0, y0) = (rng.gen_range(-10i32..70), rng.gen_range(-10i32..70));
        let (x1, y1) = (x0 + rng.gen_range(1..40), y0 + rng.gen_range(1..40));
        let p = Polygon::new(
            [(x0, y0), (x1, y0), (x1, y1), (x0, y1)].map(|(x, y)| (x as f64, y as f64)),
        )
        .unwrap();
        let area = rasterize_polygon(&p, 64, 64).unwrap().area();
        let clip = |v: i32| v.clamp(0, 64) as u64;
        let want = (clip(x1) - clip(x0)) * (clip(y1) - clip(y0));
        ensure(area == want, || {
            format!("rectangle ({x0},{y0})-({x1},{y1}): {area} != {want}")
        })?;
    }
    let mut checked = 0;
    while checked < 300 {
        let n = rng.gen_range(4..10);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(-5.0..45.0), rng.gen_range(-5.0..45.0)))
            .collect();
        let Ok(p) = Polygon::new(pts.iter().copied()) else {
            continue;
        };
        let got = rasterize_polygon(&p, 40, 40).unwrap().to_pixels();
        ensure(got == oracle::rasterize(&pts, 40, 40), || {
            format!("even-odd mismatch for {pts:?}")
        })?;
        checked += 1;
    }
    Ok("1000 RLE roundtrips, 500 integer rectangles exact, 300 self-intersecting polygons match even-odd".into())
}

fn criterion_6() -> Outcome {
    let plan = ResizePadPlan::new(1280, 720, TARGET_SIZE).map_err(|e| e.to_string())?;
    ensure(plan.scale_factor == 0.8, || {
        format!("scale {}", plan.scale_factor)
    })?;
    ensure(
        (plan.content_width, plan.content_height) == (1024, 576),
        || "content size".into(),
    )?;
    ensure(
        (plan.pad_top, plan.pad_bottom, plan.pad_left, plan.pad_right) == (224, 224, 0, 0),
        || "padding".into(),
    )?;
    for ((x, y), (ex, ey)) in [
        ((0.0, 0.0), (0.0, 224.0)),
        ((1280.0, 720.0), (1024.0, 800.0)),
        ((640.0, 360.0), (512.0, 512.0)),
        ((100.0, 50.0), (80.0, 264.0)),
    ] {
        let q = plan.map_point(Point::new(x, y));
        ensure(q == Point::new(ex, ey), || {
            format!("({x}, {y}) -> ({}, {})", q.x, q.y)
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(16..400), rng.gen_range(16..400));
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|_| (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)))
            .collect();
        let Ok(poly) = Polygon::new(pts) else {
            continue;
        };
        let ann = InstanceAnnotation {
            scene_id: "s".into(),
            category: "slum".into(),
            polygon: poly,
        };
        let img = image::RgbImage::new(w, h);
        let twice = |t: GeomTransform| {
            let (_, a) = apply_geometric(&img, std::slice::from_ref(&ann), &t).unwrap();
            let (_, b) = apply_geometric(&img, &a, &t).unwrap();
            b
        };
        let full_turn = {
            let t = GeomTransform {
                angle_deg: 360.0,
                ..Default::default()
            };
            apply_geometric(&img, std::slice::from_ref(&ann), &t)
                .unwrap()
                .1
        };
        for out in [
            twice(GeomTransform {
                flip_h: true,
                ..Default::default()
            }),
            twice(GeomTransform {
                flip_v: true,
                ..Default::default()
            }),
            twice(GeomTransform {
                flip_h: true,
                flip_v: true,
                ..Default::default()
            }),
            full_turn,
        ] {
            for (a, b) in ann.polygon.vertices().iter().zip(out[0].polygon.vertices()) {
                worst = worst.max((a.x - b.x).abs()).max((a.y - b.y).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("identity drift {worst:e} px"))?;
    Ok(format!("1280x720 -> 1024x576 + 224/224, scale 0.8, vertices exact; identities within {worst:.1e} px"))
}

fn criterion_7() -> Outcome {
    let first_n = |n: usize| {
        let px: Vec<bool> = (0..40 * 40).map(|i| i < n).collect();
        RasterMask::from_pixels(40, 40, &px).unwrap()
    };
    let r = detect_change(&first_n(400), &first_n(541)).map_err(|e| e.to_string())?;
    ensure(r.percent_change == Some(35.25), || {
        format!("400 -> 541 gave {:?}", r.percent_change)
    })?;
    let r0 = detect_change(&first_n(300), &first_n(300)).map_err(|e| e.to_string())?;
    ensure(r0.percent_change == Some(0.0), || {
        "identical masks not 0%".into()
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..500 {
        let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let (da, db): (f64, f64) = (rng.gen(), rng.gen());
        let pa: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(da)).collect();
        let pb: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(db)).collect();
        let a = RasterMask::from_pixels(w, h, &pa).unwrap();
        let b = RasterMask::from_pixels(w, h, &pb).unwrap();
        let fwd = detect_change(&a, &b).unwrap();
        let back = detect_change(&b, &a).unwrap();
        if let (Some(p), Some(q)) = (fwd.percent_change, back.percent_change) {
            let want = 100.0 * (-p / (100.0 + p));
            ensure((q - want).abs() <= 1e-9 * want.abs().max(1.0), || {
                format!("pair {i}: antisymmetry {q} vs {want}")
            })?;
        }
        let m = &fwd.change_map;
        let (added, removed) = (m.count(ChangeLabel::Added), m.count(ChangeLabel::Removed));
        ensure(fwd.area_after + removed == fwd.area_before + added, || {
            format!("pair {i}: conservation")
        })?;
    }

    let cfg = SynthConfig {
        width: 512,
        height: 512,
        n_instances: [1, 1],
        instance_radius: [50.0, 90.0],
        growth_factor: 1.3525,
        ..SynthConfig::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (before, after) = generate_pair(&cfg, seed, "s").map_err(|e| e.to_string())?;
        let mb = rasterize_union(before.annotations.iter().map(|a| &a.polygon), 512, 512).unwrap();
        let ma = rasterize_union(after.annotations.iter().map(|a| &a.polygon), 512, 512).unwrap();
        let p = detect_change(&mb, &ma)
            .unwrap()
            .percent_change
            .ok_or("no base area")?;
        if (p - 35.25).abs() > worst.abs() {
            worst = p - 35.25;
        }
    }
    ensure(worst.abs() <= 1.5, || {
        format!("synthetic growth off by {worst:+.3} points")
    })?;
    Ok(format!(
        "+35.25 exact; 0% on identity; 500 random pairs; synthetic growth within {:.3} points",
        worst.abs()
    ))
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn pipeline(dir: &Path) -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_slumkit");
    let run = |args: &[&str]| -> Result<String, String> {
        let out = Command::new(bin)
            .args(args)
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "slumkit {} failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    };
    std::fs::write(
        dir.join("synth.json"),
        r#"{"n_scenes": 4, "pairs": true, "growth_factor": 1.3525}"#,
    )
    .map_err(|e| e.to_string())?;
    run(&[
        "synth",
        "--config",
        "synth.json",
        "--seed",
        "7",
        "--out",
        "corpus",
    ])?;
    run(&[
        "rasterize",
        "--gt",
        "corpus/dataset.json",
        "--out",
        "masks",
        "--as-predictions",
        "preds.json",
    ])?;
    run(&[
        "rasterize",
        "--gt",
        "corpus/dataset_after.json",
        "--out",
        "masks_after",
        "--as-predictions",
        "preds_after.json",
    ])?;
    let summary = run(&[
        "evaluate",
        "--gt",
        "corpus/dataset.json",
        "--pred",
        "preds.json",
        "--out",
        "report.json",
        "--csv",
        "report.csv",
        "--pr-csv",
        "pr.csv",
    ])?;
    let change = run(&[
        "change",
        "--before",
        "preds.json",
        "--after",
        "preds_after.json",
        "--scene",
        "scene_0000",
        "--map",
        "change.png",
        "--out",
        "change.json",
    ])?;
    std::fs::write(dir.join("stdout.txt"), format!("{summary}{change}"))
        .map_err(|e| e.to_string())?;
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap())
            .map_err(|e| e.to_string())?;
    ensure(report["ap50"] == 100.0, || {
        format!("GT-as-predictions AP50 {}", report["ap50"])
    })?;
    Ok(change
        .lines()
        .find(|l| l.starts_with("percent"))
        .unwrap_or("")
        .to_string())
}

fn criterion_8(suite_start: Instant) -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pa = pipeline(a.path())?;
    pipeline(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    ensure(sa.keys().eq(sb.keys()), || {
        "output trees list different files".into()
    })?;
    for (k, v) in &sa {
        ensure(sb[k] == *v, || format!("{k} differs between runs"))?;
    }
    let t = suite_start.elapsed();
    ensure(t < Duration::from_secs(60), || {
        format!("suite took {}", secs(t))
    })?;
    Ok(format!(
        "{} files byte-identical across two runs ({pa}); whole suite {}",
        sa.len(),
        secs(t)
    ))
}

fn main() {
    let start = Instant::now();
    let criteria: [(&str, Check); 8] = [
        ("reproducibility statement", Box::new(criterion_1)),
        ("metric correctness vs oracle", Box::new(criterion_2)),
        ("hand-computed AP fixture", Box::new(criterion_3)),
        ("loss kernels", Box::new(criterion_4)),
        ("geometry", Box::new(criterion_5)),
        ("preprocessing contract", Box::new(criterion_6)),
        ("change detection", Box::new(criterion_7)),
        (
            "end-to-end determinism",
            Box::new(move || criterion_8(start)),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let took = secs(t.elapsed());
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} [{took}]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name} [{took}]: {why}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
