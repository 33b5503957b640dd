//! Shared inputs for the benchmarks.

use slumkit_core::dataset::{gt_masks, Dataset, Detection, SLUM};
use slumkit_core::synth::{build_corpus, SynthConfig};
use slumkit_core::{Polygon, RleMask};

/// A star polygon with `n` spikes, centered in a `size` square.
pub fn star(n: usize, size: f64) -> Polygon {
    let c = size / 2.0;
    Polygon::new((0..2 * n).map(|i| {
        let a = std::f64::consts::PI * i as f64 / n as f64;
        let r = if i % 2 == 0 { 0.45 * size } else { 0.2 * size };
        (c + r * a.cos(), c + r * a.sin())
    }))
    .expect("star is valid")
}

/// A synthetic corpus with its ground truth as score-1 detections.
pub fn corpus(n_scenes: u32, width: u32) -> (Dataset, Vec<Detection>) {
    let cfg = SynthConfig {
        width,
        height: width,
        n_scenes,
        n_instances: [2, 6],
        instance_radius: [width as f64 / 24.0, width as f64 / 10.0],
        ..SynthConfig::default()
    };
    let (ds, _, _) = build_corpus(&cfg, 1).expect("valid bench config");
    let mut dets = Vec::new();
    for s in ds.scenes() {
        for m in gt_masks(&ds, &s.id).expect("scene exists") {
            dets.push(Detection {
                scene_id: s.id.clone(),
                category: SLUM.to_string(),
                score: 1.0,
                mask: RleMask::encode(&m),
            });
        }
    }
    (ds, dets)
}
