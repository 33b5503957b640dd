//! Per-RoI loss kernels: softmax cross-entropy over classes, smooth-L1 box
//! regression on the ground-truth class's deltas, and per-pixel binary
//! cross-entropy on the ground-truth class's mask channel. Gradients are
//! derived by hand and checked against central finite differences.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Probability clamp keeping `ln` finite.
pub const PROB_EPS: f64 = 1e-7;

/// Tensors for one region of interest with `K` foreground classes and an
/// `m x m` mask head.
#[derive(Debug, Clone, PartialEq)]
pub struct RoISample {
    /// `K + 1` logits; index 0 is background.
    pub class_logits: Vec<f64>,
    /// Predicted box deltas, one `[dx, dy, dw, dh]` per foreground class.
    pub box_deltas: Vec<[f64; 4]>,
    pub box_target: [f64; 4],
    /// `K * m * m` probabilities, channel-major (`k`, then row, then column).
    pub mask_probs: Vec<f64>,
    /// Foreground class in `1..=K`.
    pub gt_class: usize,
    /// `m * m` binary targets, row-major.
    pub gt_mask: Vec<bool>,
    pub mask_size: usize,
}

impl RoISample {
    pub fn num_classes(&self) -> usize {
        self.box_deltas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes();
        let m2 = self.mask_size * self.mask_size;
        if k == 0 || self.mask_size == 0 {
            return Err(Error::InvalidConfig("need K >= 1 and m >= 1".into()));
        }
        if self.class_logits.len() != k + 1 {
            return Err(Error::InvalidConfig(format!(
                "{} logits for {k} classes",
                self.class_logits.len()
            )));
        }
        if self.mask_probs.len() != k * m2 || self.gt_mask.len() != m2 {
            return Err(Error::InvalidConfig(
                "mask tensor sizes do not match K x m x m".into(),
            ));
        }
        if self.gt_class == 0 || self.gt_class > k {
            return Err(Error::InvalidClass {
                class: self.gt_class,
                len: k + 1,
            });
        }
        Ok(())
    }

    /// Range of `mask_probs` holding channel `gt_class`.
    pub fn mask_channel(&self) -> std::ops::Range<usize> {
        let m2 = self.mask_size * self.mask_size;
        let start = (self.gt_class - 1) * m2;
        start..start + m2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_cls: f64,
    pub l_box: f64,
    pub l_mask: f64,
    pub total: f64,
}

/// Loss value with its gradient w.r.t. the kernel's input.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Mean binary cross-entropy between channel `gt_class` of `mask_probs` and
/// `gt_mask`. The gradient spans all of `mask_probs` and is zero outside
/// that channel.
pub fn mask_loss(sample: &RoISample) -> Result<LossGrad> {
    sample.validate()?;
    if let Some((i, &p)) = sample
        .mask_probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::InvalidProbability { index: i, value: p });
    }
    let m2 = (sample.mask_size * sample.mask_size) as f64;
    let channel = sample.mask_channel();
    let mut grad = vec![0.0; sample.mask_probs.len()];
    let mut sum = 0.0;
    for (j, (&p, &y)) in sample.mask_probs[channel.clone()]
        .iter()
        .zip(&sample.gt_mask)
        .enumerate()
    {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        let (term, d) = if y {
            (p.ln(), 1.0 / p)
        } else {
            ((1.0 - p).ln(), -1.0 / (1.0 - p))
        };
        sum += term;
        grad[channel.start + j] = -d / m2;
    }
    Ok(LossGrad {
        value: -sum / m2,
        grad,
    })
}

/// `-ln softmax(logits)[gt_class]`, gradient `softmax - onehot`.
pub fn cls_loss(class_logits: &[f64], gt_class: usize) -> Result<LossGrad> {
    if gt_class >= class_logits.len() {
        return Err(Error::InvalidClass {
            class: gt_class,
            len: class_logits.len(),
        });
    }
    if class_logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidConfig("non-finite logit".into()));
    }
    let max = class_logits
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = class_logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let log_z = z.ln() + max;
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / z - if i == gt_class { 1.0 } else { 0.0 })
        .collect();
    Ok(LossGrad {
        value: log_z - class_logits[gt_class],
        grad,
    })
}

fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

/// Summed smooth-L1 over the four box coordinates; gradient w.r.t. `pred`.
pub fn box_loss(pred: &[f64; 4], target: &[f64; 4]) -> LossGrad {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(4);
    for (p, t) in pred.iter().zip(target) {
        let (v, g) = smooth_l1(p - t);
        value += v;
        grad.push(g);
    }
    LossGrad { value, grad }
}

/// Unweighted sum of the three task losses.
pub fn total_loss(sample: &RoISample) -> Result<LossBreakdown> {
    sample.validate()?;
    let l_cls = cls_loss(&sample.class_logits, sample.gt_class)?.value;
    let l_box = box_loss(&sample.box_deltas[sample.gt_class - 1], &sample.box_target).value;
    let l_mask = mask_loss(sample)?.value;
    Ok(LossBreakdown {
        l_cls,
        l_box,
        l_mask,
        total: l_cls + l_box + l_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Cls,
    Box,
    Mask,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Cls, LossKind::Box, LossKind::Mask];

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Cls => "cls_loss",
            LossKind::Box => "box_loss",
            LossKind::Mask => "mask_loss",
        }
    }

    /// The inputs this loss is differentiated with respect to.
    fn inputs(&self, s: &RoISample) -> Vec<f64> {
        match self {
            LossKind::Cls => s.class_logits.clone(),
            LossKind::Box => s.box_deltas[s.gt_class - 1].to_vec(),
            LossKind::Mask => s.mask_probs.clone(),
        }
    }

    fn with_inputs(&self, s: &RoISample, x: &[f64]) -> RoISample {
        let mut s = s.clone();
        match self {
            LossKind::Cls => s.class_logits = x.to_vec(),
            LossKind::Box => s.box_deltas[s.gt_class - 1].copy_from_slice(x),
            LossKind::Mask => s.mask_probs = x.to_vec(),
        }
        s
    }

    pub fn eval(&self, s: &RoISample) -> Result<LossGrad> {
        match self {
            LossKind::Cls => cls_loss(&s.class_logits, s.gt_class),
            LossKind::Box => {
                s.validate()?;
                Ok(box_loss(&s.box_deltas[s.gt_class - 1], &s.box_target))
            }
            LossKind::Mask => mask_loss(s),
        }
    }
}

/// Max over inputs of `|analytic - numeric| / max(1, |analytic|)`, using
/// central differences with the given step.
pub fn gradcheck(kind: LossKind, sample: &RoISample, step: f64) -> Result<f64> {
    sample.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("bad step {step}")));
    }
    match kind {
        LossKind::Mask => {
            let lo = PROB_EPS + step;
            let hi = 1.0 - PROB_EPS - step;
            if let Some(p) = sample.mask_probs.iter().find(|&&p| p <= lo || p >= hi) {
                return Err(Error::NonDifferentiablePoint(format!(
                    "probability {p} within one step of the clamp boundary"
                )));
            }
        }
        LossKind::Box => {
            let pred = &sample.box_deltas[sample.gt_class - 1];
            for (p, t) in pred.iter().zip(&sample.box_target) {
                let d = p - t;
                if (d.abs() - 1.0).abs() <= 10.0 * step {
                    return Err(Error::NonDifferentiablePoint(format!(
                        "box delta {d} too close to the smooth-L1 kink"
                    )));
                }
            }
        }
        LossKind::Cls => {}
    }

    let analytic = kind.eval(sample)?.grad;
    let x = kind.inputs(sample);
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += step;
        xm[i] -= step;
        let fp = kind.eval(&kind.with_inputs(sample, &xp))?.value;
        let fm = kind.eval(&kind.with_inputs(sample, &xm))?.value;
        let numeric = (fp - fm) / (2.0 * step);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// A random sample at which every loss is differentiable: probabilities in
/// `[0.02, 0.98]` and box residuals at least `0.05` away from the smooth-L1
/// kink.
pub fn random_interior_sample(rng: &mut impl Rng) -> RoISample {
    let k = rng.gen_range(1..=4);
    let m = rng.gen_range(2..=7);
    let box_target: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
    let box_deltas = (0..k)
        .map(|_| {
            std::array::from_fn(|i| loop {
                let d: f64 = rng.gen_range(-3.0..3.0);
                if (d.abs() - 1.0).abs() > 0.05 {
                    break box_target[i] + d;
                }
            })
        })
        .collect();
    RoISample {
        class_logits: (0..=k).map(|_| rng.gen_range(-6.0..6.0)).collect(),
        box_deltas,
        box_target,
        mask_probs: (0..k * m * m).map(|_| rng.gen_range(0.02..0.98)).collect(),
        gt_class: rng.gen_range(1..=k),
        gt_mask: (0..m * m).map(|_| rng.gen_bool(0.5)).collect(),
        mask_size: m,
    }
}
