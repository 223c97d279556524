//! Shape regularization: the geometric-complexity loss on sorted splat scales, the
//! combined training loss, opacity-ranked pruning and a scale-only gradient-descent fitter.

mod metrics;
mod prune;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reduce::chunked_sum;
use crate::splat_model::{logistic, sorted_axes, SplatCloud};

pub use metrics::{dssim, l1, psnr, ssim, ssim_window};
pub use prune::{prune, prune_schedule, TrainState, DEFAULT_END_ITER};

#[derive(Debug, Error, PartialEq)]
pub enum ShapeTrainingError {
    #[error("label {0} has no shape target")]
    MissingTarget(u32),
    #[error("shape target for label {label} must be finite and positive (got {a1}, {a2})")]
    BadTarget { label: u32, a1: f64, a2: f64 },
    #[error("penalty delta must be finite and positive (got {0})")]
    BadPenalty(f64),
    #[error("loss weights must be finite, non-negative and not all zero")]
    BadWeights,
    #[error("learning rate must be finite and positive (got {0})")]
    BadLearningRate(f64),
    #[error("{what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("bad pruning schedule: {0}")]
    BadSchedule(String),
}

/// Functional form of the robust penalty `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// Quadratic inside `±delta`, linear outside.
    #[default]
    Huber,
    /// `sqrt(t² + delta²) − delta`.
    SmoothAbs,
    /// The plain logistic `1 / (1 + e^(−t))`. Kept for ablation only: it is neither
    /// symmetric nor zero at the optimum, so descent pushes ratios toward infinity.
    Logistic,
}

impl FromStr for PenaltyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "huber" => Ok(Self::Huber),
            "smooth-abs" => Ok(Self::SmoothAbs),
            "logistic" => Ok(Self::Logistic),
            other => Err(format!(
                "unknown penalty '{other}' (huber, smooth-abs, logistic)"
            )),
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Huber => "huber",
            Self::SmoothAbs => "smooth-abs",
            Self::Logistic => "logistic",
        })
    }
}

/// Space in which the residual `target − ratio` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualSpace {
    /// `ln(target) − ln(ratio)`: convex in log-scales, so plain gradient descent is stable
    /// for any ratio magnitude.
    #[default]
    LogRatio,
    /// `target − ratio` on raw ratios. Curvature grows with the ratio, which makes a fixed
    /// step size unstable for elongated targets.
    Ratio,
}

impl FromStr for ResidualSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log-ratio" => Ok(Self::LogRatio),
            "ratio" => Ok(Self::Ratio),
            other => Err(format!(
                "unknown residual space '{other}' (log-ratio, ratio)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub delta: f64,
    pub residual: ResidualSpace,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::Huber,
            delta: 1.0,
            residual: ResidualSpace::LogRatio,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), ShapeTrainingError> {
        if self.delta.is_finite() && self.delta > 0.0 {
            Ok(())
        } else {
            Err(ShapeTrainingError::BadPenalty(self.delta))
        }
    }

    /// `ρ(t)`.
    pub fn value(&self, t: f64) -> f64 {
        let d = self.delta;
        match self.kind {
            PenaltyKind::Huber => {
                if t.abs() <= d {
                    0.5 * t * t
                } else {
                    d * (t.abs() - 0.5 * d)
                }
            }
            PenaltyKind::SmoothAbs => (t * t + d * d).sqrt() - d,
            PenaltyKind::Logistic => logistic(t),
        }
    }

    /// `ρ'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let d = self.delta;
        match self.kind {
            PenaltyKind::Huber => t.clamp(-d, d),
            PenaltyKind::SmoothAbs => t / (t * t + d * d).sqrt(),
            PenaltyKind::Logistic => {
                let s = logistic(t);
                s * (1.0 - s)
            }
        }
    }
}

/// Loss weights for the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_gc: f64,
    pub lambda_dssim: f64,
    pub lambda_l1: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_gc: 0.2,
            lambda_dssim: 0.2,
            lambda_l1: 0.6,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), ShapeTrainingError> {
        let w = [self.lambda_gc, self.lambda_dssim, self.lambda_l1];
        if w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().any(|v| *v > 0.0) {
            Ok(())
        } else {
            Err(ShapeTrainingError::BadWeights)
        }
    }
}

/// `λ_gc·gc + λ_dssim·dssim + λ_l1·l1`.
pub fn total_loss(gc: f64, dssim: f64, l1: f64, w: &LossWeights) -> f64 {
    w.lambda_gc * gc + w.lambda_dssim * dssim + w.lambda_l1 * l1
}

/// Value and gradient of the geometric-complexity loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GcLoss {
    /// Mean penalty over labeled live splats; 0 when there are none.
    pub loss: f64,
    /// `∂loss/∂log_scales` per splat.
    pub grad: Vec<[f64; 3]>,
    /// Number of splats that entered the mean.
    pub active: usize,
}

/// Penalty of one splat and its gradient with respect to its own log-scales.
fn splat_term(
    log_scales: &[f64; 3],
    target: (f64, f64),
    penalty: &PenaltyConfig,
) -> (f64, [f64; 3]) {
    let [lo, mid, hi] = sorted_axes(log_scales);
    let d1 = log_scales[hi] - log_scales[lo];
    let d2 = log_scales[mid] - log_scales[lo];
    // g = ∂ρ/∂(log ratio) for each of the two ratios
    let (v1, g1, v2, g2) = match penalty.residual {
        ResidualSpace::LogRatio => {
            let r1 = target.0.ln() - d1;
            let r2 = target.1.ln() - d2;
            (
                penalty.value(r1),
                -penalty.derivative(r1),
                penalty.value(r2),
                -penalty.derivative(r2),
            )
        }
        ResidualSpace::Ratio => {
            let a1 = d1.exp();
            let a2 = d2.exp();
            let r1 = target.0 - a1;
            let r2 = target.1 - a2;
            (
                penalty.value(r1),
                -penalty.derivative(r1) * a1,
                penalty.value(r2),
                -penalty.derivative(r2) * a2,
            )
        }
    };
    let mut grad = [0.0; 3];
    grad[hi] += g1;
    grad[mid] += g2;
    grad[lo] -= g1 + g2;
    (v1 + v2, grad)
}

fn check_inputs(
    n: usize,
    labels: &[u32],
    live: Option<&[bool]>,
    targets: &BTreeMap<u32, (f64, f64)>,
    penalty: &PenaltyConfig,
) -> Result<(), ShapeTrainingError> {
    penalty.validate()?;
    if labels.len() != n {
        return Err(ShapeTrainingError::LengthMismatch {
            what: "labels",
            got: labels.len(),
            expected: n,
        });
    }
    if let Some(live) = live {
        if live.len() != n {
            return Err(ShapeTrainingError::LengthMismatch {
                what: "live mask",
                got: live.len(),
                expected: n,
            });
        }
    }
    for &label in labels.iter().filter(|&&l| l != 0) {
        let &(a1, a2) = targets
            .get(&label)
            .ok_or(ShapeTrainingError::MissingTarget(label))?;
        if !(a1.is_finite() && a2.is_finite() && a1 > 0.0 && a2 > 0.0) {
            return Err(ShapeTrainingError::BadTarget { label, a1, a2 });
        }
    }
    Ok(())
}

/// Per-splat penalties and gradients (not divided by the active count). Inactive splats
/// get zeros.
fn per_splat_terms(
    log_scales: &[[f64; 3]],
    labels: &[u32],
    live: Option<&[bool]>,
    targets: &BTreeMap<u32, (f64, f64)>,
    penalty: &PenaltyConfig,
) -> (Vec<f64>, Vec<[f64; 3]>, usize) {
    use rayon::prelude::*;
    let active = |i: usize| labels[i] != 0 && live.is_none_or(|m| m[i]);
    let (values, grads): (Vec<f64>, Vec<[f64; 3]>) = log_scales
        .par_iter()
        .enumerate()
        .map(|(i, ls)| {
            if active(i) {
                splat_term(ls, targets[&labels[i]], penalty)
            } else {
                (0.0, [0.0; 3])
            }
        })
        .unzip();
    let count = (0..log_scales.len()).filter(|&i| active(i)).count();
    (values, grads, count)
}

/// Geometric-complexity loss over log-scales.
///
/// Each labeled live splat contributes `ρ(r1) + ρ(r2)` where the residuals compare its
/// sorted aspect ratios `(s_max/s_min, s_mid/s_min)` to the target of its label. Splats with
/// label 0 or a false `live` entry contribute nothing. The gradient flows through the sort
/// to the axes that realized each role.
pub fn gc_loss(
    log_scales: &[[f64; 3]],
    labels: &[u32],
    live: Option<&[bool]>,
    targets: &BTreeMap<u32, (f64, f64)>,
    penalty: &PenaltyConfig,
) -> Result<GcLoss, ShapeTrainingError> {
    check_inputs(log_scales.len(), labels, live, targets, penalty)?;
    let (values, mut grad, active) = per_splat_terms(log_scales, labels, live, targets, penalty);
    if active == 0 {
        return Ok(GcLoss {
            loss: 0.0,
            grad,
            active,
        });
    }
    let inv = 1.0 / active as f64;
    let loss = chunked_sum(&values, |_, v| *v) * inv;
    for g in &mut grad {
        for c in g.iter_mut() {
            *c *= inv;
        }
    }
    Ok(GcLoss { loss, grad, active })
}

/// One row of the fitting trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    pub gc_loss: f64,
    pub live_count: usize,
}

/// Pruning during a fit: the state carries warmup, end and target; `iteration` and
/// `live_mask` are driven by the fitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSchedule {
    pub warmup_iters: u64,
    pub end_iter: u64,
    pub target_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lr: f64,
    pub iters: u64,
    pub penalty: PenaltyConfig,
    pub schedule: Option<FitSchedule>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub cloud: SplatCloud,
    pub live_mask: Vec<bool>,
    /// `iters + 1` rows: the loss before the first step and after every step.
    pub trace: Vec<TraceRow>,
}

/// Gradient descent on log-scales only.
///
/// Every splat moves along the gradient of its own penalty, so the step does not shrink as
/// the number of labeled splats grows; the trace reports the mean loss. With a schedule,
/// the live set is pruned by opacity after each step.
pub fn fit_shapes(
    cloud: &SplatCloud,
    labels: &[u32],
    targets: &BTreeMap<u32, (f64, f64)>,
    opts: &FitOptions,
) -> Result<FitResult, ShapeTrainingError> {
    if !(opts.lr.is_finite() && opts.lr > 0.0) {
        return Err(ShapeTrainingError::BadLearningRate(opts.lr));
    }
    let n = cloud.count();
    check_inputs(n, labels, None, targets, &opts.penalty)?;
    let opacities: Vec<f64> = cloud
        .splats
        .iter()
        .map(|s| logistic(f64::from(s.opacity_logit)))
        .collect();
    let mut state = opts.schedule.map(|s| TrainState {
        iteration: 0,
        live_mask: vec![true; n],
        learning_rate: opts.lr,
        warmup_iters: s.warmup_iters,
        end_iter: s.end_iter,
        target_total: s.target_total,
    });
    if let Some(st) = &state {
        prune_schedule(st, n)?;
    }

    let mut log_scales: Vec<[f64; 3]> = cloud
        .splats
        .iter()
        .map(|s| s.log_scales.map(f64::from))
        .collect();
    let mut live = vec![true; n];
    let mut trace = Vec::with_capacity(opts.iters as usize + 1);

    let mean_loss = |ls: &[[f64; 3]], live: &[bool]| -> (f64, Vec<[f64; 3]>) {
        let (values, grads, active) =
            per_splat_terms(ls, labels, Some(live), targets, &opts.penalty);
        let loss = if active == 0 {
            0.0
        } else {
            chunked_sum(&values, |_, v| *v) / active as f64
        };
        (loss, grads)
    };

    let (mut loss, mut grads) = mean_loss(&log_scales, &live);
    trace.push(TraceRow {
        iteration: 0,
        gc_loss: loss,
        live_count: n,
    });
    for it in 1..=opts.iters {
        for (ls, g) in log_scales.iter_mut().zip(&grads) {
            for k in 0..3 {
                ls[k] -= opts.lr * g[k];
            }
        }
        if let Some(st) = state.as_mut() {
            st.iteration = it;
            let target = prune_schedule(st, n)?;
            st.live_mask = prune(&opacities, &st.live_mask, target);
            live.clone_from(&st.live_mask);
        }
        (loss, grads) = mean_loss(&log_scales, &live);
        trace.push(TraceRow {
            iteration: it,
            gc_loss: loss,
            live_count: live.iter().filter(|&&l| l).count(),
        });
    }
    log::debug!(
        "fit finished after {} iterations, gc_loss {loss:.6e}",
        opts.iters
    );

    let mut fitted = cloud.clone();
    if opts.iters > 0 {
        for (raw, ls) in fitted.splats.iter_mut().zip(&log_scales) {
            raw.log_scales = ls.map(|v| v as f32);
        }
    }
    Ok(FitResult {
        cloud: fitted,
        live_mask: live,
        trace,
    })
}
