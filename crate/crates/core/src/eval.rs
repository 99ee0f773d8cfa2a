//! Prequential metrics: windowed online accuracy, averaged cumulative regret,
//! the hindsight reference and multi-seed aggregation.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbp::{ElasticClassifier, HedgeWeights, ObjectiveMask};
use crate::learner::{argmax, phase_inputs, side_forward, side_gradients, ModelConfig, SideRef, SideTargets};
use crate::nn::sgd_step;
use crate::rng::{RngState, STREAM_HINDSIGHT};
use crate::stream::{Phase, PreparedStream};
use crate::vae::VaeNet;

/// Epochs of the offline reference run.
pub const HINDSIGHT_EPOCHS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: usize,
    pub phase: Phase,
    pub correct: bool,
    pub loss: f64,
    pub oca: f64,
    pub p: Option<f64>,
    pub alphas: Vec<f64>,
}

/// One row per round plus the run identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub variant: String,
    pub seed: u64,
    pub window: usize,
    pub depth: usize,
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn oca_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.oca).collect()
    }
}

/// Streaming OCA over the most recent `min(B, t)` rounds.
#[derive(Debug, Clone)]
pub struct OcaTracker {
    window: usize,
    recent: VecDeque<bool>,
    hits: usize,
}

impl OcaTracker {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidConfig("OCA window must be positive".into()));
        }
        Ok(Self {
            window,
            recent: VecDeque::with_capacity(window),
            hits: 0,
        })
    }

    /// Records one round and returns the OCA including it.
    pub fn push(&mut self, correct: bool) -> f64 {
        if self.recent.len() == self.window && self.recent.pop_front() == Some(true) {
            self.hits -= 1;
        }
        self.recent.push_back(correct);
        self.hits += usize::from(correct);
        self.value()
    }

    pub fn value(&self) -> f64 {
        if self.recent.is_empty() {
            0.0
        } else {
            self.hits as f64 / self.recent.len() as f64
        }
    }
}

/// OCA at 1-based round `t` recounted from the correctness column.
pub fn oca(log: &MetricsLog, t: usize, window: usize) -> Result<f64> {
    if log.rows.is_empty() {
        return Err(Error::Empty("metrics log"));
    }
    if t == 0 || t > log.rows.len() || window == 0 {
        return Err(Error::InvalidConfig(alloc::format!(
            "OCA needs 1 <= t <= {} and a positive window",
            log.rows.len()
        )));
    }
    let span = window.min(t);
    let hits = log.rows[t - span..t].iter().filter(|r| r.correct).count();
    Ok(hits as f64 / span as f64)
}

/// `(1/T) Σ_t (hindsight − oca_t)`. Terms are summed in sorted order so the
/// result does not depend on the order of the series.
pub fn acr(oca_series: &[f64], hindsight: f64) -> Result<f64> {
    if oca_series.is_empty() {
        return Err(Error::Empty("OCA series"));
    }
    if !(hindsight >= 0.0 && hindsight.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("hindsight {hindsight} must be non-negative")));
    }
    let mut gaps: Vec<f64> = oca_series.iter().map(|o| hindsight - o).collect();
    gaps.sort_by(f64::total_cmp);
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// OCA over the `B` rounds right after the overlap ends minus OCA over the `B`
/// rounds right before (both windows truncated to the stream).
pub fn boundary_drop(log: &MetricsLog, tb_end: usize) -> Result<f64> {
    let n = log.rows.len();
    if tb_end == 0 || tb_end >= n {
        return Err(Error::InvalidConfig("boundary must lie strictly inside the stream".into()));
    }
    let b = log.window;
    let after = (tb_end + b).min(n);
    let before = oca(log, tb_end, b)?;
    let after = oca(log, after, after - tb_end)?;
    Ok(after - before)
}

/// Reference accuracy: an elastic network of the same shape over zero-padded
/// `[x_s1, x_s2]` inputs, trained on classification for `epochs` passes over the
/// whole stream. Returns the OCA at the end of the last pass.
pub fn hindsight_estimate(stream: &PreparedStream, config: &ModelConfig, seed: u64, epochs: usize) -> Result<f64> {
    config.validate()?;
    if epochs == 0 {
        return Err(Error::InvalidConfig("hindsight needs at least one epoch".into()));
    }
    let (d1, d2) = (stream.d1(), stream.d2());
    let depth = config.depth;
    let mut init = RngState::with_stream(seed, STREAM_HINDSIGHT);
    let mut vae = VaeNet::new(d1 + d2, config.hidden, config.latent, depth, &mut init)?;
    let mut clf = ElasticClassifier::new(config.latent, stream.classes, depth)?;
    let floor = config.hedge_floor.unwrap_or_else(|| HedgeWeights::default_floor(depth));
    let mut hedge = HedgeWeights::uniform(depth, config.beta, floor)?;
    let mask = ObjectiveMask { vi: false, rec: false, clf: true };
    let mut x = vec![0.0; d1 + d2];
    let mut last = 0.0;
    for _ in 0..epochs {
        let mut tracker = OcaTracker::new(stream.schedule.window)?;
        for inst in stream.stream() {
            let (x1, x2) = phase_inputs(&inst)?;
            x.iter_mut().for_each(|v| *v = 0.0);
            if let Some(a) = x1 {
                x[..d1].copy_from_slice(a);
            }
            if let Some(b) = x2 {
                x[d1..].copy_from_slice(b);
            }
            let side = SideRef {
                vae: &vae,
                classifier: &clf,
                hedge: &hedge,
            };
            let fwd = side_forward(side, &x)?;
            tracker.push(argmax(&fwd.probs) == inst.y);
            let targets = SideTargets {
                x: &x,
                y: inst.y,
                mask,
                cross: None,
            };
            let g = side_gradients(side, &fwd, &targets, config.loss_weights(), &mut |_| Vec::new())?;
            sgd_step(&mut vae.encoder, &g.vae.encoder, config.learning_rate)?;
            sgd_step(&mut clf, &g.classifier, config.learning_rate)?;
            hedge.update(&g.per_layer)?;
        }
        last = tracker.value();
    }
    Ok(last)
}

/// Headline numbers of one `(variant, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub acr: f64,
    pub mean_oca: f64,
    pub final_oca: f64,
    pub hindsight: f64,
    /// OCA change across the end of the overlap.
    pub boundary_drop: Option<f64>,
}

impl RunSummary {
    pub fn from_log(log: &MetricsLog, hindsight: f64, tb_end: Option<usize>) -> Result<Self> {
        let series = log.oca_series();
        let acr = acr(&series, hindsight)?;
        let mean_oca = series.iter().sum::<f64>() / series.len() as f64;
        Ok(Self {
            variant: log.variant.clone(),
            seed: log.seed,
            acr,
            mean_oca,
            final_oca: *series.last().unwrap_or(&0.0),
            hindsight,
            boundary_drop: tb_end.map(|b| boundary_drop(log, b)).transpose()?,
        })
    }
}

/// Sample mean and sample variance (`n − 1` denominator, 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

pub fn mean_var(values: &[f64]) -> Result<MeanVar> {
    if values.is_empty() {
        return Err(Error::Empty("summary values"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(MeanVar { mean, variance, n })
}

/// ACR across seeds.
pub fn summarize(runs: &[RunSummary]) -> Result<MeanVar> {
    let values: Vec<f64> = runs.iter().map(|r| r.acr).collect();
    mean_var(&values)
}
