//! Hedge backpropagation: a classifier head on every depth, hedge weights on
//! the simplex, weighted aggregation and the multiplicative weight update.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{softmax, Dense, Parameters};
use crate::stream::Phase;

/// Hedge weights `α` over `L` layers.
///
/// Invariant after every update: `Σα = 1` (to 1e-9), every `α ≥ floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeWeights {
    alphas: Vec<f64>,
    beta: f64,
    floor: f64,
    running_max: f64,
    frozen: bool,
}

impl HedgeWeights {
    /// `α_l = 1/L`.
    pub fn uniform(depth: usize, beta: f64, floor: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidConfig("hedge depth must be at least 1".into()));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("hedge discount {beta} outside (0, 1)")));
        }
        if !(floor >= 0.0 && floor < 1.0 / depth as f64) {
            return Err(Error::InvalidConfig(alloc::format!(
                "smoothing floor {floor} outside [0, 1/{depth})"
            )));
        }
        Ok(Self {
            alphas: vec![1.0 / depth as f64; depth],
            beta,
            floor,
            running_max: 0.0,
            frozen: false,
        })
    }

    /// Default floor `0.01 / L`.
    pub fn default_floor(depth: usize) -> f64 {
        0.01 / depth as f64
    }

    /// Fixed weights that are never updated. `alphas` must lie on the simplex.
    pub fn from_alphas(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Empty("hedge weights"));
        }
        ensure_finite("hedge weights", &alphas)?;
        let sum: f64 = alphas.iter().sum();
        if alphas.iter().any(|&a| a < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig("hedge weights must lie on the simplex".into()));
        }
        Ok(Self {
            alphas,
            beta: 0.99,
            floor: 0.0,
            running_max: 0.0,
            frozen: true,
        })
    }

    /// All mass on the deepest layer, frozen.
    pub fn last_layer_only(depth: usize) -> Result<Self> {
        let mut a = vec![0.0; depth];
        if let Some(last) = a.last_mut() {
            *last = 1.0;
        }
        Self::from_alphas(a)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn depth(&self) -> usize {
        self.alphas.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Largest per-layer loss seen so far; losses are divided by it before
    /// exponentiation so every exponent lies in `[0, 1]`.
    pub fn running_max(&self) -> f64 {
        self.running_max
    }

    /// `α_l ← α_l · β^(loss_l / max)`, normalized, then floored at `s` and
    /// renormalized so the floor still holds afterwards.
    pub fn update(&mut self, losses: &[f64]) -> Result<()> {
        ensure_len("hedge losses", self.depth(), losses.len())?;
        ensure_finite("hedge losses", losses)?;
        if losses.iter().any(|&l| l < 0.0) {
            return Err(Error::InvalidConfig("hedge losses must be non-negative".into()));
        }
        if self.frozen {
            return Ok(());
        }
        self.running_max = losses.iter().copied().fold(self.running_max, f64::max);
        let scale = if self.running_max > 0.0 { 1.0 / self.running_max } else { 0.0 };
        for (a, l) in self.alphas.iter_mut().zip(losses) {
            *a *= libm::pow(self.beta, l * scale);
        }
        let sum: f64 = self.alphas.iter().sum();
        for a in &mut self.alphas {
            *a /= sum;
        }
        self.apply_floor();
        Ok(())
    }

    fn apply_floor(&mut self) {
        if self.floor <= 0.0 {
            return;
        }
        let mut pinned = vec![false; self.depth()];
        loop {
            let n_pinned = pinned.iter().filter(|&&p| p).count();
            let free_mass = 1.0 - self.floor * n_pinned as f64;
            let free_sum: f64 = self
                .alphas
                .iter()
                .zip(&pinned)
                .filter(|(_, &p)| !p)
                .map(|(a, _)| a)
                .sum();
            let mut changed = false;
            for (a, p) in self.alphas.iter_mut().zip(pinned.iter_mut()) {
                if *p {
                    *a = self.floor;
                    continue;
                }
                *a *= free_mass / free_sum;
                if *a < self.floor {
                    *a = self.floor;
                    *p = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

/// Pure form of [`HedgeWeights::update`].
pub fn update_hedge(weights: &HedgeWeights, per_layer_losses: &[f64]) -> Result<HedgeWeights> {
    let mut next = weights.clone();
    next.update(per_layer_losses)?;
    Ok(next)
}

/// `Σ_l α_l · softmax(logits_l)`.
pub fn aggregate_predict(weights: &HedgeWeights, per_layer_logits: &[Vec<f64>]) -> Result<Vec<f64>> {
    ensure_len("per-layer logits", weights.depth(), per_layer_logits.len())?;
    let classes = per_layer_logits[0].len();
    let mut out = vec![0.0; classes];
    for (logits, &a) in per_layer_logits.iter().zip(weights.alphas()) {
        ensure_len("layer logits", classes, logits.len())?;
        ensure_finite("layer logits", logits)?;
        if a == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(softmax(logits)) {
            *o += a * p;
        }
    }
    Ok(out)
}

/// One linear head `latent -> C logits` per depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticClassifier {
    pub heads: Vec<Dense>,
}

impl ElasticClassifier {
    /// Zero-initialized heads, so a fresh classifier predicts uniformly.
    pub fn new(latent: usize, classes: usize, depth: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig(alloc::format!("need at least 2 classes, got {classes}")));
        }
        Ok(Self {
            heads: (0..depth).map(|_| Dense::zeros(latent, classes)).collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            heads: self
                .heads
                .iter()
                .map(|h| Dense::zeros(h.input_dim(), h.output_dim()))
                .collect(),
        }
    }

    pub fn classes(&self) -> usize {
        self.heads[0].output_dim()
    }

    pub fn depth(&self) -> usize {
        self.heads.len()
    }
}

impl Parameters for ElasticClassifier {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.heads.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.heads.visit_mut(f)
    }
}

/// Which network a loss belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Network over the vanishing space `S1`.
    Old,
    /// Network over the emerging space `S2`.
    New,
}

/// Loss terms of the HBP objective active for one network in one phase.
///
/// Variational loss runs over `T1 ∪ Tb` for `S1` and `Tb` for `S2`;
/// reconstruction only over `Tb` (and only on the `S2` side, which owns the
/// cross decoders); classification over `Tb ∪ T2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveMask {
    pub vi: bool,
    pub rec: bool,
    pub clf: bool,
}

impl ObjectiveMask {
    pub fn for_phase(phase: Phase, side: Side) -> Self {
        match (phase, side) {
            (Phase::Old, Side::Old) => Self { vi: true, rec: false, clf: false },
            (Phase::Old, Side::New) => Self { vi: false, rec: false, clf: false },
            (Phase::Overlap, Side::Old) => Self { vi: true, rec: false, clf: true },
            (Phase::Overlap, Side::New) => Self { vi: true, rec: true, clf: true },
            (Phase::New, Side::Old) => Self { vi: false, rec: false, clf: false },
            (Phase::New, Side::New) => Self { vi: false, rec: false, clf: true },
        }
    }

    pub fn any(&self) -> bool {
        self.vi || self.rec || self.clf
    }
}

/// Per-layer values of each loss term; a term that was not evaluated is `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerTerms {
    pub vi: Option<Vec<f64>>,
    pub rec: Option<Vec<f64>>,
    pub clf: Option<Vec<f64>>,
}

/// Sum of the active terms per layer under `mask`.
pub fn per_layer_losses(mask: ObjectiveMask, terms: &LayerTerms, depth: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; depth];
    for (active, term, name) in [
        (mask.vi, &terms.vi, "variational"),
        (mask.rec, &terms.rec, "reconstruction"),
        (mask.clf, &terms.clf, "classification"),
    ] {
        match (active, term) {
            (true, Some(v)) => {
                ensure_len("per-layer loss term", depth, v.len())?;
                ensure_finite("per-layer loss term", v)?;
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x;
                }
            }
            (true, None) => {
                return Err(Error::Phase(alloc::format!("{name} loss is active but was not evaluated")));
            }
            (false, _) => {}
        }
    }
    Ok(out)
}
