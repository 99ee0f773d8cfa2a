//! Phase-driven learner: two elastic networks, the cross decoders, two hedge
//! simplexes and the old/new ensemble, plus the ablations and the baseline.

pub mod baseline;
pub mod linear_map;
pub mod network;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::ensemble::{blend, EnsembleState};
use crate::error::{ensure_len, Error, Result};
use crate::eval::{MetricsLog, MetricsRow, OcaTracker};
use crate::hbp::{ElasticClassifier, HedgeWeights, ObjectiveMask, Side};
use crate::nn::sgd_step;
use crate::rng::{RngState, STREAM_INIT, STREAM_NOISE};
use crate::stream::{Instance, Phase, PreparedStream};
use crate::vae::{reconstruct_from_codes, VaePair};

pub use baseline::ZeroPadModel;
pub use linear_map::{fit_linear_map, LinearMap};
pub use network::{
    side_forward, side_gradients, CrossTarget, LossWeights, SideForward, SideGradients, SideRef, SideTargets,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Old3s,
    OldLinear,
    OldFd,
    ZeroPad,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] = [Self::Old3s, Self::OldLinear, Self::OldFd, Self::ZeroPad];

    pub fn name(self) -> &'static str {
        match self {
            Self::Old3s => "old3s",
            Self::OldLinear => "old_linear",
            Self::OldFd => "old_fd",
            Self::ZeroPad => "zero_pad",
        }
    }
}

fn d_latent() -> usize {
    16
}
fn d_hidden() -> usize {
    128
}
fn d_depth() -> usize {
    3
}
fn d_eta() -> f64 {
    0.01
}
fn d_beta() -> f64 {
    0.99
}
fn d_lr() -> f64 {
    0.05
}
fn d_kl() -> f64 {
    0.001
}
fn d_one() -> f64 {
    1.0
}
fn d_true() -> bool {
    true
}
fn d_l1() -> f64 {
    baseline::L1
}
fn d_ridge() -> f64 {
    linear_map::RIDGE
}

/// Architecture and optimizer settings shared by every variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_latent")]
    pub latent: usize,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    /// Number of encoder layers `L`, each with its own head.
    #[serde(default = "d_depth")]
    pub depth: usize,
    /// Ensemble rate.
    #[serde(default = "d_eta")]
    pub eta: f64,
    /// Hedge discount.
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    /// Weight of `KL(q ‖ N(0, I))` in the variational loss; `1.0` is the plain
    /// evidence lower bound.
    #[serde(default = "d_kl")]
    pub kl_weight: f64,
    /// Weight of `KL(q_s1 ‖ q_s2)` in the reconstruction loss.
    #[serde(default = "d_kl")]
    pub align_weight: f64,
    /// Weight of the reconstruction loss relative to the other terms.
    #[serde(default = "d_one")]
    pub rec_weight: f64,
    /// Hedge floor `s`; `None` means `0.01 / L`.
    #[serde(default)]
    pub hedge_floor: Option<f64>,
    /// Copy the `S1` decoders into the cross decoders when the overlap starts.
    #[serde(default = "d_true")]
    pub warm_start_cross: bool,
    #[serde(default = "d_l1")]
    pub zero_pad_l1: f64,
    #[serde(default = "d_ridge")]
    pub ridge: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent: d_latent(),
            hidden: d_hidden(),
            depth: d_depth(),
            eta: d_eta(),
            beta: d_beta(),
            learning_rate: d_lr(),
            kl_weight: d_kl(),
            align_weight: d_kl(),
            rec_weight: d_one(),
            hedge_floor: None,
            warm_start_cross: true,
            zero_pad_l1: d_l1(),
            ridge: d_ridge(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.into()));
        if self.latent == 0 || self.hidden == 0 || self.depth == 0 {
            return bad("latent, hidden and depth must be positive");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.kl_weight >= 0.0 && self.kl_weight.is_finite()) {
            return bad("kl_weight must be non-negative");
        }
        if !(self.align_weight >= 0.0 && self.align_weight.is_finite()) {
            return bad("align_weight must be non-negative");
        }
        if !(self.rec_weight >= 0.0 && self.rec_weight.is_finite()) {
            return bad("rec_weight must be non-negative");
        }
        if let Some(s) = self.hedge_floor {
            if !(s >= 0.0 && s * (self.depth as f64) < 1.0) {
                return bad("hedge_floor must satisfy 0 <= s < 1/depth");
            }
        }
        if !(self.zero_pad_l1 >= 0.0 && self.zero_pad_l1.is_finite()) {
            return bad("zero_pad_l1 must be non-negative");
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be positive");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            prior: self.kl_weight,
            align: self.align_weight,
            rec: self.rec_weight,
        }
    }

    fn floor(&self, depth: usize) -> f64 {
        self.hedge_floor.unwrap_or_else(|| HedgeWeights::default_floor(depth))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub kind: VariantKind,
    /// Network depth for `old_fd`; must lie in `[1, L]`.
    pub fixed_depth: Option<usize>,
    pub model: ModelConfig,
    pub seed: u64,
}

impl VariantConfig {
    pub fn new(kind: VariantKind, model: ModelConfig, seed: u64) -> Self {
        let fixed_depth = (kind == VariantKind::OldFd).then_some(model.depth);
        Self {
            kind,
            fixed_depth,
            model,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        match (self.kind, self.fixed_depth) {
            (VariantKind::OldFd, Some(k)) if k >= 1 && k <= self.model.depth => Ok(()),
            (VariantKind::OldFd, _) => Err(Error::InvalidConfig(alloc::format!(
                "old_fd needs fixed_depth in [1, {}]",
                self.model.depth
            ))),
            (_, Some(_)) => Err(Error::InvalidConfig("fixed_depth only applies to old_fd".into())),
            _ => Ok(()),
        }
    }

    /// Depth of the networks actually built.
    pub fn effective_depth(&self) -> usize {
        match self.kind {
            VariantKind::OldFd => self.fixed_depth.unwrap_or(self.model.depth),
            VariantKind::ZeroPad => 1,
            _ => self.model.depth,
        }
    }
}

/// How `x̃_s1` is produced during `T2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reconstruction {
    Vae,
    Linear,
}

/// Everything one round produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub probs: Vec<f64>,
    pub predicted: usize,
    /// `−ln ŷ_y`, clamped at `1e-12`.
    pub loss: f64,
    /// Weight on the old classifier used for this prediction.
    pub p: Option<f64>,
    /// Hedge weights used for this prediction.
    pub alphas: Vec<f64>,
    pub pred_old: Option<Vec<f64>>,
    pub pred_new: Option<Vec<f64>>,
    /// Hedge-weighted cross-space reconstruction loss (overlap rounds only).
    pub rec_loss: Option<f64>,
}

/// Lowest index among the maxima.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn prediction_loss(probs: &[f64], y: usize) -> f64 {
    -libm::log(probs[y].max(1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Old3sModel {
    pub vae_pair: VaePair,
    pub clf_old: ElasticClassifier,
    pub clf_new: ElasticClassifier,
    pub hedge_old: HedgeWeights,
    pub hedge_new: HedgeWeights,
    pub ensemble: EnsembleState,
    pub phase: Phase,
    pub config: ModelConfig,
    pub reconstruction: Reconstruction,
    pub linear_map: Option<LinearMap>,
    buffer: Vec<(Vec<f64>, Vec<f64>)>,
    rng: RngState,
    classes: usize,
}

impl Old3sModel {
    /// Full-depth model with trainable hedge weights.
    pub fn new(config: ModelConfig, d1: usize, d2: usize, classes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let depth = config.depth;
        let floor = config.floor(depth);
        let hedge = HedgeWeights::uniform(depth, config.beta, floor)?;
        Self::build(config, d1, d2, classes, seed, depth, hedge, Reconstruction::Vae)
    }

    pub fn for_variant(variant: &VariantConfig, d1: usize, d2: usize, classes: usize) -> Result<Self> {
        variant.validate()?;
        let config = variant.model.clone();
        match variant.kind {
            VariantKind::Old3s => Self::new(config, d1, d2, classes, variant.seed),
            VariantKind::OldLinear => {
                let mut m = Self::new(config, d1, d2, classes, variant.seed)?;
                m.reconstruction = Reconstruction::Linear;
                Ok(m)
            }
            VariantKind::OldFd => {
                let depth = variant.effective_depth();
                let hedge = HedgeWeights::last_layer_only(depth)?;
                Self::build(config, d1, d2, classes, variant.seed, depth, hedge, Reconstruction::Vae)
            }
            VariantKind::ZeroPad => Err(Error::InvalidConfig("zero_pad is not an OLD3S model".into())),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        config: ModelConfig,
        d1: usize,
        d2: usize,
        classes: usize,
        seed: u64,
        depth: usize,
        hedge: HedgeWeights,
        reconstruction: Reconstruction,
    ) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidConfig("feature dimensions must be positive".into()));
        }
        let mut init = RngState::with_stream(seed, STREAM_INIT);
        let vae_pair = VaePair::new(d1, d2, config.hidden, config.latent, depth, &mut init)?;
        Ok(Self {
            vae_pair,
            clf_old: ElasticClassifier::new(config.latent, classes, depth)?,
            clf_new: ElasticClassifier::new(config.latent, classes, depth)?,
            hedge_old: hedge.clone(),
            hedge_new: hedge,
            ensemble: EnsembleState::new(config.eta)?,
            phase: Phase::Old,
            config,
            reconstruction,
            linear_map: None,
            buffer: Vec::new(),
            rng: RngState::with_stream(seed, STREAM_NOISE),
            classes,
        })
    }

    pub fn d1(&self) -> usize {
        self.vae_pair.vae1.encoder.input_dim()
    }

    pub fn d2(&self) -> usize {
        self.vae_pair.vae2.encoder.input_dim()
    }

    pub fn depth(&self) -> usize {
        self.hedge_old.depth()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn old_side(&self) -> SideRef<'_> {
        SideRef {
            vae: &self.vae_pair.vae1,
            classifier: &self.clf_old,
            hedge: &self.hedge_old,
        }
    }

    fn new_side(&self) -> SideRef<'_> {
        SideRef {
            vae: &self.vae_pair.vae2,
            classifier: &self.clf_new,
            hedge: &self.hedge_new,
        }
    }

    fn check_label(&self, y: usize) -> Result<()> {
        if y >= self.classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                classes: self.classes,
            });
        }
        Ok(())
    }

    /// Trains the `S1` network on `x_s1` with variational and classification terms.
    fn train_old(&mut self, fwd: &SideForward, x_s1: &[f64], y: usize) -> Result<()> {
        let mask = ObjectiveMask {
            clf: true,
            ..ObjectiveMask::for_phase(self.phase, Side::Old)
        };
        let targets = SideTargets { x: x_s1, y, mask, cross: None };
        let rng = &mut self.rng;
        let g = side_gradients(
            SideRef {
                vae: &self.vae_pair.vae1,
                classifier: &self.clf_old,
                hedge: &self.hedge_old,
            },
            fwd,
            &targets,
            self.config.loss_weights(),
            &mut |n| rng.normals(n),
        )?;
        let lr = self.config.learning_rate;
        sgd_step(&mut self.vae_pair.vae1, &g.vae, lr)?;
        sgd_step(&mut self.clf_old, &g.classifier, lr)?;
        self.hedge_old.update(&g.per_layer)
    }

    /// `T1` round: predict from the `S1` network, then train it.
    pub fn step_t1(&mut self, x_s1: &[f64], y: usize) -> Result<StepOutput> {
        if self.phase != Phase::Old {
            return Err(Error::Phase(alloc::format!("step_t1 called during {:?}", self.phase)));
        }
        ensure_len("x_s1", self.d1(), x_s1.len())?;
        self.check_label(y)?;
        let fwd = side_forward(self.old_side(), x_s1)?;
        let probs = fwd.probs.clone();
        let alphas = self.hedge_old.alphas().to_vec();
        let loss = prediction_loss(&probs, y);
        self.train_old(&fwd, x_s1, y)?;
        Ok(StepOutput {
            predicted: argmax(&probs),
            loss,
            probs,
            p: None,
            alphas,
            pred_old: None,
            pred_new: None,
            rec_loss: None,
        })
    }

    fn enter_overlap(&mut self) {
        self.phase = Phase::Overlap;
        if self.config.warm_start_cross {
            self.vae_pair.cross = self.vae_pair.vae1.decoder.clone();
        }
    }

    /// Overlap round: ensemble prediction, then train both networks; the `S2`
    /// network also learns to reconstruct `x_s1`.
    pub fn step_tb(&mut self, x_s1: &[f64], x_s2: &[f64], y: usize) -> Result<StepOutput> {
        match self.phase {
            Phase::Old => self.enter_overlap(),
            Phase::Overlap => {}
            Phase::New => return Err(Error::Phase("step_tb called after the overlap ended".into())),
        }
        ensure_len("x_s1", self.d1(), x_s1.len())?;
        ensure_len("x_s2", self.d2(), x_s2.len())?;
        self.check_label(y)?;
        let fwd_old = side_forward(self.old_side(), x_s1)?;
        let fwd_new = side_forward(self.new_side(), x_s2)?;
        let p = self.ensemble.p();
        let alphas = self.hedge_new.alphas().to_vec();
        let probs = blend(p, &fwd_old.probs, &fwd_new.probs)?;
        let loss = prediction_loss(&probs, y);
        self.ensemble.accumulate(
            prediction_loss(&fwd_old.probs, y),
            prediction_loss(&fwd_new.probs, y),
        )?;

        self.train_old(&fwd_old, x_s1, y)?;

        let mask = ObjectiveMask::for_phase(Phase::Overlap, Side::New);
        let targets = SideTargets {
            x: x_s2,
            y,
            mask,
            cross: Some(CrossTarget {
                decoders: &self.vae_pair.cross,
                x_s1,
                codes_s1: fwd_old.codes(),
            }),
        };
        let rng = &mut self.rng;
        let g = side_gradients(
            SideRef {
                vae: &self.vae_pair.vae2,
                classifier: &self.clf_new,
                hedge: &self.hedge_new,
            },
            &fwd_new,
            &targets,
            self.config.loss_weights(),
            &mut |n| rng.normals(n),
        )?;
        let rec_loss = g
            .terms
            .rec
            .as_ref()
            .map(|r| r.iter().zip(self.hedge_new.alphas()).map(|(l, a)| l * a).sum());
        let lr = self.config.learning_rate;
        sgd_step(&mut self.vae_pair.vae2, &g.vae, lr)?;
        sgd_step(&mut self.clf_new, &g.classifier, lr)?;
        if let Some(gc) = &g.cross {
            sgd_step(&mut self.vae_pair.cross, gc, lr)?;
        }
        self.hedge_new.update(&g.per_layer)?;
        if self.reconstruction == Reconstruction::Linear {
            self.buffer.push((x_s2.to_vec(), x_s1.to_vec()));
        }
        Ok(StepOutput {
            predicted: argmax(&probs),
            loss,
            probs,
            p: Some(p),
            alphas,
            pred_old: Some(fwd_old.probs),
            pred_new: Some(fwd_new.probs),
            rec_loss,
        })
    }

    fn enter_new(&mut self) -> Result<()> {
        if self.reconstruction == Reconstruction::Linear {
            let buffer = core::mem::take(&mut self.buffer);
            self.linear_map = Some(fit_linear_map(&buffer, self.config.ridge)?);
        }
        self.phase = Phase::New;
        Ok(())
    }

    /// `x̃_s1` from `x_s2` with the current reconstruction.
    pub fn reconstruct(&self, x_s2: &[f64]) -> Result<Vec<f64>> {
        let codes = self.vae_pair.vae2.encoder.encode(x_s2)?;
        self.reconstruct_with_codes(x_s2, &codes)
    }

    fn reconstruct_with_codes(&self, x_s2: &[f64], codes: &[crate::vae::GaussianCode]) -> Result<Vec<f64>> {
        match self.reconstruction {
            Reconstruction::Vae => reconstruct_from_codes(&self.vae_pair.cross, codes, &self.hedge_new),
            Reconstruction::Linear => match &self.linear_map {
                Some(map) => map.apply(x_s2),
                None => fit_linear_map(&self.buffer, self.config.ridge)?.apply(x_s2),
            },
        }
    }

    /// `T2` round: the old classifier sees `x̃_s1`, only the `S2` network trains.
    pub fn step_t2(&mut self, x_s2: &[f64], y: usize) -> Result<StepOutput> {
        match self.phase {
            Phase::Overlap => self.enter_new()?,
            Phase::New => {}
            Phase::Old => return Err(Error::Phase("step_t2 called before any overlap round".into())),
        }
        ensure_len("x_s2", self.d2(), x_s2.len())?;
        self.check_label(y)?;
        let fwd_new = side_forward(self.new_side(), x_s2)?;
        let x_rec = self.reconstruct_with_codes(x_s2, fwd_new.codes())?;
        let fwd_old = side_forward(self.old_side(), &x_rec)?;
        let p = self.ensemble.p();
        let alphas = self.hedge_new.alphas().to_vec();
        let probs = blend(p, &fwd_old.probs, &fwd_new.probs)?;
        let loss = prediction_loss(&probs, y);
        self.ensemble.accumulate(
            prediction_loss(&fwd_old.probs, y),
            prediction_loss(&fwd_new.probs, y),
        )?;

        let mask = ObjectiveMask::for_phase(Phase::New, Side::New);
        let targets = SideTargets {
            x: x_s2,
            y,
            mask,
            cross: None,
        };
        let rng = &mut self.rng;
        let g = side_gradients(
            SideRef {
                vae: &self.vae_pair.vae2,
                classifier: &self.clf_new,
                hedge: &self.hedge_new,
            },
            &fwd_new,
            &targets,
            self.config.loss_weights(),
            &mut |n| rng.normals(n),
        )?;
        let lr = self.config.learning_rate;
        sgd_step(&mut self.vae_pair.vae2.encoder, &g.vae.encoder, lr)?;
        sgd_step(&mut self.clf_new, &g.classifier, lr)?;
        self.hedge_new.update(&g.per_layer)?;
        Ok(StepOutput {
            predicted: argmax(&probs),
            loss,
            probs,
            p: Some(p),
            alphas,
            pred_old: Some(fwd_old.probs),
            pred_new: Some(fwd_new.probs),
            rec_loss: None,
        })
    }

    /// Dispatches on the instance phase.
    pub fn step(&mut self, inst: &Instance) -> Result<StepOutput> {
        match phase_inputs(inst)? {
            (Some(x1), None) => self.step_t1(x1, inst.y),
            (Some(x1), Some(x2)) => self.step_tb(x1, x2, inst.y),
            (None, Some(x2)) => self.step_t2(x2, inst.y),
            (None, None) => unreachable!("phase_inputs never returns two empty blocks"),
        }
    }
}

/// The feature blocks of `inst`, checked against its phase: `S1` only in `T1`,
/// both in `Tb`, `S2` only in `T2`.
pub fn phase_inputs(inst: &Instance) -> Result<(Option<&[f64]>, Option<&[f64]>)> {
    let (x1, x2) = (inst.x_s1.as_deref(), inst.x_s2.as_deref());
    let ok = match inst.phase {
        Phase::Old => x1.is_some() && x2.is_none(),
        Phase::Overlap => x1.is_some() && x2.is_some(),
        Phase::New => x1.is_none() && x2.is_some(),
    };
    if !ok {
        return Err(Error::Phase(alloc::format!(
            "round {} in {} carries S1={} S2={}",
            inst.t,
            inst.phase.tag(),
            x1.is_some(),
            x2.is_some()
        )));
    }
    Ok((x1, x2))
}

/// Any of the four runnable variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    Old3s(Old3sModel),
    ZeroPad(ZeroPadModel),
}

impl Learner {
    pub fn for_variant(variant: &VariantConfig, d1: usize, d2: usize, classes: usize) -> Result<Self> {
        variant.validate()?;
        match variant.kind {
            VariantKind::ZeroPad => Ok(Self::ZeroPad(ZeroPadModel::new(
                d1,
                d2,
                classes,
                variant.model.learning_rate,
                variant.model.zero_pad_l1,
            )?)),
            _ => Ok(Self::Old3s(Old3sModel::for_variant(variant, d1, d2, classes)?)),
        }
    }

    pub fn step(&mut self, inst: &Instance) -> Result<StepOutput> {
        match self {
            Self::Old3s(m) => m.step(inst),
            Self::ZeroPad(m) => m.step(inst),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Old3s(m) => m.depth(),
            Self::ZeroPad(_) => 1,
        }
    }
}

/// Single prequential pass of one variant over `stream`.
pub fn run_variant(config: &VariantConfig, stream: &PreparedStream) -> Result<MetricsLog> {
    run_variant_with(config, stream, |_, _| {})
}

/// [`run_variant`] with a hook called after every round.
pub fn run_variant_with<F>(config: &VariantConfig, stream: &PreparedStream, hook: F) -> Result<MetricsLog>
where
    F: FnMut(&Instance, &StepOutput),
{
    run_variant_model(config, stream, hook).map(|(log, _)| log)
}

/// [`run_variant_with`], also handing back the trained learner.
pub fn run_variant_model<F>(config: &VariantConfig, stream: &PreparedStream, mut hook: F) -> Result<(MetricsLog, Learner)>
where
    F: FnMut(&Instance, &StepOutput),
{
    let mut learner = Learner::for_variant(config, stream.d1(), stream.d2(), stream.classes)?;
    let window = stream.schedule.window;
    let mut tracker = OcaTracker::new(window)?;
    let mut rows = Vec::with_capacity(stream.schedule.n_total);
    for inst in stream.stream() {
        let out = learner.step(&inst).map_err(|e| match e {
            Error::NonFinite(what) => Error::Numerical {
                round: inst.t,
                message: String::from(what),
            },
            other => other,
        })?;
        let correct = out.predicted == inst.y;
        let oca = tracker.push(correct);
        hook(&inst, &out);
        rows.push(MetricsRow {
            t: inst.t,
            phase: inst.phase,
            correct,
            loss: out.loss,
            oca,
            p: out.p,
            alphas: out.alphas,
        });
    }
    let log = MetricsLog {
        variant: String::from(config.kind.name()),
        seed: config.seed,
        window,
        depth: learner.depth(),
        rows,
    };
    Ok((log, learner))
}
