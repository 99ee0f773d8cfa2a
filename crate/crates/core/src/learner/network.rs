//! One side of the model (encoder, own decoders, per-layer classifier heads,
//! hedge weights): forward pass and the gradient of the hedge-weighted objective.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_finite, Result};
use crate::hbp::{aggregate_predict, per_layer_losses, ElasticClassifier, HedgeWeights, LayerTerms, ObjectiveMask};
use crate::nn::{axpy, flatten, softmax_cross_entropy, Parameters};
use crate::stream::Phase;
use crate::vae::{loss_rec_with_noise, loss_vi_with_noise, CodeGrad, DecoderHead, EncoderTrace, GaussianCode, VaeNet};

/// Borrowed view of one side's trainable parts.
#[derive(Debug, Clone, Copy)]
pub struct SideRef<'a> {
    pub vae: &'a VaeNet,
    pub classifier: &'a ElasticClassifier,
    pub hedge: &'a HedgeWeights,
}

#[derive(Debug, Clone)]
pub struct SideForward {
    pub trace: EncoderTrace,
    pub logits: Vec<Vec<f64>>,
    /// Hedge-aggregated class probabilities.
    pub probs: Vec<f64>,
}

impl SideForward {
    pub fn codes(&self) -> &[GaussianCode] {
        &self.trace.codes
    }
}

pub fn side_forward(side: SideRef<'_>, x: &[f64]) -> Result<SideForward> {
    let trace = side.vae.encoder.trace(x)?;
    let logits = side
        .classifier
        .heads
        .iter()
        .zip(&trace.codes)
        .map(|(h, c)| h.forward(&c.mu))
        .collect::<Result<Vec<_>>>()?;
    let probs = aggregate_predict(side.hedge, &logits)?;
    Ok(SideForward { trace, logits, probs })
}

/// Multipliers on the KL terms and the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// `KL(q ‖ N(0, I))` in the variational loss.
    pub prior: f64,
    /// `KL(q_s1 ‖ q_s2)` in the reconstruction loss.
    pub align: f64,
    /// The whole reconstruction loss.
    pub rec: f64,
}

/// Target for the cross-space reconstruction term.
#[derive(Debug, Clone, Copy)]
pub struct CrossTarget<'a> {
    pub decoders: &'a DecoderHead,
    pub x_s1: &'a [f64],
    /// `S1` posteriors for the same instance; treated as constants.
    pub codes_s1: &'a [GaussianCode],
}

#[derive(Debug, Clone, Copy)]
pub struct SideTargets<'a> {
    pub x: &'a [f64],
    pub y: usize,
    pub mask: ObjectiveMask,
    pub cross: Option<CrossTarget<'a>>,
}

#[derive(Debug, Clone)]
pub struct SideGradients {
    pub vae: VaeNet,
    pub classifier: ElasticClassifier,
    pub cross: Option<DecoderHead>,
    pub terms: LayerTerms,
    /// Unweighted per-layer sum of the active terms.
    pub per_layer: Vec<f64>,
    /// `Σ_l α_l · per_layer_l`, the value whose gradient is returned.
    pub objective: f64,
}

/// `dst += scale · src` over matching parameter layouts.
pub(crate) fn add_scaled<P: Parameters + ?Sized>(dst: &mut P, src: &P, scale: f64) {
    let flat = flatten(src);
    let mut offset = 0;
    dst.visit_mut(&mut |s| {
        axpy(s, scale, &flat[offset..offset + s.len()]);
        offset += s.len();
    });
}

/// Gradient of `Σ_l α_l (VI_l + REC_l + CLF_l)` restricted to the terms in
/// `targets.mask`, with `α` held constant. Layers with `α_l = 0` are skipped.
/// `noise(n)` supplies the reparameterization noise, first for the
/// variational term then for the reconstruction term of each layer.
pub fn side_gradients(
    side: SideRef<'_>,
    fwd: &SideForward,
    targets: &SideTargets<'_>,
    weights: LossWeights,
    noise: &mut dyn FnMut(usize) -> Vec<f64>,
) -> Result<SideGradients> {
    let depth = side.hedge.depth();
    let latent = side.vae.encoder.latent_dim();
    let alphas = side.hedge.alphas();
    let mask = targets.mask;
    let mut g_vae = side.vae.zeros_like();
    let mut g_clf = side.classifier.zeros_like();
    let mut g_cross = targets.cross.map(|c| c.decoders.zeros_like());
    let mut vi = mask.vi.then(|| vec![0.0; depth]);
    let mut rec = (mask.rec && targets.cross.is_some()).then(|| vec![0.0; depth]);
    let mut clf = mask.clf.then(|| vec![0.0; depth]);
    let mut code_grads: Vec<Option<CodeGrad>> = vec![None; depth];

    for l in 0..depth {
        let a = alphas[l];
        if a == 0.0 {
            continue;
        }
        let code = &fwd.trace.codes[l];
        let mut cg = CodeGrad::zeros(latent);
        if let Some(vi) = vi.as_mut() {
            let dec = &side.vae.decoder.per_layer[l];
            let out = loss_vi_with_noise(targets.x, code, dec, weights.prior, noise(latent))?;
            vi[l] = out.value;
            cg.add_scaled(a, &out.code);
            add_scaled(&mut g_vae.decoder.per_layer[l], &out.decoder, a);
        }
        if let (Some(rec), Some(cross)) = (rec.as_mut(), targets.cross) {
            let dec = &cross.decoders.per_layer[l];
            let out = loss_rec_with_noise(
                cross.x_s1,
                &cross.codes_s1[l],
                code,
                dec,
                weights.align,
                Phase::Overlap,
                noise(latent),
            )?;
            rec[l] = weights.rec * out.value;
            cg.add_scaled(a * weights.rec, &out.code);
            if let Some(gc) = g_cross.as_mut() {
                add_scaled(&mut gc.per_layer[l], &out.decoder, a * weights.rec);
            }
        }
        if let Some(clf) = clf.as_mut() {
            let (loss, g_logits) = softmax_cross_entropy(&fwd.logits[l], targets.y)?;
            clf[l] = loss;
            let scaled: Vec<f64> = g_logits.iter().map(|g| g * a).collect();
            let g_mu = side.classifier.heads[l].backward_accumulate(&code.mu, &scaled, &mut g_clf.heads[l]);
            axpy(&mut cg.mu, 1.0, &g_mu);
        }
        code_grads[l] = Some(cg);
    }

    side.vae
        .encoder
        .backward_accumulate(&fwd.trace, &code_grads, &mut g_vae.encoder);

    let terms = LayerTerms { vi, rec, clf };
    let effective = ObjectiveMask {
        rec: terms.rec.is_some(),
        ..mask
    };
    let per_layer = per_layer_losses(effective, &terms, depth)?;
    ensure_finite("per-layer loss", &per_layer)?;
    let objective = per_layer.iter().zip(alphas).map(|(l, a)| l * a).sum();
    Ok(SideGradients {
        vae: g_vae,
        classifier: g_clf,
        cross: g_cross,
        terms,
        per_layer,
        objective,
    })
}
