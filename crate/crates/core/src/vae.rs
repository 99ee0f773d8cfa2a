//! Variational encoders with a Gaussian head at every depth, their decoders,
//! the two KL terms and the cross-space reconstruction `S2 -> S1`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::hbp::HedgeWeights;
use crate::nn::{
    axpy, clamp_log_var, sample_with_noise, Activation, Dense, Mlp, Parameters, LOG_VAR_MAX, LOG_VAR_MIN,
};
use crate::rng::RngState;
use crate::stream::Phase;

/// Diagonal Gaussian `N(mu, exp(log_var))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCode {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl GaussianCode {
    /// Validates lengths and finiteness; `log_var` is clamped into range.
    pub fn new(mu: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        ensure_len("gaussian code", mu.len(), log_var.len())?;
        ensure_finite("gaussian mean", &mu)?;
        ensure_finite("gaussian log-variance", &log_var)?;
        let log_var = log_var.into_iter().map(clamp_log_var).collect();
        Ok(Self { mu, log_var })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Gradient with respect to a code's mean and (clamped) log-variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeGrad {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl CodeGrad {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mu: vec![0.0; dim],
            log_var: vec![0.0; dim],
        }
    }

    pub fn add_scaled(&mut self, scale: f64, other: &CodeGrad) {
        axpy(&mut self.mu, scale, &other.mu);
        axpy(&mut self.log_var, scale, &other.log_var);
    }
}

/// `KL(N(mu, σ²) ‖ N(0, I)) = ½ Σ (mu² + σ² − 1 − log σ²)`.
pub fn kl_standard(code: &GaussianCode) -> f64 {
    code.mu
        .iter()
        .zip(&code.log_var)
        .map(|(m, lv)| 0.5 * (m * m + libm::exp(*lv) - 1.0 - lv))
        .sum()
}

pub fn kl_standard_grad(code: &GaussianCode) -> CodeGrad {
    CodeGrad {
        mu: code.mu.clone(),
        log_var: code.log_var.iter().map(|lv| 0.5 * (libm::exp(*lv) - 1.0)).collect(),
    }
}

/// `KL(a ‖ b)` for diagonal Gaussians.
pub fn kl_between(a: &GaussianCode, b: &GaussianCode) -> Result<f64> {
    ensure_len("kl_between", a.dim(), b.dim())?;
    Ok((0..a.dim())
        .map(|i| {
            let d = a.mu[i] - b.mu[i];
            0.5 * (b.log_var[i] - a.log_var[i]) + (libm::exp(a.log_var[i]) + d * d) / (2.0 * libm::exp(b.log_var[i]))
                - 0.5
        })
        .sum())
}

/// Gradient of `KL(a ‖ b)` with respect to `b` only.
pub fn kl_between_grad_b(a: &GaussianCode, b: &GaussianCode) -> CodeGrad {
    let mut g = CodeGrad::zeros(b.dim());
    for i in 0..b.dim() {
        let inv_var_b = libm::exp(-b.log_var[i]);
        let d = b.mu[i] - a.mu[i];
        g.mu[i] = d * inv_var_b;
        g.log_var[i] = 0.5 - 0.5 * (libm::exp(a.log_var[i]) + d * d) * inv_var_b;
    }
    g
}

/// Mean squared error over features and its gradient with respect to `estimate`.
pub fn reconstruction_error(target: &[f64], estimate: &[f64]) -> (f64, Vec<f64>) {
    let n = target.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = estimate
        .iter()
        .zip(target)
        .map(|(e, t)| {
            let r = e - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    (loss / n, grad)
}

/// Starting bias of the log-variance heads. A unit-variance start buries the
/// codes of a freshly trained encoder in sampling noise.
pub const INIT_LOG_VAR: f64 = -6.0;

/// Encoder trunk `h(l) = relu(W_l h(l−1))`, `h(0) = x`, with a mean head and a
/// log-variance head reading every hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderStack {
    pub layers: Vec<Dense>,
    pub mu_heads: Vec<Dense>,
    pub log_var_heads: Vec<Dense>,
}

/// Everything the backward pass of an [`EncoderStack`] needs.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// `hidden[0]` is the input, `hidden[l]` the output of layer `l`.
    pub hidden: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    /// Log-variances before clamping; gradients vanish outside the clamp range.
    pub raw_log_var: Vec<Vec<f64>>,
    pub codes: Vec<GaussianCode>,
}

impl EncoderStack {
    pub fn new(input: usize, hidden: usize, latent: usize, depth: usize, rng: &mut RngState) -> Result<Self> {
        if depth == 0 || input == 0 || hidden == 0 || latent == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "encoder dims must be positive (input {input}, hidden {hidden}, latent {latent}, depth {depth})"
            )));
        }
        let layers = (0..depth)
            .map(|l| Dense::glorot(if l == 0 { input } else { hidden }, hidden, rng))
            .collect();
        let mu_heads = (0..depth).map(|_| Dense::glorot(hidden, latent, rng)).collect();
        let log_var_heads = (0..depth)
            .map(|_| {
                let mut head = Dense::glorot(hidden, latent, rng);
                head.bias.fill(INIT_LOG_VAR);
                head
            })
            .collect();
        Ok(Self {
            layers,
            mu_heads,
            log_var_heads,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |l: &Dense| Dense::zeros(l.input_dim(), l.output_dim());
        Self {
            layers: self.layers.iter().map(z).collect(),
            mu_heads: self.mu_heads.iter().map(z).collect(),
            log_var_heads: self.log_var_heads.iter().map(z).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu_heads[0].output_dim()
    }

    /// One code per layer, shallow to deep.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<GaussianCode>> {
        Ok(self.trace(x)?.codes)
    }

    pub fn trace(&self, x: &[f64]) -> Result<EncoderTrace> {
        ensure_len("encoder input", self.input_dim(), x.len())?;
        ensure_finite("encoder input", x)?;
        self.trace_upto(x, self.depth())
    }

    /// Forward pass that only evaluates the first `depth` layers.
    pub(crate) fn trace_upto(&self, x: &[f64], depth: usize) -> Result<EncoderTrace> {
        let mut hidden = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        let mut raw_log_var = Vec::with_capacity(depth);
        let mut codes = Vec::with_capacity(depth);
        hidden.push(x.to_vec());
        for l in 0..depth {
            let a = self.layers[l].forward_unchecked(&hidden[l]);
            let h: Vec<f64> = a.iter().map(|&v| Activation::Relu.apply_scalar(v)).collect();
            let mu = self.mu_heads[l].forward_unchecked(&h);
            let raw = self.log_var_heads[l].forward_unchecked(&h);
            ensure_finite("encoder output", &mu)?;
            ensure_finite("encoder output", &raw)?;
            codes.push(GaussianCode {
                mu,
                log_var: raw.iter().copied().map(clamp_log_var).collect(),
            });
            raw_log_var.push(raw);
            pre.push(a);
            hidden.push(h);
        }
        Ok(EncoderTrace {
            hidden,
            pre,
            raw_log_var,
            codes,
        })
    }

    /// Backpropagates per-layer code gradients (entries may be `None` for
    /// layers without loss) into `grad`. Layers beyond the trace depth are skipped.
    pub fn backward_accumulate(&self, trace: &EncoderTrace, code_grads: &[Option<CodeGrad>], grad: &mut EncoderStack) {
        let depth = trace.pre.len();
        let width = self.layers[0].output_dim();
        let mut g_h = vec![0.0; width];
        let mut active = false;
        for l in (0..depth).rev() {
            if let Some(cg) = code_grads.get(l).and_then(Option::as_ref) {
                let h = &trace.hidden[l + 1];
                let from_mu = self.mu_heads[l].backward_accumulate(h, &cg.mu, &mut grad.mu_heads[l]);
                let masked: Vec<f64> = cg
                    .log_var
                    .iter()
                    .zip(&trace.raw_log_var[l])
                    .map(|(g, raw)| if (LOG_VAR_MIN..=LOG_VAR_MAX).contains(raw) { *g } else { 0.0 })
                    .collect();
                let from_lv = self.log_var_heads[l].backward_accumulate(h, &masked, &mut grad.log_var_heads[l]);
                axpy(&mut g_h, 1.0, &from_mu);
                axpy(&mut g_h, 1.0, &from_lv);
                active = true;
            }
            if !active {
                continue;
            }
            for (g, &a) in g_h.iter_mut().zip(&trace.pre[l]) {
                *g *= Activation::Relu.derivative_scalar(a);
            }
            g_h = self.layers[l].backward_accumulate(&trace.hidden[l], &g_h, &mut grad.layers[l]);
        }
    }
}

impl Parameters for EncoderStack {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layers.visit(f);
        self.mu_heads.visit(f);
        self.log_var_heads.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.visit_mut(f);
        self.mu_heads.visit_mut(f);
        self.log_var_heads.visit_mut(f);
    }
}

/// One decoder `latent -> hidden -> data` per encoder layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderHead {
    pub per_layer: Vec<Mlp>,
}

impl DecoderHead {
    pub fn new(latent: usize, hidden: usize, output: usize, depth: usize, rng: &mut RngState) -> Self {
        Self {
            per_layer: (0..depth).map(|_| Mlp::glorot(&[latent, hidden, output], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            per_layer: self.per_layer.iter().map(Mlp::zeros_like).collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.per_layer[0].output_dim()
    }
}

impl Parameters for DecoderHead {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.per_layer.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.per_layer.visit_mut(f)
    }
}

/// Encoder plus its own-space decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeNet {
    pub encoder: EncoderStack,
    pub decoder: DecoderHead,
}

impl VaeNet {
    pub fn new(input: usize, hidden: usize, latent: usize, depth: usize, rng: &mut RngState) -> Result<Self> {
        let encoder = EncoderStack::new(input, hidden, latent, depth, rng)?;
        let decoder = DecoderHead::new(latent, hidden, input, depth, rng);
        Ok(Self { encoder, decoder })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }
}

impl Parameters for VaeNet {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.encoder.visit(f);
        self.decoder.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}

/// VAE on `S1`, VAE on `S2`, and the cross decoders `latent(S2) -> S1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaePair {
    pub vae1: VaeNet,
    pub vae2: VaeNet,
    pub cross: DecoderHead,
}

impl VaePair {
    pub fn new(d1: usize, d2: usize, hidden: usize, latent: usize, depth: usize, rng: &mut RngState) -> Result<Self> {
        let vae1 = VaeNet::new(d1, hidden, latent, depth, rng)?;
        let vae2 = VaeNet::new(d2, hidden, latent, depth, rng)?;
        let cross = DecoderHead::new(latent, hidden, d1, depth, rng);
        Ok(Self { vae1, vae2, cross })
    }
}

/// Loss value with gradients for the code it was evaluated on and the decoder used.
#[derive(Debug, Clone)]
pub struct VaeLoss {
    pub value: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub code: CodeGrad,
    pub decoder: Mlp,
    pub noise: Vec<f64>,
}

/// Shared tail of both losses: decode a reparameterized sample of `code`,
/// score it against `target`, push the error back to `(mu, log_var)`.
fn decode_sample(target: &[f64], code: &GaussianCode, decoder: &Mlp, noise: &[f64]) -> Result<(f64, CodeGrad, Mlp)> {
    ensure_len("decoder output", target.len(), decoder.output_dim())?;
    ensure_len("decoder input", code.dim(), decoder.input_dim())?;
    let z = sample_with_noise(&code.mu, &code.log_var, noise)?;
    let trace = decoder.trace(&z)?;
    let (rec, g_out) = reconstruction_error(target, trace.output());
    let mut g_dec = decoder.zeros_like();
    let g_z = decoder.backward_accumulate(&trace, &g_out, &mut g_dec);
    let mut g = CodeGrad::zeros(code.dim());
    for i in 0..code.dim() {
        g.mu[i] = g_z[i];
        g.log_var[i] = g_z[i] * 0.5 * libm::exp(code.log_var[i] * 0.5) * noise[i];
    }
    Ok((rec, g, g_dec))
}

/// `ℓ(x, D(z)) + kl_weight · KL(q ‖ N(0, I))` with `z` reparameterized from `code`.
pub fn loss_vi(x: &[f64], code: &GaussianCode, decoder: &Mlp, kl_weight: f64, rng: &mut RngState) -> Result<VaeLoss> {
    let noise = rng.normals(code.dim());
    loss_vi_with_noise(x, code, decoder, kl_weight, noise)
}

pub fn loss_vi_with_noise(
    x: &[f64],
    code: &GaussianCode,
    decoder: &Mlp,
    kl_weight: f64,
    noise: Vec<f64>,
) -> Result<VaeLoss> {
    let (reconstruction, mut g, g_dec) = decode_sample(x, code, decoder, &noise)?;
    let kl = kl_standard(code);
    g.add_scaled(kl_weight, &kl_standard_grad(code));
    Ok(VaeLoss {
        value: reconstruction + kl_weight * kl,
        reconstruction,
        kl,
        code: g,
        decoder: g_dec,
        noise,
    })
}

/// `ℓ(x_s1, D21(z_s2)) + kl_weight · KL(q_s1 ‖ q_s2)`. Gradients only reach
/// `code_s2` and the cross decoder; the `S1` posterior is a fixed target.
pub fn loss_rec(
    x_s1: &[f64],
    code_s1: &GaussianCode,
    code_s2: &GaussianCode,
    cross_decoder: &Mlp,
    kl_weight: f64,
    phase: Phase,
    rng: &mut RngState,
) -> Result<VaeLoss> {
    let noise = rng.normals(code_s2.dim());
    loss_rec_with_noise(x_s1, code_s1, code_s2, cross_decoder, kl_weight, phase, noise)
}

pub fn loss_rec_with_noise(
    x_s1: &[f64],
    code_s1: &GaussianCode,
    code_s2: &GaussianCode,
    cross_decoder: &Mlp,
    kl_weight: f64,
    phase: Phase,
    noise: Vec<f64>,
) -> Result<VaeLoss> {
    if phase != Phase::Overlap {
        return Err(Error::Phase(alloc::format!(
            "cross-space reconstruction loss needs both spaces, called during {phase:?}"
        )));
    }
    let (reconstruction, mut g, g_dec) = decode_sample(x_s1, code_s2, cross_decoder, &noise)?;
    let kl = kl_between(code_s1, code_s2)?;
    g.add_scaled(kl_weight, &kl_between_grad_b(code_s1, code_s2));
    Ok(VaeLoss {
        value: reconstruction + kl_weight * kl,
        reconstruction,
        kl,
        code: g,
        decoder: g_dec,
        noise,
    })
}

/// `x̃_s1 = Σ_l α_l · D21_l(mu_l(x_s2))`, posterior means, no sampling.
pub fn reconstruct(pair: &VaePair, x_s2: &[f64], weights: &HedgeWeights) -> Result<Vec<f64>> {
    let codes = pair.vae2.encoder.encode(x_s2)?;
    reconstruct_from_codes(&pair.cross, &codes, weights)
}

pub fn reconstruct_from_codes(cross: &DecoderHead, codes: &[GaussianCode], weights: &HedgeWeights) -> Result<Vec<f64>> {
    ensure_len("reconstruction depth", cross.per_layer.len(), codes.len())?;
    ensure_len("reconstruction hedge weights", codes.len(), weights.depth())?;
    let mut out = vec![0.0; cross.output_dim()];
    for ((dec, code), &a) in cross.per_layer.iter().zip(codes).zip(weights.alphas()) {
        if a == 0.0 {
            continue;
        }
        axpy(&mut out, a, &dec.forward(&code.mu)?);
    }
    Ok(out)
}
