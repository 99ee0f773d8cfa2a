//! Minimal differentiable substrate: dense layers, activations, softmax
//! cross-entropy, reparameterized Gaussian sampling, SGD and a central
//! finite-difference gradient check.
//!
//! Everything is double precision and single-instance. Gradients are stored in
//! containers with the same shape as the parameters they belong to, so a
//! `Dense` doubles as its own gradient type.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::rng::RngState;

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("matrix data", rows * cols, data.len())?;
        ensure_finite("matrix data", &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len("matrix-vector product", self.cols, v.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        ensure_len("transposed matrix-vector product", self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &g) in v.iter().enumerate() {
            if g != 0.0 {
                axpy(&mut out, g, self.row(r));
            }
        }
        Ok(out)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a·x`.
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Affine map `W·x + b` with `W` stored out × in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Matrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Glorot-uniform weights in `±√(6/(in+out))`, zero bias.
    pub fn glorot(input: usize, output: usize, rng: &mut RngState) -> Self {
        let limit = libm::sqrt(6.0 / (input + output) as f64);
        let mut layer = Self::zeros(input, output);
        for w in layer.weights.as_mut_slice() {
            *w = rng.uniform(-limit, limit);
        }
        layer
    }

    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        ensure_len("dense bias", weights.rows(), bias.len())?;
        ensure_finite("dense bias", &bias)?;
        Ok(Self { weights, bias })
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_len("dense forward", self.input_dim(), input.len())?;
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        self.bias
            .iter()
            .enumerate()
            .map(|(r, b)| b + dot(self.weights.row(r), input))
            .collect()
    }

    /// Returns `(grad_input, grad_layer)` where `grad_layer` holds
    /// `grad_out ⊗ input` and `grad_out`.
    pub fn backward(&self, input: &[f64], grad_out: &[f64]) -> Result<(Vec<f64>, Dense)> {
        ensure_len("dense backward input", self.input_dim(), input.len())?;
        ensure_len("dense backward grad", self.output_dim(), grad_out.len())?;
        let mut grad = Dense::zeros(self.input_dim(), self.output_dim());
        let grad_input = self.backward_accumulate(input, grad_out, &mut grad);
        Ok((grad_input, grad))
    }

    /// Adds this sample's parameter gradient into `grad`, returns the input gradient.
    pub(crate) fn backward_accumulate(
        &self,
        input: &[f64],
        grad_out: &[f64],
        grad: &mut Dense,
    ) -> Vec<f64> {
        let cols = self.input_dim();
        let mut grad_input = vec![0.0; cols];
        for (r, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[r] += g;
            let gw = &mut grad.weights.as_mut_slice()[r * cols..(r + 1) * cols];
            axpy(gw, g, input);
            axpy(&mut grad_input, g, self.weights.row(r));
        }
        grad_input
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply_scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative evaluated at the pre-activation `x`.
    #[inline]
    pub fn derivative_scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
        }
    }

    pub fn apply(self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_finite("activation input", x)?;
        Ok(x.iter().map(|&v| self.apply_scalar(v)).collect())
    }

    pub fn derivative(self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_finite("activation input", x)?;
        Ok(x.iter().map(|&v| self.derivative_scalar(v)).collect())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Returns `(−log softmax(logits)[label], softmax − one_hot(label))`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    ensure_finite("logits", logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| libm::exp(l - max)).sum();
    let log_z = max + libm::log(sum);
    let loss = log_z - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|&l| libm::exp(l - log_z)).collect();
    grad[label] -= 1.0;
    Ok((loss.max(0.0), grad))
}

#[inline]
pub fn clamp_log_var(v: f64) -> f64 {
    v.clamp(LOG_VAR_MIN, LOG_VAR_MAX)
}

/// `z = mu + exp(log_var/2)·ζ`, `ζ ~ N(0, I)`. Returns `(z, ζ)`.
pub fn sample_gaussian(mu: &[f64], log_var: &[f64], rng: &mut RngState) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_len("sample_gaussian", mu.len(), log_var.len())?;
    let noise = rng.normals(mu.len());
    let z = sample_with_noise(mu, log_var, &noise)?;
    Ok((z, noise))
}

/// Reparameterized sample with the noise supplied by the caller.
pub fn sample_with_noise(mu: &[f64], log_var: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    ensure_len("sample_gaussian", mu.len(), log_var.len())?;
    ensure_len("sample_gaussian noise", mu.len(), noise.len())?;
    Ok(mu
        .iter()
        .zip(log_var)
        .zip(noise)
        .map(|((m, lv), n)| m + libm::exp(clamp_log_var(*lv) * 0.5) * n)
        .collect())
}

/// Stack of dense layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Inputs to each layer and each layer's pre-activation, kept for backward.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `dims = [in, hidden.., out]`.
    pub fn glorot(dims: &[usize], rng: &mut RngState) -> Self {
        Self {
            layers: dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, Dense::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Dense::output_dim)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.pre.pop().unwrap_or_default())
    }

    pub fn trace(&self, input: &[f64]) -> Result<MlpTrace> {
        ensure_len("mlp input", self.input_dim(), input.len())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut h = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let a = layer.forward_unchecked(&h);
            let next = if i + 1 < n {
                a.iter().map(|&v| Activation::Relu.apply_scalar(v)).collect()
            } else {
                Vec::new()
            };
            inputs.push(core::mem::replace(&mut h, next));
            pre.push(a);
        }
        Ok(MlpTrace { inputs, pre })
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward_accumulate(&self, trace: &MlpTrace, grad_out: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut g = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            if i + 1 < self.layers.len() {
                for (gi, &a) in g.iter_mut().zip(&trace.pre[i]) {
                    *gi *= Activation::Relu.derivative_scalar(a);
                }
            }
            g = self.layers[i].backward_accumulate(&trace.inputs[i], &g, &mut grad.layers[i]);
        }
        g
    }
}

/// Visitor over every trainable scalar of a model, in a fixed order.
///
/// The visiting order defines the flat parameter layout used by [`flatten`],
/// [`assign`], [`sgd_step`] and the finite-difference check.
pub trait Parameters {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));
}

impl Parameters for Dense {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        f(self.weights.as_slice());
        f(&self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.weights.as_mut_slice());
        f(&mut self.bias);
    }
}

impl<P: Parameters> Parameters for [P] {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for p in self {
            p.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for p in self {
            p.visit_mut(f);
        }
    }
}

impl<P: Parameters> Parameters for Vec<P> {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.as_slice().visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.as_mut_slice().visit_mut(f)
    }
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.layers.visit(f)
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.layers.visit_mut(f)
    }
}

pub fn parameter_count<P: Parameters + ?Sized>(p: &P) -> usize {
    let mut n = 0;
    p.visit(&mut |s| n += s.len());
    n
}

pub fn flatten<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(parameter_count(p));
    p.visit(&mut |s| out.extend_from_slice(s));
    out
}

pub fn assign<P: Parameters + ?Sized>(p: &mut P, values: &[f64]) -> Result<()> {
    ensure_len("parameter assignment", parameter_count(p), values.len())?;
    let mut offset = 0;
    p.visit_mut(&mut |s| {
        s.copy_from_slice(&values[offset..offset + s.len()]);
        offset += s.len();
    });
    Ok(())
}

/// `p ← p − lr·g` over every parameter.
pub fn sgd_step<P: Parameters + ?Sized>(params: &mut P, grads: &P, learning_rate: f64) -> Result<()> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let g = flatten(grads);
    ensure_len("sgd step", parameter_count(params), g.len())?;
    let mut offset = 0;
    params.visit_mut(&mut |s| {
        for (p, gi) in s.iter_mut().zip(&g[offset..]) {
            *p -= learning_rate * gi;
        }
        offset += s.len();
    });
    Ok(())
}

/// Largest relative deviation between `analytic` and central differences of
/// `loss` around `params`, with denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(mut loss: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(alloc::format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    ensure_len("finite-difference gradient", params.len(), analytic.len())?;
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        probe[i] = params[i] + eps;
        let up = loss(&probe)?;
        probe[i] = params[i] - eps;
        let down = loss(&probe)?;
        probe[i] = params[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite("loss during finite-difference probing"));
        }
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// [`finite_diff_check`] with Richardson-extrapolated central differences,
/// `(4·D(eps) − D(2·eps)) / 3`, whose truncation error is `O(eps⁴)`. The larger
/// step this allows keeps rounding noise below the `1e-8` denominator floor.
pub fn finite_diff_check_extrapolated<F>(mut loss: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidConfig(alloc::format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    ensure_len("finite-difference gradient", params.len(), analytic.len())?;
    let mut probe = params.to_vec();
    let mut central = |probe: &mut Vec<f64>, i: usize, h: f64| -> Result<f64> {
        probe[i] = params[i] + h;
        let up = loss(probe)?;
        probe[i] = params[i] - h;
        let down = loss(probe)?;
        probe[i] = params[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite("loss during finite-difference probing"));
        }
        Ok((up - down) / (2.0 * h))
    };
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let numeric = (4.0 * central(&mut probe, i, eps)? - central(&mut probe, i, 2.0 * eps)?) / 3.0;
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}
