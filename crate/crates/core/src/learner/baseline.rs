//! Zero-padding baseline: one sparse linear softmax model over `[x_s1, x_s2]`
//! with missing blocks filled by zeros, trained by projected subgradient steps.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{softmax, softmax_cross_entropy, Dense};
use crate::stream::Instance;

use super::{argmax, prediction_loss, StepOutput};

/// L1 strength; the soft threshold per step is `learning_rate · L1`.
pub const L1: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPadModel {
    pub linear: Dense,
    pub d1: usize,
    pub d2: usize,
    pub learning_rate: f64,
    pub l1: f64,
}

impl ZeroPadModel {
    pub fn new(d1: usize, d2: usize, classes: usize, learning_rate: f64, l1: f64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidConfig(alloc::format!("need at least 2 classes, got {classes}")));
        }
        if !(learning_rate > 0.0 && learning_rate.is_finite()) || !(l1 >= 0.0 && l1.is_finite()) {
            return Err(Error::InvalidConfig("zero-pad learning rate and L1 must be valid".into()));
        }
        Ok(Self {
            linear: Dense::zeros(d1 + d2, classes),
            d1,
            d2,
            learning_rate,
            l1,
        })
    }

    pub fn pad(&self, x_s1: Option<&[f64]>, x_s2: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.d1 + self.d2];
        if let Some(a) = x_s1 {
            ensure_len("zero-pad S1 block", self.d1, a.len())?;
            x[..self.d1].copy_from_slice(a);
        }
        if let Some(b) = x_s2 {
            ensure_len("zero-pad S2 block", self.d2, b.len())?;
            x[self.d1..].copy_from_slice(b);
        }
        ensure_finite("zero-pad input", &x)?;
        Ok(x)
    }

    /// Predict, then take one subgradient step and soft-threshold the weights.
    pub fn step(&mut self, inst: &Instance) -> Result<StepOutput> {
        let (x1, x2) = super::phase_inputs(inst)?;
        let x = self.pad(x1, x2)?;
        let logits = self.linear.forward(&x)?;
        let probs = softmax(&logits);
        let (_, g_logits) = softmax_cross_entropy(&logits, inst.y)?;
        let loss = prediction_loss(&probs, inst.y);
        let (_, grad) = self.linear.backward(&x, &g_logits)?;
        let lr = self.learning_rate;
        let thr = lr * self.l1;
        for (w, g) in self
            .linear
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.weights.as_slice())
        {
            let v = *w - lr * g;
            *w = if v > thr {
                v - thr
            } else if v < -thr {
                v + thr
            } else {
                0.0
            };
        }
        for (b, g) in self.linear.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
        Ok(StepOutput {
            predicted: argmax(&probs),
            loss,
            probs,
            p: None,
            alphas: vec![1.0],
            pred_old: None,
            pred_new: None,
            rec_loss: None,
        })
    }
}
