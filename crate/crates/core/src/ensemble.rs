//! Exponential-experts blend of the old-space and new-space classifiers.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Cumulative risks of the two experts and the resulting weight `p` on the
/// old classifier, `p = e^{−ηR_old} / (e^{−ηR_old} + e^{−ηR_new})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    risk_old: f64,
    risk_new: f64,
    p: f64,
    eta: f64,
}

impl EnsembleState {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("ensemble rate {eta} must be positive")));
        }
        Ok(Self {
            risk_old: 0.0,
            risk_new: 0.0,
            p: 0.5,
            eta,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn risk_old(&self) -> f64 {
        self.risk_old
    }

    pub fn risk_new(&self) -> f64 {
        self.risk_new
    }

    /// Adds one round of losses to the running risks and refreshes `p`.
    pub fn accumulate(&mut self, loss_old: f64, loss_new: f64) -> Result<()> {
        for l in [loss_old, loss_new] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidConfig(alloc::format!(
                    "ensemble losses must be finite and non-negative, got {l}"
                )));
            }
        }
        self.risk_old += loss_old;
        self.risk_new += loss_new;
        self.p = update_p(self.eta, self.risk_old, self.risk_new);
        Ok(())
    }
}

/// Pure form of [`EnsembleState::accumulate`].
pub fn accumulate_risks(state: &EnsembleState, loss_old: f64, loss_new: f64) -> Result<EnsembleState> {
    let mut next = state.clone();
    next.accumulate(loss_old, loss_new)?;
    Ok(next)
}

/// `1 / (1 + e^{−η(R_new − R_old)})`, kept strictly inside `(0, 1)`.
pub fn update_p(eta: f64, risk_old: f64, risk_new: f64) -> f64 {
    let x = eta * (risk_new - risk_old);
    let p = if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `p · pred_old + (1 − p) · pred_new`.
pub fn ensemble_predict(state: &EnsembleState, pred_old: &[f64], pred_new: &[f64]) -> Result<Vec<f64>> {
    blend(state.p, pred_old, pred_new)
}

pub fn blend(p: f64, pred_old: &[f64], pred_new: &[f64]) -> Result<Vec<f64>> {
    ensure_len("ensemble predictions", pred_old.len(), pred_new.len())?;
    for pred in [pred_old, pred_new] {
        ensure_finite("ensemble prediction", pred)?;
        let s: f64 = pred.iter().sum();
        if (s - 1.0).abs() > 1e-6 || pred.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("ensemble inputs must be probability vectors".into()));
        }
    }
    Ok(pred_old
        .iter()
        .zip(pred_new)
        .map(|(o, n)| p * o + (1.0 - p) * n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn state_with_p(p: f64) -> EnsembleState {
        let mut s = EnsembleState::new(1.0).unwrap();
        // ln(p/(1−p)) = R_new − R_old
        let gap = libm::log(p / (1.0 - p));
        s.accumulate(0.0, gap).unwrap();
        s
    }

    #[test]
    fn predict_examples() {
        let s = EnsembleState::new(0.01).unwrap();
        let q = [0.2, 0.5, 0.3];
        let out = ensemble_predict(&s, &q, &q).unwrap();
        for (a, b) in out.iter().zip(q) {
            assert!((a - b).abs() < 1e-15);
        }

        let s = state_with_p(0.75);
        let out = ensemble_predict(&s, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((out[0] - 0.75).abs() < 1e-12 && (out[1] - 0.25).abs() < 1e-12);

        let mut s = EnsembleState::new(1.0).unwrap();
        s.accumulate(0.0, 1e6).unwrap();
        let out = ensemble_predict(&s, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);

        assert!(ensemble_predict(&s, &[0.5, 0.5], &[1.0]).is_err());
        assert!(ensemble_predict(&s, &[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn accumulate_examples() {
        let s = EnsembleState::new(0.5).unwrap();
        assert_eq!(accumulate_risks(&s, 0.0, 0.0).unwrap(), s);

        let mut s = EnsembleState::new(0.5).unwrap();
        for l in [0.3, 1.2, 0.0, 4.0] {
            s.accumulate(l, l).unwrap();
            assert_eq!(s.p(), 0.5);
        }
        assert!(s.accumulate(-0.1, 0.0).is_err());
        assert!(s.accumulate(0.0, f64::INFINITY).is_err());
        assert!(EnsembleState::new(0.0).is_err());
    }

    #[test]
    fn update_p_examples() {
        assert_eq!(update_p(0.3, 2.0, 2.0), 0.5);
        assert!((update_p(1.0, 0.0, libm::log(3.0)) - 0.75).abs() < 1e-12);
        let hi = update_p(1.0, 0.0, 1e6);
        assert!(hi > 0.999_999 && hi < 1.0);
        let lo = update_p(1.0, 1e6, 0.0);
        assert!(lo > 0.0 && lo < 1e-6);
    }

    #[test]
    fn p_decays_once_new_expert_wins() {
        let mut s = EnsembleState::new(0.1).unwrap();
        let old = [0.2, 0.2, 0.2, 0.3, 0.4, 0.5, 0.5, 0.6];
        let new = [1.5, 1.2, 0.9, 0.1, 0.1, 0.1, 0.05, 0.0];
        let mut trace = vec![];
        for (o, n) in old.iter().zip(&new) {
            s.accumulate(*o, *n).unwrap();
            trace.push(s.p());
        }
        for w in trace[2..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn p_stays_open_and_increases_with_old_advantage(
                eta in 0.001f64..5.0,
                rounds in prop::collection::vec((0.0f64..5.0, 0.001f64..5.0), 1..50),
            ) {
                let mut s = EnsembleState::new(eta).unwrap();
                let mut prev = s.p();
                for (old, gap) in rounds {
                    s.accumulate(old, old + gap).unwrap();
                    prop_assert!(s.p() > 0.0 && s.p() < 1.0);
                    prop_assert!(s.p() >= prev);
                    prev = s.p();
                }
            }

            #[test]
            fn monotone_in_risk_gap(eta in 0.01f64..3.0, a in -50.0f64..50.0, b in -50.0f64..50.0) {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                prop_assert!(update_p(eta, 0.0, lo) <= update_p(eta, 0.0, hi));
            }
        }
    }
}
