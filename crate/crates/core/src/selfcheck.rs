//! Built-in verification suites: finite-difference gradients over every
//! trainable path, Monte-Carlo KL oracles, hedge and ensemble invariants.

use alloc::string::String;

use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::{blend, update_p, EnsembleState};
use crate::error::Result;
use crate::hbp::{ElasticClassifier, HedgeWeights, ObjectiveMask};
use crate::learner::{side_forward, side_gradients, CrossTarget, LossWeights, SideRef, SideTargets};
use crate::nn::{assign, finite_diff_check_extrapolated, flatten, sample_with_noise, Parameters, LOG_VAR_MAX};
use crate::rng::RngState;
use crate::vae::{kl_between, kl_standard, DecoderHead, GaussianCode, VaeNet};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed error in the suite's own unit.
    pub max_error: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    pub gradient_draws: usize,
    pub kl_pairs: usize,
    pub kl_samples: usize,
    pub hedge_steps: usize,
    /// Doubles every analytic gradient before comparison.
    pub inject_gradient_fault: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            gradient_draws: 100,
            kl_pairs: 20,
            kl_samples: 1_000_000,
            hedge_steps: 100_000,
            inject_gradient_fault: false,
        }
    }
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
/// Central-difference step for the gradient suite.
pub const GRADIENT_STEP: f64 = 1e-3;
/// Draws with a ReLU pre-activation closer than this to zero are redrawn, so no
/// probe crosses a kink.
pub const KINK_MARGIN: f64 = 5e-2;
/// Allowed Monte-Carlo deviation in standard errors.
pub const KL_SIGMAS: f64 = 3.0;
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

pub fn run_all(opts: &CheckOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        gradient_suite(opts.seed, opts.gradient_draws, opts.inject_gradient_fault)?,
        kl_suite(opts.seed, opts.kl_pairs, opts.kl_samples)?,
        hedge_suite(opts.seed, opts.hedge_steps)?,
        ensemble_suite(opts.seed, opts.hedge_steps)?,
    ])
}

/// Every trainable tensor of one side, plus the cross decoders when present.
#[derive(Clone)]
struct Bundle {
    vae: VaeNet,
    classifier: ElasticClassifier,
    cross: Option<DecoderHead>,
}

impl Parameters for Bundle {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.vae.visit(f);
        self.classifier.visit(f);
        if let Some(c) = &self.cross {
            c.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.vae.visit_mut(f);
        self.classifier.visit_mut(f);
        if let Some(c) = &mut self.cross {
            c.visit_mut(f);
        }
    }
}

fn random_simplex(rng: &mut RngState, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform(0.05, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn small_weights(rng: &mut RngState, p: &mut impl Parameters) {
    p.visit_mut(&mut |s| {
        for v in s {
            *v = rng.uniform(-0.8, 0.8);
        }
    });
}

struct Objective<'a> {
    x: &'a [f64],
    y: usize,
    mask: ObjectiveMask,
    hedge: &'a HedgeWeights,
    cross_input: Option<(&'a [f64], &'a [GaussianCode])>,
    noise: &'a [Vec<f64>],
    loss_weights: LossWeights,
}

impl Objective<'_> {
    fn eval(&self, b: &Bundle) -> Result<(f64, Vec<f64>)> {
        let side = SideRef {
            vae: &b.vae,
            classifier: &b.classifier,
            hedge: self.hedge,
        };
        let fwd = side_forward(side, self.x)?;
        let cross = match (&b.cross, self.cross_input) {
            (Some(decoders), Some((x_s1, codes_s1))) => Some(CrossTarget {
                decoders,
                x_s1,
                codes_s1,
            }),
            _ => None,
        };
        let targets = SideTargets {
            x: self.x,
            y: self.y,
            mask: self.mask,
            cross,
        };
        let mut next = 0;
        let g = side_gradients(side, &fwd, &targets, self.loss_weights, &mut |n| {
            let v = self.noise[next][..n].to_vec();
            next += 1;
            v
        })?;
        let grads = Bundle {
            vae: g.vae,
            classifier: g.classifier,
            cross: g.cross.or_else(|| b.cross.as_ref().map(DecoderHead::zeros_like)),
        };
        Ok((g.objective, flatten(&grads)))
    }
}

fn hidden_margin(pre: &[Vec<f64>]) -> f64 {
    let n = pre.len().saturating_sub(1);
    pre[..n].iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Smallest distance of any ReLU pre-activation to zero over the encoder and
/// every decoder evaluated by the checked objectives.
fn kink_margin(b: &Bundle, x: &[f64], noise: &[Vec<f64>]) -> Result<f64> {
    let trace = b.vae.encoder.trace(x)?;
    let mut m = trace.pre.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    for (l, code) in trace.codes.iter().enumerate() {
        let z = sample_with_noise(&code.mu, &code.log_var, &noise[l])?;
        m = m.min(hidden_margin(&b.vae.decoder.per_layer[l].trace(&z)?.pre));
        if let Some(c) = &b.cross {
            m = m.min(hidden_margin(&c.per_layer[l].trace(&z)?.pre));
        }
        let clamp_gap = code
            .log_var
            .iter()
            .fold(f64::INFINITY, |g, v| g.min(LOG_VAR_MAX - v.abs()));
        m = m.min(clamp_gap);
    }
    Ok(m)
}

/// Worst relative error of one randomized gradient draw over every loss term
/// and trainable path (`S1` network, `S2` network, cross decoders). Returns
/// `None` when the draw lands within [`KINK_MARGIN`] of a ReLU kink.
pub fn gradient_draw(rng: &mut RngState, inject_fault: bool) -> Result<Option<f64>> {
    let d1 = 1 + rng.below(8);
    let d2 = 1 + rng.below(8);
    let hidden = 1 + rng.below(8);
    let latent = 1 + rng.below(8);
    let depth = 1 + rng.below(4);
    let classes = 2 + rng.below(7);
    let y = rng.below(classes);
    let loss_weights = LossWeights {
        prior: rng.uniform(0.1, 1.0),
        align: rng.uniform(0.1, 1.0),
        rec: rng.uniform(0.5, 2.0),
    };
    let hedge = HedgeWeights::from_alphas(random_simplex(rng, depth))?;
    let noise: Vec<Vec<f64>> = (0..2 * depth).map(|_| rng.normals(latent)).collect();

    let mut old = Bundle {
        vae: VaeNet::new(d1, hidden, latent, depth, rng)?,
        classifier: ElasticClassifier::new(latent, classes, depth)?,
        cross: None,
    };
    small_weights(rng, &mut old);
    let mut new = Bundle {
        vae: VaeNet::new(d2, hidden, latent, depth, rng)?,
        classifier: ElasticClassifier::new(latent, classes, depth)?,
        cross: Some(DecoderHead::new(latent, hidden, d1, depth, rng)),
    };
    small_weights(rng, &mut new);
    let x1 = rng.normals(d1);
    let x2: Vec<f64> = (0..d2).map(|_| rng.uniform(0.0, 1.0)).collect();
    let codes_s1 = old.vae.encoder.encode(&x1)?;
    if kink_margin(&old, &x1, &noise)?.min(kink_margin(&new, &x2, &noise)?) < KINK_MARGIN {
        return Ok(None);
    }

    // Terms are checked one at a time: the objective is their sum, and a large
    // variational value would otherwise drown small classification gradients
    // in rounding noise.
    let only = |vi, rec, clf| ObjectiveMask { vi, rec, clf };
    let objective = |x, mask, cross_input| Objective {
        x,
        y,
        mask,
        hedge: &hedge,
        cross_input,
        noise: &noise,
        loss_weights,
    };
    let objectives = [
        (&old, objective(&x1, only(true, false, false), None)),
        (&old, objective(&x1, only(false, false, true), None)),
        (&new, objective(&x2, only(true, false, false), None)),
        (&new, objective(&x2, only(false, true, false), Some((&x1, &codes_s1)))),
        (&new, objective(&x2, only(false, false, true), None)),
    ];
    let mut worst: f64 = 0.0;
    for (bundle, obj) in &objectives {
        let (_, mut analytic) = obj.eval(bundle)?;
        if inject_fault {
            analytic.iter_mut().for_each(|g| *g *= 2.0);
        }
        let mut probe = (*bundle).clone();
        let err = finite_diff_check_extrapolated(
            |p| {
                assign(&mut probe, p)?;
                Ok(obj.eval(&probe)?.0)
            },
            &flatten(*bundle),
            &analytic,
            GRADIENT_STEP,
        )?;
        worst = worst.max(err);
    }
    Ok(Some(worst))
}

pub fn gradient_suite(seed: u64, draws: usize, inject_fault: bool) -> Result<SuiteResult> {
    let mut rng = RngState::new(seed);
    let mut worst: f64 = 0.0;
    let (mut accepted, mut redrawn) = (0, 0);
    while accepted < draws {
        match gradient_draw(&mut rng, inject_fault)? {
            Some(err) => {
                worst = worst.max(err);
                accepted += 1;
            }
            None => redrawn += 1,
        }
    }
    Ok(SuiteResult {
        name: "nn-substrate",
        passed: worst < GRADIENT_TOLERANCE,
        max_error: worst,
        tolerance: GRADIENT_TOLERANCE,
        detail: alloc::format!(
            "{draws} draws ({redrawn} redrawn near a kink), max relative finite-difference error {worst:.3e}"
        ),
    })
}

fn random_code(rng: &mut RngState, dim: usize) -> Result<GaussianCode> {
    let mu = (0..dim).map(|_| rng.uniform(-1.5, 1.5)).collect();
    let lv = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    GaussianCode::new(mu, lv)
}

fn log_density(z: &[f64], c: &GaussianCode) -> f64 {
    z.iter()
        .zip(&c.mu)
        .zip(&c.log_var)
        .map(|((z, m), lv)| {
            let d = z - m;
            -0.5 * (lv + d * d * libm::exp(-lv))
        })
        .sum()
}

/// Monte-Carlo estimate of `KL(a ‖ b)` and its standard error.
pub fn kl_monte_carlo(a: &GaussianCode, b: &GaussianCode, samples: usize, rng: &mut RngState) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut z = vec![0.0; a.dim()];
    for k in 0..samples {
        for ((zi, m), lv) in z.iter_mut().zip(&a.mu).zip(&a.log_var) {
            *zi = m + libm::exp(0.5 * lv) * rng.normal();
        }
        let v = log_density(&z, a) - log_density(&z, b);
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (samples.max(2) - 1) as f64;
    (mean, libm::sqrt(var / samples as f64))
}

/// Largest deviation of the closed forms from their Monte-Carlo estimates, in
/// standard errors, over `pairs` random pairs.
pub fn kl_suite(seed: u64, pairs: usize, samples: usize) -> Result<SuiteResult> {
    let mut rng = RngState::new(seed ^ 0x6b6c);
    let mut worst: f64 = 0.0;
    let mut identical_ok = true;
    for _ in 0..pairs {
        let dim = 1 + rng.below(4);
        let a = random_code(&mut rng, dim)?;
        let b = random_code(&mut rng, dim)?;
        let std = GaussianCode::standard(dim);
        for (p, q, closed) in [(&a, &b, kl_between(&a, &b)?), (&a, &std, kl_standard(&a))] {
            let (est, se) = kl_monte_carlo(p, q, samples, &mut rng);
            worst = worst.max((closed - est).abs() / se.max(1e-300));
        }
        identical_ok &= kl_between(&a, &a)? == 0.0 && kl_standard(&std) == 0.0;
    }
    Ok(SuiteResult {
        name: "kl-oracle",
        passed: worst < KL_SIGMAS && identical_ok,
        max_error: worst,
        tolerance: KL_SIGMAS,
        detail: alloc::format!(
            "{pairs} pairs x {samples} samples, max deviation {worst:.2} standard errors, identical inputs give 0: {identical_ok}"
        ),
    })
}

fn random_losses(rng: &mut RngState, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.below(10) {
            0 => 0.0,
            1 => rng.uniform(0.0, 50.0),
            _ => rng.uniform(0.0, 3.0),
        })
        .collect()
}

/// Simplex and floor after every randomized update, plus the exact ratio
/// identity `α_i'/α_j' = α_i/α_j · β^((ℓ_i − ℓ_j)/M)` when no floor binds.
pub fn hedge_suite(seed: u64, steps: usize) -> Result<SuiteResult> {
    let mut rng = RngState::new(seed ^ 0x6862);
    let mut worst_sum: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    let mut floor_ok = true;
    let mut h = HedgeWeights::uniform(1, 0.99, 0.0)?;
    for k in 0..steps {
        if k % 1000 == 0 {
            let depth = 1 + rng.below(8);
            let beta = rng.uniform(0.5, 0.999);
            let floor = if rng.below(4) == 0 { 0.0 } else { rng.uniform(0.0, 0.9 / depth as f64) };
            h = HedgeWeights::uniform(depth, beta, floor)?;
        }
        let losses = random_losses(&mut rng, h.depth());
        let before = h.clone();
        h.update(&losses)?;
        let a = h.alphas();
        worst_sum = worst_sum.max((a.iter().sum::<f64>() - 1.0).abs());
        floor_ok &= a.iter().all(|&v| v >= h.floor());
        if h.floor() == 0.0 && h.depth() > 1 {
            let m = h.running_max();
            let (i, j) = (0, h.depth() - 1);
            let expect = before.alphas()[i] / before.alphas()[j]
                * libm::pow(h.beta(), (losses[i] - losses[j]) / if m > 0.0 { m } else { 1.0 });
            let got = a[i] / a[j];
            worst_ratio = worst_ratio.max((got - expect).abs() / expect.abs().max(1e-300));
        }
    }
    let passed = worst_sum <= SIMPLEX_TOLERANCE && floor_ok && worst_ratio < 1e-9;
    Ok(SuiteResult {
        name: "hedge-invariants",
        passed,
        max_error: worst_sum.max(worst_ratio),
        tolerance: SIMPLEX_TOLERANCE,
        detail: alloc::format!(
            "{steps} updates, max |sum-1| {worst_sum:.2e}, floor held: {floor_ok}, max ratio identity error {worst_ratio:.2e}"
        ),
    })
}

/// `p ∈ (0,1)` under random risks, blends stay probability vectors, and `p`
/// decreases on a scripted sequence where the new expert keeps winning.
pub fn ensemble_suite(seed: u64, steps: usize) -> Result<SuiteResult> {
    let mut rng = RngState::new(seed ^ 0x656e);
    let mut open_ok = true;
    let mut worst_blend: f64 = 0.0;
    let mut s = EnsembleState::new(0.01)?;
    for k in 0..steps {
        if k % 1000 == 0 {
            s = EnsembleState::new(rng.uniform(0.001, 2.0))?;
        }
        s.accumulate(rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0))?;
        open_ok &= s.p() > 0.0 && s.p() < 1.0;
        let c = 2 + rng.below(5);
        let old = random_simplex(&mut rng, c);
        let new = random_simplex(&mut rng, c);
        let out = blend(s.p(), &old, &new)?;
        worst_blend = worst_blend.max((out.iter().sum::<f64>() - 1.0).abs());
        open_ok &= out.iter().all(|&v| v >= 0.0);
    }
    open_ok &= update_p(1.0, 0.0, 1e6) < 1.0 && update_p(1.0, 1e6, 0.0) > 0.0;

    let mut scripted = EnsembleState::new(0.1)?;
    let mut prev = scripted.p();
    let mut monotone = true;
    for _ in 0..50 {
        scripted.accumulate(0.7, 0.2)?;
        monotone &= scripted.p() < prev;
        prev = scripted.p();
    }
    Ok(SuiteResult {
        name: "ensemble-invariants",
        passed: open_ok && monotone && worst_blend <= SIMPLEX_TOLERANCE,
        max_error: worst_blend,
        tolerance: SIMPLEX_TOLERANCE,
        detail: alloc::format!(
            "{steps} updates, p strictly inside (0,1): {open_ok}, scripted p decreasing: {monotone}, max blend |sum-1| {worst_blend:.2e}"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suites_pass() {
        let opts = CheckOptions {
            gradient_draws: 10,
            kl_pairs: 4,
            kl_samples: 20_000,
            hedge_steps: 5_000,
            ..CheckOptions::default()
        };
        for r in run_all(&opts).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        let r = gradient_suite(3, 2, true).unwrap();
        assert!(!r.passed);
        assert_eq!(r.name, "nn-substrate");
    }
}
