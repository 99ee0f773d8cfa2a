//! Labeled Gaussian-blob fixtures.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::stream::Dataset;

/// Each class owns `blobs_per_class` unit-variance clusters whose centers are
/// drawn from `N(0, margin² I)`. Rows cycle through classes and blobs in a
/// seeded random order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub d1: usize,
    pub classes: usize,
    pub margin: f64,
    pub seed: u64,
    #[serde(default = "one")]
    pub blobs_per_class: usize,
}

fn one() -> usize {
    1
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d1 == 0 || self.blobs_per_class == 0 {
            return Err(Error::InvalidConfig("synthetic spec needs n, d1, blobs_per_class > 0".into()));
        }
        if self.classes < 2 {
            return Err(Error::InvalidConfig("synthetic spec needs at least 2 classes".into()));
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::InvalidConfig("synthetic margin must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let mut rng = RngState::new(self.seed);
        let centers: Vec<Vec<f64>> = (0..self.classes * self.blobs_per_class)
            .map(|_| rng.normals(self.d1).into_iter().map(|v| v * self.margin).collect())
            .collect();
        let mut features = Vec::with_capacity(self.n);
        let mut labels = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let blob = rng.below(centers.len());
            let center = &centers[blob];
            features.push(center.iter().map(|c| c + rng.normal()).collect());
            labels.push(blob / self.blobs_per_class);
        }
        Dataset::new(features, labels, self.classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SynthSpec {
            n: 100,
            d1: 4,
            classes: 2,
            margin: 3.0,
            seed: 1,
            blobs_per_class: 1,
        };
        let a = spec.generate().unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.dim(), 4);
        assert_eq!(a, spec.generate().unwrap());
        assert!(a.labels().iter().all(|&y| y < 2));
    }

    #[test]
    fn invalid_specs() {
        let mut spec = SynthSpec {
            n: 10,
            d1: 2,
            classes: 1,
            margin: 1.0,
            seed: 0,
            blobs_per_class: 1,
        };
        assert!(spec.generate().is_err());
        spec.classes = 2;
        spec.margin = f64::NAN;
        assert!(spec.generate().is_err());
    }
}
