//! Phase schedule, nonlinear feature evolution and the doubly-streaming
//! instance sequence.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{sigmoid, Matrix};
use crate::rng::{RngState, STREAM_EVOLUTION, STREAM_SHUFFLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    /// `T1`: only `S1` is observed.
    Old,
    /// `Tb`: `S1` and `S2` are observed together.
    Overlap,
    /// `T2`: only `S2` is observed.
    New,
}

impl Phase {
    pub fn tag(self) -> &'static str {
        match self {
            Phase::Old => "T1",
            Phase::Overlap => "Tb",
            Phase::New => "T2",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "T1" => Some(Phase::Old),
            "Tb" => Some(Phase::Overlap),
            "T2" => Some(Phase::New),
            _ => None,
        }
    }
}

/// Rounds are 1-based: `T1 = [1, t1_end]`, `Tb = (t1_end, tb_end]`,
/// `T2 = (tb_end, n_total]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub n_total: usize,
    pub t1_end: usize,
    pub tb_end: usize,
    pub window: usize,
}

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.45, 0.10, 0.45);
pub const DEFAULT_WINDOW: usize = 1000;

/// `min(1000, n/10)`, at least 1.
pub fn default_window(n_total: usize) -> usize {
    DEFAULT_WINDOW.min(n_total / 10).max(1)
}

impl PhaseSchedule {
    pub fn new(n_total: usize, t1_end: usize, tb_end: usize, window: usize) -> Result<Self> {
        let s = Self {
            n_total,
            t1_end,
            tb_end,
            window,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        if !(1 <= self.t1_end && self.t1_end < self.tb_end && self.tb_end < self.n_total) {
            return bad(alloc::format!(
                "schedule needs 1 <= t1_end < tb_end < n_total, got {} / {} / {}",
                self.t1_end,
                self.tb_end,
                self.n_total
            ));
        }
        if self.window == 0 {
            return bad("OCA window must be at least 1".into());
        }
        let overlap = self.tb_end - self.t1_end;
        let shortest = self.t1_end.min(self.n_total - self.tb_end);
        if overlap > shortest {
            return bad(alloc::format!(
                "overlap of {overlap} rounds dominates the shortest single-space span ({shortest})"
            ));
        }
        Ok(())
    }

    /// Overlap longer than a quarter of either single-space span.
    pub fn overlap_is_long(&self) -> bool {
        let overlap = (self.tb_end - self.t1_end) as f64;
        overlap > 0.25 * self.t1_end as f64 || overlap > 0.25 * (self.n_total - self.tb_end) as f64
    }

    /// Phase of 1-based round `t`.
    pub fn phase_of(&self, t: usize) -> Phase {
        if t <= self.t1_end {
            Phase::Old
        } else if t <= self.tb_end {
            Phase::Overlap
        } else {
            Phase::New
        }
    }
}

/// `t1_end = round(f1·n)`, `tb_end = round((f1+fb)·n)`.
pub fn make_schedule(n_total: usize, fractions: (f64, f64, f64), window: Option<usize>) -> Result<PhaseSchedule> {
    let (f1, fb, f2) = fractions;
    if !(f1 > 0.0 && fb > 0.0 && f2 > 0.0) || ((f1 + fb + f2) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(alloc::format!(
            "schedule fractions must be positive and sum to 1, got ({f1}, {fb}, {f2})"
        )));
    }
    let n = n_total as f64;
    let t1_end = libm::round(f1 * n) as usize;
    let tb_end = libm::round((f1 + fb) * n) as usize;
    PhaseSchedule::new(n_total, t1_end, tb_end, window.unwrap_or_else(|| default_window(n_total)))
}

/// One stream arrival; field presence follows the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub t: usize,
    pub phase: Phase,
    pub x_s1: Option<Vec<f64>>,
    pub x_s2: Option<Vec<f64>>,
    pub y: usize,
}

/// Random Gaussian map `W` (d1 × d2) with `x_s2 = sigmoid(Wᵀ x_s1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionMap {
    pub weights: Matrix,
}

impl EvolutionMap {
    pub fn generate(d1: usize, d2: usize, seed: u64) -> Self {
        let mut rng = RngState::with_stream(seed, STREAM_EVOLUTION);
        let mut weights = Matrix::zeros(d1, d2);
        for w in weights.as_mut_slice() {
            *w = rng.normal();
        }
        Self { weights }
    }

    pub fn d1(&self) -> usize {
        self.weights.rows()
    }

    pub fn d2(&self) -> usize {
        self.weights.cols()
    }
}

/// `x_s2_j = sigmoid(Σ_i W_ij · x_s1_i)`.
pub fn evolve_features(x_s1: &[f64], map: &EvolutionMap) -> Result<Vec<f64>> {
    ensure_len("feature evolution input", map.d1(), x_s1.len())?;
    Ok(map.weights.tr_mul_vec(x_s1)?.into_iter().map(sigmoid).collect())
}

/// Labeled tabular data, rows in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        ensure_len("dataset labels", features.len(), labels.len())?;
        if features.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let d = features[0].len();
        if d == 0 {
            return Err(Error::Empty("dataset features"));
        }
        for row in &features {
            ensure_len("dataset row", d, row.len())?;
            ensure_finite("dataset row", row)?;
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Per-feature mean and standard deviation (variance floored at 1e-8).
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZScore {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Self> {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        for row in rows {
            ensure_len("z-score row", dim, row.len())?;
            n += 1;
            for i in 0..dim {
                let d = row[i] - mean[i];
                mean[i] += d / n as f64;
                m2[i] += d * (row[i] - mean[i]);
            }
        }
        if n == 0 {
            return Err(Error::Empty("z-score statistics"));
        }
        let std = m2.iter().map(|s| libm::sqrt((s / n as f64).max(1e-8))).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Options for turning a [`Dataset`] into a doubly-streaming sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamOptions {
    pub schedule: PhaseSchedule,
    pub d2: usize,
    pub seed: u64,
    pub shuffle: bool,
}

/// Fully materialized stream: normalized `S1` rows, evolved `S2` rows and labels
/// in stream order. Emission through [`Stream`] enforces the phase pattern.
#[derive(Debug, Clone)]
pub struct PreparedStream {
    pub schedule: PhaseSchedule,
    pub x_s1: Vec<Vec<f64>>,
    pub x_s2: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub map: EvolutionMap,
}

impl PreparedStream {
    /// Optional seeded shuffle, z-scoring with statistics from the `T1` rows
    /// only, then feature evolution.
    pub fn new(dataset: &Dataset, opts: StreamOptions) -> Result<Self> {
        let schedule = opts.schedule;
        schedule.validate()?;
        ensure_len("stream length", schedule.n_total, dataset.len())?;
        if opts.d2 == 0 {
            return Err(Error::InvalidConfig("d2 must be positive".into()));
        }
        let order: Vec<usize> = if opts.shuffle {
            RngState::with_stream(opts.seed, STREAM_SHUFFLE).permutation(dataset.len())
        } else {
            (0..dataset.len()).collect()
        };
        let rows: Vec<&[f64]> = order.iter().map(|&i| dataset.features()[i].as_slice()).collect();
        let z = ZScore::fit(rows[..schedule.t1_end].iter().copied(), dataset.dim())?;
        let map = EvolutionMap::generate(dataset.dim(), opts.d2, opts.seed);
        let x_s1: Vec<Vec<f64>> = rows.iter().map(|r| z.apply(r)).collect();
        let x_s2 = x_s1
            .iter()
            .map(|x| evolve_features(x, &map))
            .collect::<Result<Vec<_>>>()?;
        let labels = order.iter().map(|&i| dataset.labels()[i]).collect();
        Ok(Self {
            schedule,
            x_s1,
            x_s2,
            labels,
            classes: dataset.classes(),
            map,
        })
    }

    pub fn d1(&self) -> usize {
        self.map.d1()
    }

    pub fn d2(&self) -> usize {
        self.map.d2()
    }

    pub fn stream(&self) -> Stream<'_> {
        Stream { data: self, next: 1 }
    }

    /// Instance for 1-based round `t` with phase-correct field presence.
    pub fn instance(&self, t: usize) -> Instance {
        let phase = self.schedule.phase_of(t);
        let i = t - 1;
        Instance {
            t,
            phase,
            x_s1: (phase != Phase::New).then(|| self.x_s1[i].clone()),
            x_s2: (phase != Phase::Old).then(|| self.x_s2[i].clone()),
            y: self.labels[i],
        }
    }
}

/// Single-consumer iterator over a [`PreparedStream`].
#[derive(Debug, Clone)]
pub struct Stream<'a> {
    data: &'a PreparedStream,
    next: usize,
}

impl Iterator for Stream<'_> {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.next > self.data.schedule.n_total {
            return None;
        }
        let inst = self.data.instance(self.next);
        self.next += 1;
        Some(inst)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.data.schedule.n_total + 1 - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Stream<'_> {}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset(n: usize, d: usize) -> Dataset {
        let mut rng = RngState::new(99);
        let features = (0..n).map(|_| rng.normals(d)).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new(features, labels, 3).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let s = make_schedule(100, (0.45, 0.10, 0.45), None).unwrap();
        assert_eq!((s.t1_end, s.tb_end), (45, 55));
        assert_eq!(s.window, 10);
        assert!(make_schedule(10, (0.1, 0.8, 0.1), None).is_err());
        assert!(make_schedule(100, (0.5, 0.1, 0.5), None).is_err());
        assert!(make_schedule(100, (0.5, 0.0, 0.5), None).is_err());
        assert_eq!(default_window(1_000_000), 1000);
        assert_eq!(default_window(5000), 500);
        assert_eq!(default_window(5), 1);
        assert!(PhaseSchedule::new(100, 45, 55, 0).is_err());
        assert!(make_schedule(100, (0.35, 0.3, 0.35), None).unwrap().overlap_is_long());
        assert!(!make_schedule(100, (0.45, 0.1, 0.45), None).unwrap().overlap_is_long());
    }

    #[test]
    fn evolution_examples() {
        let zero = EvolutionMap {
            weights: Matrix::zeros(3, 5),
        };
        assert_eq!(evolve_features(&[1.0, -2.0, 3.0], &zero).unwrap(), vec![0.5; 5]);

        let one = EvolutionMap {
            weights: Matrix::from_rows(1, 1, vec![1.0]).unwrap(),
        };
        assert_eq!(evolve_features(&[0.0], &one).unwrap(), vec![0.5]);
        let v = evolve_features(&[libm::log(3.0)], &one).unwrap()[0];
        assert!((v - 0.75).abs() < 1e-12);

        let m = EvolutionMap::generate(10, 30, 1);
        let out = evolve_features(&[0.3; 10], &m).unwrap();
        assert_eq!(out.len(), 30);
        assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(m, EvolutionMap::generate(10, 30, 1));
        assert!(evolve_features(&[0.3; 9], &m).is_err());
    }

    #[test]
    fn boundaries_and_conservation() {
        let data = toy_dataset(100, 4);
        let schedule = make_schedule(100, DEFAULT_FRACTIONS, None).unwrap();
        let p = PreparedStream::new(
            &data,
            StreamOptions {
                schedule,
                d2: 6,
                seed: 5,
                shuffle: true,
            },
        )
        .unwrap();
        let all: Vec<Instance> = p.stream().collect();
        assert_eq!(all.len(), 100);
        let at = |t: usize| &all[t - 1];
        assert!(at(schedule.t1_end + 1).x_s1.is_some() && at(schedule.t1_end + 1).x_s2.is_some());
        assert!(at(schedule.tb_end + 1).x_s1.is_none());
        for inst in &all {
            let (s1, s2) = (inst.x_s1.is_some(), inst.x_s2.is_some());
            match inst.phase {
                Phase::Old => assert!(s1 && !s2),
                Phase::Overlap => assert!(s1 && s2),
                Phase::New => assert!(!s1 && s2),
            }
        }
    }

    #[test]
    fn normalization_uses_old_phase_rows_only() {
        let mut data = toy_dataset(100, 2);
        let mut features = data.features().to_vec();
        // Future rows with extreme values must not move the statistics.
        for row in features.iter_mut().skip(45) {
            row[0] = 1e6;
        }
        data = Dataset::new(features, data.labels().to_vec(), 3).unwrap();
        let schedule = make_schedule(100, DEFAULT_FRACTIONS, None).unwrap();
        let p = PreparedStream::new(
            &data,
            StreamOptions {
                schedule,
                d2: 3,
                seed: 0,
                shuffle: false,
            },
        )
        .unwrap();
        let n1 = schedule.t1_end as f64;
        let mean: f64 = p.x_s1[..schedule.t1_end].iter().map(|r| r[0]).sum::<f64>() / n1;
        let var: f64 = p.x_s1[..schedule.t1_end].iter().map(|r| (r[0] - mean) * (r[0] - mean)).sum::<f64>() / n1;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_feature_normalizes_to_zero() {
        let z = ZScore::fit([[2.0, 1.0].as_slice(), &[2.0, 3.0], &[2.0, 5.0]], 2).unwrap();
        assert_eq!(z.apply(&[2.0, 3.0])[0], 0.0);
    }

    #[test]
    fn streams_regenerate_from_seed() {
        let data = toy_dataset(60, 3);
        let opts = StreamOptions {
            schedule: make_schedule(60, DEFAULT_FRACTIONS, None).unwrap(),
            d2: 4,
            seed: 12,
            shuffle: true,
        };
        let a: Vec<_> = PreparedStream::new(&data, opts).unwrap().stream().collect();
        let b: Vec<_> = PreparedStream::new(&data, opts).unwrap().stream().collect();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![vec![1.0]], vec![3], 2).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::new(vec![], vec![], 2).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], vec![0], 2).is_err());
    }
}
