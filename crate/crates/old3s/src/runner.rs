//! Executes a [`RunConfig`]: one run per `(variant, seed)`, each writing its
//! own metrics CSV, summary JSON and optional checkpoint.

use std::path::{Path, PathBuf};
use std::time::Instant;

use old3s_core::eval::{hindsight_estimate, RunSummary};
use old3s_core::learner::{run_variant_model, VariantKind};
use old3s_core::stream::{Dataset, PreparedStream, StreamOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, RunConfig};
use crate::data::load_csv;
use crate::error::{CliError, CliResult};
use crate::metrics::save_metrics;

/// How the hindsight reference is built, echoed into every summary.
pub const HINDSIGHT_DEFINITION: &str =
    "OCA at the end of an offline run of the same elastic architecture over zero-padded [x_s1, x_s2] inputs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryFile {
    pub config: RunConfig,
    pub variant: VariantKind,
    pub seed: u64,
    pub rounds: usize,
    pub window: usize,
    pub t1_end: usize,
    pub tb_end: usize,
    pub acr: f64,
    pub mean_oca: f64,
    pub final_oca: f64,
    pub hindsight: f64,
    pub hindsight_epochs: usize,
    pub hindsight_definition: String,
    pub boundary_drop: Option<f64>,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `None` lets rayon decide.
    pub jobs: Option<usize>,
    /// Replaces the configured seed list with this single seed.
    pub seed_override: Option<u64>,
    /// Replaces the configured output directory.
    pub out: Option<PathBuf>,
}

pub fn file_stem(variant: VariantKind, seed: u64) -> String {
    format!("{}-seed{seed}", variant.name())
}

pub fn metrics_path(out: &Path, variant: VariantKind, seed: u64) -> PathBuf {
    out.join(format!("{}.metrics.csv", file_stem(variant, seed)))
}

pub fn summary_path(out: &Path, variant: VariantKind, seed: u64) -> PathBuf {
    out.join(format!("{}.summary.json", file_stem(variant, seed)))
}

pub fn checkpoint_path(out: &Path, variant: VariantKind, seed: u64) -> PathBuf {
    out.join(format!("{}.ckpt.json", file_stem(variant, seed)))
}

/// Source rows for one seed. A synthetic source is generated once with its own
/// seed; the run seed then drives shuffle, evolution map and initialization.
pub fn load_dataset(config: &RunConfig) -> CliResult<Dataset> {
    match &config.data {
        DataSource::Csv(src) => load_csv(&src.path, &src.label_column, src.classes.as_deref()),
        DataSource::Synthetic(spec) => spec.generate().map_err(|e| CliError::Config(format!("data.synthetic: {e}"))),
    }
}

pub fn prepare_stream(config: &RunConfig, dataset: &Dataset, seed: u64) -> CliResult<PreparedStream> {
    let schedule = config.schedule(dataset.len())?;
    let stream = PreparedStream::new(
        dataset,
        StreamOptions {
            schedule,
            d2: config.d2,
            seed,
            shuffle: config.shuffle,
        },
    )?;
    Ok(stream)
}

fn pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        b = b.num_threads(j);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the whole grid and returns the summaries in `(seed, variant)` order.
/// Everything is validated before the output directory is touched.
pub fn run(config: &RunConfig, opts: &RunOptions) -> CliResult<Vec<SummaryFile>> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed_override {
        config.seeds = vec![seed];
    }
    if let Some(out) = &opts.out {
        config.out = out.clone();
    }
    config.validate()?;
    let dataset = load_dataset(&config)?;
    config.schedule(dataset.len())?;
    let pool = pool(opts.jobs)?;

    let streams: Vec<(u64, PreparedStream)> = config
        .seeds
        .iter()
        .map(|&s| prepare_stream(&config, &dataset, s).map(|st| (s, st)))
        .collect::<CliResult<_>>()?;
    std::fs::create_dir_all(&config.out).map_err(|e| CliError::io(&config.out, e))?;

    let hindsights: Vec<f64> = pool.install(|| {
        streams
            .par_iter()
            .map(|(seed, st)| {
                hindsight_estimate(st, &config.model, *seed, config.hindsight_epochs)
                    .map_err(|e| CliError::Numerical(format!("hindsight for seed {seed}: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let grid: Vec<(usize, VariantKind)> = (0..streams.len())
        .flat_map(|i| config.variants.iter().map(move |&k| (i, k)))
        .collect();
    pool.install(|| {
        grid.par_iter()
            .map(|&(i, kind)| {
                let (seed, stream) = (&streams[i].0, &streams[i].1);
                run_one(&config, kind, *seed, stream, hindsights[i])
            })
            .collect()
    })
}

fn run_one(config: &RunConfig, kind: VariantKind, seed: u64, stream: &PreparedStream, hindsight: f64) -> CliResult<SummaryFile> {
    let started = Instant::now();
    let variant = config.variant(kind, seed);
    let (log, learner) = run_variant_model(&variant, stream, |_, _| {})
        .map_err(|e| CliError::Numerical(format!("{} seed {seed}: {e}", kind.name())))?;
    let sched = stream.schedule;
    let headline = RunSummary::from_log(&log, hindsight, Some(sched.tb_end))?;
    let out = &config.out;
    save_metrics(&metrics_path(out, kind, seed), &log)?;
    if config.checkpoint {
        Checkpoint::new(kind, seed, stream.d1(), stream.d2(), stream.classes, sched.n_total, learner)
            .save(&checkpoint_path(out, kind, seed))?;
    }
    let summary = SummaryFile {
        config: config.clone(),
        variant: kind,
        seed,
        rounds: log.rows.len(),
        window: sched.window,
        t1_end: sched.t1_end,
        tb_end: sched.tb_end,
        acr: headline.acr,
        mean_oca: headline.mean_oca,
        final_oca: headline.final_oca,
        hindsight,
        hindsight_epochs: config.hindsight_epochs,
        hindsight_definition: HINDSIGHT_DEFINITION.into(),
        boundary_drop: headline.boundary_drop,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    let path = summary_path(out, kind, seed);
    let text = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}
