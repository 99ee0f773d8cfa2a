//! Aggregates summary files into a plain-text table, one row per variant.

use std::fmt::Write as _;
use std::path::Path;

use old3s_core::eval::mean_var;
use old3s_core::learner::VariantKind;

use crate::error::{CliError, CliResult};
use crate::runner::SummaryFile;

pub fn load_summaries(dir: &Path) -> CliResult<Vec<SummaryFile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::io(p, e))
        })
        .collect()
}

/// ACR is reported as mean ± sample variance across seeds.
pub fn render(summaries: &[SummaryFile]) -> CliResult<String> {
    if summaries.is_empty() {
        return Err(CliError::Config("no summaries to report".into()));
    }
    let mut s = String::new();
    writeln!(
        s,
        "{:<11} {:>5}  {:>22}  {:>9}  {:>9}  {:>10}",
        "variant", "seeds", "ACR (mean ± var)", "mean OCA", "hindsight", "drop"
    )
    .unwrap();
    for kind in VariantKind::ALL {
        let runs: Vec<&SummaryFile> = summaries.iter().filter(|r| r.variant == kind).collect();
        if runs.is_empty() {
            continue;
        }
        let col = |f: fn(&SummaryFile) -> f64| mean_var(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let acr = col(|r| r.acr)?;
        let oca = col(|r| r.mean_oca)?;
        let hind = col(|r| r.hindsight)?;
        let drops: Vec<f64> = runs.iter().filter_map(|r| r.boundary_drop).collect();
        let drop = if drops.is_empty() {
            "-".to_string()
        } else {
            format!("{:+.4}", mean_var(&drops)?.mean)
        };
        writeln!(
            s,
            "{:<11} {:>5}  {:>22}  {:>9.4}  {:>9.4}  {:>10}",
            kind.name(),
            runs.len(),
            format!("{:.4} ± {:.5}", acr.mean, acr.variance),
            oca.mean,
            hind.mean,
            drop
        )
        .unwrap();
    }
    Ok(s)
}
