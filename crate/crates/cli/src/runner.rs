use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Utc;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::experiments::{execute, RunContext, Summary};
use crate::output::{OutputSet, RunManifest, Table};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Output directory: the explicit one, else the config's, else
/// `runs/<kind>-<hash prefix>`.
pub fn resolve_out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", cfg.experiment.kind(), &cfg.hash()[..12])))
}

pub fn summary_table(summary: &Summary) -> Table {
    let header: Vec<&str> = summary.iter().map(|(k, _)| k.as_str()).collect();
    let mut t = Table::new(&header);
    t.push(summary.iter().map(|(_, v)| v.clone()));
    t
}

/// Validates, runs and records one experiment in `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(RunManifest, Summary), CliError> {
    cfg.validate()?;
    if let Experiment::Sweep(s) = &cfg.experiment {
        let report = crate::sweep::sweep(cfg, &s.axis, &s.values, s.parallelism, out)?;
        let summary = vec![("runs".into(), report.rows.len().to_string()), ("failed".into(), report.failed().to_string())];
        if report.failed() > 0 {
            return Err(CliError::SweepFailed { failed: report.failed(), total: report.rows.len() });
        }
        return Ok((report.manifest, summary));
    }
    let started_at = Utc::now().to_rfc3339();
    let mut files = OutputSet::new(out);
    let mut seeds = BTreeMap::from([("master".to_string(), cfg.seed)]);
    let summary = {
        let mut ctx = RunContext { cfg, out: &mut files, seeds: &mut seeds };
        execute(&mut ctx)?
    };
    files.write_table(SUMMARY_FILE, &summary_table(&summary))?;
    let manifest = manifest_for(cfg, seeds, started_at);
    Ok((files.finish(manifest)?, summary))
}

pub(crate) fn manifest_for(cfg: &ExperimentConfig, seeds: BTreeMap<String, u64>, started_at: String) -> RunManifest {
    RunManifest {
        kind: cfg.experiment.kind().to_string(),
        config_hash: cfg.hash(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        files: Vec::new(),
    }
}
