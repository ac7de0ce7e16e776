//! Parameter sweeps over one leaf of the config.
//!
//! Child `i` is the base config with the axis set to `values[i]` and seed
//! [`child_seed`]`(master, i)`; it runs in `run-<i>/` exactly as a standalone
//! run of that derived config would, so summary rows match single runs bit
//! for bit whatever the parallelism.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::Utc;
use nmd_core::rng::derive_seed;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::{OutputSet, RunManifest, Table};
use crate::runner::{manifest_for, run, SUMMARY_FILE};

pub struct SweepRow {
    pub index: usize,
    pub value: toml::Value,
    pub seed: u64,
    pub result: Result<Vec<(String, String)>, String>,
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub manifest: RunManifest,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }
}

/// Parses a command-line value as a TOML literal, falling back to a bare
/// string.
pub fn parse_value(text: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {text}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn render(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// The base config (the sweep's `base` experiment if `cfg` is itself a
/// sweep) with `axis` set to `values[index]` and the derived child seed.
pub fn child_config(cfg: &ExperimentConfig, axis: &str, values: &[toml::Value], index: usize) -> Result<ExperimentConfig, CliError> {
    let mut base = cfg.clone();
    if let Experiment::Sweep(s) = &cfg.experiment {
        base.experiment = (*s.base).clone();
    }
    base.seed = child_seed(cfg.seed, index);
    base.out_dir = None;
    let mut doc = toml::Value::try_from(&base).map_err(|e| CliError::validation(format!("config does not serialize: {e}")))?;
    set_leaf(&mut doc, axis, values[index].clone())?;
    doc.try_into().map_err(|e| CliError::validation(format!("axis {axis} = {}: {e}", render(&values[index]))))
}

fn set_leaf(doc: &mut toml::Value, axis: &str, value: toml::Value) -> Result<(), CliError> {
    let missing = || CliError::validation(format!("axis {axis:?} does not name a field of the config"));
    let mut node = doc;
    for part in axis.split('.') {
        node = match node {
            toml::Value::Table(t) => t.get_mut(part).ok_or_else(missing)?,
            toml::Value::Array(a) => {
                let i: usize = part.parse().map_err(|_| missing())?;
                a.get_mut(i).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    *node = match (&*node, value) {
        (toml::Value::Table(_) | toml::Value::Array(_), _) => {
            return Err(CliError::validation(format!("axis {axis:?} names a table or array, not a leaf")))
        }
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    Ok(())
}

/// Runs every child with at most `parallelism` concurrent runs (further
/// capped by the global thread pool) and writes the merged summary.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: &str,
    values: &[toml::Value],
    parallelism: usize,
    out: &Path,
) -> Result<SweepReport, CliError> {
    if values.is_empty() {
        return Err(CliError::validation("sweep needs at least one value"));
    }
    let children: Vec<ExperimentConfig> =
        (0..values.len()).map(|i| child_config(cfg, axis, values, i)).collect::<Result<_, _>>()?;
    for c in &children {
        c.validate()?;
    }
    let started_at = Utc::now().to_rfc3339();
    let workers = parallelism.clamp(1, rayon::current_num_threads().max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        children
            .par_iter()
            .enumerate()
            .map(|(i, child)| SweepRow {
                index: i,
                value: values[i].clone(),
                seed: child.seed,
                result: run(child, &out.join(child_dir(i))).map(|(_, s)| s).map_err(|e| e.to_string()),
            })
            .collect()
    });

    let keys: Vec<String> = rows
        .iter()
        .find_map(|r| r.result.as_ref().ok())
        .map(|s| s.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["index".to_string(), axis.to_string(), "seed".into(), "status".into()];
    header.extend(keys.iter().cloned());
    header.push("error".into());
    let mut table = Table { header, rows: Vec::new() };
    for r in &rows {
        let mut cells = vec![r.index.to_string(), render(&r.value), r.seed.to_string()];
        match &r.result {
            Ok(s) => {
                cells.push("ok".into());
                cells.extend(s.iter().map(|(_, v)| v.clone()));
                cells.push(String::new());
            }
            Err(e) => {
                cells.push("failed".into());
                cells.extend(keys.iter().map(|_| String::new()));
                cells.push(e.clone());
            }
        }
        table.rows.push(cells);
    }

    let mut files = OutputSet::new(out);
    files.write_table(SUMMARY_FILE, &table)?;
    for r in rows.iter().filter(|r| r.result.is_ok()) {
        files.register(&format!("{}/{}", child_dir(r.index), RunManifest::FILE_NAME))?;
    }
    let mut seeds = BTreeMap::from([("master".to_string(), cfg.seed)]);
    for r in &rows {
        seeds.insert(child_dir(r.index), r.seed);
    }
    let mut record = cfg.clone();
    if !matches!(record.experiment, Experiment::Sweep(_)) {
        record.experiment = Experiment::Sweep(crate::config::SweepParams {
            axis: axis.to_string(),
            values: values.to_vec(),
            parallelism,
            base: Box::new(cfg.experiment.clone()),
        });
    }
    let manifest = files.finish(manifest_for(&record, seeds, started_at))?;
    Ok(SweepReport { rows, manifest })
}

/// Seed of sweep child `index`, kept to 63 bits so it fits a TOML integer.
pub fn child_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64) & (i64::MAX as u64)
}

pub fn child_dir(index: usize) -> String {
    format!("run-{index:03}")
}
