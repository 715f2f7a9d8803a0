//! Seeded batches of pipeline trials and their output files.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use poprec::pipeline::{evaluate_run, recover_population, RecoveryResult, RunMetrics, StageTimings};
use poprec::{Population, SeedTree};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::ExperimentSpec;

/// Everything needed to replay and score one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub seed: u64,
    pub trial: usize,
    pub spec: ExperimentSpec,
    pub truth: Population,
    /// Pipeline completed and `tv <= eps`.
    pub success: bool,
    pub error: Option<String>,
    pub metrics: Option<RunMetrics>,
    pub result: Option<RecoveryResult>,
}

/// One row of `aggregate.csv`. Rates over completed trials; pair error rates
/// are pooled over all pairs of all completed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub pipeline_failures: usize,
    pub mean_tv: Option<f64>,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub same_labeled_different_rate: Option<f64>,
    pub different_labeled_same_rate: Option<f64>,
    pub clustering_failures: usize,
    pub reconstruction_failures: usize,
    pub sampling_failures: usize,
}

pub fn aggregate(records: &[TrialRecord]) -> Aggregate {
    let first = &records[0];
    let done: Vec<&RunMetrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let mean = |f: fn(&RunMetrics) -> f64| {
        (!done.is_empty()).then(|| done.iter().map(|m| f(m)).sum::<f64>() / done.len() as f64)
    };
    let pooled = |errors: fn(&RunMetrics) -> usize, pairs: fn(&RunMetrics) -> usize| {
        let total: usize = done.iter().map(|m| pairs(m)).sum();
        (total > 0).then(|| done.iter().map(|m| errors(m)).sum::<usize>() as f64 / total as f64)
    };
    let successes = records.iter().filter(|r| r.success).count();
    Aggregate {
        scenario: first.scenario.clone(),
        seed: first.seed,
        trials: records.len(),
        successes,
        success_rate: successes as f64 / records.len() as f64,
        pipeline_failures: records.iter().filter(|r| r.error.is_some()).count(),
        mean_tv: mean(|m| m.tv),
        mean_precision: mean(|m| m.precision),
        mean_recall: mean(|m| m.recall),
        same_labeled_different_rate: pooled(
            |m| m.confusion.same_labeled_different,
            |m| m.confusion.same_source_pairs,
        ),
        different_labeled_same_rate: pooled(
            |m| m.confusion.different_labeled_same,
            |m| m.confusion.different_source_pairs,
        ),
        clustering_failures: done.iter().filter(|m| m.clustering_failure).count(),
        reconstruction_failures: done.iter().map(|m| m.reconstruction_failures).sum(),
        sampling_failures: done.iter().filter(|m| m.sampling_failure).count(),
    }
}

pub struct Batch {
    pub records: Vec<TrialRecord>,
    pub timings: Vec<(Option<StageTimings>, f64)>,
}

impl Batch {
    pub fn strict_failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.error.is_some() && r.spec.pipeline.strict)
            .count()
    }
}

fn run_trial(spec: &ExperimentSpec, k: usize) -> anyhow::Result<(TrialRecord, Option<StageTimings>, f64)> {
    let start = Instant::now();
    let trial = SeedTree::new(spec.seed).child("trial", k as u64);
    let truth = spec.population(&trial)?;
    let cfg = spec.pipeline_config();
    let (result, error) = match recover_population(&cfg, &truth, &trial.child("pipeline", 0)) {
        Ok(r) => (Some(r), None),
        Err(e) => {
            log::warn!("{} trial {k}: {e}", spec.scenario);
            (None, Some(e.to_string()))
        }
    };
    let metrics = result.as_ref().map(|r| evaluate_run(r, &truth, cfg.eps, cfg.s));
    let timings = result.as_ref().map(|r| r.timings.clone());
    let record = TrialRecord {
        scenario: spec.scenario.clone(),
        seed: spec.seed,
        trial: k,
        spec: spec.clone(),
        truth,
        success: metrics.as_ref().is_some_and(|m| m.tv <= cfg.eps),
        error,
        metrics,
        result,
    };
    Ok((record, timings, start.elapsed().as_secs_f64()))
}

/// Runs all trials; each trial has its own seed subtree, so results do not
/// depend on the thread count or on scheduling.
pub fn run_batch(spec: &ExperimentSpec) -> anyhow::Result<Batch> {
    let out: Vec<_> = (0..spec.trials)
        .into_par_iter()
        .map(|k| run_trial(spec, k))
        .collect::<anyhow::Result<_>>()?;
    let mut records = Vec::with_capacity(out.len());
    let mut timings = Vec::with_capacity(out.len());
    for (r, t, wall) in out {
        records.push(r);
        timings.push((t, wall));
    }
    Ok(Batch { records, timings })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'a str,
    seed: u64,
    trials: usize,
    trace_budget: usize,
    spec: &'a ExperimentSpec,
    files: Vec<String>,
}

pub fn trial_file_name(k: usize) -> String {
    format!("trial-{k:04}.json")
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

#[derive(Serialize)]
struct TimingRow {
    trial: usize,
    wall_seconds: f64,
    draw: Option<f64>,
    cluster: Option<f64>,
    partition: Option<f64>,
    reconstruct: Option<f64>,
}

/// Writes `manifest.json`, `trials/trial-NNNN.json`, `aggregate.csv` and
/// `timings.csv`. All but the timings file are deterministic in the seed.
pub fn write_batch(dir: &Path, spec: &ExperimentSpec, batch: &Batch) -> anyhow::Result<Aggregate> {
    let trials_dir = dir.join("trials");
    fs::create_dir_all(&trials_dir).with_context(|| format!("creating {}", trials_dir.display()))?;
    let mut files = Vec::new();
    for r in &batch.records {
        let name = trial_file_name(r.trial);
        write_json(&trials_dir.join(&name), r)?;
        files.push(format!("trials/{name}"));
    }
    let agg = aggregate(&batch.records);
    write_csv(&dir.join("aggregate.csv"), std::slice::from_ref(&agg))?;
    files.push("aggregate.csv".into());
    let rows: Vec<TimingRow> = batch
        .timings
        .iter()
        .enumerate()
        .map(|(trial, (t, wall))| TimingRow {
            trial,
            wall_seconds: *wall,
            draw: t.as_ref().map(|t| t.draw),
            cluster: t.as_ref().map(|t| t.cluster),
            partition: t.as_ref().map(|t| t.partition),
            reconstruct: t.as_ref().map(|t| t.reconstruct),
        })
        .collect();
    write_csv(&dir.join("timings.csv"), &rows)?;
    files.push("timings.csv".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: &spec.scenario,
        seed: spec.seed,
        trials: spec.trials,
        trace_budget: spec.pipeline_config().trace_budget()?,
        spec,
        files,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(agg)
}

/// Recomputes the aggregate from the per-trial files in `dir` and compares
/// it with `aggregate.csv`.
pub fn audit(dir: &Path) -> anyhow::Result<Result<Aggregate, String>> {
    let trials_dir = dir.join("trials");
    let mut names: Vec<_> = fs::read_dir(&trials_dir)
        .with_context(|| format!("reading {}", trials_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    if names.is_empty() {
        anyhow::bail!("no trial files in {}", trials_dir.display());
    }
    let records = names
        .iter()
        .map(|p| -> anyhow::Result<TrialRecord> {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let recomputed = aggregate(&records);
    let mut reader = csv::Reader::from_path(dir.join("aggregate.csv"))?;
    let stored: Aggregate = reader
        .deserialize()
        .next()
        .context("aggregate.csv has no rows")??;
    Ok(if stored == recomputed {
        Ok(recomputed)
    } else {
        Err(format!("stored {stored:?}\nrecomputed {recomputed:?}"))
    })
}
