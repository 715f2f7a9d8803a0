mod run;
mod spec;
mod tools;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use poprec::cluster::block_length;
use poprec::ChannelParams;

use crate::run::{run_batch, write_batch, Aggregate};
use crate::spec::{ConfigError, ExperimentSpec, SweepSpec};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_STRICT_FAILURES: u8 = 3;

#[derive(Parser)]
#[command(name = "poprec", version, about = "Population recovery over the insertion/deletion channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded pipeline trials from a spec file.
    Run(BatchArgs),
    /// Run one batch per value of a single swept parameter.
    Sweep(BatchArgs),
    /// Calibrate the block-test thresholds and check them by simulation.
    Calibrate(CalibrateArgs),
    /// Measure pairwise clustering error rates against n.
    ClusterBench(BenchArgs),
    /// Recompute aggregate.csv from the per-trial files of a run.
    Audit {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; defaults to all cores. Does not affect results.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, conflicts_with = "robust")]
    strict: bool,
    /// Drop failed clusters and tolerate non-clique verdicts.
    #[arg(long)]
    robust: bool,
    /// Output directory; defaults to the spec's `out` or `results/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BatchArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if self.strict {
            spec.pipeline.strict = true;
        }
        if self.robust {
            spec.pipeline.strict = false;
        }
    }

    fn out_dir(&self, spec: &ExperimentSpec) -> PathBuf {
        self.out
            .clone()
            .or_else(|| spec.out.clone())
            .unwrap_or_else(|| Path::new("results").join(&spec.scenario))
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// Block length.
    #[arg(long, required_unless_present = "n", conflicts_with = "n")]
    t: Option<usize>,
    /// Source length; the block length is derived from it.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0.567)]
    tau: f64,
    #[arg(long, default_value_t = 200_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated source lengths, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    q_ins: f64,
    #[arg(long, default_value_t = 400)]
    pairs: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        if k == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        builder = builder.num_threads(k);
    }
    Ok(builder.build()?.install(f))
}

fn print_aggregate(agg: &Aggregate, dir: &Path) {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "{}: {}/{} succeeded, {} pipeline failures, mean TV {}, pair errors {} / {} -> {}",
        agg.scenario,
        agg.successes,
        agg.trials,
        agg.pipeline_failures,
        opt(agg.mean_tv),
        opt(agg.same_labeled_different_rate),
        opt(agg.different_labeled_same_rate),
        dir.display()
    );
}

fn cmd_run(args: &BatchArgs) -> anyhow::Result<u8> {
    let mut spec = ExperimentSpec::load(&args.spec)?;
    args.apply(&mut spec);
    spec.validate()?;
    let dir = args.out_dir(&spec);
    let batch = with_threads(args.threads, || run_batch(&spec))??;
    let agg = write_batch(&dir, &spec, &batch)?;
    print_aggregate(&agg, &dir);
    Ok(if batch.strict_failures() > 0 { EXIT_STRICT_FAILURES } else { 0 })
}

fn cmd_sweep(args: &BatchArgs) -> anyhow::Result<u8> {
    let mut sweep = SweepSpec::load(&args.spec)?;
    args.apply(&mut sweep.base);
    let axis = sweep.sweep.axis;
    let specs = sweep
        .sweep
        .values
        .iter()
        .map(|&v| {
            let spec = sweep.base.with_axis(axis, v)?;
            spec.validate()?;
            Ok((v, spec))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let dir = args.out_dir(&sweep.base);
    let mut aggregates = Vec::new();
    let mut strict_failures = 0;
    for (v, spec) in &specs {
        let sub = dir.join(format!("{}={v}", axis.name()));
        let batch = with_threads(args.threads, || run_batch(spec))??;
        strict_failures += batch.strict_failures();
        let agg = write_batch(&sub, spec, &batch)?;
        print_aggregate(&agg, &sub);
        aggregates.push((*v, agg));
    }
    // the aggregate columns, prefixed by the swept axis and its value
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(dir.join("sweep.csv"))?;
    for (i, (value, aggregate)) in aggregates.iter().enumerate() {
        let mut inner = csv::Writer::from_writer(Vec::new());
        inner.serialize(aggregate)?;
        let text = String::from_utf8(inner.into_inner()?)?;
        let mut rows = csv::Reader::from_reader(text.as_bytes());
        if i == 0 {
            w.write_record(["axis", "value"].into_iter().chain(rows.headers()?.iter()))?;
        }
        let record = rows.records().next().context("empty aggregate row")??;
        let value = value.to_string();
        w.write_record([axis.name(), value.as_str()].into_iter().chain(record.iter()))?;
    }
    w.flush()?;
    Ok(if strict_failures > 0 { EXIT_STRICT_FAILURES } else { 0 })
}

fn cmd_calibrate(args: &CalibrateArgs) -> anyhow::Result<u8> {
    let t = match (args.t, args.n) {
        (Some(t), _) => t,
        (None, Some(n)) => block_length(n),
        (None, None) => unreachable!("clap requires one of --t and --n"),
    };
    if t == 0 {
        return Err(ConfigError("block length must be at least 1".into()).into());
    }
    let report = tools::calibrate(t, args.tau, args.samples, args.seed).map_err(|e| ConfigError(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = &args.out {
        fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn cmd_cluster_bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let channel = ChannelParams::new(args.q, args.q_ins).map_err(|e| ConfigError(e.to_string()))?;
    let out = tools::cluster_bench(&args.n, &channel, args.pairs, args.trials, args.seed)
        .map_err(|e| ConfigError(e.to_string()))?;
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &out.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    for (trial, ok) in out.monotone.iter().enumerate() {
        if !ok {
            eprintln!("trial {trial}: an error rate rose significantly with n");
        }
    }
    Ok(0)
}

fn cmd_audit(dir: &Path) -> anyhow::Result<u8> {
    match run::audit(dir)? {
        Ok(agg) => {
            println!("audit ok: {} trials agree with aggregate.csv", agg.trials);
            Ok(0)
        }
        Err(diff) => {
            eprintln!("audit mismatch:\n{diff}");
            Ok(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::ClusterBench(args) => cmd_cluster_bench(args),
        Command::Audit { dir } => cmd_audit(dir),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<ConfigError>() { EXIT_CONFIG } else { EXIT_FAILURE })
        }
    }
}
