//! Experiment and sweep spec files (TOML).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use poprec::pipeline::{ClusteringMode, PipelineConfig, TraceBudget};
use poprec::reconstruct::ReconstructorSpec;
use poprec::{BitString, ChannelParams, DiscreteDistribution, Population, SeedTree};
use serde::{Deserialize, Serialize};

/// A problem with the user's configuration; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub n: usize,
    pub s: usize,
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta_hard: f64,
    #[serde(default = "default_delta")]
    pub delta_fail: f64,
    #[serde(default)]
    pub budget: TraceBudget,
    #[serde(default)]
    pub large_cluster_threshold: Option<f64>,
    #[serde(default)]
    pub reconstructor: ReconstructorSpec,
    #[serde(default = "default_true")]
    pub strict: bool,
    #[serde(default)]
    pub clustering: ClusteringMode,
}

fn default_delta() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PopulationSpec {
    /// Fresh uniform strings each trial; `probs` defaults to uniform over `s`.
    Random {
        #[serde(default)]
        probs: Option<Vec<f64>>,
    },
    /// Fixed strings, one per line, each optionally followed by a weight.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub channel: ChannelParams,
    pub pipeline: PipelineSection,
    pub population: PopulationSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Q,
    QIns,
    Traces,
    S,
    Eps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::Q => "q",
            SweepAxis::QIns => "q_ins",
            SweepAxis::Traces => "traces",
            SweepAxis::S => "s",
            SweepAxis::Eps => "eps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(flatten)]
    pub base: ExperimentSpec,
    pub sweep: SweepSection,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Makes a relative population path relative to the spec file's directory.
fn anchor_paths(spec: &mut ExperimentSpec, spec_path: &Path) {
    if let PopulationSpec::File { path } = &mut spec.population {
        if path.is_relative() {
            if let Some(dir) = spec_path.parent() {
                *path = dir.join(&*path);
            }
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let mut spec: ExperimentSpec = read_toml(path)?;
        anchor_paths(&mut spec, path);
        Ok(spec)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        PipelineConfig {
            n: p.n,
            s: p.s,
            eps: p.eps,
            delta_hard: p.delta_hard,
            delta_fail: p.delta_fail,
            channel: self.channel,
            budget: p.budget,
            large_cluster_threshold: p.large_cluster_threshold,
            reconstructor: p.reconstructor.clone(),
            strict: p.strict,
            clustering: p.clustering,
        }
    }

    /// Checks everything that can be checked before the first trial,
    /// including that the population file exists and parses.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        let cfg = self.pipeline_config();
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        cfg.trace_budget().map_err(|e| config_err(e.to_string()))?;
        match &self.population {
            PopulationSpec::Random { probs: Some(probs) } if probs.len() != self.pipeline.s => Err(config_err(format!(
                "population has {} probabilities but s = {}",
                probs.len(),
                self.pipeline.s
            ))),
            PopulationSpec::Random { probs } => {
                if let Some(probs) = probs {
                    DiscreteDistribution::new(probs.iter().copied().enumerate().collect())
                        .map_err(|e| config_err(format!("population probs: {e}")))?;
                }
                Ok(())
            }
            PopulationSpec::File { .. } => self.population(&SeedTree::new(self.seed)).map(|_| ()),
        }
    }

    /// The population for one trial. Random populations draw from `trial`.
    pub fn population(&self, trial: &SeedTree) -> anyhow::Result<Population> {
        match &self.population {
            PopulationSpec::Random { probs } => {
                let probs = probs.clone().unwrap_or_else(|| Population::uniform_probs(self.pipeline.s));
                Ok(Population::random(self.pipeline.n, probs, &mut trial.stream("population", 0))?)
            }
            PopulationSpec::File { path } => {
                let text = fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read population {}: {e}", path.display())))?;
                let pop = parse_population(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                if pop.n() != self.pipeline.n {
                    return Err(config_err(format!(
                        "population strings have length {} but n = {}",
                        pop.n(),
                        self.pipeline.n
                    )));
                }
                Ok(pop)
            }
        }
    }

    /// Sets one swept axis.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> anyhow::Result<Self> {
        let mut spec = self.clone();
        let count = |v: f64| -> anyhow::Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(config_err(format!("{} must be a positive integer, got {v}", axis.name())))
            }
        };
        match axis {
            SweepAxis::N => spec.pipeline.n = count(value)?,
            SweepAxis::S => {
                if matches!(spec.population, PopulationSpec::Random { probs: Some(_) } | PopulationSpec::File { .. }) {
                    return Err(config_err("sweeping s needs a random population without explicit probs"));
                }
                spec.pipeline.s = count(value)?;
            }
            SweepAxis::Traces => {
                spec.pipeline.budget = TraceBudget::Explicit { traces: count(value)? };
            }
            SweepAxis::Eps => spec.pipeline.eps = value,
            SweepAxis::Q => {
                spec.channel = ChannelParams::new(value, spec.channel.q_ins()).map_err(|e| config_err(e.to_string()))?;
            }
            SweepAxis::QIns => {
                spec.channel = ChannelParams::new(spec.channel.q(), value).map_err(|e| config_err(e.to_string()))?;
            }
        }
        Ok(spec)
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let mut spec: SweepSpec = read_toml(path)?;
        anchor_paths(&mut spec.base, path);
        if spec.sweep.values.is_empty() {
            return Err(config_err("sweep.values is empty"));
        }
        Ok(spec)
    }
}

/// `<bits> [weight]` per line; `#` starts a comment. Missing weights make
/// the population uniform, and weights must be given for all lines or none.
pub fn parse_population(text: &str) -> anyhow::Result<Population> {
    let mut strings = Vec::new();
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let bits: BitString = fields
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e| anyhow::anyhow!("line {}: {e}", lineno + 1))?;
        strings.push(bits);
        if let Some(w) = fields.next() {
            weights.push(
                w.parse::<f64>()
                    .map_err(|e| anyhow::anyhow!("line {}: bad weight {w:?}: {e}", lineno + 1))?,
            );
        }
    }
    if strings.is_empty() {
        anyhow::bail!("no strings");
    }
    let probs = match weights.len() {
        0 => Population::uniform_probs(strings.len()),
        k if k == strings.len() => weights,
        _ => anyhow::bail!("weights must be given for every string or for none"),
    };
    Ok(Population::new(strings, probs)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
scenario = "basic"
seed = 3
trials = 2
channel = { q = 0.1, q_ins = 0.0 }
population = { kind = "random", probs = [0.6, 0.4] }

[pipeline]
n = 12
s = 2
eps = 0.25
budget = { kind = "explicit", traces = 100 }
reconstructor = { kind = "exact_map" }
clustering = "ground_truth"
"#;

    #[test]
    fn parses_and_validates() {
        let spec: ExperimentSpec = toml::from_str(BASIC).unwrap();
        assert_eq!(spec.pipeline.delta_hard, 0.1);
        assert!(spec.pipeline.strict);
        spec.validate().unwrap();
        let cfg = spec.pipeline_config();
        assert_eq!(cfg.trace_budget().unwrap(), 100);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_probs() {
        assert!(toml::from_str::<ExperimentSpec>(&BASIC.replace("seed = 3", "sede = 3")).is_err());
        let spec: ExperimentSpec = toml::from_str(&BASIC.replace("[0.6, 0.4]", "[0.6, 0.3, 0.1]")).unwrap();
        assert!(spec.validate().unwrap_err().is::<ConfigError>());
    }

    #[test]
    fn axis_overrides() {
        let spec: ExperimentSpec = toml::from_str(BASIC).unwrap();
        assert_eq!(spec.with_axis(SweepAxis::N, 10.0).unwrap().pipeline.n, 10);
        assert_eq!(spec.with_axis(SweepAxis::QIns, 0.2).unwrap().channel.q_ins(), 0.2);
        assert!(spec.with_axis(SweepAxis::N, 2.5).is_err());
        assert!(spec.with_axis(SweepAxis::S, 3.0).is_err());
        assert_eq!(
            spec.with_axis(SweepAxis::Traces, 50.0).unwrap().pipeline.budget,
            TraceBudget::Explicit { traces: 50 }
        );
    }

    #[test]
    fn population_file_format() {
        let pop = parse_population("0101 0.75\n# comment\n1100 0.25\n").unwrap();
        assert_eq!(pop.s(), 2);
        assert_eq!(pop.probs(), &[0.75, 0.25]);
        assert_eq!(parse_population("01\n10\n").unwrap().probs(), &[0.5, 0.5]);
        assert!(parse_population("01 0.5\n10\n").is_err());
        assert!(parse_population("").is_err());
        assert!(parse_population("012\n").is_err());
    }
}
