//! Single-string trace reconstruction.

mod bma;
mod map;
mod padded;

use serde::{Deserialize, Serialize};

use crate::bits::{BitString, Trace};
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::rng::{SeedTree, StreamRng};

pub use bma::{bma_reconstruct, BmaOutcome, Resync, MIN_BMA_TRACES};
pub use map::{map_reconstruct, MAX_MAP_LEN};
pub use padded::{
    majority_vote, padded_length, padded_reconstruct, padded_traces, repeat_count, tally_runs, ChannelSource,
    PaddedOutcome, PaddingConfig, TallyEntry, TracePool, TraceSource, DELTA_PRIME, MAJORITY_DENOMINATOR,
    MAJORITY_NUMERATOR, MIN_REPEATS,
};

/// A reconstructor that can run inside the padding wrapper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseReconstructor {
    ExactMap,
    Bma {
        #[serde(default)]
        resync: Option<Resync>,
    },
}

impl BaseReconstructor {
    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        match self {
            BaseReconstructor::ExactMap if n > MAX_MAP_LEN => Err(Error::param(format!(
                "exact MAP is limited to length {MAX_MAP_LEN}, asked for {n}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn run(&self, n: usize, traces: &[Trace], channel: &ChannelParams, rng: &mut StreamRng) -> Result<BitString> {
        Ok(match self {
            BaseReconstructor::ExactMap => map_reconstruct(n, traces, channel)?,
            BaseReconstructor::Bma { resync } => {
                let rule = resync.unwrap_or_default();
                bma_reconstruct(n, traces, channel, rule, rng)?.string
            }
        })
    }
}

/// Padding parameters as configured; unset values are filled in by the
/// caller (the pipeline derives `tau` and `delta` from its own targets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PaddingSettings {
    pub m_const: f64,
    pub repeat_factor: f64,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    /// Defaults to an even split of the available traces over the runs.
    pub traces_per_run: Option<usize>,
}

impl Default for PaddingSettings {
    fn default() -> Self {
        Self {
            m_const: 1.0,
            repeat_factor: 8.0,
            tau: None,
            delta: None,
            traces_per_run: None,
        }
    }
}

impl PaddingSettings {
    /// Resolves against `available` traces, using `tau` and `delta` only
    /// where the settings leave them unset.
    pub fn resolve(&self, tau: f64, delta: f64, available: usize) -> Result<PaddingConfig> {
        let tau = self.tau.unwrap_or(tau);
        let delta = self.delta.unwrap_or(delta);
        let repeats = repeat_count(delta, self.repeat_factor);
        let per_run = match self.traces_per_run {
            Some(m) => m,
            None => {
                let m = available / repeats;
                if m == 0 {
                    return Err(Error::InsufficientTraces {
                        needed: repeats,
                        got: available,
                    });
                }
                m
            }
        };
        PaddingConfig::new(tau, self.m_const, delta, self.repeat_factor, per_run)
    }
}

/// Overall failure probability used when a standalone padded call sets none.
pub const DEFAULT_PADDING_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReconstructorSpec {
    ExactMap,
    Bma {
        #[serde(default)]
        resync: Option<Resync>,
    },
    Padded {
        base: BaseReconstructor,
        #[serde(default)]
        padding: PaddingSettings,
    },
}

impl Default for ReconstructorSpec {
    fn default() -> Self {
        ReconstructorSpec::Bma { resync: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    /// A noiseless channel delivered `x` itself.
    Verbatim,
    ExactMap,
    Bma {
        exhausted_at: Option<usize>,
        subsampled: bool,
    },
    Padded {
        padded_len: usize,
        repeats: usize,
        traces_per_run: usize,
        runs: Vec<Option<BitString>>,
        tally: Vec<TallyEntry>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub string: BitString,
    pub diagnostics: Diagnostics,
}

/// Reconstructs a length-`n` string from traces of it.
///
/// A padded spec draws its runs from `traces` in order. Unless configured,
/// `tau` is `M / n` (so `N = 4n`) and `delta` is [`DEFAULT_PADDING_DELTA`].
pub fn reconstruct(
    spec: &ReconstructorSpec,
    n: usize,
    traces: &[Trace],
    channel: &ChannelParams,
    seeds: &SeedTree,
) -> Result<Reconstruction> {
    if n == 0 {
        return Err(Error::param("source length must be positive"));
    }
    if traces.is_empty() {
        return Err(Error::InsufficientTraces { needed: 1, got: 0 });
    }
    if channel.is_noiseless() {
        if let Some(y) = traces.iter().find(|y| y.len() == n) {
            return Ok(Reconstruction {
                string: BitString::new(y.bits().clone())?,
                diagnostics: Diagnostics::Verbatim,
            });
        }
        return Err(Error::ReconstructionFailed(format!(
            "noiseless channel but no trace has length {n}"
        )));
    }
    match spec {
        ReconstructorSpec::ExactMap => Ok(Reconstruction {
            string: map_reconstruct(n, traces, channel)?,
            diagnostics: Diagnostics::ExactMap,
        }),
        ReconstructorSpec::Bma { resync } => {
            let rule = resync.unwrap_or_default();
            let out = bma_reconstruct(n, traces, channel, rule, &mut seeds.stream("bma", 0))?;
            Ok(Reconstruction {
                string: out.string,
                diagnostics: Diagnostics::Bma {
                    exhausted_at: out.exhausted_at,
                    subsampled: out.subsampled,
                },
            })
        }
        ReconstructorSpec::Padded { base, padding } => {
            let tau = (padding.m_const / n as f64).min(0.5);
            let cfg = padding.resolve(tau, DEFAULT_PADDING_DELTA, traces.len())?;
            padded_with(base, &cfg, n, &mut TracePool::new(traces), channel, seeds)
        }
    }
}

/// Padded reconstruction with a resolved configuration, reporting diagnostics.
pub fn padded_with<S: TraceSource + ?Sized>(
    base: &BaseReconstructor,
    cfg: &PaddingConfig,
    n: usize,
    source: &mut S,
    channel: &ChannelParams,
    seeds: &SeedTree,
) -> Result<Reconstruction> {
    let out = padded_reconstruct(base, cfg, n, source, channel, seeds)?;
    Ok(Reconstruction {
        string: out.string,
        diagnostics: Diagnostics::Padded {
            padded_len: cfg.padded_len,
            repeats: cfg.repeats,
            traces_per_run: cfg.traces_per_run,
            runs: out.runs,
            tally: out.tally,
        },
    })
}
