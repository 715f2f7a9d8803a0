//! Random-padding reduction: reconstruct `x` by reconstructing `x ∘ z` for
//! fresh uniform padding `z`, repeating, and taking a 9/16 supermajority of
//! the recovered prefixes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BaseReconstructor;
use crate::bits::{BitString, Trace};
use crate::channel::{apply_channel, ChannelParams};
use crate::error::{Error, Result};
use crate::rng::{SeedTree, StreamRng};

pub const DELTA_PRIME: f64 = 0.125;
pub const MAJORITY_NUMERATOR: usize = 9;
pub const MAJORITY_DENOMINATOR: usize = 16;
pub const MIN_REPEATS: usize = 5;

/// Resolved parameters of one padded reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddingConfig {
    /// Target fraction of hard strings.
    pub tau: f64,
    /// Hardness constant `M`.
    pub m_const: f64,
    /// Padded length `N = ceil(4M / tau)`.
    pub padded_len: usize,
    /// Inner confidence of each run.
    pub delta_prime: f64,
    /// Overall failure probability the repeat count is sized for.
    pub delta: f64,
    pub repeat_factor: f64,
    pub repeats: usize,
    pub traces_per_run: usize,
}

/// `ceil(4M / tau)`, ignoring floating-point overshoot of exact quotients.
pub fn padded_length(m_const: f64, tau: f64) -> usize {
    (4.0 * m_const / tau - 1e-9).ceil() as usize
}

/// `max(5, ceil(factor * ln(1/delta)))`.
pub fn repeat_count(delta: f64, factor: f64) -> usize {
    MIN_REPEATS.max((factor * (1.0 / delta).ln() - 1e-9).ceil() as usize)
}

impl PaddingConfig {
    pub fn new(tau: f64, m_const: f64, delta: f64, repeat_factor: f64, traces_per_run: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::param(format!("tau must lie in (0,1), got {tau}")));
        }
        if !(m_const > 0.0 && m_const.is_finite()) {
            return Err(Error::param(format!("hardness constant must be positive, got {m_const}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param(format!("delta must lie in (0,1), got {delta}")));
        }
        if !(repeat_factor > 0.0 && repeat_factor.is_finite()) {
            return Err(Error::param(format!("repeat factor must be positive, got {repeat_factor}")));
        }
        if traces_per_run == 0 {
            return Err(Error::param("traces per run must be positive"));
        }
        let padded_len = padded_length(m_const, tau);
        Ok(Self {
            tau,
            m_const,
            padded_len,
            delta_prime: DELTA_PRIME,
            delta,
            repeat_factor,
            repeats: repeat_count(delta, repeat_factor),
            traces_per_run,
        })
    }

    pub fn majority_threshold(&self) -> f64 {
        MAJORITY_NUMERATOR as f64 / MAJORITY_DENOMINATOR as f64
    }

    /// Traces consumed by one call.
    pub fn total_traces(&self) -> usize {
        self.repeats * self.traces_per_run
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.padded_len <= n {
            return Err(Error::param(format!(
                "padded length {} must exceed source length {n}; lower tau",
                self.padded_len
            )));
        }
        Ok(())
    }
}

/// Yields fresh traces of a hidden string.
pub trait TraceSource {
    fn next_trace(&mut self) -> Option<Trace>;
}

impl<F: FnMut() -> Option<Trace>> TraceSource for F {
    fn next_trace(&mut self) -> Option<Trace> {
        self()
    }
}

/// Hands out a fixed list of traces once each.
#[derive(Debug, Clone)]
pub struct TracePool<'a> {
    traces: &'a [Trace],
    next: usize,
}

impl<'a> TracePool<'a> {
    pub fn new(traces: &'a [Trace]) -> Self {
        Self { traces, next: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl TraceSource for TracePool<'_> {
    fn next_trace(&mut self) -> Option<Trace> {
        let t = self.traces.get(self.next)?.clone();
        self.next += 1;
        Some(t)
    }
}

/// Simulates an unlimited supply of traces of `x`.
#[derive(Debug, Clone)]
pub struct ChannelSource {
    x: BitString,
    channel: ChannelParams,
    rng: StreamRng,
}

impl ChannelSource {
    pub fn new(x: BitString, channel: ChannelParams, rng: StreamRng) -> Self {
        Self { x, channel, rng }
    }
}

impl TraceSource for ChannelSource {
    fn next_trace(&mut self) -> Option<Trace> {
        Some(apply_channel(&self.x, &self.channel, &mut self.rng))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub string: BitString,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddedOutcome {
    pub string: BitString,
    /// Recovered prefix per run; `None` where the base reconstructor failed.
    pub runs: Vec<Option<BitString>>,
    /// Distinct prefixes by decreasing count.
    pub tally: Vec<TallyEntry>,
}

/// Counts run outcomes by decreasing multiplicity, ties in string order.
pub fn tally_runs(runs: &[Option<BitString>]) -> Vec<TallyEntry> {
    let mut sorted: Vec<&BitString> = runs.iter().flatten().collect();
    sorted.sort();
    let mut tally: Vec<TallyEntry> = Vec::new();
    for s in sorted {
        match tally.last_mut() {
            Some(e) if &e.string == s => e.count += 1,
            _ => tally.push(TallyEntry {
                string: s.clone(),
                count: 1,
            }),
        }
    }
    tally.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.string.cmp(&b.string)));
    tally
}

/// The plurality string if at least 9/16 of all runs (failed runs included)
/// produced it.
pub fn majority_vote(runs: &[Option<BitString>]) -> Result<(BitString, Vec<TallyEntry>)> {
    if runs.is_empty() {
        return Err(Error::param("majority vote over zero runs"));
    }
    let tally = tally_runs(runs);
    let best = tally.first().map_or(0, |e| e.count);
    if best * MAJORITY_DENOMINATOR < MAJORITY_NUMERATOR * runs.len() {
        return Err(Error::NoMajority { best, runs: runs.len() });
    }
    Ok((tally[0].string.clone(), tally))
}

/// Traces of `x ∘ z` for one run: each is a trace of `x` from `source`
/// followed by a trace of `z` simulated here.
pub fn padded_traces<S: TraceSource + ?Sized>(
    source: &mut S,
    z: &BitString,
    count: usize,
    channel: &ChannelParams,
    rng: &mut StreamRng,
) -> Result<Vec<Trace>> {
    (0..count)
        .map(|i| {
            let y = source.next_trace().ok_or(Error::InsufficientTraces { needed: count, got: i })?;
            Ok(y.concat(&apply_channel(z, channel, rng)))
        })
        .collect()
}

pub fn padded_reconstruct<S: TraceSource + ?Sized>(
    base: &BaseReconstructor,
    cfg: &PaddingConfig,
    n: usize,
    source: &mut S,
    channel: &ChannelParams,
    seeds: &SeedTree,
) -> Result<PaddedOutcome> {
    if n == 0 {
        return Err(Error::param("source length must be positive"));
    }
    cfg.check_len(n)?;
    base.check_len(cfg.padded_len)?;
    let big_n = cfg.padded_len;
    // Drawing is sequential so that a shared source is consumed in a fixed
    // order; the base calls then run in parallel.
    let mut batches = Vec::with_capacity(cfg.repeats);
    for run in 0..cfg.repeats {
        let mut rng = seeds.stream("pad-run", run as u64);
        let z = BitString::random(big_n - n, &mut rng)?;
        batches.push(padded_traces(source, &z, cfg.traces_per_run, channel, &mut rng).map_err(|e| {
            match e {
                Error::InsufficientTraces { got, .. } => Error::InsufficientTraces {
                    needed: cfg.total_traces(),
                    got: run * cfg.traces_per_run + got,
                },
                other => other,
            }
        })?);
    }
    let runs: Vec<Option<BitString>> = batches
        .par_iter()
        .enumerate()
        .map(|(run, traces)| {
            let mut rng = seeds.stream("pad-base", run as u64);
            match base.run(big_n, traces, channel, &mut rng) {
                Ok(w) => Some(w.prefix(n).expect("n < N")),
                Err(e) => {
                    log::debug!("padded run {run} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let (string, tally) = majority_vote(&runs)?;
    Ok(PaddedOutcome { string, runs, tally })
}
