//! Bitwise majority alignment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use statrs::function::factorial::ln_binomial;

use crate::bits::{BitString, PackedBits, Trace};
use crate::channel::ChannelParams;
use crate::error::{Error, Result};

pub const MIN_BMA_TRACES: usize = 3;

/// What a minority cursor does after disagreeing with the majority bit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "window")]
pub enum Resync {
    /// Stay put: the disagreement is read as a deletion of the current
    /// source bit, so the trace's bit belongs to a later output position.
    Hold,
    /// Scan up to `window` further positions for the majority bit and move
    /// just past it; stay put if none is found.
    Lookahead(usize),
    /// Hold, but decide bits a run at a time: each run flips the bit and
    /// its length is estimated from the runs seen at the cursors.
    #[default]
    RunLength,
}

impl Resync {
    /// `ceil(2q / (1 - q))` positions of lookahead.
    pub fn lookahead_for(channel: &ChannelParams) -> Self {
        let q = channel.q();
        Resync::Lookahead((2.0 * q / (1.0 - q) - 1e-12).ceil().max(0.0) as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BmaOutcome {
    pub string: BitString,
    /// First output position at which every cursor had run off its trace;
    /// later positions were padded.
    pub exhausted_at: Option<usize>,
    pub subsampled: bool,
}

/// Keeps each bit independently with probability `p'`, thinning the excess
/// length introduced by insertions.
fn subsample<R: Rng + ?Sized>(trace: &Trace, keep: f64, rng: &mut R) -> Vec<bool> {
    trace.iter().filter(|_| rng.random::<f64>() < keep).collect()
}

/// Length of the run of `bit` starting at the cursors, by maximum likelihood
/// over the traces showing `bit`: each observed run is `Bin(L, p)`
/// conditioned on being non-empty, mixed with a uniform outlier component
/// of weight `q` for runs merged across a deleted neighbour.
fn estimate_run(ys: &[Vec<bool>], cursors: &[usize], bit: bool, p: f64) -> usize {
    let lengths: Vec<usize> = ys
        .iter()
        .zip(cursors)
        .map(|(y, &c)| y.get(c..).map_or(0, |rest| rest.iter().take_while(|&&b| b == bit).count()))
        .filter(|&r| r > 0)
        .collect();
    let Some(&longest) = lengths.iter().max() else {
        return 1;
    };
    if p >= 1.0 {
        return *lengths.iter().min().expect("non-empty");
    }
    let outlier = (1.0 - p).clamp(0.01, 0.5);
    let uniform = outlier / longest as f64;
    let score = |l: usize| -> f64 {
        let norm = 1.0 - (1.0 - p).powi(l as i32);
        lengths
            .iter()
            .map(|&r| {
                let binom = if r > l {
                    0.0
                } else {
                    (ln_binomial(l as u64, r as u64) + r as f64 * p.ln() + (l - r) as f64 * (1.0 - p).ln()).exp()
                        / norm
                };
                ((1.0 - outlier) * binom + uniform).ln()
            })
            .sum()
    };
    let upper = ((longest as f64 / p).ceil() as usize).max(1) + 1;
    let mut best = (f64::NEG_INFINITY, 1);
    for l in 1..=upper {
        let sc = score(l);
        if sc > best.0 {
            best = (sc, l);
        }
    }
    best.1
}

pub fn bma_reconstruct<R: Rng + ?Sized>(
    n: usize,
    traces: &[Trace],
    channel: &ChannelParams,
    resync: Resync,
    rng: &mut R,
) -> Result<BmaOutcome> {
    if n == 0 {
        return Err(Error::param("source length must be positive"));
    }
    if traces.len() < MIN_BMA_TRACES && !channel.is_noiseless() {
        return Err(Error::InsufficientTraces {
            needed: MIN_BMA_TRACES,
            got: traces.len(),
        });
    }
    if traces.is_empty() {
        return Err(Error::InsufficientTraces { needed: 1, got: 0 });
    }
    let subsampled = channel.q_ins() > 0.0;
    let ys: Vec<Vec<bool>> = if subsampled {
        traces.iter().map(|t| subsample(t, channel.p_ins(), rng)).collect()
    } else {
        traces.iter().map(|t| t.iter().collect()).collect()
    };

    let mut cursors = vec![0usize; ys.len()];
    let mut out = PackedBits::with_capacity(n);
    let mut exhausted_at = None;
    // current run of the run-length rule: (bit, positions still to emit)
    let mut run: Option<(bool, usize)> = None;
    while out.len() < n {
        let (mut ones, mut zeros) = (0usize, 0usize);
        for (y, &c) in ys.iter().zip(&cursors) {
            match y.get(c) {
                Some(true) => ones += 1,
                Some(false) => zeros += 1,
                None => {}
            }
        }
        if ones + zeros == 0 {
            exhausted_at = Some(out.len());
            break;
        }
        let mut bit = ones > zeros;
        if resync == Resync::RunLength {
            let (b, left) = match run {
                Some((b, left)) if left > 0 => (b, left),
                // runs are maximal, so every run after the first flips the bit
                previous => {
                    let b = previous.map_or(bit, |(b, _)| !b);
                    (b, estimate_run(&ys, &cursors, b, channel.p()))
                }
            };
            bit = b;
            run = Some((b, left - 1));
        }
        out.push(bit);
        for (y, c) in ys.iter().zip(cursors.iter_mut()) {
            match y.get(*c) {
                None => {}
                Some(&b) if b == bit => *c += 1,
                Some(_) => {
                    if let Resync::Lookahead(window) = resync {
                        if let Some(d) = (1..=window).find(|&d| y.get(*c + d) == Some(&bit)) {
                            *c += d + 1;
                        }
                    }
                }
            }
        }
    }
    if let Some(pos) = exhausted_at {
        let ones = ys.iter().filter(|y| y.last() == Some(&true)).count();
        let nonempty = ys.iter().filter(|y| !y.is_empty()).count();
        let fill = 2 * ones > nonempty;
        for _ in pos..n {
            out.push(fill);
        }
        log::debug!("bma cursors exhausted at {pos} of {n}; padded with {}", fill as u8);
    }
    Ok(BmaOutcome {
        string: BitString::new(out)?,
        exhausted_at,
        subsampled,
    })
}
