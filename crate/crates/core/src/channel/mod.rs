//! The insertion/deletion channel.
//!
//! For each source bit, `G - 1` uniform bits are inserted in front of it with
//! `G ~ Geometric(1 - q_ins)`; afterwards every bit of the expanded string is
//! deleted independently with probability `q`.

pub mod io;
mod likelihood;
mod pattern;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BitString, PackedBits, Trace};
use crate::error::{Error, Result};

pub use likelihood::{trace_likelihood, LikelihoodModel, MAX_LIKELIHOOD_LEN};
pub use pattern::{realize_pattern, sample_pattern, Pattern, PatternEntry};

/// Deletion rate `q` and insertion rate `q_ins`, both in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChannelParams")]
pub struct ChannelParams {
    q: f64,
    q_ins: f64,
}

#[derive(Deserialize)]
struct RawChannelParams {
    q: f64,
    q_ins: f64,
}

impl TryFrom<RawChannelParams> for ChannelParams {
    type Error = Error;

    fn try_from(raw: RawChannelParams) -> Result<Self> {
        ChannelParams::new(raw.q, raw.q_ins)
    }
}

impl ChannelParams {
    pub fn new(q: f64, q_ins: f64) -> Result<Self> {
        for (name, v) in [("q", q), ("q_ins", q_ins)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::param(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        Ok(Self { q, q_ins })
    }

    pub fn noiseless() -> Self {
        Self { q: 0.0, q_ins: 0.0 }
    }

    /// Deletion rate.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Insertion rate.
    pub fn q_ins(&self) -> f64 {
        self.q_ins
    }

    /// Retention probability `1 - q`.
    pub fn p(&self) -> f64 {
        1.0 - self.q
    }

    /// `1 - q_ins`, the success probability of the insertion geometric.
    pub fn p_ins(&self) -> f64 {
        1.0 - self.q_ins
    }

    /// Expected trace length per source bit, `p / p_ins`.
    pub fn alpha(&self) -> f64 {
        self.p() / self.p_ins()
    }

    pub fn is_noiseless(&self) -> bool {
        self.q == 0.0 && self.q_ins == 0.0
    }
}

/// Draws `l >= 1` with `Pr[l] = (1 - p)^(l-1) p` by inverting the CDF.
pub fn sample_geometric<R: Rng + ?Sized>(p_success: f64, rng: &mut R) -> Result<u64> {
    if !(p_success > 0.0 && p_success <= 1.0) {
        return Err(Error::param(format!(
            "geometric success probability {p_success} must lie in (0, 1]"
        )));
    }
    Ok(geometric_unchecked(p_success, rng))
}

#[inline]
pub(crate) fn geometric_unchecked<R: Rng + ?Sized>(p_success: f64, rng: &mut R) -> u64 {
    if p_success >= 1.0 {
        return 1;
    }
    // u in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let l = (u.ln() / (-p_success).ln_1p()).ceil();
    if l < 1.0 {
        1
    } else {
        l as u64
    }
}

/// Passes `x` through the channel once.
pub fn apply_channel<R: Rng + ?Sized>(x: &BitString, params: &ChannelParams, rng: &mut R) -> Trace {
    let expected = (x.len() as f64 * params.alpha() * 1.1) as usize + 8;
    let mut out = PackedBits::with_capacity(expected);
    let q = params.q();
    let p_ins = params.p_ins();
    let keep = |rng: &mut R| q == 0.0 || rng.random::<f64>() >= q;
    for bit in x.iter() {
        let g = geometric_unchecked(p_ins, rng);
        for _ in 1..g {
            let inserted = rng.random::<bool>();
            if keep(rng) {
                out.push(inserted);
            }
        }
        if keep(rng) {
            out.push(bit);
        }
    }
    Trace::new(out)
}

/// Draws `count` independent traces of `x`.
pub fn sample_traces<R: Rng + ?Sized>(
    x: &BitString,
    params: &ChannelParams,
    count: usize,
    rng: &mut R,
) -> Vec<Trace> {
    (0..count).map(|_| apply_channel(x, params, rng)).collect()
}
