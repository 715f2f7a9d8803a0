//! Exact `Pr[y | x]` under the channel.
//!
//! Source bit `j` emits a block: some number `m` of surviving inserted bits,
//! then `x_j` itself with probability `p`. Thinning a `Geometric0(p_ins)`
//! insertion count by survival probability `p` leaves a `Geometric0` count
//! with ratio `r = q_ins p / (1 - q_ins q)`, so
//!
//! ```text
//! Pr[m surviving insertions, each matching y] = (1 - r) (r / 2)^m
//! ```
//!
//! and the forward recursion over (source position, trace position) only
//! needs a running geometric sum per step, giving O(n |y|) time.

use super::ChannelParams;
use crate::bits::{BitString, Trace};
use crate::error::{Error, Result};

/// Sources longer than this are rejected by [`trace_likelihood`]; the oracle
/// is meant for verification-scale instances.
pub const MAX_LIKELIHOOD_LEN: usize = 24;

#[derive(Debug, Clone, Copy)]
pub struct LikelihoodModel {
    q: f64,
    p: f64,
    /// r / 2
    half_ratio: f64,
    /// 1 - r
    stop: f64,
}

impl LikelihoodModel {
    pub fn new(params: &ChannelParams) -> Self {
        let (q, q_ins) = (params.q(), params.q_ins());
        let p = 1.0 - q;
        let r = q_ins * p / (1.0 - q_ins * q);
        Self {
            q,
            p,
            half_ratio: r / 2.0,
            stop: 1.0 - r,
        }
    }

    /// `Pr[y | x]` for bit slices. `scratch` is reused between calls.
    pub fn likelihood(&self, x: &[bool], y: &[bool], scratch: &mut Vec<f64>) -> f64 {
        let len = y.len();
        scratch.clear();
        scratch.resize(2 * (len + 1), 0.0);
        let (mut cur, mut next) = scratch.split_at_mut(len + 1);
        cur[0] = 1.0;
        for &xj in x {
            // running sum H[k] = sum_{i <= k} cur[i] (r/2)^(k-i), stored in `next`
            let mut h = 0.0;
            let mut h_prev;
            for k in 0..=len {
                h_prev = h;
                h = cur[k] + self.half_ratio * h;
                let mut v = self.q * h;
                if k > 0 && y[k - 1] == xj {
                    v += self.p * h_prev;
                }
                next[k] = self.stop * v;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[len]
    }
}

pub fn trace_likelihood(x: &BitString, y: &Trace, params: &ChannelParams) -> Result<f64> {
    if x.len() > MAX_LIKELIHOOD_LEN {
        return Err(Error::param(format!(
            "likelihood oracle limited to n <= {MAX_LIKELIHOOD_LEN}, got {}",
            x.len()
        )));
    }
    let xs: Vec<bool> = x.iter().collect();
    let ys: Vec<bool> = y.iter().collect();
    Ok(LikelihoodModel::new(params).likelihood(&xs, &ys, &mut Vec::new()))
}
