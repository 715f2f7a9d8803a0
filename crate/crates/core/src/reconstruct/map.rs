//! Brute-force maximum-likelihood reconstruction for short sources.

use rayon::prelude::*;

use crate::bits::{BitString, PackedBits, Trace};
use crate::channel::{ChannelParams, LikelihoodModel};
use crate::error::{Error, Result};

pub const MAX_MAP_LEN: usize = 16;

const CHUNK: u64 = 256;

/// Traces in canonical order with multiplicities, so the score of a
/// candidate does not depend on the order traces arrived in.
fn canonical_multiset(traces: &[Trace]) -> Vec<(Vec<bool>, f64)> {
    let mut sorted: Vec<&Trace> = traces.iter().collect();
    sorted.sort();
    let mut out: Vec<(Vec<bool>, f64)> = Vec::new();
    let mut last: Option<&Trace> = None;
    for t in sorted {
        if last == Some(t) {
            out.last_mut().expect("non-empty").1 += 1.0;
        } else {
            out.push((t.iter().collect(), 1.0));
            last = Some(t);
        }
    }
    out
}

/// `argmax_x sum_i ln Pr[y_i | x]` over all `x` in `{0,1}^n`; ties go to the
/// lexicographically smallest `x`.
pub fn map_reconstruct(n: usize, traces: &[Trace], channel: &ChannelParams) -> Result<BitString> {
    if n == 0 || n > MAX_MAP_LEN {
        return Err(Error::param(format!("exact MAP needs 1 <= n <= {MAX_MAP_LEN}, got {n}")));
    }
    if traces.is_empty() {
        return Err(Error::InsufficientTraces { needed: 1, got: 0 });
    }
    let model = LikelihoodModel::new(channel);
    let multiset = canonical_multiset(traces);
    let candidates = 1u64 << n;

    // Each chunk scans its candidates in increasing (= lexicographic) order and
    // abandons a candidate as soon as its partial score falls strictly below
    // the chunk's best, which is sound because every term is <= 0.
    let best = (0..candidates.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut scratch = Vec::new();
            let mut x = vec![false; n];
            let mut best: (f64, u64) = (f64::NEG_INFINITY, u64::MAX);
            for c in chunk * CHUNK..((chunk + 1) * CHUNK).min(candidates) {
                for (i, b) in x.iter_mut().enumerate() {
                    *b = (c >> (n - 1 - i)) & 1 == 1;
                }
                let mut score = 0.0;
                for (y, count) in &multiset {
                    score += count * model.likelihood(&x, y, &mut scratch).ln();
                    if score < best.0 || score == f64::NEG_INFINITY {
                        break;
                    }
                }
                if score > best.0 || (best.1 == u64::MAX && score == f64::NEG_INFINITY) {
                    best = (score, c);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    if best.0 == f64::NEG_INFINITY {
        return Err(Error::ReconstructionFailed(
            "no candidate string has positive likelihood".into(),
        ));
    }
    BitString::new(PackedBits::from_u64_msb_first(best.1, n))
}
