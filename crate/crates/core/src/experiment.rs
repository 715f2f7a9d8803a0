//! Monte Carlo accuracy measurement for the pairwise clustering test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channel::{apply_channel, ChannelParams};
use crate::cluster::{cluster_pair, derive_params, ClusterParams, Verdict};
use crate::error::Result;
use crate::rng::SeedTree;
use crate::stats::{wilson_interval, Z95};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRate {
    pub pairs: usize,
    pub errors: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorRate {
    pub fn new(errors: usize, pairs: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, pairs, Z95);
        Self {
            pairs,
            errors,
            rate: if pairs == 0 { 0.0 } else { errors as f64 / pairs as f64 },
            ci_low,
            ci_high,
        }
    }

    /// True unless `self` (at a larger n) is significantly worse than `smaller_n`.
    pub fn not_worse_than(&self, smaller_n: &ErrorRate) -> bool {
        self.ci_low <= smaller_n.ci_high
    }
}

/// Clustering accuracy at one source length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAccuracy {
    pub n: usize,
    pub t: usize,
    pub s_tilde: usize,
    /// Same-source pairs reported `Different`.
    pub same_source: ErrorRate,
    /// Independent-source pairs reported `Same`.
    pub different_source: ErrorRate,
    /// Independent pairs whose two sources coincided; not scored.
    pub identical_sources_excluded: usize,
}

/// Samples `pairs` same-source and `pairs` independent-source trace pairs of
/// uniformly random length-`n` strings and scores the pairwise test.
pub fn cluster_accuracy(n: usize, channel: &ChannelParams, pairs: usize, seeds: &SeedTree) -> Result<ClusterAccuracy> {
    let params = derive_params(n, channel)?;
    cluster_accuracy_with(&params, channel, pairs, seeds)
}

pub fn cluster_accuracy_with(
    params: &ClusterParams,
    channel: &ChannelParams,
    pairs: usize,
    seeds: &SeedTree,
) -> Result<ClusterAccuracy> {
    let n = params.n;
    let same_errors = (0..pairs)
        .into_par_iter()
        .map(|k| -> Result<usize> {
            let mut rng = seeds.stream("bench-same", k as u64);
            let x = BitString::random(n, &mut rng)?;
            let z = apply_channel(&x, channel, &mut rng);
            let z2 = apply_channel(&x, channel, &mut rng);
            Ok((cluster_pair(&z, &z2, params) == Verdict::Different) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let outcomes = (0..pairs)
        .into_par_iter()
        .map(|k| -> Result<Option<bool>> {
            let mut rng = seeds.stream("bench-diff", k as u64);
            let x1 = BitString::random(n, &mut rng)?;
            let x2 = BitString::random(n, &mut rng)?;
            if x1 == x2 {
                return Ok(None);
            }
            let z = apply_channel(&x1, channel, &mut rng);
            let z2 = apply_channel(&x2, channel, &mut rng);
            Ok(Some(cluster_pair(&z, &z2, params) == Verdict::Same))
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = outcomes.iter().filter(|o| o.is_none()).count();
    let diff_errors = outcomes.iter().filter(|o| **o == Some(true)).count();
    Ok(ClusterAccuracy {
        n,
        t: params.t,
        s_tilde: params.s_tilde,
        same_source: ErrorRate::new(same_errors, pairs),
        different_source: ErrorRate::new(diff_errors, pairs - excluded),
        identical_sources_excluded: excluded,
    })
}
