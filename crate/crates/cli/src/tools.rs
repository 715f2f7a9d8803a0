//! Calibration and clustering-accuracy utilities.

use poprec::cluster::{calibrate_thresholds, estimate_tails, Calibration, TailEstimate};
use poprec::experiment::{cluster_accuracy, ClusterAccuracy};
use poprec::{ChannelParams, SeedTree};
use serde::{Deserialize, Serialize};

/// Below this the two tail probabilities are practically indistinguishable.
pub const THIN_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub calibration: Calibration,
    pub tails: TailEstimate,
    /// Tails sit at least `margin / 2` either side of `gamma`.
    pub separated: bool,
}

pub fn calibrate(t: usize, tau: f64, samples: usize, seed: u64) -> anyhow::Result<CalibrationReport> {
    let calibration = calibrate_thresholds(t, tau)?;
    if calibration.margin < THIN_MARGIN {
        log::warn!("margin {:.2e} is close to zero at tau = {tau}", calibration.margin);
    }
    let tails = estimate_tails(&calibration, samples, &mut SeedTree::new(seed).stream("calibrate", 0))?;
    Ok(CalibrationReport {
        seed,
        calibration,
        separated: tails.straddles(&calibration, calibration.margin / 2.0),
        tails,
    })
}

/// Columns of the cluster-bench CSV.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub trial: usize,
    pub q: f64,
    pub q_ins: f64,
    pub t: usize,
    pub s_tilde: usize,
    pub same_pairs: usize,
    pub same_errors: usize,
    pub same_rate: f64,
    pub same_ci_low: f64,
    pub same_ci_high: f64,
    pub different_pairs: usize,
    pub different_errors: usize,
    pub different_rate: f64,
    pub different_ci_low: f64,
    pub different_ci_high: f64,
    pub identical_excluded: usize,
}

impl BenchRow {
    fn new(trial: usize, channel: &ChannelParams, a: &ClusterAccuracy) -> Self {
        Self {
            n: a.n,
            trial,
            q: channel.q(),
            q_ins: channel.q_ins(),
            t: a.t,
            s_tilde: a.s_tilde,
            same_pairs: a.same_source.pairs,
            same_errors: a.same_source.errors,
            same_rate: a.same_source.rate,
            same_ci_low: a.same_source.ci_low,
            same_ci_high: a.same_source.ci_high,
            different_pairs: a.different_source.pairs,
            different_errors: a.different_source.errors,
            different_rate: a.different_source.rate,
            different_ci_low: a.different_source.ci_low,
            different_ci_high: a.different_source.ci_high,
            identical_excluded: a.identical_sources_excluded,
        }
    }
}

pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    /// Per trial, whether neither error rate rose significantly with n.
    pub monotone: Vec<bool>,
}

/// `lengths` should be ascending for the monotonicity flags to mean anything.
pub fn cluster_bench(
    lengths: &[usize],
    channel: &ChannelParams,
    pairs: usize,
    trials: usize,
    seed: u64,
) -> anyhow::Result<BenchOutput> {
    let seeds = SeedTree::new(seed);
    let mut rows = Vec::new();
    let mut monotone = Vec::new();
    for trial in 0..trials {
        let acc = lengths
            .iter()
            .map(|&n| cluster_accuracy(n, channel, pairs, &seeds.child("trial", trial as u64).child("n", n as u64)))
            .collect::<poprec::Result<Vec<_>>>()?;
        monotone.push(acc.windows(2).all(|w| {
            w[1].same_source.not_worse_than(&w[0].same_source)
                && w[1].different_source.not_worse_than(&w[0].different_source)
        }));
        rows.extend(acc.iter().map(|a| BenchRow::new(trial, channel, a)));
    }
    Ok(BenchOutput { rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_is_repeatable() {
        let a = calibrate(2154, 0.567, 20_000, 1).unwrap();
        let b = calibrate(2154, 0.567, 20_000, 1).unwrap();
        assert!(a.calibration.margin > 0.0);
        assert_eq!(a.calibration, b.calibration);
        assert_eq!(a.tails, b.tails);
    }

    #[test]
    fn noiseless_same_source_never_errs() {
        let out = cluster_bench(&[2000], &ChannelParams::noiseless(), 50, 2, 4).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert!(out.rows.iter().all(|r| r.same_errors == 0));
    }
}
