//! Pairwise "same source / different source" test on traces and assembly of
//! the pairwise verdicts into clusters.
//!
//! Block `l` (1-based) covers trace positions `(2l-2)t+1 ..= (2l-1)t`, so
//! consecutive blocks are separated by a gap of `t` positions. Bits are read
//! as 1 -> +1, 0 -> -1, and positions past the end of a trace count as 0.

mod params;
mod partition;
mod verdict;

use rayon::prelude::*;

use crate::bits::Trace;
use crate::error::{Error, Result};

pub use params::{
    block_length, calibrate_thresholds, derive_params, estimate_tails, min_viable_n, Calibration, ClusterParams,
    TailEstimate, BETA_MAX, BETA_STEP,
};
pub use partition::{partition_cliques, Partition, PartitionMode};
pub use verdict::{Verdict, VerdictMatrix};

/// Block sums `Z_1 .. Z_s_tilde` of `z`. `|Z_l| <= t` always.
pub fn block_sums(z: &Trace, params: &ClusterParams) -> Vec<i32> {
    let t = params.t;
    (0..params.s_tilde)
        .map(|l| {
            let start = 2 * l * t;
            z.bits().signed_sum_range(start, start + t) as i32
        })
        .collect()
}

/// Number of blocks whose sums differ by at least the deviation threshold.
pub fn deviating_blocks(sums: &[i32], other: &[i32], params: &ClusterParams) -> usize {
    let threshold = params.deviation_threshold();
    sums.iter()
        .zip(other)
        .filter(|(a, b)| ((**a - **b).unsigned_abs() as f64) >= threshold)
        .count()
}

/// Verdict from precomputed block sums. A count at or above
/// `gamma * s_tilde` is `Different`.
pub fn verdict_from_sums(sums: &[i32], other: &[i32], params: &ClusterParams) -> Verdict {
    if deviating_blocks(sums, other, params) as f64 >= params.count_threshold() {
        Verdict::Different
    } else {
        Verdict::Same
    }
}

pub fn cluster_pair(z: &Trace, z_other: &Trace, params: &ClusterParams) -> Verdict {
    verdict_from_sums(&block_sums(z, params), &block_sums(z_other, params), params)
}

/// All `T(T-1)/2` pairwise verdicts. Rows are evaluated in parallel; the
/// result does not depend on scheduling.
pub fn cluster_all(traces: &[Trace], params: &ClusterParams) -> Result<VerdictMatrix> {
    if traces.len() < 2 {
        return Err(Error::InsufficientTraces {
            needed: 2,
            got: traces.len(),
        });
    }
    let sums: Vec<Vec<i32>> = traces.par_iter().map(|z| block_sums(z, params)).collect();
    let size = traces.len();
    let rows: Vec<Vec<u64>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0u64; (size - i - 1).div_ceil(64)];
            for j in i + 1..size {
                if verdict_from_sums(&sums[i], &sums[j], params) == Verdict::Same {
                    let k = j - i - 1;
                    row[k / 64] |= 1u64 << (k % 64);
                }
            }
            row
        })
        .collect();
    Ok(VerdictMatrix::from_packed_rows(size, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, t: usize, s_tilde: usize) -> ClusterParams {
        ClusterParams::new(n, 1.0, t, s_tilde, calibrate_thresholds(t, 0.567).unwrap()).unwrap()
    }

    fn tr(s: &str) -> Trace {
        s.parse().unwrap()
    }

    #[test]
    fn empty_trace_has_zero_sums() {
        let p = params(1000, 10, 5);
        assert_eq!(block_sums(&Trace::empty(), &p), vec![0; 5]);
    }

    #[test]
    fn all_ones_sums_to_t() {
        let p = params(1000, 10, 5);
        let z = tr(&"1".repeat(100));
        assert_eq!(block_sums(&z, &p), vec![10; 5]);
    }

    #[test]
    fn hand_evaluated_blocks() {
        // t = 2, two blocks: I_1 = {1,2}, I_2 = {5,6}
        let p = params(16, 2, 2);
        assert_eq!(block_sums(&tr("10110"), &p), vec![0, -1]);
        assert_eq!(block_sums(&tr("101101"), &p), vec![0, 0]);
        assert_eq!(block_sums(&tr("101111"), &p), vec![0, 2]);
        assert_eq!(block_sums(&tr("0011000000"), &p), vec![-2, -2]);
    }

    #[test]
    fn identical_traces_are_same() {
        let p = params(1000, 10, 5);
        let z = tr(&"1001".repeat(30));
        assert_eq!(cluster_pair(&z, &z, &p), Verdict::Same);
    }

    #[test]
    fn opposite_traces_are_different() {
        let p = params(1000, 10, 5);
        assert!(p.deviation_threshold() <= 2.0 * p.t as f64);
        let ones = tr(&"1".repeat(100));
        let zeros = tr(&"0".repeat(100));
        assert_eq!(cluster_pair(&ones, &zeros, &p), Verdict::Different);
    }

    #[test]
    fn tie_at_count_threshold_is_different() {
        // gamma * s_tilde with s_tilde = 1 is < 1, so one deviating block suffices
        let p = params(100, 10, 1);
        let mut a = "1".repeat(10);
        a.push_str(&"0".repeat(10));
        let b = "0".repeat(20);
        assert_eq!(deviating_blocks(&block_sums(&tr(&a), &p), &block_sums(&tr(&b), &p), &p), 1);
        assert_eq!(cluster_pair(&tr(&a), &tr(&b), &p), Verdict::Different);

        // exact tie: choose gamma so gamma * s_tilde == 2.0
        let mut q = params(1000, 10, 4);
        q.gamma = 0.5;
        let ones = "1".repeat(10);
        let zeros = "0".repeat(10);
        let gap = "0".repeat(10);
        let a = [ones.as_str(), &gap, &ones, &gap, &zeros, &gap, &zeros].concat();
        let b = [zeros.as_str(), &gap, &zeros, &gap, &zeros, &gap, &zeros].concat();
        assert_eq!(deviating_blocks(&block_sums(&tr(&a), &q), &block_sums(&tr(&b), &q), &q), 2);
        assert_eq!(cluster_pair(&tr(&a), &tr(&b), &q), Verdict::Different);
    }

    #[test]
    fn cluster_all_small_cases() {
        let p = params(1000, 10, 5);
        let a = tr(&"1".repeat(100));
        let b = tr(&"0".repeat(100));
        let m = cluster_all(&[a.clone(), a.clone()], &p).unwrap();
        assert_eq!(m.get(0, 1), Verdict::Same);
        let m = cluster_all(&[a.clone(), a.clone(), b], &p).unwrap();
        assert_eq!(
            [m.get(0, 1), m.get(0, 2), m.get(1, 2)],
            [Verdict::Same, Verdict::Different, Verdict::Different]
        );
        assert!(cluster_all(&[a], &p).is_err());
    }

    fn arb_trace(max: usize) -> impl Strategy<Value = Vec<bool>> {
        proptest::collection::vec(any::<bool>(), 0..max)
    }

    proptest! {
        #[test]
        fn verdict_is_symmetric(a in arb_trace(200), b in arb_trace(200)) {
            let p = params(400, 12, 4);
            let (za, zb) = (Trace::new(crate::PackedBits::from_bools(a)), Trace::new(crate::PackedBits::from_bools(b)));
            prop_assert_eq!(cluster_pair(&za, &zb, &p), cluster_pair(&zb, &za, &p));
        }

        #[test]
        fn block_sums_are_bounded(a in arb_trace(200)) {
            let p = params(400, 12, 4);
            let z = Trace::new(crate::PackedBits::from_bools(a));
            prop_assert!(block_sums(&z, &p).iter().all(|s| s.unsigned_abs() as usize <= p.t));
        }

        #[test]
        fn trailing_bits_do_not_matter(a in arb_trace(200), b in arb_trace(200), tail in arb_trace(60)) {
            let p = params(400, 12, 4);
            let pad = |v: &Vec<bool>| {
                let mut v = v.clone();
                v.resize(v.len().max(p.span()), false);
                v.extend(tail.iter().copied());
                Trace::new(crate::PackedBits::from_bools(v))
            };
            let za = Trace::new(crate::PackedBits::from_bools(a.clone()));
            let zb = Trace::new(crate::PackedBits::from_bools(b.clone()));
            // padding a trace that already covers the span only appends beyond it
            if a.len() >= p.span() {
                prop_assert_eq!(cluster_pair(&za, &zb, &p), cluster_pair(&pad(&a), &zb, &p));
            }
            if b.len() >= p.span() {
                prop_assert_eq!(cluster_pair(&za, &zb, &p), cluster_pair(&za, &pad(&b), &p));
            }
        }
    }
}
