//! Small statistical helpers used by the experiment harness and the
//! verification suites.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// z-score of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins after pooling sparse categories.
    pub bins: usize,
}

/// Two-sample chi-square homogeneity test on categorical samples.
///
/// Categories whose combined count is below `min_count` are pooled into a
/// single bin (dropped if the pool itself stays below `min_count`). Sample
/// sizes may differ.
pub fn chi_square_two_sample<K: Eq + Hash>(
    a: &HashMap<K, usize>,
    b: &HashMap<K, usize>,
    min_count: usize,
) -> ChiSquareResult {
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut pooled = (0usize, 0usize);
    let mut keys: Vec<&K> = a.keys().collect();
    keys.extend(b.keys().filter(|k| !a.contains_key(*k)));
    for k in keys {
        let (ca, cb) = (*a.get(k).unwrap_or(&0), *b.get(k).unwrap_or(&0));
        if ca + cb >= min_count {
            cells.push((ca, cb));
        } else {
            pooled.0 += ca;
            pooled.1 += cb;
        }
    }
    if pooled.0 + pooled.1 >= min_count {
        cells.push(pooled);
    }
    let na: usize = cells.iter().map(|c| c.0).sum();
    let nb: usize = cells.iter().map(|c| c.1).sum();
    let (na, nb) = (na as f64, nb as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = cells
        .iter()
        .map(|&(ca, cb)| {
            let d = ka * ca as f64 - kb * cb as f64;
            d * d / (ca + cb) as f64
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        1.0 - dist.cdf(statistic)
    };
    ChiSquareResult {
        statistic,
        dof,
        p_value,
        bins: cells.len(),
    }
}

pub fn histogram<K: Eq + Hash, I: IntoIterator<Item = K>>(items: I) -> HashMap<K, usize> {
    let mut h = HashMap::new();
    for k in items {
        *h.entry(k).or_insert(0) += 1;
    }
    h
}
