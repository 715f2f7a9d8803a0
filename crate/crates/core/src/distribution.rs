//! Finite distributions over strings (or any ordered keys), empirical
//! estimation, pruning and total-variation distance.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A finite distribution kept sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<K> {
    items: Vec<(K, f64)>,
}

impl<K: Ord + Clone> DiscreteDistribution<K> {
    /// Accepts distinct keys with non-negative weights summing to 1 (up to
    /// rounding, which is then normalized away). Zero weights are dropped.
    pub fn new(items: Vec<(K, f64)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if let Some((_, w)) = items.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param(format!("weight {w} is not a probability")));
        }
        let total: f64 = items.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::param(format!("weights sum to {total}, not 1")));
        }
        let mut items: Vec<(K, f64)> = items.into_iter().filter(|(_, w)| *w > 0.0).collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        if items.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("support contains a repeated item"));
        }
        Ok(Self::normalized(items))
    }

    /// Normalizes positive weights of distinct, sorted keys.
    fn normalized(mut items: Vec<(K, f64)>) -> Self {
        let total: f64 = items.iter().map(|(_, w)| w).sum();
        for (_, w) in &mut items {
            *w /= total;
        }
        Self { items }
    }

    pub fn point_mass(key: K) -> Self {
        Self { items: vec![(key, 1.0)] }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(K, f64)] {
        &self.items
    }

    pub fn support(&self) -> impl Iterator<Item = &K> + '_ {
        self.items.iter().map(|(k, _)| k)
    }

    pub fn weight(&self, key: &K) -> f64 {
        self.items
            .binary_search_by(|(k, _)| k.cmp(key))
            .map_or(0.0, |i| self.items[i].1)
    }

    pub fn total_weight(&self) -> f64 {
        self.items.iter().map(|(_, w)| w).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &K {
        let index = WeightedIndex::new(self.items.iter().map(|(_, w)| *w)).expect("positive weights");
        &self.items[index.sample(rng)].0
    }
}

/// Relative frequencies of `samples`.
pub fn empirical_distribution<K, I>(samples: I) -> Result<DiscreteDistribution<K>>
where
    K: Ord + Clone,
    I: IntoIterator<Item = K>,
{
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    let mut total = 0usize;
    for k in samples {
        *counts.entry(k).or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(DiscreteDistribution {
        items: counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect(),
    })
}

/// Drops items of weight at most `cutoff` and renormalizes the rest.
pub fn prune_low_frequency<K: Ord + Clone>(d: &DiscreteDistribution<K>, cutoff: f64) -> Result<DiscreteDistribution<K>> {
    if !(0.0..1.0).contains(&cutoff) {
        return Err(Error::param(format!("cutoff must lie in [0,1), got {cutoff}")));
    }
    let kept: Vec<(K, f64)> = d.items.iter().filter(|(_, w)| *w > cutoff).cloned().collect();
    if kept.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    Ok(DiscreteDistribution::normalized(kept))
}

/// Half the L1 distance over the union of supports.
pub fn tv_distance<K: Ord>(a: &DiscreteDistribution<K>, b: &DiscreteDistribution<K>) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut sum = 0.0;
    while i < a.items.len() || j < b.items.len() {
        match (a.items.get(i), b.items.get(j)) {
            (Some((ka, wa)), Some((kb, wb))) => match ka.cmp(kb) {
                std::cmp::Ordering::Less => {
                    sum += wa;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    sum += wb;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    sum += (wa - wb).abs();
                    i += 1;
                    j += 1;
                }
            },
            (Some((_, wa)), None) => {
                sum += wa;
                i += 1;
            }
            (None, Some((_, wb))) => {
                sum += wb;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

#[derive(Serialize, Deserialize)]
struct ItemJson {
    bits: BitString,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionJson {
    n: usize,
    items: Vec<ItemJson>,
}

impl DiscreteDistribution<BitString> {
    /// Common length of the support strings.
    pub fn string_len(&self) -> usize {
        self.items[0].0.len()
    }

    pub fn from_strings(items: Vec<(BitString, f64)>) -> Result<Self> {
        let d = Self::new(items)?;
        let n = d.string_len();
        if let Some((s, _)) = d.items.iter().find(|(s, _)| s.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
        Ok(d)
    }
}

impl Serialize for DiscreteDistribution<BitString> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DistributionJson {
            n: self.string_len(),
            items: self
                .items
                .iter()
                .map(|(bits, weight)| ItemJson {
                    bits: bits.clone(),
                    weight: *weight,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution<BitString> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = DistributionJson::deserialize(deserializer)?;
        let n = raw.n;
        let d = Self::from_strings(raw.items.into_iter().map(|i| (i.bits, i.weight)).collect())
            .map_err(serde::de::Error::custom)?;
        if d.string_len() != n {
            return Err(serde::de::Error::custom(format!(
                "declared n={n} but strings have length {}",
                d.string_len()
            )));
        }
        Ok(d)
    }
}

/// The hidden population: strings `x^1..x^s` with probabilities `p_1..p_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    strings: Vec<BitString>,
    probs: Vec<f64>,
}

impl Population {
    pub fn new(strings: Vec<BitString>, probs: Vec<f64>) -> Result<Self> {
        if strings.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if strings.len() != probs.len() {
            return Err(Error::LengthMismatch {
                expected: strings.len(),
                actual: probs.len(),
            });
        }
        let n = strings[0].len();
        if let Some(s) = strings.iter().find(|s| s.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: s.len(),
            });
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param("population probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::param(format!("population probabilities sum to {total}, not 1")));
        }
        let pop = Self { strings, probs };
        let dups = pop.duplicate_count();
        if dups > 0 {
            log::warn!("population contains {dups} repeated strings; their probabilities are merged");
        }
        Ok(pop)
    }

    /// `probs.len()` independent uniform strings of length `n`.
    pub fn random<R: Rng + ?Sized>(n: usize, probs: Vec<f64>, rng: &mut R) -> Result<Self> {
        let strings = (0..probs.len())
            .map(|_| BitString::random(n, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(strings, probs)
    }

    pub fn uniform_probs(s: usize) -> Vec<f64> {
        vec![1.0 / s as f64; s]
    }

    pub fn n(&self) -> usize {
        self.strings[0].len()
    }

    pub fn s(&self) -> usize {
        self.strings.len()
    }

    pub fn strings(&self) -> &[BitString] {
        &self.strings
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Members equal to an earlier member.
    pub fn duplicate_count(&self) -> usize {
        let mut sorted: Vec<&BitString> = self.strings.iter().collect();
        sorted.sort();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Index of a member drawn according to `probs`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        WeightedIndex::new(&self.probs).expect("valid probabilities").sample(rng)
    }

    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probs).expect("valid probabilities")
    }

    /// The distribution over strings, with repeated strings merged.
    pub fn distribution(&self) -> DiscreteDistribution<BitString> {
        let mut merged: BTreeMap<&BitString, f64> = BTreeMap::new();
        for (s, p) in self.strings.iter().zip(&self.probs) {
            *merged.entry(s).or_insert(0.0) += p;
        }
        DiscreteDistribution::normalized(
            merged
                .into_iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(s, p)| (s.clone(), p))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use proptest::prelude::*;

    fn dist(items: &[(&str, f64)]) -> DiscreteDistribution<String> {
        DiscreteDistribution::new(items.iter().map(|(k, w)| (k.to_string(), *w)).collect()).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let d = empirical_distribution(["a", "a", "b", "b"]).unwrap();
        assert_eq!(d.items(), &[("a", 0.5), ("b", 0.5)]);
        let d = empirical_distribution(vec![7; 13]).unwrap();
        assert_eq!(d.items(), &[(7, 1.0)]);
        assert_eq!(empirical_distribution(Vec::<u8>::new()), Err(Error::EmptyDistribution));
    }

    #[test]
    fn pruning_examples() {
        let d = dist(&[("a", 0.9), ("b", 0.06), ("c", 0.04)]);
        let p = prune_low_frequency(&d, 0.05).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.weight(&"a".into()) - 0.9 / 0.96).abs() < 1e-15);
        assert!((p.weight(&"b".into()) - 0.06 / 0.96).abs() < 1e-15);
        assert_eq!(prune_low_frequency(&d, 0.0).unwrap(), d);
        assert_eq!(prune_low_frequency(&d, 0.95), Err(Error::EmptyDistribution));
        assert!(prune_low_frequency(&d, 1.0).is_err());
    }

    #[test]
    fn tv_examples() {
        let a = dist(&[("a", 0.7), ("b", 0.3)]);
        let b = dist(&[("a", 0.5), ("b", 0.5)]);
        assert!((tv_distance(&a, &b) - 0.2).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &a), 0.0);
        let c = dist(&[("c", 1.0)]);
        assert_eq!(tv_distance(&a, &c), 1.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(DiscreteDistribution::new(vec![("a", 0.5), ("b", 0.4)]).is_err());
        assert!(DiscreteDistribution::new(vec![("a", 0.5), ("a", 0.5)]).is_err());
        assert!(DiscreteDistribution::new(vec![("a", 1.5), ("b", -0.5)]).is_err());
        assert_eq!(DiscreteDistribution::<u8>::new(vec![]), Err(Error::EmptyDistribution));
    }

    #[test]
    fn json_schema() {
        let d = DiscreteDistribution::from_strings(vec![
            ("0110".parse().unwrap(), 0.25),
            ("0011".parse().unwrap(), 0.75),
        ])
        .unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(
            json,
            r#"{"n":4,"items":[{"bits":"0011","weight":0.75},{"bits":"0110","weight":0.25}]}"#
        );
        let back: DiscreteDistribution<BitString> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<DiscreteDistribution<BitString>>(
            r#"{"n":4,"items":[{"bits":"001","weight":1.0}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<DiscreteDistribution<BitString>>(
            r#"{"n":3,"items":[{"bits":"001","weight":0.5},{"bits":"0010","weight":0.5}]}"#
        )
        .is_err());
    }

    #[test]
    fn population_merges_duplicates() {
        let x: BitString = "101".parse().unwrap();
        let y: BitString = "111".parse().unwrap();
        let pop = Population::new(vec![x.clone(), y.clone(), x.clone()], vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(pop.duplicate_count(), 1);
        let d = pop.distribution();
        assert_eq!(d.len(), 2);
        assert!((d.weight(&x) - 0.5).abs() < 1e-15);
        assert!(Population::new(vec![x.clone(), "1".parse().unwrap()], vec![0.5, 0.5]).is_err());
        assert!(Population::new(vec![x.clone(), y.clone()], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn population_sampling_frequencies() {
        let mut rng = SeedTree::new(4).stream("pop", 0);
        let pop = Population::random(20, vec![0.1, 0.6, 0.3], &mut rng).unwrap();
        let sampler = pop.sampler();
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[sampler.sample(&mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(pop.probs()) {
            assert!((*c as f64 / 1e5 - p).abs() < 0.006, "{counts:?}");
        }
    }

    fn arb_dist() -> impl Strategy<Value = DiscreteDistribution<u8>> {
        proptest::collection::btree_map(0u8..12, 1u32..100, 1..8).prop_map(|m| {
            let total: u32 = m.values().sum();
            DiscreteDistribution::new(m.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(a in arb_dist(), b in arb_dist(), c in arb_dist()) {
            let ab = tv_distance(&a, &b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - tv_distance(&b, &a)).abs() < 1e-15);
            prop_assert_eq!(tv_distance(&a, &a), 0.0);
            if ab < 1e-12 {
                prop_assert_eq!(a.support().collect::<Vec<_>>(), b.support().collect::<Vec<_>>());
            }
            prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
        }

        #[test]
        fn empirical_sums_to_one(samples in proptest::collection::vec(0u16..50, 1..400)) {
            let d = empirical_distribution(samples.iter().copied()).unwrap();
            prop_assert!((d.total_weight() - 1.0).abs() < 1e-12);
            for (k, w) in d.items() {
                let count = samples.iter().filter(|s| *s == k).count();
                prop_assert_eq!(*w, count as f64 / samples.len() as f64);
            }
        }

        #[test]
        fn pruning_is_idempotent(d in arb_dist(), cutoff in 0.0f64..0.2) {
            if let Ok(once) = prune_low_frequency(&d, cutoff) {
                let twice = prune_low_frequency(&once, cutoff).unwrap();
                prop_assert_eq!(twice.support().collect::<Vec<_>>(), once.support().collect::<Vec<_>>());
                for ((_, w1), (_, w2)) in once.items().iter().zip(twice.items()) {
                    prop_assert!((w1 - w2).abs() < 1e-12);
                }
                prop_assert!((once.total_weight() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn pruning_moves_tv_by_at_most_support_times_cutoff(d in arb_dist(), cutoff in 0.0f64..0.1) {
            if let Ok(p) = prune_low_frequency(&d, cutoff) {
                prop_assert!(tv_distance(&d, &p) <= d.len() as f64 * cutoff + 1e-12);
            }
        }
    }
}
