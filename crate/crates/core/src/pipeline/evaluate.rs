use serde::{Deserialize, Serialize};

use super::RecoveryResult;
use crate::cluster::VerdictMatrix;
use crate::distribution::{empirical_distribution, prune_low_frequency, tv_distance, Population};

/// Pairwise clustering errors against the hidden sources.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairConfusion {
    pub same_source_pairs: usize,
    pub different_source_pairs: usize,
    /// Same-source pairs judged `Different`.
    pub same_labeled_different: usize,
    /// Different-source pairs judged `Same`.
    pub different_labeled_same: usize,
}

impl PairConfusion {
    pub fn errors(&self) -> usize {
        self.same_labeled_different + self.different_labeled_same
    }
}

pub fn pair_confusion(verdicts: &VerdictMatrix, sources: &[usize]) -> PairConfusion {
    let mut c = PairConfusion::default();
    for i in 0..sources.len() {
        for j in i + 1..sources.len() {
            let same = verdicts.is_same(i, j);
            if sources[i] == sources[j] {
                c.same_source_pairs += 1;
                c.same_labeled_different += !same as usize;
            } else {
                c.different_source_pairs += 1;
                c.different_labeled_same += same as usize;
            }
        }
    }
    c
}

/// Same as [`pair_confusion`] with "same cluster" standing in for `Same`.
fn label_confusion(clusters: &[usize], sources: &[usize]) -> PairConfusion {
    let mut c = PairConfusion::default();
    for i in 0..sources.len() {
        for j in i + 1..sources.len() {
            let same = clusters[i] == clusters[j];
            if sources[i] == sources[j] {
                c.same_source_pairs += 1;
                c.same_labeled_different += !same as usize;
            } else {
                c.different_source_pairs += 1;
                c.different_labeled_same += same as usize;
            }
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub tv: f64,
    /// Recovered strings that are true support strings, as a fraction of
    /// recovered strings.
    pub precision: f64,
    /// True support strings recovered, as a fraction of the true support.
    pub recall: f64,
    pub confusion: PairConfusion,
    /// Any pair misjudged.
    pub clustering_failure: bool,
    /// Large clusters whose output differs from their majority source.
    pub reconstruction_failures: usize,
    /// Distance from the truth of the pruned empirical source frequencies
    /// of the drawn traces, i.e. what perfect clustering and reconstruction
    /// would have output.
    pub sampling_tv: f64,
    /// `sampling_tv > eps`.
    pub sampling_failure: bool,
}

/// Scores a run against the population that generated it.
pub fn evaluate_run(result: &RecoveryResult, truth: &Population, eps: f64, s: usize) -> RunMetrics {
    let truth_dist = truth.distribution();
    let tv = tv_distance(&result.distribution, &truth_dist);
    let hits = result
        .distribution
        .support()
        .filter(|x| truth_dist.weight(x) > 0.0)
        .count();
    let precision = hits as f64 / result.distribution.len() as f64;
    let recall = hits as f64 / truth_dist.len() as f64;

    let confusion = match &result.verdicts {
        Some(v) => pair_confusion(v, &result.trace_sources),
        None => label_confusion(&result.trace_clusters, &result.trace_sources),
    };

    let reconstruction_failures = result
        .per_cluster
        .iter()
        .filter(|o| {
            let mut votes = vec![0usize; truth_dist.len()];
            for (t, &cl) in result.trace_clusters.iter().enumerate() {
                if cl == o.cluster {
                    votes[result.trace_sources[t]] += 1;
                }
            }
            let majority = (0..votes.len()).max_by_key(|&k| (votes[k], std::cmp::Reverse(k))).unwrap_or(0);
            o.string.as_ref() != Some(&truth_dist.items()[majority].0)
        })
        .count();

    let labels: Vec<usize> = result.trace_sources.clone();
    let sampling_tv = empirical_distribution(labels)
        .and_then(|emp| prune_low_frequency(&emp, eps / (2.0 * s as f64)))
        .map(|pruned| {
            let as_strings = crate::distribution::DiscreteDistribution::new(
                pruned
                    .items()
                    .iter()
                    .map(|(k, w)| (truth_dist.items()[*k].0.clone(), *w))
                    .collect(),
            )
            .expect("relabelled distribution stays valid");
            tv_distance(&as_strings, &truth_dist)
        })
        .unwrap_or(1.0);

    RunMetrics {
        tv,
        precision,
        recall,
        clustering_failure: confusion.errors() > 0,
        confusion,
        reconstruction_failures,
        sampling_tv,
        sampling_failure: sampling_tv > eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::cluster::Verdict;
    use crate::pipeline::{recover_population, ClusteringMode, PipelineConfig, TraceBudget};
    use crate::reconstruct::ReconstructorSpec;
    use crate::rng::SeedTree;
    use crate::BitString;

    #[test]
    fn confusion_counts() {
        let mut v = VerdictMatrix::new(4);
        v.set(0, 1, Verdict::Same);
        v.set(1, 2, Verdict::Same);
        // sources: 0 0 1 1
        let c = pair_confusion(&v, &[0, 0, 1, 1]);
        assert_eq!(c.same_source_pairs, 2);
        assert_eq!(c.different_source_pairs, 4);
        assert_eq!(c.same_labeled_different, 1);
        assert_eq!(c.different_labeled_same, 1);
        assert_eq!(label_confusion(&[0, 0, 0, 1], &[0, 0, 1, 1]).different_labeled_same, 2);
    }

    #[test]
    fn perfect_recovery() {
        let seeds = SeedTree::new(11);
        let pop = Population::random(1000, vec![0.5, 0.5], &mut seeds.stream("pop", 0)).unwrap();
        let cfg = PipelineConfig {
            budget: TraceBudget::Explicit { traces: 100 },
            ..PipelineConfig::new(1000, 2, 0.2, ChannelParams::noiseless())
        };
        let r = recover_population(&cfg, &pop, &seeds).unwrap();
        let m = evaluate_run(&r, &pop, cfg.eps, cfg.s);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.reconstruction_failures, 0);
        assert!(!m.clustering_failure);
        // the output is exactly the empirical draw frequencies
        assert!((m.tv - m.sampling_tv).abs() < 1e-12);
    }

    #[test]
    fn missing_light_item() {
        // an item of weight 0.02 falls below the large-cluster threshold
        let seeds = SeedTree::new(12);
        let pop = Population::random(500, vec![0.49, 0.49, 0.02], &mut seeds.stream("pop", 0)).unwrap();
        let cfg = PipelineConfig {
            budget: TraceBudget::Explicit { traces: 1000 },
            clustering: ClusteringMode::GroundTruth,
            ..PipelineConfig::new(500, 3, 0.3, ChannelParams::noiseless())
        };
        let r = recover_population(&cfg, &pop, &seeds).unwrap();
        let m = evaluate_run(&r, &pop, cfg.eps, cfg.s);
        assert_eq!(r.distribution.len(), 2);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.precision, 1.0);
        assert!((m.tv - tv_distance(&r.distribution, &pop.distribution())).abs() < 1e-15);
        assert!(m.tv >= 0.02 - 1e-12);
    }

    #[test]
    fn wrong_reconstruction_is_counted() {
        let seeds = SeedTree::new(13);
        let pop = Population::new(vec!["000000".parse::<BitString>().unwrap()], vec![1.0]).unwrap();
        let cfg = PipelineConfig {
            budget: TraceBudget::Explicit { traces: 3 },
            reconstructor: ReconstructorSpec::ExactMap,
            clustering: ClusteringMode::GroundTruth,
            ..PipelineConfig::new(6, 1, 0.2, ChannelParams::new(0.5, 0.0).unwrap())
        };
        let mut r = recover_population(&cfg, &pop, &seeds).unwrap();
        r.per_cluster[0].string = Some("111111".parse().unwrap());
        assert_eq!(evaluate_run(&r, &pop, cfg.eps, cfg.s).reconstruction_failures, 1);
    }
}
