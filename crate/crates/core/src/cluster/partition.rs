use serde::{Deserialize, Serialize};

use super::VerdictMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    /// Fail unless the `Same` graph is a disjoint union of cliques.
    #[default]
    Strict,
    /// Return connected components regardless, counting violated pairs.
    Robust,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Trace indices per cluster, each sorted; clusters ordered by their
    /// smallest member.
    pub clusters: Vec<Vec<usize>>,
    /// `Different` pairs found inside a connected component.
    pub violations: usize,
}

impl Partition {
    pub fn is_clique_partition(&self) -> bool {
        self.violations == 0
    }

    /// Cluster index of every trace.
    pub fn labels(&self, size: usize) -> Vec<usize> {
        let mut labels = vec![usize::MAX; size];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                labels[i] = c;
            }
        }
        labels
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(size: usize) -> Self {
        Self {
            parent: (0..size).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the `Same` graph, checked for being cliques.
pub fn partition_cliques(m: &VerdictMatrix, mode: PartitionMode) -> Result<Partition> {
    let size = m.size();
    let mut sets = DisjointSets::new(size);
    for i in 0..size {
        for j in i + 1..size {
            if m.is_same(i, j) {
                sets.union(i, j);
            }
        }
    }
    let mut root_to_cluster = vec![usize::MAX; size];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..size {
        let root = sets.find(i);
        if root_to_cluster[root] == usize::MAX {
            root_to_cluster[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[root_to_cluster[root]].push(i);
    }
    let violations = clusters
        .iter()
        .map(|members| {
            let mut bad = 0;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if !m.is_same(i, j) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    if violations > 0 {
        match mode {
            PartitionMode::Strict => return Err(Error::NotCliquePartition { violations }),
            PartitionMode::Robust => {
                log::warn!("verdict graph is not a clique partition: {violations} violated pairs");
            }
        }
    }
    Ok(Partition { clusters, violations })
}
