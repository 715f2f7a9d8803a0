use std::fmt;

use rand::Rng;

use super::{geometric_unchecked, ChannelParams};
use crate::bits::{BitString, PackedBits, Trace};
use crate::error::{Error, Result};

/// One position of an n-pattern: a surviving source index (0-based) or an
/// inserted placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternEntry {
    Index(u32),
    Star,
}

/// Channel randomness with the source bits factored out. Surviving indices
/// appear at most once and in strictly ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    entries: Vec<PatternEntry>,
    n: usize,
}

impl Pattern {
    pub fn new(n: usize, entries: Vec<PatternEntry>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("pattern length n must be >= 1"));
        }
        let mut last: Option<u32> = None;
        for e in &entries {
            if let PatternEntry::Index(i) = *e {
                if i as usize >= n {
                    return Err(Error::param(format!("index {i} out of range for n={n}")));
                }
                if last.is_some_and(|l| l >= i) {
                    return Err(Error::param("pattern indices must be strictly ascending"));
                }
                last = Some(i);
            }
        }
        Ok(Self { entries, n })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, (0..n as u32).map(PatternEntry::Index).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn surviving_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().filter_map(|e| match e {
            PatternEntry::Index(i) => Some(*i),
            PatternEntry::Star => None,
        })
    }
}

impl fmt::Display for Pattern {
    /// 1-based indices, `*` for insertions.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .entries
            .iter()
            .map(|e| match e {
                PatternEntry::Index(i) => (i + 1).to_string(),
                PatternEntry::Star => "*".to_string(),
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}

pub fn sample_pattern<R: Rng + ?Sized>(n: usize, params: &ChannelParams, rng: &mut R) -> Result<Pattern> {
    if n == 0 {
        return Err(Error::param("pattern length n must be >= 1"));
    }
    let q = params.q();
    let p_ins = params.p_ins();
    let keep = |rng: &mut R| q == 0.0 || rng.random::<f64>() >= q;
    let mut entries = Vec::with_capacity((n as f64 * params.alpha()) as usize + 8);
    for j in 0..n as u32 {
        let g = geometric_unchecked(p_ins, rng);
        for _ in 1..g {
            if keep(rng) {
                entries.push(PatternEntry::Star);
            }
        }
        if keep(rng) {
            entries.push(PatternEntry::Index(j));
        }
    }
    Ok(Pattern { entries, n })
}

/// Fills a pattern with the source bits of `x` and fresh uniform bits for stars.
pub fn realize_pattern<R: Rng + ?Sized>(r: &Pattern, x: &BitString, rng: &mut R) -> Result<Trace> {
    if r.n != x.len() {
        return Err(Error::LengthMismatch {
            expected: r.n,
            actual: x.len(),
        });
    }
    let mut out = PackedBits::with_capacity(r.len());
    for e in &r.entries {
        out.push(match *e {
            PatternEntry::Index(i) => x.get(i as usize),
            PatternEntry::Star => rng.random::<bool>(),
        });
    }
    Ok(Trace::new(out))
}
