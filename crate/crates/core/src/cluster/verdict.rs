use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Same,
    Different,
}

/// Pairwise verdicts over `size` traces, stored as the strict upper triangle
/// one bit per pair (set = `Same`). Each row starts on a word boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictMatrix {
    size: usize,
    row_offsets: Vec<usize>,
    words: Vec<u64>,
}

impl VerdictMatrix {
    /// Every off-diagonal pair starts out `Different`.
    pub fn new(size: usize) -> Self {
        let mut row_offsets = Vec::with_capacity(size + 1);
        let mut offset = 0;
        for i in 0..size {
            row_offsets.push(offset);
            offset += (size - i - 1).div_ceil(64);
        }
        row_offsets.push(offset);
        Self {
            size,
            row_offsets,
            words: vec![0; offset],
        }
    }

    /// `rows[i]` holds the packed verdicts for pairs `(i, i + 1 + k)`, bit `k`
    /// set = `Same`.
    pub(crate) fn from_packed_rows(size: usize, rows: Vec<Vec<u64>>) -> Self {
        let mut m = Self::new(size);
        for (i, row) in rows.into_iter().enumerate() {
            let base = m.row_offsets[i];
            debug_assert_eq!(row.len(), m.row_offsets[i + 1] - base);
            m.words[base..base + row.len()].copy_from_slice(&row);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pair_count(&self) -> usize {
        self.size * self.size.saturating_sub(1) / 2
    }

    #[inline]
    fn locate(&self, i: usize, j: usize) -> (usize, u64) {
        assert!(i != j && i < self.size && j < self.size, "pair ({i}, {j}) out of range");
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let k = hi - lo - 1;
        (self.row_offsets[lo] + k / 64, 1u64 << (k % 64))
    }

    /// Symmetric; the diagonal is `Same`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Verdict {
        if i == j {
            return Verdict::Same;
        }
        let (w, mask) = self.locate(i, j);
        if self.words[w] & mask != 0 {
            Verdict::Same
        } else {
            Verdict::Different
        }
    }

    #[inline]
    pub fn is_same(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Verdict::Same
    }

    pub fn set(&mut self, i: usize, j: usize, verdict: Verdict) {
        let (w, mask) = self.locate(i, j);
        match verdict {
            Verdict::Same => self.words[w] |= mask,
            Verdict::Different => self.words[w] &= !mask,
        }
    }

    /// Number of `Same` pairs.
    pub fn same_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Debug export: `i,j,verdict` for every `i < j`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,verdict")?;
        for i in 0..self.size {
            for j in i + 1..self.size {
                let v = match self.get(i, j) {
                    Verdict::Same => "same",
                    Verdict::Different => "different",
                };
                writeln!(out, "{i},{j},{v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_get_symmetric() {
        let mut m = VerdictMatrix::new(130);
        m.set(3, 129, Verdict::Same);
        m.set(100, 2, Verdict::Same);
        assert!(m.is_same(129, 3) && m.is_same(2, 100));
        assert!(!m.is_same(3, 128));
        assert!(m.is_same(7, 7));
        assert_eq!(m.same_count(), 2);
        m.set(129, 3, Verdict::Different);
        assert_eq!(m.same_count(), 1);
        assert_eq!(m.pair_count(), 130 * 129 / 2);
    }

    #[test]
    fn packed_size_is_about_half_t_squared_bits() {
        let m = VerdictMatrix::new(10_000);
        let bytes = m.words.len() * 8;
        // ~6.25 MB of payload plus per-row alignment
        assert!(bytes < 6_400_000, "{bytes}");
    }

    #[test]
    fn csv_export() {
        let mut m = VerdictMatrix::new(3);
        m.set(0, 2, Verdict::Same);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "i,j,verdict\n0,1,different\n0,2,same\n1,2,different\n"
        );
    }
}
