//! Bit-packed binary strings.
//!
//! [`PackedBits`] stores bits 64 per word, least significant bit first.
//! Unused high bits of the last word are always zero, so derived `Hash`
//! and `Eq` agree with bitwise equality.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const WORD: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut out = Self::new();
        for b in bits {
            out.push(b);
        }
        out
    }

    /// Builds an `len`-bit string from the low bits of `value`, most significant
    /// bit first, so that numeric order matches lexicographic order.
    pub fn from_u64_msb_first(value: u64, len: usize) -> Self {
        debug_assert!(len <= 64);
        Self::from_bools((0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD);
        if bit {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / WORD] |= 1u64 << (self.len % WORD);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &PackedBits) {
        // word-aligned fast path
        if self.len.is_multiple_of(WORD) {
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// First `len` bits (or all of them if shorter).
    pub fn prefix(&self, len: usize) -> PackedBits {
        let len = len.min(self.len);
        let mut words = self.words[..len.div_ceil(WORD)].to_vec();
        if !len.is_multiple_of(WORD) {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << (len % WORD)) - 1;
            }
        }
        PackedBits { words, len }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of set bits in positions `[start, end)`, clipped to the stored length.
    pub fn count_ones_range(&self, start: usize, end: usize) -> usize {
        let end = end.min(self.len);
        if start >= end {
            return 0;
        }
        let (sw, sb) = (start / WORD, start % WORD);
        let (ew, eb) = (end / WORD, end % WORD);
        if sw == ew {
            let mask = ((1u64 << (eb - sb)) - 1) << sb;
            return (self.words[sw] & mask).count_ones() as usize;
        }
        let mut total = (self.words[sw] >> sb).count_ones() as usize;
        total += self.words[sw + 1..ew]
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum::<usize>();
        if eb > 0 {
            total += (self.words[ew] & ((1u64 << eb) - 1)).count_ones() as usize;
        }
        total
    }

    /// Sum over positions `[start, end)` under the map 1 -> +1, 0 -> -1.
    /// Positions at or beyond the stored length contribute 0.
    pub fn signed_sum_range(&self, start: usize, end: usize) -> i64 {
        let present = end.min(self.len).saturating_sub(start) as i64;
        2 * self.count_ones_range(start, end) as i64 - present
    }

    pub fn hamming_distance(&self, other: &PackedBits) -> usize {
        let common = self.len.min(other.len);
        let mut d = self.len.max(other.len) - common;
        let full = common / WORD;
        for i in 0..full {
            d += (self.words[i] ^ other.words[i]).count_ones() as usize;
        }
        if !common.is_multiple_of(WORD) {
            let mask = (1u64 << (common % WORD)) - 1;
            d += ((self.words[full] ^ other.words[full]) & mask).count_ones() as usize;
        }
        d
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl Ord for PackedBits {
    /// Lexicographic order on the '0'/'1' rendering.
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.iter().zip(other.iter()) {
            match a.cmp(&b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for PackedBits {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PackedBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for PackedBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for PackedBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = PackedBits::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => {
                    return Err(Error::Parse(format!(
                        "invalid symbol {other:?} at position {i}"
                    )))
                }
            }
        }
        Ok(out)
    }
}

/// A fixed-length, non-empty source string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(PackedBits);

impl BitString {
    pub fn new(bits: PackedBits) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::param("source strings must have length n >= 1"));
        }
        Ok(Self(bits))
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        Self::new(PackedBits::from_bools(bits))
    }

    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut bits = PackedBits::zeros(n);
        for w in bits.words.iter_mut() {
            *w = rng.next_u64();
        }
        if !n.is_multiple_of(WORD) {
            if let Some(last) = bits.words.last_mut() {
                *last &= (1u64 << (n % WORD)) - 1;
            }
        }
        Self::new(bits)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with [`Trace`].
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn bits(&self) -> &PackedBits {
        &self.0
    }

    pub fn into_bits(self) -> PackedBits {
        self.0
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.0.clone();
        bits.extend_from(&other.0);
        BitString(bits)
    }

    pub fn prefix(&self, len: usize) -> Result<BitString> {
        BitString::new(self.0.prefix(len))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BitString::new(s.parse()?)
    }
}

/// Channel output. May be empty and may be longer than its source.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace(PackedBits);

impl Trace {
    pub fn new(bits: PackedBits) -> Self {
        Self(bits)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn bits(&self) -> &PackedBits {
        &self.0
    }

    pub fn into_bits(self) -> PackedBits {
        self.0
    }

    pub fn concat(&self, other: &Trace) -> Trace {
        let mut bits = self.0.clone();
        bits.extend_from(&other.0);
        Trace(bits)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter()
    }
}

impl From<&BitString> for Trace {
    fn from(x: &BitString) -> Self {
        Trace(x.0.clone())
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&self.0, f)
    }
}

impl FromStr for Trace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Trace(s.parse()?))
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(PackedBits);
string_serde!(BitString);
string_serde!(Trace);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let b: BitString = "0110100".parse().unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b.to_string(), "0110100");
        assert!("".parse::<BitString>().is_err());
        assert!("01x".parse::<Trace>().is_err());
        assert!("".parse::<Trace>().unwrap().is_empty());
    }

    #[test]
    fn lexicographic_order() {
        let a: BitString = "0111".parse().unwrap();
        let b: BitString = "1000".parse().unwrap();
        assert!(a < b);
        let c: BitString = "01".parse().unwrap();
        assert!(c < a);
    }

    #[test]
    fn msb_first_matches_lexicographic() {
        let s = PackedBits::from_u64_msb_first(0b0110, 4);
        assert_eq!(s.to_string(), "0110");
    }

    #[test]
    fn prefix_clears_tail() {
        let s: PackedBits = "1".repeat(70).parse().unwrap();
        let p = s.prefix(65);
        assert_eq!(p.len(), 65);
        assert_eq!(p.count_ones(), 65);
        assert_eq!(p, "1".repeat(65).parse().unwrap());
    }

    fn naive_ones(bits: &[bool], start: usize, end: usize) -> usize {
        bits.iter()
            .enumerate()
            .filter(|(i, &b)| *i >= start && *i < end && b)
            .count()
    }

    proptest! {
        #[test]
        fn range_popcount_matches_naive(
            bits in proptest::collection::vec(any::<bool>(), 0..300),
            a in 0usize..320,
            b in 0usize..320,
        ) {
            let packed = PackedBits::from_bools(bits.iter().copied());
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert_eq!(packed.count_ones_range(lo, hi), naive_ones(&bits, lo, hi));
            let present = hi.min(bits.len()).saturating_sub(lo) as i64;
            let ones = naive_ones(&bits, lo, hi) as i64;
            prop_assert_eq!(packed.signed_sum_range(lo, hi), 2 * ones - present);
        }

        #[test]
        fn concat_preserves_bits(
            a in proptest::collection::vec(any::<bool>(), 0..150),
            b in proptest::collection::vec(any::<bool>(), 0..150),
        ) {
            let mut pa = PackedBits::from_bools(a.iter().copied());
            pa.extend_from(&PackedBits::from_bools(b.iter().copied()));
            let joined: Vec<bool> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(pa, PackedBits::from_bools(joined));
        }
    }
}
