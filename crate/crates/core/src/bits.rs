//! Fixed-length bit vectors: sample points and coordinate sets.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

#[inline]
fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// A point `x ∈ {0,1}^n`, stored as little-endian 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    n: usize,
    words: Vec<u64>,
}

impl Point {
    pub fn zeros(n: usize) -> Self {
        Point { n, words: vec![0; words_for(n)] }
    }

    pub fn ones(n: usize) -> Self {
        let mut p = Point::zeros(n);
        for w in p.words.iter_mut() {
            *w = u64::MAX;
        }
        p.trim();
        p
    }

    /// Point whose coordinate `i` is bit `i` of `word`. Requires `n ≤ 64`.
    pub fn from_word(n: usize, word: u64) -> Self {
        assert!(n <= 64, "from_word requires n <= 64");
        let mut p = Point { n, words: vec![word; words_for(n)] };
        p.trim();
        p
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut p = Point::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                p.set(i, true);
            }
        }
        p
    }

    pub fn from_words(n: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(n) {
            return Err(invalid("word count does not match dimension"));
        }
        let mut p = Point { n, words };
        p.trim();
        Ok(p)
    }

    /// Parses a row of `'0'`/`'1'` characters.
    pub fn parse(row: &str) -> Result<Self> {
        let row = row.trim();
        let mut p = Point::zeros(row.len());
        for (i, c) in row.chars().enumerate() {
            match c {
                '0' => {}
                '1' => p.set(i, true),
                other => return Err(invalid(alloc::format!("unexpected character {other:?} in bit row"))),
            }
        }
        Ok(p)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The single backing word, for `n ≤ 64`.
    #[inline]
    pub fn word(&self) -> u64 {
        debug_assert!(self.n <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.n, "coordinate {i} out of range for dimension {}", self.n);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of ones of `x` restricted to `set`.
    pub fn count_ones_in(&self, set: &IndexSet) -> usize {
        self.words.iter().zip(set.words.iter()).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// Whether `x_i = 1` for every `i ∈ set`.
    pub fn covers(&self, set: &IndexSet) -> bool {
        self.words.iter().zip(set.words.iter()).all(|(a, b)| a & b == *b)
    }

    /// Inner product `c·x mod 2` with another bit vector of the same length.
    pub fn dot_parity(&self, other: &Point) -> bool {
        let ones: u32 = self.words.iter().zip(other.words.iter()).map(|(a, b)| (a & b).count_ones()).sum();
        ones % 2 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.n).map(move |i| self.get(i))
    }

    pub fn to_row_string(&self) -> alloc::string::String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub(crate) fn trim(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        if self.n == 0 {
            self.words.clear();
        }
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({})", self.to_row_string())
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_row_string())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_row_string())
    }
}

/// A subset of `[0, n)`, iterated in increasing order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet {
    n: usize,
    words: Vec<u64>,
}

impl IndexSet {
    pub fn empty(n: usize) -> Self {
        IndexSet { n, words: vec![0; words_for(n)] }
    }

    pub fn full(n: usize) -> Self {
        let p = Point::ones(n);
        IndexSet { n, words: p.words }
    }

    /// The first `k` indices `{0, …, k−1}`.
    pub fn prefix(n: usize, k: usize) -> Result<Self> {
        Self::new(n, 0..k)
    }

    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = IndexSet::empty(n);
        for i in indices {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            s.words[i / 64] |= 1u64 << (i % 64);
        }
        Ok(s)
    }

    /// Builds a set from a strictly increasing index list, rejecting duplicates.
    pub fn from_sorted(n: usize, indices: &[usize]) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("indices must be strictly increasing"));
        }
        Self::new(n, indices.iter().copied())
    }

    /// Set whose members are the set bits of `mask`. Requires `n ≤ 64`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let p = Point::from_word(n, mask);
        IndexSet { n, words: p.words }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn mask(&self) -> u64 {
        debug_assert!(self.n <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.n && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.n);
        self.words[i / 64] |= 1u64 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        if i < self.n {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            core::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + tz)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn intersection_len(&self, other: &IndexSet) -> usize {
        self.words.iter().zip(other.words.iter()).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// `|self ∖ other|`.
    pub fn difference_len(&self, other: &IndexSet) -> usize {
        self.words.iter().zip(other.words.iter()).map(|(a, b)| (a & !b).count_ones() as usize).sum()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        IndexSet { n: self.n, words: self.words.iter().zip(other.words.iter()).map(|(a, b)| a | b).collect() }
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet { n: self.n, words: self.words.iter().zip(other.words.iter()).map(|(a, b)| a & b).collect() }
    }

    pub fn is_subset_of(&self, other: &IndexSet) -> bool {
        self.words.iter().zip(other.words.iter()).all(|(a, b)| a & !b == 0)
    }

    /// The set viewed as its indicator point.
    pub fn indicator(&self) -> Point {
        Point { n: self.n, words: self.words.clone() }
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for IndexSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

/// All `k`-subsets of `[0, n)` in colexicographic order, as index vectors.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), first: true, done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
            return Some(self.idx.clone());
        }
        let k = self.idx.len();
        // advance the lexicographic successor
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(self.idx.clone());
            }
        }
        self.done = true;
        None
    }
}

/// All `k`-subsets of `[0, n)` as bit masks, `n ≤ 63` (Gosper's hack).
pub fn subset_masks(n: usize, k: usize) -> impl Iterator<Item = u64> {
    assert!(n <= 63, "subset_masks requires n <= 63");
    let limit = 1u64 << n;
    let mut next = if k > n {
        limit
    } else if k == 0 {
        0
    } else {
        (1u64 << k) - 1
    };
    let mut zero_pending = k == 0;
    core::iter::from_fn(move || {
        if zero_pending {
            zero_pending = false;
            return Some(0);
        }
        if k == 0 || next >= limit {
            return None;
        }
        let cur = next;
        let c = cur & cur.wrapping_neg();
        let r = cur + c;
        next = (((r ^ cur) >> 2) / c) | r;
        Some(cur)
    })
}
