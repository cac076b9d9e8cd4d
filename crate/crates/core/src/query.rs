//! Query functions `h : {0,1}^n → [−1, 1]`.
//!
//! Structured variants (coordinate, conjunction, parity) admit closed-form
//! expectations under every distribution family; tabulated and real-valued
//! queries fall back to enumeration.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::bits::{IndexSet, Point};
use crate::error::{invalid, Error, Result};

/// Largest dimension a truth table may cover.
pub const MAX_TABLE_DIM: usize = 20;

pub type Evaluator = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// A real-valued query given by a closure, identified in transcripts by its label.
#[derive(Clone)]
pub struct RealQuery {
    label: String,
    n: usize,
    boolean: bool,
    eval: Evaluator,
}

impl RealQuery {
    /// A query with declared range `[−1, 1]`.
    pub fn new(label: impl Into<String>, n: usize, eval: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        RealQuery { label: label.into(), n, boolean: false, eval: Arc::new(eval) }
    }

    /// A query with declared range `{0, 1}`.
    pub fn boolean(label: impl Into<String>, n: usize, eval: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        RealQuery { label: label.into(), n, boolean: true, eval: Arc::new(eval) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn evaluate(&self, x: &Point) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for RealQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealQuery").field("label", &self.label).field("n", &self.n).field("boolean", &self.boolean).finish()
    }
}

/// A query tabulated on all of `{0,1}^n`, indexed by the point's bit word.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    n: usize,
    values: Arc<[f64]>,
}

impl Table {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > MAX_TABLE_DIM {
            return Err(Error::EnumerationGuard { n, limit: MAX_TABLE_DIM });
        }
        if values.len() != 1usize << n {
            return Err(invalid(format!("table for n = {n} needs {} entries, got {}", 1usize << n, values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(invalid(format!("table value {v} outside [-1, 1]")));
        }
        Ok(Table { n, values: values.into() })
    }

    pub fn from_fn(n: usize, f: impl Fn(u64) -> f64) -> Result<Self> {
        if n > MAX_TABLE_DIM {
            return Err(Error::EnumerationGuard { n, limit: MAX_TABLE_DIM });
        }
        Self::new(n, (0..1u64 << n).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, word: u64) -> f64 {
        self.values[word as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn digest(&self) -> u64 {
        // FNV-1a over the value bit patterns
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.values.iter() {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[derive(Debug, Clone)]
pub enum Query {
    /// `h(x) = x_i`.
    Coordinate(usize),
    /// `g_T(x) = 1` iff `x_i = 1` for all `i ∈ T`.
    Conjunction(IndexSet),
    /// `χ_c(x) = −(−1)^{c·x}`, valued in `{−1, +1}`.
    Parity(Point),
    Tabulated(Table),
    RealValued(RealQuery),
}

impl Query {
    pub fn coordinate(i: usize) -> Self {
        Query::Coordinate(i)
    }

    pub fn conjunction(set: IndexSet) -> Self {
        Query::Conjunction(set)
    }

    pub fn parity(c: Point) -> Self {
        Query::Parity(c)
    }

    /// Whether the query's range is `{0, 1}` (required by VSTAT and SAMPLE).
    pub fn is_boolean(&self) -> bool {
        match self {
            Query::Coordinate(_) | Query::Conjunction(_) => true,
            Query::Parity(_) => false,
            Query::Tabulated(t) => t.values.iter().all(|&v| v == 0.0 || v == 1.0),
            Query::RealValued(r) => r.boolean,
        }
    }

    pub fn is_structured(&self) -> bool {
        matches!(self, Query::Coordinate(_) | Query::Conjunction(_) | Query::Parity(_))
    }

    /// Checks that the query is defined on `{0,1}^n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        let ok = match self {
            Query::Coordinate(i) => {
                if *i >= n {
                    return Err(Error::IndexOutOfRange { index: *i, n });
                }
                true
            }
            Query::Conjunction(t) => t.dim() == n,
            Query::Parity(c) => c.dim() == n,
            Query::Tabulated(t) => t.n == n,
            Query::RealValued(r) => r.n == n,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: n, actual: self.declared_dim().unwrap_or(0) })
        }
    }

    fn declared_dim(&self) -> Option<usize> {
        match self {
            Query::Coordinate(_) => None,
            Query::Conjunction(t) => Some(t.dim()),
            Query::Parity(c) => Some(c.dim()),
            Query::Tabulated(t) => Some(t.n),
            Query::RealValued(r) => Some(r.n),
        }
    }

    pub fn evaluate(&self, x: &Point) -> f64 {
        match self {
            Query::Coordinate(i) => {
                if x.get(*i) {
                    1.0
                } else {
                    0.0
                }
            }
            Query::Conjunction(t) => {
                if x.covers(t) {
                    1.0
                } else {
                    0.0
                }
            }
            Query::Parity(c) => {
                if c.dot_parity(x) {
                    1.0
                } else {
                    -1.0
                }
            }
            Query::Tabulated(t) => t.get(x.word()),
            Query::RealValued(r) => r.evaluate(x),
        }
    }

    /// Exact value at `x`. Doubles are dyadic rationals, so this is lossless.
    pub fn evaluate_exact(&self, x: &Point) -> BigRational {
        match self {
            Query::Coordinate(_) | Query::Conjunction(_) | Query::Parity(_) => {
                BigRational::from_integer(BigInt::from(self.evaluate(x) as i64))
            }
            _ => BigRational::from_float(self.evaluate(x)).unwrap_or_default(),
        }
    }

    /// Canonical transcript identifier.
    pub fn digest(&self) -> String {
        match self {
            Query::Coordinate(i) => format!("coord:{i}"),
            Query::Conjunction(t) => {
                let idx: Vec<String> = t.iter().map(|i| format!("{i}")).collect();
                format!("conj:{}", idx.join(","))
            }
            Query::Parity(c) => format!("parity:{c}"),
            Query::Tabulated(t) => format!("table:{}:{:016x}", t.n, t.digest()),
            Query::RealValued(r) => format!("real:{}", r.label),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_sign_convention() {
        let c = Point::parse("110").unwrap();
        let q = Query::parity(c);
        assert_eq!(q.evaluate(&Point::parse("100").unwrap()), 1.0);
        assert_eq!(q.evaluate(&Point::parse("110").unwrap()), -1.0);
        assert_eq!(q.evaluate(&Point::parse("001").unwrap()), -1.0);
        assert!(!q.is_boolean());
    }

    #[test]
    fn digests_are_canonical() {
        let t = IndexSet::new(8, [5, 1, 3]).unwrap();
        assert_eq!(Query::conjunction(t).digest(), "conj:1,3,5");
        assert_eq!(Query::coordinate(4).digest(), "coord:4");
        let a = Table::from_fn(3, |w| (w % 2) as f64).unwrap();
        let b = Table::from_fn(3, |w| (w % 2) as f64).unwrap();
        assert_eq!(Query::Tabulated(a).digest(), Query::Tabulated(b).digest());
    }

    #[test]
    fn table_range_and_size_checked() {
        assert!(Table::new(2, alloc::vec![0.0; 3]).is_err());
        assert!(Table::new(1, alloc::vec![0.0, 1.5]).is_err());
        assert!(Table::from_fn(21, |_| 0.0).is_err());
        assert!(Query::Tabulated(Table::from_fn(2, |w| (w & 1) as f64).unwrap()).is_boolean());
    }

    #[test]
    fn dimension_checks() {
        assert!(Query::coordinate(3).check_dim(3).is_err());
        assert!(Query::conjunction(IndexSet::empty(4)).check_dim(5).is_err());
        assert!(Query::conjunction(IndexSet::empty(4)).check_dim(4).is_ok());
    }
}
