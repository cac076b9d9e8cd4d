//! Distribution families over `{0,1}^n`: the planted mixture `D_S(n, S, p, q)`,
//! the product reference distribution, parity distributions `D_c`, and the
//! empirical distribution of a sample matrix.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};

use crate::bits::{IndexSet, Point};
use crate::error::{invalid, Error, Result};
use crate::query::Query;
use crate::scalar::{big, int, pow, ratio_to_f64, ArithmeticMode, Prob, Scalar};

/// Largest dimension for exhaustive enumeration over `{0,1}^n`.
pub const MAX_ENUM_DIM: usize = 20;

pub trait PointDistribution: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn family(&self) -> &'static str;

    /// Exact probability mass of `x`.
    fn mass(&self, x: &Point) -> Result<BigRational>;

    fn draw(&self, rng: &mut dyn RngCore) -> Point;

    /// Closed-form expectation, or `None` when the query has no closed form
    /// under this family.
    fn closed_form(&self, query: &Query) -> Result<Option<BigRational>>;

    /// Double-precision counterpart of [`closed_form`](Self::closed_form).
    fn closed_form_f64(&self, query: &Query) -> Result<Option<f64>>;

    /// Sum of `query(x)·mass(x)` over every point, in exact arithmetic.
    fn brute_force_expectation(&self, query: &Query) -> Result<BigRational>;

    fn mass_f64(&self, x: &Point) -> Result<f64> {
        Ok(ratio_to_f64(&self.mass(x)?))
    }

    /// Expectation in exact arithmetic: closed form when available,
    /// enumeration otherwise.
    fn exact_expectation(&self, query: &Query) -> Result<Scalar> {
        query.check_dim(self.dim())?;
        if let Some(v) = self.closed_form(query)? {
            return Ok(Scalar::Exact(v));
        }
        if self.dim() > MAX_ENUM_DIM {
            return Err(Error::UnsupportedQuery(format!(
                "{} has no closed form and n = {} is too large to enumerate",
                query.digest(),
                self.dim()
            )));
        }
        Ok(Scalar::Exact(self.brute_force_expectation(query)?))
    }

    fn expectation_f64(&self, query: &Query) -> Result<f64> {
        query.check_dim(self.dim())?;
        match self.closed_form_f64(query)? {
            Some(v) => Ok(v),
            None => Ok(self.exact_expectation(query)?.to_f64()),
        }
    }

    fn expectation(&self, query: &Query, mode: ArithmeticMode) -> Result<Scalar> {
        match mode {
            ArithmeticMode::Exact => self.exact_expectation(query),
            ArithmeticMode::Float => Ok(Scalar::Float(self.expectation_f64(query)?)),
        }
    }

    /// Sum of `query(x)` over `draws` fresh samples.
    ///
    /// For a structured query the value of one draw is a two-point variable
    /// determined by the expectation alone, so the sum is drawn directly from
    /// the matching binomial law instead of materializing points.
    fn sample_query_sum(&self, query: &Query, draws: u64, rng: &mut dyn RngCore) -> Result<f64> {
        query.check_dim(self.dim())?;
        if draws == 0 {
            return Ok(0.0);
        }
        if query.is_structured() {
            if let Some(e) = self.closed_form_f64(query)? {
                return Ok(match query {
                    Query::Parity(_) => {
                        let ones = binomial(draws, (1.0 + e) / 2.0, rng);
                        2.0 * ones as f64 - draws as f64
                    }
                    _ => binomial(draws, e, rng) as f64,
                });
            }
        }
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += query.evaluate(&self.draw(rng));
        }
        Ok(sum)
    }
}

fn binomial(draws: u64, p: f64, rng: &mut dyn RngCore) -> u64 {
    let p = p.clamp(0.0, 1.0);
    // p lies in [0, 1], the only failure condition of the constructor
    Binomial::new(draws, p).map(|b| b.sample(rng)).unwrap_or(0)
}

#[inline]
pub(crate) fn bernoulli(p: f64, rng: &mut dyn RngCore) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.gen::<f64>() < p
    }
}

/// A product-Bernoulli point with every coordinate set with probability `q`.
pub(crate) fn bernoulli_point(n: usize, q: f64, rng: &mut dyn RngCore) -> Point {
    let mut x = Point::zeros(n);
    if q == 0.5 {
        for w in x.words_mut() {
            *w = rng.next_u64();
        }
        x.trim();
    } else {
        for i in 0..n {
            if bernoulli(q, rng) {
                x.set(i, true);
            }
        }
    }
    x
}

/// `mass(dist, x)/mass(reference, x) − 1`.
pub fn ratio_deviation(dist: &dyn PointDistribution, reference: &dyn PointDistribution, x: &Point) -> Result<BigRational> {
    if dist.dim() != reference.dim() {
        return Err(Error::DimensionMismatch { expected: reference.dim(), actual: dist.dim() });
    }
    let r = reference.mass(x)?;
    if r.is_zero() {
        return Err(Error::VanishingReference);
    }
    Ok(dist.mass(x)? / r - BigRational::one())
}

fn check_point(n: usize, x: &Point) -> Result<()> {
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: x.dim() });
    }
    Ok(())
}

/// Exhaustive expectation where the mass of a point depends only on a class
/// label. Points are grouped by (query value, class) and the exact sum is
/// formed once per group.
fn enumerate_by_class(
    n: usize,
    query: &Query,
    class_of: impl Fn(&Point) -> usize,
    class_mass: impl Fn(usize) -> BigRational,
) -> Result<BigRational> {
    if n > MAX_ENUM_DIM {
        return Err(Error::EnumerationGuard { n, limit: MAX_ENUM_DIM });
    }
    query.check_dim(n)?;
    let boolean = query.is_boolean();
    let mut groups: BTreeMap<(u64, usize), u64> = BTreeMap::new();
    let mut x = Point::zeros(n);
    for w in 0..(1u64 << n) {
        if n > 0 {
            x.words_mut()[0] = w;
        }
        let mut v = query.evaluate(&x);
        if !(-1.0..=1.0).contains(&v) || (boolean && v != 0.0 && v != 1.0) {
            return Err(invalid(format!("{} evaluates to {v} at {x}, outside its declared range", query.digest())));
        }
        if v == 0.0 {
            v = 0.0;
        }
        *groups.entry((v.to_bits(), class_of(&x))).or_insert(0) += 1;
    }
    let mut total = BigRational::zero();
    for ((bits, class), count) in groups {
        let v = f64::from_bits(bits);
        if v == 0.0 {
            continue;
        }
        let v = BigRational::from_float(v).ok_or_else(|| invalid("query returned a non-finite value"))?;
        total += v * class_mass(class) * big(count);
    }
    Ok(total)
}

fn fpow(base: f64, exp: usize) -> f64 {
    libm::pow(base, exp as f64)
}

/// The mixture `D_S`: with probability `k/n` the coordinates in `S` are
/// Bernoulli(`p`), and every other coordinate (all of them, off the plant
/// branch) is Bernoulli(`q`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDistribution {
    n: usize,
    plant: IndexSet,
    p: Prob,
    q: Prob,
}

impl PlantedDistribution {
    pub fn new(n: usize, plant: IndexSet, p: Prob, q: Prob) -> Result<Self> {
        if plant.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: plant.dim() });
        }
        let k = plant.len();
        if k == 0 || k > n {
            return Err(invalid(format!("plant size k = {k} must satisfy 1 <= k <= n = {n}")));
        }
        if q.exact().is_zero() || q.exact() >= &BigRational::one() {
            return Err(invalid(format!("q = {q} must lie in (0, 1)")));
        }
        if p.exact() < q.exact() {
            return Err(invalid(format!("p = {p} must be at least q = {q}")));
        }
        Ok(PlantedDistribution { n, plant, p, q })
    }

    /// The bipartite-clique case `p = 1`, `q = 1/2`.
    pub fn clique(n: usize, plant: IndexSet) -> Result<Self> {
        Self::new(n, plant, Prob::one(), Prob::half())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.plant.len()
    }

    pub fn plant(&self) -> &IndexSet {
        &self.plant
    }

    pub fn p(&self) -> &Prob {
        &self.p
    }

    pub fn q(&self) -> &Prob {
        &self.q
    }

    /// The mixing weight `k/n`.
    pub fn mix_weight(&self) -> BigRational {
        BigRational::new(BigInt::from(self.k()), BigInt::from(self.n))
    }

    pub fn reference(&self) -> ReferenceDistribution {
        ReferenceDistribution { n: self.n, q: self.q.clone() }
    }

    /// Mass of any point with `a` ones inside the plant and `b` ones outside.
    pub fn mass_by_counts(&self, a: usize, b: usize) -> BigRational {
        let (n, k) = (self.n, self.k());
        let w = self.mix_weight();
        let one = BigRational::one();
        let q = self.q.exact();
        let p = self.p.exact();
        let q1 = &one - q;
        let p1 = &one - p;
        let background = pow(q, a + b) * pow(&q1, n - a - b);
        let planted = pow(p, a) * pow(&p1, k - a) * pow(q, b) * pow(&q1, n - k - b);
        (&one - &w) * background + w * planted
    }

    fn counts(&self, x: &Point) -> (usize, usize) {
        let a = x.count_ones_in(&self.plant);
        (a, x.count_ones() - a)
    }
}

impl PointDistribution for PlantedDistribution {
    fn dim(&self) -> usize {
        self.n
    }

    fn family(&self) -> &'static str {
        "planted"
    }

    fn mass(&self, x: &Point) -> Result<BigRational> {
        check_point(self.n, x)?;
        let (a, b) = self.counts(x);
        Ok(self.mass_by_counts(a, b))
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Point {
        let q = self.q.value();
        let p = self.p.value();
        let mut x = bernoulli_point(self.n, q, rng);
        if rng.gen_range(0..self.n) < self.k() {
            for i in self.plant.iter() {
                x.set(i, bernoulli(p, rng));
            }
        }
        x
    }

    fn closed_form(&self, query: &Query) -> Result<Option<BigRational>> {
        query.check_dim(self.n)?;
        let one = BigRational::one();
        let w = self.mix_weight();
        let (p, q) = (self.p.exact(), self.q.exact());
        Ok(match query {
            Query::Coordinate(i) => {
                let inner = if self.plant.contains(*i) { p } else { q };
                Some((&one - &w) * q + w * inner)
            }
            Query::Conjunction(t) => {
                let a = t.intersection_len(&self.plant);
                let b = t.len() - a;
                Some(w.clone() * pow(p, a) * pow(q, b) + (&one - &w) * pow(q, a + b))
            }
            Query::Parity(c) => {
                let a = c.count_ones_in(&self.plant);
                let b = c.count_ones() - a;
                let two = int(2);
                let bq = &one - &two * q;
                let bp = &one - &two * p;
                Some(-((&one - &w) * pow(&bq, a + b) + w * pow(&bp, a) * pow(&bq, b)))
            }
            _ => None,
        })
    }

    fn closed_form_f64(&self, query: &Query) -> Result<Option<f64>> {
        query.check_dim(self.n)?;
        let w = self.k() as f64 / self.n as f64;
        let (p, q) = (self.p.value(), self.q.value());
        Ok(match query {
            Query::Coordinate(i) => {
                let inner = if self.plant.contains(*i) { p } else { q };
                Some((1.0 - w) * q + w * inner)
            }
            Query::Conjunction(t) => {
                let a = t.intersection_len(&self.plant);
                let b = t.len() - a;
                Some(w * fpow(p, a) * fpow(q, b) + (1.0 - w) * fpow(q, a + b))
            }
            Query::Parity(c) => {
                let a = c.count_ones_in(&self.plant);
                let b = c.count_ones() - a;
                let (bq, bp) = (1.0 - 2.0 * q, 1.0 - 2.0 * p);
                Some(-((1.0 - w) * fpow(bq, a + b) + w * fpow(bp, a) * fpow(bq, b)))
            }
            _ => None,
        })
    }

    fn brute_force_expectation(&self, query: &Query) -> Result<BigRational> {
        let k = self.k();
        let stride = self.n - k + 1;
        let table: Vec<BigRational> = (0..(k + 1) * stride).map(|c| self.mass_by_counts(c / stride, c % stride)).collect();
        enumerate_by_class(
            self.n,
            query,
            |x| {
                let (a, b) = self.counts(x);
                a * stride + b
            },
            |c| table[c].clone(),
        )
    }
}

/// `n` independent Bernoulli(`q`) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDistribution {
    n: usize,
    q: Prob,
}

impl ReferenceDistribution {
    pub fn new(n: usize, q: Prob) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if q.exact().is_zero() || q.exact() >= &BigRational::one() {
            return Err(invalid(format!("q = {q} must lie in (0, 1)")));
        }
        Ok(ReferenceDistribution { n, q })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(n, Prob::half())
    }

    pub fn q(&self) -> &Prob {
        &self.q
    }

    fn mass_by_ones(&self, ones: usize) -> BigRational {
        let q = self.q.exact();
        pow(q, ones) * pow(&(BigRational::one() - q), self.n - ones)
    }
}

impl PointDistribution for ReferenceDistribution {
    fn dim(&self) -> usize {
        self.n
    }

    fn family(&self) -> &'static str {
        "reference"
    }

    fn mass(&self, x: &Point) -> Result<BigRational> {
        check_point(self.n, x)?;
        Ok(self.mass_by_ones(x.count_ones()))
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Point {
        bernoulli_point(self.n, self.q.value(), rng)
    }

    fn closed_form(&self, query: &Query) -> Result<Option<BigRational>> {
        query.check_dim(self.n)?;
        let q = self.q.exact();
        Ok(match query {
            Query::Coordinate(_) => Some(q.clone()),
            Query::Conjunction(t) => Some(pow(q, t.len())),
            Query::Parity(c) => Some(-pow(&(BigRational::one() - int(2) * q), c.count_ones())),
            _ => None,
        })
    }

    fn closed_form_f64(&self, query: &Query) -> Result<Option<f64>> {
        query.check_dim(self.n)?;
        let q = self.q.value();
        Ok(match query {
            Query::Coordinate(_) => Some(q),
            Query::Conjunction(t) => Some(fpow(q, t.len())),
            Query::Parity(c) => Some(-fpow(1.0 - 2.0 * q, c.count_ones())),
            _ => None,
        })
    }

    fn brute_force_expectation(&self, query: &Query) -> Result<BigRational> {
        let table: Vec<BigRational> = (0..=self.n).map(|o| self.mass_by_ones(o)).collect();
        enumerate_by_class(self.n, query, |x| x.count_ones(), |o| table[o].clone())
    }
}

/// Uniform distribution over `{x : χ_c(x) = b}` for a nonzero `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityDistribution {
    c: Point,
    target: i8,
}

impl ParityDistribution {
    /// `target` must be `+1` or `−1`.
    pub fn new(c: Point, target: i8) -> Result<Self> {
        if c.is_zero() {
            return Err(invalid("parity vector c must be nonzero"));
        }
        if target != 1 && target != -1 {
            return Err(invalid(format!("target value must be +1 or -1, got {target}")));
        }
        Ok(ParityDistribution { c, target })
    }

    pub fn c(&self) -> &Point {
        &self.c
    }

    pub fn target(&self) -> i8 {
        self.target
    }

    /// Whether `χ_c(x) = b`.
    pub fn contains(&self, x: &Point) -> bool {
        let chi_positive = self.c.dot_parity(x);
        chi_positive == (self.target == 1)
    }

    fn support_mass(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << (self.c.dim() - 1))
    }
}

impl PointDistribution for ParityDistribution {
    fn dim(&self) -> usize {
        self.c.dim()
    }

    fn family(&self) -> &'static str {
        "parity"
    }

    fn mass(&self, x: &Point) -> Result<BigRational> {
        check_point(self.dim(), x)?;
        Ok(if self.contains(x) { self.support_mass() } else { BigRational::zero() })
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Point {
        let mut x = bernoulli_point(self.dim(), 0.5, rng);
        if !self.contains(&x) {
            // flipping one coordinate in supp(c) is a bijection between the two cosets
            let i = self.c.iter().position(|b| b).unwrap_or(0);
            let v = x.get(i);
            x.set(i, !v);
        }
        x
    }

    fn closed_form(&self, query: &Query) -> Result<Option<BigRational>> {
        query.check_dim(self.dim())?;
        let positive = self.target == 1;
        let c_ones = self.c.count_ones();
        Ok(match query {
            Query::Coordinate(i) => {
                if c_ones == 1 && self.c.get(*i) {
                    Some(if positive { BigRational::one() } else { BigRational::zero() })
                } else {
                    Some(crate::scalar::ratio(1, 2))
                }
            }
            Query::Conjunction(t) => {
                let c_in_t = (0..self.dim()).all(|i| !self.c.get(i) || t.contains(i));
                let scale = |e: usize| BigRational::new(BigInt::one(), BigInt::one() << e);
                if c_in_t {
                    // on {x_T = 1}, c·x is fixed to |c| mod 2
                    if (c_ones % 2 == 1) == positive {
                        Some(int(2) * scale(t.len()))
                    } else {
                        Some(BigRational::zero())
                    }
                } else {
                    Some(scale(t.len()))
                }
            }
            Query::Parity(c2) => Some(if c2 == &self.c {
                int(self.target as i64)
            } else if c2.is_zero() {
                int(-1)
            } else {
                BigRational::zero()
            }),
            _ => None,
        })
    }

    fn closed_form_f64(&self, query: &Query) -> Result<Option<f64>> {
        Ok(self.closed_form(query)?.map(|r| ratio_to_f64(&r)))
    }

    fn brute_force_expectation(&self, query: &Query) -> Result<BigRational> {
        let m = self.support_mass();
        enumerate_by_class(self.dim(), query, |x| self.contains(x) as usize, |c| if c == 1 { m.clone() } else { BigRational::zero() })
    }
}

/// Uniform distribution over the rows of a sample matrix (with multiplicity).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    n: usize,
    rows: Vec<Point>,
}

impl EmpiricalDistribution {
    pub fn new(n: usize, rows: Vec<Point>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("empirical distribution needs at least one row"));
        }
        if let Some(r) = rows.iter().find(|r| r.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: r.dim() });
        }
        Ok(EmpiricalDistribution { n, rows })
    }

    pub fn rows(&self) -> &[Point] {
        &self.rows
    }

    fn average(&self, query: &Query) -> BigRational {
        let len = big(self.rows.len() as u64);
        if query.is_boolean() || matches!(query, Query::Parity(_)) {
            let sum: i64 = self.rows.iter().map(|r| query.evaluate(r) as i64).sum();
            return int(sum) / len;
        }
        let sum: BigRational = self.rows.iter().map(|r| query.evaluate_exact(r)).sum();
        sum / len
    }
}

impl PointDistribution for EmpiricalDistribution {
    fn dim(&self) -> usize {
        self.n
    }

    fn family(&self) -> &'static str {
        "empirical"
    }

    fn mass(&self, x: &Point) -> Result<BigRational> {
        check_point(self.n, x)?;
        let hits = self.rows.iter().filter(|r| *r == x).count();
        Ok(BigRational::new(BigInt::from(hits), BigInt::from(self.rows.len())))
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Point {
        self.rows[rng.gen_range(0..self.rows.len())].clone()
    }

    fn closed_form(&self, query: &Query) -> Result<Option<BigRational>> {
        query.check_dim(self.n)?;
        Ok(Some(self.average(query)))
    }

    fn closed_form_f64(&self, query: &Query) -> Result<Option<f64>> {
        query.check_dim(self.n)?;
        let sum: f64 = self.rows.iter().map(|r| query.evaluate(r)).sum();
        Ok(Some(sum / self.rows.len() as f64))
    }

    fn brute_force_expectation(&self, query: &Query) -> Result<BigRational> {
        query.check_dim(self.n)?;
        Ok(self.average(query))
    }
}
