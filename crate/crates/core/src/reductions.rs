//! Reductions between the average-case planted biclique (an `n × n` adjacency
//! matrix with a hidden `k × k` all-ones block) and the distributional
//! planted biclique (`n` samples from `D_S`).
//!
//! Both reductions walk a sequence of matrices obtained by replacing rows or
//! columns one at a time with uniform vectors, call a solver on every
//! matrix in the sequence, and complete the partial answer from the
//! all-ones restriction of the original matrix.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::algorithms::{coordinate_detector_t, detect_by_coordinate_bias, detect_by_subset_enumeration, subset_detector_t};
use crate::bits::{IndexSet, Point};
use crate::distributions::{bernoulli_point, EmpiricalDistribution};
use crate::error::{invalid, precondition, Error, Result};
use crate::oracles::{Backend, OracleSession, OracleSpec};
use crate::scalar::ArithmeticMode;

/// A binary matrix stored as row bit vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<Point>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { cols, rows: vec![Point::zeros(cols); rows] }
    }

    pub fn from_rows(cols: usize, rows: Vec<Point>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.dim() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, actual: r.dim() });
        }
        Ok(BitMatrix { cols, rows })
    }

    /// Uniform random matrix.
    pub fn random(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Self {
        BitMatrix { cols, rows: (0..rows).map(|_| bernoulli_point(cols, 0.5, rng)).collect() }
    }

    /// Parses one row per line of `'0'`/`'1'`; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<Point> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(Point::parse).collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, Point::dim);
        Self::from_rows(cols, rows)
    }

    pub fn to_lines(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * (self.cols + 1));
        for r in &self.rows {
            s.push_str(&r.to_row_string());
            s.push('\n');
        }
        s
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Point] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Point {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.rows[i].set(j, v);
    }

    pub fn set_row(&mut self, i: usize, row: Point) {
        assert_eq!(row.dim(), self.cols, "row dimension");
        self.rows[i] = row;
    }

    pub fn column(&self, j: usize) -> Point {
        let mut c = Point::zeros(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            if r.get(j) {
                c.set(i, true);
            }
        }
        c
    }

    pub fn set_column(&mut self, j: usize, col: &Point) {
        assert_eq!(col.dim(), self.rows.len(), "column dimension");
        for (i, r) in self.rows.iter_mut().enumerate() {
            r.set(j, col.get(i));
        }
    }

    /// Column `j` of the input lands at position `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut out = BitMatrix::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for j in r.iter().enumerate().filter(|(_, b)| *b).map(|(j, _)| j) {
                out.rows[i].set(perm[j], true);
            }
        }
        out
    }

    pub fn block_all_ones(&self, rows: &IndexSet, cols: &IndexSet) -> bool {
        rows.iter().all(|i| self.rows[i].covers(cols))
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().map(Point::count_ones).sum()
    }
}

/// Columns whose entries are 1 in every listed row.
pub fn complete_plant_from_rows(m: &BitMatrix, rows: &IndexSet) -> Result<IndexSet> {
    if rows.is_empty() {
        return Err(precondition("row set must be nonempty"));
    }
    if rows.dim() != m.n_rows() {
        return Err(Error::DimensionMismatch { expected: m.n_rows(), actual: rows.dim() });
    }
    let mut acc = Point::ones(m.n_cols());
    for i in rows.iter() {
        acc = and(&acc, m.row(i));
    }
    IndexSet::new(m.n_cols(), acc.iter().enumerate().filter(|(_, b)| *b).map(|(j, _)| j))
}

/// Rows whose entries are 1 in every listed column.
pub fn complete_plant_from_cols(m: &BitMatrix, cols: &IndexSet) -> Result<IndexSet> {
    if cols.is_empty() {
        return Err(precondition("column set must be nonempty"));
    }
    if cols.dim() != m.n_cols() {
        return Err(Error::DimensionMismatch { expected: m.n_cols(), actual: cols.dim() });
    }
    IndexSet::new(m.n_rows(), (0..m.n_rows()).filter(|&i| m.row(i).covers(cols)))
}

fn and(a: &Point, b: &Point) -> Point {
    let words = a.words().iter().zip(b.words()).map(|(x, y)| x & y).collect();
    Point::from_words(a.dim(), words).expect("same dimension")
}

/// Row and column sets of a planted block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Plant {
    pub rows: IndexSet,
    pub cols: IndexSet,
}

impl Plant {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteInstance {
    pub n: usize,
    pub adjacency: BitMatrix,
    pub plant: Option<Plant>,
}

impl BipartiteInstance {
    /// Whether the recorded plant (if any) is an all-ones block.
    pub fn verify_plant(&self) -> bool {
        self.plant.as_ref().map_or(true, |p| self.adjacency.block_all_ones(&p.rows, &p.cols))
    }

    /// Whether the recorded plant is the only maximal block of its shape that
    /// the completion rules can return.
    pub fn plant_is_unique(&self) -> bool {
        match &self.plant {
            Some(p) if !p.rows.is_empty() && !p.cols.is_empty() => {
                complete_plant_from_rows(&self.adjacency, &p.rows).ok().as_ref() == Some(&p.cols)
                    && complete_plant_from_cols(&self.adjacency, &p.cols).ok().as_ref() == Some(&p.rows)
            }
            _ => false,
        }
    }
}

fn random_subset(n: usize, k: usize, rng: &mut dyn RngCore) -> IndexSet {
    let idx = rand::seq::index::sample(rng, n, k);
    IndexSet::new(n, idx.iter()).expect("indices in range")
}

/// An instance of the average-case problem: random `S_1`, `S_2` of size `k`,
/// the block `S_1 × S_2` forced to ones, every other cell a fair coin.
pub fn generate_average_instance(n: usize, k: usize, rng: &mut dyn RngCore) -> Result<BipartiteInstance> {
    if k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let rows = random_subset(n, k, rng);
    let cols = random_subset(n, k, rng);
    let mut m = BitMatrix::random(n, n, rng);
    for i in rows.iter() {
        for j in cols.iter() {
            m.set(i, j, true);
        }
    }
    Ok(BipartiteInstance { n, adjacency: m, plant: Some(Plant { rows, cols }) })
}

/// As [`generate_average_instance`], redrawing the free cells of any
/// non-plant column that is all ones on `S_1` and of any non-plant row that
/// is all ones on `S_2`, so that both completion rules recover the plant.
pub fn generate_average_instance_unique(n: usize, k: usize, rng: &mut dyn RngCore) -> Result<BipartiteInstance> {
    let mut inst = generate_average_instance(n, k, rng)?;
    let plant = inst.plant.clone().expect("generated with a plant");
    let m = &mut inst.adjacency;
    for j in (0..n).filter(|&j| !plant.cols.contains(j)) {
        while plant.rows.iter().all(|i| m.get(i, j)) {
            for i in 0..n {
                m.set(i, j, rng.gen());
            }
        }
    }
    for i in (0..n).filter(|&i| !plant.rows.contains(i)) {
        while m.row(i).covers(&plant.cols) {
            for j in plant.cols.iter() {
                m.set(i, j, rng.gen());
            }
        }
    }
    debug_assert!(inst.plant_is_unique() || k == n);
    Ok(inst)
}

/// `n` samples from `D_S` with the fair-coin background, as matrix rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    pub matrix: BitMatrix,
    /// Rows drawn from the planted component.
    pub witness_rows: IndexSet,
    pub plant: IndexSet,
}

impl SampleMatrix {
    pub fn as_plant(&self) -> Plant {
        Plant { rows: self.witness_rows.clone(), cols: self.plant.clone() }
    }
}

/// Draws `rows` samples from `D_S`. With `unique`, a non-plant column that is
/// all ones on the witness rows has its cells redrawn until it is not, which
/// makes the completion from the witness rows exactly `S` (skipped when no
/// row witnesses the plant).
pub fn generate_planted_samples(rows: usize, plant: &IndexSet, unique: bool, rng: &mut dyn RngCore) -> Result<SampleMatrix> {
    let n = plant.dim();
    let k = plant.len();
    if k == 0 {
        return Err(invalid("plant must be nonempty"));
    }
    let w = k as f64 / n as f64;
    let mut m = BitMatrix::random(rows, n, rng);
    let mut witness = IndexSet::empty(rows);
    for i in 0..rows {
        if rng.gen::<f64>() < w {
            witness.insert(i);
            for j in plant.iter() {
                m.set(i, j, true);
            }
        }
    }
    if unique && !witness.is_empty() {
        for j in (0..n).filter(|&j| !plant.contains(j)) {
            while witness.iter().all(|i| m.get(i, j)) {
                for i in 0..rows {
                    m.set(i, j, rng.gen());
                }
            }
        }
    }
    Ok(SampleMatrix { matrix: m, witness_rows: witness, plant: plant.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Rows,
    Cols,
}

/// Solver for the average-case problem: given a matrix and a target size,
/// propose the `k × k` block. `hint` carries the ground-truth block of the
/// matrix when the caller knows it; honest solvers ignore it.
pub trait AverageSolver {
    fn solve(&mut self, m: &BitMatrix, k: usize, hint: Option<&Plant>) -> Option<Plant>;
}

/// Solver for the distributional problem: given sample rows and a set size,
/// propose `S`.
pub trait DistributionalSolver {
    fn solve(&mut self, m: &BitMatrix, k: usize, hint: Option<&Plant>) -> Option<IndexSet>;
}

impl<F: FnMut(&BitMatrix, usize, Option<&Plant>) -> Option<Plant>> AverageSolver for F {
    fn solve(&mut self, m: &BitMatrix, k: usize, hint: Option<&Plant>) -> Option<Plant> {
        self(m, k, hint)
    }
}

/// Succeeds exactly when the hinted block is `k × k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthAverageSolver;

impl AverageSolver for GroundTruthAverageSolver {
    fn solve(&mut self, _m: &BitMatrix, k: usize, hint: Option<&Plant>) -> Option<Plant> {
        hint.filter(|h| h.shape() == (k, k)).cloned()
    }
}

/// Succeeds exactly when the hinted set has size `k` and some row witnesses it.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthDistributionalSolver;

impl DistributionalSolver for GroundTruthDistributionalSolver {
    fn solve(&mut self, _m: &BitMatrix, k: usize, hint: Option<&Plant>) -> Option<IndexSet> {
        hint.filter(|h| h.cols.len() == k && !h.rows.is_empty()).map(|h| h.cols.clone())
    }
}

fn empirical_session(m: &BitMatrix, t: u64) -> Option<OracleSession> {
    let dist = EmpiricalDistribution::new(m.n_cols(), m.rows().to_vec()).ok()?;
    let spec = OracleSpec::vstat(t).ok()?;
    Some(OracleSession::new(spec, Backend::exact(Arc::new(dist)), 0).with_mode(ArithmeticMode::Float).without_transcript())
}

fn top_k(scores: &[usize], k: usize) -> Option<IndexSet> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    IndexSet::new(scores.len(), order.into_iter().take(k)).ok()
}

/// Average-case solver built on the coordinate-bias detector. The `k`
/// columns with the largest exact column means pick the `k` rows with the
/// most ones among them; the answer is those rows and the columns that are
/// all ones on them.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateBiasSolver;

impl AverageSolver for CoordinateBiasSolver {
    fn solve(&mut self, m: &BitMatrix, k: usize, _hint: Option<&Plant>) -> Option<Plant> {
        let n = m.n_cols();
        let mut session = empirical_session(m, coordinate_detector_t(n as u64, k as u64))?;
        let biased = detect_by_coordinate_bias(&mut session, n, k).ok()?.recovered;
        let scores: Vec<usize> = m.rows().iter().map(|r| r.count_ones_in(&biased)).collect();
        let rows = top_k(&scores, k)?;
        let cols = complete_plant_from_rows(m, &rows).ok()?;
        (cols.len() == k).then_some(Plant { rows, cols })
    }
}

/// Distributional solver built on the subset-enumeration detector with
/// subset size `s`: the `k` columns lying in the most accepted subsets.
#[derive(Debug, Clone, Copy)]
pub struct SubsetEnumerationSolver {
    pub s: usize,
}

impl DistributionalSolver for SubsetEnumerationSolver {
    fn solve(&mut self, m: &BitMatrix, k: usize, _hint: Option<&Plant>) -> Option<IndexSet> {
        let n = m.n_cols();
        let mut session = empirical_session(m, subset_detector_t(n as u64, k as u64))?;
        let found = detect_by_subset_enumeration(&mut session, n, k, self.s.min(k)).ok()?;
        let mut scores = vec![0usize; n];
        for t in found.accepted_subsets? {
            for j in t {
                scores[j] += 1;
            }
        }
        top_k(&scores, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReductionStats {
    pub solver_calls: u64,
    /// Replacement steps taken in the successful direction (0 = unmodified).
    pub step: Option<usize>,
    pub direction: Option<Side>,
    pub target: Option<usize>,
    /// Whether some matrix in the walked sequences had a block of a target
    /// shape; known only with ground truth.
    pub target_shape_seen: Option<bool>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DistToAvgOutcome {
    pub recovered: Option<IndexSet>,
    pub success: Option<bool>,
    /// Number of witness rows, when known.
    pub witness_count: Option<usize>,
    /// Whether `k/2 ≤ k' ≤ 2k` held for the witness count, when known.
    pub chernoff_event: Option<bool>,
    pub permutation: Vec<usize>,
    #[serde(flatten)]
    pub stats: ReductionStats,
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}

fn map_set(set: &IndexSet, f: &[usize]) -> IndexSet {
    IndexSet::new(set.dim(), set.iter().map(|j| f[j])).expect("permutation preserves range")
}

/// Walks the replacement sequence on `side` of `start`, calling `visit` on
/// the unmodified matrix and after each of the `n` replacements; stops at the
/// first `Some`.
fn walk<T>(
    start: &BitMatrix,
    hint: Option<&Plant>,
    side: Side,
    rng: &mut dyn RngCore,
    mut visit: impl FnMut(usize, &BitMatrix, Option<&Plant>) -> Option<T>,
) -> Option<(usize, T)> {
    let mut w = start.clone();
    let mut h = hint.cloned();
    let len = match side {
        Side::Rows => w.n_rows(),
        Side::Cols => w.n_cols(),
    };
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    if let Some(t) = visit(0, &w, h.as_ref()) {
        return Some((0, t));
    }
    for (step, &idx) in order.iter().enumerate() {
        match side {
            Side::Rows => {
                let r = bernoulli_point(w.n_cols(), 0.5, rng);
                w.set_row(idx, r);
                if let Some(h) = h.as_mut() {
                    h.rows.remove(idx);
                }
            }
            Side::Cols => {
                let c = bernoulli_point(w.n_rows(), 0.5, rng);
                w.set_column(idx, &c);
                if let Some(h) = h.as_mut() {
                    h.cols.remove(idx);
                }
            }
        }
        if let Some(t) = visit(step + 1, &w, h.as_ref()) {
            return Some((step + 1, t));
        }
    }
    None
}

/// Finds `S` from `n` samples of `D_S` using an average-case solver.
///
/// Columns are permuted by a random `π`. Two replacement walks follow,
/// columns first: replacing columns targets blocks of size `⌈k/2⌉..=k`
/// (enough when the witness count is at most `k`), replacing rows targets
/// `k` (enough when it is at least `k`). The witness count is hidden, so both
/// are tried. A proposed block is accepted only if it is an all-ones block
/// of the target shape in the matrix it came from and its completion on the
/// original samples has exactly `k` columns.
pub fn solve_distributional_via_average(
    samples: &BitMatrix,
    k: usize,
    solver: &mut dyn AverageSolver,
    hint: Option<&Plant>,
    rng: &mut dyn RngCore,
) -> Result<DistToAvgOutcome> {
    let n = samples.n_cols();
    if samples.n_rows() != n {
        return Err(precondition(format!("need exactly n = {n} sample rows, got {}", samples.n_rows())));
    }
    if k < 2 || k > n {
        return Err(precondition(format!("need 2 <= k <= n, got k = {k}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let inv = invert(&perm);
    let permuted = samples.permute_columns(&perm);
    let hint_p = hint.map(|h| Plant { rows: h.rows.clone(), cols: map_set(&h.cols, &perm) });
    let witness_count = hint.map(|h| h.rows.len());
    let mut calls = 0u64;
    let mut seen = false;
    let mut flags = Vec::new();

    let lo = k.div_ceil(2);
    let mut result = None;
    for (side, targets) in [(Side::Cols, (lo..=k).rev().collect::<Vec<_>>()), (Side::Rows, vec![k])] {
        let found = walk(&permuted, hint_p.as_ref(), side, rng, |_, w, h| {
            if let Some(h) = h {
                seen |= targets.iter().any(|&t| h.shape() == (t, t));
            }
            for &t in &targets {
                calls += 1;
                let Some(b) = solver.solve(w, t, h) else { continue };
                if b.shape() != (t, t) || b.rows.dim() != n || b.cols.dim() != n || !w.block_all_ones(&b.rows, &b.cols) {
                    continue;
                }
                let s = match side {
                    // rows are untouched by column replacement, so they index the original samples
                    Side::Cols => match complete_plant_from_rows(samples, &b.rows) {
                        Ok(s) if map_set(&b.cols, &inv).is_subset_of(&s) => s,
                        _ => continue,
                    },
                    Side::Rows => map_set(&b.cols, &inv),
                };
                if s.len() == k {
                    return Some((t, s));
                }
            }
            None
        });
        if let Some((step, (t, s))) = found {
            result = Some((side, step, t, s));
            break;
        }
    }
    if result.is_none() {
        flags.push("solver-never-succeeded".into());
    }
    if witness_count == Some(0) {
        flags.push("no-witness-rows".into());
    }
    let chernoff_event = witness_count.map(|w| 2 * w >= k && w <= 2 * k);
    if chernoff_event == Some(false) {
        flags.push("outside-chernoff-event".into());
    }
    let success = hint.map(|h| result.as_ref().is_some_and(|r| r.3 == h.cols));
    Ok(DistToAvgOutcome {
        success,
        witness_count,
        chernoff_event,
        permutation: perm,
        stats: ReductionStats {
            solver_calls: calls,
            step: result.as_ref().map(|r| r.1),
            direction: result.as_ref().map(|r| r.0),
            target: result.as_ref().map(|r| r.2),
            target_shape_seen: hint.map(|_| seen),
            flags,
        },
        recovered: result.map(|r| r.3),
    })
}

/// Retry cap for the conditioned binomial draw.
pub const DEFAULT_DRAW_RETRIES: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AvgToDistOutcome {
    pub recovered: Option<Plant>,
    pub success: Option<bool>,
    /// The conditioned draw from `Bin(n, k'/n)`.
    pub drawn_k: Option<usize>,
    pub draw_attempts: u32,
    #[serde(flatten)]
    pub stats: ReductionStats,
}

/// Finds the `k' × k'` block of an average-case instance using a
/// distributional solver.
///
/// Draws `k ~ Bin(n, k'/n)` until `k'/2 ≤ k ≤ 2k'`. If `k ≤ k'`, rows are
/// replaced and the solver is asked for a set of size `k'`; otherwise columns
/// are replaced and it is asked for sizes `⌈k'/2⌉..=k'`. A proposed set `C`
/// is completed to rows `R` (all ones on `C`) and columns (all ones on `R`)
/// on the original matrix, and accepted when both have size `k'`.
pub fn solve_average_via_distributional(
    instance: &BipartiteInstance,
    k_prime: usize,
    solver: &mut dyn DistributionalSolver,
    max_retries: u32,
    rng: &mut dyn RngCore,
) -> Result<AvgToDistOutcome> {
    let n = instance.n;
    let g = &instance.adjacency;
    if g.n_rows() != n || g.n_cols() != n {
        return Err(precondition("instance matrix must be n × n"));
    }
    if k_prime == 0 || k_prime > n {
        return Err(precondition(format!("need 1 <= k' <= n, got k' = {k_prime}")));
    }
    let bin = Binomial::new(n as u64, k_prime as f64 / n as f64).map_err(|e| invalid(format!("{e}")))?;
    let mut attempts = 0u32;
    let mut drawn = None;
    while attempts < max_retries.max(1) {
        attempts += 1;
        let kk = bin.sample(rng) as usize;
        if 2 * kk >= k_prime && kk <= 2 * k_prime {
            drawn = Some(kk);
            break;
        }
    }
    let mut flags = Vec::new();
    let hint = instance.plant.as_ref();
    let Some(kk) = drawn else {
        flags.push("draw-retries-exhausted".into());
        return Ok(AvgToDistOutcome {
            recovered: None,
            success: hint.map(|_| false),
            drawn_k: None,
            draw_attempts: attempts,
            stats: ReductionStats { solver_calls: 0, step: None, direction: None, target: None, target_shape_seen: None, flags },
        });
    };
    let (side, targets): (Side, Vec<usize>) =
        if kk <= k_prime { (Side::Rows, vec![k_prime]) } else { (Side::Cols, (k_prime.div_ceil(2)..=k_prime).rev().collect()) };
    let mut calls = 0u64;
    let mut seen = false;
    let found = walk(g, hint, side, rng, |_, w, h| {
        if let Some(h) = h {
            seen |= match side {
                Side::Rows => h.shape() == (kk, k_prime),
                Side::Cols => targets.contains(&h.cols.len()),
            };
        }
        for &t in &targets {
            calls += 1;
            let Some(c) = solver.solve(w, t, h) else { continue };
            if c.len() != t || c.dim() != n {
                continue;
            }
            let Ok(rows) = complete_plant_from_cols(g, &c) else { continue };
            if rows.len() != k_prime {
                continue;
            }
            let Ok(cols) = complete_plant_from_rows(g, &rows) else { continue };
            if cols.len() == k_prime && c.is_subset_of(&cols) {
                return Some((t, Plant { rows, cols }));
            }
        }
        None
    });
    if found.is_none() {
        flags.push("solver-never-succeeded".into());
    }
    let success = hint.map(|h| found.as_ref().is_some_and(|(_, (_, p))| p == h));
    Ok(AvgToDistOutcome {
        success,
        drawn_k: Some(kk),
        draw_attempts: attempts,
        stats: ReductionStats {
            solver_calls: calls,
            step: found.as_ref().map(|f| f.0),
            direction: found.as_ref().map(|_| side),
            target: found.as_ref().map(|f| f.1 .0),
            target_shape_seen: hint.map(|_| seen),
            flags,
        },
        recovered: found.map(|f| f.1 .1),
    })
}
