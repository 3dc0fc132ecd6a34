//! Global order recovery from an `n × n` pairwise precedence matrix.
//!
//! Three decoders share one objective, [`score_permutation`]: the sum over every pair placed
//! `i` before `j` of `ln p[i][j]` (probability mode, clamped below by a floor) or `p[i][j]`
//! (score mode).
//!
//! * [`decode_exhaustive`] enumerates all `n!` orders and is the exact reference.
//! * [`decode_topological`] thresholds the matrix into a digraph, breaks cycles at their
//!   weakest edge and emits the smallest-index topological order.
//! * [`decode_beam`] builds the order left to right, keeping the best partial orders.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{OrderPrediction, Permutation};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixMode {
    /// `p[i][j]` is a calibrated probability that `i` precedes `j`.
    Probability,
    /// Unconstrained finite scores.
    Score,
}

/// Row-major pairwise matrix; the diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix<T> {
    n: usize,
    p: Vec<T>,
    mode: MatrixMode,
}

/// Tolerance on `p[i][j] + p[j][i] == 1` in probability mode.
pub const COMPLEMENT_TOLERANCE: f64 = 1e-6;

impl<T: Real> PairwiseMatrix<T> {
    /// Checks shape, finiteness and (probability mode) the `[0, 1]` range. The complement
    /// constraint is reported by [`consistency_check`] rather than enforced here.
    pub fn new(n: usize, p: Vec<T>, mode: MatrixMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("pairwise matrix needs n >= 1".into()));
        }
        check_len(n * n, p.len())?;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = p[i * n + j];
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!("p[{i}][{j}] is not finite")));
                }
                if mode == MatrixMode::Probability && (v < T::zero() || v > T::one()) {
                    return Err(Error::InvalidParameter(format!("p[{i}][{j}] = {v:?} outside [0, 1]")));
                }
            }
        }
        Ok(Self { n, p, mode })
    }

    pub fn from_fn(n: usize, mode: MatrixMode, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut p = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                p.push(if i == j { T::zero() } else { f(i, j) });
            }
        }
        Self::new(n, p, mode)
    }

    /// Every off-diagonal entry `0.5`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_fn(n, MatrixMode::Probability, |_, _| T::from_f64_lossy(0.5))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.p[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    /// Majority relation: `p[i][j] > 0.5` for probabilities, `p[i][j] > p[j][i]` for scores.
    /// Exact ties produce no edge in either direction.
    pub fn majority_edge(&self, i: usize, j: usize) -> bool {
        match self.mode {
            MatrixMode::Probability => self.get(i, j) > T::from_f64_lossy(0.5),
            MatrixMode::Score => self.get(i, j) > self.get(j, i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    /// Lower clamp applied before taking logs in probability mode.
    pub floor: f64,
    /// Largest `n` accepted by the exhaustive decoder.
    pub exhaustive_limit: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            floor: 1e-9,
            exhaustive_limit: 8,
        }
    }
}

#[inline]
fn pair_term<T: Real>(m: &PairwiseMatrix<T>, floor: T, before: usize, after: usize) -> T {
    let v = m.get(before, after);
    match m.mode {
        MatrixMode::Probability => v.max(floor).ln(),
        MatrixMode::Score => v,
    }
}

fn score_unchecked<T: Real>(m: &PairwiseMatrix<T>, floor: T, mapping: &[usize]) -> T {
    let mut total = T::zero();
    for i in 0..m.n {
        for j in i + 1..m.n {
            total = total
                + if mapping[i] < mapping[j] {
                    pair_term(m, floor, i, j)
                } else {
                    pair_term(m, floor, j, i)
                };
        }
    }
    total
}

/// Objective value of `order` (slot `i` placed at `order[i]`), summed over pairs `i < j` in a
/// fixed order so equal objectives compare bitwise equal.
pub fn score_permutation<T: Real>(m: &PairwiseMatrix<T>, order: &Permutation, config: &DecoderConfig) -> Result<T> {
    check_len(m.n, order.len())?;
    Ok(score_unchecked(m, T::from_f64_lossy(config.floor), order.as_slice()))
}

/// Lexicographic successor, or `false` after the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len())
        .rev()
        .find(|&j| v[j] > v[i])
        .expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

fn prediction<T: Real>(mapping: Vec<usize>, objective: T) -> OrderPrediction<T> {
    let mut pred = OrderPrediction::new(
        String::new(),
        Permutation::new(mapping).expect("decoder emits bijections"),
    );
    pred.objective_value = Some(objective);
    pred
}

/// Exact maximizer of [`score_permutation`]; ties go to the lexicographically smallest mapping.
pub fn decode_exhaustive<T: Real>(m: &PairwiseMatrix<T>, config: &DecoderConfig) -> Result<OrderPrediction<T>> {
    if m.n > config.exhaustive_limit {
        return Err(Error::SizeLimit {
            n: m.n,
            limit: config.exhaustive_limit,
        });
    }
    let floor = T::from_f64_lossy(config.floor);
    let mut cur: Vec<usize> = (0..m.n).collect();
    let mut best = cur.clone();
    let mut best_score = score_unchecked(m, floor, &cur);
    while next_permutation(&mut cur) {
        let s = score_unchecked(m, floor, &cur);
        if s > best_score {
            best_score = s;
            best.copy_from_slice(&cur);
        }
    }
    Ok(prediction(best, best_score))
}

/// Finds one directed cycle by depth-first search (start nodes and neighbours in index order).
fn find_cycle(adj: &[Vec<bool>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let n = adj.len();
    let mut color = vec![Color::White; n];
    for root in 0..n {
        if color[root] != Color::White {
            continue;
        }
        // (node, next neighbour to try)
        let mut stack = vec![(root, 0usize)];
        color[root] = Color::Gray;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if let Some(v) = (*next..n).find(|&v| adj[u][v]) {
                *next = v + 1;
                match color[v] {
                    Color::White => {
                        color[v] = Color::Gray;
                        stack.push((v, 0));
                    }
                    Color::Gray => {
                        let start = stack.iter().position(|&(w, _)| w == v).expect("gray node on stack");
                        return Some(stack[start..].iter().map(|&(w, _)| w).collect());
                    }
                    Color::Black => {}
                }
            } else {
                color[u] = Color::Black;
                stack.pop();
            }
        }
    }
    None
}

/// Topological decoding with cycle breaking.
///
/// Edges `i → j` exist where `p[i][j] > 0.5`. While a cycle is found, its edge with the lowest
/// probability is removed (first such edge along the cycle on ties). Among ready nodes the
/// smallest index is emitted first.
pub fn decode_topological<T: Real>(m: &PairwiseMatrix<T>, config: &DecoderConfig) -> Result<OrderPrediction<T>> {
    if m.mode != MatrixMode::Probability {
        return Err(Error::Mode(
            "topological decoding needs a probability-mode matrix".into(),
        ));
    }
    let n = m.n;
    let mut adj: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i != j && m.majority_edge(i, j)).collect())
        .collect();
    while let Some(cycle) = find_cycle(&adj) {
        let edges = cycle
            .iter()
            .enumerate()
            .map(|(k, &u)| (u, cycle[(k + 1) % cycle.len()]));
        let (u, v) = edges
            .min_by(|&(a, b), &(c, d)| m.get(a, b).partial_cmp(&m.get(c, d)).unwrap_or(Ordering::Equal))
            .expect("cycle has edges");
        log::debug!("breaking cycle {cycle:?} at {u} -> {v}");
        adj[u][v] = false;
    }

    let mut indegree: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| adj[i][j]).count()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&j| indegree[j] == 0).map(Reverse).collect();
    let mut sequence = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        sequence.push(u);
        for v in 0..n {
            if adj[u][v] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.push(Reverse(v));
                }
            }
        }
    }
    debug_assert_eq!(sequence.len(), n, "acyclic graph yields a full order");
    let order = Permutation::from_sequence(&sequence)?;
    let objective = score_unchecked(m, T::from_f64_lossy(config.floor), order.as_slice());
    Ok(prediction(order.as_slice().to_vec(), objective))
}

#[derive(Clone)]
struct Partial<T> {
    sequence: Vec<usize>,
    used: Vec<bool>,
    score: T,
}

/// Left-to-right beam search.
///
/// Placing item `c` adds `Σ term(c, r)` over every still-unplaced `r`, so a complete order's
/// accumulated score is its full objective. The best `beam_width` partials (ties by
/// lexicographic item sequence) survive each step. The final beam is rescored with
/// [`score_permutation`] and resolved like the exhaustive decoder, so a width of at least `n!`
/// reproduces [`decode_exhaustive`] exactly.
pub fn decode_beam<T: Real>(
    m: &PairwiseMatrix<T>,
    beam_width: usize,
    config: &DecoderConfig,
) -> Result<OrderPrediction<T>> {
    if beam_width == 0 {
        return Err(Error::InvalidParameter("beam width must be at least 1".into()));
    }
    let n = m.n;
    let floor = T::from_f64_lossy(config.floor);
    let mut beam = vec![Partial {
        sequence: Vec::with_capacity(n),
        used: vec![false; n],
        score: T::zero(),
    }];
    for _ in 0..n {
        let mut next = Vec::with_capacity(beam.len().saturating_mul(n).min(1 << 20));
        for partial in &beam {
            for c in (0..n).filter(|&c| !partial.used[c]) {
                let gain = (0..n)
                    .filter(|&r| r != c && !partial.used[r])
                    .fold(T::zero(), |acc, r| acc + pair_term(m, floor, c, r));
                let mut child = partial.clone();
                child.sequence.push(c);
                child.used[c] = true;
                child.score = partial.score + gain;
                next.push(child);
            }
        }
        next.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.sequence.cmp(&b.sequence))
        });
        next.truncate(beam_width);
        beam = next;
    }

    let mut best: Option<(Vec<usize>, T)> = None;
    for partial in beam {
        let order = Permutation::from_sequence(&partial.sequence)?;
        let score = score_unchecked(m, floor, order.as_slice());
        let better = match &best {
            None => true,
            Some((mapping, s)) => score > *s || (score == *s && order.as_slice() < mapping.as_slice()),
        };
        if better {
            best = Some((order.as_slice().to_vec(), score));
        }
    }
    let (mapping, score) = best.expect("beam is never empty");
    Ok(prediction(mapping, score))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Pairs `(i, j)`, `i < j`, with `|p[i][j] + p[j][i] - 1| > 1e-6` (probability mode only).
    pub complement_violations: Vec<(usize, usize)>,
    /// Unordered triples forming a directed 3-cycle under the majority relation.
    pub cyclic_triads: usize,
    /// The majority relation is a transitive tournament.
    pub is_total_order: bool,
}

pub fn consistency_check<T: Real>(m: &PairwiseMatrix<T>) -> ConsistencyReport {
    let n = m.n;
    let mut complement_violations = Vec::new();
    let mut complete = true;
    for i in 0..n {
        for j in i + 1..n {
            if m.mode == MatrixMode::Probability {
                let err = (m.get(i, j) + m.get(j, i) - T::one()).abs();
                if err > T::from_f64_lossy(COMPLEMENT_TOLERANCE) {
                    complement_violations.push((i, j));
                }
            }
            if !m.majority_edge(i, j) && !m.majority_edge(j, i) {
                complete = false;
            }
        }
    }
    let e = |a: usize, b: usize| m.majority_edge(a, b);
    let mut cyclic_triads = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if (e(i, j) && e(j, k) && e(k, i)) || (e(i, k) && e(k, j) && e(j, i)) {
                    cyclic_triads += 1;
                }
            }
        }
    }
    ConsistencyReport {
        complement_violations,
        cyclic_triads,
        is_total_order: complete && cyclic_triads == 0,
    }
}
