//! Inter-annotator agreement over orderings.
//!
//! Orders are compared through their pairwise-relation encoding: a bit for every directed pair
//! `(i, j)`, `i != j`, enumerated lexicographically, set when item `i` precedes item `j`.
//! Cohen's kappa is computed on these bit vectors. Alternative-order agreement restricts the
//! comparison to the relations where each order departs from the ground truth, then greedily
//! matches the two annotators' series.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::Permutation;
use crate::scalar::{mean, Scalar};

/// Index of the directed pair `(i, j)` in the canonical enumeration for `n` items.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// All directed pairs in canonical order.
pub fn directed_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationVector {
    n: usize,
    bits: Vec<bool>,
}

impl RelationVector {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[pair_index(self.n, i, j)]
    }

    /// Recovers the order by counting predecessors, or `None` if the bits do not encode a
    /// total order.
    pub fn decode(&self) -> Option<Permutation> {
        let positions: Vec<usize> = (0..self.n)
            .map(|i| (0..self.n).filter(|&j| j != i && self.get(j, i)).count())
            .collect();
        let p = Permutation::new(positions).ok()?;
        (encode_relations(&p).ok()? == *self).then_some(p)
    }
}

impl fmt::Display for RelationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.bits)
    }
}

fn write_bits(f: &mut fmt::Formatter<'_>, bits: &[bool]) -> fmt::Result {
    for &b in bits {
        f.write_str(if b { "1" } else { "0" })?;
    }
    Ok(())
}

/// Elementwise `|a - b|` of two relation vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiffVector {
    bits: Vec<bool>,
}

impl DiffVector {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Zero-based indices of set bits.
    pub fn active_positions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(k, &b)| b.then_some(k))
            .collect()
    }
}

impl fmt::Display for DiffVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.bits)
    }
}

pub fn encode_relations(order: &Permutation) -> Result<RelationVector> {
    let n = order.len();
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "relation encoding needs at least 2 items, found {n}"
        )));
    }
    Ok(RelationVector {
        n,
        bits: directed_pairs(n).map(|(i, j)| order.precedes(i, j)).collect(),
    })
}

/// Cohen's kappa of two binary label vectors.
///
/// When chance agreement is 1 (both vectors constant and equal in marginals) the statistic is
/// undefined; identical vectors then score 1 and anything else 0.
pub fn kappa<T: Scalar>(a: &[bool], b: &[bool]) -> Result<T> {
    check_len(a.len(), b.len())?;
    let n = a.len();
    if n == 0 {
        return Err(Error::EmptyInput("kappa needs at least one label"));
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    let ones_a = a.iter().filter(|&&x| x).count();
    let ones_b = b.iter().filter(|&&x| x).count();
    let n2 = n * n;
    let p_o = T::ratio(agree, n);
    let p_e = T::ratio(ones_a * ones_b + (n - ones_a) * (n - ones_b), n2);
    if p_e == T::one() {
        return Ok(if a == b { T::one() } else { T::zero() });
    }
    Ok((p_o - p_e) / (T::one() - p_e))
}

pub fn diff_vector(gt: &Permutation, alt: &Permutation) -> Result<DiffVector> {
    check_len(gt.len(), alt.len())?;
    let (g, a) = (encode_relations(gt)?, encode_relations(alt)?);
    Ok(DiffVector {
        bits: g.bits.iter().zip(&a.bits).map(|(x, y)| x != y).collect(),
    })
}

/// Restricts two diff vectors to the union of their active positions.
///
/// Returns the restricted lists and the zero-based positions retained.
pub fn restrict(d1: &DiffVector, d2: &DiffVector) -> Result<(Vec<bool>, Vec<bool>, Vec<usize>)> {
    check_len(d1.bits.len(), d2.bits.len())?;
    let positions: Vec<usize> = (0..d1.bits.len()).filter(|&k| d1.bits[k] || d2.bits[k]).collect();
    let r1 = positions.iter().map(|&k| d1.bits[k]).collect();
    let r2 = positions.iter().map(|&k| d2.bits[k]).collect();
    Ok((r1, r2, positions))
}

/// Kappa between two orders measured only where they depart from the ground truth.
pub fn restricted_kappa<T: Scalar>(gt: &Permutation, o1: &Permutation, o2: &Permutation) -> Result<T> {
    check_len(gt.len(), o1.len())?;
    check_len(gt.len(), o2.len())?;
    let (r1, r2, positions) = restrict(&diff_vector(gt, o1)?, &diff_vector(gt, o2)?)?;
    if positions.is_empty() {
        return Ok(T::one());
    }
    kappa(&r1, &r2)
}

/// One worker's alternative orders for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSeries {
    pub worker_id: String,
    orders: Vec<Permutation>,
}

impl AnnotationSeries {
    pub fn new(worker_id: impl Into<String>, orders: Vec<Permutation>) -> Result<Self> {
        let worker_id = worker_id.into();
        if let Some(first) = orders.first() {
            for o in &orders[1..] {
                check_len(first.len(), o.len())?;
            }
        }
        let distinct: BTreeSet<&Permutation> = orders.iter().collect();
        if distinct.len() != orders.len() {
            return Err(Error::Duplicate(format!(
                "worker `{worker_id}` submitted the same order twice"
            )));
        }
        Ok(Self { worker_id, orders })
    }

    pub fn orders(&self) -> &[Permutation] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}

/// Scores recorded by the greedy series matching for one pair of workers.
fn match_series<T: Scalar>(gt: &Permutation, a: &[Permutation], b: &[Permutation]) -> Result<Vec<T>> {
    let mut a: Vec<&Permutation> = a.iter().collect();
    let mut b: Vec<&Permutation> = b.iter().collect();
    a.sort();
    b.sort();
    // the shorter series leads; equal lengths are ordered by content so the result does not
    // depend on which worker is listed first
    let (short, long) = if (a.len(), &a) <= (b.len(), &b) { (a, b) } else { (b, a) };

    let mut table = Vec::with_capacity(short.len());
    for s in &short {
        let mut row = Vec::with_capacity(long.len());
        for l in &long {
            row.push(restricted_kappa::<T>(gt, s, l)?);
        }
        table.push(row);
    }

    let mut used_short = vec![false; short.len()];
    let mut used_long = vec![false; long.len()];
    let mut scores = Vec::with_capacity(long.len());
    for _ in 0..short.len() {
        let mut best: Option<(usize, usize)> = None;
        for (m, row) in table.iter().enumerate() {
            if used_short[m] {
                continue;
            }
            for (n, &v) in row.iter().enumerate() {
                if used_long[n] {
                    continue;
                }
                if best.is_none_or(|(bm, bn)| v > table[bm][bn]) {
                    best = Some((m, n));
                }
            }
        }
        let (m, n) = best.expect("unmatched orders remain");
        used_short[m] = true;
        used_long[n] = true;
        scores.push(table[m][n]);
    }
    for (n, l) in long.iter().enumerate() {
        if !used_long[n] {
            scores.push(restricted_kappa::<T>(gt, gt, l)?);
        }
    }
    Ok(scores)
}

/// Every score recorded across all worker pairs for one instance: best-match scores plus
/// penalties for unmatched leftovers.
pub fn alt_order_iaa_scores<T: Scalar>(series: &[AnnotationSeries], gt: &Permutation) -> Result<Vec<T>> {
    if series.len() < 2 {
        return Err(Error::InsufficientAnnotators(series.len()));
    }
    for s in series {
        for o in &s.orders {
            check_len(gt.len(), o.len())?;
        }
    }
    let mut scores = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            scores.extend(match_series::<T>(gt, &series[i].orders, &series[j].orders)?);
        }
    }
    Ok(scores)
}

/// Alternative-order agreement for one instance: the mean of all recorded scores. Workers who
/// all report no alternatives agree perfectly.
pub fn alt_order_iaa_instance<T: Scalar>(series: &[AnnotationSeries], gt: &Permutation) -> Result<T> {
    let scores = alt_order_iaa_scores::<T>(series, gt)?;
    Ok(mean(scores).unwrap_or_else(T::one))
}

/// Mean pairwise kappa of full relation vectors for one instance.
pub fn instance_kappa<T: Scalar>(orders: &[Permutation]) -> Result<T> {
    if orders.len() < 2 {
        return Err(Error::InsufficientAnnotators(orders.len()));
    }
    let encoded = orders.iter().map(encode_relations).collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::new();
    for i in 0..encoded.len() {
        for j in i + 1..encoded.len() {
            check_len(encoded[i].bits.len(), encoded[j].bits.len())?;
            scores.push(kappa::<T>(&encoded[i].bits, &encoded[j].bits)?);
        }
    }
    Ok(mean(scores).expect("at least one pair"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardIaa<T> {
    /// Mean over the instances that had at least two annotations.
    pub value: T,
    pub per_instance: Vec<Option<T>>,
    /// Indices of instances skipped for having fewer than two annotations.
    pub skipped: Vec<usize>,
}

/// Per instance, the mean kappa over worker pairs; then the mean over instances.
///
/// Instances with fewer than two annotations are skipped with a warning, or rejected when
/// `strict` is set.
pub fn standard_iaa<T: Scalar>(instances: &[Vec<Permutation>], strict: bool) -> Result<StandardIaa<T>> {
    let mut per_instance = Vec::with_capacity(instances.len());
    let mut skipped = Vec::new();
    for (idx, orders) in instances.iter().enumerate() {
        if orders.len() < 2 {
            if strict {
                return Err(Error::InsufficientAnnotators(orders.len()));
            }
            log::warn!("instance {idx} has {} annotation(s); skipped", orders.len());
            skipped.push(idx);
            per_instance.push(None);
            continue;
        }
        per_instance.push(Some(instance_kappa::<T>(orders)?));
    }
    let value = mean(per_instance.iter().flatten().copied())
        .ok_or(Error::EmptyInput("no instance has two or more annotations"))?;
    Ok(StandardIaa {
        value,
        per_instance,
        skipped,
    })
}

/// Per-worker mean agreement: each pair of workers is averaged over the instances both
/// annotated, then each worker's pair scores are averaged.
///
/// `A` is whatever one worker contributes to one instance: a single order in standard mode, an
/// [`AnnotationSeries`] in alternative mode.
pub fn worker_mean_iaa<T, A, F>(instances: &[Vec<(String, A)>], mut score: F) -> Result<BTreeMap<String, T>>
where
    T: Scalar,
    F: FnMut(usize, &A, &A) -> Result<T>,
{
    let mut pair_scores: BTreeMap<(String, String), Vec<T>> = BTreeMap::new();
    for (idx, annotations) in instances.iter().enumerate() {
        for (i, (wa, oa)) in annotations.iter().enumerate() {
            for (wb, ob) in &annotations[i + 1..] {
                if wa == wb {
                    continue;
                }
                let key = if wa < wb {
                    (wa.clone(), wb.clone())
                } else {
                    (wb.clone(), wa.clone())
                };
                pair_scores.entry(key).or_default().push(score(idx, oa, ob)?);
            }
        }
    }
    let mut per_worker: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for ((a, b), scores) in pair_scores {
        let m = mean(scores).expect("recorded at least once");
        per_worker.entry(a).or_default().push(m);
        per_worker.entry(b).or_default().push(m);
    }
    Ok(per_worker
        .into_iter()
        .map(|(w, s)| (w, mean(s).expect("non-empty")))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Drop workers whose mean pairwise agreement with the others is below the threshold.
    IaaThreshold,
    /// Drop workers whose mean accuracy against the authored order is below the threshold.
    AccuracyQualification,
}

impl FilterMode {
    pub const DEFAULT_ACCURACY_THRESHOLD: f64 = 0.20;
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerScore<T> {
    pub worker_id: String,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilterOutcome {
    pub retained: Vec<String>,
    pub dropped: Vec<String>,
}

/// Keeps workers whose score (mean accuracy or mean IAA, per `mode`) reaches `threshold`.
pub fn filter_workers<T: Scalar>(workers: &[WorkerScore<T>], mode: FilterMode, threshold: T) -> Result<FilterOutcome> {
    if workers.is_empty() {
        return Err(Error::EmptyInput("no workers to filter"));
    }
    let mut out = FilterOutcome::default();
    for w in workers {
        if w.score < threshold {
            log::info!("dropping worker `{}` ({mode:?}, score {:?})", w.worker_id, w.score);
            out.dropped.push(w.worker_id.clone());
        } else {
            out.retained.push(w.worker_id.clone());
        }
    }
    Ok(out)
}
