//! Sequencing metrics: position accuracy, perfect match, displacement, longest common
//! subsequence/substring and Kendall's tau, plus multi-reference selection and the
//! manual-completion retrieval metrics.
//!
//! All per-instance comparisons happen in instance (slot) coordinates. `Dist` is the
//! per-instance *sum* of absolute displacements; datasets report its mean.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{Permutation, ReferenceSet};
use crate::scalar::{mean, Scalar};

fn check_pair(pred: &Permutation, gt: &Permutation) -> Result<usize> {
    check_len(gt.len(), pred.len())?;
    if gt.len() < 2 {
        return Err(Error::InvalidSize(format!(
            "orders must have at least 2 items, found {}",
            gt.len()
        )));
    }
    Ok(gt.len())
}

/// Fraction of slots whose predicted position matches the ground truth.
pub fn accuracy<T: Scalar>(pred: &Permutation, gt: &Permutation) -> Result<T> {
    let n = check_pair(pred, gt)?;
    let hits = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .filter(|(a, b)| a == b)
        .count();
    Ok(T::ratio(hits, n))
}

pub fn pmr(pred: &Permutation, gt: &Permutation) -> Result<bool> {
    check_pair(pred, gt)?;
    Ok(pred == gt)
}

/// Sum over slots of `|pred[i] - gt[i]|`.
pub fn distance<T: Scalar>(pred: &Permutation, gt: &Permutation) -> Result<T> {
    check_pair(pred, gt)?;
    let total: usize = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&a, &b)| a.abs_diff(b))
        .sum();
    Ok(T::from_count(total))
}

pub fn lcs_length(pred: &Permutation, gt: &Permutation) -> Result<usize> {
    check_pair(pred, gt)?;
    let (a, b) = (pred.to_sequence(), gt.to_sequence());
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in &a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[b.len()])
}

/// Longest run of items appearing contiguously, in the same order, in both orderings.
pub fn lcstr_length(pred: &Permutation, gt: &Permutation) -> Result<usize> {
    check_pair(pred, gt)?;
    let (a, b) = (pred.to_sequence(), gt.to_sequence());
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &x in &a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(best)
}

/// Number of unordered pairs whose relative order differs between the two permutations.
pub fn inversions(pred: &Permutation, gt: &Permutation) -> Result<usize> {
    check_len(gt.len(), pred.len())?;
    let (p, g) = (pred.as_slice(), gt.as_slice());
    let n = p.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            if (p[i] < p[j]) != (g[i] < g[j]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// `1 - 2 * inversions / C(n, 2)`.
pub fn kendall_tau<T: Scalar>(pred: &Permutation, gt: &Permutation) -> Result<T> {
    let n = check_pair(pred, gt)?;
    let pairs = n * (n - 1) / 2;
    let inv = inversions(pred, gt)?;
    Ok(T::one() - T::from_count(2) * T::ratio(inv, pairs))
}

/// The six sequencing metrics for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub n: usize,
    pub acc: T,
    pub pmr: bool,
    pub dist: T,
    pub lq: usize,
    pub lr: usize,
    pub tau: T,
}

impl<T: Scalar> MetricReport<T> {
    /// `pmr ⟺ acc == 1 ⟺ dist == 0 ⟺ lq == n ⟺ lr == n ⟺ tau == 1`, and `lr <= lq <= n`.
    pub fn is_consistent(&self) -> bool {
        let flags = [
            self.pmr,
            self.acc == T::one(),
            self.dist == T::zero(),
            self.lq == self.n,
            self.lr == self.n,
            self.tau == T::one(),
        ];
        flags.iter().all(|&f| f == flags[0]) && self.lr <= self.lq && self.lq <= self.n && self.lr >= 1
    }

    /// Lexicographic `(acc, tau, -dist)` comparison: true when `self` is strictly better.
    pub fn beats(&self, other: &Self) -> bool {
        use std::cmp::Ordering::*;
        let ord = self
            .acc
            .partial_cmp(&other.acc)
            .unwrap_or(Equal)
            .then(self.tau.partial_cmp(&other.tau).unwrap_or(Equal))
            .then(other.dist.partial_cmp(&self.dist).unwrap_or(Equal));
        ord == Greater
    }
}

pub fn evaluate_instance<T: Scalar>(pred: &Permutation, gt: &Permutation) -> Result<MetricReport<T>> {
    Ok(MetricReport {
        n: check_pair(pred, gt)?,
        acc: accuracy(pred, gt)?,
        pmr: pmr(pred, gt)?,
        dist: distance(pred, gt)?,
        lq: lcs_length(pred, gt)?,
        lr: lcstr_length(pred, gt)?,
        tau: kendall_tau(pred, gt)?,
    })
}

/// How a prediction is scored against several admissible references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferencePolicy {
    /// One reference is chosen by the `(acc, tau, -dist)` key and every metric is reported
    /// against it.
    #[default]
    Joint,
    /// Each metric takes its best value over all references independently.
    PerMetric,
}

impl std::str::FromStr for ReferencePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Self::Joint),
            "per-metric" | "per_metric" => Ok(Self::PerMetric),
            other => Err(Error::InvalidParameter(format!("unknown reference policy `{other}`"))),
        }
    }
}

/// Scores `pred` against every reference and returns the best report together with the index
/// of the reference that wins the joint key (0 is the first reference; ties keep the lowest
/// index).
pub fn evaluate_against<T: Scalar>(
    pred: &Permutation,
    references: &[Permutation],
    policy: ReferencePolicy,
) -> Result<(MetricReport<T>, usize)> {
    let mut reports = Vec::with_capacity(references.len());
    for r in references {
        reports.push(evaluate_instance::<T>(pred, r)?);
    }
    let mut chosen = 0;
    for (i, rep) in reports.iter().enumerate().skip(1) {
        if rep.beats(&reports[chosen]) {
            chosen = i;
        }
    }
    let Some(first) = reports.first() else {
        return Err(Error::InvalidReference("no references to evaluate against".into()));
    };
    let report = match policy {
        ReferencePolicy::Joint => reports[chosen],
        ReferencePolicy::PerMetric => {
            let mut best = *first;
            for r in &reports[1..] {
                if r.acc > best.acc {
                    best.acc = r.acc;
                }
                if r.tau > best.tau {
                    best.tau = r.tau;
                }
                if r.dist < best.dist {
                    best.dist = r.dist;
                }
                best.pmr |= r.pmr;
                best.lq = best.lq.max(r.lq);
                best.lr = best.lr.max(r.lr);
            }
            best
        }
    };
    Ok((report, chosen))
}

/// Multi-reference evaluation over the original order and its admitted alternatives.
pub fn evaluate_multi_reference<T: Scalar>(
    pred: &Permutation,
    refs: &ReferenceSet,
    policy: ReferencePolicy,
) -> Result<(MetricReport<T>, usize)> {
    let all: Vec<Permutation> = refs.iter().cloned().collect();
    evaluate_against(pred, &all, policy)
}

/// Dataset means of the per-instance metrics. `pmr` is a ratio in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport<T> {
    pub count: usize,
    pub acc: T,
    pub pmr: T,
    pub dist: T,
    pub lq: T,
    pub lr: T,
    pub tau: T,
    /// Mean of `lq / n`.
    pub lq_ratio: T,
    /// Mean of `lr / n`.
    pub lr_ratio: T,
}

pub fn aggregate<T: Scalar>(reports: &[MetricReport<T>]) -> Result<AggregateReport<T>> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no metric reports to aggregate"));
    }
    let m = |f: &dyn Fn(&MetricReport<T>) -> T| mean(reports.iter().map(f)).expect("non-empty");
    Ok(AggregateReport {
        count: reports.len(),
        acc: m(&|r| r.acc),
        pmr: m(&|r| if r.pmr { T::one() } else { T::zero() }),
        dist: m(&|r| r.dist),
        lq: m(&|r| T::from_count(r.lq)),
        lr: m(&|r| T::from_count(r.lr)),
        tau: m(&|r| r.tau),
        lq_ratio: m(&|r| T::ratio(r.lq, r.n)),
        lr_ratio: m(&|r| T::ratio(r.lr, r.n)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    /// One-based rank of the ground-truth step among retrieved candidates.
    pub retrieval_rank_of_gt: usize,
    /// Whether sequencing re-inserted the retrieved step at the missing slot.
    pub position_correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionMetrics<T> {
    pub mrr: T,
    pub top1: T,
    pub mrsr: T,
}

pub fn completion_metrics<T: Scalar>(results: &[CompletionResult]) -> Result<CompletionMetrics<T>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no completion results"));
    }
    if let Some(bad) = results.iter().find(|r| r.retrieval_rank_of_gt == 0) {
        return Err(Error::InvalidRank(bad.retrieval_rank_of_gt));
    }
    let recip = |r: &CompletionResult| T::ratio(1, r.retrieval_rank_of_gt);
    Ok(CompletionMetrics {
        mrr: mean(results.iter().map(recip)).expect("non-empty"),
        top1: T::ratio(
            results.iter().filter(|r| r.retrieval_rank_of_gt == 1).count(),
            results.len(),
        ),
        mrsr: mean(
            results
                .iter()
                .map(|r| if r.position_correct { recip(r) } else { T::zero() }),
        )
        .expect("non-empty"),
    })
}
