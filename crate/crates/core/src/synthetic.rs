//! Seeded generators for synthetic matrices, orders and manifests.
//!
//! Used by the simulation command, the property tests and the acceptance suite.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::decoding::{MatrixMode, PairwiseMatrix};
use crate::error::{Error, Result};
use crate::model::{Manual, Permutation, Source, Step};
use crate::scalar::Real;

/// Uniformly random permutation of `0..n`.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    Permutation::new(v).expect("shuffle of 0..n")
}

fn check_confidence(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("confidence {q} outside [0, 1]")));
    }
    Ok(())
}

/// Probability matrix agreeing with `truth` on every pair with confidence `q`.
pub fn consistent_matrix<T: Real>(truth: &Permutation, q: f64) -> Result<PairwiseMatrix<T>> {
    check_confidence(q)?;
    PairwiseMatrix::from_fn(truth.len(), MatrixMode::Probability, |i, j| {
        T::from_f64_lossy(if truth.precedes(i, j) { q } else { 1.0 - q })
    })
}

/// Probability matrix where each unordered pair independently keeps the true direction with
/// probability `q` and is flipped otherwise; the favoured direction carries probability `q`.
///
/// Pairs are visited in `(i, j)`, `i < j` order with one uniform draw each, so runs sharing a
/// seed flip nested pair sets as `q` grows.
pub fn noisy_matrix<T: Real, R: Rng + ?Sized>(truth: &Permutation, q: f64, rng: &mut R) -> Result<PairwiseMatrix<T>> {
    check_confidence(q)?;
    let n = truth.len();
    let mut p = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let flipped = rng.gen::<f64>() >= q;
            let forward = truth.precedes(i, j) != flipped;
            let v = if forward { q } else { 1.0 - q };
            p[i * n + j] = T::from_f64_lossy(v);
            p[j * n + i] = T::from_f64_lossy(1.0 - v);
        }
    }
    PairwiseMatrix::new(n, p, MatrixMode::Probability)
}

/// Probability matrix with `p[i][j]` uniform in `[0, 1)` and `p[j][i] = 1 - p[i][j]`.
pub fn random_matrix<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PairwiseMatrix<T>> {
    let mut p = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.gen();
            p[i * n + j] = T::from_f64_lossy(v);
            p[j * n + i] = T::from_f64_lossy(1.0 - v);
        }
    }
    PairwiseMatrix::new(n, p, MatrixMode::Probability)
}

/// Manuals spread over a `fanout^depth` category tree, `per_leaf` manuals under each leaf,
/// each with `steps` text-and-image steps.
pub fn synthetic_manuals(fanout: usize, depth: usize, per_leaf: usize, steps: usize) -> Vec<Manual> {
    let leaves = fanout.pow(depth as u32);
    let mut out = Vec::with_capacity(leaves * per_leaf);
    for leaf in 0..leaves {
        let mut path = Vec::with_capacity(depth);
        let mut rest = leaf;
        let mut digits = Vec::with_capacity(depth);
        for _ in 0..depth {
            digits.push(rest % fanout);
            rest /= fanout;
        }
        digits.reverse();
        for (level, _) in digits.iter().enumerate() {
            let name = digits[..=level]
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(".");
            path.push(format!("cat-{name}"));
        }
        for k in 0..per_leaf {
            let manual_id = format!("m{leaf:05}-{k:03}");
            out.push(Manual {
                manual_id: manual_id.clone(),
                goal: format!("Complete task {manual_id}"),
                source: Source::Wikihow,
                category_path: path.clone(),
                steps: (0..steps)
                    .map(|s| Step {
                        step_id: format!("s{s}"),
                        sentences: vec![format!("Do step {s} of {manual_id}.")],
                        token_count: 8,
                        image_refs: vec![format!("img/{manual_id}/{s}.jpg")],
                    })
                    .collect(),
                golden: false,
            });
        }
    }
    out
}
