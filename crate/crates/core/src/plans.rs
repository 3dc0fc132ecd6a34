//! Seeded corruption plans for sequence-aware pretraining.
//!
//! Every generator is a pure function of its inputs and a 64-bit seed and returns index
//! schedules only: which tokens to mask, which images or patches to swap, which patches to
//! mask and how to shuffle the candidate list. Executing a plan (zeroing tensors, computing
//! losses) is left to the training stack that consumes it.
//!
//! Randomness comes from ChaCha8 seeded with [`SeedableRng::seed_from_u64`], and all range
//! draws go through fixed-width integer types, so plans are identical across platforms.

use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type PlanRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> PlanRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-instance seed derived from `(master_seed, instance_id, batch_index)`, independent of
/// scheduling order.
pub fn derive_seed(master_seed: u64, instance_id: &str, batch_index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((instance_id.len() as u64).to_le_bytes());
    h.update(instance_id.as_bytes());
    h.update(batch_index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

fn below<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    rng.gen_range(0..n as u64) as usize
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// A contiguous window of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub length: usize,
}

/// Window length uniform in `2..=n`, start uniform among the valid starts.
pub fn sample_subsequence(n: usize, seed: u64) -> Result<Window> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "subsequence sampling needs n >= 2, found {n}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let length = 2 + below(&mut rng, n - 1);
    let start = below(&mut rng, n - length + 1);
    Ok(Window { start, length })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlmPlan {
    /// Sorted token indices per step; empty for steps without tokens.
    pub per_step_masked_token_indices: Vec<Vec<usize>>,
}

/// Masks `max(1, round(rate * token_count))` tokens in every step, without replacement.
pub fn plan_mlm(token_counts: &[usize], rate: f64, seed: u64) -> Result<MlmPlan> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(format!("mask rate {rate} outside (0, 1)")));
    }
    let mut rng = rng_from_seed(seed);
    let per_step = token_counts
        .iter()
        .enumerate()
        .map(|(step, &count)| {
            if count == 0 {
                log::warn!("step {step} has no tokens; nothing to mask");
                return Vec::new();
            }
            let k = ((rate * count as f64).round() as usize).clamp(1, count);
            let mut picked = index::sample(&mut rng, count, k).into_vec();
            picked.sort_unstable();
            picked
        })
        .collect();
    Ok(MlmPlan {
        per_step_masked_token_indices: per_step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapLabel {
    Ordered,
    Swapped,
}

/// Whole-image swap between two sequence positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapPlan {
    pub swapped: bool,
    /// `(i, j)` with `i < j`.
    pub pair: Option<(usize, usize)>,
    pub label: SwapLabel,
}

/// With probability `delta` swaps the images of a pair drawn uniformly from all `C(len, 2)`.
pub fn plan_isp(seq_len: usize, delta: f64, seed: u64) -> Result<SwapPlan> {
    if seq_len < 2 {
        return Err(Error::InvalidSize(format!(
            "swapping needs at least 2 items, found {seq_len}"
        )));
    }
    check_probability("delta", delta)?;
    let mut rng = rng_from_seed(seed);
    if rng.gen::<f64>() >= delta {
        return Ok(SwapPlan {
            swapped: false,
            pair: None,
            label: SwapLabel::Ordered,
        });
    }
    // unrank k over pairs (0,1), (0,2), ..., (1,2), ...
    let mut k = below(&mut rng, seq_len * (seq_len - 1) / 2);
    let mut i = 0;
    while k >= seq_len - 1 - i {
        k -= seq_len - 1 - i;
        i += 1;
    }
    Ok(SwapPlan {
        swapped: true,
        pair: Some((i, i + 1 + k)),
        label: SwapLabel::Swapped,
    })
}

/// Patch-level swap between two images cut into `w` patches each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSwapPlan {
    pub swapped: bool,
    /// Number of swapped patches; 0 when nothing is swapped.
    pub m: usize,
    /// Patch indices in the first image; `source_patches[k]` swaps with `target_patches[k]`.
    pub source_patches: Vec<usize>,
    pub target_patches: Vec<usize>,
}

/// With probability `delta`, draws `M` uniform in `1..=w` (or uses `forced_m`) and samples `M`
/// distinct patches in each image independently.
pub fn plan_pisp(w: usize, delta: f64, seed: u64, forced_m: Option<usize>) -> Result<PatchSwapPlan> {
    if w == 0 {
        return Err(Error::InvalidParameter("patches per image must be at least 1".into()));
    }
    check_probability("delta", delta)?;
    if let Some(m) = forced_m {
        if m == 0 || m > w {
            return Err(Error::InvalidParameter(format!("M = {m} outside 1..={w}")));
        }
    }
    let mut rng = rng_from_seed(seed);
    if rng.gen::<f64>() >= delta {
        return Ok(PatchSwapPlan {
            swapped: false,
            m: 0,
            source_patches: Vec::new(),
            target_patches: Vec::new(),
        });
    }
    let m = match forced_m {
        Some(m) => m,
        None => 1 + below(&mut rng, w),
    };
    let source_patches = index::sample(&mut rng, w, m).into_vec();
    let target_patches = index::sample(&mut rng, w, m).into_vec();
    Ok(PatchSwapPlan {
        swapped: true,
        m,
        source_patches,
        target_patches,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMaskPlan {
    /// Sorted masked patch indices per image, all of equal size.
    pub masked_positions: Vec<Vec<usize>>,
    /// Every masked `(image, patch)` slot, image-major.
    pub candidate_vocabulary: Vec<(usize, usize)>,
    /// For each entry of the vocabulary (as a masked position), a shuffle of vocabulary indices.
    pub per_position_candidate_order: Vec<Vec<usize>>,
}

impl RegionMaskPlan {
    /// Largest pairwise intersection between masked sets.
    pub fn max_overlap(&self) -> usize {
        let sets: Vec<BTreeSet<usize>> = self
            .masked_positions
            .iter()
            .map(|d| d.iter().copied().collect())
            .collect();
        let mut worst = 0;
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                worst = worst.max(sets[i].intersection(&sets[j]).count());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmrmConfig {
    pub w: usize,
    pub num_images: usize,
    /// Fraction of patches masked per image.
    pub x: f64,
    /// Resampling budget per image.
    pub max_attempts: usize,
}

impl SmrmConfig {
    pub fn new(w: usize, num_images: usize) -> Self {
        Self {
            w,
            num_images,
            x: 0.15,
            max_attempts: 1000,
        }
    }

    /// `max(1, floor(x * w))`.
    pub fn masks_per_image(&self) -> usize {
        ((self.x * self.w as f64).floor() as usize).max(1)
    }

    /// Pairwise overlaps must stay strictly below `ceil(k / 2)`.
    pub fn overlap_bound(&self) -> usize {
        self.masks_per_image().div_ceil(2)
    }
}

/// Masks the same number of patches in every image, keeping each pairwise overlap below half,
/// and emits a candidate shuffle per masked position.
pub fn plan_smrm(config: &SmrmConfig, seed: u64) -> Result<RegionMaskPlan> {
    let SmrmConfig {
        w,
        num_images,
        x,
        max_attempts,
    } = *config;
    if num_images < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 images, found {num_images}"
        )));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter(format!("mask fraction {x} outside (0, 1]")));
    }
    if max_attempts == 0 {
        return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
    }
    let k = config.masks_per_image();
    let bound = config.overlap_bound();
    if k > w {
        return Err(Error::InfeasiblePlan(format!("{k} masks per image exceed {w} patches")));
    }
    // two k-subsets of w patches share at least 2k - w of them
    if (2 * k).saturating_sub(w) >= bound {
        return Err(Error::InfeasiblePlan(format!(
            "any two {k}-subsets of {w} patches overlap in at least {} (bound < {bound})",
            2 * k - w
        )));
    }
    if bound == 1 && k * num_images > w {
        return Err(Error::InfeasiblePlan(format!(
            "{num_images} disjoint sets of {k} patches do not fit in {w}"
        )));
    }

    let mut rng = rng_from_seed(seed);
    let mut sets: Vec<BTreeSet<usize>> = Vec::with_capacity(num_images);
    for image in 0..num_images {
        let mut best_overlap = usize::MAX;
        let mut accepted = None;
        for _ in 0..max_attempts {
            let cand: BTreeSet<usize> = index::sample(&mut rng, w, k).into_iter().collect();
            let worst = sets.iter().map(|s| s.intersection(&cand).count()).max().unwrap_or(0);
            if worst < bound {
                accepted = Some(cand);
                break;
            }
            best_overlap = best_overlap.min(worst);
        }
        match accepted {
            Some(s) => sets.push(s),
            None => {
                return Err(Error::ResampleFailure {
                    image,
                    attempts: max_attempts,
                    best_overlap,
                    bound,
                })
            }
        }
    }

    let candidate_vocabulary: Vec<(usize, usize)> = sets
        .iter()
        .enumerate()
        .flat_map(|(img, s)| s.iter().map(move |&p| (img, p)))
        .collect();
    let per_position_candidate_order = (0..candidate_vocabulary.len())
        .map(|_| {
            let mut order: Vec<usize> = (0..candidate_vocabulary.len()).collect();
            order.shuffle(&mut rng);
            order
        })
        .collect();
    Ok(RegionMaskPlan {
        masked_positions: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        candidate_vocabulary,
        per_position_candidate_order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Objective {
    Isp,
    Pisp,
    Smrm,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Isp, Objective::Pisp, Objective::Smrm];
}

/// Turn-taking objective for one mini-batch, uniform over ISP, PISP and SMRM.
pub fn sample_objective(seed: u64) -> Objective {
    let mut rng = rng_from_seed(seed);
    Objective::ALL[below(&mut rng, 3)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsequence_examples() {
        for seed in 0..50 {
            assert_eq!(sample_subsequence(2, seed).unwrap(), Window { start: 0, length: 2 });
            let w = sample_subsequence(7, seed).unwrap();
            assert!(w.length >= 2 && w.start + w.length <= 7);
        }
        assert_eq!(sample_subsequence(5, 9).unwrap(), sample_subsequence(5, 9).unwrap());
        assert!(matches!(sample_subsequence(1, 0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn subsequence_length_frequencies() {
        let draws = 100_000u64;
        let mut counts = [0usize; 6];
        for seed in 0..draws {
            counts[sample_subsequence(5, seed).unwrap().length] += 1;
        }
        for (len, &c) in counts.iter().enumerate().skip(2) {
            let f = c as f64 / draws as f64;
            assert!((f - 0.25).abs() < 0.02, "length {len}: {f}");
        }
    }

    #[test]
    fn mlm_examples() {
        let plan = plan_mlm(&[60, 60], 0.15, 3).unwrap();
        assert!(plan.per_step_masked_token_indices.iter().all(|s| s.len() == 9));
        assert!(plan.per_step_masked_token_indices.iter().flatten().all(|&i| i < 60));
        let tiny = plan_mlm(&[1, 1], 0.15, 3).unwrap();
        assert_eq!(tiny.per_step_masked_token_indices, vec![vec![0], vec![0]]);
        assert_eq!(
            plan_mlm(&[40, 7], 0.15, 11).unwrap(),
            plan_mlm(&[40, 7], 0.15, 11).unwrap()
        );
        let skipped = plan_mlm(&[0, 10], 0.15, 1).unwrap();
        assert!(skipped.per_step_masked_token_indices[0].is_empty());
        assert!(plan_mlm(&[10], 1.0, 1).is_err());
    }

    #[test]
    fn isp_examples() {
        for seed in 0..100 {
            assert_eq!(plan_isp(5, 0.0, seed).unwrap().label, SwapLabel::Ordered);
            let p = plan_isp(2, 1.0, seed).unwrap();
            assert_eq!((p.swapped, p.pair), (true, Some((0, 1))));
        }
        assert!(plan_isp(1, 0.5, 0).is_err());
        assert!(plan_isp(3, 1.5, 0).is_err());
    }

    #[test]
    fn isp_pairs_cover_all_with_equal_frequency() {
        let mut counts = std::collections::BTreeMap::new();
        let mut swapped = 0usize;
        let draws = 100_000u64;
        for seed in 0..draws {
            let p = plan_isp(5, 0.5, seed).unwrap();
            assert_eq!(p.swapped, p.pair.is_some());
            if let Some((i, j)) = p.pair {
                assert!(i < j && j < 5);
                *counts.entry((i, j)).or_insert(0usize) += 1;
                swapped += 1;
            }
        }
        assert!((swapped as f64 / draws as f64 - 0.5).abs() < 0.005);
        assert_eq!(counts.len(), 10);
        let f01 = counts[&(0, 1)] as f64 / swapped as f64;
        assert!((f01 - 0.1).abs() < 0.01, "{f01}");
    }

    #[test]
    fn pisp_examples() {
        let p = plan_pisp(4, 1.0, 5, Some(2)).unwrap();
        assert_eq!((p.m, p.source_patches.len(), p.target_patches.len()), (2, 2, 2));
        assert_ne!(p.source_patches[0], p.source_patches[1]);
        for seed in 0..200 {
            let p = plan_pisp(49, 1.0, seed, None).unwrap();
            assert!((1..=49).contains(&p.m));
            assert!(p.source_patches.iter().chain(&p.target_patches).all(|&i| i < 49));
            let distinct: BTreeSet<_> = p.target_patches.iter().collect();
            assert_eq!(distinct.len(), p.m);
        }
        let none = plan_pisp(4, 0.0, 1, None).unwrap();
        assert!(!none.swapped && none.source_patches.is_empty());
        assert!(plan_pisp(0, 0.5, 0, None).is_err());
        assert!(plan_pisp(4, 0.5, 0, Some(5)).is_err());
    }

    #[test]
    fn smrm_examples() {
        let cfg = SmrmConfig::new(49, 4);
        assert_eq!(cfg.masks_per_image(), 7);
        let plan = plan_smrm(&cfg, 21).unwrap();
        assert!(plan.masked_positions.iter().all(|d| d.len() == 7));
        assert_eq!(plan.candidate_vocabulary.len(), 28);
        assert_eq!(plan.per_position_candidate_order.len(), 28);
        assert!(plan.max_overlap() <= 3);
        for order in &plan.per_position_candidate_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..28).collect::<Vec<_>>());
        }

        let tiny = plan_smrm(&SmrmConfig::new(2, 2), 0).unwrap();
        assert_eq!(
            tiny.masked_positions.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![1, 1]
        );
        assert_eq!(tiny.max_overlap(), 0);
    }

    #[test]
    fn smrm_infeasible_cases() {
        assert!(matches!(
            plan_smrm(&SmrmConfig::new(2, 3), 0),
            Err(Error::InfeasiblePlan(_))
        ));
        let full = SmrmConfig {
            x: 1.0,
            ..SmrmConfig::new(10, 2)
        };
        assert!(matches!(plan_smrm(&full, 0), Err(Error::InfeasiblePlan(_))));
        let tight = SmrmConfig {
            x: 0.5,
            max_attempts: 1,
            ..SmrmConfig::new(12, 6)
        };
        let err = (0..50).find_map(|s| plan_smrm(&tight, s).err());
        assert!(matches!(err, Some(Error::ResampleFailure { .. })));
    }

    #[test]
    fn objective_sampler() {
        assert_eq!(sample_objective(77), sample_objective(77));
        let mut counts = [0usize; 3];
        for seed in 0..30_000u64 {
            counts[sample_objective(seed) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c > 9_000));
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(1, "m1", 0);
        assert_eq!(a, derive_seed(1, "m1", 0));
        assert_ne!(a, derive_seed(1, "m1", 1));
        assert_ne!(a, derive_seed(2, "m1", 0));
        assert_ne!(derive_seed(1, "m1", 10), derive_seed(1, "m11", 0));
    }
}
