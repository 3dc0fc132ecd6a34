//! Frequency and range checks over many seeded plans.

use std::collections::BTreeSet;

use stepseq::plans::{
    derive_seed, plan_isp, plan_mlm, plan_pisp, plan_smrm, sample_objective, sample_subsequence, Objective, SmrmConfig,
};
use stepseq::Error;

/// `|rate - p| <= 3 * sqrt(p (1 - p) / n)`.
fn within_3se(hits: usize, n: usize, p: f64) -> bool {
    let rate = hits as f64 / n as f64;
    (rate - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn swap_rates_match_delta() {
    let n = 100_000;
    for delta in [0.2, 0.5, 0.8] {
        let isp = (0..n as u64)
            .filter(|&s| plan_isp(5, delta, s).unwrap().swapped)
            .count();
        assert!(within_3se(isp, n, delta), "ISP delta {delta}: {isp}/{n}");
        let pisp = (0..n as u64)
            .filter(|&s| plan_pisp(49, delta, s, None).unwrap().swapped)
            .count();
        assert!(within_3se(pisp, n, delta), "PISP delta {delta}: {pisp}/{n}");
    }
}

#[test]
fn smrm_failure_rate_is_negligible() {
    for num_images in 2..=5 {
        let cfg = SmrmConfig::new(49, num_images);
        assert_eq!(cfg.masks_per_image(), 7);
        let trials = 2000;
        let mut failures = 0;
        for seed in 0..trials {
            match plan_smrm(&cfg, seed) {
                Ok(plan) => assert!(plan.max_overlap() < cfg.overlap_bound()),
                Err(Error::ResampleFailure { .. }) => failures += 1,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(
            failures * 100 < trials as usize,
            "{failures} failures with {num_images} images"
        );
    }
}

#[test]
fn plans_are_deterministic_and_in_range() {
    for k in 0..10_000u64 {
        let seed = derive_seed(99, "plan-range", k);

        let w = sample_subsequence(6, seed).unwrap();
        assert_eq!(w, sample_subsequence(6, seed).unwrap());
        assert!(w.length >= 2 && w.start + w.length <= 6);

        let counts = [1, 7, 60, 0, 13];
        let mlm = plan_mlm(&counts, 0.15, seed).unwrap();
        assert_eq!(mlm, plan_mlm(&counts, 0.15, seed).unwrap());
        for (idx, &c) in mlm.per_step_masked_token_indices.iter().zip(&counts) {
            assert!(idx.iter().all(|&i| i < c));
            assert_eq!(idx.iter().collect::<BTreeSet<_>>().len(), idx.len());
        }

        let isp = plan_isp(5, 0.5, seed).unwrap();
        assert_eq!(isp, plan_isp(5, 0.5, seed).unwrap());
        assert_eq!(isp.swapped, isp.pair.is_some());
        if let Some((i, j)) = isp.pair {
            assert!(i < j && j < 5);
        }

        let pisp = plan_pisp(49, 0.5, seed, None).unwrap();
        assert_eq!(pisp, plan_pisp(49, 0.5, seed, None).unwrap());
        if pisp.swapped {
            assert!((1..=49).contains(&pisp.m));
            for list in [&pisp.source_patches, &pisp.target_patches] {
                assert_eq!(list.len(), pisp.m);
                assert!(list.iter().all(|&p| p < 49));
                assert_eq!(list.iter().collect::<BTreeSet<_>>().len(), pisp.m);
            }
        }

        if k % 10 == 0 {
            let cfg = SmrmConfig::new(49, 3);
            let smrm = plan_smrm(&cfg, seed).unwrap();
            assert_eq!(smrm, plan_smrm(&cfg, seed).unwrap());
            assert!(smrm
                .masked_positions
                .iter()
                .all(|d| d.len() == 7 && d.iter().all(|&p| p < 49)));
            let vocab: BTreeSet<_> = smrm.candidate_vocabulary.iter().collect();
            assert_eq!(vocab.len(), 21);
            for order in &smrm.per_position_candidate_order {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..21).collect::<Vec<_>>());
            }
        }
    }
}

#[test]
fn objective_frequencies_are_uniform() {
    let n = 300_000;
    let mut counts = [0usize; 3];
    for s in 0..n as u64 {
        let o = sample_objective(derive_seed(5, "batch", s));
        counts[Objective::ALL.iter().position(|&x| x == o).unwrap()] += 1;
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.005, "{counts:?}");
    }
}
