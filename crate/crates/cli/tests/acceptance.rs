//! Acceptance checks. Each criterion prints one PASS/FAIL line with its runtime; the process
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepseq::agreement::{alt_order_iaa_instance, diff_vector, encode_relations, restrict, AnnotationSeries};
use stepseq::corpus::{
    category_key, majority_vote_references, split_by_category, Manifest, PredictionRecord, SplitSpec,
};
use stepseq::decoding::{decode_beam, decode_exhaustive, decode_topological, DecoderConfig, PairwiseMatrix};
use stepseq::metrics::{aggregate, evaluate_instance, kendall_tau, MetricReport, ReferencePolicy};
use stepseq::plans::{derive_seed, plan_isp, plan_smrm, sample_objective, Objective, SmrmConfig};
use stepseq::report::{evaluate_item, summarize, EvalItem, EvalOptions};
use stepseq::synthetic::{consistent_matrix, noisy_matrix, random_matrix, random_permutation, synthetic_manuals};
use stepseq::Permutation;

type Q = stepseq::Rational;

/// Failures collected while a criterion runs.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

/// Items in order, one-based, e.g. `seq("231")`.
fn seq(s: &str) -> Permutation {
    let items: Vec<usize> = s.bytes().map(|b| (b - b'1') as usize).collect();
    Permutation::from_sequence(&items).unwrap()
}

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn worked_encoding(c: &mut Checks) {
    for (order, expected) in [("123", "110100"), ("231", "001110"), ("132", "110001")] {
        let got = encode_relations(&seq(order)).unwrap().to_string();
        c.check(got == expected, || format!("R_{order}: expected {expected}, got {got}"));
    }
    let gt = seq("123");
    let d1 = diff_vector(&gt, &seq("132")).unwrap();
    let d2 = diff_vector(&gt, &seq("213")).unwrap();
    c.check(d1.to_string() == "000101", || format!("diff 132: got {d1}"));
    c.check(d2.to_string() == "101000", || format!("diff 213: got {d2}"));
    let (r1, r2, positions) = restrict(&d1, &d2).unwrap();
    let one_based: Vec<usize> = positions.iter().map(|k| k + 1).collect();
    c.check(one_based == [1, 3, 4, 6], || format!("positions: got {one_based:?}"));
    c.check(bits(&r1) == "0011", || {
        format!("restricted list 1: expected 0011, got {}", bits(&r1))
    });
    c.check(bits(&r2) == "0110", || {
        format!("restricted list 2: expected 0110, got {}", bits(&r2))
    });
}

fn kendall_oracle(c: &mut Checks) {
    let mut r = rng(2);
    for n in 2..=8usize {
        for _ in 0..1000 {
            let pred = random_permutation(n, &mut r);
            let gt = random_permutation(n, &mut r);
            // inversions of the predicted sequence relabelled by reference position
            let relabelled: Vec<usize> = pred.to_sequence().iter().map(|&item| gt.position(item)).collect();
            let mut inv = 0usize;
            for a in 0..n {
                for b in a + 1..n {
                    if relabelled[a] > relabelled[b] {
                        inv += 1;
                    }
                }
            }
            let oracle = 1.0 - 2.0 * inv as f64 / (n * (n - 1) / 2) as f64;
            let tau: f64 = kendall_tau(&pred, &gt).unwrap();
            c.check((tau - oracle).abs() <= 1e-12, || {
                format!("n={n} {pred} vs {gt}: {tau} != {oracle}")
            });
        }
    }
}

/// Log-score of an item sequence, written independently of the library's scorer.
fn oracle_score(m: &PairwiseMatrix<f64>, sequence: &[usize]) -> f64 {
    let mut s = 0.0;
    for a in 0..sequence.len() {
        for b in a + 1..sequence.len() {
            s += m.get(sequence[a], sequence[b]).max(1e-9).ln();
        }
    }
    s
}

fn sequences(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            if !cur.contains(&i) {
                cur.push(i);
                go(n, cur, out);
                cur.pop();
            }
        }
    }
    go(n, &mut cur, &mut out);
    out
}

fn prediction_line(id: usize, p: &Permutation) -> String {
    serde_json::to_string(&PredictionRecord {
        instance_id: format!("i{id}"),
        predicted: p.clone(),
    })
    .unwrap()
}

fn decoder_exactness(c: &mut Checks) {
    let cfg = DecoderConfig::default();
    let all = sequences(5);
    let mut r = rng(3);
    for k in 0..500 {
        let m = random_matrix::<f64, _>(5, &mut r).unwrap();
        let best = all
            .iter()
            .map(|s| (oracle_score(&m, s), s))
            .fold(None::<(f64, &Vec<usize>)>, |acc, (v, s)| match acc {
                Some((bv, _)) if bv >= v => acc,
                _ => Some((v, s)),
            })
            .unwrap();
        let e = decode_exhaustive(&m, &cfg).unwrap();
        c.check(&e.predicted.to_sequence() == best.1, || {
            format!(
                "matrix {k}: exhaustive {:?}, enumeration {:?}",
                e.predicted.to_sequence(),
                best.1
            )
        });
        for width in [120, 200] {
            let b = decode_beam(&m, width, &cfg).unwrap();
            c.check(
                prediction_line(k, &b.predicted) == prediction_line(k, &e.predicted),
                || format!("matrix {k}: beam {width} differs from exhaustive"),
            );
        }
    }
    let mut hits = [0usize; 3];
    for _ in 0..500 {
        let truth = random_permutation(5, &mut r);
        let m = consistent_matrix::<f64>(&truth, r.gen_range(0.55..=1.0)).unwrap();
        hits[0] += usize::from(decode_exhaustive(&m, &cfg).unwrap().predicted == truth);
        hits[1] += usize::from(decode_topological(&m, &cfg).unwrap().predicted == truth);
        hits[2] += usize::from(decode_beam(&m, 4, &cfg).unwrap().predicted == truth);
    }
    c.check(hits == [500; 3], || {
        format!("consistent matrices: exact recoveries {hits:?} of 500")
    });
}

fn noise_sweep(c: &mut Checks) {
    let cfg = DecoderConfig::default();
    let qs = [0.55, 0.65, 0.75, 0.85, 0.95, 1.0];
    let mut pmr = Vec::new();
    for &q in &qs {
        let mut hits = 0;
        for k in 0..500u64 {
            // the same draws at every q, so flipped pair sets are nested as q grows
            let mut r = rng(derive_seed(4, "sweep", k));
            let truth = random_permutation(5, &mut r);
            let m = noisy_matrix::<f64, _>(&truth, q, &mut r).unwrap();
            hits += usize::from(decode_exhaustive(&m, &cfg).unwrap().predicted == truth);
        }
        pmr.push(hits as f64 / 500.0);
    }
    println!("    noise sweep PMR by q {qs:?}: {pmr:?}");
    c.check(pmr.windows(2).all(|w| w[0] <= w[1]), || {
        format!("PMR not monotone: {pmr:?}")
    });
    c.check(pmr[pmr.len() - 1] == 1.0, || {
        format!("PMR at q=1.0 is {}", pmr[pmr.len() - 1])
    });
}

fn random_baseline(c: &mut Checks) {
    let mut r = rng(5);
    let reports: Vec<MetricReport<f64>> = (0..10_000)
        .map(|_| {
            let gt = random_permutation(5, &mut r);
            let pred = random_permutation(5, &mut r);
            evaluate_instance(&pred, &gt).unwrap()
        })
        .collect();
    let agg = aggregate(&reports).unwrap();
    println!("    random baseline: Dist {:.3}, tau {:.4}", agg.dist, agg.tau);
    c.check((agg.dist - 8.0).abs() <= 0.3, || format!("mean Dist {}", agg.dist));
    c.check(agg.tau.abs() <= 0.03, || format!("mean tau {}", agg.tau));
}

/// Swaps the items at sequence positions `k` and `k + 1`.
fn adjacent_swap(p: &Permutation, k: usize) -> Permutation {
    let mut s = p.to_sequence();
    s.swap(k, k + 1);
    Permutation::from_sequence(&s).unwrap()
}

fn multi_reference_dominance(c: &mut Checks) {
    let cfg = DecoderConfig::default();
    let mut r = rng(6);
    let mut items = Vec::new();
    for k in 0..400 {
        let gt = random_permutation(5, &mut r);
        let alt = adjacent_swap(&gt, r.gen_range(0..4));
        // a quarter of the instances get an alternative backed by two of three workers; the
        // rest get two different stray orders, neither reaching a majority
        let submissions: Vec<Vec<Permutation>> = if k % 4 == 0 {
            vec![vec![alt.clone()], vec![alt.clone()], vec![]]
        } else {
            let other = adjacent_swap(&gt, 0);
            vec![vec![adjacent_swap(&gt, 3)], vec![other], vec![]]
        };
        let series: Vec<AnnotationSeries> = submissions
            .into_iter()
            .enumerate()
            .map(|(w, o)| {
                let o = o.into_iter().filter(|p| *p != gt).collect();
                AnnotationSeries::new(format!("w{w}"), o).unwrap()
            })
            .collect();
        let references = majority_vote_references(&gt, &series).unwrap();
        let m = noisy_matrix::<f64, _>(&gt, 0.7, &mut r).unwrap();
        let predicted = decode_topological(&m, &cfg).unwrap().predicted;
        items.push(EvalItem {
            prediction: PredictionRecord {
                instance_id: format!("i{k:03}"),
                predicted,
            },
            references,
        });
    }
    let single_opts = EvalOptions::default();
    let multi_opts = EvalOptions {
        multi_reference: true,
        policy: ReferencePolicy::PerMetric,
        ..EvalOptions::default()
    };
    let single: Vec<_> = items.iter().map(|i| evaluate_item(i, &single_opts).unwrap()).collect();
    let multi: Vec<_> = items.iter().map(|i| evaluate_item(i, &multi_opts).unwrap()).collect();
    let dominates = |m: &MetricReport<f64>, s: &MetricReport<f64>| {
        m.acc >= s.acc && m.pmr >= s.pmr && m.lq >= s.lq && m.lr >= s.lr && m.tau >= s.tau && m.dist <= s.dist
    };
    for (s, m) in single.iter().zip(&multi) {
        c.check(dominates(&m.report, &s.report), || {
            format!("{}: {:?} vs {:?}", s.instance_id, m.report, s.report)
        });
    }
    let ss = summarize(&items, &single).unwrap();
    let ms = summarize(&items, &multi).unwrap();
    c.check(ss.references.multi == 100, || {
        format!("{} instances with alternatives", ss.references.multi)
    });
    for ((label, a), (_, b)) in ss.rows.iter().zip(&ms.rows) {
        let ok = b.acc >= a.acc && b.pmr >= a.pmr && b.lq >= a.lq && b.lr >= a.lr && b.tau >= a.tau && b.dist <= a.dist;
        c.check(ok, || format!("{label}: multi {b:?} vs single {a:?}"));
        if label == "Multi." {
            println!(
                "    Multi. subset: PMR {:.2} -> {:.2}, tau {:.3} -> {:.3}, Dist {:.3} -> {:.3}",
                100.0 * a.pmr,
                100.0 * b.pmr,
                a.tau,
                b.tau,
                a.dist,
                b.dist
            );
            c.check(b.pmr > a.pmr, || "alternatives never matched a prediction".into());
        }
    }
}

fn plan_statistics(c: &mut Checks) {
    let n = 100_000u64;
    let swapped = (0..n).filter(|&s| plan_isp(5, 0.5, s).unwrap().swapped).count();
    let rate = swapped as f64 / n as f64;
    c.check((rate - 0.5).abs() <= 0.005, || format!("ISP swapped rate {rate}"));

    for num_images in 2..=5 {
        let cfg = SmrmConfig::new(49, num_images);
        for seed in 0..500 {
            match plan_smrm(&cfg, seed) {
                Ok(plan) => {
                    c.check(plan.masked_positions.iter().all(|d| d.len() == 7), || {
                        format!(
                            "seed {seed}: mask sizes {:?}",
                            plan.masked_positions.iter().map(Vec::len).collect::<Vec<_>>()
                        )
                    });
                    c.check(plan.max_overlap() <= 3, || {
                        format!("seed {seed}: overlap {}", plan.max_overlap())
                    });
                }
                Err(e) => c.check(false, || format!("seed {seed}, {num_images} images: {e}")),
            }
        }
    }

    let draws = 300_000u64;
    let mut counts: BTreeMap<Objective, usize> = BTreeMap::new();
    for s in 0..draws {
        *counts.entry(sample_objective(derive_seed(7, "batch", s))).or_default() += 1;
    }
    for o in Objective::ALL {
        let f = counts.get(&o).copied().unwrap_or(0) as f64 / draws as f64;
        c.check((f - 1.0 / 3.0).abs() <= 0.005, || format!("{o:?} frequency {f}"));
    }
}

fn alternative_agreement_fixtures(c: &mut Checks) {
    let gt = seq("123");
    let series = |w: &str, orders: &[&str]| AnnotationSeries::new(w, orders.iter().map(|o| seq(o)).collect()).unwrap();
    let cases = [
        (
            "perfect pair",
            vec![series("a", &["132"]), series("b", &["132"])],
            Q::from_integer(1),
        ),
        (
            "worked pair",
            vec![series("a", &["132"]), series("b", &["213"])],
            Q::from_integer(0),
        ),
        (
            "mixed series",
            vec![series("a", &["132"]), series("b", &["132", "213"])],
            Q::new(1, 2),
        ),
    ];
    for (name, s, expected) in cases {
        let got: Q = alt_order_iaa_instance(&s, &gt).unwrap();
        c.check(got == expected, || format!("{name}: expected {expected}, got {got}"));
    }
}

/// 10k manuals whose level-3 categories have skewed sizes.
fn skewed_manifest(seed: u64) -> Manifest {
    let mut r = rng(seed);
    let mut manuals = synthetic_manuals(100, 1, 100, 3);
    for m in &mut manuals {
        let u: f64 = r.gen();
        let leaf = (300.0 * u * u) as usize;
        m.category_path = vec![
            format!("top-{}", leaf / 60),
            format!("mid-{}", leaf / 12),
            format!("leaf-{leaf}"),
        ];
    }
    manuals.shuffle(&mut r);
    Manifest::new(manuals).unwrap()
}

fn split_disjointness(c: &mut Checks) {
    let manifest = skewed_manifest(9);
    let total = manifest.manuals.len() as f64;
    let fractions = [0.8, 0.1, 0.1];
    for seed in 0..20 {
        let split = split_by_category(
            &manifest,
            &SplitSpec {
                level: 3,
                fractions,
                seed,
            },
        )
        .unwrap();
        let cats = |ids: &BTreeSet<String>| -> BTreeSet<String> {
            ids.iter()
                .map(|id| category_key(&manifest.get(id).unwrap().category_path, 3))
                .collect()
        };
        let (train, dev, test) = (cats(&split.train), cats(&split.dev), cats(&split.test));
        c.check(
            train.is_disjoint(&test) && train.is_disjoint(&dev) && dev.is_disjoint(&test),
            || format!("seed {seed}: category sets overlap"),
        );
        for (part, f) in split.parts().iter().zip(fractions) {
            let share = part.len() as f64 / total;
            c.check((share - f).abs() <= 0.1 * f, || {
                format!("seed {seed}: share {share} for fraction {f}")
            });
        }
    }
}

/// Every file in `dir`, with the timestamp removed from metadata.
fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        let mut text = std::fs::read_to_string(&entry).unwrap();
        if rel.ends_with("metadata.json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
            v.as_object_mut().unwrap().remove("timestamp");
            text = v.to_string();
        }
        out.insert(rel, text);
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_stepseq"))
        .current_dir(dir)
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "stepseq {args:?} exited with {status}");
}

/// scramble, simulate, decode with each algorithm, evaluate, report; paths relative to `root`.
fn pipeline(root: &Path, manifest: &str, jobs: &str) -> BTreeMap<String, String> {
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(root.join("manifest.jsonl"), manifest).unwrap();
    let run = |args: &[&str]| {
        let mut full = vec!["--jobs", jobs];
        full.extend_from_slice(args);
        run_cli(root, &full);
    };
    run(&[
        "--out",
        "scramble",
        "scramble",
        "--manifest",
        "manifest.jsonl",
        "--seed",
        "17",
        "--exclude-identity",
    ]);
    run(&[
        "--out",
        "simulate",
        "simulate",
        "--references",
        "scramble/references.jsonl",
        "--seed",
        "18",
        "--q",
        "0.75",
    ]);
    for alg in ["exhaustive", "topo", "beam"] {
        let (dec, eval) = (format!("decode-{alg}"), format!("eval-{alg}"));
        let preds = format!("{dec}/predictions.jsonl");
        run(&[
            "--out",
            &dec,
            "decode",
            "--matrices",
            "simulate/matrices.jsonl",
            "--algorithm",
            alg,
            "--beam-width",
            "6",
        ]);
        run(&[
            "--out",
            &eval,
            "evaluate",
            "--predictions",
            &preds,
            "--references",
            "scramble/references.jsonl",
        ]);
    }
    run(&[
        "--out",
        "report",
        "report",
        "--input",
        "exhaustive=eval-exhaustive/summary.csv",
        "--input",
        "topo=eval-topo/summary.csv",
        "--input",
        "beam=eval-beam/summary.csv",
    ]);
    snapshot(root)
}

fn determinism(c: &mut Checks) {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = Manifest::new(synthetic_manuals(4, 3, 5, 6)).unwrap().to_jsonl();
    let runs: Vec<(&str, BTreeMap<String, String>)> = [
        ("serial", "1"),
        ("serial again", "1"),
        ("parallel", "4"),
        ("parallel again", "0"),
    ]
    .iter()
    .enumerate()
    .map(|(k, (name, jobs))| (*name, pipeline(&tmp.path().join(format!("run{k}")), &manifest, jobs)))
    .collect();
    let (_, base) = &runs[0];
    c.check(base.len() >= 20, || format!("only {} output files", base.len()));
    for (name, files) in &runs[1..] {
        c.check(files.keys().eq(base.keys()), || format!("{name}: different file set"));
        for (path, text) in files {
            c.check(base.get(path) == Some(text), || format!("{name}: {path} differs"));
        }
    }
}

type Criterion = (u32, &'static str, u64, fn(&mut Checks));

const CRITERIA: [Criterion; 10] = [
    (1, "worked encoding example", 1, worked_encoding),
    (2, "Kendall tau oracle", 5, kendall_oracle),
    (3, "decoder exactness", 30, decoder_exactness),
    (4, "noise sweep", 120, noise_sweep),
    (5, "random-baseline magnitude", 10, random_baseline),
    (6, "multi-reference dominance", 10, multi_reference_dominance),
    (7, "plan statistics", 30, plan_statistics),
    (
        8,
        "alternative-order agreement fixtures",
        1,
        alternative_agreement_fixtures,
    ),
    (9, "split disjointness", 5, split_disjointness),
    (10, "determinism", 60, determinism),
];

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, budget, run) in CRITERIA {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let mut checks = Checks::default();
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        let elapsed = start.elapsed();
        if let Err(panic) = outcome {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            checks.failures.push(format!("panicked: {msg}"));
        }
        if elapsed > Duration::from_secs(budget) {
            checks
                .failures
                .push(format!("took {:.2} s, budget {budget} s", elapsed.as_secs_f64()));
        }
        let status = if checks.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name} ({:.2} s of {budget} s)",
            elapsed.as_secs_f64()
        );
        for f in checks.failures.iter().take(5) {
            println!("    {f}");
        }
        if checks.failures.len() > 5 {
            println!("    ... {} more", checks.failures.len() - 5);
        }
        if !checks.failures.is_empty() {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
