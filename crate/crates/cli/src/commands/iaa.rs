use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use stepseq::agreement::{
    alt_order_iaa_instance, filter_workers, instance_kappa, worker_mean_iaa, AnnotationSeries, FilterMode, WorkerScore,
};
use stepseq::corpus::{majority_vote_references, reference_stats, ReferenceRecord, WorkerResponse};
use stepseq::metrics::accuracy;
use stepseq::{Error, Permutation};

use crate::output::{read_jsonl, Context};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Kappa over full pairwise-relation vectors.
    Standard,
    /// Agreement on alternative orders, relative to the authored order.
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Filter {
    /// Mean accuracy of each worker's submissions against the authored order.
    Accuracy,
    /// Mean pairwise agreement with the other workers.
    Iaa,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Worker responses (JSONL).
    #[arg(long)]
    pub annotations: PathBuf,

    #[arg(long, value_enum, default_value = "standard")]
    pub mode: Mode,

    /// Authored orders. Needed by the alternative mode and the accuracy filter; when given,
    /// majority-voted references are written as well.
    #[arg(long)]
    pub references: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub filter: Option<Filter>,

    /// Filter threshold. Defaults to 0.20 for the accuracy filter.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Fail on instances with fewer than two workers instead of skipping them.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Serialize)]
struct InstanceIaa {
    instance_id: String,
    workers: usize,
    iaa: Option<f64>,
}

#[derive(Debug, Serialize)]
struct FilterReport {
    filter: &'static str,
    threshold: f64,
    scores: BTreeMap<String, f64>,
    retained: Vec<String>,
    dropped: Vec<String>,
}

#[derive(Debug, Serialize)]
struct IaaReport {
    mode: &'static str,
    overall: f64,
    instances: usize,
    skipped: Vec<String>,
    per_instance: Vec<InstanceIaa>,
    per_worker: BTreeMap<String, f64>,
    filter: Option<FilterReport>,
}

/// Responses of one instance: the first-seen worker order is kept, and each worker's orders
/// are kept in submission order.
type Grouped = BTreeMap<String, Vec<(String, Vec<Permutation>)>>;

fn group(responses: &[WorkerResponse]) -> Grouped {
    let mut out: Grouped = BTreeMap::new();
    for r in responses {
        let workers = out.entry(r.instance_id.clone()).or_default();
        match workers.iter_mut().find(|(w, _)| *w == r.worker_id) {
            Some((_, orders)) => orders.push(r.submitted_order.clone()),
            None => workers.push((r.worker_id.clone(), vec![r.submitted_order.clone()])),
        }
    }
    out
}

/// Each worker's distinct submissions other than `gt`.
fn alternative_series(
    workers: &[(String, Vec<Permutation>)],
    gt: &Permutation,
) -> Result<Vec<AnnotationSeries>, Error> {
    workers
        .iter()
        .map(|(w, orders)| {
            let alts: Vec<Permutation> = orders.iter().filter(|o| *o != gt).cloned().collect();
            AnnotationSeries::new(w.clone(), alts)
        })
        .collect()
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let responses: Vec<WorkerResponse> = read_jsonl(&args.annotations, "annotations")?;
    if responses.is_empty() {
        return Err(CliError::core(
            format!("annotations {}", args.annotations.display()),
            Error::EmptyInput("no worker responses"),
        ));
    }
    for r in &responses {
        r.validate().map_err(CliError::ctx(format!(
            "response of worker `{}` on `{}`",
            r.worker_id, r.instance_id
        )))?;
    }
    let grouped = group(&responses);

    let references: Option<BTreeMap<String, ReferenceRecord>> = match &args.references {
        None => None,
        Some(path) => {
            let refs: Vec<ReferenceRecord> = read_jsonl(path, "references")?;
            Some(refs.into_iter().map(|r| (r.instance_id.clone(), r)).collect())
        }
    };
    if let Some(refs) = &references {
        let missing: Vec<String> = grouped.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
        if !missing.is_empty() {
            return Err(CliError::core(
                "matching annotations with references",
                Error::Alignment {
                    unmatched_predictions: missing,
                    unmatched_references: Vec::new(),
                },
            ));
        }
    }
    let need_refs = |what: &str| {
        references
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{what} needs --references")))
    };

    let ids: Vec<&String> = grouped.keys().collect();
    let (per_instance, per_worker) = match args.mode {
        Mode::Standard => {
            let firsts: Vec<Vec<(String, Permutation)>> = grouped
                .values()
                .map(|ws| ws.iter().map(|(w, o)| (w.clone(), o[0].clone())).collect())
                .collect();
            let values = ctx.map(&firsts, |ws| {
                let orders: Vec<Permutation> = ws.iter().map(|(_, o)| o.clone()).collect();
                score_or_skip(orders.len(), args.strict, || instance_kappa::<f64>(&orders))
            });
            let values = with_ids(values, &ids)?;
            let per_worker = worker_mean_iaa::<f64, _, _>(&firsts, |_, a, b| instance_kappa(&[a.clone(), b.clone()]))?;
            (values, per_worker)
        }
        Mode::Alternative => {
            let refs = need_refs("alternative mode")?;
            let gts: Vec<&Permutation> = ids.iter().map(|id| &refs[*id].original).collect();
            let series: Vec<Vec<(String, AnnotationSeries)>> = grouped
                .values()
                .zip(&gts)
                .map(|(ws, gt)| {
                    let s = alternative_series(ws, gt)?;
                    Ok(s.into_iter().map(|s| (s.worker_id.clone(), s)).collect())
                })
                .collect::<Result<_, Error>>()?;
            let indexed: Vec<usize> = (0..series.len()).collect();
            let values = ctx.map(&indexed, |&k| {
                let s: Vec<AnnotationSeries> = series[k].iter().map(|(_, s)| s.clone()).collect();
                score_or_skip(s.len(), args.strict, || alt_order_iaa_instance::<f64>(&s, gts[k]))
            });
            let values = with_ids(values, &ids)?;
            let per_worker = worker_mean_iaa::<f64, _, _>(&series, |k, a, b| {
                alt_order_iaa_instance(&[a.clone(), b.clone()], gts[k])
            })?;
            (values, per_worker)
        }
    };

    let mut skipped = Vec::new();
    let mut rows = Vec::with_capacity(ids.len());
    let mut scored = Vec::new();
    for ((id, workers), value) in grouped.iter().zip(&per_instance) {
        match value {
            Some(v) => scored.push(*v),
            None => skipped.push(id.clone()),
        }
        rows.push(InstanceIaa {
            instance_id: id.clone(),
            workers: workers.len(),
            iaa: *value,
        });
    }
    if scored.is_empty() {
        return Err(CliError::core(
            "",
            Error::EmptyInput("no instance has two or more workers"),
        ));
    }
    let overall = scored.iter().sum::<f64>() / scored.len() as f64;

    let filter = match args.filter {
        None => None,
        Some(Filter::Accuracy) => {
            let refs = need_refs("the accuracy filter")?;
            let mut per: BTreeMap<String, (f64, usize)> = BTreeMap::new();
            for r in &responses {
                let acc: f64 = accuracy(&r.submitted_order, &refs[&r.instance_id].original).map_err(CliError::ctx(
                    format!("response of worker `{}` on `{}`", r.worker_id, r.instance_id),
                ))?;
                let e = per.entry(r.worker_id.clone()).or_default();
                e.0 += acc;
                e.1 += 1;
            }
            let scores = per.into_iter().map(|(w, (s, c))| (w, s / c as f64)).collect();
            let threshold = args.threshold.unwrap_or(FilterMode::DEFAULT_ACCURACY_THRESHOLD);
            Some(apply_filter(
                scores,
                FilterMode::AccuracyQualification,
                "accuracy",
                threshold,
            )?)
        }
        Some(Filter::Iaa) => {
            let threshold = args
                .threshold
                .ok_or_else(|| CliError::Config("the iaa filter needs --threshold".into()))?;
            Some(apply_filter(
                per_worker.clone(),
                FilterMode::IaaThreshold,
                "iaa",
                threshold,
            )?)
        }
    };

    let mut csv = String::from("instance_id,workers,iaa\n");
    for r in &rows {
        let v = r.iaa.map(|v| format!("{v:.4}")).unwrap_or_default();
        csv.push_str(&format!("{},{},{v}\n", r.instance_id, r.workers));
    }
    let report = IaaReport {
        mode: match args.mode {
            Mode::Standard => "standard",
            Mode::Alternative => "alternative",
        },
        overall,
        instances: scored.len(),
        skipped,
        per_instance: rows,
        per_worker,
        filter,
    };

    let mut results =
        json!({ "overall": report.overall, "instances": report.instances, "skipped": report.skipped.len() });
    if let Some(refs) = &references {
        let voted = vote(refs, &grouped)?;
        let stats = reference_stats(voted.iter().map(|r| r.to_set()).collect::<Result<Vec<_>, _>>()?.iter());
        results["voted_references"] = json!(stats);
        ctx.write_jsonl("references_voted.jsonl", &voted)?;
    }
    ctx.write_json("iaa.json", &report)?;
    ctx.write("iaa_instances.csv", &csv)?;
    ctx.write_metadata(
        None,
        json!({
            "annotations": args.annotations,
            "references": args.references,
            "mode": report.mode,
            "filter": args.filter.map(|f| format!("{f:?}").to_lowercase()),
            "threshold": args.threshold,
            "strict": args.strict,
        }),
        results,
    )
}

fn score_or_skip(
    workers: usize,
    strict: bool,
    f: impl FnOnce() -> Result<f64, Error>,
) -> Result<Option<f64>, CliError> {
    if workers < 2 {
        if strict {
            return Err(CliError::from(Error::InsufficientAnnotators(workers)));
        }
        return Ok(None);
    }
    Ok(Some(f()?))
}

fn with_ids(values: Result<Vec<Option<f64>>, CliError>, ids: &[&String]) -> Result<Vec<Option<f64>>, CliError> {
    let values = values?;
    for (id, v) in ids.iter().zip(&values) {
        if v.is_none() {
            log::warn!("instance `{id}` has fewer than two workers; skipped");
        }
    }
    Ok(values)
}

fn apply_filter(
    scores: BTreeMap<String, f64>,
    mode: FilterMode,
    name: &'static str,
    threshold: f64,
) -> Result<FilterReport, CliError> {
    let workers: Vec<WorkerScore<f64>> = scores
        .iter()
        .map(|(w, &score)| WorkerScore {
            worker_id: w.clone(),
            score,
        })
        .collect();
    let outcome = filter_workers(&workers, mode, threshold)?;
    Ok(FilterReport {
        filter: name,
        threshold,
        scores,
        retained: outcome.retained,
        dropped: outcome.dropped,
    })
}

/// References whose alternatives are the majority-voted submissions; instances nobody
/// annotated keep the original only.
fn vote(refs: &BTreeMap<String, ReferenceRecord>, grouped: &Grouped) -> Result<Vec<ReferenceRecord>, CliError> {
    refs.values()
        .map(|r| {
            let series = match grouped.get(&r.instance_id) {
                Some(ws) => alternative_series(ws, &r.original)?,
                None => Vec::new(),
            };
            let set = majority_vote_references(&r.original, &series)
                .map_err(CliError::ctx(format!("instance `{}`", r.instance_id)))?;
            Ok(ReferenceRecord {
                instance_id: r.instance_id.clone(),
                original: r.original.clone(),
                alternatives: set.alternatives().to_vec(),
            })
        })
        .collect()
}
