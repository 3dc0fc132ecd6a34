//! Batch evaluation bookkeeping and report rendering (Markdown and CSV).
//!
//! Rendered numbers use two decimals; accuracy and PMR are shown as percentages. Metric
//! columns carry the ↑/↓ direction markers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{reference_stats, PredictionRecord, ReferenceRecord, ReferenceStats};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, evaluate_instance, evaluate_multi_reference, AggregateReport, MetricReport, ReferencePolicy,
};
use crate::model::ReferenceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Score against original and alternatives instead of the original alone.
    pub multi_reference: bool,
    pub policy: ReferencePolicy,
    /// Render `L_q` / `L_r` as fractions of `n`.
    pub normalize_lcs: bool,
}

/// One prediction paired with its references.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub prediction: PredictionRecord,
    pub references: ReferenceSet,
}

/// Pairs predictions with references by instance id, sorted by id.
pub fn align(predictions: Vec<PredictionRecord>, references: Vec<ReferenceRecord>) -> Result<Vec<EvalItem>> {
    let mut refs: BTreeMap<String, ReferenceRecord> = BTreeMap::new();
    for r in references {
        let id = r.instance_id.clone();
        if refs.insert(id.clone(), r).is_some() {
            return Err(Error::Duplicate(id));
        }
    }
    let mut preds: BTreeMap<String, PredictionRecord> = BTreeMap::new();
    for p in predictions {
        let id = p.instance_id.clone();
        if preds.insert(id.clone(), p).is_some() {
            return Err(Error::Duplicate(id));
        }
    }
    let unmatched_predictions: Vec<String> = preds.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    let unmatched_references: Vec<String> = refs.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    if !unmatched_predictions.is_empty() || !unmatched_references.is_empty() {
        return Err(Error::Alignment {
            unmatched_predictions,
            unmatched_references,
        });
    }
    preds
        .into_values()
        .zip(refs.into_values())
        .map(|(prediction, r)| {
            Ok(EvalItem {
                prediction,
                references: r.to_set()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub instance_id: String,
    pub has_alternatives: bool,
    /// Index into original-then-alternatives of the reference scored against.
    pub reference_index: usize,
    pub report: MetricReport<f64>,
}

pub fn evaluate_item(item: &EvalItem, options: &EvalOptions) -> Result<InstanceRow> {
    let pred = &item.prediction.predicted;
    let (report, reference_index) = if options.multi_reference {
        evaluate_multi_reference(pred, &item.references, options.policy)?
    } else {
        (evaluate_instance(pred, item.references.original())?, 0)
    };
    Ok(InstanceRow {
        instance_id: item.prediction.instance_id.clone(),
        has_alternatives: item.references.has_alternatives(),
        reference_index,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `("All", ...)` always; `"Single"` and `"Multi."` as well when any instance has
    /// alternatives.
    pub rows: Vec<(String, AggregateReport<f64>)>,
    pub references: ReferenceStats,
}

pub fn summarize(items: &[EvalItem], rows: &[InstanceRow]) -> Result<Summary> {
    let stats = reference_stats(items.iter().map(|i| &i.references));
    let all: Vec<MetricReport<f64>> = rows.iter().map(|r| r.report).collect();
    let mut out = Vec::new();
    if stats.multi > 0 {
        let pick = |multi: bool| -> Vec<MetricReport<f64>> {
            rows.iter()
                .filter(|r| r.has_alternatives == multi)
                .map(|r| r.report)
                .collect()
        };
        let single = pick(false);
        if !single.is_empty() {
            out.push(("Single".to_string(), aggregate(&single)?));
        }
        out.push(("Multi.".to_string(), aggregate(&pick(true))?));
    }
    out.push(("All".to_string(), aggregate(&all)?));
    Ok(Summary {
        rows: out,
        references: stats,
    })
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn cells(a: &AggregateReport<f64>, normalize_lcs: bool) -> [String; 6] {
    let (lq, lr) = if normalize_lcs {
        (a.lq_ratio, a.lr_ratio)
    } else {
        (a.lq, a.lr)
    };
    [
        fmt2(100.0 * a.acc),
        fmt2(100.0 * a.pmr),
        fmt2(lq),
        fmt2(lr),
        fmt2(a.tau),
        fmt2(a.dist),
    ]
}

pub const METRIC_HEADERS: [&str; 6] = ["Acc↑", "PMR↑", "L_q↑", "L_r↑", "τ↑", "Dist↓"];
const CSV_HEADERS: [&str; 6] = ["acc", "pmr", "lq", "lr", "tau", "dist"];

/// Markdown table with one row per labelled aggregate.
pub fn render_markdown(label_header: &str, rows: &[(String, AggregateReport<f64>)], normalize_lcs: bool) -> String {
    let mut out = format!("| {label_header} | N | {} |\n", METRIC_HEADERS.join(" | "));
    out.push_str(&format!("|---|---:|{}\n", "---:|".repeat(METRIC_HEADERS.len())));
    for (label, a) in rows {
        out.push_str(&format!(
            "| {label} | {} | {} |\n",
            a.count,
            cells(a, normalize_lcs).join(" | ")
        ));
    }
    out
}

pub fn render_csv(label_header: &str, rows: &[(String, AggregateReport<f64>)], normalize_lcs: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![label_header, "count"];
    header.extend(CSV_HEADERS);
    w.write_record(&header).expect("in-memory write");
    for (label, a) in rows {
        let mut rec = vec![label.clone(), a.count.to_string()];
        rec.extend(cells(a, normalize_lcs));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn render_instance_csv(rows: &[InstanceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance_id",
        "n",
        "acc",
        "pmr",
        "dist",
        "lq",
        "lr",
        "tau",
        "reference_index",
        "has_alternatives",
    ])
    .expect("in-memory write");
    for r in rows {
        let m = &r.report;
        w.write_record([
            r.instance_id.clone(),
            m.n.to_string(),
            fmt2(100.0 * m.acc),
            u8::from(m.pmr).to_string(),
            fmt2(m.dist),
            m.lq.to_string(),
            m.lr.to_string(),
            fmt2(m.tau),
            r.reference_index.to_string(),
            r.has_alternatives.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// One row of a previously rendered aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedRow {
    pub label: String,
    pub count: usize,
    pub values: [String; 6],
}

/// Reads the rows of an aggregate CSV produced by [`render_csv`].
pub fn parse_aggregate_csv(text: &str) -> Result<Vec<RenderedRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2;
        let bad = |message: String| Error::Records(vec![crate::error::RecordError { line, message }]);
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", rec.len())));
        }
        let count = rec[1].parse().map_err(|e| bad(format!("count: {e}")))?;
        let values = std::array::from_fn(|k| rec[k + 2].to_string());
        out.push(RenderedRow {
            label: rec[0].to_string(),
            count,
            values,
        });
    }
    Ok(out)
}

/// Markdown table over rows gathered from several runs.
pub fn render_merged(rows: &[(String, RenderedRow)]) -> String {
    let mut out = format!("| Run | Subset | N | {} |\n", METRIC_HEADERS.join(" | "));
    out.push_str(&format!("|---|---|---:|{}\n", "---:|".repeat(METRIC_HEADERS.len())));
    for (run, row) in rows {
        out.push_str(&format!(
            "| {run} | {} | {} | {} |\n",
            row.label,
            row.count,
            row.values.join(" | ")
        ));
    }
    out
}

pub fn render_merged_csv(rows: &[(String, RenderedRow)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run", "subset", "count"];
    header.extend(CSV_HEADERS);
    w.write_record(&header).expect("in-memory write");
    for (run, row) in rows {
        let mut rec = vec![run.clone(), row.label.clone(), row.count.to_string()];
        rec.extend(row.values.iter().cloned());
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
