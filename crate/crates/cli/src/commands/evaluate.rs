use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::{PredictionRecord, ReferenceRecord};
use stepseq::metrics::ReferencePolicy;
use stepseq::report::{align, evaluate_item, render_csv, render_instance_csv, render_markdown, summarize, EvalOptions};

use crate::output::{read_jsonl, Context};
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub predictions: PathBuf,

    #[arg(long)]
    pub references: PathBuf,

    /// Score against the original and every admitted alternative.
    #[arg(long)]
    pub multi_reference: bool,

    /// How the best reference is chosen in multi-reference mode: joint | per-metric.
    #[arg(long, default_value = "joint")]
    pub multi_ref_policy: ReferencePolicy,

    /// Report L_q and L_r as fractions of the sequence length.
    #[arg(long)]
    pub normalize_lcs: bool,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let predictions: Vec<PredictionRecord> = read_jsonl(&args.predictions, "predictions")?;
    let references: Vec<ReferenceRecord> = read_jsonl(&args.references, "references")?;
    let items = align(predictions, references).map_err(CliError::ctx("aligning predictions with references"))?;
    let options = EvalOptions {
        multi_reference: args.multi_reference,
        policy: args.multi_ref_policy,
        normalize_lcs: args.normalize_lcs,
    };
    let rows = ctx.map(&items, |item| {
        evaluate_item(item, &options).map_err(CliError::ctx(format!("instance `{}`", item.prediction.instance_id)))
    })?;
    let summary = summarize(&items, &rows)?;

    ctx.write("instances.csv", &render_instance_csv(&rows))?;
    ctx.write(
        "summary.md",
        &render_markdown("Subset", &summary.rows, args.normalize_lcs),
    )?;
    ctx.write("summary.csv", &render_csv("subset", &summary.rows, args.normalize_lcs))?;
    ctx.write_metadata(
        None,
        json!({
            "predictions": args.predictions,
            "references": args.references,
            "multi_reference": args.multi_reference,
            "multi_ref_policy": args.multi_ref_policy,
            "normalize_lcs": args.normalize_lcs,
        }),
        json!({ "references": summary.references, "aggregates": summary.rows }),
    )
}
