use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::CompletionRecord;
use stepseq::metrics::{completion_metrics, CompletionResult};

use crate::output::{read_jsonl, Context};
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Completion results (JSONL): instance_id, retrieval_rank_of_gt, position_correct.
    #[arg(long)]
    pub results: PathBuf,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut records: Vec<CompletionRecord> = read_jsonl(&args.results, "completion results")?;
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let results: Vec<CompletionResult> = records.iter().map(|r| r.result).collect();
    let m =
        completion_metrics::<f64>(&results).map_err(CliError::ctx(format!("results {}", args.results.display())))?;

    let table = format!(
        "| N | MRR↑ | Top-1↑ | MRSR↑ |\n|---:|---:|---:|---:|\n| {} | {:.3} | {:.2} | {:.3} |\n",
        results.len(),
        m.mrr,
        100.0 * m.top1,
        m.mrsr
    );
    ctx.write("completion.md", &table)?;
    ctx.write_json("completion.json", &json!({ "count": results.len(), "metrics": m }))?;
    ctx.write_metadata(
        None,
        json!({ "results": args.results }),
        json!({ "count": results.len(), "metrics": m }),
    )
}
