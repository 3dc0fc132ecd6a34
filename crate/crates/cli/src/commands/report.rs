use std::path::PathBuf;

use serde_json::json;
use stepseq::report::{parse_aggregate_csv, render_merged, render_merged_csv};

use crate::output::Context;
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// `label=path` of a `summary.csv` from an evaluate run; repeatable, rows keep this order.
    #[arg(long = "input", required = true, value_parser = parse_input)]
    pub inputs: Vec<(String, PathBuf)>,
}

fn parse_input(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected label=path, got `{s}`")),
    }
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for (label, path) in &args.inputs {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::from(stepseq::Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
        let parsed = parse_aggregate_csv(&text).map_err(CliError::ctx(format!("{}", path.display())))?;
        rows.extend(parsed.into_iter().map(|r| (label.clone(), r)));
    }
    ctx.write("report.md", &render_merged(&rows))?;
    ctx.write("report.csv", &render_merged_csv(&rows))?;
    ctx.write_metadata(
        None,
        json!({ "inputs": args.inputs.iter().map(|(l, p)| json!({ "label": l, "path": p })).collect::<Vec<_>>() }),
        json!({ "rows": rows.len() }),
    )
}
