use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::{MatrixRecord, PredictionRecord};
use stepseq::decoding::{consistency_check, decode_beam, decode_exhaustive, decode_topological, DecoderConfig};

use crate::output::{read_jsonl, Context};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Algorithm {
    Exhaustive,
    Topo,
    Beam,
}

impl Algorithm {
    fn as_str(self) -> &'static str {
        match self {
            Algorithm::Exhaustive => "exhaustive",
            Algorithm::Topo => "topo",
            Algorithm::Beam => "beam",
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Pairwise matrices (JSONL).
    #[arg(long)]
    pub matrices: PathBuf,

    #[arg(long, value_enum)]
    pub algorithm: Algorithm,

    #[arg(long, default_value_t = 8)]
    pub beam_width: usize,

    /// Largest instance the exhaustive decoder accepts.
    #[arg(long, default_value_t = 8)]
    pub max_n: usize,

    /// Probabilities are clamped to at least this before taking logs.
    #[arg(long, default_value_t = 1e-9)]
    pub floor: f64,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut records: Vec<MatrixRecord> = read_jsonl(&args.matrices, "matrices")?;
    records.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    if let Some(w) = records.windows(2).find(|w| w[0].instance_id == w[1].instance_id) {
        return Err(CliError::from(stepseq::Error::Duplicate(w[0].instance_id.clone())));
    }
    let config = DecoderConfig {
        floor: args.floor,
        exhaustive_limit: args.max_n,
    };
    let decoded = ctx.map(&records, |r| {
        let context = || format!("instance `{}`", r.instance_id);
        let m = r.to_matrix::<f64>().map_err(|e| CliError::core(context(), e))?;
        let report = consistency_check(&m);
        let pred = match args.algorithm {
            Algorithm::Exhaustive => decode_exhaustive(&m, &config),
            Algorithm::Topo => decode_topological(&m, &config),
            Algorithm::Beam => decode_beam(&m, args.beam_width, &config),
        }
        .map_err(|e| CliError::core(context(), e))?;
        Ok((pred, report.cyclic_triads))
    })?;

    let mut predictions = Vec::with_capacity(decoded.len());
    let mut objective = BTreeMap::new();
    let mut cyclic = 0usize;
    for ((pred, triads), r) in decoded.into_iter().zip(&records) {
        if triads > 0 {
            log::debug!("instance `{}` has {triads} cyclic triad(s)", r.instance_id);
            cyclic += 1;
        }
        objective.insert(r.instance_id.clone(), pred.objective_value);
        predictions.push(PredictionRecord {
            instance_id: r.instance_id.clone(),
            predicted: pred.predicted,
        });
    }
    ctx.write_jsonl("predictions.jsonl", &predictions)?;
    ctx.write_metadata(
        None,
        json!({
            "matrices": args.matrices,
            "algorithm": args.algorithm.as_str(),
            "beam_width": (args.algorithm == Algorithm::Beam).then_some(args.beam_width),
            "max_n": args.max_n,
            "floor": args.floor,
        }),
        json!({
            "instances": predictions.len(),
            "instances_with_cycles": cyclic,
            "objective_values": objective,
        }),
    )
}
