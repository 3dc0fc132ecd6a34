use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::{MatrixRecord, ReferenceRecord};
use stepseq::plans::{derive_seed, rng_from_seed};
use stepseq::synthetic::noisy_matrix;

use crate::output::{read_jsonl, Context, Seed};
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// References whose original orders the matrices are built around.
    #[arg(long)]
    pub references: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Chance that a pair keeps its true direction; also the probability given to the
    /// favoured direction.
    #[arg(long, default_value_t = 0.8)]
    pub q: f64,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut refs: Vec<ReferenceRecord> = read_jsonl(&args.references, "references")?;
    refs.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let seed = Seed::resolve(args.seed);
    let matrices = ctx.map(&refs, |r| {
        let mut rng = rng_from_seed(derive_seed(seed.value, &r.instance_id, 0));
        let m = noisy_matrix::<f64, _>(&r.original, args.q, &mut rng)
            .map_err(CliError::ctx(format!("instance `{}`", r.instance_id)))?;
        Ok(MatrixRecord::from_matrix(r.instance_id.clone(), &m))
    })?;
    ctx.write_jsonl("matrices.jsonl", &matrices)?;
    ctx.write_metadata(
        Some(seed),
        json!({ "references": args.references, "q": args.q }),
        json!({ "instances": matrices.len() }),
    )
}
