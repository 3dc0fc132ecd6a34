use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::{load_manifest, split_by_category, SplitSpec};

use crate::output::{Context, Seed};
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Category depth kept disjoint between splits.
    #[arg(long, default_value_t = 3)]
    pub level: usize,

    /// Train, dev and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_value = "0.8,0.1,0.1")]
    pub fractions: Vec<f64>,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let manifest =
        load_manifest(&args.manifest).map_err(CliError::ctx(format!("manifest {}", args.manifest.display())))?;
    let fractions: [f64; 3] = args
        .fractions
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Config(format!("--fractions takes 3 values, got {}", args.fractions.len())))?;
    let seed = Seed::resolve(args.seed);
    let spec = SplitSpec {
        level: args.level,
        fractions,
        seed: seed.value,
    };
    let split = split_by_category(&manifest, &spec)?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    ctx.write_json("split.json", &split)?;
    ctx.write_metadata(
        Some(seed),
        json!({ "manifest": args.manifest, "level": args.level, "fractions": fractions }),
        json!({
            "train": split.train.len(),
            "dev": split.dev.len(),
            "test": split.test.len(),
            "warnings": split.warnings,
        }),
    )
}
