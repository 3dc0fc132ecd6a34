use std::path::PathBuf;

use serde_json::json;
use stepseq::corpus::{load_manifest, scramble_instance, InstanceRecord, ReferenceRecord};
use stepseq::plans::derive_seed;
use stepseq::{Manual, Modality};

use crate::output::{Context, Seed};
use crate::CliError;

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Manual manifest (JSONL).
    #[arg(long)]
    pub manifest: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Only the first steps of each manual are scrambled.
    #[arg(long, default_value_t = 5)]
    pub max_len: usize,

    /// Never emit an unscrambled instance.
    #[arg(long)]
    pub exclude_identity: bool,

    /// One instance per manual and modality.
    #[arg(long = "modality", value_delimiter = ',', default_value = "multimodal")]
    pub modalities: Vec<Modality>,
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let manifest =
        load_manifest(&args.manifest).map_err(CliError::ctx(format!("manifest {}", args.manifest.display())))?;
    let seed = Seed::resolve(args.seed);
    let jobs: Vec<(&Manual, Modality)> = manifest
        .manuals
        .iter()
        .flat_map(|m| args.modalities.iter().map(move |&md| (m, md)))
        .collect();
    let mut instances = ctx.map(&jobs, |&(manual, modality)| {
        let id = format!("{}/{}", manual.manual_id, modality.as_str());
        scramble_instance(
            manual,
            modality,
            derive_seed(seed.value, &id, 0),
            args.exclude_identity,
            args.max_len,
        )
        .map(InstanceRecord::from)
        .map_err(CliError::ctx(format!("manual `{}`", manual.manual_id)))
    })?;
    instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let references: Vec<ReferenceRecord> = instances
        .iter()
        .map(|r| ReferenceRecord {
            instance_id: r.instance_id.clone(),
            original: r.instance.scramble.clone(),
            alternatives: Vec::new(),
        })
        .collect();

    ctx.write_jsonl("instances.jsonl", &instances)?;
    ctx.write_jsonl("references.jsonl", &references)?;
    ctx.write_metadata(
        Some(seed),
        json!({
            "manifest": args.manifest,
            "max_len": args.max_len,
            "exclude_identity": args.exclude_identity,
            "modalities": args.modalities.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        }),
        json!({ "manuals": manifest.manuals.len(), "instances": instances.len() }),
    )
}
