use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use stepseq::corpus::{load_manifest, InstanceRecord, Manifest};
use stepseq::plans::{
    derive_seed, plan_isp, plan_mlm, plan_pisp, plan_smrm, sample_objective, sample_subsequence, MlmPlan, Objective,
    PatchSwapPlan, RegionMaskPlan, SmrmConfig, SwapPlan, Window,
};

use crate::output::{read_jsonl, Context, Seed};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ObjectiveArg {
    Mlm,
    Isp,
    Pisp,
    Smrm,
    /// One of ISP, PISP, SMRM drawn uniformly for the batch.
    Mixed,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// Scrambled instances (JSONL); plans cover the authored order of their steps.
    #[arg(long)]
    pub instances: PathBuf,

    /// Manifest supplying token counts; required for MLM.
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub objective: ObjectiveArg,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Mini-batch index mixed into every derived seed.
    #[arg(long, default_value_t = 0)]
    pub batch: u64,

    /// Swap probability for ISP and PISP.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,

    /// Fraction of patches masked per image by SMRM.
    #[arg(long, default_value_t = 0.15)]
    pub x: f64,

    /// Patches per image.
    #[arg(long, default_value_t = 49)]
    pub w: usize,

    #[arg(long, default_value_t = 0.15)]
    pub mlm_rate: f64,

    /// SMRM resampling budget per image.
    #[arg(long, default_value_t = 1000)]
    pub max_attempts: usize,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanBody {
    Mlm(MlmPlan),
    Isp(SwapPlan),
    Pisp {
        /// Window positions whose images exchange patches.
        pair: Option<(usize, usize)>,
        #[serde(flatten)]
        plan: PatchSwapPlan,
    },
    Smrm(RegionMaskPlan),
}

#[derive(Debug, Serialize)]
pub struct PlanRecord {
    pub instance_id: String,
    pub seed: u64,
    /// Window over the authored step order.
    pub window: Window,
    pub plan: PlanBody,
}

fn token_counts(manifest: &Manifest, inst: &InstanceRecord, window: Window) -> Result<Vec<usize>, CliError> {
    let manual = manifest.get(&inst.instance.manual_id).ok_or_else(|| {
        CliError::Config(format!(
            "instance `{}` refers to manual `{}` missing from the manifest",
            inst.instance_id, inst.instance.manual_id
        ))
    })?;
    let n = inst.instance.scramble.len();
    if manual.steps.len() < n {
        return Err(CliError::core(
            format!("instance `{}`", inst.instance_id),
            stepseq::Error::Shape {
                expected: n,
                found: manual.steps.len(),
            },
        ));
    }
    Ok(manual.steps[window.start..window.start + window.length]
        .iter()
        .map(|s| s.token_count)
        .collect())
}

pub fn run(ctx: &Context, args: &Args) -> Result<(), CliError> {
    let mut instances: Vec<InstanceRecord> = read_jsonl(&args.instances, "instances")?;
    instances.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let manifest = match (&args.manifest, args.objective) {
        (Some(path), _) => Some(load_manifest(path).map_err(CliError::ctx(format!("manifest {}", path.display())))?),
        (None, ObjectiveArg::Mlm) => return Err(CliError::Config("the mlm objective needs --manifest".into())),
        (None, _) => None,
    };
    let seed = Seed::resolve(args.seed);
    let objective = match args.objective {
        ObjectiveArg::Mlm => None,
        ObjectiveArg::Isp => Some(Objective::Isp),
        ObjectiveArg::Pisp => Some(Objective::Pisp),
        ObjectiveArg::Smrm => Some(Objective::Smrm),
        ObjectiveArg::Mixed => Some(sample_objective(derive_seed(seed.value, "objective", args.batch))),
    };

    let plans = ctx.map(&instances, |inst| {
        let context = format!("instance `{}`", inst.instance_id);
        let s = derive_seed(seed.value, &inst.instance_id, args.batch);
        let window = sample_subsequence(inst.instance.scramble.len(), derive_seed(s, "window", 0))
            .map_err(CliError::ctx(&context))?;
        let plan_seed = derive_seed(s, "plan", 0);
        let plan = match objective {
            None => {
                let counts = token_counts(manifest.as_ref().expect("checked above"), inst, window)?;
                plan_mlm(&counts, args.mlm_rate, plan_seed).map(PlanBody::Mlm)
            }
            Some(Objective::Isp) => plan_isp(window.length, args.delta, plan_seed).map(PlanBody::Isp),
            Some(Objective::Pisp) => plan_pisp(args.w, args.delta, plan_seed, None).and_then(|plan| {
                let pair = if plan.swapped {
                    plan_isp(window.length, 1.0, derive_seed(s, "pair", 0))?.pair
                } else {
                    None
                };
                Ok(PlanBody::Pisp { pair, plan })
            }),
            Some(Objective::Smrm) => {
                let config = SmrmConfig {
                    x: args.x,
                    max_attempts: args.max_attempts,
                    ..SmrmConfig::new(args.w, window.length)
                };
                plan_smrm(&config, plan_seed).map(PlanBody::Smrm)
            }
        }
        .map_err(CliError::ctx(&context))?;
        Ok(PlanRecord {
            instance_id: inst.instance_id.clone(),
            seed: s,
            window,
            plan,
        })
    })?;

    ctx.write_jsonl("plans.jsonl", &plans)?;
    ctx.write_metadata(
        Some(seed),
        json!({
            "instances": args.instances,
            "manifest": args.manifest,
            "objective": format!("{:?}", args.objective).to_lowercase(),
            "batch": args.batch,
            "delta": args.delta,
            "x": args.x,
            "w": args.w,
            "mlm_rate": args.mlm_rate,
            "max_attempts": args.max_attempts,
        }),
        json!({
            "plans": plans.len(),
            "batch_objective": objective.map_or_else(|| "MLM".to_string(), |o| format!("{o:?}").to_uppercase()),
        }),
    )
}
