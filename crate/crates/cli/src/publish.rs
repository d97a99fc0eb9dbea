use std::path::PathBuf;

use aptb_core::eval::BaselineOptions;
use aptb_core::{config_snapshot, publish, publish_baseline, AptbConfig, Publication};
use clap::Args;

use crate::output::{sibling, write_all_atomic, FileDigest, LedgerSummary, RunManifest};
use crate::{parse_fault, read_dataset, Failure, Mechanism, MechanismFlags, EXIT_OK};

#[derive(Debug, Args)]
pub struct PublishArgs {
    /// Input dataset.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Published dataset; the ledger and manifest are written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// `aptb` or `baseline`.
    #[arg(long, default_value = "aptb")]
    pub mechanism: String,
    #[command(flatten)]
    pub flags: MechanismFlags,
    /// Injected defect (`overcharge` or `boost=<factor>`); test harness only.
    #[arg(long = "test-fault", hide = true)]
    pub test_fault: Option<String>,
}

pub(crate) fn run_mechanism(
    mechanism: Mechanism,
    d: &aptb_core::Dataset,
    cfg: &AptbConfig,
) -> aptb_core::Result<Publication> {
    match mechanism {
        Mechanism::Aptb => publish(d, cfg),
        Mechanism::Baseline => {
            let opts = BaselineOptions {
                theta_floor: cfg.theta_floor,
                theta_override: cfg.theta_override,
                hooks: cfg.hooks,
            };
            publish_baseline(d, cfg.total_eps, cfg.h_user, &opts, cfg.seed)
        }
    }
}

/// Configuration lines that actually influence `mechanism`.
fn snapshot_lines(mechanism: Mechanism, cfg: &AptbConfig) -> Vec<String> {
    let keep: &[&str] = match mechanism {
        Mechanism::Aptb => &[],
        Mechanism::Baseline => &["eps", "h", "theta_floor", "theta", "seed"],
    };
    config_snapshot(cfg)
        .lines()
        .filter(|l| keep.is_empty() || keep.iter().any(|k| l.split(" = ").next() == Some(k)))
        .map(str::to_string)
        .collect()
}

pub fn run(args: &PublishArgs) -> Result<i32, Failure> {
    let mechanism = Mechanism::parse(&args.mechanism)?;
    let mut cfg = args.flags.resolve()?;
    if let Some(spec) = &args.test_fault {
        cfg.hooks.fault = Some(parse_fault(spec)?);
    }
    let (data, input_bytes) = read_dataset(&args.input)?;
    let publication = run_mechanism(mechanism, &data, &cfg)?;

    let dataset_bytes = publication.dataset.to_text().into_bytes();
    let ledger_bytes = publication.ledger.export().into_bytes();
    let ledger_path = sibling(&args.out, ".ledger.tsv");
    let manifest_path = sibling(&args.out, ".manifest.json");

    let mut inputs = vec![FileDigest::of(&args.input, &input_bytes)];
    if let Some(config) = &args.flags.config {
        let bytes = std::fs::read(config).unwrap_or_default();
        inputs.push(FileDigest::of(config, &bytes));
    }
    let audit = &publication.audit;
    let manifest = RunManifest {
        command: "publish".into(),
        mechanism: mechanism.name().into(),
        config: snapshot_lines(mechanism, &cfg),
        inputs,
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        outputs: vec![
            FileDigest::of(&args.out, &dataset_bytes),
            FileDigest::of(&ledger_path, &ledger_bytes),
        ],
        ledger: LedgerSummary {
            total_eps: cfg.total_eps.value(),
            max_path_sum: audit.max_path_sum,
            worst_path: audit.worst_path.clone(),
            paths: audit.paths.len(),
            charges: publication.ledger.len(),
            pass: audit.pass,
        },
    };

    write_all_atomic(&[
        (args.out.clone(), dataset_bytes),
        (ledger_path, ledger_bytes),
        (manifest_path, manifest.to_json()),
    ])?;
    println!(
        "published {} trajectories to {} (max path budget {:.6} of {})",
        publication.dataset.len(),
        args.out.display(),
        audit.max_path_sum,
        cfg.total_eps
    );
    Ok(EXIT_OK)
}
