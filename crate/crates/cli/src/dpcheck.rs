use std::path::PathBuf;

use aptb_core::eval::dpcheck::{empirical_dp_check, empirical_dp_check_baseline, tiny_fixture, tiny_fixtures};
use aptb_core::eval::BaselineOptions;
use clap::Args;

use crate::output::write_all_atomic;
use crate::{parse_fault, read_dataset, Failure, Mechanism, MechanismFlags, EXIT_CONFIG, EXIT_DP_FAIL, EXIT_OK};

#[derive(Debug, Args)]
pub struct DpcheckArgs {
    /// Name of a bundled tiny fixture.
    #[arg(long, conflicts_with = "input")]
    pub fixture: Option<String>,
    /// Tiny dataset file instead of a fixture.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Index of the trajectory removed to form the neighbour (with `--in`).
    #[arg(long, default_value_t = 0)]
    pub removed: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// `aptb` or `baseline`.
    #[arg(long, default_value = "aptb")]
    pub mechanism: String,
    /// Report file; the report is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub flags: MechanismFlags,
    /// Injected defect (`boost=<factor>` draws coarse-node noise as if the
    /// budget were that many times larger, without charging it). Only for
    /// showing that the check has power.
    #[arg(long = "test-fault", hide = true)]
    pub test_fault: Option<String>,
}

pub fn run(args: &DpcheckArgs) -> Result<i32, Failure> {
    let mechanism = Mechanism::parse(&args.mechanism)?;
    let (data, removed) = match (&args.fixture, &args.input) {
        (Some(name), _) => {
            let f = tiny_fixture(name).ok_or_else(|| {
                let names: Vec<_> = tiny_fixtures().iter().map(|f| f.name).collect();
                Failure::new(EXIT_CONFIG, format!("unknown fixture {name:?}; available: {}", names.join(", ")))
            })?;
            (f.dataset, f.removed_index)
        }
        (None, Some(path)) => (read_dataset(path)?.0, args.removed),
        (None, None) => return Err(Failure::new(EXIT_CONFIG, "one of --fixture or --in is required")),
    };

    let mut overrides = args.flags.overrides()?;
    overrides.h = overrides.h.or(Some(data.universe().slots() as usize));
    let mut cfg = overrides.resolve()?;
    if let Some(spec) = &args.test_fault {
        if mechanism != Mechanism::Aptb {
            return Err(Failure::new(EXIT_CONFIG, "--test-fault applies to the aptb mechanism only"));
        }
        cfg.hooks.fault = Some(parse_fault(spec)?);
    }

    let report = match mechanism {
        Mechanism::Aptb => empirical_dp_check(&data, removed, &cfg, args.trials)?,
        Mechanism::Baseline => {
            let opts = BaselineOptions {
                theta_floor: cfg.theta_floor,
                theta_override: cfg.theta_override,
                ..Default::default()
            };
            empirical_dp_check_baseline(&data, removed, cfg.total_eps, cfg.h_user, &opts, cfg.seed, args.trials)?
        }
    };
    let text = format!("[dpcheck]\nmechanism = {}\n{}", mechanism.name(), report.to_text());
    print!("{text}");
    if let Some(out) = &args.out {
        write_all_atomic(&[(out.clone(), text.into_bytes())])?;
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_DP_FAIL })
}
