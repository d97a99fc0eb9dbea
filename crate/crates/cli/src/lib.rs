//! The `aptb` command line: `publish`, `eval`, `dpcheck` and `synth`.
//!
//! Exit codes: 0 success, 1 output could not be written, 2 invalid
//! configuration or flags, 3 unreadable or malformed input, 4 ledger audit
//! failure (nothing is published), 5 empirical privacy check failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use aptb_core::{AptbConfig, ConfigOverrides, Dataset, Error, Fault};
use clap::{Args, Parser, Subcommand};

mod dpcheck;
mod evaluate;
mod output;
mod publish;
mod synth;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;
pub const EXIT_DP_FAIL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "aptb", version, about = "Differentially private trajectory publication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Publish a noisy synthetic version of a trajectory dataset.
    Publish(publish::PublishArgs),
    /// Compare a published dataset with its original, or sweep mechanisms.
    Eval(evaluate::EvalArgs),
    /// Empirically test the privacy inequality on a tiny dataset.
    Dpcheck(dpcheck::DpcheckArgs),
    /// Generate a synthetic trajectory dataset.
    Synth(synth::SynthArgs),
}

/// Mechanism parameters shared by the commands. Flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub(crate) struct MechanismFlags {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total privacy budget.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Maximum tree height.
    #[arg(long)]
    pub h: Option<usize>,
    /// Outlier distance, a number or `auto`.
    #[arg(long)]
    pub delta: Option<String>,
    /// Fixed expansion threshold for every class.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Share of the budget spent on the length statistics.
    #[arg(long = "pre-fraction", allow_negative_numbers = true)]
    pub pre_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl MechanismFlags {
    /// Config file values overridden by flags, not yet resolved.
    pub fn overrides(&self) -> Result<ConfigOverrides, Failure> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read config {}: {e}", path.display())))?;
                ConfigOverrides::parse(&text).map_err(Failure::from)?
            }
            None => ConfigOverrides::default(),
        };
        let delta = match &self.delta {
            Some(v) => Some(
                aptb_core::config::parse_delta(v)
                    .ok_or_else(|| Failure::new(EXIT_CONFIG, format!("invalid --delta {v:?}: expected a number or `auto`")))?,
            ),
            None => None,
        };
        let flags = ConfigOverrides {
            eps: self.eps,
            h: self.h,
            pre_fraction: self.pre_fraction,
            delta,
            theta: self.theta,
            seed: self.seed,
            ..Default::default()
        };
        Ok(file.merge(&flags))
    }

    pub fn resolve(&self) -> Result<AptbConfig, Failure> {
        self.overrides()?.resolve().map_err(Failure::from)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mechanism {
    Aptb,
    Baseline,
}

impl Mechanism {
    pub fn parse(s: &str) -> Result<Self, Failure> {
        match s.trim() {
            "aptb" => Ok(Self::Aptb),
            "baseline" => Ok(Self::Baseline),
            other => Err(Failure::new(
                EXIT_CONFIG,
                format!("unknown mechanism {other:?}: expected `aptb` or `baseline`"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Aptb => "aptb",
            Self::Baseline => "baseline",
        }
    }
}

/// A failed command: exit code and message for stderr.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    pub fn new(code: i32, msg: impl Into<String>) -> Self {
        Self { code, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::Domain { .. } | Error::Ordering { .. } | Error::EmptyTrajectory | Error::Io(_) => {
                EXIT_PARSE
            }
            Error::AuditFailed { .. } => EXIT_AUDIT,
            _ => EXIT_CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

/// Test-only defects: `overcharge` or `boost=<factor>`.
pub(crate) fn parse_fault(s: &str) -> Result<Fault, Failure> {
    let bad = || Failure::new(EXIT_CONFIG, format!("invalid --test-fault {s:?}"));
    if s == "overcharge" {
        return Ok(Fault::Overcharge);
    }
    let factor: f64 = s.strip_prefix("boost=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if factor.is_finite() && factor > 0.0 {
        Ok(Fault::UnchargedCountBoost(factor))
    } else {
        Err(bad())
    }
}

pub(crate) fn read_dataset(path: &Path) -> Result<(Dataset, Vec<u8>), Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::new(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Failure::new(EXIT_PARSE, format!("{} is not UTF-8: {e}", path.display())))?;
    let d = Dataset::parse(text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    Ok((d, bytes))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Publish(a) => publish::run(&a),
        Command::Eval(a) => evaluate::run(&a),
        Command::Dpcheck(a) => dpcheck::run(&a),
        Command::Synth(a) => synth::run(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("aptb: {}", f.msg);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let audit = Error::AuditFailed { path: "/0:0".into(), spent: 2.0, total: 1.0 };
        assert_eq!(Failure::from(audit).code, EXIT_AUDIT);
        assert_eq!(Failure::from(Error::Parse { line: 3, msg: "x".into() }).code, EXIT_PARSE);
        assert_eq!(Failure::from(Error::InvalidParameter { name: "eps", msg: "bad".into() }).code, EXIT_CONFIG);
        assert_eq!(Failure::from(Error::Precondition("tiny".into())).code, EXIT_CONFIG);
    }

    #[test]
    fn fault_specs() {
        assert_eq!(parse_fault("overcharge").unwrap(), Fault::Overcharge);
        assert_eq!(parse_fault("boost=4").unwrap(), Fault::UnchargedCountBoost(4.0));
        assert!(parse_fault("boost=-1").is_err());
        assert!(parse_fault("double").is_err());
    }
}
