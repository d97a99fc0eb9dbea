use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use aptb_core::eval::{avg_relative_error, length_distribution_l1, sign_test_one_sided, QueryWorkload};
use aptb_core::{Dataset, Epsilon, RandomStream};
use clap::Args;
use rayon::prelude::*;

use crate::output::write_all_atomic;
use crate::publish::run_mechanism;
use crate::{read_dataset, Failure, Mechanism, MechanismFlags, EXIT_CONFIG, EXIT_OK};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Original dataset.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Published dataset to compare against the original.
    #[arg(long, conflicts_with = "sweep")]
    pub published: Option<PathBuf>,
    /// Comma-separated mechanisms to run in sweep mode.
    #[arg(long, default_value = "aptb,baseline")]
    pub mechanism: String,
    /// Sweep specification, e.g. `eps=0.5,1.0`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Number of seeds per (mechanism, epsilon) in sweep mode.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Evaluation report.
    #[arg(long)]
    pub out: PathBuf,
    /// Machine-readable summary, one `metric mechanism epsilon seed value`
    /// line per run, tab separated.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub flags: MechanismFlags,
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::new(EXIT_CONFIG, format!("invalid --sweep {spec:?}: expected eps=<v1>,<v2>,..."));
    let values = spec.strip_prefix("eps=").ok_or_else(bad)?;
    let eps: Vec<f64> = values
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    for &e in &eps {
        Epsilon::new(e)?;
    }
    if eps.is_empty() {
        return Err(bad());
    }
    Ok(eps)
}

pub fn run(args: &EvalArgs) -> Result<i32, Failure> {
    let (original, _) = read_dataset(&args.input)?;
    match &args.published {
        Some(published) => compare(args, &original, published),
        None => sweep(args, &original),
    }
}

fn compare(args: &EvalArgs, original: &Dataset, published: &Path) -> Result<i32, Failure> {
    let (publ, _) = read_dataset(published)?;
    let seed = args
        .flags
        .seed
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "--seed is required (it selects the zero-count queries)"))?;
    let h = args.flags.h.unwrap_or(original.max_length().max(1));
    let workload = QueryWorkload::standard(original, h, seed);
    let are = avg_relative_error(original, &publ, &workload)?;
    let l1 = length_distribution_l1(original, &publ)?;

    let mut report = String::new();
    let _ = writeln!(report, "[eval]");
    let _ = writeln!(report, "mode = compare");
    let _ = writeln!(report, "original = {}", args.input.display());
    let _ = writeln!(report, "published = {}", published.display());
    let _ = writeln!(report, "h = {h}");
    let _ = writeln!(report, "seed = {seed}");
    let _ = writeln!(report, "queries = {}", workload.prefixes.len());
    let _ = writeln!(report, "sanity_bound = {}", workload.sanity_bound);
    let _ = writeln!(report, "\n[metrics]");
    let _ = writeln!(report, "avg_relative_error = {are}");
    let _ = writeln!(report, "length_distribution_l1 = {l1}");

    let mut files = vec![(args.out.clone(), report.clone().into_bytes())];
    if let Some(summary) = &args.summary {
        let rows = format!(
            "avg_relative_error\tpublished\t-\t{seed}\t{are}\nlength_distribution_l1\tpublished\t-\t{seed}\t{l1}\n"
        );
        files.push((summary.clone(), rows.into_bytes()));
    }
    write_all_atomic(&files)?;
    print!("{report}");
    Ok(EXIT_OK)
}

struct Run {
    mechanism: Mechanism,
    eps: f64,
    seed: u64,
    are: f64,
    l1: f64,
}

fn sweep(args: &EvalArgs, original: &Dataset) -> Result<i32, Failure> {
    let spec = args
        .sweep
        .as_deref()
        .ok_or_else(|| Failure::new(EXIT_CONFIG, "either --published or --sweep is required"))?;
    let eps_values = parse_sweep(spec)?;
    let mechanisms: Vec<Mechanism> = args.mechanism.split(',').map(Mechanism::parse).collect::<Result<_, _>>()?;
    if args.seeds == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--seeds must be >= 1"));
    }
    let base = args.flags.overrides()?;
    let master = base.seed.ok_or_else(|| Failure::new(EXIT_CONFIG, "--seed is required"))?;

    let mut probe = base.clone();
    probe.eps = Some(eps_values[0]);
    let h = probe.resolve()?.h_user;
    let workload = QueryWorkload::standard(original, h, master);

    // mechanisms share seeds so runs are paired
    let mut jobs = Vec::new();
    for &mechanism in &mechanisms {
        for &eps in &eps_values {
            for i in 0..args.seeds {
                jobs.push((mechanism, eps, RandomStream::derive(master, i as u64).seed()));
            }
        }
    }
    let runs: Vec<Run> = jobs
        .par_iter()
        .map(|&(mechanism, eps, seed)| -> Result<Run, Failure> {
            let mut o = base.clone();
            o.eps = Some(eps);
            o.seed = Some(seed);
            let cfg = o.resolve()?;
            let publication = run_mechanism(mechanism, original, &cfg)?;
            let are = avg_relative_error(original, &publication.dataset, &workload)?;
            let l1 = length_distribution_l1(original, &publication.dataset).unwrap_or(f64::NAN);
            Ok(Run {
                mechanism,
                eps,
                seed,
                are,
                l1,
            })
        })
        .collect::<Result<_, _>>()?;

    let report = sweep_report(args, h, master, &workload, &mechanisms, &eps_values, &runs);
    let mut files = vec![(args.out.clone(), report.clone().into_bytes())];
    if let Some(summary) = &args.summary {
        let mut rows = String::new();
        for r in &runs {
            let _ = writeln!(rows, "avg_relative_error\t{}\t{}\t{}\t{}", r.mechanism.name(), r.eps, r.seed, r.are);
        }
        files.push((summary.clone(), rows.into_bytes()));
    }
    write_all_atomic(&files)?;
    print!("{report}");
    Ok(EXIT_OK)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn sweep_report(
    args: &EvalArgs,
    h: usize,
    master: u64,
    workload: &QueryWorkload,
    mechanisms: &[Mechanism],
    eps_values: &[f64],
    runs: &[Run],
) -> String {
    let mut report = String::new();
    let _ = writeln!(report, "[eval]");
    let _ = writeln!(report, "mode = sweep");
    let _ = writeln!(report, "original = {}", args.input.display());
    let _ = writeln!(report, "h = {h}");
    let _ = writeln!(report, "seed = {master}");
    let _ = writeln!(report, "seeds = {}", args.seeds);
    let _ = writeln!(report, "queries = {}", workload.prefixes.len());
    for &m in mechanisms {
        for &eps in eps_values {
            let sel = || runs.iter().filter(move |r| r.mechanism == m && r.eps == eps);
            let _ = writeln!(report, "\n[{} eps={}]", m.name(), eps);
            let _ = writeln!(report, "mean_avg_relative_error = {}", mean(sel().map(|r| r.are)));
            let _ = writeln!(report, "mean_length_distribution_l1 = {}", mean(sel().map(|r| r.l1)));
        }
    }
    if mechanisms.contains(&Mechanism::Aptb) && mechanisms.contains(&Mechanism::Baseline) {
        for &eps in eps_values {
            let of = |m: Mechanism| -> Vec<f64> {
                runs.iter().filter(|r| r.mechanism == m && r.eps == eps).map(|r| r.are).collect()
            };
            let (a, b) = (of(Mechanism::Aptb), of(Mechanism::Baseline));
            let wins = a.iter().zip(&b).filter(|(x, y)| x < y).count();
            let losses = a.iter().zip(&b).filter(|(x, y)| x > y).count();
            let _ = writeln!(report, "\n[sign-test eps={eps}]");
            let _ = writeln!(report, "aptb_wins = {wins}");
            let _ = writeln!(report, "baseline_wins = {losses}");
            let _ = writeln!(report, "ties = {}", a.len() - wins - losses);
            let _ = writeln!(report, "p_value = {}", sign_test_one_sided(wins, losses));
        }
    }
    report
}
