//! Monte Carlo check of the differential-privacy inequality on tiny inputs.
//!
//! The mechanism is run many times on a dataset and on a neighbour with one
//! trajectory removed, and the published outputs are tallied. For every
//! outcome seen often enough, the frequency under one input may exceed
//! `e^ε` times the frequency under the other by at most `z` binomial
//! standard errors, with `z` Bonferroni-corrected over all comparisons made
//! (never below 3). Passing is a necessary condition for privacy, not a proof.

use std::collections::BTreeMap;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::builder::AptbConfig;
use crate::dp::{Epsilon, RandomStream};
use crate::error::{Error, Result};
use crate::eval::baseline::BaselineOptions;
use crate::pipeline::{publish, publish_baseline};
use crate::trajectory::{Dataset, StPoint, Trajectory, Universe};

pub const MIN_TRIALS: usize = 10_000;
/// Outcomes observed fewer times than this under both inputs are not tested.
pub const MIN_OBSERVATIONS: u64 = 50;
/// Family-wise false-alarm rate of the gate.
pub const FAMILY_ALPHA: f64 = 0.01;
const MAX_TRAJECTORIES: usize = 4;
const MAX_CELLS: u32 = 4;
const MAX_SLOTS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DpCheckReport {
    pub epsilon_claimed: Epsilon,
    /// Largest frequency ratio over the tested outcomes, in either direction.
    pub max_observed_ratio: f64,
    pub trials: usize,
    pub outcome_space: String,
    pub pass: bool,
    pub keys_checked: usize,
    /// Standard-error multiplier used by the gate.
    pub z: f64,
    /// Comparisons that would fail with a plain three-standard-error margin.
    pub strict_exceedances: usize,
    pub worst_key: Option<String>,
    pub violations: Vec<String>,
}

impl DpCheckReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("epsilon_claimed = {}\n", self.epsilon_claimed));
        s.push_str(&format!("bound = {}\n", self.epsilon_claimed.value().exp()));
        s.push_str(&format!("max_observed_ratio = {}\n", self.max_observed_ratio));
        s.push_str(&format!("trials = {}\n", self.trials));
        s.push_str(&format!("outcome_space = {}\n", self.outcome_space));
        s.push_str(&format!("keys_checked = {}\n", self.keys_checked));
        s.push_str(&format!("z = {}\n", self.z));
        s.push_str(&format!("strict_exceedances = {}\n", self.strict_exceedances));
        s.push_str(&format!("worst_key = {}\n", self.worst_key.as_deref().unwrap_or("-")));
        s.push_str(&format!("pass = {}\n", self.pass));
        for v in &self.violations {
            s.push_str(&format!("violation = {v}\n"));
        }
        s
    }
}

fn check_tiny(d: &Dataset, removed_index: usize, trials: usize) -> Result<()> {
    let u = d.universe();
    if d.len() > MAX_TRAJECTORIES || u.cell_count() > MAX_CELLS || u.slots() > MAX_SLOTS {
        return Err(Error::Precondition(format!(
            "dataset too large for the empirical check: {} trajectories over {} (limit {} trajectories, {} cells, {} slots)",
            d.len(),
            u,
            MAX_TRAJECTORIES,
            MAX_CELLS,
            MAX_SLOTS
        )));
    }
    if trials < MIN_TRIALS {
        return Err(Error::Precondition(format!("trials must be >= {MIN_TRIALS}, got {trials}")));
    }
    if removed_index >= d.len() {
        return Err(Error::IndexOutOfRange {
            index: removed_index,
            len: d.len(),
        });
    }
    Ok(())
}

/// Order-independent key of a published dataset.
pub fn outcome_key(d: &Dataset) -> String {
    let mut rows: Vec<String> = d.trajectories().iter().map(|t| t.to_string()).collect();
    if rows.is_empty() {
        return "(empty)".into();
    }
    rows.sort();
    rows.join(" | ")
}

/// Checks the full main pipeline with `cfg` on `d` and on `d` without
/// trajectory `removed_index`. Trial `i` on either input uses a stream
/// derived from `cfg.seed`.
pub fn empirical_dp_check(d: &Dataset, removed_index: usize, cfg: &AptbConfig, trials: usize) -> Result<DpCheckReport> {
    cfg.validate()?;
    dp_check_with(d, removed_index, cfg.total_eps, trials, cfg.seed, |data, seed| {
        let mut run = cfg.clone();
        run.seed = seed;
        Ok(publish(data, &run)?.dataset)
    })
}

/// Same check for the uniform-budget baseline.
pub fn empirical_dp_check_baseline(
    d: &Dataset,
    removed_index: usize,
    eps: Epsilon,
    h: usize,
    opts: &BaselineOptions,
    seed: u64,
    trials: usize,
) -> Result<DpCheckReport> {
    dp_check_with(d, removed_index, eps, trials, seed, |data, s| {
        Ok(publish_baseline(data, eps, h, opts, s)?.dataset)
    })
}

/// Core of the check for an arbitrary mechanism `run(dataset, seed)`.
pub fn dp_check_with<F>(
    d: &Dataset,
    removed_index: usize,
    eps: Epsilon,
    trials: usize,
    master_seed: u64,
    run: F,
) -> Result<DpCheckReport>
where
    F: Fn(&Dataset, u64) -> Result<Dataset> + Sync,
{
    check_tiny(d, removed_index, trials)?;
    let neighbour = d.remove_one(removed_index)?;
    let tally = |data: &Dataset, offset: u64| -> Result<BTreeMap<String, u64>> {
        (0..trials as u64)
            .into_par_iter()
            .map(|i| {
                let seed = RandomStream::derive(master_seed, 2 * i + offset).seed();
                run(data, seed).map(|out| outcome_key(&out))
            })
            .try_fold(BTreeMap::new, |mut acc, key| {
                *acc.entry(key?).or_insert(0u64) += 1;
                Ok::<_, Error>(acc)
            })
            .try_reduce(BTreeMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                Ok(a)
            })
    };
    let on_d = tally(d, 0)?;
    let on_neighbour = tally(&neighbour, 1)?;
    let mut report = compare_frequencies(&on_d, &on_neighbour, eps, trials);
    report.outcome_space = format!(
        "published datasets as sorted multisets over {}; {} distinct under D, {} under D'",
        d.universe(),
        on_d.len(),
        on_neighbour.len()
    );
    Ok(report)
}

/// Standard-error multiplier for `comparisons` one-sided tests.
pub fn gate_z(comparisons: usize) -> f64 {
    let std = Normal::standard();
    let per_test = FAMILY_ALPHA / comparisons.max(1) as f64;
    std.inverse_cdf(1.0 - per_test).max(3.0)
}

/// Applies the two-sided frequency-ratio gate to tallies from `trials` runs each.
pub fn compare_frequencies(
    on_d: &BTreeMap<String, u64>,
    on_neighbour: &BTreeMap<String, u64>,
    eps: Epsilon,
    trials: usize,
) -> DpCheckReport {
    let n = trials as f64;
    let bound = eps.value().exp();
    let mut keys: Vec<&String> = on_d.keys().chain(on_neighbour.keys()).collect();
    keys.sort();
    keys.dedup();

    let tested: Vec<(&String, u64, u64)> = keys
        .into_iter()
        .map(|k| (k, on_d.get(k).copied().unwrap_or(0), on_neighbour.get(k).copied().unwrap_or(0)))
        .filter(|&(_, a, b)| a >= MIN_OBSERVATIONS || b >= MIN_OBSERVATIONS)
        .collect();
    let z = gate_z(2 * tested.len());

    let mut max_ratio: f64 = 0.0;
    let mut worst_key = None;
    let mut violations = Vec::new();
    let mut strict_exceedances = 0;
    for &(key, a, b) in &tested {
        let (pa, pb) = (a as f64 / n, b as f64 / n);
        for (hi, lo, dir) in [(pa, pb, "D/D'"), (pb, pa, "D'/D")] {
            let se = ((hi * (1.0 - hi) + bound * bound * lo * (1.0 - lo)) / n).sqrt();
            let slack = z * se;
            strict_exceedances += usize::from(hi > bound * lo + 3.0 * se);
            let ratio = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            if ratio > max_ratio {
                max_ratio = ratio;
                worst_key = Some(key.clone());
            }
            if hi > bound * lo + slack {
                violations.push(format!("{dir} key={key} freq={hi:.5} vs {lo:.5} (bound {bound:.4}, slack {slack:.5})"));
            }
        }
    }
    DpCheckReport {
        epsilon_claimed: eps,
        max_observed_ratio: max_ratio,
        trials,
        outcome_space: String::new(),
        pass: violations.is_empty() && trials >= MIN_TRIALS,
        keys_checked: tested.len(),
        z,
        strict_exceedances,
        worst_key,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyFixture {
    pub name: &'static str,
    pub dataset: Dataset,
    pub removed_index: usize,
}

fn fixture(name: &'static str, u: Universe, rows: &[&[(u32, u32)]], removed_index: usize) -> TinyFixture {
    let trajectories = rows
        .iter()
        .map(|r| Trajectory::new(r.iter().map(|&(c, s)| StPoint::new(c, s)).collect()).expect("fixture is valid"))
        .collect();
    TinyFixture {
        name,
        dataset: Dataset::new(u, trajectories).expect("fixture is valid"),
        removed_index,
    }
}

/// Bundled neighbour pairs small enough for [`empirical_dp_check`].
pub fn tiny_fixtures() -> Vec<TinyFixture> {
    let line = Universe::new(1, 2, 2).expect("valid universe");
    let grid = Universe::new(2, 2, 2).expect("valid universe");
    vec![
        fixture("mixed", line, &[&[(0, 0)], &[(1, 1)], &[(0, 0), (1, 1)]], 2),
        fixture("duplicates", line, &[&[(0, 0)], &[(0, 0)]], 1),
        fixture("lone", grid, &[&[(2, 1)]], 0),
        fixture("spread", grid, &[&[(0, 0)], &[(1, 0)], &[(2, 1)], &[(3, 1)]], 3),
        fixture("shared-prefix", grid, &[&[(1, 0)], &[(1, 0), (2, 1)], &[(1, 0), (0, 1)]], 1),
        fixture("repeated-path", grid, &[&[(0, 0), (3, 1)], &[(0, 0), (3, 1)], &[(1, 0), (2, 1)], &[(3, 0)]], 0),
    ]
}

pub fn tiny_fixture(name: &str) -> Option<TinyFixture> {
    tiny_fixtures().into_iter().find(|f| f.name == name)
}
