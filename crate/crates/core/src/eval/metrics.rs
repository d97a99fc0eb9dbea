use std::collections::{HashMap, HashSet};

use crate::dp::RandomStream;
use crate::error::{Error, Result};
use crate::trajectory::{Dataset, StPoint, Universe};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryWorkload {
    pub prefixes: Vec<Vec<StPoint>>,
    /// Fraction of the original dataset size that floors each relative-error denominator.
    pub sanity_bound: f64,
}

impl QueryWorkload {
    pub fn new(prefixes: Vec<Vec<StPoint>>) -> Self {
        Self {
            prefixes,
            sanity_bound: 0.001,
        }
    }

    /// Every prefix of length `1..=h` with a positive count in `original`, plus
    /// as many distinct zero-count prefixes drawn uniformly from all
    /// slot-increasing label sequences of length `1..=h`.
    pub fn standard(original: &Dataset, h: usize, seed: u64) -> Self {
        let counts = prefix_counts(original, h);
        let mut positive: Vec<Vec<StPoint>> = counts.keys().cloned().collect();
        positive.sort();

        let universe = original.universe();
        let mut rng = RandomStream::new(seed);
        let sizes = sequence_space_sizes(universe, h);
        let space: f64 = sizes.iter().sum();
        let zero_space = space - positive.len() as f64;
        let wanted = (positive.len() as f64).min(zero_space.max(0.0)) as usize;

        let mut zeros = Vec::with_capacity(wanted);
        let mut seen = HashSet::new();
        let max_attempts = 100 * wanted + 1000;
        for _ in 0..max_attempts {
            if zeros.len() == wanted {
                break;
            }
            let q = sample_sequence(universe, &sizes, &mut rng);
            if !counts.contains_key(&q) && seen.insert(q.clone()) {
                zeros.push(q);
            }
        }

        positive.extend(zeros);
        Self::new(positive)
    }
}

/// Number of slot-increasing sequences of each length `1..=h`:
/// `C(T, l) * cells^l`.
fn sequence_space_sizes(universe: &Universe, h: usize) -> Vec<f64> {
    let slots = universe.slots() as usize;
    let cells = universe.cell_count() as f64;
    (1..=h.min(slots))
        .map(|l| binomial(slots, l) * cells.powi(l as i32))
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn sample_sequence(universe: &Universe, sizes: &[f64], rng: &mut RandomStream) -> Vec<StPoint> {
    let len = rng.weighted_index(sizes) + 1;
    let mut slots: Vec<u32> = (0..universe.slots()).collect();
    // partial Fisher-Yates for a uniform slot subset
    for i in 0..len {
        let j = i + rng.below((slots.len() - i) as u64) as usize;
        slots.swap(i, j);
    }
    let mut chosen = slots[..len].to_vec();
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|slot| StPoint::new(rng.below(universe.cell_count() as u64) as u32, slot))
        .collect()
}

/// Counts of every prefix of length `1..=h` occurring in `d`.
pub fn prefix_counts(d: &Dataset, h: usize) -> HashMap<Vec<StPoint>, u64> {
    let mut counts = HashMap::new();
    for t in d.trajectories() {
        for l in 1..=t.len().min(h) {
            *counts.entry(t.points()[..l].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

fn same_universe(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.universe() != b.universe() {
        return Err(Error::Precondition(format!(
            "datasets use different universes ({} vs {})",
            a.universe(),
            b.universe()
        )));
    }
    Ok(())
}

/// Mean over the workload of `|pub(q) - orig(q)| / max(orig(q), s * |original|)`.
pub fn avg_relative_error(original: &Dataset, published: &Dataset, w: &QueryWorkload) -> Result<f64> {
    same_universe(original, published)?;
    if w.prefixes.is_empty() {
        return Err(Error::Precondition("query workload is empty".into()));
    }
    let h = w.prefixes.iter().map(Vec::len).max().unwrap_or(0);
    let orig = prefix_counts(original, h);
    let publ = prefix_counts(published, h);
    let floor = w.sanity_bound * original.len() as f64;
    let total: f64 = w
        .prefixes
        .iter()
        .map(|q| {
            let o = orig.get(q).copied().unwrap_or(0) as f64;
            let p = publ.get(q).copied().unwrap_or(0) as f64;
            let denom = o.max(floor);
            if denom == 0.0 {
                // empty original: fall back to absolute error
                p
            } else {
                (p - o).abs() / denom
            }
        })
        .sum();
    Ok(total / w.prefixes.len() as f64)
}

/// L1 distance between the trajectory-length distributions, in `[0, 2]`.
pub fn length_distribution_l1(original: &Dataset, published: &Dataset) -> Result<f64> {
    same_universe(original, published)?;
    if original.is_empty() || published.is_empty() {
        return Err(Error::Precondition("length distribution of an empty dataset".into()));
    }
    let a = original.length_histogram();
    let b = published.length_histogram();
    let (na, nb) = (original.len() as f64, published.len() as f64);
    Ok((0..a.len().max(b.len()))
        .map(|i| {
            let fa = a.get(i).copied().unwrap_or(0) as f64 / na;
            let fb = b.get(i).copied().unwrap_or(0) as f64 / nb;
            (fa - fb).abs()
        })
        .sum())
}

/// One-sided sign-test p-value `P(Bin(n, ½) >= wins)` with `n = wins + losses`.
pub fn sign_test_one_sided(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let total = 2f64.powi(n as i32);
    (wins..=n).map(|j| binomial(n, j)).sum::<f64>() / total
}
