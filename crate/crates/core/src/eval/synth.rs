use crate::dp::RandomStream;
use crate::error::{Error, Result};
use crate::trajectory::{Dataset, StPoint, Trajectory, Universe};

/// Synthetic trajectories from a slot-monotone random walk.
///
/// Cell `c` has popularity `(c + 1)^-skew`. A trajectory draws its length
/// uniformly from `1..=min(max_len, T)` and a uniform set of that many slots.
/// The first cell follows popularity alone; each later cell is weighted by
/// popularity times `1 / (1 + manhattan distance)` from the previous cell.
pub fn synth_dataset(
    universe: Universe,
    n_traj: usize,
    max_len: usize,
    popularity_skew: f64,
    seed: u64,
) -> Result<Dataset> {
    if max_len < 1 {
        return Err(Error::param("max_len", "must be >= 1"));
    }
    if !popularity_skew.is_finite() {
        return Err(Error::param("popularity_skew", "must be finite"));
    }
    let mut rng = RandomStream::new(seed);
    let cells = universe.cell_count();
    let popularity: Vec<f64> = (0..cells).map(|c| ((c + 1) as f64).powf(-popularity_skew)).collect();
    let cols = universe.cols();
    let coords = |c: u32| ((c / cols) as i64, (c % cols) as i64);
    let longest = max_len.min(universe.slots() as usize);

    let mut weights = vec![0.0; cells as usize];
    let mut trajectories = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let len = 1 + rng.below(longest as u64) as usize;
        let mut slots: Vec<u32> = (0..universe.slots()).collect();
        for i in 0..len {
            let j = i + rng.below((slots.len() - i) as u64) as usize;
            slots.swap(i, j);
        }
        let mut chosen = slots[..len].to_vec();
        chosen.sort_unstable();

        let mut points = Vec::with_capacity(len);
        let mut prev: Option<u32> = None;
        for slot in chosen {
            let cell = match prev {
                None => rng.weighted_index(&popularity) as u32,
                Some(p) => {
                    let (pr, pc) = coords(p);
                    for (c, w) in weights.iter_mut().enumerate() {
                        let (r, k) = coords(c as u32);
                        let dist = (r - pr).abs() + (k - pc).abs();
                        *w = popularity[c] / (1.0 + dist as f64);
                    }
                    rng.weighted_index(&weights) as u32
                }
            };
            points.push(StPoint::new(cell, slot));
            prev = Some(cell);
        }
        trajectories.push(Trajectory::new(points)?);
    }
    Dataset::new(universe, trajectories)
}
