//! Consistency repair of a noisy tree and regeneration of a dataset from it.
//!
//! A consistent tree has non-negative integer counts, every child count at
//! most its parent's, and every sibling group summing to at most the parent.

use crate::tree::{NodeId, PrefixTree};
use crate::trajectory::{Dataset, StPoint, Trajectory};

/// A prefix tree whose counts are non-negative integers satisfying the
/// parent/children constraints. Zero-count nodes have been dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentTree(PrefixTree);

impl ConsistentTree {
    pub fn tree(&self) -> &PrefixTree {
        &self.0
    }

    pub fn into_inner(self) -> PrefixTree {
        self.0
    }

    pub fn count(&self, id: NodeId) -> u64 {
        self.0.node(id).count as u64
    }
}

/// Repairs `t` top-down: clamp negatives to 0, rescale a sibling group
/// proportionally when it outweighs its parent, then integerize each sibling
/// group with largest-remainder rounding capped by the integer parent.
pub fn enforce_consistency(t: &PrefixTree) -> ConsistentTree {
    let mut tree = t.clone();
    let levels = tree.levels();

    let root = tree.node_mut(PrefixTree::ROOT);
    root.count = root.count.max(0.0);
    for level in &levels {
        for &id in level {
            let parent = tree.node(id).count;
            let children = tree.node(id).children.clone();
            let mut sum = 0.0;
            for &c in &children {
                let n = tree.node_mut(c);
                n.count = n.count.max(0.0);
                sum += n.count;
            }
            if sum > parent {
                let scale = parent / sum;
                for &c in &children {
                    tree.node_mut(c).count *= scale;
                }
            }
        }
    }

    let root = tree.node_mut(PrefixTree::ROOT);
    root.count = root.count.round();
    for level in &levels {
        for &id in level {
            let parent = tree.node(id).count;
            let children = tree.node(id).children.clone();
            let values: Vec<f64> = children.iter().map(|&c| tree.node(c).count).collect();
            for (&c, v) in children.iter().zip(round_group(&values, parent)) {
                tree.node_mut(c).count = v;
            }
        }
    }

    ConsistentTree(tree.retain(|n| n.count > 0.0))
}

/// Largest-remainder rounding of non-negative `values` to integers whose sum
/// is at most `cap` (an integer). Remainder ties go to the earlier entry.
fn round_group(values: &[f64], cap: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let sum: f64 = values.iter().sum();
    let scaled: Vec<f64> = if sum > cap {
        let s = if sum > 0.0 { cap / sum } else { 0.0 };
        values.iter().map(|v| v * s).collect()
    } else {
        values.to_vec()
    };
    let scaled_sum: f64 = scaled.iter().sum();
    let target = scaled_sum.round().min(cap);

    let mut out: Vec<f64> = scaled.iter().map(|v| v.floor()).collect();
    let floor_sum: f64 = out.iter().sum();
    let mut units = (target - floor_sum).max(0.0) as usize;

    let mut order: Vec<usize> = (0..scaled.len()).filter(|&i| scaled[i] > out[i]).collect();
    order.sort_by(|&a, &b| (scaled[b] - out[b]).total_cmp(&(scaled[a] - out[a])).then(a.cmp(&b)));
    for i in order {
        if units == 0 {
            break;
        }
        out[i] += 1.0;
        units -= 1;
    }
    out
}

/// Per-node terminal counts `count - Σ child counts`, in pre-order, root excluded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TerminalMap {
    entries: Vec<(Vec<StPoint>, u64)>,
}

impl TerminalMap {
    pub fn entries(&self) -> &[(Vec<StPoint>, u64)] {
        &self.entries
    }

    pub fn get(&self, prefix: &[StPoint]) -> Option<u64> {
        self.entries.iter().find(|(p, _)| p == prefix).map(|(_, c)| *c)
    }
}

pub fn terminal_counts(t: &ConsistentTree) -> TerminalMap {
    let tree = t.tree();
    let entries = tree
        .preorder()
        .into_iter()
        .filter(|&id| id != PrefixTree::ROOT)
        .map(|id| {
            let node = tree.node(id);
            let below: u64 = node.children.iter().map(|&c| t.count(c)).sum();
            (tree.path(id), t.count(id) - below)
        })
        .collect();
    TerminalMap { entries }
}

/// Emits `terminal(N)` copies of every node's root-to-node path, depth-first
/// in `(slot, cell)` order.
pub fn generate_dataset(t: &ConsistentTree) -> Dataset {
    let mut trajectories = Vec::new();
    for (path, n) in terminal_counts(t).entries {
        if n == 0 {
            continue;
        }
        let traj = Trajectory::new(path).expect("tree paths are slot-increasing");
        trajectories.extend(std::iter::repeat_n(traj, n as usize));
    }
    Dataset::new(*t.tree().universe(), trajectories).expect("tree labels lie in the universe")
}
