use crate::builder::{Noise, TestHooks};
use crate::builder::theta_rule;
use crate::dp::{BudgetLedger, Epsilon, Purpose, RandomStream, ScopeKey};
use crate::error::{Error, Result};
use crate::tree::{NodeId, PrefixTree};
use crate::trajectory::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOptions {
    pub theta_floor: f64,
    pub theta_override: Option<f64>,
    #[doc(hidden)]
    pub hooks: TestHooks,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            theta_floor: 1.0,
            theta_override: None,
            hooks: TestHooks::default(),
        }
    }
}

/// Uniform-budget noisy prefix tree: every node of every level gets
/// `Lap(h / eps)` on its own count. Candidate children and the expansion
/// threshold follow the main mechanism, with one class per level.
pub fn build_baseline_tree(
    d: &Dataset,
    eps: Epsilon,
    h: usize,
    opts: &BaselineOptions,
    rng: RandomStream,
) -> Result<(PrefixTree, BudgetLedger)> {
    if h < 1 {
        return Err(Error::param("h", "must be >= 1"));
    }
    let mut noise = if opts.hooks.zero_noise { Noise::zero() } else { Noise::new(rng) };
    let eps_level = eps.value() / h as f64;
    let exact = PrefixTree::build_real(d, h);
    let mut tree = PrefixTree::new(*d.universe(), h);
    let mut ledger = BudgetLedger::new();
    let mut exact_of: Vec<Option<NodeId>> = vec![Some(PrefixTree::ROOT)];
    let mut frontier = vec![PrefixTree::ROOT];

    for _level in 1..=h {
        let mut fresh = Vec::new();
        for &parent in &frontier {
            for label in tree.son_set(parent) {
                let ex = exact_of[parent].and_then(|e| exact.child(e, label));
                let truth = ex.map_or(0.0, |e| exact.node(e).count);
                let id = tree.add_child(parent, label, truth + noise.laplace(eps_level));
                tree.node_mut(id).eps = Some(eps_level);
                ledger.charge(ScopeKey::node(tree.path(id)), eps_level, Purpose::Count)?;
                exact_of.push(ex);
                fresh.push(id);
            }
        }
        if fresh.is_empty() {
            break;
        }
        let theta = opts
            .theta_override
            .unwrap_or_else(|| theta_rule(fresh.len(), eps_level, opts.theta_floor));
        frontier = fresh
            .into_iter()
            .filter(|&id| tree.node(id).count >= theta && !tree.son_set(id).is_empty())
            .collect();
        frontier.sort_unstable();
    }

    let level_one: f64 = tree
        .node(PrefixTree::ROOT)
        .children
        .iter()
        .map(|&c| tree.node(c).count.max(0.0))
        .sum();
    tree.node_mut(PrefixTree::ROOT).count = level_one;
    Ok((tree, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::verify_composition;

    #[test]
    fn zero_noise_matches_exact_counts() {
        let d = Dataset::parse("universe rows=1 cols=2 slots=3\n0:0 1:1\n0:0 1:1 0:2\n1:0\n").unwrap();
        let opts = BaselineOptions {
            hooks: TestHooks { zero_noise: true, fault: None },
            theta_override: Some(0.5),
            ..Default::default()
        };
        let (tree, _) = build_baseline_tree(&d, Epsilon::new(1.0).unwrap(), 3, &opts, RandomStream::new(0)).unwrap();
        let exact = PrefixTree::build_real(&d, 3);
        for id in exact.preorder().into_iter().skip(1) {
            let path = exact.path(id);
            assert_eq!(tree.prefix_count(&path), exact.node(id).count, "{path:?}");
        }
    }

    #[test]
    fn uniform_budget_sums_to_eps() {
        let d = Dataset::parse("universe rows=1 cols=2 slots=3\n0:0 1:1 0:2\n0:0 1:1 0:2\n").unwrap();
        let eps = Epsilon::new(1.0).unwrap();
        let opts = BaselineOptions { theta_override: Some(f64::MIN), ..Default::default() };
        let (tree, ledger) = build_baseline_tree(&d, eps, 3, &opts, RandomStream::new(4)).unwrap();
        let report = verify_composition(&ledger, &tree, eps).unwrap();
        assert!(report.pass);
        assert!((report.max_path_sum - 1.0).abs() < 1e-12);
    }
}
