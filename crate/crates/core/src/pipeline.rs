use crate::builder::{build_noisy_tree, AptbConfig, NoisyBuild};
use crate::consistency::{enforce_consistency, generate_dataset, ConsistentTree};
use crate::dp::{verify_composition, BudgetLedger, CompositionReport, Epsilon, RandomStream};
use crate::error::{Error, Result};
use crate::eval::baseline::{build_baseline_tree, BaselineOptions};
use crate::tree::PrefixTree;
use crate::trajectory::Dataset;

/// Everything produced by one end-to-end run.
#[derive(Debug, Clone)]
pub struct Publication {
    pub noisy_tree: PrefixTree,
    pub ledger: BudgetLedger,
    pub audit: CompositionReport,
    pub consistent: ConsistentTree,
    pub dataset: Dataset,
}

fn finish(noisy_tree: PrefixTree, ledger: BudgetLedger, total: Epsilon) -> Result<Publication> {
    let audit = verify_composition(&ledger, &noisy_tree, total)?;
    if !audit.pass {
        return Err(Error::AuditFailed {
            path: audit.worst_path.clone(),
            spent: audit.max_path_sum,
            total: total.value(),
        });
    }
    let consistent = enforce_consistency(&noisy_tree);
    let dataset = generate_dataset(&consistent);
    Ok(Publication {
        noisy_tree,
        ledger,
        audit,
        consistent,
        dataset,
    })
}

/// Builds the noisy tree, audits the ledger, repairs consistency and
/// regenerates the published dataset. Fails if the audit does not pass.
pub fn publish(d: &Dataset, cfg: &AptbConfig) -> Result<Publication> {
    let NoisyBuild { tree, ledger, .. } = build_noisy_tree(d, cfg)?;
    finish(tree, ledger, cfg.total_eps)
}

/// Same as [`publish`] with the uniform-budget baseline tree.
pub fn publish_baseline(d: &Dataset, eps: Epsilon, h: usize, opts: &BaselineOptions, seed: u64) -> Result<Publication> {
    let (tree, ledger) = build_baseline_tree(d, eps, h, opts, RandomStream::new(seed))?;
    finish(tree, ledger, eps)
}
