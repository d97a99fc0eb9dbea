//! Noisy prefix-tree construction.
//!
//! A run spends a small preprocessing share of the budget on the maximum
//! trajectory length (which fixes the tree height) and on the length
//! histogram (which fixes the root count). The rest is distributed over the
//! tree: each node receives `remaining / (levels it could still span + 1)`.
//! Nodes sharing a level and an allocation form a budget class. A class is
//! ranked by a preliminary noisy count and cut into clusters wherever the gap
//! between consecutive ranks exceeds the outlier distance δ. Inside a cluster
//! the exponential mechanism repeatedly picks adjacent groups with similar
//! counts to merge. Every final group becomes a coarse node that receives one
//! Laplace draw on its total, and each member publishes the average. Nodes
//! whose published count falls below the class threshold θ are not expanded.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::dp::{laplace, BudgetLedger, Epsilon, Purpose, RandomStream, ScopeKey};
use crate::error::{Error, Result};
use crate::tree::{NodeId, PrefixTree};
use crate::trajectory::{Dataset, StPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delta {
    /// Twice the standard deviation of the class's count noise, `2√2 / eps_count`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SonSetMode {
    /// Every later-slot label of the universe is a candidate child.
    #[default]
    Universe,
    /// Only labels occurring somewhere in the input are candidates.
    /// This leaks which labels are present and is NOT differentially private;
    /// it exists for utility experiments.
    Observed,
}

/// Injected defects used to show that the audit and the empirical checker
/// have power. Never set outside tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Coarse-node noise is drawn as if its budget were `factor` times the
    /// charged amount.
    UnchargedCountBoost(f64),
    /// Records one extra global charge of half the total budget.
    Overcharge,
}

#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TestHooks {
    /// Replace every Laplace draw by 0 and every exponential-mechanism
    /// selection by an arg-max (the infinite-budget limit).
    pub zero_noise: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AptbConfig {
    pub total_eps: Epsilon,
    pub h_user: usize,
    pub pre_fraction: f64,
    pub delta: Delta,
    pub theta_floor: f64,
    pub theta_override: Option<f64>,
    pub split_rank: f64,
    pub split_select: f64,
    pub split_count: f64,
    pub seed: u64,
    pub sonset: SonSetMode,
    #[doc(hidden)]
    pub hooks: TestHooks,
}

impl AptbConfig {
    pub fn new(total_eps: Epsilon, h_user: usize, seed: u64) -> Self {
        Self {
            total_eps,
            h_user,
            pre_fraction: 0.1,
            delta: Delta::Auto,
            theta_floor: 1.0,
            theta_override: None,
            split_rank: 0.15,
            split_select: 0.15,
            split_count: 0.70,
            seed,
            sonset: SonSetMode::Universe,
            hooks: TestHooks::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_user < 1 {
            return Err(Error::param("h", "must be >= 1"));
        }
        if !(self.pre_fraction > 0.0 && self.pre_fraction < 1.0) {
            return Err(Error::param("pre_fraction", format!("must lie in (0, 1), got {}", self.pre_fraction)));
        }
        if let Delta::Fixed(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::param("delta", format!("must be finite and >= 0, got {d}")));
            }
        }
        if !(self.theta_floor >= 0.0 && self.theta_floor.is_finite()) {
            return Err(Error::param("theta_floor", "must be finite and >= 0"));
        }
        if let Some(t) = self.theta_override {
            if !t.is_finite() {
                return Err(Error::param("theta", "must be finite"));
            }
        }
        let fractions = [
            ("split_rank", self.split_rank),
            ("split_select", self.split_select),
            ("split_count", self.split_count),
        ];
        for (name, f) in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {f}")));
            }
        }
        let sum: f64 = fractions.iter().map(|(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param("split_count", format!("node budget fractions must sum to 1, got {sum}")));
        }
        if self.split_count <= 0.0 {
            return Err(Error::param("split_count", "must be > 0"));
        }
        Ok(())
    }
}

/// Source of mechanism randomness; in the zero-noise limit it is inert.
#[derive(Debug, Clone)]
pub struct Noise {
    rng: RandomStream,
    zero: bool,
}

impl Noise {
    pub fn new(rng: RandomStream) -> Self {
        Self { rng, zero: false }
    }

    #[doc(hidden)]
    pub fn zero() -> Self {
        Self {
            rng: RandomStream::new(0),
            zero: true,
        }
    }

    fn for_config(cfg: &AptbConfig) -> Self {
        if cfg.hooks.zero_noise {
            Self::zero()
        } else {
            Self::new(RandomStream::new(cfg.seed))
        }
    }

    /// A draw from Lap(1 / eps).
    pub fn laplace(&mut self, eps: f64) -> f64 {
        if self.zero {
            0.0
        } else {
            laplace(1.0 / eps, &mut self.rng)
        }
    }

    /// Exponential mechanism with score sensitivity 1.
    pub fn select(&mut self, scores: &[f64], eps: Epsilon) -> usize {
        if self.zero {
            let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            scores.iter().position(|&s| s == top).unwrap_or(0)
        } else {
            crate::dp::exp_mechanism(scores, eps, 1.0, &mut self.rng)
        }
    }
}

pub const SCOPE_LENGTH: &str = "length";
pub const SCOPE_HISTOGRAM: &str = "histogram";

/// Splits ε into the length budget, the histogram budget and the tree budget.
/// The two preprocessing budgets are charged as global stages; the tree
/// budget is charged node by node during construction.
pub fn split_budget(cfg: &AptbConfig, ledger: &mut BudgetLedger) -> Result<(Epsilon, Epsilon, Epsilon)> {
    let total = cfg.total_eps.value();
    let pre = cfg.pre_fraction * total;
    let eps_len = Epsilon::new(pre / 2.0)?;
    let eps_hist = Epsilon::new(pre / 2.0)?;
    let eps_tree = Epsilon::new(total - pre)?;
    ledger.charge(ScopeKey::global(SCOPE_LENGTH), eps_len.value(), Purpose::PreLength)?;
    ledger.charge(ScopeKey::global(SCOPE_HISTOGRAM), eps_hist.value(), Purpose::PreHistogram)?;
    Ok((eps_len, eps_hist, eps_tree))
}

/// Noisy tree height and noisy length histogram.
///
/// The height is the noisy maximum length rounded and clamped to
/// `[1, h_user]`. Histogram entry `i` covers length `i + 1`; trajectories
/// longer than the height are counted in the last bucket.
pub fn noisy_height(
    d: &Dataset,
    eps_len: Epsilon,
    eps_hist: Epsilon,
    h_user: usize,
    noise: &mut Noise,
) -> (usize, Vec<f64>) {
    let noisy_len = d.max_length() as f64 + noise.laplace(eps_len.value());
    let h = (noisy_len.round().max(1.0) as usize).clamp(1, h_user.max(1));
    let mut hist = vec![0.0; h];
    for t in d.trajectories() {
        hist[t.len().min(h) - 1] += 1.0;
    }
    for v in &mut hist {
        *v += noise.laplace(eps_hist.value());
    }
    (h, hist)
}

/// Budget for a node: `remaining / (min(max_expand, levels_left) + 1)`.
pub fn allocate_budget(eps_remaining: f64, max_expand: usize, levels_left: usize) -> f64 {
    eps_remaining / (max_expand.min(levels_left) + 1) as f64
}

/// Nodes of one level sharing one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetClass {
    pub level: usize,
    pub eps_node: Epsilon,
    pub members: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub members: Vec<NodeId>,
    /// Preliminary noisy counts aligned with `members` (empty if unranked).
    pub ranks: Vec<f64>,
}

impl Cluster {
    pub fn k(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseNode {
    pub members: Vec<NodeId>,
    pub noisy_total: f64,
    pub published_member_count: f64,
}

/// Cuts a descending sequence wherever consecutive values differ by more than `delta`.
pub fn partition_by_gap(sorted_desc: &[f64], delta: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..sorted_desc.len() {
        if sorted_desc[i - 1] - sorted_desc[i] > delta {
            out.push(start..i);
            start = i;
        }
    }
    if !sorted_desc.is_empty() {
        out.push(start..sorted_desc.len());
    }
    out
}

/// Ranks class members by `truth + Lap(1/eps_rank)` (charged per node) and
/// splits the ranking into clusters at gaps larger than `delta`.
pub fn cluster_nodes(
    tree: &PrefixTree,
    truth: &[f64],
    cls: &BudgetClass,
    delta: f64,
    eps_rank: Epsilon,
    noise: &mut Noise,
    ledger: &mut BudgetLedger,
) -> Result<Vec<Cluster>> {
    let mut ranked: Vec<(f64, StPoint, NodeId)> = Vec::with_capacity(cls.members.len());
    for &id in &cls.members {
        let rank = truth[id] + noise.laplace(eps_rank.value());
        ledger.charge(ScopeKey::node(tree.path(id)), eps_rank.value(), Purpose::Rank)?;
        ranked.push((rank, tree.node(id).label.expect("class member is not the root"), id));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let values: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    Ok(partition_by_gap(&values, delta)
        .into_iter()
        .map(|r| Cluster {
            members: ranked[r.clone()].iter().map(|x| x.2).collect(),
            ranks: values[r].to_vec(),
        })
        .collect())
}

/// Rounds `share` so that every multiple `j * share` for `j <= m` is exact in
/// binary floating point; returns the rounded share and `m * share`.
pub fn exact_share(total: f64, m: usize) -> (f64, f64) {
    assert!(m >= 1);
    let share = total / m as f64;
    if m == 1 || share == 0.0 || !share.is_finite() {
        return (share, share * m as f64);
    }
    let spare_bits = (usize::BITS - (m - 1).leading_zeros()) as i32 + 1;
    let exponent = share.abs().log2().floor() as i32;
    let quantum = 2f64.powi(exponent - 52 + spare_bits);
    let share = (share / quantum).round() * quantum;
    (share, share * m as f64)
}

/// Merges similar adjacent members of a cluster and noises each resulting
/// coarse node once; member counts in `tree` are set to the coarse average.
///
/// For `k > 2` the exponential mechanism runs up to `k` rounds, each with
/// `eps_select / k`, over all adjacent group pairs (score: minus the gap of
/// the groups' mean true counts) plus a STOP candidate scored `-delta`. For
/// `k <= 2` there is only one merge scheme and no selection budget is spent.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_cluster(
    tree: &mut PrefixTree,
    truth: &[f64],
    cluster: &Cluster,
    eps_select: Option<Epsilon>,
    eps_count: Epsilon,
    delta: f64,
    noise: &mut Noise,
    ledger: &mut BudgetLedger,
    count_boost: f64,
) -> Result<Vec<CoarseNode>> {
    let k = cluster.k();
    let scopes: Vec<ScopeKey> = cluster.members.iter().map(|&id| ScopeKey::node(tree.path(id))).collect();

    // (member indices, sum of true counts)
    let mut groups: Vec<(Vec<usize>, f64)> = if k <= 2 {
        vec![((0..k).collect(), cluster.members.iter().map(|&id| truth[id]).sum())]
    } else {
        (0..k).map(|i| (vec![i], truth[cluster.members[i]])).collect()
    };

    if k > 2 {
        if let Some(sel) = eps_select {
            let per_round = Epsilon::new(sel.value() / k as f64)?;
            let mut scores = Vec::with_capacity(k);
            for _ in 0..k {
                if groups.len() == 1 {
                    break;
                }
                scores.clear();
                scores.push(-delta);
                scores.extend(groups.windows(2).map(|w| {
                    let left = w[0].1 / w[0].0.len() as f64;
                    let right = w[1].1 / w[1].0.len() as f64;
                    -(left - right).abs()
                }));
                let pick = noise.select(&scores, per_round);
                if pick == 0 {
                    break;
                }
                let (members, sum) = groups.remove(pick);
                groups[pick - 1].0.extend(members);
                groups[pick - 1].1 += sum;
            }
            // unspent rounds are charged too
            for scope in &scopes {
                ledger.charge(scope.clone(), sel.value(), Purpose::Select)?;
            }
        }
    }

    let mut coarse = Vec::with_capacity(groups.len());
    for (members, true_total) in groups {
        let m = members.len();
        let drawn = true_total + noise.laplace(eps_count.value() * count_boost);
        let (share, noisy_total) = exact_share(drawn, m);
        let ids: Vec<NodeId> = members.iter().map(|&i| cluster.members[i]).collect();
        for (&i, &id) in members.iter().zip(&ids) {
            tree.node_mut(id).count = share;
            ledger.charge(scopes[i].clone(), eps_count.value(), Purpose::Count)?;
        }
        coarse.push(CoarseNode {
            members: ids,
            noisy_total,
            published_member_count: share,
        });
    }
    Ok(coarse)
}

/// Expansion threshold `max(floor, ln(max(k, 2)) / eps_count)`: with Laplace
/// tail `P = ½·exp(-eps_count·θ)` this keeps `k·P <= ½`.
pub fn theta_rule(k: usize, eps_count: f64, floor: f64) -> f64 {
    floor.max((k.max(2) as f64).ln() / eps_count)
}

pub fn compute_theta(k: usize, eps_count: Epsilon, cfg: &AptbConfig) -> f64 {
    match cfg.theta_override {
        Some(theta) => theta,
        None => theta_rule(k, eps_count.value(), cfg.theta_floor),
    }
}

/// Per-class record of the threshold applied, one per distinct count budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRecord {
    pub level: usize,
    pub k: usize,
    pub eps_count: f64,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct NoisyBuild {
    pub tree: PrefixTree,
    pub ledger: BudgetLedger,
    pub height: usize,
    pub noisy_hist: Vec<f64>,
    pub coarse_nodes: Vec<CoarseNode>,
    pub thresholds: Vec<ThresholdRecord>,
    pub classes: Vec<BudgetClass>,
}

/// Runs the full mechanism on `d`.
pub fn build_noisy_tree(d: &Dataset, cfg: &AptbConfig) -> Result<NoisyBuild> {
    cfg.validate()?;
    let mut ledger = BudgetLedger::new();
    let mut noise = Noise::for_config(cfg);
    let count_boost = match cfg.hooks.fault {
        Some(Fault::UnchargedCountBoost(f)) => f,
        _ => 1.0,
    };

    let (eps_len, eps_hist, eps_tree) = split_budget(cfg, &mut ledger)?;
    let (h, noisy_hist) = noisy_height(d, eps_len, eps_hist, cfg.h_user, &mut noise);

    let exact = PrefixTree::build_real(d, h);
    let mut tree = PrefixTree::new(*d.universe(), h);
    if cfg.sonset == SonSetMode::Observed {
        let labels = d.trajectories().iter().flat_map(|t| t.points().iter().copied()).collect();
        tree.set_candidate_labels(Some(labels));
    }
    tree.node_mut(PrefixTree::ROOT).count = noisy_hist.iter().map(|v| v.max(0.0)).sum();

    // indexed by NodeId of `tree`
    let mut truth = vec![d.len() as f64];
    let mut exact_of = vec![Some(PrefixTree::ROOT)];
    let mut remaining = vec![eps_tree.value()];

    let mut coarse_nodes = Vec::new();
    let mut thresholds = Vec::new();
    let mut all_classes = Vec::new();
    let mut frontier = vec![PrefixTree::ROOT];

    for level in 1..=h {
        let mut by_alloc: BTreeMap<u64, Vec<NodeId>> = BTreeMap::new();
        for &parent in &frontier {
            let parent_exact = exact_of[parent];
            for label in tree.son_set(parent) {
                let ex = parent_exact.and_then(|e| exact.child(e, label));
                let id = tree.add_child(parent, label, 0.0);
                let alloc = allocate_budget(remaining[parent], tree.max_expand(id), h - level);
                tree.node_mut(id).eps = Some(alloc);
                truth.push(ex.map_or(0.0, |e| exact.node(e).count));
                exact_of.push(ex);
                remaining.push(remaining[parent] - alloc);
                by_alloc.entry(alloc.to_bits()).or_default().push(id);
            }
        }
        if by_alloc.is_empty() {
            break;
        }

        let mut next = Vec::new();
        for (bits, members) in by_alloc {
            let cls = BudgetClass {
                level,
                eps_node: Epsilon::new(f64::from_bits(bits))?,
                members,
            };
            let expandable = process_class(
                &mut tree,
                &truth,
                &cls,
                cfg,
                &mut noise,
                &mut ledger,
                count_boost,
                &mut coarse_nodes,
                &mut thresholds,
            )?;
            next.extend(expandable);
            all_classes.push(cls);
        }
        next.retain(|&id| !tree.son_set(id).is_empty());
        next.sort_unstable();
        frontier = next;
    }

    if cfg.hooks.fault == Some(Fault::Overcharge) {
        ledger.charge(ScopeKey::global("fault"), cfg.total_eps.value() / 2.0, Purpose::PreLength)?;
    }

    Ok(NoisyBuild {
        tree,
        ledger,
        height: h,
        noisy_hist,
        coarse_nodes,
        thresholds,
        classes: all_classes,
    })
}

/// Noises one budget class in place; returns the members that clear θ.
#[allow(clippy::too_many_arguments)]
fn process_class(
    tree: &mut PrefixTree,
    truth: &[f64],
    cls: &BudgetClass,
    cfg: &AptbConfig,
    noise: &mut Noise,
    ledger: &mut BudgetLedger,
    count_boost: f64,
    coarse_out: &mut Vec<CoarseNode>,
    thresholds: &mut Vec<ThresholdRecord>,
) -> Result<Vec<NodeId>> {
    let eps_node = cls.eps_node.value();
    let k_class = cls.members.len();
    let delta = match cfg.delta {
        Delta::Fixed(d) => d,
        Delta::Auto => 2.0 * std::f64::consts::SQRT_2 / (eps_node * cfg.split_count),
    };

    // a lone node has nothing to be compared with
    let ranked = k_class >= 2 && cfg.split_rank > 0.0;
    let rank_spent = if ranked { eps_node * cfg.split_rank } else { 0.0 };
    let clusters = if ranked {
        cluster_nodes(tree, truth, cls, delta, Epsilon::new(rank_spent)?, noise, ledger)?
    } else {
        vec![Cluster {
            members: cls.members.clone(),
            ranks: Vec::new(),
        }]
    };

    let mut passing = Vec::new();
    let mut seen_budgets: Vec<f64> = Vec::new();
    for cluster in &clusters {
        let select = (cluster.k() > 2 && cfg.split_select > 0.0).then_some(eps_node * cfg.split_select);
        let eps_count = Epsilon::new(eps_node - rank_spent - select.unwrap_or(0.0))?;
        let eps_select = select.map(Epsilon::new).transpose()?;
        let coarse = reconstruct_cluster(tree, truth, cluster, eps_select, eps_count, delta, noise, ledger, count_boost)?;

        let theta = compute_theta(k_class, eps_count, cfg);
        if !seen_budgets.contains(&eps_count.value()) {
            seen_budgets.push(eps_count.value());
            thresholds.push(ThresholdRecord {
                level: cls.level,
                k: k_class,
                eps_count: eps_count.value(),
                theta,
            });
        }
        passing.extend(cluster.members.iter().copied().filter(|&id| tree.node(id).count >= theta));
        coarse_out.extend(coarse);
    }
    Ok(passing)
}
