//! Prefix trees over trajectories.
//!
//! Nodes live in an arena indexed by [`NodeId`]; the virtual root is node 0 at
//! depth 0. Each node carries its label, an optional privacy budget and a real
//! valued count. Children are kept sorted by `(slot, cell)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::trajectory::{Dataset, StPoint, Universe};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// `None` only for the root.
    pub label: Option<StPoint>,
    pub eps: Option<f64>,
    pub count: f64,
    pub children: Vec<NodeId>,
    pub depth: usize,
    pub parent: Option<NodeId>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixTree {
    nodes: Vec<TreeNode>,
    height_limit: usize,
    universe: Universe,
    /// Restricts candidate child labels; `None` means the whole universe.
    candidates: Option<Vec<StPoint>>,
}

impl PrefixTree {
    pub const ROOT: NodeId = 0;

    /// A tree holding only the root, with count 0.
    pub fn new(universe: Universe, height_limit: usize) -> Self {
        Self {
            nodes: vec![TreeNode {
                label: None,
                eps: None,
                count: 0.0,
                children: Vec::new(),
                depth: 0,
                parent: None,
            }],
            height_limit,
            universe,
            candidates: None,
        }
    }

    /// The exact tree: one node per distinct prefix of length `<= h` with its
    /// true count. Longer trajectories contribute their length-`h` prefix only.
    pub fn build_real(d: &Dataset, h: usize) -> Self {
        assert!(h >= 1, "height limit must be >= 1");
        let mut tree = PrefixTree::new(*d.universe(), h);
        tree.nodes[Self::ROOT].count = d.len() as f64;
        for t in d.trajectories() {
            let mut at = Self::ROOT;
            for &label in t.points().iter().take(h) {
                at = match tree.child(at, label) {
                    Some(c) => c,
                    None => tree.add_child(at, label, 0.0),
                };
                tree.nodes[at].count += 1.0;
            }
        }
        tree
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut TreeNode {
        &mut self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root_count(&self) -> f64 {
        self.nodes[Self::ROOT].count
    }

    pub fn set_candidate_labels(&mut self, labels: Option<Vec<StPoint>>) {
        self.candidates = labels.map(|mut l| {
            l.sort();
            l.dedup();
            l
        });
    }

    pub fn candidate_labels(&self) -> Option<&[StPoint]> {
        self.candidates.as_deref()
    }

    /// Inserts a child in label order. Panics if the label already exists
    /// under `parent` or the child would exceed the height limit.
    pub fn add_child(&mut self, parent: NodeId, label: StPoint, count: f64) -> NodeId {
        let depth = self.nodes[parent].depth + 1;
        assert!(depth <= self.height_limit, "child depth {depth} exceeds height limit");
        let pos = match self.search_child(parent, label) {
            Ok(_) => panic!("duplicate child label {label}"),
            Err(pos) => pos,
        };
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            label: Some(label),
            eps: None,
            count,
            children: Vec::new(),
            depth,
            parent: Some(parent),
        });
        self.nodes[parent].children.insert(pos, id);
        id
    }

    fn search_child(&self, parent: NodeId, label: StPoint) -> Result<usize, usize> {
        self.nodes[parent]
            .children
            .binary_search_by(|&c| self.nodes[c].label.expect("non-root child").cmp(&label))
    }

    pub fn child(&self, parent: NodeId, label: StPoint) -> Option<NodeId> {
        self.search_child(parent, label)
            .ok()
            .map(|i| self.nodes[parent].children[i])
    }

    /// The node reached by following `prefix` from the root.
    pub fn find(&self, prefix: &[StPoint]) -> Option<NodeId> {
        prefix
            .iter()
            .try_fold(Self::ROOT, |at, &label| self.child(at, label))
    }

    /// Count of the node reached by `prefix`, or 0 when no such node exists.
    pub fn prefix_count(&self, prefix: &[StPoint]) -> f64 {
        self.find(prefix).map_or(0.0, |id| self.nodes[id].count)
    }

    /// Root-to-node label sequence (empty for the root).
    pub fn path(&self, id: NodeId) -> Vec<StPoint> {
        let mut path = Vec::with_capacity(self.nodes[id].depth);
        let mut at = id;
        while let Some(label) = self.nodes[at].label {
            path.push(label);
            at = self.nodes[at].parent.expect("labelled node has a parent");
        }
        path.reverse();
        path
    }

    /// Candidate child labels: every label with a later slot, unless the
    /// node sits at the height limit.
    pub fn son_set(&self, id: NodeId) -> Vec<StPoint> {
        let node = &self.nodes[id];
        if node.depth >= self.height_limit {
            return Vec::new();
        }
        let after = node.label.map(|l| l.slot);
        match &self.candidates {
            None => self.universe.labels_after(after).collect(),
            Some(labels) => labels
                .iter()
                .copied()
                .filter(|l| after.is_none_or(|s| l.slot > s))
                .collect(),
        }
    }

    /// Maximum number of levels the subtree below `id` could span.
    pub fn max_expand(&self, id: NodeId) -> usize {
        let node = &self.nodes[id];
        let levels_left = self.height_limit.saturating_sub(node.depth);
        let after = node.label.map(|l| l.slot);
        let later_slots = match &self.candidates {
            None => {
                let first = after.map_or(0, |s| s + 1);
                self.universe.slots().saturating_sub(first) as usize
            }
            Some(labels) => labels
                .iter()
                .filter(|l| after.is_none_or(|s| l.slot > s))
                .map(|l| l.slot)
                .collect::<BTreeSet<_>>()
                .len(),
        };
        later_slots.min(levels_left)
    }

    /// Node ids in depth-first pre-order, children visited in label order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![Self::ROOT];
        while let Some(id) = stack.pop() {
            order.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        order
    }

    /// Node ids grouped by depth; `levels()[0]` is the root.
    pub fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut levels = vec![vec![Self::ROOT]];
        loop {
            let next: Vec<NodeId> = levels
                .last()
                .unwrap()
                .iter()
                .flat_map(|&id| self.nodes[id].children.iter().copied())
                .collect();
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    /// Deepest node depth present.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Copy of the tree keeping only non-root nodes for which `keep` holds;
    /// the subtree of a dropped node is dropped with it.
    pub fn retain(&self, keep: impl Fn(&TreeNode) -> bool) -> PrefixTree {
        let mut out = PrefixTree {
            nodes: vec![self.nodes[Self::ROOT].clone()],
            height_limit: self.height_limit,
            universe: self.universe,
            candidates: self.candidates.clone(),
        };
        out.nodes[Self::ROOT].children.clear();
        let mut stack = vec![(Self::ROOT, Self::ROOT)];
        while let Some((src, dst)) = stack.pop() {
            for &c in &self.nodes[src].children {
                let node = &self.nodes[c];
                if !keep(node) {
                    continue;
                }
                let id = out.nodes.len();
                out.nodes.push(TreeNode {
                    children: Vec::new(),
                    parent: Some(dst),
                    ..node.clone()
                });
                out.nodes[dst].children.push(id);
                stack.push((c, id));
            }
        }
        out
    }

    /// Indented text dump, one node per line:
    /// `<indent><cell>:<slot> c=<count> eps=<eps>`, preceded by a root line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for id in self.preorder() {
            let n = &self.nodes[id];
            let eps = n.eps.map_or_else(|| "-".to_string(), |e| e.to_string());
            match n.label {
                None => writeln!(out, "root c={} eps={}", n.count, eps).unwrap(),
                Some(l) => writeln!(
                    out,
                    "{}{} c={} eps={}",
                    "  ".repeat(n.depth - 1),
                    l,
                    n.count,
                    eps
                )
                .unwrap(),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Trajectory;

    fn p(cell: u32, slot: u32) -> StPoint {
        StPoint::new(cell, slot)
    }

    #[test]
    fn empty_dataset_gives_root_only() {
        let d = Dataset::empty(Universe::new(2, 2, 2).unwrap());
        let t = PrefixTree::build_real(&d, 3);
        assert_eq!(t.len(), 1);
        assert_eq!(t.root_count(), 0.0);
    }

    #[test]
    fn long_trajectories_are_truncated() {
        let u = Universe::new(1, 1, 5).unwrap();
        let long = Trajectory::new((0..5).map(|s| p(0, s)).collect()).unwrap();
        let d = Dataset::new(u, vec![long]).unwrap();
        let t = PrefixTree::build_real(&d, 2);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.prefix_count(&[p(0, 0), p(0, 1)]), 1.0);
        assert_eq!(t.prefix_count(&[p(0, 0), p(0, 1), p(0, 2)]), 0.0);
    }

    #[test]
    fn children_stay_sorted() {
        let u = Universe::new(1, 3, 3).unwrap();
        let mut t = PrefixTree::new(u, 2);
        for l in [p(2, 1), p(0, 2), p(1, 0), p(0, 1)] {
            t.add_child(PrefixTree::ROOT, l, 1.0);
        }
        let labels: Vec<_> = t.node(0).children.iter().map(|&c| t.node(c).label.unwrap()).collect();
        assert_eq!(labels, vec![p(1, 0), p(0, 1), p(2, 1), p(0, 2)]);
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn duplicate_child_panics() {
        let mut t = PrefixTree::new(Universe::new(1, 1, 1).unwrap(), 1);
        t.add_child(0, p(0, 0), 1.0);
        t.add_child(0, p(0, 0), 1.0);
    }

    #[test]
    fn son_set_cases() {
        let u = Universe::new(1, 2, 3).unwrap();
        let mut t = PrefixTree::new(u, 5);
        assert_eq!(t.son_set(0).len(), 6);
        let last = t.add_child(0, p(0, 2), 0.0);
        assert!(t.son_set(last).is_empty());
        let first = t.add_child(0, p(1, 0), 0.0);
        assert_eq!(t.son_set(first), vec![p(0, 1), p(1, 1), p(0, 2), p(1, 2)]);

        let mut capped = PrefixTree::new(u, 1);
        let n = capped.add_child(0, p(0, 0), 0.0);
        assert!(capped.son_set(n).is_empty());
        assert_eq!(capped.max_expand(n), 0);
    }

    #[test]
    fn max_expand_examples() {
        // T = 4, slot 1, depth 1, h = 10: chain 2 -> 3 gives 2 levels
        let mut t = PrefixTree::new(Universe::new(1, 1, 4).unwrap(), 10);
        let n = t.add_child(0, p(0, 1), 0.0);
        assert_eq!(t.max_expand(n), 2);
        assert_eq!(t.max_expand(0), 4);

        // T = 10, slot 0, depth 2, h = 3: height limit binds
        let mut t = PrefixTree::new(Universe::new(1, 2, 10).unwrap(), 3);
        let a = t.add_child(0, p(1, 0), 0.0);
        let b = t.add_child(a, p(0, 1), 0.0);
        assert_eq!(t.node(b).depth, 2);
        assert_eq!(t.max_expand(b), 1);
    }

    #[test]
    fn observed_candidates_restrict_son_set() {
        let u = Universe::new(1, 3, 4).unwrap();
        let mut t = PrefixTree::new(u, 4);
        t.set_candidate_labels(Some(vec![p(2, 3), p(1, 1), p(1, 1)]));
        assert_eq!(t.son_set(0), vec![p(1, 1), p(2, 3)]);
        assert_eq!(t.max_expand(0), 2);
        let n = t.add_child(0, p(0, 1), 0.0);
        assert_eq!(t.son_set(n), vec![p(2, 3)]);
        assert_eq!(t.max_expand(n), 1);
    }

    #[test]
    fn path_find_and_retain() {
        let d = Dataset::parse("universe rows=1 cols=2 slots=3\n0:0 1:1\n0:0 0:2\n1:1\n").unwrap();
        let t = PrefixTree::build_real(&d, 3);
        let id = t.find(&[p(0, 0), p(0, 2)]).unwrap();
        assert_eq!(t.path(id), vec![p(0, 0), p(0, 2)]);
        assert_eq!(t.prefix_count(&[]), 3.0);

        let kept = t.retain(|n| n.label != Some(p(0, 0)));
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.prefix_count(&[p(1, 1)]), 1.0);
        assert!(kept.find(&[p(0, 0)]).is_none());
    }

    #[test]
    fn dump_format() {
        let d = Dataset::parse("universe rows=1 cols=2 slots=3\n0:0 1:1\n").unwrap();
        let mut t = PrefixTree::build_real(&d, 2);
        t.node_mut(1).eps = Some(0.25);
        assert_eq!(t.dump(), "root c=1 eps=-\n0:0 c=1 eps=0.25\n  1:1 c=1 eps=-\n");
    }
}
