use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::Epsilon;
use crate::error::{Error, Result};
use crate::tree::{NodeId, PrefixTree};
use crate::trajectory::StPoint;

/// Slack allowed when comparing path sums against the total budget.
pub const COMPOSITION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Rank,
    Select,
    Count,
    PreLength,
    PreHistogram,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Rank => "rank",
            Purpose::Select => "select",
            Purpose::Count => "count",
            Purpose::PreLength => "pre-length",
            Purpose::PreHistogram => "pre-histogram",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Purpose {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "rank" => Purpose::Rank,
            "select" => Purpose::Select,
            "count" => Purpose::Count,
            "pre-length" => Purpose::PreLength,
            "pre-histogram" => Purpose::PreHistogram,
            _ => return Err(format!("unknown charge purpose `{s}`")),
        })
    }
}

/// What a charge is attributed to: a global stage touching every trajectory,
/// or a single tree node identified by its root-to-node label path.
///
/// Text form: global stages are `@name`, nodes are `/c:s/c:s...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ScopeKey {
    Global(String),
    Node(Vec<StPoint>),
}

impl ScopeKey {
    pub fn global(name: impl Into<String>) -> Self {
        ScopeKey::Global(name.into())
    }

    pub fn node(path: Vec<StPoint>) -> Self {
        ScopeKey::Node(path)
    }
}

impl fmt::Display for ScopeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScopeKey::Global(name) => write!(f, "@{name}"),
            ScopeKey::Node(path) if path.is_empty() => f.write_str("/"),
            ScopeKey::Node(path) => path.iter().try_for_each(|p| write!(f, "/{p}")),
        }
    }
}

impl FromStr for ScopeKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some(name) = s.strip_prefix('@') {
            return Ok(ScopeKey::Global(name.to_string()));
        }
        let rest = s
            .strip_prefix('/')
            .ok_or_else(|| format!("scope `{s}` must start with `@` or `/`"))?;
        if rest.is_empty() {
            return Ok(ScopeKey::Node(Vec::new()));
        }
        rest.split('/').map(str::parse).collect::<std::result::Result<_, _>>().map(ScopeKey::Node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Charge {
    pub scope: ScopeKey,
    pub eps: f64,
    pub purpose: Purpose,
}

/// Append-only record of every budget charge of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetLedger {
    charges: Vec<Charge>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, scope: ScopeKey, eps: f64, purpose: Purpose) -> Result<()> {
        let eps = Epsilon::new(eps)?.value();
        self.charges.push(Charge { scope, eps, purpose });
        Ok(())
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn global_total(&self) -> f64 {
        self.charges
            .iter()
            .filter(|c| matches!(c.scope, ScopeKey::Global(_)))
            .map(|c| c.eps)
            .sum()
    }

    /// One charge per line: `scope<TAB>purpose<TAB>epsilon`.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for c in &self.charges {
            out.push_str(&format!("{}\t{}\t{}\n", c.scope, c.purpose, c.eps));
        }
        out
    }

    pub fn import(text: &str) -> Result<Self> {
        let mut ledger = BudgetLedger::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let scope = fields[0].parse().map_err(err)?;
            let purpose = fields[1].parse().map_err(err)?;
            let eps: f64 = fields[2].parse().map_err(|_| err(format!("bad epsilon `{}`", fields[2])))?;
            ledger.charge(scope, eps, purpose).map_err(|e| err(e.to_string()))?;
        }
        Ok(ledger)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionReport {
    /// Every root-to-leaf path with its total charged budget, in depth-first order.
    pub paths: Vec<(String, f64)>,
    pub max_path_sum: f64,
    pub worst_path: String,
    pub total: f64,
    pub pass: bool,
    /// Paths whose sum exceeds the total budget.
    pub violations: Vec<String>,
}

/// Audits sequential composition: for every root-to-leaf path, global charges
/// plus the charges of the nodes on the path must not exceed `total`.
pub fn verify_composition(
    ledger: &BudgetLedger,
    tree: &PrefixTree,
    total: Epsilon,
) -> Result<CompositionReport> {
    let mut per_node: HashMap<NodeId, f64> = HashMap::new();
    let mut global = 0.0;
    for c in ledger.charges() {
        match &c.scope {
            ScopeKey::Global(_) => global += c.eps,
            ScopeKey::Node(path) => {
                let id = tree
                    .find(path)
                    .ok_or_else(|| Error::UnknownScope(c.scope.to_string()))?;
                *per_node.entry(id).or_insert(0.0) += c.eps;
            }
        }
    }

    let limit = total.value() + COMPOSITION_TOLERANCE;
    let mut paths = Vec::new();
    let mut stack = vec![(PrefixTree::ROOT, global + per_node.get(&PrefixTree::ROOT).copied().unwrap_or(0.0))];
    while let Some((id, sum)) = stack.pop() {
        let node = tree.node(id);
        if node.children.is_empty() {
            paths.push((ScopeKey::node(tree.path(id)).to_string(), sum));
            continue;
        }
        for &child in node.children.iter().rev() {
            stack.push((child, sum + per_node.get(&child).copied().unwrap_or(0.0)));
        }
    }

    let (worst_path, max_path_sum) = paths
        .iter()
        .fold((String::from("/"), 0.0f64), |acc, (p, s)| if *s > acc.1 { (p.clone(), *s) } else { acc });
    let violations: Vec<String> = paths.iter().filter(|(_, s)| *s > limit).map(|(p, _)| p.clone()).collect();
    Ok(CompositionReport {
        paths,
        max_path_sum,
        worst_path,
        total: total.value(),
        pass: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Dataset, Universe};

    fn eps(v: f64) -> Epsilon {
        Epsilon::new(v).unwrap()
    }

    fn small_tree() -> PrefixTree {
        let d = Dataset::parse("universe rows=1 cols=2 slots=3\n0:0 1:1\n0:0 0:2\n1:1\n").unwrap();
        PrefixTree::build_real(&d, 3)
    }

    fn path(s: &str) -> ScopeKey {
        s.parse().unwrap()
    }

    #[test]
    fn charge_appends_and_rejects_zero() {
        let mut l = BudgetLedger::new();
        l.charge(path("/0:0"), 0.1, Purpose::Count).unwrap();
        assert_eq!(l.len(), 1);
        l.charge(path("/0:0"), 0.2, Purpose::Rank).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l.charge(path("/0:0"), 0.0, Purpose::Count).is_err());
        assert!(l.charge(path("/0:0"), -0.1, Purpose::Count).is_err());
        assert_eq!(l.len(), 2);
    }

    #[test]
    fn scope_text_round_trip() {
        for s in ["@pre-length", "/", "/3:0/17:2"] {
            assert_eq!(path(s).to_string(), s);
        }
        assert!("3:0".parse::<ScopeKey>().is_err());
    }

    #[test]
    fn export_import_round_trip() {
        let mut l = BudgetLedger::new();
        l.charge(ScopeKey::global("pre-length"), 0.05, Purpose::PreLength).unwrap();
        l.charge(path("/0:0/1:1"), 0.1 / 3.0, Purpose::Select).unwrap();
        let text = l.export();
        assert!(text.starts_with("@pre-length\tpre-length\t0.05\n"));
        assert_eq!(BudgetLedger::import(&text).unwrap(), l);
    }

    #[test]
    fn empty_ledger_passes() {
        let r = verify_composition(&BudgetLedger::new(), &small_tree(), eps(1.0)).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_path_sum, 0.0);
        assert_eq!(r.paths.len(), 3);
    }

    #[test]
    fn overcharged_leaf_is_named() {
        let mut l = BudgetLedger::new();
        l.charge(ScopeKey::global("pre-length"), 0.1, Purpose::PreLength).unwrap();
        l.charge(path("/0:0"), 0.5, Purpose::Count).unwrap();
        l.charge(path("/0:0/1:1"), 0.4, Purpose::Count).unwrap();
        l.charge(path("/0:0/0:2"), 0.6, Purpose::Count).unwrap();
        l.charge(path("/1:1"), 0.9, Purpose::Count).unwrap();
        let r = verify_composition(&l, &small_tree(), eps(1.0)).unwrap();
        assert!(!r.pass);
        assert_eq!(r.violations, vec!["/0:0/0:2".to_string()]);
        assert_eq!(r.worst_path, "/0:0/0:2");
        assert!((r.max_path_sum - 1.2).abs() < 1e-12);
    }

    #[test]
    fn unknown_scope_is_an_error() {
        let mut l = BudgetLedger::new();
        l.charge(path("/1:0"), 0.1, Purpose::Count).unwrap();
        assert!(matches!(
            verify_composition(&l, &small_tree(), eps(1.0)),
            Err(Error::UnknownScope(s)) if s == "/1:0"
        ));
    }

    #[test]
    fn root_only_tree_has_one_path() {
        let t = PrefixTree::new(Universe::new(1, 1, 1).unwrap(), 1);
        let mut l = BudgetLedger::new();
        l.charge(ScopeKey::global("pre-length"), 0.3, Purpose::PreLength).unwrap();
        let r = verify_composition(&l, &t, eps(0.3)).unwrap();
        assert!(r.pass);
        assert_eq!(r.paths, vec![("/".to_string(), 0.3)]);
    }
}
