//! Differentially private publication of spatio-temporal trajectory datasets.
//!
//! The crate builds a noisy prefix tree over a discretized trajectory dataset,
//! post-processes it into a consistent integer tree and regenerates a synthetic
//! dataset from it. The main mechanism combines adaptive per-node budget
//! allocation, clustering of same-budget nodes by noisy count, and
//! exponential-mechanism driven merging of similar nodes into coarse nodes that
//! share a single Laplace draw. A uniform-budget baseline, utility metrics and
//! an empirical privacy checker are provided for evaluation.
//!
//! ```
//! use aptb_core::{AptbConfig, Dataset, Epsilon, publish};
//!
//! let text = "universe rows=1 cols=2 slots=3\n0:0 1:1\n0:0 1:1 0:2\n1:0\n";
//! let data = Dataset::parse(text).unwrap();
//! let cfg = AptbConfig::new(Epsilon::new(1.0).unwrap(), 3, 7);
//! let out = publish(&data, &cfg).unwrap();
//! assert!(out.audit.pass);
//! ```

pub mod builder;
pub mod config;
pub mod consistency;
pub mod dp;
pub mod error;
pub mod eval;
pub mod tree;
pub mod trajectory;

mod pipeline;

pub use builder::{build_noisy_tree, AptbConfig, Delta, Fault, NoisyBuild, SonSetMode, TestHooks};
pub use config::{config_snapshot, ConfigOverrides};
pub use consistency::{enforce_consistency, generate_dataset, terminal_counts, ConsistentTree};
pub use dp::{BudgetLedger, CompositionReport, Epsilon, Purpose, RandomStream, ScopeKey};
pub use error::{Error, Result};
pub use pipeline::{publish, publish_baseline, Publication};
pub use tree::{NodeId, PrefixTree, TreeNode};
pub use trajectory::{BBox, Dataset, RawSample, RawTrace, StPoint, Trajectory, Universe};
