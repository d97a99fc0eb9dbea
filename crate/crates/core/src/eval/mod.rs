//! Evaluation: the uniform-budget baseline, utility metrics, the empirical
//! privacy checker and a synthetic data generator.

pub mod baseline;
pub mod dpcheck;
pub mod metrics;
pub mod synth;

pub use baseline::{build_baseline_tree, BaselineOptions};
pub use dpcheck::{empirical_dp_check, tiny_fixtures, DpCheckReport, TinyFixture};
pub use metrics::{avg_relative_error, length_distribution_l1, sign_test_one_sided, QueryWorkload};
pub use synth::synth_dataset;
