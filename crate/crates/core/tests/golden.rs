//! Frozen outputs. Regenerate with `APTB_BLESS=1 cargo test --test golden`.

use std::path::PathBuf;

use aptb_core::eval::{build_baseline_tree, synth_dataset, BaselineOptions};
use aptb_core::{Dataset, Epsilon, RandomStream, Universe};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    if std::env::var_os("APTB_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from the frozen copy");
}

#[test]
fn sample_baseline_tree() {
    let d = Dataset::parse(include_str!("data/sample15.traj")).unwrap();
    let (tree, ledger) =
        build_baseline_tree(&d, Epsilon::new(1.0).unwrap(), 3, &BaselineOptions::default(), RandomStream::new(7))
            .unwrap();
    check("sample15_baseline_eps1_h3_seed7.dump", &tree.dump());
    assert_eq!(ledger.len(), tree.len() - 1);
}

#[test]
fn synth_sample() {
    let u = Universe::new(5, 4, 4).unwrap();
    let d = synth_dataset(u, 200, 4, 1.0, 1).unwrap();
    check("synth_5x4x4_n200_seed1.traj", &d.to_text());
}
