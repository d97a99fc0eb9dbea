use aptb_core::{build_noisy_tree, AptbConfig, Dataset, Epsilon, PrefixTree, StPoint};

const SAMPLE15: &str = include_str!("data/sample15.traj");

/// L1..L6 are cell 0 at slots 0..5; L7 is cell 1 at slot 5.
fn l(i: u32) -> StPoint {
    if i == 7 {
        StPoint::new(1, 5)
    } else {
        StPoint::new(0, i - 1)
    }
}

#[test]
fn sample_parses_to_fifteen_trajectories() {
    let d = Dataset::parse(SAMPLE15).unwrap();
    assert_eq!(d.len(), 15);
    assert_eq!(d.max_length(), 3);
    assert_eq!(d.trajectories()[1].points(), &[l(1), l(3), l(4)]);
    assert_eq!(d.trajectories()[14].points(), &[l(5), l(7)]);
}

#[test]
fn sample_real_tree() {
    let d = Dataset::parse(SAMPLE15).unwrap();
    let t = PrefixTree::build_real(&d, 3);
    assert_eq!(t.root_count(), 15.0);
    let level_one: Vec<(StPoint, f64)> =
        t.node(0).children.iter().map(|&c| (t.node(c).label.unwrap(), t.node(c).count)).collect();
    assert_eq!(level_one, vec![(l(1), 2.0), (l(2), 2.0), (l(3), 3.0), (l(4), 4.0), (l(5), 4.0)]);
    assert_eq!(t.prefix_count(&[l(4), l(5)]), 3.0);
    assert_eq!(t.prefix_count(&[l(5), l(6)]), 3.0);
    assert_eq!(t.prefix_count(&[l(4), l(7)]), 1.0);
    assert_eq!(t.prefix_count(&[l(1), l(3), l(4)]), 1.0);
}

#[test]
fn noisy_tree_respects_fixed_threshold() {
    let d = Dataset::parse(SAMPLE15).unwrap();
    for seed in 0..50 {
        let mut cfg = AptbConfig::new(Epsilon::new(1.0).unwrap(), 3, seed);
        cfg.theta_override = Some(2.0);
        let build = build_noisy_tree(&d, &cfg).unwrap();
        let t = &build.tree;
        assert!(t.depth() <= 3);
        for (id, n) in t.nodes().iter().enumerate() {
            if id != PrefixTree::ROOT && !n.children.is_empty() {
                assert!(n.count >= 2.0, "seed {seed}: expanded node with count {}", n.count);
            }
        }
    }
}

#[test]
fn zero_noise_height_is_the_user_limit() {
    let d = Dataset::parse(SAMPLE15).unwrap();
    let mut cfg = AptbConfig::new(Epsilon::new(1.0).unwrap(), 3, 1);
    cfg.hooks.zero_noise = true;
    assert_eq!(build_noisy_tree(&d, &cfg).unwrap().height, 3);
}

#[test]
fn noisy_height_distribution() {
    // eps = 1 with pre_fraction 0.1 gives eps_len = 0.05, so the max length 3
    // is perturbed by Lap(20), rounded and clamped to [1, 3]
    let d = Dataset::parse(SAMPLE15).unwrap();
    let tail = |x: f64| 0.5 * (-x / 20.0).exp();
    let p1 = tail(1.5);
    let p3 = 1.0 - tail(0.5);
    let p2 = 1.0 - p1 - p3;
    let expected = p1 + 2.0 * p2 + 3.0 * p3;
    let var = p1 + 4.0 * p2 + 9.0 * p3 - expected * expected;

    let n = 1000;
    let mut counts = [0usize; 4];
    for seed in 0..n {
        let cfg = AptbConfig::new(Epsilon::new(1.0).unwrap(), 3, seed);
        counts[build_noisy_tree(&d, &cfg).unwrap().height] += 1;
    }
    let mean = (counts[1] + 2 * counts[2] + 3 * counts[3]) as f64 / n as f64;
    assert!((mean - expected).abs() < 4.0 * (var / n as f64).sqrt(), "mean {mean}, expected {expected}");
    assert!((expected - 3.0).abs() <= 1.0);
    assert!(counts[3] > counts[2] && counts[3] > counts[1] / 2);
}

#[test]
fn empty_dataset_publishes_little() {
    let u = aptb_core::Universe::new(2, 2, 2).unwrap();
    let mut sizes: Vec<usize> = (0..100)
        .map(|seed| {
            let cfg = AptbConfig::new(Epsilon::new(1.0).unwrap(), 2, seed);
            aptb_core::publish(&Dataset::empty(u), &cfg).unwrap().dataset.len()
        })
        .collect();
    sizes.sort_unstable();
    assert!(sizes[50] <= 5, "median size {}", sizes[50]);
}
