//! Response-rate estimation from sparse counts on publisher and user trees.
//!
//! Run with `cargo run --example hierarchical_estimator`.

use bidpace::estimator::{combine_rates, HierarchyTree, TreeCounts, DEFAULT_PRIOR_STRENGTH};
use bidpace::{AdRequest, FeaturePath};

fn path(ids: &[u32]) -> FeaturePath {
    FeaturePath::new(ids).expect("short path")
}

fn main() -> bidpace::Result<()> {
    let mut tree = HierarchyTree::new();
    tree.record(&path(&[1, 1]), 50_000, 150)?;
    tree.record(&path(&[1, 2]), 40, 2)?;
    tree.record(&path(&[2, 1]), 20_000, 10)?;
    tree.aggregate_raw_rates();
    tree.smooth_rates(DEFAULT_PRIOR_STRENGTH);
    for ids in [[1, 1], [1, 2], [2, 1], [2, 9]] {
        let p = path(&ids);
        let node = tree.resolve(&p);
        println!(
            "{p}: resolved at depth {} with {} imps, raw {:.5}, smoothed {:.5}",
            node.depth,
            node.impressions,
            node.raw_rate,
            tree.smoothed_rate(&p)
        );
    }
    let mut text = Vec::new();
    tree.write_text(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));

    let mut counts = TreeCounts::default();
    let req = |publisher: &[u32], user: &[u32]| AdRequest {
        id: 0,
        slot: 0,
        advertiser: path(&[1]),
        publisher: path(publisher),
        user: path(user),
    };
    for i in 0..5_000u32 {
        let r = req(&[i % 4, i % 7], &[i % 3, i % 5]);
        counts.add_impression(&r);
        if i % 97 == 0 || (i % 4 == 0 && i % 31 == 0) {
            counts.add_action(&r);
        }
    }
    let trees = counts.build(DEFAULT_PRIOR_STRENGTH);
    for (p, u) in [([0, 0], [0, 0]), ([1, 3], [2, 4]), ([9, 9], [9, 9])] {
        println!("request {p:?}/{u:?}: {:.5}", trees.predict_rate(&req(&p, &u)));
    }
    println!("log-odds mean of 0.01 and 0.001: {:.5}", combine_rates(&[0.01, 0.001]));
    Ok(())
}
