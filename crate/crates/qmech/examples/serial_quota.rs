//! Serial dictatorship with quotas: agents are served one at a time, each
//! taking its best remaining objects, and the whole outcome can be
//! reproduced by a single ranking shared by everyone.
//!
//! Run with `cargo run --example serial_quota`.

use qmech::instance::Labels;
use qmech::mechanisms::{build_identical_profile, run_serial, AgentOrdering};
use qmech::model::{AgentId, ObjectId, Quota};
use qmech::prefs::{LexOrder, LexProfile};

fn ranking(ids: &[u32]) -> LexOrder {
    LexOrder::new(ids.iter().map(|&o| ObjectId(o)).collect()).unwrap()
}

fn main() {
    let labels = Labels::synthetic(3, 4);
    // agent 1: a > b > c > d
    // agent 2: c > a > b > d
    // agent 3: a > c > d > b
    let profile = LexProfile::new(vec![
        ranking(&[0, 1, 2, 3]),
        ranking(&[2, 0, 1, 3]),
        ranking(&[0, 2, 3, 1]),
    ])
    .unwrap();
    let serving = AgentOrdering::new(vec![AgentId(0), AgentId(1), AgentId(2)]).unwrap();
    let quota = Quota::new(vec![1, 2, 1]);

    let alloc = run_serial(&profile, &serving, &quota).unwrap();
    println!("serving order 1, 2, 3 with quotas (1, 2, 1):");
    for i in 0..3u32 {
        let agent = AgentId(i);
        println!(
            "  agent {} takes {{{}}}",
            labels.agent_label(agent),
            labels.bundle_labels(alloc.bundle(agent)).join(", ")
        );
    }

    // The same bundles fall out when every agent reports one shared
    // ranking: dictators' picks in pick order, then the leftovers.
    let identical = build_identical_profile(&profile, &serving, &quota).unwrap();
    let shared = labels.ranking_labels(identical.pref(AgentId(0)));
    println!("\nshared ranking reproducing the outcome: {}", shared.join(" > "));
    let replay = run_serial(&identical, &serving, &quota).unwrap();
    assert_eq!(replay, alloc);
    println!("re-running with that unanimous profile returns identical bundles");
}
