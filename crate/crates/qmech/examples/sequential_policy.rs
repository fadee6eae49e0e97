//! Sequential dictatorship: who dictates next may depend on what earlier
//! dictators took. A policy maps bundle histories to the next agent and
//! falls back to a default order for unmatched histories.
//!
//! Run with `cargo run --example sequential_policy`.

use qmech::instance::Labels;
use qmech::mechanisms::{build_identical_profile_seq, run_sequential, DictatorPolicy};
use qmech::model::{AgentId, ObjSet, ObjectId, Quota};
use qmech::prefs::{LexOrder, LexProfile};

fn ranking(ids: &[u32]) -> LexOrder {
    LexOrder::new(ids.iter().map(|&o| ObjectId(o)).collect()).unwrap()
}

fn show(labels: &Labels, profile: &LexProfile, policy: &DictatorPolicy, quota: &Quota) {
    let alloc = run_sequential(profile, policy, quota).unwrap();
    for i in 0..profile.agents() as u32 {
        let agent = AgentId(i);
        println!(
            "  agent {} gets {{{}}}",
            labels.agent_label(agent),
            labels.bundle_labels(alloc.bundle(agent)).join(", ")
        );
    }
    let identical = build_identical_profile_seq(profile, policy, quota).unwrap();
    println!(
        "  reproduced by the shared ranking {}",
        labels.ranking_labels(identical.pref(AgentId(0))).join(" > ")
    );
    assert_eq!(run_sequential(&identical, policy, quota).unwrap(), alloc);
}

fn main() {
    let labels = Labels::synthetic(3, 3);
    let quota = Quota::new(vec![1, 1, 1]);

    // Agent 1 opens. If it takes {a}, agent 3 goes second; any other
    // opening bundle falls through to the default order 2, 3.
    let policy = DictatorPolicy::new(AgentId(0), vec![AgentId(1), AgentId(2)])
        .with_rule(vec![ObjSet::singleton(ObjectId(0))], AgentId(2));

    println!("opening pick is a, so the rule promotes agent 3:");
    let grabs_a = LexProfile::new(vec![
        ranking(&[0, 1, 2]), // a > b > c
        ranking(&[2, 0, 1]), // c > a > b
        ranking(&[2, 1, 0]), // c > b > a
    ])
    .unwrap();
    show(&labels, &grabs_a, &policy, &quota);

    println!("\nopening pick is b, so the default order applies:");
    let grabs_b = LexProfile::new(vec![
        ranking(&[1, 0, 2]), // b > a > c
        ranking(&[2, 0, 1]),
        ranking(&[2, 1, 0]),
    ])
    .unwrap();
    show(&labels, &grabs_b, &policy, &quota);
}
