//! Comparing random allocations: the downward-lexicographic relation
//! ranks any two matrices, while the prefix-mass relation can leave them
//! incomparable even when every agent agrees.
//!
//! Run with `cargo run --example dominance_relations`.

use qmech::instance::Labels;
use qmech::matrix::RandAllocation;
use qmech::model::{AgentId, ObjectId};
use qmech::prefs::{LexOrder, LexProfile};
use qmech::randomized::{ld_dominates, ld_prefers, sd_dominates};
use qmech::rational::Rational;
use std::cmp::Ordering;

fn ranking(ids: &[u32]) -> LexOrder {
    LexOrder::new(ids.iter().map(|&o| ObjectId(o)).collect()).unwrap()
}

fn matrix(cells: &[[(i64, i64); 4]; 4]) -> RandAllocation {
    RandAllocation::new(
        cells
            .iter()
            .map(|row| row.iter().map(|&(n, d)| Rational::new(n, d)).collect())
            .collect(),
    )
    .unwrap()
}

fn main() {
    let labels = Labels::synthetic(4, 4);
    // agent 1: c > a > b > d    agent 2: a > c > d > b
    // agent 3: c > b > d > a    agent 4: a > c > b > d
    let profile = LexProfile::new(vec![
        ranking(&[2, 0, 1, 3]),
        ranking(&[0, 2, 3, 1]),
        ranking(&[2, 1, 3, 0]),
        ranking(&[0, 2, 1, 3]),
    ])
    .unwrap();

    let first = matrix(&[
        [(0, 1), (1, 3), (1, 2), (1, 6)],
        [(1, 2), (0, 1), (0, 1), (1, 2)],
        [(0, 1), (1, 3), (1, 2), (1, 6)],
        [(1, 2), (1, 3), (0, 1), (1, 6)],
    ]);
    let second = matrix(&[
        [(1, 12), (1, 3), (5, 12), (1, 6)],
        [(11, 24), (0, 1), (1, 12), (11, 24)],
        [(0, 1), (5, 12), (5, 12), (1, 6)],
        [(11, 24), (1, 4), (1, 12), (5, 24)],
    ]);

    println!("per-agent verdict, most-preferred object downward:");
    for i in 0..4u32 {
        let agent = AgentId(i);
        let verdict = match ld_prefers(profile.pref(agent), first.row(agent), second.row(agent)) {
            Ordering::Greater => "prefers the first matrix",
            Ordering::Less => "prefers the second matrix",
            Ordering::Equal => "is indifferent",
        };
        println!("  agent {} {verdict}", labels.agent_label(agent));
    }
    assert!(ld_dominates(&first, &second, &profile));
    assert!(!ld_dominates(&second, &first, &profile));
    println!("so the first matrix dominates downward-lexicographically\n");

    assert!(!sd_dominates(&first, &second, &profile));
    assert!(!sd_dominates(&second, &first, &profile));
    let agent = AgentId(1);
    let prefix_first = &first.row(agent)[0] + &first.row(agent)[2];
    let prefix_second = &second.row(agent)[0] + &second.row(agent)[2];
    println!(
        "under prefix masses the two are incomparable: agent 2's chance of an\n\
         object from {{a, c}} is {prefix_second} in the second matrix but only\n\
         {prefix_first} in the first, while its chance of a alone goes the other way"
    );
}
