//! The uniform-ordering lottery: every way of ordering agents into the
//! quota positions is equally likely, probabilities come out as exact
//! fractions, and the result is envyfree and treats equals equally.
//!
//! Run with `cargo run --example rsdq_lottery`.

use qmech::instance::Labels;
use qmech::model::{AgentId, ObjectId, Quota};
use qmech::prefs::{LexOrder, LexProfile};
use qmech::randomized::{envy_witnesses, equal_treatment_witnesses, rsdq_exact};

fn ranking(ids: &[u32]) -> LexOrder {
    LexOrder::new(ids.iter().map(|&o| ObjectId(o)).collect()).unwrap()
}

fn main() {
    let labels = Labels::synthetic(3, 4);
    // agent 1: c > a > b > d
    // agent 2: a > c > d > b
    // agent 3: c > b > d > a
    let profile = LexProfile::new(vec![
        ranking(&[2, 0, 1, 3]),
        ranking(&[0, 2, 3, 1]),
        ranking(&[2, 1, 3, 0]),
    ])
    .unwrap();
    let quota = Quota::new(vec![2, 1, 1]);

    let (matrix, support) = rsdq_exact(&profile, &quota).unwrap();
    println!(
        "quotas (2, 1, 1): {} equally likely serving orders\n",
        support.total_orderings()
    );
    for entry in support.entries() {
        let order: Vec<&str> = entry
            .ordering
            .iter()
            .map(|&a| labels.agent_label(a))
            .collect();
        let bundles: Vec<String> = (0..3u32)
            .map(|i| {
                format!(
                    "{}:{{{}}}",
                    labels.agent_label(AgentId(i)),
                    labels.bundle_labels(entry.allocation.bundle(AgentId(i))).join(",")
                )
            })
            .collect();
        println!(
            "  order {} (weight {}): {}",
            order.join(","),
            support.weight(),
            bundles.join("  ")
        );
    }

    println!("\nexact probability of each agent holding each object:");
    print!("        ");
    for label in labels.object_labels() {
        print!("{label:>6}");
    }
    println!();
    for i in 0..3u32 {
        let agent = AgentId(i);
        print!("  agent {}", labels.agent_label(agent));
        for j in 0..4u32 {
            print!("{:>6}", matrix.entry(agent, ObjectId(j)).to_string());
        }
        println!();
    }

    assert!(envy_witnesses(&matrix, &profile).is_empty());
    assert!(equal_treatment_witnesses(&matrix, &profile).is_empty());
    println!("\nno agent prefers another agent's row; identical rankings get identical rows");
}
