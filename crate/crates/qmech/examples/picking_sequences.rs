//! Turn-by-turn picking sequences: the stock builders, the interleaving
//! test, and why giving an agent split turns invites strategic picking.
//!
//! Run with `cargo run --example picking_sequences`.

use qmech::axioms::find_manipulation;
use qmech::instance::Labels;
use qmech::mechanisms::{
    balanced_alternation_sequence, draft_sequence, strict_alternation_sequence, AgentOrdering,
    MechanismSpec,
};
use qmech::model::{AgentId, ObjectId, PickingSequence};
use qmech::prefs::{LexOrder, LexProfile};

fn show(labels: &Labels, name: &str, sequence: &PickingSequence) {
    let turns: Vec<&str> = sequence
        .turns()
        .iter()
        .map(|&a| labels.agent_label(a))
        .collect();
    println!(
        "  {name}: {} ({})",
        turns.join(" "),
        if sequence.is_interleaving() {
            "interleaving"
        } else {
            "one block per agent"
        }
    );
}

fn main() {
    let labels = Labels::synthetic(2, 5);
    let order = AgentOrdering::new(vec![AgentId(0), AgentId(1)]).unwrap();
    println!("five objects, two agents:");
    show(&labels, "strict alternation", &strict_alternation_sequence(2, 5));
    show(&labels, "draft (snake)     ", &draft_sequence(&order, 5));
    show(&labels, "balanced          ", &balanced_alternation_sequence(2, 5));

    // Split turns are exploitable: with turns 1, 2, 1 an agent can burn
    // its first pick on a safe object and still collect the contested one.
    let labels = Labels::synthetic(2, 3);
    let spec = MechanismSpec::Interleaving {
        sequence: PickingSequence::new(vec![AgentId(0), AgentId(1), AgentId(0)]),
    };
    let profile = LexProfile::new(vec![
        LexOrder::new(vec![ObjectId(0), ObjectId(1), ObjectId(2)]).unwrap(), // a > b > c
        LexOrder::new(vec![ObjectId(1), ObjectId(2), ObjectId(0)]).unwrap(), // b > c > a
    ])
    .unwrap();
    let outcome = find_manipulation(&spec, &profile).unwrap();
    let w = outcome.witness.expect("split turns are manipulable");
    println!(
        "\nturns 1 2 1, truthful rankings a>b>c and b>c>a:\n  \
         agent {} holds {{{}}} when honest, reports {} instead, and walks away with {{{}}}",
        labels.agent_label(w.agent),
        labels.bundle_labels(w.truthful_bundle).join(", "),
        labels.ranking_labels(&w.misreport).join(" > "),
        labels.bundle_labels(w.deviant_bundle).join(", "),
    );
}
