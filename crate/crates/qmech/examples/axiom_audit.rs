//! Brute-force audits: sweep every profile on a small grid looking for
//! profitable lies, bossy reports, relabeling asymmetries, wasted value,
//! coalition tricks — and recover a serial mechanism's structure from
//! black-box queries.
//!
//! Run with `cargo run --example axiom_audit`.

use qmech::axioms::{
    audit_unilateral_grid, find_group_manipulation, find_neutrality_violation, find_reallocation,
    infer_serial_structure, verify_serial_equivalence, LexProfiles, SearchMode,
    DEFAULT_SEARCH_CAP,
};
use qmech::instance::Labels;
use qmech::mechanisms::{AgentOrdering, MechanismSpec};
use qmech::model::{AgentId, ObjectId, Quota};
use qmech::prefs::{LexOrder, LexProfile};

fn ranking(ids: &[u32]) -> LexOrder {
    LexOrder::new(ids.iter().map(|&o| ObjectId(o)).collect()).unwrap()
}

fn main() {
    let labels = Labels::synthetic(2, 3);
    let quota = Quota::new(vec![1, 1]);
    let serial = MechanismSpec::SerialDictatorQuota {
        order: AgentOrdering::new(vec![AgentId(0), AgentId(1)]).unwrap(),
        quota: quota.clone(),
    };

    println!("auditing serial dictatorship on every 2-agent, 3-object profile:");
    let audit = audit_unilateral_grid(&serial, 2, 3, SearchMode::default()).unwrap();
    let neutral = find_neutrality_violation(&serial, 2, 3, SearchMode::default()).unwrap();
    println!(
        "  {} evaluations: no profitable lie, no bossy report, no relabeling asymmetry",
        audit.evaluations + neutral.evaluations
    );
    assert!(audit.manipulation.is_none() && audit.bossiness.is_none());
    assert!(neutral.witness.is_none());

    // A deliberately bossy rule: agent 1's report can reshuffle agent 2's
    // bundle without changing agent 1's own.
    let bossy = MechanismSpec::BossyFixture { quota };
    let audit = audit_unilateral_grid(&bossy, 2, 3, SearchMode::default()).unwrap();
    let b = audit.bossiness.expect("the fixture is bossy");
    println!(
        "\nauditing the bossy fixture:\n  agent {} reports {} and moves agent 2 from {{{}}} to {{{}}} \
         while keeping {{{}}}",
        labels.agent_label(b.agent),
        labels.ranking_labels(&b.misreport).join(" > "),
        labels.bundle_labels(b.truthful.bundle(AgentId(1))).join(", "),
        labels.bundle_labels(b.deviant.bundle(AgentId(1))).join(", "),
        labels.bundle_labels(b.truthful.bundle(b.agent)).join(", "),
    );
    let coalition_proof = LexProfiles::new(2, 3)
        .all(|p| find_group_manipulation(&bossy, &p, 2).unwrap().holds());
    assert!(!coalition_proof);
    println!("  and the coalition audit fails as well: coordinated lying pays somewhere");

    // Coalitions may also swap what the mechanism hands them afterwards.
    let labels3 = Labels::synthetic(3, 3);
    let serial3 = MechanismSpec::SerialDictatorQuota {
        order: AgentOrdering::new(vec![AgentId(0), AgentId(1), AgentId(2)]).unwrap(),
        quota: Quota::new(vec![1, 1, 1]),
    };
    let profile = LexProfile::new(vec![
        ranking(&[0, 2, 1]), // a > c > b
        ranking(&[2, 1, 0]), // c > b > a
        ranking(&[2, 0, 1]), // c > a > b
    ])
    .unwrap();
    let pool = find_reallocation(&serial3, &profile, 2).unwrap();
    let r = pool.witness.expect("pooling helps here");
    let coalition: Vec<&str> = r.coalition.iter().map(|&a| labels3.agent_label(a)).collect();
    println!(
        "\nserial dictatorship resists lies, but agents {} can lie, pool, and re-split:\n  \
         agent {} still ends with {{{}}}, agent {} trades up from {{{}}} to {{{}}}",
        coalition.join(" and "),
        coalition[0],
        labels3.bundle_labels(r.final_bundles[0]).join(", "),
        coalition[1],
        labels3.bundle_labels(r.truthful.bundle(r.coalition[1])).join(", "),
        labels3.bundle_labels(r.final_bundles[1]).join(", "),
    );

    // Black-box structure recovery: probe with one profile, then verify
    // the guess exhaustively.
    let guess = infer_serial_structure(&serial3, 3, 3, &Quota::new(vec![1, 1, 1]))
        .unwrap()
        .expect("probe finds a candidate order");
    let verdict = verify_serial_equivalence(
        &serial3,
        &guess,
        &Quota::new(vec![1, 1, 1]),
        3,
        3,
        DEFAULT_SEARCH_CAP,
    )
    .unwrap();
    assert!(verdict.witness.is_none());
    println!(
        "\nprobing the same mechanism as a black box recovers serving order {} and an \
         exhaustive sweep confirms it",
        labels3.ordering_labels(&guess).join(", ")
    );
}
