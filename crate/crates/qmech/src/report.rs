//! Machine-readable run reports.
//!
//! Every command emits one JSON report. Serialization is deterministic:
//! struct fields appear in declaration order, maps sort by key, and
//! rationals print in lowest terms, so identical inputs (and seed) yield
//! byte-identical output. Wall-clock timing is opt-in for that reason.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::axioms::{
    BossinessWitness, GroupManipulationWitness, ManipulationWitness, NeutralityWitness,
    ParetoWitness, RandManipulationWitness, ReallocationWitness, SerialEquivalenceFailure,
};
use crate::error::Result;
use crate::instance::Labels;
use crate::matrix::RandAllocation;
use crate::model::{AgentId, DetAllocation, ObjectId, ObjectPermutation, Quota};
use crate::prefs::{LexOrder, LexProfile};
use crate::randomized::{EnvyWitness, LotterySupport, SampledAllocation};
use crate::rational::Rational;

/// What a report ran on: the file path (absent in grid mode) and the
/// SHA-256 of the exact bytes or grid descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub sha256: String,
}

/// Envelope shared by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub instance: InstanceMeta,
    /// "exact", "exhaustive", or "sampled".
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub results: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl<T: Serialize + DeserializeOwned> Report<T> {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Report<T>> {
        Ok(serde_json::from_slice(bytes)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleOut {
    pub agent: String,
    pub objects: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdenticalProfileOut {
    /// The single ranking every agent reports in the reconstruction.
    pub ranking: Vec<String>,
    /// Whether replaying the mechanism on it reproduces the allocation.
    pub reproduces_allocation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocateBody {
    pub mechanism: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<Vec<usize>>,
    pub bundles: Vec<BundleOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identical_profile: Option<IdenticalProfileOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEntryOut {
    pub ordering: Vec<String>,
    pub weight: String,
    pub bundles: Vec<BundleOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsdqExactBody {
    pub quota: Vec<usize>,
    /// How many dictator orderings the lottery averages over.
    pub orderings: u64,
    /// Row per agent, column per object, lowest-terms rationals.
    pub matrix: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<SupportEntryOut>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsdqSampleBody {
    pub quota: Vec<usize>,
    pub trials: u64,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyOut {
    pub property: String,
    pub holds: bool,
    /// Candidate deviations/comparisons evaluated before the verdict.
    pub checked: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditBody {
    pub mechanism: String,
    /// "instance" for a fixed profile, "grid" for all profiles of a size.
    pub scope: String,
    pub agents: usize,
    pub objects: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<Vec<usize>>,
    pub properties: Vec<PropertyOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentDominanceOut {
    pub agent: String,
    /// "first", "second", or "equal": which row this agent ranks higher.
    pub prefers: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceBody {
    pub relation: String,
    pub matrix_a_sha256: String,
    pub matrix_b_sha256: String,
    pub first_dominates_second: bool,
    pub second_dominates_first: bool,
    pub per_agent: Vec<AgentDominanceOut>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManipulationBody {
    pub mechanism: String,
    pub found: bool,
    pub checked: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

pub fn profile_value(profile: &LexProfile, labels: &Labels) -> Value {
    Value::Array(
        (0..profile.agents())
            .map(|i| {
                let agent = AgentId(i as u32);
                json!({
                    "id": labels.agent_label(agent),
                    "prefs": labels.ranking_labels(profile.pref(agent)),
                })
            })
            .collect(),
    )
}

pub fn allocation_value(alloc: &DetAllocation, labels: &Labels) -> Value {
    Value::Array(
        (0..alloc.agents())
            .map(|i| {
                let agent = AgentId(i as u32);
                json!({
                    "agent": labels.agent_label(agent),
                    "objects": labels.bundle_labels(alloc.bundle(agent)),
                })
            })
            .collect(),
    )
}

pub fn allocation_bundles(alloc: &DetAllocation, labels: &Labels) -> Vec<BundleOut> {
    (0..alloc.agents())
        .map(|i| {
            let agent = AgentId(i as u32);
            BundleOut {
                agent: labels.agent_label(agent).to_string(),
                objects: labels.bundle_labels(alloc.bundle(agent)),
            }
        })
        .collect()
}

fn rational_row(row: &[Rational]) -> Vec<String> {
    row.iter().map(|r| r.to_string()).collect()
}

pub fn matrix_rows(matrix: &RandAllocation) -> Vec<Vec<String>> {
    matrix.rows().iter().map(|r| rational_row(r)).collect()
}

pub fn sampled_rows(sampled: &SampledAllocation) -> Vec<Vec<f64>> {
    sampled.rows().to_vec()
}

pub fn support_entries(support: &LotterySupport, labels: &Labels) -> Vec<SupportEntryOut> {
    let weight = support.weight().to_string();
    support
        .entries()
        .iter()
        .map(|entry| SupportEntryOut {
            ordering: entry
                .ordering
                .iter()
                .map(|&a| labels.agent_label(a).to_string())
                .collect(),
            weight: weight.clone(),
            bundles: allocation_bundles(&entry.allocation, labels),
        })
        .collect()
}

fn permutation_value(perm: &ObjectPermutation, labels: &Labels) -> Value {
    let mut map = serde_json::Map::new();
    for i in 0..labels.objects() {
        let from = ObjectId(i as u32);
        map.insert(
            labels.object_label(from).to_string(),
            Value::String(labels.object_label(perm.apply(from)).to_string()),
        );
    }
    Value::Object(map)
}

fn ranking_value(order: &LexOrder, labels: &Labels) -> Value {
    json!(labels.ranking_labels(order))
}

pub fn manipulation_value(w: &ManipulationWitness, labels: &Labels) -> Value {
    json!({
        "agent": labels.agent_label(w.agent),
        "misreport": ranking_value(&w.misreport, labels),
        "truthful_bundle": labels.bundle_labels(w.truthful_bundle),
        "deviant_bundle": labels.bundle_labels(w.deviant_bundle),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn bossiness_value(w: &BossinessWitness, labels: &Labels) -> Value {
    json!({
        "agent": labels.agent_label(w.agent),
        "misreport": ranking_value(&w.misreport, labels),
        "truthful": allocation_value(&w.truthful, labels),
        "deviant": allocation_value(&w.deviant, labels),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn neutrality_value(w: &NeutralityWitness, labels: &Labels) -> Value {
    json!({
        "relabeling": permutation_value(&w.relabeling, labels),
        "on_relabeled_profile": allocation_value(&w.on_relabeled, labels),
        "relabeled_outcome": allocation_value(&w.relabeled_outcome, labels),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn pareto_value(w: &ParetoWitness, labels: &Labels) -> Value {
    json!({
        "dominating": allocation_value(&w.dominating, labels),
        "strict_agent": labels.agent_label(w.strict_agent),
    })
}

pub fn group_manipulation_value(w: &GroupManipulationWitness, labels: &Labels) -> Value {
    json!({
        "coalition": w.coalition.iter().map(|&a| labels.agent_label(a)).collect::<Vec<_>>(),
        "misreports": w.coalition.iter().zip(&w.misreports).map(|(&a, r)| json!({
            "id": labels.agent_label(a),
            "prefs": labels.ranking_labels(r),
        })).collect::<Vec<_>>(),
        "truthful": allocation_value(&w.truthful, labels),
        "deviant": allocation_value(&w.deviant, labels),
        "strict_agent": labels.agent_label(w.strict_agent),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn reallocation_value(w: &ReallocationWitness, labels: &Labels) -> Value {
    json!({
        "coalition": w.coalition.iter().map(|&a| labels.agent_label(a)).collect::<Vec<_>>(),
        "misreports": w.coalition.iter().zip(&w.misreports).map(|(&a, r)| json!({
            "id": labels.agent_label(a),
            "prefs": labels.ranking_labels(r),
        })).collect::<Vec<_>>(),
        "truthful": allocation_value(&w.truthful, labels),
        "mechanism_outcome": allocation_value(&w.deviant, labels),
        "final_bundles": w.coalition.iter().zip(&w.final_bundles).map(|(&a, &b)| json!({
            "agent": labels.agent_label(a),
            "objects": labels.bundle_labels(b),
        })).collect::<Vec<_>>(),
        "strict_agent": labels.agent_label(w.strict_agent),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn rand_manipulation_value(w: &RandManipulationWitness, labels: &Labels) -> Value {
    json!({
        "agent": labels.agent_label(w.agent),
        "misreport": ranking_value(&w.misreport, labels),
        "truthful_row": rational_row(&w.truthful_row),
        "deviant_row": rational_row(&w.deviant_row),
        "quota": w.quota.sizes(),
        "profile": profile_value(&w.profile, labels),
    })
}

pub fn envy_value(w: &EnvyWitness, labels: &Labels) -> Value {
    json!({
        "envious": labels.agent_label(w.envious),
        "envied": labels.agent_label(w.envied),
        "pivot_object": labels.object_label(w.pivot),
    })
}

pub fn equal_treatment_value(first: AgentId, second: AgentId, labels: &Labels) -> Value {
    json!({
        "first": labels.agent_label(first),
        "second": labels.agent_label(second),
    })
}

pub fn serial_equivalence_value(w: &SerialEquivalenceFailure, labels: &Labels) -> Value {
    json!({
        "mechanism_allocation": allocation_value(&w.mechanism_allocation, labels),
        "serial_allocation": allocation_value(&w.serial_allocation, labels),
        "profile": profile_value(&w.profile, labels),
    })
}

/// CSV form of an exact matrix: header row `agent,<object labels>`, one
/// row of lowest-terms rationals per agent.
pub fn matrix_csv(matrix: &RandAllocation, labels: &Labels) -> String {
    let mut out = String::from("agent");
    for label in labels.object_labels() {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (i, row) in matrix.rows().iter().enumerate() {
        out.push_str(labels.agent_label(AgentId(i as u32)));
        for cell in row {
            out.push(',');
            out.push_str(&cell.to_string());
        }
        out.push('\n');
    }
    out
}

/// CSV form of a sampled matrix, floats as Rust's shortest round-trip
/// representation.
pub fn sampled_csv(sampled: &SampledAllocation, labels: &Labels) -> String {
    let mut out = String::from("agent");
    for label in labels.object_labels() {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for (i, row) in sampled.rows().iter().enumerate() {
        out.push_str(labels.agent_label(AgentId(i as u32)));
        for cell in row {
            out.push(',');
            out.push_str(&cell.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn quota_sizes(quota: &Quota) -> Vec<usize> {
    quota.sizes().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjSet;

    fn sample_report() -> Report<AllocateBody> {
        Report {
            command: "allocate".into(),
            instance: InstanceMeta {
                path: Some("instance.json".into()),
                sha256: "00".repeat(32),
            },
            mode: "exact".into(),
            seed: None,
            results: AllocateBody {
                mechanism: "sd".into(),
                quota: Some(vec![2, 1]),
                bundles: vec![
                    BundleOut {
                        agent: "1".into(),
                        objects: vec!["a".into(), "c".into()],
                    },
                    BundleOut {
                        agent: "2".into(),
                        objects: vec!["b".into()],
                    },
                ],
                identical_profile: None,
            },
            timing_ms: None,
        }
    }

    #[test]
    fn report_round_trip() {
        let report = sample_report();
        let json = report.to_json_pretty();
        let again: Report<AllocateBody> = Report::from_slice(json.as_bytes()).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn serialization_is_stable() {
        let a = sample_report().to_json_pretty();
        let b = sample_report().to_json_pretty();
        assert_eq!(a, b);
        // Optional fields stay out of the output entirely.
        assert!(!a.contains("seed"));
        assert!(!a.contains("timing_ms"));
    }

    #[test]
    fn witness_values_use_labels() {
        let labels = Labels::synthetic(2, 3);
        let profile = LexProfile::new(vec![
            LexOrder::new(vec![ObjectId(0), ObjectId(1), ObjectId(2)]).unwrap(),
            LexOrder::new(vec![ObjectId(1), ObjectId(2), ObjectId(0)]).unwrap(),
        ])
        .unwrap();
        let w = ManipulationWitness {
            profile,
            agent: AgentId(0),
            misreport: LexOrder::new(vec![ObjectId(1), ObjectId(0), ObjectId(2)]).unwrap(),
            truthful_bundle: ObjSet::singleton(ObjectId(0)),
            deviant_bundle: ObjSet::singleton(ObjectId(1)),
        };
        let v = manipulation_value(&w, &labels);
        assert_eq!(v["agent"], "1");
        assert_eq!(v["misreport"][0], "b");
        assert_eq!(v["truthful_bundle"][0], "a");
        assert_eq!(v["profile"][1]["prefs"][0], "b");
    }

    #[test]
    fn csv_shape() {
        let labels = Labels::synthetic(2, 2);
        let half = Rational::new(1, 2);
        let matrix = RandAllocation::new(vec![
            vec![half.clone(), half.clone()],
            vec![half.clone(), half],
        ])
        .unwrap();
        let csv = matrix_csv(&matrix, &labels);
        assert_eq!(csv, "agent,a,b\n1,1/2,1/2\n2,1/2,1/2\n");
    }
}
