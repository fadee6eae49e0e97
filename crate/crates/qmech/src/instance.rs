//! Problem-instance files: JSON in, validated internal types out.
//!
//! Instances name agents and objects with string labels; everything
//! internal runs on dense indices. [`Labels`] carries the two-way mapping
//! so reports can speak the caller's language. Files hash to a SHA-256
//! digest recorded in every report, so a report always says what it ran
//! on.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::RandAllocation;
use crate::mechanisms::{AgentOrdering, DictatorPolicy, MechanismSpec};
use crate::model::{AgentId, DetAllocation, ObjSet, ObjectId, PickingSequence, Quota};
use crate::prefs::{GeneralSetPref, LexOrder, LexProfile};
use crate::rational::Rational;

/// Hex SHA-256 of raw bytes; identifies instance files inside reports.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Two-way mapping between external labels and internal indices.
#[derive(Clone, Debug)]
pub struct Labels {
    agents: Vec<String>,
    objects: Vec<String>,
    agent_idx: BTreeMap<String, u32>,
    object_idx: BTreeMap<String, u32>,
}

impl Labels {
    pub fn new(agents: Vec<String>, objects: Vec<String>) -> Result<Labels> {
        let mut agent_idx = BTreeMap::new();
        for (i, label) in agents.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::InvalidInstance("empty agent label".into()));
            }
            if agent_idx.insert(label.clone(), i as u32).is_some() {
                return Err(Error::InvalidInstance(format!(
                    "duplicate agent label {label:?}"
                )));
            }
        }
        let mut object_idx = BTreeMap::new();
        for (i, label) in objects.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::InvalidInstance("empty object label".into()));
            }
            if object_idx.insert(label.clone(), i as u32).is_some() {
                return Err(Error::InvalidInstance(format!(
                    "duplicate object label {label:?}"
                )));
            }
        }
        Ok(Labels {
            agents,
            objects,
            agent_idx,
            object_idx,
        })
    }

    /// Default labels for grid mode: agents "1".."n"; objects "a", "b", ...
    /// while single letters last, then "o1".."om".
    pub fn synthetic(agents: usize, objects: usize) -> Labels {
        let agent_labels = (1..=agents).map(|i| i.to_string()).collect();
        let object_labels = if objects <= 26 {
            (0..objects)
                .map(|i| ((b'a' + i as u8) as char).to_string())
                .collect()
        } else {
            (1..=objects).map(|i| format!("o{i}")).collect()
        };
        Labels::new(agent_labels, object_labels).expect("generated labels are unique")
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn objects(&self) -> usize {
        self.objects.len()
    }

    pub fn agent(&self, label: &str) -> Result<AgentId> {
        self.agent_idx
            .get(label)
            .map(|&i| AgentId(i))
            .ok_or_else(|| Error::InvalidInstance(format!("unknown agent label {label:?}")))
    }

    pub fn object(&self, label: &str) -> Result<ObjectId> {
        self.object_idx
            .get(label)
            .map(|&i| ObjectId(i))
            .ok_or_else(|| Error::InvalidInstance(format!("unknown object label {label:?}")))
    }

    pub fn agent_label(&self, agent: AgentId) -> &str {
        &self.agents[agent.index()]
    }

    pub fn object_label(&self, object: ObjectId) -> &str {
        &self.objects[object.index()]
    }

    pub fn agent_labels(&self) -> &[String] {
        &self.agents
    }

    pub fn object_labels(&self) -> &[String] {
        &self.objects
    }

    /// Bundle as labels, ascending object index.
    pub fn bundle_labels(&self, bundle: ObjSet) -> Vec<String> {
        bundle
            .iter()
            .map(|o| self.object_label(o).to_string())
            .collect()
    }

    pub fn ranking_labels(&self, order: &LexOrder) -> Vec<String> {
        order
            .ranking()
            .iter()
            .map(|&o| self.object_label(o).to_string())
            .collect()
    }

    pub fn ordering_labels(&self, order: &AgentOrdering) -> Vec<String> {
        order
            .agents()
            .iter()
            .map(|&a| self.agent_label(a).to_string())
            .collect()
    }

    fn objects_from_labels(&self, labels: &[String]) -> Result<Vec<ObjectId>> {
        labels.iter().map(|l| self.object(l)).collect()
    }

    fn bundle_from_labels(&self, labels: &[String]) -> Result<ObjSet> {
        let mut bundle = ObjSet::EMPTY;
        for label in labels {
            let o = self.object(label)?;
            if bundle.contains(o) {
                return Err(Error::InvalidInstance(format!(
                    "object {label:?} listed twice in one bundle"
                )));
            }
            bundle.insert(o);
        }
        Ok(bundle)
    }

    fn agents_from_labels(&self, labels: &[String]) -> Result<Vec<AgentId>> {
        labels.iter().map(|l| self.agent(l)).collect()
    }
}

/// One agent record: identity plus its reported ranking, best first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEntry {
    pub id: String,
    pub prefs: Vec<String>,
}

/// A ranking over whole bundles for one agent, best first, used by the
/// efficiency checks that accept non-lexicographic preferences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralPrefEntry {
    pub id: String,
    pub ranking: Vec<Vec<String>>,
}

/// One branch of a sequential-dictator policy: if the bundles handed out
/// so far match `history` exactly, `next` picks next.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub history: Vec<Vec<String>>,
    pub next: String,
}

/// Mechanism parameters as they appear in instance files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MechanismFile {
    #[serde(rename = "sd")]
    Serial { order: Vec<String> },
    #[serde(rename = "sequential")]
    Sequential {
        first: String,
        #[serde(default)]
        rules: Vec<RuleEntry>,
        default_order: Vec<String>,
    },
    #[serde(rename = "interleave")]
    Interleave { sequence: Vec<String> },
    #[serde(rename = "bossy")]
    Bossy {},
    #[serde(rename = "imposed")]
    Imposed {
        allocation: BTreeMap<String, Vec<String>>,
    },
}

/// A problem instance as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub objects: Vec<String>,
    pub agents: Vec<AgentEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<MechanismFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general_prefs: Option<Vec<GeneralPrefEntry>>,
}

impl InstanceFile {
    pub fn from_slice(bytes: &[u8]) -> Result<InstanceFile> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Reads and parses a file, returning the instance together with the
    /// digest of the raw bytes.
    pub fn from_path(path: impl AsRef<Path>) -> Result<(InstanceFile, String)> {
        let bytes = std::fs::read(path)?;
        Ok((InstanceFile::from_slice(&bytes)?, sha256_hex(&bytes)))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize")
    }

    pub fn labels(&self) -> Result<Labels> {
        Labels::new(
            self.agents.iter().map(|a| a.id.clone()).collect(),
            self.objects.clone(),
        )
    }

    /// Reported rankings, validated against the label universe.
    pub fn profile(&self, labels: &Labels) -> Result<LexProfile> {
        let mut prefs = Vec::with_capacity(self.agents.len());
        for entry in &self.agents {
            if entry.prefs.len() != labels.objects() {
                return Err(Error::InvalidInstance(format!(
                    "agent {:?}: prefs rank {} labels but the instance has {} objects",
                    entry.id,
                    entry.prefs.len(),
                    labels.objects()
                )));
            }
            let ranking = labels.objects_from_labels(&entry.prefs).map_err(|e| {
                Error::InvalidInstance(format!("agent {:?}: {e}", entry.id))
            })?;
            let order = LexOrder::new(ranking).map_err(|e| {
                Error::InvalidInstance(format!(
                    "agent {:?}: prefs must rank every object exactly once ({e})",
                    entry.id
                ))
            })?;
            prefs.push(order);
        }
        LexProfile::new(prefs)
            .map_err(|e| Error::InvalidInstance(format!("profile invalid: {e}")))
    }

    pub fn quota(&self) -> Option<Quota> {
        self.quota.as_ref().map(|sizes| Quota::new(sizes.clone()))
    }

    /// Bundle rankings for the agents that have them, in agent order.
    /// Returns one entry per agent; agents without a recorded ranking are
    /// an error, since partial data cannot drive an efficiency check.
    pub fn general_profile(&self, labels: &Labels) -> Result<Option<Vec<GeneralSetPref>>> {
        let entries = match &self.general_prefs {
            Some(e) => e,
            None => return Ok(None),
        };
        let mut by_id: BTreeMap<&str, &GeneralPrefEntry> = BTreeMap::new();
        for entry in entries {
            if by_id.insert(entry.id.as_str(), entry).is_some() {
                return Err(Error::InvalidInstance(format!(
                    "duplicate general_prefs entry for agent {:?}",
                    entry.id
                )));
            }
            labels.agent(&entry.id)?;
        }
        let mut prefs = Vec::with_capacity(self.agents.len());
        for agent in &self.agents {
            let entry = by_id.get(agent.id.as_str()).ok_or_else(|| {
                Error::InvalidInstance(format!(
                    "general_prefs missing agent {:?}",
                    agent.id
                ))
            })?;
            let mut ranking = Vec::with_capacity(entry.ranking.len());
            for subset in &entry.ranking {
                ranking.push(labels.bundle_from_labels(subset).map_err(|e| {
                    Error::InvalidInstance(format!("agent {:?}: {e}", agent.id))
                })?);
            }
            prefs.push(
                GeneralSetPref::new(labels.objects(), ranking).map_err(|e| {
                    Error::InvalidInstance(format!(
                        "agent {:?}: bundle ranking invalid ({e})",
                        agent.id
                    ))
                })?,
            );
        }
        Ok(Some(prefs))
    }

    /// Builds the mechanism named in the file, if any.
    pub fn mechanism(&self, labels: &Labels) -> Result<Option<MechanismSpec>> {
        let file = match &self.mechanism {
            Some(m) => m,
            None => return Ok(None),
        };
        let spec = build_mechanism(file, labels, self.quota().as_ref())?;
        Ok(Some(spec))
    }
}

/// Assembles a runnable mechanism from file parameters, a label map, and
/// the quota in scope (the file's own, or a CLI override).
pub fn build_mechanism(
    file: &MechanismFile,
    labels: &Labels,
    quota: Option<&Quota>,
) -> Result<MechanismSpec> {
    let need_quota = || {
        quota.cloned().ok_or_else(|| {
            Error::InvalidInstance("this mechanism needs a quota".into())
        })
    };
    let spec = match file {
        MechanismFile::Serial { order } => MechanismSpec::SerialDictatorQuota {
            order: AgentOrdering::new(labels.agents_from_labels(order)?)?,
            quota: need_quota()?,
        },
        MechanismFile::Sequential {
            first,
            rules,
            default_order,
        } => {
            let mut policy = DictatorPolicy::new(
                labels.agent(first)?,
                labels.agents_from_labels(default_order)?,
            );
            for rule in rules {
                let history: Result<Vec<ObjSet>> = rule
                    .history
                    .iter()
                    .map(|bundle| labels.bundle_from_labels(bundle))
                    .collect();
                policy = policy.with_rule(history?, labels.agent(&rule.next)?);
            }
            MechanismSpec::SequentialDictatorQuota {
                policy,
                quota: need_quota()?,
            }
        }
        MechanismFile::Interleave { sequence } => MechanismSpec::Interleaving {
            sequence: PickingSequence::new(labels.agents_from_labels(sequence)?),
        },
        MechanismFile::Bossy {} => MechanismSpec::BossyFixture {
            quota: need_quota()?,
        },
        MechanismFile::Imposed { allocation } => {
            let mut bundles = vec![ObjSet::EMPTY; labels.agents()];
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            for (id, bundle) in allocation {
                if !seen.insert(id.as_str()) {
                    return Err(Error::InvalidInstance(format!(
                        "agent {id:?} allocated twice"
                    )));
                }
                let agent = labels.agent(id)?;
                bundles[agent.index()] = labels.bundle_from_labels(bundle)?;
            }
            MechanismSpec::Imposed {
                allocation: DetAllocation::from_bundles(bundles)?,
            }
        }
    };
    Ok(spec)
}

/// A marginal-probability matrix as stored on disk: one row of
/// lowest-terms rational strings per agent, columns in object order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub matrix: Vec<Vec<String>>,
}

impl MatrixFile {
    pub fn from_path(path: impl AsRef<Path>) -> Result<(MatrixFile, String)> {
        let bytes = std::fs::read(path)?;
        Ok((serde_json::from_slice(&bytes)?, sha256_hex(&bytes)))
    }

    pub fn to_rand_allocation(&self) -> Result<RandAllocation> {
        let mut rows = Vec::with_capacity(self.matrix.len());
        for row in &self.matrix {
            let parsed: Result<Vec<Rational>> = row
                .iter()
                .map(|cell| {
                    cell.parse::<Rational>().map_err(|e| {
                        Error::InvalidInstance(format!("bad matrix entry {cell:?}: {e}"))
                    })
                })
                .collect();
            rows.push(parsed?);
        }
        RandAllocation::new(rows)
    }

    pub fn from_rand_allocation(alloc: &RandAllocation) -> MatrixFile {
        MatrixFile {
            matrix: alloc
                .rows()
                .iter()
                .map(|row| row.iter().map(|r| r.to_string()).collect())
                .collect(),
        }
    }
}
