//! Deterministic quota mechanisms.
//!
//! The catalog covers serial dictatorships with positional quotas, sequential
//! dictatorships whose next dictator is chosen from the bundles assigned so
//! far, interleaved picking sequences, a deliberately bossy fixture for
//! exercising the audit machinery, and profile-independent imposed
//! allocations.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{AgentId, DetAllocation, ObjSet, ObjectId, PickingSequence, Quota};
use crate::prefs::{LexOrder, LexProfile};

/// A list of distinct agents; position `i` is served `i`-th.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AgentOrdering {
    agents: Vec<AgentId>,
}

impl AgentOrdering {
    pub fn new(agents: Vec<AgentId>) -> Result<AgentOrdering> {
        for (i, a) in agents.iter().enumerate() {
            if agents[..i].contains(a) {
                return Err(Error::DuplicateAgent);
            }
        }
        Ok(AgentOrdering { agents })
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn validate(&self, agents: usize, positions: usize) -> Result<()> {
        if self.agents.len() != positions {
            return Err(Error::OrderingLength {
                expected: positions,
                actual: self.agents.len(),
            });
        }
        for &a in &self.agents {
            if a.index() >= agents {
                return Err(Error::AgentOutOfRange {
                    index: a.index(),
                    agents,
                });
            }
        }
        Ok(())
    }
}

/// Chooses each next dictator from the sequence of bundles assigned so far.
///
/// Keying on bundles rather than on reported rankings is what keeps every
/// sequential dictatorship in this family non-bossy: an agent who cannot
/// change its own bundle cannot change the continuation either.
///
/// Resolution for a non-empty history: an exact match in `rules` names the
/// next dictator (an error if that agent was already served); otherwise the
/// first unserved agent in `default_order`; otherwise the lowest-indexed
/// unserved agent.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DictatorPolicy {
    first: AgentId,
    rules: BTreeMap<Vec<ObjSet>, AgentId>,
    default_order: Vec<AgentId>,
}

impl DictatorPolicy {
    pub fn new(first: AgentId, default_order: Vec<AgentId>) -> DictatorPolicy {
        DictatorPolicy {
            first,
            rules: BTreeMap::new(),
            default_order,
        }
    }

    /// The policy that replays a fixed ordering.
    pub fn constant(order: &AgentOrdering) -> DictatorPolicy {
        let agents = order.agents();
        DictatorPolicy::new(agents[0], agents[1..].to_vec())
    }

    /// Adds an exact-history rule: after assigning exactly `history`, the
    /// next dictator is `next`.
    pub fn with_rule(mut self, history: Vec<ObjSet>, next: AgentId) -> DictatorPolicy {
        self.rules.insert(history, next);
        self
    }

    pub fn first(&self) -> AgentId {
        self.first
    }

    pub fn rules(&self) -> &BTreeMap<Vec<ObjSet>, AgentId> {
        &self.rules
    }

    pub fn default_order(&self) -> &[AgentId] {
        &self.default_order
    }

    pub fn validate(&self, agents: usize) -> Result<()> {
        let check = |a: AgentId| -> Result<()> {
            if a.index() >= agents {
                return Err(Error::AgentOutOfRange {
                    index: a.index(),
                    agents,
                });
            }
            Ok(())
        };
        check(self.first)?;
        for (i, &a) in self.default_order.iter().enumerate() {
            check(a)?;
            if self.default_order[..i].contains(&a) {
                return Err(Error::DuplicateAgent);
            }
        }
        for &a in self.rules.values() {
            check(a)?;
        }
        Ok(())
    }

    fn next(&self, history: &[ObjSet], served: &[bool]) -> Result<AgentId> {
        if let Some(&a) = self.rules.get(history) {
            if served[a.index()] {
                return Err(Error::PolicyAgentServed { agent: a.index() });
            }
            return Ok(a);
        }
        if let Some(&a) = self.default_order.iter().find(|a| !served[a.index()]) {
            return Ok(a);
        }
        served
            .iter()
            .position(|&s| !s)
            .map(|i| AgentId(i as u32))
            .ok_or(Error::PolicyAgentServed {
                agent: self.first.index(),
            })
    }
}

/// Serial dictatorship: position `i`'s agent takes its `q_i` most-preferred
/// remaining objects.
pub fn run_serial(profile: &LexProfile, order: &AgentOrdering, quota: &Quota) -> Result<DetAllocation> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    order.validate(n, quota.positions())?;
    let mut remaining = ObjSet::full(m);
    let mut alloc = DetAllocation::empty(n);
    for (pos, &agent) in order.agents().iter().enumerate() {
        let bundle = profile.pref(agent).top_k(remaining, quota.sizes()[pos])?;
        alloc.set_bundle(agent, bundle);
        remaining = remaining.difference(bundle);
    }
    Ok(alloc)
}

/// Sequential dictatorship: like [`run_serial`], but each next dictator is
/// resolved by `policy` from the bundles assigned so far.
pub fn run_sequential(
    profile: &LexProfile,
    policy: &DictatorPolicy,
    quota: &Quota,
) -> Result<DetAllocation> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    policy.validate(n)?;
    let mut remaining = ObjSet::full(m);
    let mut alloc = DetAllocation::empty(n);
    let mut served = vec![false; n];
    let mut history: Vec<ObjSet> = Vec::with_capacity(quota.positions());
    for (pos, &take) in quota.sizes().iter().enumerate() {
        let agent = if pos == 0 {
            policy.first()
        } else {
            policy.next(&history, &served)?
        };
        if served[agent.index()] {
            return Err(Error::PolicyAgentServed {
                agent: agent.index(),
            });
        }
        let bundle = profile.pref(agent).top_k(remaining, take)?;
        alloc.set_bundle(agent, bundle);
        remaining = remaining.difference(bundle);
        served[agent.index()] = true;
        history.push(bundle);
    }
    Ok(alloc)
}

/// Picking-sequence mechanism: at each turn the named agent takes its single
/// most-preferred remaining object.
pub fn run_interleaving(profile: &LexProfile, sequence: &PickingSequence) -> Result<DetAllocation> {
    let (n, m) = (profile.agents(), profile.objects());
    sequence.validate(n, m)?;
    let mut remaining = ObjSet::full(m);
    let mut alloc = DetAllocation::empty(n);
    for &agent in sequence.turns() {
        let pick = profile.pref(agent).top_k(remaining, 1)?;
        alloc.set_bundle(agent, alloc.bundle(agent).union(pick));
        remaining = remaining.difference(pick);
    }
    Ok(alloc)
}

/// Turn order `0,1,..,n-1,0,1,..`, truncated to `m` turns.
pub fn strict_alternation_sequence(agents: usize, objects: usize) -> PickingSequence {
    assert!(agents >= 1);
    PickingSequence::new(
        (0..objects)
            .map(|t| AgentId((t % agents) as u32))
            .collect(),
    )
}

/// Draft order: `order` forward, then backward, repeated and truncated to
/// `m` turns (`0,1,2,2,1,0,0,1,2,..` for three agents).
pub fn draft_sequence(order: &AgentOrdering, objects: usize) -> PickingSequence {
    assert!(!order.is_empty());
    let fwd = order.agents();
    let mut block: Vec<AgentId> = fwd.to_vec();
    block.extend(fwd.iter().rev());
    PickingSequence::new((0..objects).map(|t| block[t % block.len()]).collect())
}

/// Draft order over agents in index order.
pub fn balanced_alternation_sequence(agents: usize, objects: usize) -> PickingSequence {
    let order = AgentOrdering::new((0..agents as u32).map(AgentId).collect())
        .expect("index order has no duplicates");
    draft_sequence(&order, objects)
}

/// Bossy fixture mechanism. Agent 0 always takes its stated top `q_1`
/// objects. The continuation hinges on whether agent 0's stated ranking is
/// exactly the identity ranking: with three or more agents the remaining
/// positions serve agents in ascending index order when it is, descending
/// when it is not; with exactly two agents, agent 1 receives its stated top
/// `q_2` remaining objects when it is, and its stated bottom `q_2` when not.
///
/// Branching on a report rather than on bundles makes this mechanism bossy
/// and manipulable on purpose; it exists as a counterexample generator.
pub fn run_bossy_fixture(profile: &LexProfile, quota: &Quota) -> Result<DetAllocation> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    let sizes = quota.sizes();
    let mut alloc = DetAllocation::empty(n);
    if sizes.is_empty() {
        return Ok(alloc);
    }
    let cooperative = profile.pref(AgentId(0)) == &LexOrder::identity(m);
    let mut remaining = ObjSet::full(m);
    let first = profile.pref(AgentId(0)).top_k(remaining, sizes[0])?;
    alloc.set_bundle(AgentId(0), first);
    remaining = remaining.difference(first);

    let mut successors: Vec<AgentId> = (1..n as u32).map(AgentId).collect();
    if !cooperative && n >= 3 {
        successors.reverse();
    }
    for (pos, &take) in sizes.iter().enumerate().skip(1) {
        let agent = successors[pos - 1];
        let pref = profile.pref(agent);
        let bundle = if n == 2 && !cooperative {
            pref.reversed().top_k(remaining, take)?
        } else {
            pref.top_k(remaining, take)?
        };
        alloc.set_bundle(agent, bundle);
        remaining = remaining.difference(bundle);
    }
    Ok(alloc)
}

/// A deterministic allocation rule.
pub trait Mechanism {
    fn allocate(&self, profile: &LexProfile) -> Result<DetAllocation>;
}

/// The mechanism catalog, in a form that can be parsed from instance files.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum MechanismSpec {
    SerialDictatorQuota { order: AgentOrdering, quota: Quota },
    SequentialDictatorQuota { policy: DictatorPolicy, quota: Quota },
    Interleaving { sequence: PickingSequence },
    BossyFixture { quota: Quota },
    Imposed { allocation: DetAllocation },
}

impl MechanismSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MechanismSpec::SerialDictatorQuota { .. } => "sd",
            MechanismSpec::SequentialDictatorQuota { .. } => "sequential",
            MechanismSpec::Interleaving { .. } => "interleave",
            MechanismSpec::BossyFixture { .. } => "bossy",
            MechanismSpec::Imposed { .. } => "imposed",
        }
    }

    pub fn validate(&self, agents: usize, objects: usize) -> Result<()> {
        match self {
            MechanismSpec::SerialDictatorQuota { order, quota } => {
                quota.validate(agents, objects)?;
                order.validate(agents, quota.positions())
            }
            MechanismSpec::SequentialDictatorQuota { policy, quota } => {
                quota.validate(agents, objects)?;
                policy.validate(agents)
            }
            MechanismSpec::Interleaving { sequence } => sequence.validate(agents, objects),
            MechanismSpec::BossyFixture { quota } => quota.validate(agents, objects),
            MechanismSpec::Imposed { allocation } => {
                if allocation.agents() != agents {
                    return Err(Error::InvalidInstance(format!(
                        "imposed allocation covers {} agents, instance has {}",
                        allocation.agents(),
                        agents
                    )));
                }
                if !allocation.assigned().is_subset(ObjSet::full(objects)) {
                    return Err(Error::InvalidInstance(
                        "imposed allocation assigns objects outside the universe".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The quota, for the variants that carry one.
    pub fn quota(&self) -> Option<&Quota> {
        match self {
            MechanismSpec::SerialDictatorQuota { quota, .. }
            | MechanismSpec::SequentialDictatorQuota { quota, .. }
            | MechanismSpec::BossyFixture { quota } => Some(quota),
            _ => None,
        }
    }
}

impl Mechanism for MechanismSpec {
    fn allocate(&self, profile: &LexProfile) -> Result<DetAllocation> {
        match self {
            MechanismSpec::SerialDictatorQuota { order, quota } => {
                run_serial(profile, order, quota)
            }
            MechanismSpec::SequentialDictatorQuota { policy, quota } => {
                run_sequential(profile, policy, quota)
            }
            MechanismSpec::Interleaving { sequence } => run_interleaving(profile, sequence),
            MechanismSpec::BossyFixture { quota } => run_bossy_fixture(profile, quota),
            MechanismSpec::Imposed { allocation } => {
                if allocation.agents() != profile.agents() {
                    return Err(Error::InvalidInstance(
                        "imposed allocation does not match profile size".into(),
                    ));
                }
                Ok(allocation.clone())
            }
        }
    }
}

fn dictator_trace(
    profile: &LexProfile,
    quota: &Quota,
    mut pick_agent: impl FnMut(usize, &[ObjSet], &[bool]) -> Result<AgentId>,
) -> Result<Vec<(AgentId, Vec<ObjectId>)>> {
    let (n, m) = (profile.agents(), profile.objects());
    let mut remaining = ObjSet::full(m);
    let mut served = vec![false; n];
    let mut history: Vec<ObjSet> = Vec::new();
    let mut trace = Vec::with_capacity(quota.positions());
    for (pos, &take) in quota.sizes().iter().enumerate() {
        let agent = pick_agent(pos, &history, &served)?;
        if served[agent.index()] {
            return Err(Error::PolicyAgentServed {
                agent: agent.index(),
            });
        }
        let picks = profile.pref(agent).top_k_ordered(remaining, take)?;
        let bundle: ObjSet = picks.iter().copied().collect();
        remaining = remaining.difference(bundle);
        served[agent.index()] = true;
        history.push(bundle);
        trace.push((agent, picks));
    }
    Ok(trace)
}

fn identical_from_trace(m: usize, trace: &[(AgentId, Vec<ObjectId>)], agents: usize) -> LexProfile {
    let mut ranking: Vec<ObjectId> = Vec::with_capacity(m);
    for (_, picks) in trace {
        ranking.extend_from_slice(picks);
    }
    let assigned: ObjSet = ranking.iter().copied().collect();
    ranking.extend(ObjSet::full(m).difference(assigned).iter());
    let order = LexOrder::new(ranking).expect("trace covers distinct objects");
    LexProfile::identical(agents, order)
}

/// Builds an identical-preference profile on which the serial dictatorship
/// `(order, quota)` reproduces exactly the allocation it selects at
/// `profile`: each dictator's picks are concatenated in preference order,
/// and never-assigned objects follow in index order.
pub fn build_identical_profile(
    profile: &LexProfile,
    order: &AgentOrdering,
    quota: &Quota,
) -> Result<LexProfile> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    order.validate(n, quota.positions())?;
    let trace = dictator_trace(profile, quota, |pos, _, _| Ok(order.agents()[pos]))?;
    Ok(identical_from_trace(m, &trace, n))
}

/// [`build_identical_profile`] for a sequential dictatorship. The policy
/// sees the same bundle history on the constructed profile, so the dictator
/// sequence and all bundles are reproduced.
pub fn build_identical_profile_seq(
    profile: &LexProfile,
    policy: &DictatorPolicy,
    quota: &Quota,
) -> Result<LexProfile> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    policy.validate(n)?;
    let trace = dictator_trace(profile, quota, |pos, history, served| {
        if pos == 0 {
            Ok(policy.first())
        } else {
            policy.next(history, served)
        }
    })?;
    Ok(identical_from_trace(m, &trace, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(ranking: &[u32]) -> LexOrder {
        LexOrder::new(ranking.iter().map(|&i| ObjectId(i)).collect()).unwrap()
    }

    fn agent_order(ids: &[u32]) -> AgentOrdering {
        AgentOrdering::new(ids.iter().map(|&i| AgentId(i)).collect()).unwrap()
    }

    fn set(ids: &[u32]) -> ObjSet {
        ids.iter().map(|&i| ObjectId(i)).collect()
    }

    fn profile(rankings: &[&[u32]]) -> LexProfile {
        LexProfile::new(rankings.iter().map(|r| order(r)).collect()).unwrap()
    }

    // Objects 0..3 stand for a..d throughout.

    #[test]
    fn serial_dictatorship_takes_top_blocks() {
        // c>a>b>d, a>c>d>b, c>b>d>a with q = (2,1,1).
        let p = profile(&[&[2, 0, 1, 3], &[0, 2, 3, 1], &[2, 1, 3, 0]]);
        let alloc = run_serial(&p, &agent_order(&[0, 1, 2]), &Quota::new(vec![2, 1, 1])).unwrap();
        assert_eq!(alloc.bundle(AgentId(0)), set(&[2, 0]));
        assert_eq!(alloc.bundle(AgentId(1)), set(&[3]));
        assert_eq!(alloc.bundle(AgentId(2)), set(&[1]));
    }

    #[test]
    fn serial_leaves_leftovers_unassigned() {
        let p = profile(&[&[0, 1, 2], &[0, 1, 2]]);
        let alloc = run_serial(&p, &agent_order(&[1]), &Quota::new(vec![2])).unwrap();
        assert_eq!(alloc.bundle(AgentId(1)), set(&[0, 1]));
        assert_eq!(alloc.bundle(AgentId(0)), ObjSet::EMPTY);
        assert_eq!(alloc.total_assigned(), 2);
    }

    #[test]
    fn serial_validates_inputs() {
        let p = profile(&[&[0, 1, 2], &[0, 1, 2]]);
        assert!(run_serial(&p, &agent_order(&[0]), &Quota::new(vec![2, 2])).is_err());
        assert!(run_serial(&p, &agent_order(&[0, 1]), &Quota::new(vec![2, 2])).is_err());
        assert!(run_serial(&p, &agent_order(&[0, 5]), &Quota::new(vec![1, 1])).is_err());
    }

    #[test]
    fn constant_policy_matches_serial() {
        let p = profile(&[&[2, 0, 1, 3], &[0, 2, 3, 1], &[2, 1, 3, 0]]);
        let ord = agent_order(&[2, 0, 1]);
        let q = Quota::new(vec![1, 2, 1]);
        let serial = run_serial(&p, &ord, &q).unwrap();
        let seq = run_sequential(&p, &DictatorPolicy::constant(&ord), &q).unwrap();
        assert_eq!(serial, seq);
    }

    #[test]
    fn policy_rules_branch_on_bundles() {
        // After {0,1} the next dictator is 2, otherwise default order (1, 2).
        let policy = DictatorPolicy::new(AgentId(0), vec![AgentId(1), AgentId(2)])
            .with_rule(vec![set(&[0, 1])], AgentId(2));
        let q = Quota::new(vec![2, 1, 1]);

        let p1 = profile(&[&[0, 1, 2, 3], &[3, 2, 1, 0], &[1, 3, 2, 0]]);
        let a1 = run_sequential(&p1, &policy, &q).unwrap();
        // 0 takes {0,1}; rule fires, 2 takes 3; 1 takes 2.
        assert_eq!(a1.bundle(AgentId(0)), set(&[0, 1]));
        assert_eq!(a1.bundle(AgentId(2)), set(&[3]));
        assert_eq!(a1.bundle(AgentId(1)), set(&[2]));

        let p2 = profile(&[&[3, 0, 1, 2], &[3, 2, 1, 0], &[1, 3, 2, 0]]);
        let a2 = run_sequential(&p2, &policy, &q).unwrap();
        // 0 takes {3,0}; no rule, default order serves 1 then 2.
        assert_eq!(a2.bundle(AgentId(0)), set(&[3, 0]));
        assert_eq!(a2.bundle(AgentId(1)), set(&[2]));
        assert_eq!(a2.bundle(AgentId(2)), set(&[1]));
    }

    #[test]
    fn policy_rule_to_served_agent_errors() {
        let policy = DictatorPolicy::new(AgentId(0), vec![AgentId(1)])
            .with_rule(vec![set(&[0])], AgentId(0));
        let p = profile(&[&[0, 1], &[0, 1]]);
        let err = run_sequential(&p, &policy, &Quota::new(vec![1, 1]));
        assert!(matches!(err, Err(Error::PolicyAgentServed { agent: 0 })));
    }

    #[test]
    fn interleaving_run_alternates_picks() {
        // a>b>c vs b>c>a on sequence 0,1,0.
        let p = profile(&[&[0, 1, 2], &[1, 2, 0]]);
        let seq = PickingSequence::new(vec![AgentId(0), AgentId(1), AgentId(0)]);
        let alloc = run_interleaving(&p, &seq).unwrap();
        assert_eq!(alloc.bundle(AgentId(0)), set(&[0, 2]));
        assert_eq!(alloc.bundle(AgentId(1)), set(&[1]));
    }

    #[test]
    fn sequence_builders() {
        let turns = |s: &PickingSequence| s.turns().iter().map(|a| a.0).collect::<Vec<_>>();
        assert_eq!(turns(&strict_alternation_sequence(2, 3)), vec![0, 1, 0]);
        assert_eq!(turns(&strict_alternation_sequence(3, 6)), vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(turns(&balanced_alternation_sequence(3, 6)), vec![0, 1, 2, 2, 1, 0]);
        assert_eq!(turns(&balanced_alternation_sequence(2, 5)), vec![0, 1, 1, 0, 0]);
        assert_eq!(
            turns(&draft_sequence(&agent_order(&[1, 0]), 5)),
            vec![1, 0, 0, 1, 1]
        );
        assert!(strict_alternation_sequence(2, 3).is_interleaving());
        assert!(!strict_alternation_sequence(2, 2).is_interleaving());
        assert!(balanced_alternation_sequence(2, 4).is_interleaving());
    }

    #[test]
    fn bossy_fixture_three_agents_flips_continuation() {
        let q = Quota::new(vec![2, 1, 1]);
        // Identity report: successors served 1 then 2.
        let p = profile(&[&[0, 1, 2, 3], &[2, 3, 0, 1], &[3, 2, 1, 0]]);
        let a = run_bossy_fixture(&p, &q).unwrap();
        assert_eq!(a.bundle(AgentId(0)), set(&[0, 1]));
        assert_eq!(a.bundle(AgentId(1)), set(&[2]));
        assert_eq!(a.bundle(AgentId(2)), set(&[3]));

        // Same top-2, different tail: agent 0 keeps {0,1}, successors flip.
        let p2 = profile(&[&[0, 1, 3, 2], &[2, 3, 0, 1], &[3, 2, 1, 0]]);
        let a2 = run_bossy_fixture(&p2, &q).unwrap();
        assert_eq!(a2.bundle(AgentId(0)), set(&[0, 1]));
        assert_eq!(a2.bundle(AgentId(2)), set(&[3]));
        assert_eq!(a2.bundle(AgentId(1)), set(&[2]));

        // Distinguishing tails: successors now want the same object first.
        let p3 = profile(&[&[0, 1, 2, 3], &[2, 3, 0, 1], &[2, 3, 1, 0]]);
        let a3 = run_bossy_fixture(&p3, &q).unwrap();
        assert_eq!(a3.bundle(AgentId(1)), set(&[2]));
        assert_eq!(a3.bundle(AgentId(2)), set(&[3]));
        let p4 = profile(&[&[0, 1, 3, 2], &[2, 3, 0, 1], &[2, 3, 1, 0]]);
        let a4 = run_bossy_fixture(&p4, &q).unwrap();
        assert_eq!(a4.bundle(AgentId(2)), set(&[2]));
        assert_eq!(a4.bundle(AgentId(1)), set(&[3]));
    }

    #[test]
    fn bossy_fixture_two_agents_punishes_on_deviation() {
        let q = Quota::new(vec![1, 1]);
        // Identity report: agent 1 gets its best remaining object.
        let p = profile(&[&[0, 1, 2], &[1, 2, 0]]);
        let a = run_bossy_fixture(&p, &q).unwrap();
        assert_eq!(a.bundle(AgentId(0)), set(&[0]));
        assert_eq!(a.bundle(AgentId(1)), set(&[1]));

        // Non-identity report: agent 1 gets its stated worst remaining.
        let p2 = profile(&[&[1, 0, 2], &[0, 2, 1]]);
        let a2 = run_bossy_fixture(&p2, &q).unwrap();
        assert_eq!(a2.bundle(AgentId(0)), set(&[1]));
        assert_eq!(a2.bundle(AgentId(1)), set(&[2]));
    }

    #[test]
    fn mechanism_spec_dispatch_and_validation() {
        let p = profile(&[&[0, 1, 2], &[1, 0, 2]]);
        let spec = MechanismSpec::SerialDictatorQuota {
            order: agent_order(&[0, 1]),
            quota: Quota::new(vec![1, 1]),
        };
        spec.validate(2, 3).unwrap();
        let alloc = spec.allocate(&p).unwrap();
        assert_eq!(alloc.bundle(AgentId(0)), set(&[0]));
        assert_eq!(alloc.bundle(AgentId(1)), set(&[1]));

        let imposed = MechanismSpec::Imposed {
            allocation: DetAllocation::from_bundles(vec![set(&[1]), set(&[0])]).unwrap(),
        };
        imposed.validate(2, 3).unwrap();
        assert!(imposed.validate(3, 3).is_err());
        assert_eq!(imposed.allocate(&p).unwrap().bundle(AgentId(0)), set(&[1]));

        let bad = MechanismSpec::Interleaving {
            sequence: PickingSequence::new(vec![AgentId(7)]),
        };
        assert!(bad.validate(2, 3).is_err());
    }

    #[test]
    fn identical_profile_reproduces_serial_allocation() {
        // a>b>c>d, c>a>b>d, a>c>d>b with f = (0,1,2), q = (1,2,1).
        let p = profile(&[&[0, 1, 2, 3], &[2, 0, 1, 3], &[0, 2, 3, 1]]);
        let ord = agent_order(&[0, 1, 2]);
        let q = Quota::new(vec![1, 2, 1]);
        let flat = build_identical_profile(&p, &ord, &q).unwrap();
        assert!(flat.is_identical());
        assert_eq!(flat.pref(AgentId(0)), &order(&[0, 2, 1, 3]));
        assert_eq!(
            run_serial(&p, &ord, &q).unwrap(),
            run_serial(&flat, &ord, &q).unwrap()
        );
    }

    #[test]
    fn identical_profile_orders_leftovers_by_index() {
        let p = profile(&[&[3, 2, 1, 0], &[0, 1, 2, 3]]);
        let ord = agent_order(&[0]);
        let q = Quota::new(vec![1]);
        let flat = build_identical_profile(&p, &ord, &q).unwrap();
        // Only object 3 is assigned; leftovers 0,1,2 follow in index order.
        assert_eq!(flat.pref(AgentId(0)), &order(&[3, 0, 1, 2]));
    }

    #[test]
    fn identical_profile_for_policy_follows_branch() {
        let policy = DictatorPolicy::new(AgentId(0), vec![AgentId(2), AgentId(1)])
            .with_rule(vec![set(&[0, 1])], AgentId(1));
        let q = Quota::new(vec![2, 1, 1]);
        // a>b>c>d, d>c>b>a, b>d>c>a: 0 takes {0,1}, rule serves 1 (takes 3),
        // then default serves 2 (takes 2).
        let p = profile(&[&[0, 1, 2, 3], &[3, 2, 1, 0], &[1, 3, 2, 0]]);
        let flat = build_identical_profile_seq(&p, &policy, &q).unwrap();
        assert_eq!(flat.pref(AgentId(0)), &order(&[0, 1, 3, 2]));
        assert_eq!(
            run_sequential(&p, &policy, &q).unwrap(),
            run_sequential(&flat, &policy, &q).unwrap()
        );
    }
}
