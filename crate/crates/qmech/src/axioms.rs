//! Brute-force witness searches over small universes.
//!
//! Every search enumerates candidates in one fixed canonical order and
//! returns the first witness, so results are deterministic and the witness
//! found is always the enumeration-least one. Searches whose candidate
//! space exceeds the budget refuse up front with an error; nothing is ever
//! silently truncated. Every witness carries enough context to be replayed
//! through the mechanism via its `verify` method.
//!
//! Canonical orders: profiles enumerate as odometers over per-agent
//! rankings (last agent fastest), rankings and relabelings enumerate
//! lexicographically, coalitions enumerate by size then lexicographically,
//! and alternative allocations enumerate as odometers over per-object
//! holders (last object fastest, unassigned before agent 0 before agent 1).

use std::cmp::Ordering;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mechanisms::{run_serial, AgentOrdering, Mechanism};
use crate::model::{AgentId, DetAllocation, ObjSet, ObjectId, ObjectPermutation, Quota};
use crate::prefs::{all_lex_orders, GeneralSetPref, LexOrder, LexProfile};
use crate::randomized::{ld_prefers_by, ordering_count, rsdq_counts_capped, DEFAULT_ENUMERATION_CAP};
use crate::rational::Rational;

/// Largest number of candidate evaluations a search accepts before refusing.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

/// How a profile-space search walks its candidates.
#[derive(Clone, Copy, Debug)]
pub enum SearchMode {
    /// Enumerate everything, refusing if the space exceeds `cap`.
    Exhaustive { cap: u64 },
    /// Check `trials` seeded random candidates.
    Sampled { trials: u64, seed: u64 },
}

impl Default for SearchMode {
    fn default() -> SearchMode {
        SearchMode::Exhaustive {
            cap: DEFAULT_SEARCH_CAP,
        }
    }
}

/// A search result: the first witness in canonical order, if any, plus the
/// number of candidates actually evaluated.
#[derive(Clone, Debug)]
pub struct SearchOutcome<W> {
    pub witness: Option<W>,
    pub evaluations: u64,
}

impl<W> SearchOutcome<W> {
    fn clean(evaluations: u64) -> SearchOutcome<W> {
        SearchOutcome {
            witness: None,
            evaluations,
        }
    }

    pub fn holds(&self) -> bool {
        self.witness.is_none()
    }
}

fn ensure_budget(required: u128, cap: u64) -> Result<()> {
    if required > cap as u128 {
        return Err(Error::BudgetExceeded { required, cap });
    }
    Ok(())
}

fn sat_mul(a: u128, b: u128) -> u128 {
    a.checked_mul(b).unwrap_or(u128::MAX)
}

fn sat_pow(base: u128, exp: usize) -> u128 {
    let mut acc = 1u128;
    for _ in 0..exp {
        acc = sat_mul(acc, base);
    }
    acc
}

pub fn factorial(m: usize) -> u128 {
    (1..=m as u128).fold(1u128, sat_mul)
}

/// Number of profiles on the `agents x objects` grid: `(m!)^n`.
pub fn profile_space(agents: usize, objects: usize) -> u128 {
    sat_pow(factorial(objects), agents)
}

/// Iterator over every profile of `agents` rankings of `objects`, in
/// canonical odometer order (last agent's ranking advances fastest).
pub struct LexProfiles {
    orders: Vec<LexOrder>,
    indices: Vec<usize>,
    done: bool,
}

impl LexProfiles {
    pub fn new(agents: usize, objects: usize) -> LexProfiles {
        LexProfiles {
            orders: all_lex_orders(objects),
            indices: vec![0; agents],
            done: agents == 0,
        }
    }
}

impl Iterator for LexProfiles {
    type Item = LexProfile;

    fn next(&mut self) -> Option<LexProfile> {
        if self.done {
            return None;
        }
        let profile = LexProfile::new(
            self.indices
                .iter()
                .map(|&i| self.orders[i].clone())
                .collect(),
        )
        .expect("orders share one universe");
        for slot in self.indices.iter_mut().rev() {
            *slot += 1;
            if *slot < self.orders.len() {
                return Some(profile);
            }
            *slot = 0;
        }
        self.done = true;
        Some(profile)
    }
}

pub(crate) fn random_order(rng: &mut impl Rng, objects: usize) -> LexOrder {
    let mut ranking: Vec<ObjectId> = (0..objects as u32).map(ObjectId).collect();
    ranking.shuffle(rng);
    LexOrder::new(ranking).expect("shuffled permutation")
}

pub(crate) fn random_profile(rng: &mut impl Rng, agents: usize, objects: usize) -> LexProfile {
    LexProfile::new((0..agents).map(|_| random_order(rng, objects)).collect())
        .expect("orders share one universe")
}

/// An agent that gains by lying: reporting `misreport` instead of its
/// ranking in `profile` moves its own bundle strictly up its true ranking.
#[derive(Clone, Debug)]
pub struct ManipulationWitness {
    pub profile: LexProfile,
    pub agent: AgentId,
    pub misreport: LexOrder,
    pub truthful_bundle: ObjSet,
    pub deviant_bundle: ObjSet,
}

impl ManipulationWitness {
    pub fn verify(&self, mech: &dyn Mechanism) -> Result<bool> {
        let honest = mech.allocate(&self.profile)?;
        let deviant =
            mech.allocate(&self.profile.with_pref(self.agent, self.misreport.clone()))?;
        Ok(honest.bundle(self.agent) == self.truthful_bundle
            && deviant.bundle(self.agent) == self.deviant_bundle
            && self
                .profile
                .pref(self.agent)
                .prefers(self.deviant_bundle, self.truthful_bundle)?)
    }
}

/// An agent whose lie leaves its own bundle untouched but changes someone
/// else's.
#[derive(Clone, Debug)]
pub struct BossinessWitness {
    pub profile: LexProfile,
    pub agent: AgentId,
    pub misreport: LexOrder,
    pub truthful: DetAllocation,
    pub deviant: DetAllocation,
}

impl BossinessWitness {
    pub fn verify(&self, mech: &dyn Mechanism) -> Result<bool> {
        let honest = mech.allocate(&self.profile)?;
        let deviant =
            mech.allocate(&self.profile.with_pref(self.agent, self.misreport.clone()))?;
        Ok(honest == self.truthful
            && deviant == self.deviant
            && honest.bundle(self.agent) == deviant.bundle(self.agent)
            && honest != deviant)
    }
}

/// A relabeling of objects that the mechanism fails to commute with.
#[derive(Clone, Debug)]
pub struct NeutralityWitness {
    pub profile: LexProfile,
    pub relabeling: ObjectPermutation,
    /// What the mechanism does on the relabeled profile.
    pub on_relabeled: DetAllocation,
    /// The relabeling applied to what the mechanism does on `profile`.
    pub relabeled_outcome: DetAllocation,
}

impl NeutralityWitness {
    pub fn verify(&self, mech: &dyn Mechanism) -> Result<bool> {
        let on_relabeled = mech.allocate(&self.profile.permute_objects(&self.relabeling))?;
        let relabeled_outcome = mech.allocate(&self.profile)?.permute_objects(&self.relabeling);
        Ok(on_relabeled == self.on_relabeled
            && relabeled_outcome == self.relabeled_outcome
            && on_relabeled != relabeled_outcome)
    }
}

/// An allocation of the same total size that every agent weakly prefers and
/// some agent strictly prefers.
#[derive(Clone, Debug)]
pub struct ParetoWitness {
    pub dominating: DetAllocation,
    pub strict_agent: AgentId,
}

/// Bundle preferences an efficiency check can run against.
pub enum ParetoPrefs<'a> {
    Lex(&'a LexProfile),
    General(&'a [GeneralSetPref]),
}

impl ParetoPrefs<'_> {
    pub fn agents(&self) -> usize {
        match self {
            ParetoPrefs::Lex(p) => p.agents(),
            ParetoPrefs::General(g) => g.len(),
        }
    }

    pub fn objects(&self) -> usize {
        match self {
            ParetoPrefs::Lex(p) => p.objects(),
            ParetoPrefs::General(g) => g.first().map_or(0, |p| p.num_objects()),
        }
    }

    pub fn compare(&self, agent: AgentId, a: ObjSet, b: ObjSet) -> Result<Ordering> {
        match self {
            ParetoPrefs::Lex(p) => p.pref(agent).compare_sets(a, b),
            ParetoPrefs::General(g) => g[agent.index()].compare_sets(a, b),
        }
    }
}

/// Searches for an allocation of the same total size that weakly improves
/// every agent and strictly improves one. `None` means `alloc` is efficient
/// at that size.
pub fn pareto_c_efficient(
    alloc: &DetAllocation,
    prefs: &ParetoPrefs,
) -> Result<SearchOutcome<ParetoWitness>> {
    pareto_c_efficient_capped(alloc, prefs, DEFAULT_SEARCH_CAP)
}

pub fn pareto_c_efficient_capped(
    alloc: &DetAllocation,
    prefs: &ParetoPrefs,
    cap: u64,
) -> Result<SearchOutcome<ParetoWitness>> {
    let n = prefs.agents();
    let m = prefs.objects();
    assert_eq!(alloc.agents(), n);
    let c = alloc.total_assigned();
    ensure_budget(sat_pow(n as u128 + 1, m), cap)?;
    // holders[o]: 0 = unassigned, i+1 = agent i. Odometer, last object fastest.
    let mut holders = vec![0usize; m];
    let mut evaluations = 0u64;
    loop {
        evaluations += 1;
        if holders.iter().filter(|&&h| h > 0).count() == c {
            let mut bundles = vec![ObjSet::EMPTY; n];
            for (o, &h) in holders.iter().enumerate() {
                if h > 0 {
                    bundles[h - 1].insert(ObjectId(o as u32));
                }
            }
            let mut strict: Option<AgentId> = None;
            let mut weak = true;
            for i in 0..n {
                let agent = AgentId(i as u32);
                match prefs.compare(agent, bundles[i], alloc.bundle(agent))? {
                    Ordering::Less => {
                        weak = false;
                        break;
                    }
                    Ordering::Greater => {
                        if strict.is_none() {
                            strict = Some(agent);
                        }
                    }
                    Ordering::Equal => {}
                }
            }
            if weak {
                if let Some(strict_agent) = strict {
                    let dominating = DetAllocation::from_bundles(bundles)
                        .expect("holder vectors induce disjoint bundles");
                    return Ok(SearchOutcome {
                        witness: Some(ParetoWitness {
                            dominating,
                            strict_agent,
                        }),
                        evaluations,
                    });
                }
            }
        }
        let mut advanced = false;
        for slot in holders.iter_mut().rev() {
            *slot += 1;
            if *slot <= n {
                advanced = true;
                break;
            }
            *slot = 0;
        }
        if !advanced {
            return Ok(SearchOutcome::clean(evaluations));
        }
    }
}

/// Searches one profile for a profitable unilateral lie. Agents ascend,
/// misreports enumerate lexicographically.
pub fn find_manipulation(
    mech: &dyn Mechanism,
    profile: &LexProfile,
) -> Result<SearchOutcome<ManipulationWitness>> {
    find_manipulation_capped(mech, profile, DEFAULT_SEARCH_CAP)
}

pub fn find_manipulation_capped(
    mech: &dyn Mechanism,
    profile: &LexProfile,
    cap: u64,
) -> Result<SearchOutcome<ManipulationWitness>> {
    let (n, m) = (profile.agents(), profile.objects());
    ensure_budget(sat_mul(n as u128, factorial(m)), cap)?;
    let truthful = mech.allocate(profile)?;
    let orders = all_lex_orders(m);
    let mut evaluations = 0u64;
    for i in 0..n {
        let agent = AgentId(i as u32);
        let pref = profile.pref(agent);
        for misreport in &orders {
            if misreport == pref {
                continue;
            }
            evaluations += 1;
            let deviant = mech.allocate(&profile.with_pref(agent, misreport.clone()))?;
            if pref.prefers(deviant.bundle(agent), truthful.bundle(agent))? {
                return Ok(SearchOutcome {
                    witness: Some(ManipulationWitness {
                        profile: profile.clone(),
                        agent,
                        misreport: misreport.clone(),
                        truthful_bundle: truthful.bundle(agent),
                        deviant_bundle: deviant.bundle(agent),
                    }),
                    evaluations,
                });
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// Searches one profile for a lie that keeps the liar's bundle but changes
/// the allocation elsewhere.
pub fn find_bossiness_at(
    mech: &dyn Mechanism,
    profile: &LexProfile,
) -> Result<SearchOutcome<BossinessWitness>> {
    let (n, m) = (profile.agents(), profile.objects());
    ensure_budget(sat_mul(n as u128, factorial(m)), DEFAULT_SEARCH_CAP)?;
    let truthful = mech.allocate(profile)?;
    let orders = all_lex_orders(m);
    let mut evaluations = 0u64;
    for i in 0..n {
        let agent = AgentId(i as u32);
        let pref = profile.pref(agent);
        for misreport in &orders {
            if misreport == pref {
                continue;
            }
            evaluations += 1;
            let deviant = mech.allocate(&profile.with_pref(agent, misreport.clone()))?;
            if deviant.bundle(agent) == truthful.bundle(agent) && deviant != truthful {
                return Ok(SearchOutcome {
                    witness: Some(BossinessWitness {
                        profile: profile.clone(),
                        agent,
                        misreport: misreport.clone(),
                        truthful,
                        deviant,
                    }),
                    evaluations,
                });
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// Joint outcome of the profile-grid scan for lies: the first profitable
/// lie and the first bundle-preserving-but-outcome-changing lie.
#[derive(Clone, Debug)]
pub struct UnilateralGridAudit {
    pub manipulation: Option<ManipulationWitness>,
    pub bossiness: Option<BossinessWitness>,
    pub evaluations: u64,
}

fn scan_unilateral(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    mode: SearchMode,
    want_manipulation: bool,
    want_bossiness: bool,
) -> Result<UnilateralGridAudit> {
    let mut audit = UnilateralGridAudit {
        manipulation: None,
        bossiness: None,
        evaluations: 0,
    };
    let consider = |profile: &LexProfile,
                    agent: AgentId,
                    misreport: &LexOrder,
                    truthful: &DetAllocation,
                    audit: &mut UnilateralGridAudit|
     -> Result<bool> {
        let pref = profile.pref(agent);
        if misreport == pref {
            return Ok(false);
        }
        audit.evaluations += 1;
        let deviant = mech.allocate(&profile.with_pref(agent, misreport.clone()))?;
        if want_manipulation
            && audit.manipulation.is_none()
            && pref.prefers(deviant.bundle(agent), truthful.bundle(agent))?
        {
            audit.manipulation = Some(ManipulationWitness {
                profile: profile.clone(),
                agent,
                misreport: misreport.clone(),
                truthful_bundle: truthful.bundle(agent),
                deviant_bundle: deviant.bundle(agent),
            });
        }
        if want_bossiness
            && audit.bossiness.is_none()
            && deviant.bundle(agent) == truthful.bundle(agent)
            && deviant != *truthful
        {
            audit.bossiness = Some(BossinessWitness {
                profile: profile.clone(),
                agent,
                misreport: misreport.clone(),
                truthful: truthful.clone(),
                deviant,
            });
        }
        let done_manip = !want_manipulation || audit.manipulation.is_some();
        let done_bossy = !want_bossiness || audit.bossiness.is_some();
        Ok(done_manip && done_bossy)
    };
    match mode {
        SearchMode::Exhaustive { cap } => {
            let deviations = sat_mul(
                profile_space(agents, objects),
                sat_mul(agents as u128, factorial(objects)),
            );
            ensure_budget(deviations, cap)?;
            let orders = all_lex_orders(objects);
            'profiles: for profile in LexProfiles::new(agents, objects) {
                let truthful = mech.allocate(&profile)?;
                for i in 0..agents {
                    let agent = AgentId(i as u32);
                    for misreport in &orders {
                        if consider(&profile, agent, misreport, &truthful, &mut audit)? {
                            break 'profiles;
                        }
                    }
                }
            }
        }
        SearchMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let profile = random_profile(&mut rng, agents, objects);
                let truthful = mech.allocate(&profile)?;
                let agent = AgentId(rng.gen_range(0..agents) as u32);
                let misreport = random_order(&mut rng, objects);
                if consider(&profile, agent, &misreport, &truthful, &mut audit)? {
                    break;
                }
            }
        }
    }
    Ok(audit)
}

/// Scans the whole profile grid for profitable lies and bossy lies in a
/// single pass.
pub fn audit_unilateral_grid(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    mode: SearchMode,
) -> Result<UnilateralGridAudit> {
    scan_unilateral(mech, agents, objects, mode, true, true)
}

/// First bossiness witness on the profile grid.
pub fn find_bossiness(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    mode: SearchMode,
) -> Result<SearchOutcome<BossinessWitness>> {
    let audit = scan_unilateral(mech, agents, objects, mode, false, true)?;
    Ok(SearchOutcome {
        witness: audit.bossiness,
        evaluations: audit.evaluations,
    })
}

/// First manipulation witness on the profile grid.
pub fn find_manipulation_grid(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    mode: SearchMode,
) -> Result<SearchOutcome<ManipulationWitness>> {
    let audit = scan_unilateral(mech, agents, objects, mode, true, false)?;
    Ok(SearchOutcome {
        witness: audit.manipulation,
        evaluations: audit.evaluations,
    })
}

/// Searches the grid for a profile and relabeling on which the mechanism
/// fails to commute with relabeling objects.
pub fn find_neutrality_violation(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    mode: SearchMode,
) -> Result<SearchOutcome<NeutralityWitness>> {
    let mut evaluations = 0u64;
    let mut consider = |profile: &LexProfile,
                        perm: &ObjectPermutation,
                        truthful: &DetAllocation|
     -> Result<Option<NeutralityWitness>> {
        evaluations += 1;
        let on_relabeled = mech.allocate(&profile.permute_objects(perm))?;
        let relabeled_outcome = truthful.permute_objects(perm);
        if on_relabeled != relabeled_outcome {
            return Ok(Some(NeutralityWitness {
                profile: profile.clone(),
                relabeling: perm.clone(),
                on_relabeled,
                relabeled_outcome,
            }));
        }
        Ok(None)
    };
    match mode {
        SearchMode::Exhaustive { cap } => {
            ensure_budget(
                sat_mul(profile_space(agents, objects), factorial(objects)),
                cap,
            )?;
            let perms: Vec<ObjectPermutation> = (0..objects as u32)
                .map(ObjectId)
                .permutations(objects)
                .map(|p| ObjectPermutation::new(p).expect("permutation"))
                .collect();
            for profile in LexProfiles::new(agents, objects) {
                let truthful = mech.allocate(&profile)?;
                for perm in &perms {
                    if let Some(w) = consider(&profile, perm, &truthful)? {
                        return Ok(SearchOutcome {
                            witness: Some(w),
                            evaluations,
                        });
                    }
                }
            }
        }
        SearchMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let profile = random_profile(&mut rng, agents, objects);
                let truthful = mech.allocate(&profile)?;
                let perm = ObjectPermutation::new(random_order(&mut rng, objects).ranking().to_vec())
                    .expect("permutation");
                if let Some(w) = consider(&profile, &perm, &truthful)? {
                    return Ok(SearchOutcome {
                        witness: Some(w),
                        evaluations,
                    });
                }
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// Checks one profile against every relabeling of its objects.
pub fn find_neutrality_violation_at(
    mech: &dyn Mechanism,
    profile: &LexProfile,
) -> Result<SearchOutcome<NeutralityWitness>> {
    let m = profile.objects();
    ensure_budget(factorial(m), DEFAULT_SEARCH_CAP)?;
    let truthful = mech.allocate(profile)?;
    let mut evaluations = 0u64;
    for perm in (0..m as u32).map(ObjectId).permutations(m) {
        let perm = ObjectPermutation::new(perm).expect("permutation");
        evaluations += 1;
        let on_relabeled = mech.allocate(&profile.permute_objects(&perm))?;
        let relabeled_outcome = truthful.permute_objects(&perm);
        if on_relabeled != relabeled_outcome {
            return Ok(SearchOutcome {
                witness: Some(NeutralityWitness {
                    profile: profile.clone(),
                    relabeling: perm,
                    on_relabeled,
                    relabeled_outcome,
                }),
                evaluations,
            });
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// A coalition whose joint lie weakly improves every member and strictly
/// improves one.
#[derive(Clone, Debug)]
pub struct GroupManipulationWitness {
    pub profile: LexProfile,
    pub coalition: Vec<AgentId>,
    pub misreports: Vec<LexOrder>,
    pub truthful: DetAllocation,
    pub deviant: DetAllocation,
    pub strict_agent: AgentId,
}

impl GroupManipulationWitness {
    pub fn verify(&self, mech: &dyn Mechanism) -> Result<bool> {
        let truthful = mech.allocate(&self.profile)?;
        let mut lying = self.profile.clone();
        for (&agent, misreport) in self.coalition.iter().zip(&self.misreports) {
            lying = lying.with_pref(agent, misreport.clone());
        }
        let deviant = mech.allocate(&lying)?;
        if truthful != self.truthful || deviant != self.deviant {
            return Ok(false);
        }
        let mut strict_seen = false;
        for &agent in &self.coalition {
            match self
                .profile
                .pref(agent)
                .compare_sets(deviant.bundle(agent), truthful.bundle(agent))?
            {
                Ordering::Less => return Ok(false),
                Ordering::Greater => strict_seen = true,
                Ordering::Equal => {}
            }
        }
        Ok(strict_seen && self.coalition.contains(&self.strict_agent))
    }
}

/// Searches one profile for a profitable joint lie by any coalition of at
/// most `max_coalition` agents. Coalitions ascend by size then
/// lexicographically; joint misreports enumerate as odometers (last member
/// fastest).
pub fn find_group_manipulation(
    mech: &dyn Mechanism,
    profile: &LexProfile,
    max_coalition: usize,
) -> Result<SearchOutcome<GroupManipulationWitness>> {
    find_group_manipulation_capped(mech, profile, max_coalition, DEFAULT_SEARCH_CAP)
}

pub fn find_group_manipulation_capped(
    mech: &dyn Mechanism,
    profile: &LexProfile,
    max_coalition: usize,
    cap: u64,
) -> Result<SearchOutcome<GroupManipulationWitness>> {
    let (n, m) = (profile.agents(), profile.objects());
    let max_size = max_coalition.min(n);
    let mut required = 0u128;
    for size in 1..=max_size {
        required = required.saturating_add(sat_mul(
            binomial(n, size),
            sat_pow(factorial(m), size),
        ));
    }
    ensure_budget(required, cap)?;
    let truthful = mech.allocate(profile)?;
    let orders = all_lex_orders(m);
    let mut evaluations = 0u64;
    for size in 1..=max_size {
        for coalition_idx in (0..n).combinations(size) {
            let coalition: Vec<AgentId> = coalition_idx.iter().map(|&i| AgentId(i as u32)).collect();
            let truth_idx: Vec<usize> = coalition
                .iter()
                .map(|&a| {
                    orders
                        .iter()
                        .position(|o| o == profile.pref(a))
                        .expect("profile rankings are complete orders")
                })
                .collect();
            let mut report_idx = vec![0usize; size];
            loop {
                if report_idx != truth_idx {
                    evaluations += 1;
                    let mut lying = profile.clone();
                    for (&agent, &ri) in coalition.iter().zip(&report_idx) {
                        lying = lying.with_pref(agent, orders[ri].clone());
                    }
                    let deviant = mech.allocate(&lying)?;
                    let mut strict: Option<AgentId> = None;
                    let mut weak = true;
                    for &agent in &coalition {
                        match profile
                            .pref(agent)
                            .compare_sets(deviant.bundle(agent), truthful.bundle(agent))?
                        {
                            Ordering::Less => {
                                weak = false;
                                break;
                            }
                            Ordering::Greater => {
                                if strict.is_none() {
                                    strict = Some(agent);
                                }
                            }
                            Ordering::Equal => {}
                        }
                    }
                    if weak {
                        if let Some(strict_agent) = strict {
                            return Ok(SearchOutcome {
                                witness: Some(GroupManipulationWitness {
                                    profile: profile.clone(),
                                    coalition,
                                    misreports: report_idx
                                        .iter()
                                        .map(|&ri| orders[ri].clone())
                                        .collect(),
                                    truthful,
                                    deviant,
                                    strict_agent,
                                }),
                                evaluations,
                            });
                        }
                    }
                }
                let mut advanced = false;
                for slot in report_idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < orders.len() {
                        advanced = true;
                        break;
                    }
                    *slot = 0;
                }
                if !advanced {
                    break;
                }
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// A coalition that lies jointly and then redistributes the objects it
/// received among its members, leaving every member weakly better off than
/// under truth and one member strictly better off.
#[derive(Clone, Debug)]
pub struct ReallocationWitness {
    pub profile: LexProfile,
    pub coalition: Vec<AgentId>,
    pub misreports: Vec<LexOrder>,
    pub truthful: DetAllocation,
    /// What the mechanism hands the coalition under the joint lie.
    pub deviant: DetAllocation,
    /// Final bundles after redistribution, parallel to `coalition`.
    pub final_bundles: Vec<ObjSet>,
    pub strict_agent: AgentId,
}

impl ReallocationWitness {
    pub fn verify(&self, mech: &dyn Mechanism) -> Result<bool> {
        let truthful = mech.allocate(&self.profile)?;
        let mut lying = self.profile.clone();
        for (&agent, misreport) in self.coalition.iter().zip(&self.misreports) {
            lying = lying.with_pref(agent, misreport.clone());
        }
        let deviant = mech.allocate(&lying)?;
        if truthful != self.truthful || deviant != self.deviant {
            return Ok(false);
        }
        // The redistribution must be a partition of the coalition's pool.
        let pool = self
            .coalition
            .iter()
            .fold(ObjSet::EMPTY, |acc, &a| acc.union(deviant.bundle(a)));
        let mut seen = ObjSet::EMPTY;
        for &b in &self.final_bundles {
            if !b.is_disjoint(seen) || !b.is_subset(pool) {
                return Ok(false);
            }
            seen = seen.union(b);
        }
        if seen != pool {
            return Ok(false);
        }
        let mut strict_seen = false;
        for (&agent, &bundle) in self.coalition.iter().zip(&self.final_bundles) {
            match self
                .profile
                .pref(agent)
                .compare_sets(bundle, truthful.bundle(agent))?
            {
                Ordering::Less => return Ok(false),
                Ordering::Greater => strict_seen = true,
                Ordering::Equal => {}
            }
        }
        Ok(strict_seen && self.coalition.contains(&self.strict_agent))
    }
}

/// Searches one profile for a joint lie plus an internal redistribution of
/// the coalition's pooled objects that beats truth-telling. Redistribution
/// candidates enumerate as odometers over pool objects in ascending index
/// order (last object fastest, members in coalition order). Truthful joint
/// reports are allowed here: pooling alone can already help.
pub fn find_reallocation(
    mech: &dyn Mechanism,
    profile: &LexProfile,
    max_coalition: usize,
) -> Result<SearchOutcome<ReallocationWitness>> {
    find_reallocation_capped(mech, profile, max_coalition, DEFAULT_SEARCH_CAP)
}

pub fn find_reallocation_capped(
    mech: &dyn Mechanism,
    profile: &LexProfile,
    max_coalition: usize,
    cap: u64,
) -> Result<SearchOutcome<ReallocationWitness>> {
    let (n, m) = (profile.agents(), profile.objects());
    let max_size = max_coalition.min(n);
    let mut required = 0u128;
    for size in 1..=max_size {
        required = required.saturating_add(sat_mul(
            sat_mul(binomial(n, size), sat_pow(factorial(m), size)),
            sat_pow(size as u128, m),
        ));
    }
    ensure_budget(required, cap)?;
    let truthful = mech.allocate(profile)?;
    let orders = all_lex_orders(m);
    let mut evaluations = 0u64;
    for size in 1..=max_size {
        for coalition_idx in (0..n).combinations(size) {
            let coalition: Vec<AgentId> = coalition_idx.iter().map(|&i| AgentId(i as u32)).collect();
            let mut report_idx = vec![0usize; size];
            loop {
                let mut lying = profile.clone();
                for (&agent, &ri) in coalition.iter().zip(&report_idx) {
                    lying = lying.with_pref(agent, orders[ri].clone());
                }
                let deviant = mech.allocate(&lying)?;
                let pool: Vec<ObjectId> = coalition
                    .iter()
                    .fold(ObjSet::EMPTY, |acc, &a| acc.union(deviant.bundle(a)))
                    .iter()
                    .collect();
                // holder[o] indexes into the coalition; odometer, last pool
                // object fastest.
                let mut holder = vec![0usize; pool.len()];
                loop {
                    evaluations += 1;
                    let mut finals = vec![ObjSet::EMPTY; size];
                    for (&obj, &h) in pool.iter().zip(&holder) {
                        finals[h].insert(obj);
                    }
                    let mut strict: Option<AgentId> = None;
                    let mut weak = true;
                    for (idx, &agent) in coalition.iter().enumerate() {
                        match profile
                            .pref(agent)
                            .compare_sets(finals[idx], truthful.bundle(agent))?
                        {
                            Ordering::Less => {
                                weak = false;
                                break;
                            }
                            Ordering::Greater => {
                                if strict.is_none() {
                                    strict = Some(agent);
                                }
                            }
                            Ordering::Equal => {}
                        }
                    }
                    if weak {
                        if let Some(strict_agent) = strict {
                            return Ok(SearchOutcome {
                                witness: Some(ReallocationWitness {
                                    profile: profile.clone(),
                                    coalition,
                                    misreports: report_idx
                                        .iter()
                                        .map(|&ri| orders[ri].clone())
                                        .collect(),
                                    truthful,
                                    deviant,
                                    final_bundles: finals,
                                    strict_agent,
                                }),
                                evaluations,
                            });
                        }
                    }
                    let mut advanced = false;
                    for slot in holder.iter_mut().rev() {
                        *slot += 1;
                        if *slot < size {
                            advanced = true;
                            break;
                        }
                        *slot = 0;
                    }
                    if !advanced {
                        break;
                    }
                }
                let mut advanced = false;
                for slot in report_idx.iter_mut().rev() {
                    *slot += 1;
                    if *slot < orders.len() {
                        advanced = true;
                        break;
                    }
                    *slot = 0;
                }
                if !advanced {
                    break;
                }
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc = 1u128;
    for i in 0..k {
        acc = sat_mul(acc, (n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// An agent whose lie moves its whole lottery row strictly up in the
/// downward-lexicographic order.
#[derive(Clone, Debug)]
pub struct RandManipulationWitness {
    pub profile: LexProfile,
    pub quota: Quota,
    pub agent: AgentId,
    pub misreport: LexOrder,
    pub truthful_row: Vec<Rational>,
    pub deviant_row: Vec<Rational>,
}

/// Searches one profile for a lie that improves an agent's exact lottery
/// row under the uniform-ordering lottery.
pub fn find_rand_manipulation(
    profile: &LexProfile,
    quota: &Quota,
) -> Result<SearchOutcome<RandManipulationWitness>> {
    find_rand_manipulation_capped(profile, quota, DEFAULT_ENUMERATION_CAP)
}

pub fn find_rand_manipulation_capped(
    profile: &LexProfile,
    quota: &Quota,
    cap: u64,
) -> Result<SearchOutcome<RandManipulationWitness>> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    ensure_budget(
        sat_mul(
            sat_mul(n as u128, factorial(m)),
            ordering_count(n, quota.positions()),
        ),
        cap,
    )?;
    let truth = rsdq_counts_capped(profile, quota, cap)?;
    let orders = all_lex_orders(m);
    let mut evaluations = 0u64;
    for i in 0..n {
        let agent = AgentId(i as u32);
        let pref = profile.pref(agent);
        for misreport in &orders {
            if misreport == pref {
                continue;
            }
            evaluations += 1;
            let deviant = rsdq_counts_capped(&profile.with_pref(agent, misreport.clone()), quota, cap)?;
            // Same denominator on both sides, so counts compare directly.
            if ld_prefers_by(pref, &deviant.counts[i], &truth.counts[i]) == Ordering::Greater {
                let to_rows = |counts: &[u64]| {
                    counts
                        .iter()
                        .map(|&c| Rational::from_count(c, truth.orderings))
                        .collect()
                };
                return Ok(SearchOutcome {
                    witness: Some(RandManipulationWitness {
                        profile: profile.clone(),
                        quota: quota.clone(),
                        agent,
                        misreport: misreport.clone(),
                        truthful_row: to_rows(&truth.counts[i]),
                        deviant_row: to_rows(&deviant.counts[i]),
                    }),
                    evaluations,
                });
            }
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}

/// Probes a mechanism with the identical identity-ranking profile and, when
/// the outcome partitions the first `C` objects into consecutive blocks of
/// sizes exactly `quota`, returns the block holders in positional order.
/// `None` means the probe outcome is inconsistent with any serial
/// dictatorship under `quota`.
pub fn infer_serial_structure(
    mech: &dyn Mechanism,
    agents: usize,
    objects: usize,
    quota: &Quota,
) -> Result<Option<AgentOrdering>> {
    quota.validate(agents, objects)?;
    let probe = LexProfile::identical(agents, LexOrder::identity(objects));
    let alloc = mech.allocate(&probe)?;
    let mut ordering: Vec<AgentId> = Vec::with_capacity(quota.positions());
    let mut start = 0u32;
    for &size in quota.sizes() {
        let block: ObjSet = (start..start + size as u32).map(ObjectId).collect();
        let holder = (0..agents)
            .map(|i| AgentId(i as u32))
            .find(|&a| alloc.bundle(a) == block);
        match holder {
            Some(a) => ordering.push(a),
            None => return Ok(None),
        }
        start += size as u32;
    }
    for i in 0..agents {
        let a = AgentId(i as u32);
        if !ordering.contains(&a) && !alloc.bundle(a).is_empty() {
            return Ok(None);
        }
    }
    Ok(Some(AgentOrdering::new(ordering).expect(
        "distinct nonempty blocks have distinct holders",
    )))
}

/// A profile on which a mechanism disagrees with a serial dictatorship.
#[derive(Clone, Debug)]
pub struct SerialEquivalenceFailure {
    pub profile: LexProfile,
    pub mechanism_allocation: DetAllocation,
    pub serial_allocation: DetAllocation,
}

/// Exhaustively compares a mechanism against the serial dictatorship
/// `(order, quota)` on every profile of the grid.
pub fn verify_serial_equivalence(
    mech: &dyn Mechanism,
    order: &AgentOrdering,
    quota: &Quota,
    agents: usize,
    objects: usize,
    cap: u64,
) -> Result<SearchOutcome<SerialEquivalenceFailure>> {
    quota.validate(agents, objects)?;
    order.validate(agents, quota.positions())?;
    ensure_budget(profile_space(agents, objects), cap)?;
    let mut evaluations = 0u64;
    for profile in LexProfiles::new(agents, objects) {
        evaluations += 1;
        let mech_alloc = mech.allocate(&profile)?;
        let serial_alloc = run_serial(&profile, order, quota)?;
        if mech_alloc != serial_alloc {
            return Ok(SearchOutcome {
                witness: Some(SerialEquivalenceFailure {
                    profile,
                    mechanism_allocation: mech_alloc,
                    serial_allocation: serial_alloc,
                }),
                evaluations,
            });
        }
    }
    Ok(SearchOutcome::clean(evaluations))
}
