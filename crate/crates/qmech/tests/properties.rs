//! Structural properties checked exhaustively on small grids and on
//! randomized inputs. These complement the golden-value acceptance tests:
//! nothing here pins a specific number, everything pins a relationship.

use proptest::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use qmech::axioms::{
    audit_unilateral_grid, find_bossiness_at, find_group_manipulation, find_manipulation,
    find_rand_manipulation, pareto_c_efficient, verify_serial_equivalence, LexProfiles,
    ParetoPrefs, SearchMode, DEFAULT_SEARCH_CAP,
};
use qmech::mechanisms::{
    build_identical_profile, run_interleaving, run_sequential, run_serial, AgentOrdering,
    DictatorPolicy, MechanismSpec,
};
use qmech::model::{
    AgentId, DetAllocation, ObjSet, ObjectId, ObjectPermutation, PickingSequence, Quota,
};
use qmech::prefs::{LexOrder, LexProfile};
use qmech::randomized::{ld_dominates, ld_prefers, rsdq_counts, rsdq_exact, sd_dominates};
use qmech::rational::Rational;
use std::cmp::Ordering;

// ---------------------------------------------------------------- helpers

fn all_quotas(agents: usize, objects: usize) -> Vec<Quota> {
    fn extend(prefix: &mut Vec<usize>, left: usize, positions_left: usize, out: &mut Vec<Quota>) {
        if !prefix.is_empty() {
            out.push(Quota::new(prefix.clone()));
        }
        if positions_left == 0 {
            return;
        }
        for next in 1..=left {
            prefix.push(next);
            extend(prefix, left - next, positions_left - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), objects, agents, &mut out);
    out
}

fn all_orderings(agents: usize, positions: usize) -> Vec<AgentOrdering> {
    fn extend(
        prefix: &mut Vec<AgentId>,
        agents: usize,
        positions: usize,
        out: &mut Vec<Vec<AgentId>>,
    ) {
        if prefix.len() == positions {
            out.push(prefix.clone());
            return;
        }
        for i in 0..agents as u32 {
            if !prefix.contains(&AgentId(i)) {
                prefix.push(AgentId(i));
                extend(prefix, agents, positions, out);
                prefix.pop();
            }
        }
    }
    let mut raw = Vec::new();
    extend(&mut Vec::new(), agents, positions, &mut raw);
    raw.into_iter()
        .map(|v| AgentOrdering::new(v).unwrap())
        .collect()
}

fn serial_grid(agents: usize, objects: usize) -> Vec<(AgentOrdering, Quota)> {
    let mut out = Vec::new();
    for quota in all_quotas(agents, objects) {
        for order in all_orderings(agents, quota.positions()) {
            out.push((order, quota.clone()));
        }
    }
    out
}

fn check_parallel<T: Sync>(
    items: &[T],
    check: impl Fn(&T) -> Option<String> + Sync,
) -> Vec<String> {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
        .min(items.len().max(1));
    let failures = Mutex::new(Vec::new());
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, AtomicOrdering::Relaxed);
                if i >= items.len() {
                    break;
                }
                if let Some(msg) = check(&items[i]) {
                    failures.lock().unwrap().push(msg);
                }
            });
        }
    });
    failures.into_inner().unwrap()
}

/// Deterministic entropy pool for building structured random values from a
/// flat proptest-generated `Vec<u64>`.
struct Entropy {
    pool: Vec<u64>,
    i: usize,
}

impl Entropy {
    fn new(pool: Vec<u64>) -> Entropy {
        Entropy { pool, i: 0 }
    }

    fn next(&mut self) -> u64 {
        let v = self.pool[self.i % self.pool.len()];
        self.i += 1;
        v.wrapping_add((self.i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn below(&mut self, bound: usize) -> usize {
        (self.next() % bound.max(1) as u64) as usize
    }

    fn perm(&mut self, m: usize) -> LexOrder {
        let mut remaining: Vec<ObjectId> = (0..m as u32).map(ObjectId).collect();
        let mut ranking = Vec::with_capacity(m);
        while !remaining.is_empty() {
            ranking.push(remaining.remove(self.below(remaining.len())));
        }
        LexOrder::new(ranking).unwrap()
    }

    fn profile(&mut self, n: usize, m: usize) -> LexProfile {
        LexProfile::new((0..n).map(|_| self.perm(m)).collect()).unwrap()
    }

    fn object_perm(&mut self, m: usize) -> ObjectPermutation {
        ObjectPermutation::new(self.perm(m).ranking().to_vec()).unwrap()
    }

    fn quota(&mut self, n: usize, m: usize) -> Quota {
        let positions = 1 + self.below(n.min(m));
        let mut sizes = vec![1usize; positions];
        let mut spare = m - positions;
        for size in sizes.iter_mut() {
            let extra = self.below(spare + 1);
            *size += extra;
            spare -= extra;
        }
        Quota::new(sizes)
    }

    fn ordering(&mut self, n: usize, positions: usize) -> AgentOrdering {
        let mut remaining: Vec<AgentId> = (0..n as u32).map(AgentId).collect();
        let mut agents = Vec::with_capacity(positions);
        for _ in 0..positions {
            agents.push(remaining.remove(self.below(remaining.len())));
        }
        AgentOrdering::new(agents).unwrap()
    }

    /// A probability matrix with column masses at most one.
    fn matrix(&mut self, n: usize, m: usize, denom: u64) -> Vec<Vec<Rational>> {
        let per_cell = (denom as usize / n) + 1;
        (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| Rational::from_count(self.below(per_cell) as u64, denom))
                    .collect()
            })
            .collect()
    }
}

/// Independent weak preference between rows: every top-k prefix of `a`
/// carries at least the mass it carries under `b`.
fn sd_weakly_prefers(pref: &LexOrder, a: &[Rational], b: &[Rational]) -> bool {
    let mut mass_a = Rational::zero();
    let mut mass_b = Rational::zero();
    for o in pref.ranking() {
        mass_a += &a[o.index()];
        mass_b += &b[o.index()];
        if mass_a < mass_b {
            return false;
        }
    }
    true
}

/// Each agent's picks form one consecutive block of turns.
fn turns_are_contiguous(turns: &[AgentId]) -> bool {
    let mut seen: Vec<AgentId> = Vec::new();
    let mut prev: Option<AgentId> = None;
    for &t in turns {
        if prev != Some(t) {
            if seen.contains(&t) {
                return false;
            }
            seen.push(t);
        }
        prev = Some(t);
    }
    true
}

// ---------------------------------------------- exhaustive grid properties

#[test]
fn contiguous_sequences_are_serial_interleaved_ones_are_not() {
    let m = 3usize;
    for n in 1..=3usize {
        for len in 1..=m {
            let mut turn_vectors = vec![Vec::new()];
            for _ in 0..len {
                turn_vectors = turn_vectors
                    .into_iter()
                    .flat_map(|v: Vec<AgentId>| {
                        (0..n as u32).map(move |a| {
                            let mut next = v.clone();
                            next.push(AgentId(a));
                            next
                        })
                    })
                    .collect();
            }
            for turns in turn_vectors {
                let sequence = PickingSequence::new(turns.clone());
                let contiguous = turns_are_contiguous(&turns);
                assert_eq!(
                    sequence.is_interleaving(),
                    !contiguous,
                    "turns {turns:?}"
                );
                if !contiguous {
                    continue;
                }
                // Blocks give the serving order and the quota directly.
                let mut order = Vec::new();
                let mut sizes = Vec::new();
                for &t in &turns {
                    if order.last() == Some(&t) {
                        *sizes.last_mut().unwrap() += 1;
                    } else {
                        order.push(t);
                        sizes.push(1);
                    }
                }
                let order = AgentOrdering::new(order).unwrap();
                let quota = Quota::new(sizes);
                for profile in LexProfiles::new(n, m) {
                    assert_eq!(
                        run_interleaving(&profile, &sequence).unwrap(),
                        run_serial(&profile, &order, &quota).unwrap(),
                        "turns {turns:?} profile {profile:?}"
                    );
                }
            }
        }
    }
    // No serial mechanism reproduces an interleaved sequence on the full
    // two-agent grid.
    for turns in [[0u32, 1, 0], [1, 0, 1]] {
        let turns: Vec<AgentId> = turns.iter().map(|&a| AgentId(a)).collect();
        let spec = MechanismSpec::Interleaving {
            sequence: PickingSequence::new(turns),
        };
        for (order, quota) in serial_grid(2, m) {
            if quota.total() != m {
                continue;
            }
            let outcome =
                verify_serial_equivalence(&spec, &order, &quota, 2, m, DEFAULT_SEARCH_CAP)
                    .unwrap();
            assert!(outcome.witness.is_some(), "{order:?} {quota:?}");
        }
    }
}

#[test]
fn identical_profile_reconstruction_holds_on_grids() {
    for (n, m) in [(1usize, 3usize), (2, 3), (3, 3), (2, 4)] {
        for (order, quota) in serial_grid(n, m) {
            for profile in LexProfiles::new(n, m) {
                let constructed = build_identical_profile(&profile, &order, &quota).unwrap();
                for i in 1..n as u32 {
                    assert_eq!(constructed.pref(AgentId(i)), constructed.pref(AgentId(0)));
                }
                assert_eq!(
                    run_serial(&constructed, &order, &quota).unwrap(),
                    run_serial(&profile, &order, &quota).unwrap(),
                    "order {order:?} quota {quota:?} profile {profile:?}"
                );
            }
        }
    }
}

#[test]
fn constant_policy_collapses_to_serial() {
    for n in 1..=3usize {
        let m = 3usize;
        for (order, quota) in serial_grid(n, m) {
            let policy = DictatorPolicy::constant(&order);
            for profile in LexProfiles::new(n, m) {
                assert_eq!(
                    run_sequential(&profile, &policy, &quota).unwrap(),
                    run_serial(&profile, &order, &quota).unwrap()
                );
            }
        }
    }
}

#[test]
fn imposed_outcomes_resist_lies_but_waste_value() {
    let bundles = vec![ObjSet::singleton(ObjectId(1)), ObjSet::singleton(ObjectId(2))];
    let alloc = DetAllocation::from_bundles(bundles).unwrap();
    let spec = MechanismSpec::Imposed {
        allocation: alloc.clone(),
    };
    let audit = audit_unilateral_grid(&spec, 2, 3, SearchMode::default()).unwrap();
    assert!(audit.manipulation.is_none());
    assert!(audit.bossiness.is_none());

    let mut dominated_somewhere = false;
    for profile in LexProfiles::new(2, 3) {
        let group = find_group_manipulation(&spec, &profile, 2).unwrap();
        assert!(group.holds(), "fixed outcomes cannot be gamed");
        let pareto = pareto_c_efficient(&alloc, &ParetoPrefs::Lex(&profile)).unwrap();
        if pareto.witness.is_some() {
            dominated_somewhere = true;
        }
    }
    assert!(dominated_somewhere, "ignoring reports must cost efficiency");
}

/// Independent efficiency oracle: recursive bundle assignment with
/// pruning, no shared code with the library's holder-vector search.
fn oracle_finds_improvement(alloc: &DetAllocation, profile: &LexProfile) -> bool {
    let n = profile.agents();
    let m = profile.objects();
    let target = alloc.total_assigned();
    let subsets: Vec<ObjSet> = ObjSet::all_subsets(m).collect();

    fn rec(
        agent: usize,
        used: ObjSet,
        assigned: usize,
        strict: bool,
        n: usize,
        target: usize,
        subsets: &[ObjSet],
        alloc: &DetAllocation,
        profile: &LexProfile,
    ) -> bool {
        if agent == n {
            return assigned == target && strict;
        }
        let id = AgentId(agent as u32);
        let current = alloc.bundle(id);
        for &candidate in subsets {
            if !candidate.is_disjoint(used) || assigned + candidate.len() > target {
                continue;
            }
            let cmp = profile.pref(id).compare_sets(candidate, current).unwrap();
            if cmp == Ordering::Less {
                continue;
            }
            if rec(
                agent + 1,
                used.union(candidate),
                assigned + candidate.len(),
                strict || cmp == Ordering::Greater,
                n,
                target,
                subsets,
                alloc,
                profile,
            ) {
                return true;
            }
        }
        false
    }

    rec(0, ObjSet::EMPTY, 0, false, n, target, &subsets, alloc, profile)
}

#[test]
fn efficiency_search_matches_independent_oracle() {
    for n in 2..=3usize {
        let m = 3usize;
        // Every holder vector yields an allocation (0 = unassigned).
        let mut allocations = Vec::new();
        let mut holders = vec![0usize; m];
        loop {
            let mut bundles = vec![ObjSet::EMPTY; n];
            for (o, &h) in holders.iter().enumerate() {
                if h > 0 {
                    bundles[h - 1].insert(ObjectId(o as u32));
                }
            }
            allocations.push(DetAllocation::from_bundles(bundles).unwrap());
            let mut slot = m;
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                holders[slot] += 1;
                if holders[slot] <= n {
                    break;
                }
                holders[slot] = 0;
            }
            if holders.iter().all(|&h| h == 0) {
                break;
            }
        }
        for profile in LexProfiles::new(n, m) {
            for alloc in &allocations {
                let search = pareto_c_efficient(alloc, &ParetoPrefs::Lex(&profile)).unwrap();
                let oracle = oracle_finds_improvement(alloc, &profile);
                assert_eq!(
                    search.witness.is_some(),
                    oracle,
                    "alloc {alloc:?} profile {profile:?}"
                );
            }
        }
    }
}

#[test]
fn lottery_support_outcomes_are_all_efficient() {
    for n in 2..=3usize {
        let m = 3usize;
        for quota in all_quotas(n, m) {
            for profile in LexProfiles::new(n, m) {
                let (_, support) = rsdq_exact(&profile, &quota).unwrap();
                for entry in support.entries() {
                    let outcome =
                        pareto_c_efficient(&entry.allocation, &ParetoPrefs::Lex(&profile))
                            .unwrap();
                    assert!(
                        outcome.holds(),
                        "quota {quota:?} ordering {:?} profile {profile:?}",
                        entry.ordering
                    );
                }
            }
        }
    }
}

#[test]
fn lottery_rows_share_the_total_mass_equally() {
    let mut combos = Vec::new();
    for n in 2..=3usize {
        for m in 3..=4usize {
            for quota in all_quotas(n, m) {
                combos.push((n, m, quota));
            }
        }
    }
    let failures = check_parallel(&combos, |(n, m, quota)| {
        for profile in LexProfiles::new(*n, *m) {
            let counts = rsdq_counts(&profile, quota).unwrap();
            let expected = quota.total() as u64 * counts.orderings / *n as u64;
            for (a, row) in counts.counts.iter().enumerate() {
                let total: u64 = row.iter().sum();
                if total != expected {
                    return Some(format!(
                        "agent {a} holds {total}/{} of the mass, expected {expected} \
                         (n={n} m={m} quota={quota:?} profile {profile:?})",
                        counts.orderings
                    ));
                }
            }
        }
        None
    });
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn lottery_truthtelling_is_optimal_on_grids() {
    let mut combos = Vec::new();
    for n in 2..=3usize {
        for m in 3..=4usize {
            for quota in all_quotas(n, m) {
                combos.push((n, m, quota));
            }
        }
    }
    let failures = check_parallel(&combos, |(n, m, quota)| {
        for profile in LexProfiles::new(*n, *m) {
            let outcome = find_rand_manipulation(&profile, quota).unwrap();
            if let Some(w) = outcome.witness {
                return Some(format!(
                    "agent {:?} gains by reporting {:?} (n={n} m={m} quota={quota:?} profile {profile:?})",
                    w.agent, w.misreport
                ));
            }
        }
        None
    });
    assert!(failures.is_empty(), "{failures:?}");
}

// ------------------------------------------------- randomized properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutations_round_trip(pool in prop::collection::vec(any::<u64>(), 32),
                               n in 1..=3usize, m in 2..=4usize) {
        let mut e = Entropy::new(pool);
        let perm = e.object_perm(m);
        let inverse = perm.inverse();

        let profile = e.profile(n, m);
        prop_assert_eq!(
            profile.permute_objects(&perm).permute_objects(&inverse),
            profile.clone()
        );

        let quota = e.quota(n, m);
        let order = e.ordering(n, quota.positions());
        let alloc = run_serial(&profile, &order, &quota).unwrap();
        prop_assert_eq!(
            alloc.permute_objects(&perm).permute_objects(&inverse),
            alloc
        );

        let matrix = qmech::matrix::RandAllocation::new(e.matrix(n, m, 12)).unwrap();
        prop_assert_eq!(
            matrix.permute_objects(&perm).permute_objects(&inverse),
            matrix
        );
    }

    #[test]
    fn serial_runs_commute_with_relabeling(pool in prop::collection::vec(any::<u64>(), 32),
                                           n in 1..=3usize, m in 2..=4usize) {
        let mut e = Entropy::new(pool);
        let perm = e.object_perm(m);
        let profile = e.profile(n, m);
        let quota = e.quota(n, m);
        let order = e.ordering(n, quota.positions());
        let direct = run_serial(&profile.permute_objects(&perm), &order, &quota).unwrap();
        let lifted = run_serial(&profile, &order, &quota).unwrap().permute_objects(&perm);
        prop_assert_eq!(direct, lifted);
    }

    #[test]
    fn prefix_dominance_implies_downward_dominance(
        pool in prop::collection::vec(any::<u64>(), 64),
        n in 2..=3usize, m in 2..=4usize,
    ) {
        let mut e = Entropy::new(pool);
        let profile = e.profile(n, m);
        let a = qmech::matrix::RandAllocation::new(e.matrix(n, m, 12)).unwrap();
        let b = qmech::matrix::RandAllocation::new(e.matrix(n, m, 12)).unwrap();
        for i in 0..n as u32 {
            let agent = AgentId(i);
            if sd_weakly_prefers(profile.pref(agent), a.row(agent), b.row(agent)) {
                prop_assert_ne!(
                    ld_prefers(profile.pref(agent), a.row(agent), b.row(agent)),
                    Ordering::Less
                );
            }
        }
        if sd_dominates(&a, &b, &profile) {
            prop_assert!(ld_dominates(&a, &b, &profile));
        }
    }

    #[test]
    fn downward_comparison_is_a_total_order(
        pool in prop::collection::vec(any::<u64>(), 64),
        m in 2..=4usize,
    ) {
        let mut e = Entropy::new(pool);
        let pref = e.perm(m);
        let rows: Vec<Vec<Rational>> = (0..3)
            .map(|_| (0..m).map(|_| Rational::from_count(e.below(5) as u64, 12)).collect())
            .collect();
        let (x, y, z) = (&rows[0], &rows[1], &rows[2]);

        prop_assert_eq!(ld_prefers(&pref, x, y), ld_prefers(&pref, y, x).reverse());
        if ld_prefers(&pref, x, y) == Ordering::Equal {
            prop_assert_eq!(x.clone(), y.clone());
        }
        if ld_prefers(&pref, x, y) != Ordering::Less
            && ld_prefers(&pref, y, z) != Ordering::Less
        {
            prop_assert_ne!(ld_prefers(&pref, x, z), Ordering::Less);
        }
    }

    #[test]
    fn found_witnesses_always_replay(pool in prop::collection::vec(any::<u64>(), 48),
                                     n in 2..=3usize, len in 2..=4usize) {
        let mut e = Entropy::new(pool);
        let m = len;
        let turns: Vec<AgentId> = (0..len).map(|_| AgentId(e.below(n) as u32)).collect();
        let spec = MechanismSpec::Interleaving {
            sequence: PickingSequence::new(turns),
        };
        let profile = e.profile(n, m);
        if let Some(w) = find_manipulation(&spec, &profile).unwrap().witness {
            prop_assert!(w.verify(&spec).unwrap());
        }
        if let Some(w) = find_bossiness_at(&spec, &profile).unwrap().witness {
            prop_assert!(w.verify(&spec).unwrap());
        }
        let bossy = MechanismSpec::BossyFixture { quota: e.quota(n, m) };
        if let Some(w) = find_group_manipulation(&bossy, &profile, n).unwrap().witness {
            prop_assert!(w.verify(&bossy).unwrap());
        }
    }

    #[test]
    fn exact_lottery_matches_support_mixture(pool in prop::collection::vec(any::<u64>(), 32),
                                             n in 2..=3usize, m in 3..=4usize) {
        let mut e = Entropy::new(pool);
        let profile = e.profile(n, m);
        let quota = e.quota(n, m);
        let (matrix, support) = rsdq_exact(&profile, &quota).unwrap();
        prop_assert_eq!(support.mixture_matrix().unwrap(), matrix);
    }
}
