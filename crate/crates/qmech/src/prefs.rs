//! Preferences over objects and their lift to bundles.
//!
//! A [`LexOrder`] is a strict ranking of all objects. It extends to bundles
//! lexicographically: between two distinct sets, the winner is the one
//! holding the most-preferred object on which they differ. The extension is
//! a strict total order on subsets, and the empty set is its minimum.
//!
//! [`GeneralSetPref`] drops the lexicographic structure and ranks every
//! subset explicitly; it exists for small counterexample universes only.

use std::cmp::Ordering;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::model::{AgentId, ObjSet, ObjectId, ObjectPermutation, MAX_OBJECTS};

/// Largest universe for which explicit subset rankings are permitted.
pub const MAX_GENERAL_OBJECTS: usize = 5;

/// A strict ranking over the full object universe, best first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct LexOrder {
    ranking: Vec<ObjectId>,
}

impl LexOrder {
    /// `ranking` must be a permutation of `0..m` for some `m <= 64`.
    pub fn new(ranking: Vec<ObjectId>) -> Result<LexOrder> {
        let m = ranking.len();
        if m > MAX_OBJECTS {
            return Err(Error::TooManyObjects {
                objects: m,
                max: MAX_OBJECTS,
            });
        }
        let mut seen = ObjSet::EMPTY;
        for &o in &ranking {
            if o.index() >= m {
                return Err(Error::ObjectOutOfRange {
                    index: o.index(),
                    objects: m,
                });
            }
            if seen.contains(o) {
                return Err(Error::RankingNotPermutation);
            }
            seen.insert(o);
        }
        Ok(LexOrder { ranking })
    }

    /// The ranking `0 > 1 > .. > m-1`.
    pub fn identity(m: usize) -> LexOrder {
        LexOrder {
            ranking: (0..m as u32).map(ObjectId).collect(),
        }
    }

    pub fn num_objects(&self) -> usize {
        self.ranking.len()
    }

    /// Objects from most to least preferred.
    pub fn ranking(&self) -> &[ObjectId] {
        &self.ranking
    }

    pub fn best(&self) -> ObjectId {
        self.ranking[0]
    }

    /// Ranking with all pairwise comparisons reversed.
    pub fn reversed(&self) -> LexOrder {
        LexOrder {
            ranking: self.ranking.iter().rev().copied().collect(),
        }
    }

    fn universe(&self) -> ObjSet {
        ObjSet::full(self.num_objects())
    }

    /// Lexicographic comparison of bundles. `Greater` means `a` is strictly
    /// preferred to `b`; the winner of two distinct bundles is the one
    /// containing the most-preferred object of their symmetric difference.
    pub fn compare_sets(&self, a: ObjSet, b: ObjSet) -> Result<Ordering> {
        self.check_in_universe(a.union(b))?;
        Ok(self.cmp_sets_unchecked(a, b))
    }

    /// True when `a` is strictly preferred to `b`.
    pub fn prefers(&self, a: ObjSet, b: ObjSet) -> Result<bool> {
        Ok(self.compare_sets(a, b)? == Ordering::Greater)
    }

    pub(crate) fn cmp_sets_unchecked(&self, a: ObjSet, b: ObjSet) -> Ordering {
        let diff = a.symmetric_difference(b);
        if diff.is_empty() {
            return Ordering::Equal;
        }
        for &o in &self.ranking {
            if diff.contains(o) {
                return if a.contains(o) {
                    Ordering::Greater
                } else {
                    Ordering::Less
                };
            }
        }
        unreachable!("symmetric difference lies inside the universe");
    }

    /// The `k` most preferred objects of `available`; equivalently, the
    /// lexicographically maximal cardinality-`k` subset of `available`.
    pub fn top_k(&self, available: ObjSet, k: usize) -> Result<ObjSet> {
        Ok(self.top_k_ordered(available, k)?.into_iter().collect())
    }

    /// Like [`top_k`](Self::top_k), in preference order.
    pub fn top_k_ordered(&self, available: ObjSet, k: usize) -> Result<Vec<ObjectId>> {
        self.check_in_universe(available)?;
        if k > available.len() {
            return Err(Error::TakeExceedsAvailable {
                wanted: k,
                available: available.len(),
            });
        }
        Ok(self
            .ranking
            .iter()
            .copied()
            .filter(|&o| available.contains(o))
            .take(k)
            .collect())
    }

    /// Relabels objects: if this ranking puts `x` above `y`, the result puts
    /// `perm(x)` above `perm(y)`.
    pub fn permute_objects(&self, perm: &ObjectPermutation) -> LexOrder {
        LexOrder {
            ranking: self.ranking.iter().map(|&o| perm.apply(o)).collect(),
        }
    }

    fn check_in_universe(&self, s: ObjSet) -> Result<()> {
        if !s.is_subset(self.universe()) {
            let worst = s.iter().last().expect("nonempty outside universe");
            return Err(Error::ObjectOutOfRange {
                index: worst.index(),
                objects: self.num_objects(),
            });
        }
        Ok(())
    }
}

/// Every strict ranking of `m` objects, in lexicographic order of the
/// ranking vectors (`0,1,..`, then `0,1,..` with the last two swapped, ..).
pub fn all_lex_orders(m: usize) -> Vec<LexOrder> {
    (0..m as u32)
        .map(ObjectId)
        .permutations(m)
        .map(|ranking| LexOrder { ranking })
        .collect()
}

/// One ranking per agent, all over the same universe.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LexProfile {
    prefs: Vec<LexOrder>,
}

impl LexProfile {
    pub fn new(prefs: Vec<LexOrder>) -> Result<LexProfile> {
        if prefs.is_empty() {
            return Err(Error::InvalidInstance("profile has no agents".into()));
        }
        let m = prefs[0].num_objects();
        if prefs.iter().any(|p| p.num_objects() != m) {
            return Err(Error::InvalidInstance(
                "all rankings in a profile must cover the same universe".into(),
            ));
        }
        Ok(LexProfile { prefs })
    }

    /// All agents share `order`.
    pub fn identical(agents: usize, order: LexOrder) -> LexProfile {
        LexProfile {
            prefs: vec![order; agents],
        }
    }

    pub fn agents(&self) -> usize {
        self.prefs.len()
    }

    pub fn objects(&self) -> usize {
        self.prefs[0].num_objects()
    }

    pub fn pref(&self, a: AgentId) -> &LexOrder {
        &self.prefs[a.index()]
    }

    pub fn prefs(&self) -> &[LexOrder] {
        &self.prefs
    }

    /// Copy of the profile with agent `a`'s ranking replaced.
    pub fn with_pref(&self, a: AgentId, order: LexOrder) -> LexProfile {
        assert_eq!(order.num_objects(), self.objects());
        let mut prefs = self.prefs.clone();
        prefs[a.index()] = order;
        LexProfile { prefs }
    }

    /// True when all agents report the same ranking.
    pub fn is_identical(&self) -> bool {
        self.prefs.iter().all(|p| p == &self.prefs[0])
    }

    pub fn permute_objects(&self, perm: &ObjectPermutation) -> LexProfile {
        LexProfile {
            prefs: self.prefs.iter().map(|p| p.permute_objects(perm)).collect(),
        }
    }
}

/// An explicit strict ranking of every subset of a small universe, best
/// first. No structure beyond strictness is imposed: such preferences need
/// not respect set inclusion or any lexicographic rule.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GeneralSetPref {
    objects: usize,
    ranking: Vec<ObjSet>,
    rank_of: Vec<u32>,
}

impl GeneralSetPref {
    /// `ranking` must list each of the `2^m` subsets of `0..m` exactly once,
    /// with `m <= 5`.
    pub fn new(objects: usize, ranking: Vec<ObjSet>) -> Result<GeneralSetPref> {
        if objects > MAX_GENERAL_OBJECTS {
            return Err(Error::TooManyObjects {
                objects,
                max: MAX_GENERAL_OBJECTS,
            });
        }
        let count = 1usize << objects;
        if ranking.len() != count {
            return Err(Error::SubsetRankingIncomplete);
        }
        let universe = ObjSet::full(objects);
        let mut rank_of = vec![u32::MAX; count];
        for (rank, &s) in ranking.iter().enumerate() {
            if !s.is_subset(universe) {
                return Err(Error::SubsetRankingIncomplete);
            }
            let slot = &mut rank_of[s.bits() as usize];
            if *slot != u32::MAX {
                return Err(Error::SubsetRankingIncomplete);
            }
            *slot = rank as u32;
        }
        Ok(GeneralSetPref {
            objects,
            ranking,
            rank_of,
        })
    }

    pub fn num_objects(&self) -> usize {
        self.objects
    }

    /// Subsets from most to least preferred.
    pub fn ranking(&self) -> &[ObjSet] {
        &self.ranking
    }

    /// `Greater` means `a` is strictly preferred to `b`.
    pub fn compare_sets(&self, a: ObjSet, b: ObjSet) -> Result<Ordering> {
        let universe = ObjSet::full(self.objects);
        for s in [a, b] {
            if !s.is_subset(universe) {
                let worst = s.iter().last().expect("nonempty outside universe");
                return Err(Error::ObjectOutOfRange {
                    index: worst.index(),
                    objects: self.objects,
                });
            }
        }
        // Smaller rank = more preferred.
        Ok(self.rank_of[b.bits() as usize].cmp(&self.rank_of[a.bits() as usize]))
    }

    pub fn prefers(&self, a: ObjSet, b: ObjSet) -> Result<bool> {
        Ok(self.compare_sets(a, b)? == Ordering::Greater)
    }

    /// The most preferred cardinality-`k` subset of `available`.
    pub fn top_subset(&self, available: ObjSet, k: usize) -> Result<ObjSet> {
        if k > available.len() {
            return Err(Error::TakeExceedsAvailable {
                wanted: k,
                available: available.len(),
            });
        }
        self.ranking
            .iter()
            .copied()
            .find(|s| s.len() == k && s.is_subset(available))
            .ok_or(Error::SubsetRankingIncomplete)
    }
}
