//! Ground types: agents, objects, object sets, quotas, deterministic
//! allocations, picking sequences, and object permutations.
//!
//! Objects and agents are dense zero-based indices. Human-readable labels
//! live in the instance layer and never reach the core.

use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on universe size, set by the bitmask representation of [`ObjSet`].
pub const MAX_OBJECTS: usize = 64;

/// A single object, identified by its index in the universe `0..m`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ObjectId(pub u32);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single agent, identified by its index `0..n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AgentId(pub u32);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of objects, stored as a bitmask over object indices.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ObjSet(u64);

impl ObjSet {
    pub const EMPTY: ObjSet = ObjSet(0);

    /// The full universe `{0, .., m-1}`.
    pub fn full(m: usize) -> ObjSet {
        assert!(m <= MAX_OBJECTS);
        if m == MAX_OBJECTS {
            ObjSet(u64::MAX)
        } else {
            ObjSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(o: ObjectId) -> ObjSet {
        ObjSet(1u64 << o.index())
    }

    pub fn contains(self, o: ObjectId) -> bool {
        self.0 & (1u64 << o.index()) != 0
    }

    pub fn insert(&mut self, o: ObjectId) {
        self.0 |= 1u64 << o.index();
    }

    pub fn remove(&mut self, o: ObjectId) {
        self.0 &= !(1u64 << o.index());
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: ObjSet) -> ObjSet {
        ObjSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ObjSet) -> ObjSet {
        ObjSet(self.0 & other.0)
    }

    pub fn difference(self, other: ObjSet) -> ObjSet {
        ObjSet(self.0 & !other.0)
    }

    pub fn symmetric_difference(self, other: ObjSet) -> ObjSet {
        ObjSet(self.0 ^ other.0)
    }

    pub fn is_subset(self, other: ObjSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: ObjSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Objects in ascending index order.
    pub fn iter(self) -> ObjSetIter {
        ObjSetIter(self.0)
    }

    /// All `2^m` subsets of the universe, in ascending bitmask order.
    pub fn all_subsets(m: usize) -> impl Iterator<Item = ObjSet> {
        assert!(m < MAX_OBJECTS, "subset enumeration needs m < 64");
        (0..(1u64 << m)).map(ObjSet)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn from_bits(bits: u64) -> ObjSet {
        ObjSet(bits)
    }
}

impl FromIterator<ObjectId> for ObjSet {
    fn from_iter<I: IntoIterator<Item = ObjectId>>(iter: I) -> ObjSet {
        let mut s = ObjSet::EMPTY;
        for o in iter {
            s.insert(o);
        }
        s
    }
}

pub struct ObjSetIter(u64);

impl Iterator for ObjSetIter {
    type Item = ObjectId;

    fn next(&mut self) -> Option<ObjectId> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(ObjectId(i))
    }
}

impl fmt::Debug for ObjSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, o) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", o.0)?;
        }
        write!(f, "}}")
    }
}

/// Positional bundle sizes `q = (q_1, .., q_k)`: the agent serving position
/// `i` receives exactly `q_i` objects. Fewer positions than agents means the
/// rest receive nothing; total below `m` means leftovers stay unassigned.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Quota {
    sizes: Vec<usize>,
}

impl Quota {
    pub fn new(sizes: Vec<usize>) -> Quota {
        Quota { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of served positions `|q|`.
    pub fn positions(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of assigned objects `C`.
    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Checks `|q| <= n`, every entry positive, and total at most `m`.
    pub fn validate(&self, agents: usize, objects: usize) -> Result<()> {
        if self.positions() > agents {
            return Err(Error::QuotaPositions {
                positions: self.positions(),
                agents,
            });
        }
        for (index, &q) in self.sizes.iter().enumerate() {
            if q == 0 {
                return Err(Error::QuotaZeroEntry { index });
            }
        }
        if self.total() > objects {
            return Err(Error::QuotaMass {
                total: self.total(),
                objects,
            });
        }
        Ok(())
    }
}

/// A deterministic allocation: one bundle per agent, pairwise disjoint.
/// Unserved agents hold the empty bundle.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DetAllocation {
    bundles: Vec<ObjSet>,
}

impl DetAllocation {
    pub fn empty(agents: usize) -> DetAllocation {
        DetAllocation {
            bundles: vec![ObjSet::EMPTY; agents],
        }
    }

    pub fn from_bundles(bundles: Vec<ObjSet>) -> Result<DetAllocation> {
        let alloc = DetAllocation { bundles };
        alloc.check_disjoint()?;
        Ok(alloc)
    }

    pub fn agents(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, a: AgentId) -> ObjSet {
        self.bundles[a.index()]
    }

    pub fn bundles(&self) -> &[ObjSet] {
        &self.bundles
    }

    pub fn set_bundle(&mut self, a: AgentId, bundle: ObjSet) {
        self.bundles[a.index()] = bundle;
    }

    /// Union of all bundles.
    pub fn assigned(&self) -> ObjSet {
        self.bundles
            .iter()
            .fold(ObjSet::EMPTY, |acc, &b| acc.union(b))
    }

    pub fn total_assigned(&self) -> usize {
        self.assigned().len()
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = ObjSet::EMPTY;
        for &b in &self.bundles {
            let clash = seen.intersection(b);
            if let Some(object) = clash.iter().next() {
                return Err(Error::OverlappingBundles {
                    object: object.index(),
                });
            }
            seen = seen.union(b);
        }
        Ok(())
    }

    /// Relabels every object through `perm`.
    pub fn permute_objects(&self, perm: &ObjectPermutation) -> DetAllocation {
        DetAllocation {
            bundles: self.bundles.iter().map(|&b| perm.apply_set(b)).collect(),
        }
    }
}

/// A picking sequence: `turns[t]` names the agent who picks one object at
/// turn `t`. Encodes serial dictatorships (contiguous blocks) as well as
/// interleaved drafts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PickingSequence {
    turns: Vec<AgentId>,
}

impl PickingSequence {
    pub fn new(turns: Vec<AgentId>) -> PickingSequence {
        PickingSequence { turns }
    }

    pub fn turns(&self) -> &[AgentId] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn validate(&self, agents: usize, objects: usize) -> Result<()> {
        if self.turns.len() > objects {
            return Err(Error::TakeExceedsAvailable {
                wanted: self.turns.len(),
                available: objects,
            });
        }
        for &a in &self.turns {
            if a.index() >= agents {
                return Err(Error::AgentOutOfRange {
                    index: a.index(),
                    agents,
                });
            }
        }
        Ok(())
    }

    /// True when some agent picks both before and after a different agent:
    /// there are turns `i < j < k` with `turns[i] = turns[k] != turns[j]`.
    /// Sequences that are not interleaving are exactly the serial ones.
    pub fn is_interleaving(&self) -> bool {
        let t = &self.turns;
        for i in 0..t.len() {
            for j in i + 1..t.len() {
                if t[j] == t[i] {
                    continue;
                }
                if t[j + 1..].contains(&t[i]) {
                    return true;
                }
            }
        }
        false
    }

    /// Per-agent pick counts, as a quota in order of first appearance,
    /// together with that agent order. Meaningful for serial sequences.
    pub fn serial_shape(&self) -> (Vec<AgentId>, Quota) {
        let mut order = Vec::new();
        let mut sizes = Vec::new();
        for &a in &self.turns {
            match order.iter().position(|&x| x == a) {
                Some(p) => sizes[p] += 1,
                None => {
                    order.push(a);
                    sizes.push(1);
                }
            }
        }
        (order, Quota::new(sizes))
    }
}

/// A bijection on the object universe, `map[i]` = image of object `i`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ObjectPermutation {
    map: Vec<ObjectId>,
}

impl ObjectPermutation {
    pub fn new(map: Vec<ObjectId>) -> Result<ObjectPermutation> {
        let m = map.len();
        if m > MAX_OBJECTS {
            return Err(Error::TooManyObjects {
                objects: m,
                max: MAX_OBJECTS,
            });
        }
        let mut seen = ObjSet::EMPTY;
        for &o in &map {
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
        Ok(ObjectPermutation { map })
    }

    pub fn identity(m: usize) -> ObjectPermutation {
        ObjectPermutation {
            map: (0..m as u32).map(ObjectId).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, o: ObjectId) -> ObjectId {
        self.map[o.index()]
    }

    pub fn apply_set(&self, s: ObjSet) -> ObjSet {
        s.iter().map(|o| self.apply(o)).collect()
    }

    pub fn inverse(&self) -> ObjectPermutation {
        let mut map = vec![ObjectId(0); self.map.len()];
        for (i, &img) in self.map.iter().enumerate() {
            map[img.index()] = ObjectId(i as u32);
        }
        ObjectPermutation { map }
    }
}
