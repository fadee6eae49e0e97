//! The uniform lottery over serial dictatorships, and order relations on
//! random allocations.
//!
//! Drawing an ordering of `|q|` distinct agents uniformly at random and
//! running the serial dictatorship induces, for each agent and object, an
//! exact assignment probability: the fraction of orderings under which the
//! agent receives the object. [`rsdq_exact`] enumerates all orderings and
//! counts; [`rsdq_sample`] estimates the same matrix by seeded Monte Carlo.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::RandAllocation;
use crate::mechanisms::{run_serial, AgentOrdering};
use crate::model::{AgentId, DetAllocation, ObjSet, ObjectId, Quota};
use crate::prefs::{LexOrder, LexProfile};
use crate::rational::Rational;
use crate::util::{map_ranges, split_range, worker_count};

/// Largest number of orderings [`rsdq_exact`] enumerates before refusing.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Trials per deterministic sampling chunk; fixed so that results never
/// depend on the worker count.
const SAMPLE_CHUNK: u64 = 4096;

/// Number of injective orderings of `positions` agents drawn from `agents`.
pub fn ordering_count(agents: usize, positions: usize) -> u128 {
    assert!(positions <= agents);
    (0..positions).fold(1u128, |acc, i| acc * (agents - i) as u128)
}

/// The `index`-th ordering (lexicographic by agent index) of `positions`
/// agents drawn from `0..agents`.
fn unrank_ordering(agents: usize, positions: usize, mut index: u64) -> Vec<AgentId> {
    let mut pool: Vec<u32> = (0..agents as u32).collect();
    let mut out = Vec::with_capacity(positions);
    for i in 0..positions {
        let weight = ordering_count(agents - i - 1, positions - i - 1) as u64;
        let digit = (index / weight) as usize;
        index %= weight;
        out.push(AgentId(pool.remove(digit)));
    }
    out
}

fn serve_and_count(
    profile: &LexProfile,
    quota: &Quota,
    ordering: &[AgentId],
    counts: &mut [Vec<u64>],
) {
    let mut remaining = ObjSet::full(profile.objects());
    for (pos, &agent) in ordering.iter().enumerate() {
        let bundle = profile
            .pref(agent)
            .top_k(remaining, quota.sizes()[pos])
            .expect("validated quota fits the universe");
        for o in bundle.iter() {
            counts[agent.index()][o.index()] += 1;
        }
        remaining = remaining.difference(bundle);
    }
}

/// Integer form of the lottery matrix: `counts[a][o]` orderings (out of
/// `orderings` total) give object `o` to agent `a`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RsdqCounts {
    pub counts: Vec<Vec<u64>>,
    pub orderings: u64,
}

pub fn rsdq_counts(profile: &LexProfile, quota: &Quota) -> Result<RsdqCounts> {
    rsdq_counts_capped(profile, quota, DEFAULT_ENUMERATION_CAP)
}

pub fn rsdq_counts_capped(profile: &LexProfile, quota: &Quota, cap: u64) -> Result<RsdqCounts> {
    rsdq_counts_with_workers(profile, quota, cap, worker_count())
}

pub(crate) fn rsdq_counts_with_workers(
    profile: &LexProfile,
    quota: &Quota,
    cap: u64,
    workers: usize,
) -> Result<RsdqCounts> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    let k = quota.positions();
    let required = ordering_count(n, k);
    if required > cap as u128 {
        return Err(Error::BudgetExceeded { required, cap });
    }
    let total = required as u64;
    let partials = map_ranges(split_range(total, workers), |range| {
        let mut counts = vec![vec![0u64; m]; n];
        for index in range {
            let ordering = unrank_ordering(n, k, index);
            serve_and_count(profile, quota, &ordering, &mut counts);
        }
        counts
    });
    let mut counts = vec![vec![0u64; m]; n];
    for partial in partials {
        for (row, prow) in counts.iter_mut().zip(partial) {
            for (c, p) in row.iter_mut().zip(prow) {
                *c += p;
            }
        }
    }
    Ok(RsdqCounts {
        counts,
        orderings: total,
    })
}

/// One realization of the lottery: an ordering and the allocation the
/// serial dictatorship produces when serving it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LotteryEntry {
    pub ordering: Vec<AgentId>,
    pub allocation: DetAllocation,
}

/// All realizations of the uniform lottery, in lexicographic ordering order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LotterySupport {
    entries: Vec<LotteryEntry>,
    total: u64,
    objects: usize,
}

impl LotterySupport {
    pub fn entries(&self) -> &[LotteryEntry] {
        &self.entries
    }

    pub fn total_orderings(&self) -> u64 {
        self.total
    }

    /// Every realization's probability; the lottery is uniform.
    pub fn weight(&self) -> Rational {
        Rational::from_count(1, self.total)
    }

    /// Recomputes the probability matrix from the realizations; equals the
    /// matrix [`rsdq_exact`] counts directly.
    pub fn mixture_matrix(&self) -> Result<RandAllocation> {
        let n = self.entries[0].allocation.agents();
        let m = self.objects;
        let mut counts = vec![vec![0u64; m]; n];
        for entry in &self.entries {
            for (a, &bundle) in entry.allocation.bundles().iter().enumerate() {
                for o in bundle.iter() {
                    counts[a][o.index()] += 1;
                }
            }
        }
        RandAllocation::new(
            counts
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|c| Rational::from_count(c, self.total))
                        .collect()
                })
                .collect(),
        )
    }
}

/// Exact lottery matrix and support, by full enumeration of orderings.
pub fn rsdq_exact(profile: &LexProfile, quota: &Quota) -> Result<(RandAllocation, LotterySupport)> {
    rsdq_exact_capped(profile, quota, DEFAULT_ENUMERATION_CAP)
}

pub fn rsdq_exact_capped(
    profile: &LexProfile,
    quota: &Quota,
    cap: u64,
) -> Result<(RandAllocation, LotterySupport)> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    let k = quota.positions();
    let required = ordering_count(n, k);
    if required > cap as u128 {
        return Err(Error::BudgetExceeded { required, cap });
    }
    let total = required as u64;
    let partials = map_ranges(split_range(total, worker_count()), |range| {
        let mut counts = vec![vec![0u64; m]; n];
        let mut entries = Vec::with_capacity((range.end - range.start) as usize);
        for index in range.clone() {
            let ordering = unrank_ordering(n, k, index);
            serve_and_count(profile, quota, &ordering, &mut counts);
            let order = AgentOrdering::new(ordering.clone()).expect("unranked orderings are distinct");
            let allocation = run_serial(profile, &order, quota)?;
            entries.push(LotteryEntry {
                ordering,
                allocation,
            });
        }
        Ok::<_, Error>((counts, entries))
    });
    let mut counts = vec![vec![0u64; m]; n];
    let mut entries = Vec::with_capacity(total as usize);
    for partial in partials {
        let (pcounts, pentries) = partial?;
        for (row, prow) in counts.iter_mut().zip(pcounts) {
            for (c, p) in row.iter_mut().zip(prow) {
                *c += p;
            }
        }
        entries.extend(pentries);
    }
    let matrix = RandAllocation::new(
        counts
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| Rational::from_count(c, total))
                    .collect()
            })
            .collect(),
    )?;
    Ok((
        matrix,
        LotterySupport {
            entries,
            total,
            objects: m,
        },
    ))
}

/// Monte Carlo estimate of the lottery matrix.
#[derive(Clone, PartialEq, Debug)]
pub struct SampledAllocation {
    rows: Vec<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
}

impl SampledAllocation {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Largest entrywise deviation from an exact matrix.
    pub fn max_abs_diff(&self, exact: &RandAllocation) -> f64 {
        let mut worst = 0f64;
        for (row, erow) in self.rows.iter().zip(exact.rows()) {
            for (v, e) in row.iter().zip(erow) {
                worst = worst.max((v - e.to_f64()).abs());
            }
        }
        worst
    }
}

/// Estimates the lottery matrix from `trials` uniformly drawn orderings.
/// Identical `(seed, trials)` give identical results at any worker count:
/// trials are split into fixed chunks and chunk `c` draws from an
/// independent stream `c` of the seeded generator.
pub fn rsdq_sample(
    profile: &LexProfile,
    quota: &Quota,
    trials: u64,
    seed: u64,
) -> Result<SampledAllocation> {
    rsdq_sample_with_workers(profile, quota, trials, seed, worker_count())
}

pub(crate) fn rsdq_sample_with_workers(
    profile: &LexProfile,
    quota: &Quota,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SampledAllocation> {
    let (n, m) = (profile.agents(), profile.objects());
    quota.validate(n, m)?;
    if trials == 0 {
        return Err(Error::InvalidInstance("trials must be positive".into()));
    }
    let k = quota.positions();
    let chunks = trials.div_ceil(SAMPLE_CHUNK);
    let partials = map_ranges(split_range(chunks, workers), |chunk_range| {
        let mut counts = vec![vec![0u64; m]; n];
        let mut ordering = vec![AgentId(0); k];
        for chunk in chunk_range {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let in_chunk = SAMPLE_CHUNK.min(trials - chunk * SAMPLE_CHUNK);
            let mut pool: Vec<u32> = (0..n as u32).collect();
            for _ in 0..in_chunk {
                for i in 0..k {
                    let j = rng.gen_range(i..n);
                    pool.swap(i, j);
                    ordering[i] = AgentId(pool[i]);
                }
                serve_and_count(profile, quota, &ordering, &mut counts);
            }
        }
        counts
    });
    let mut counts = vec![vec![0u64; m]; n];
    for partial in partials {
        for (row, prow) in counts.iter_mut().zip(partial) {
            for (c, p) in row.iter_mut().zip(prow) {
                *c += p;
            }
        }
    }
    let rows = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / trials as f64).collect())
        .collect();
    Ok(SampledAllocation { rows, trials, seed })
}

/// Downward-lexicographic comparison of two probability rows under `pref`:
/// the row with more mass on the most-preferred object where they differ
/// wins. `Greater` means the first row is strictly preferred.
pub fn ld_prefers(pref: &LexOrder, a: &[Rational], b: &[Rational]) -> Ordering {
    ld_prefers_by(pref, a, b)
}

pub(crate) fn ld_prefers_by<T: Ord>(pref: &LexOrder, a: &[T], b: &[T]) -> Ordering {
    assert_eq!(a.len(), pref.num_objects());
    assert_eq!(b.len(), pref.num_objects());
    for &o in pref.ranking() {
        match a[o.index()].cmp(&b[o.index()]) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// The most-preferred object on which two rows differ, if any.
pub fn ld_pivot(pref: &LexOrder, a: &[Rational], b: &[Rational]) -> Option<ObjectId> {
    pref.ranking()
        .iter()
        .copied()
        .find(|o| a[o.index()] != b[o.index()])
}

/// True when no agent downward-lexicographically prefers its row in `b` to
/// its row in `a`. Reflexive: every allocation dominates itself.
pub fn ld_dominates(a: &RandAllocation, b: &RandAllocation, profile: &LexProfile) -> bool {
    assert_eq!(a.agents(), profile.agents());
    assert_eq!(b.agents(), profile.agents());
    (0..profile.agents()).all(|i| {
        let agent = AgentId(i as u32);
        ld_prefers(profile.pref(agent), b.row(agent), a.row(agent)) != Ordering::Greater
    })
}

/// First-order stochastic dominance: every agent's cumulative mass over
/// every preference prefix is at least as high under `a` as under `b`, and
/// strictly higher somewhere. Irreflexive.
pub fn sd_dominates(a: &RandAllocation, b: &RandAllocation, profile: &LexProfile) -> bool {
    assert_eq!(a.agents(), profile.agents());
    assert_eq!(b.agents(), profile.agents());
    let mut strict = false;
    for i in 0..profile.agents() {
        let agent = AgentId(i as u32);
        let pref = profile.pref(agent);
        let mut mass_a = Rational::zero();
        let mut mass_b = Rational::zero();
        for &o in pref.ranking() {
            mass_a += &a.row(agent)[o.index()];
            mass_b += &b.row(agent)[o.index()];
            match mass_a.cmp(&mass_b) {
                Ordering::Less => return false,
                Ordering::Greater => strict = true,
                Ordering::Equal => {}
            }
        }
    }
    strict
}

/// Agent `envious` downward-lexicographically prefers `envied`'s row to its
/// own; `pivot` is the most-preferred object where the rows differ.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EnvyWitness {
    pub envious: AgentId,
    pub envied: AgentId,
    pub pivot: ObjectId,
}

/// All ordered pairs where one agent prefers another's row, in ascending
/// `(envious, envied)` order.
pub fn envy_witnesses(alloc: &RandAllocation, profile: &LexProfile) -> Vec<EnvyWitness> {
    assert_eq!(alloc.agents(), profile.agents());
    let n = profile.agents();
    let mut out = Vec::new();
    for i in 0..n {
        let envious = AgentId(i as u32);
        let pref = profile.pref(envious);
        for j in 0..n {
            if i == j {
                continue;
            }
            let envied = AgentId(j as u32);
            if ld_prefers(pref, alloc.row(envied), alloc.row(envious)) == Ordering::Greater {
                let pivot = ld_pivot(pref, alloc.row(envied), alloc.row(envious))
                    .expect("strict preference implies differing rows");
                out.push(EnvyWitness {
                    envious,
                    envied,
                    pivot,
                });
            }
        }
    }
    out
}

/// Pairs of agents with identical rankings but different probability rows,
/// in ascending order.
pub fn equal_treatment_witnesses(
    alloc: &RandAllocation,
    profile: &LexProfile,
) -> Vec<(AgentId, AgentId)> {
    assert_eq!(alloc.agents(), profile.agents());
    let n = profile.agents();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (AgentId(i as u32), AgentId(j as u32));
            if profile.pref(a) == profile.pref(b) && alloc.row(a) != alloc.row(b) {
                out.push((a, b));
            }
        }
    }
    out
}
