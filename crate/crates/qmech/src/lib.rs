//! Exact engine for quota-based assignment of indivisible objects.
//!
//! Agents rank single objects; bundles are compared by the lexicographic
//! set extension. Mechanisms hand out positional quotas of objects (serial
//! and sequential dictatorships, picking sequences), a uniform lottery over
//! serial dictatorships yields exact assignment probabilities, and a family
//! of brute-force audits searches small universes for witnesses against
//! strategyproofness, non-bossiness, neutrality, efficiency, envyfreeness,
//! and their group and reallocation variants.
//!
//! Everything probability-valued is exact rational arithmetic; every
//! search is deterministic, so any witness found is the same witness on
//! every run, and every witness replays through the mechanism it indicts.

pub mod axioms;
pub mod cli;
pub mod error;
pub mod instance;
pub mod matrix;
pub mod mechanisms;
pub mod model;
pub mod prefs;
pub mod randomized;
pub mod rational;
pub mod report;
mod util;
