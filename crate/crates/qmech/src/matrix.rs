//! Random allocations: per-agent probability rows over objects, exact.

use crate::error::{Error, Result};
use crate::model::{AgentId, ObjectId, ObjectPermutation};
use crate::rational::Rational;

/// An `n x m` matrix of exact assignment probabilities. Every entry lies in
/// `[0, 1]` and every column (object) carries total mass at most one; row
/// masses are unconstrained here since quotas make them exceed one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RandAllocation {
    rows: Vec<Vec<Rational>>,
}

impl RandAllocation {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<RandAllocation> {
        if rows.is_empty() {
            return Err(Error::RaggedMatrix);
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::RaggedMatrix);
        }
        let one = Rational::one();
        for (a, row) in rows.iter().enumerate() {
            for (o, p) in row.iter().enumerate() {
                if p.is_negative() || p > &one {
                    return Err(Error::ProbabilityRange {
                        agent: a,
                        object: o,
                        value: p.to_string(),
                    });
                }
            }
        }
        for o in 0..width {
            let mass: Rational = rows.iter().map(|r| &r[o]).sum();
            if mass > one {
                return Err(Error::ColumnMass {
                    object: o,
                    mass: mass.to_string(),
                });
            }
        }
        Ok(RandAllocation { rows })
    }

    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    pub fn objects(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, a: AgentId) -> &[Rational] {
        &self.rows[a.index()]
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn entry(&self, a: AgentId, o: ObjectId) -> &Rational {
        &self.rows[a.index()][o.index()]
    }

    pub fn row_mass(&self, a: AgentId) -> Rational {
        self.rows[a.index()].iter().sum()
    }

    pub fn column_mass(&self, o: ObjectId) -> Rational {
        self.rows.iter().map(|r| &r[o.index()]).sum()
    }

    /// Sum of all entries; equals the number of assigned objects `C`.
    pub fn total_mass(&self) -> Rational {
        self.rows.iter().flatten().sum()
    }

    /// Relabels objects: the mass an agent had on `o` moves to `perm(o)`.
    pub fn permute_objects(&self, perm: &ObjectPermutation) -> RandAllocation {
        let m = self.objects();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out = vec![Rational::zero(); m];
                for (o, p) in row.iter().enumerate() {
                    out[perm.apply(ObjectId(o as u32)).index()] = p.clone();
                }
                out
            })
            .collect();
        RandAllocation { rows }
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(Rational::to_f64).collect())
            .collect()
    }
}
