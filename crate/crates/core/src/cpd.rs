//! Conditional probability tables.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for CPT row normalization checks.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// P(child | parents) as a dense table.
///
/// Rows enumerate parent state combinations in mixed-radix order with the
/// first parent most significant; columns enumerate child states. Parents are
/// kept in canonical order (ascending dataset column index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpd {
    pub child: usize,
    pub parents: Vec<usize>,
    pub child_card: usize,
    pub parent_cards: Vec<usize>,
    /// Row-major probabilities, length = product(parent_cards) * child_card.
    pub table: Vec<f64>,
}

impl Cpd {
    pub fn new(
        child: usize,
        parents: Vec<usize>,
        child_card: usize,
        parent_cards: Vec<usize>,
        table: Vec<f64>,
    ) -> Result<Self> {
        let cpd = Self {
            child,
            parents,
            child_card,
            parent_cards,
            table,
        };
        cpd.validate()?;
        Ok(cpd)
    }

    pub fn n_rows(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.parents.len() != self.parent_cards.len() {
            return Err(Error::Parameter(String::from(
                "parent list and cardinality list differ in length",
            )));
        }
        if self.child_card == 0 {
            return Err(Error::Parameter(String::from("child needs at least one state")));
        }
        let rows = self.n_rows();
        if self.table.len() != rows * self.child_card {
            return Err(Error::Parameter(alloc::format!(
                "table has {} entries, expected {}",
                self.table.len(),
                rows * self.child_card
            )));
        }
        for (i, row) in self.table.chunks(self.child_card).enumerate() {
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0 + ROW_SUM_TOL).contains(&p) {
                    return Err(Error::Parameter(alloc::format!(
                        "probability {p} out of range in row {i}"
                    )));
                }
                sum += p;
            }
            if libm::fabs(sum - 1.0) > ROW_SUM_TOL {
                return Err(Error::Parameter(alloc::format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Mixed-radix row index for one parent state combination.
    pub fn row_index(&self, parent_states: &[usize]) -> usize {
        debug_assert_eq!(parent_states.len(), self.parent_cards.len());
        let mut idx = 0;
        for (&s, &card) in parent_states.iter().zip(&self.parent_cards) {
            debug_assert!(s < card);
            idx = idx * card + s;
        }
        idx
    }

    /// P(child = state | parents = parent_states).
    pub fn prob(&self, parent_states: &[usize], state: usize) -> f64 {
        self.table[self.row_index(parent_states) * self.child_card + state]
    }

    pub fn row(&self, row_index: usize) -> &[f64] {
        &self.table[row_index * self.child_card..(row_index + 1) * self.child_card]
    }

    /// Renormalizes every row in place (no-op on already normalized rows).
    pub fn normalize_rows(&mut self) {
        for row in self.table.chunks_mut(self.child_card) {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for p in row {
                    *p /= sum;
                }
            } else {
                let uniform = 1.0 / self.child_card as f64;
                for p in row {
                    *p = uniform;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn row_index_is_mixed_radix_first_parent_most_significant() {
        let cpd = Cpd::new(
            2,
            vec![0, 1],
            2,
            vec![2, 3],
            vec![0.5; 12],
        )
        .unwrap();
        assert_eq!(cpd.row_index(&[0, 0]), 0);
        assert_eq!(cpd.row_index(&[0, 2]), 2);
        assert_eq!(cpd.row_index(&[1, 0]), 3);
        assert_eq!(cpd.row_index(&[1, 2]), 5);
    }

    #[test]
    fn non_normalized_row_rejected() {
        let err = Cpd::new(0, vec![], 2, vec![], vec![0.6, 0.6]);
        assert!(err.is_err());
    }

    #[test]
    fn normalize_rows_fixes_sums() {
        let mut cpd = Cpd {
            child: 0,
            parents: vec![],
            child_card: 2,
            parent_cards: vec![],
            table: vec![2.0, 6.0],
        };
        cpd.normalize_rows();
        assert!((cpd.table[0] - 0.25).abs() < 1e-15);
        assert!((cpd.table[1] - 0.75).abs() < 1e-15);
        cpd.validate().unwrap();
    }
}
