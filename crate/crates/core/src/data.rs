//! Raw and discretized datasets.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::variable::VariableSpec;

/// Column-oriented numeric telemetry, as ingested from file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub columns: BTreeMap<String, Vec<f64>>,
    pub row_count: usize,
    /// Rows discarded during ingestion because a schema column was missing or
    /// unparseable.
    pub dropped_rows: usize,
}

impl RawDataset {
    pub fn new(columns: BTreeMap<String, Vec<f64>>, dropped_rows: usize) -> Result<Self> {
        let row_count = columns.values().next().map_or(0, Vec::len);
        for (name, col) in &columns {
            if col.len() != row_count {
                return Err(Error::Schema(alloc::format!(
                    "column {name} has {} rows, expected {row_count}",
                    col.len()
                )));
            }
        }
        Ok(Self {
            columns,
            row_count,
            dropped_rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownVariable(String::from(name)))
    }
}

/// Row-major matrix of state indices, one column per variable in `specs`
/// order. Every cell is a valid index into its column's state list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDataset {
    specs: Vec<VariableSpec>,
    rows: Vec<u8>,
}

impl DiscreteDataset {
    pub fn new(specs: Vec<VariableSpec>, rows: Vec<u8>) -> Result<Self> {
        let width = specs.len();
        if width == 0 {
            return Err(Error::Schema(String::from("dataset needs at least one variable")));
        }
        if rows.len() % width != 0 {
            return Err(Error::Schema(alloc::format!(
                "row storage length {} is not a multiple of {width}",
                rows.len()
            )));
        }
        for spec in &specs {
            if spec.states.is_empty() {
                return Err(Error::Schema(alloc::format!(
                    "variable {} has no states",
                    spec.name
                )));
            }
            if spec.states.len() > u8::MAX as usize {
                return Err(Error::Schema(alloc::format!(
                    "variable {} has too many states",
                    spec.name
                )));
            }
        }
        for (i, &cell) in rows.iter().enumerate() {
            let card = specs[i % width].state_count();
            if cell as usize >= card {
                return Err(Error::Schema(alloc::format!(
                    "state index {cell} out of range for variable {}",
                    specs[i % width].name
                )));
            }
        }
        Ok(Self { specs, rows })
    }

    pub fn specs(&self) -> &[VariableSpec] {
        &self.specs
    }

    pub fn n_vars(&self) -> usize {
        self.specs.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.specs.is_empty() {
            0
        } else {
            self.rows.len() / self.specs.len()
        }
    }

    /// State index at (row, column).
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> usize {
        self.rows[row * self.specs.len() + col] as usize
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u8] {
        let w = self.specs.len();
        &self.rows[row * w..(row + 1) * w]
    }

    pub fn cardinality(&self, col: usize) -> usize {
        self.specs[col].state_count()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownVariable(String::from(name)))
    }

    /// Concatenates two datasets over an identical schema.
    pub fn concat(&self, other: &DiscreteDataset) -> Result<DiscreteDataset> {
        if self.specs != other.specs {
            return Err(Error::Schema(String::from(
                "cannot concatenate datasets with different schemas",
            )));
        }
        let mut rows = self.rows.clone();
        rows.extend_from_slice(&other.rows);
        DiscreteDataset::new(self.specs.clone(), rows)
    }

    /// Rows reordered by `perm` (used by permutation-invariance tests).
    pub fn permuted(&self, perm: &[usize]) -> DiscreteDataset {
        let w = self.specs.len();
        let mut rows = Vec::with_capacity(self.rows.len());
        for &r in perm {
            rows.extend_from_slice(&self.rows[r * w..(r + 1) * w]);
        }
        Self {
            specs: self.specs.clone(),
            rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variable::Role;
    use alloc::vec;

    #[test]
    fn ragged_columns_rejected() {
        let mut cols = BTreeMap::new();
        cols.insert(String::from("a"), vec![1.0, 2.0]);
        cols.insert(String::from("b"), vec![1.0]);
        assert!(RawDataset::new(cols, 0).is_err());
    }

    #[test]
    fn cell_indexing_is_row_major() {
        let specs = vec![
            VariableSpec::discrete("a", Role::Config, &["0", "1"]),
            VariableSpec::discrete("b", Role::Config, &["0", "1", "2"]),
        ];
        let ds = DiscreteDataset::new(specs, vec![0, 2, 1, 0]).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.cell(0, 1), 2);
        assert_eq!(ds.cell(1, 0), 1);
        assert_eq!(ds.row(1), &[1, 0]);
    }

    #[test]
    fn out_of_range_state_rejected() {
        let specs = vec![VariableSpec::discrete("a", Role::Config, &["0", "1"])];
        assert!(DiscreteDataset::new(specs, vec![2]).is_err());
    }
}
