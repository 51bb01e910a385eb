//! Variable typing: every telemetry column is a named variable with a role in
//! the recommendation problem, a kind, an ordered state list and a utility
//! direction.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of the optimization a variable sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Operator-settable parameter (retains its original discrete values).
    Config,
    /// Observed intermediate quantity (e.g. SNR, RSRP).
    Measurement,
    /// Target metric entering the utility objective.
    Kpi,
}

/// Whether a raw column carries continuous samples (to be binned) or discrete
/// design values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Continuous,
    Discrete,
}

/// Utility sign for KPIs: benefit metrics reward high states, cost metrics
/// penalize them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Benefit,
    Cost,
    Neutral,
}

/// Declaration of one telemetry variable.
///
/// For `Discrete` variables `states` lists the raw legal values; for
/// `Continuous` variables it lists the bin labels once discretization has run
/// (empty before).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
    pub states: Vec<String>,
    pub direction: Direction,
}

impl VariableSpec {
    pub fn continuous(name: &str, role: Role) -> Self {
        Self {
            name: String::from(name),
            role,
            kind: Kind::Continuous,
            states: Vec::new(),
            direction: Direction::Neutral,
        }
    }

    /// Discrete variable with its legal raw values, listed in ordinal order.
    pub fn discrete(name: &str, role: Role, states: &[&str]) -> Self {
        Self {
            name: String::from(name),
            role,
            kind: Kind::Discrete,
            states: states.iter().map(|s| String::from(*s)).collect(),
            direction: Direction::Neutral,
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }
}

/// Checks name uniqueness and that Config variables are declared Discrete.
pub fn validate_specs(specs: &[VariableSpec]) -> Result<()> {
    for (i, spec) in specs.iter().enumerate() {
        if specs[..i].iter().any(|s| s.name == spec.name) {
            return Err(Error::Schema(alloc::format!(
                "duplicate variable name {}",
                spec.name
            )));
        }
        if spec.role == Role::Config && spec.kind != Kind::Discrete {
            return Err(Error::Schema(alloc::format!(
                "config variable {} must be discrete",
                spec.name
            )));
        }
    }
    Ok(())
}

/// Splits variable names into (configs, measurements, kpis), preserving input
/// order. The three lists are disjoint and jointly cover all names.
pub fn partition_variables(specs: &[VariableSpec]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut configs = Vec::new();
    let mut measurements = Vec::new();
    let mut kpis = Vec::new();
    for spec in specs {
        let bucket = match spec.role {
            Role::Config => &mut configs,
            Role::Measurement => &mut measurements,
            Role::Kpi => &mut kpis,
        };
        bucket.push(spec.name.clone());
    }
    (configs, measurements, kpis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table2_specs() -> Vec<VariableSpec> {
        vec![
            VariableSpec::discrete("p0_nominal", Role::Config, &["-106", "-102", "-96", "-90", "-84"]),
            VariableSpec::discrete("pusch_TargetSNRx10", Role::Config, &["12", "15", "20", "28"]),
            VariableSpec::continuous("UL_Mbps", Role::Kpi),
            VariableSpec::continuous("UL_BLER", Role::Kpi),
            VariableSpec::continuous("UL_MCS", Role::Measurement),
            VariableSpec::continuous("RSRP", Role::Measurement),
            VariableSpec::continuous("SNR", Role::Measurement),
        ]
    }

    #[test]
    fn partition_splits_by_role() {
        let (c, m, k) = partition_variables(&table2_specs());
        assert_eq!(c, vec!["p0_nominal", "pusch_TargetSNRx10"]);
        assert_eq!(m, vec!["UL_MCS", "RSRP", "SNR"]);
        assert_eq!(k, vec!["UL_Mbps", "UL_BLER"]);
    }

    #[test]
    fn partition_all_kpi() {
        let specs = vec![
            VariableSpec::continuous("a", Role::Kpi),
            VariableSpec::continuous("b", Role::Kpi),
        ];
        let (c, m, k) = partition_variables(&specs);
        assert!(c.is_empty());
        assert!(m.is_empty());
        assert_eq!(k, vec!["a", "b"]);
    }

    #[test]
    fn partition_measurements_keep_order() {
        let specs = vec![
            VariableSpec::continuous("SNR", Role::Measurement),
            VariableSpec::continuous("RSRP", Role::Measurement),
        ];
        let (_, m, _) = partition_variables(&specs);
        assert_eq!(m, vec!["SNR", "RSRP"]);
    }

    #[test]
    fn partition_covers_all_and_is_disjoint() {
        let specs = table2_specs();
        let (c, m, k) = partition_variables(&specs);
        assert_eq!(c.len() + m.len() + k.len(), specs.len());
        for name in specs.iter().map(|s| &s.name) {
            let hits = [&c, &m, &k]
                .iter()
                .filter(|list| list.contains(name))
                .count();
            assert_eq!(hits, 1);
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let specs = vec![
            VariableSpec::continuous("x", Role::Kpi),
            VariableSpec::continuous("x", Role::Kpi),
        ];
        assert!(validate_specs(&specs).is_err());
    }

    #[test]
    fn continuous_config_rejected() {
        let specs = vec![VariableSpec::continuous("p0", Role::Config)];
        assert!(validate_specs(&specs).is_err());
    }
}
