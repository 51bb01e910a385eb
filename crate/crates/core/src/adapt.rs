//! Continuous model adaptation: incremental CPD blending at short timescales
//! and full relearning at long timescales. The causal structure is never
//! touched by incremental updates.

use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::bn::{estimate_cpds, BayesianNetwork};
use crate::constraint::ConstraintSet;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::scoring::ScoreParams;
use crate::search::{hill_climb, SearchConfig};

/// When a full relearn replaces the incremental path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelearnTrigger {
    /// Relearn once accumulated new samples exceed the original training
    /// size.
    SampleCount,
    /// Only on explicit operator command.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateParams {
    /// Blend weight for the new estimate, in [0, 1].
    pub learning_rate: f64,
    pub full_relearn_trigger: RelearnTrigger,
    /// Pseudo-count used when estimating the new tables; keep equal to the
    /// alpha the base model was estimated with so blend components share
    /// support.
    pub alpha: f64,
}

impl Default for UpdateParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.2,
            full_relearn_trigger: RelearnTrigger::SampleCount,
            alpha: crate::bn::DEFAULT_ALPHA,
        }
    }
}

impl UpdateParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::Parameter(String::from(
                "learning rate must lie in [0, 1]",
            )));
        }
        if self.alpha < 0.0 {
            return Err(Error::Parameter(String::from("alpha must be nonnegative")));
        }
        Ok(())
    }
}

/// Outcome counters for one incremental update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateReport {
    pub updated_nodes: usize,
    /// Nodes whose fresh estimate had a different table shape and kept their
    /// original CPD.
    pub kept_nodes: usize,
    /// Table rows kept because their parent combination never appeared in the
    /// new batch (no estimate exists for them).
    pub kept_rows: usize,
    /// Largest absolute table change across all nodes.
    pub max_table_delta: f64,
}

/// Blends each node's CPD toward a fresh estimate from `new_data`:
/// `theta <- (1 - gamma) * theta + gamma * theta_new`, rows renormalized.
/// Structure is unchanged. A shape mismatch keeps the original table, and a
/// row whose parent combination was never observed in the batch keeps its
/// original values (the batch carries no estimate for it).
pub fn incremental_update(
    bn: &BayesianNetwork,
    new_data: &DiscreteDataset,
    params: &UpdateParams,
) -> Result<(BayesianNetwork, UpdateReport)> {
    params.validate()?;
    let gamma = params.learning_rate;
    let fresh = estimate_cpds(bn.dag(), new_data, params.alpha)?;
    let mut columns = alloc::vec::Vec::with_capacity(bn.n_nodes());
    for info in bn.nodes() {
        columns.push(new_data.column_index(&info.name)?);
    }
    let mut out = bn.clone();
    let mut report = UpdateReport::default();
    for v in 0..bn.n_nodes() {
        let old = bn.cpd(v);
        let new = fresh.cpd(v);
        if old.table.len() != new.table.len()
            || old.child_card != new.child_card
            || old.parent_cards != new.parent_cards
        {
            log::warn!(
                "shape mismatch for {}: keeping original CPD",
                bn.node(v).name
            );
            report.kept_nodes += 1;
            continue;
        }
        let observed = observed_parent_rows(bn, new_data, &columns, v);
        let r = old.child_card;
        let mut blended = old.table.clone();
        for (row, seen) in observed.iter().enumerate() {
            if !seen {
                report.kept_rows += 1;
                continue;
            }
            for s in 0..r {
                let i = row * r + s;
                blended[i] = (1.0 - gamma) * old.table[i] + gamma * new.table[i];
                let delta = libm::fabs(blended[i] - old.table[i]);
                if delta > report.max_table_delta {
                    report.max_table_delta = delta;
                }
            }
        }
        out = out.with_table(v, blended)?;
        report.updated_nodes += 1;
    }
    Ok((out, report))
}

/// Which parent-state combinations of node `v` appear in the batch.
fn observed_parent_rows(
    bn: &BayesianNetwork,
    data: &DiscreteDataset,
    columns: &[usize],
    v: usize,
) -> alloc::vec::Vec<bool> {
    let cpd = bn.cpd(v);
    let mut seen = alloc::vec![false; cpd.n_rows()];
    let parent_cols: alloc::vec::Vec<usize> =
        cpd.parents.iter().map(|&p| columns[p]).collect();
    for r in 0..data.n_rows() {
        let mut idx = 0usize;
        for (&pc, &card) in parent_cols.iter().zip(&cpd.parent_cards) {
            idx = idx * card + data.cell(r, pc);
        }
        seen[idx] = true;
    }
    seen
}

/// Relearns structure and parameters from scratch on the accumulated data,
/// replacing both.
pub fn full_relearn(
    all_data: &DiscreteDataset,
    delta: &ConstraintSet,
    score: &ScoreParams,
    search_cfg: &SearchConfig,
    alpha: f64,
) -> Result<BayesianNetwork> {
    let (dag, _) = hill_climb(all_data, delta, score, search_cfg)?;
    estimate_cpds(&dag, all_data, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpd::Cpd;
    use crate::dag::Dag;
    use crate::variable::{Role, VariableSpec};
    use alloc::vec;
    use alloc::vec::Vec;

    fn two_node_chain(p_b_given_a: [f64; 4]) -> BayesianNetwork {
        let mut dag = Dag::new(vec![String::from("a"), String::from("b")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.5, 0.5]).unwrap(),
            Cpd::new(1, vec![0], 2, vec![2], p_b_given_a.to_vec()).unwrap(),
        ];
        let nodes = [
            VariableSpec::discrete("a", Role::Measurement, &["0", "1"]),
            VariableSpec::discrete("b", Role::Measurement, &["0", "1"]),
        ]
        .iter()
        .map(crate::bn::NodeInfo::from)
        .collect();
        BayesianNetwork::new(dag, cpds, nodes).unwrap()
    }

    fn small_dataset() -> DiscreteDataset {
        let specs = vec![
            VariableSpec::discrete("a", Role::Measurement, &["0", "1"]),
            VariableSpec::discrete("b", Role::Measurement, &["0", "1"]),
        ];
        let rows = vec![0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 1, 0];
        DiscreteDataset::new(specs, rows).unwrap()
    }

    #[test]
    fn gamma_zero_is_identity() {
        let bn = two_node_chain([0.8, 0.2, 0.1, 0.9]);
        let params = UpdateParams {
            learning_rate: 0.0,
            ..UpdateParams::default()
        };
        let (updated, report) = incremental_update(&bn, &small_dataset(), &params).unwrap();
        for (a, b) in bn.cpds().iter().zip(updated.cpds()) {
            assert!(a.table.iter().zip(&b.table).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(report.updated_nodes, 2);
    }

    #[test]
    fn gamma_one_replaces_with_fresh_estimate() {
        let bn = two_node_chain([0.8, 0.2, 0.1, 0.9]);
        let data = small_dataset();
        let params = UpdateParams {
            learning_rate: 1.0,
            ..UpdateParams::default()
        };
        let (updated, _) = incremental_update(&bn, &data, &params).unwrap();
        let fresh = estimate_cpds(bn.dag(), &data, params.alpha).unwrap();
        for (a, b) in updated.cpds().iter().zip(fresh.cpds()) {
            for (x, y) in a.table.iter().zip(&b.table) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn half_blend_arithmetic() {
        // theta row [0.8, 0.2], theta_new row [0.4, 0.6], gamma 0.5 -> [0.6, 0.4].
        let old = [0.8f64, 0.2];
        let new = [0.4f64, 0.6];
        let blended: Vec<f64> = old
            .iter()
            .zip(&new)
            .map(|(&o, &n)| 0.5 * o + 0.5 * n)
            .collect();
        assert!((blended[0] - 0.6).abs() < 1e-15);
        assert!((blended[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn blend_is_convex_and_normalized() {
        let bn = two_node_chain([0.8, 0.2, 0.1, 0.9]);
        let data = small_dataset();
        let params = UpdateParams {
            learning_rate: 0.3,
            ..UpdateParams::default()
        };
        let fresh = estimate_cpds(bn.dag(), &data, params.alpha).unwrap();
        let (updated, _) = incremental_update(&bn, &data, &params).unwrap();
        for v in 0..2 {
            let rows = updated.cpd(v).table.chunks(2);
            for row in rows.clone() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
            }
            for ((&o, &n), &u) in bn
                .cpd(v)
                .table
                .iter()
                .zip(&fresh.cpd(v).table)
                .zip(&updated.cpd(v).table)
            {
                let (lo, hi) = if o <= n { (o, n) } else { (n, o) };
                assert!(u >= lo - 1e-12 && u <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn structure_is_immutable_under_update() {
        let bn = two_node_chain([0.8, 0.2, 0.1, 0.9]);
        let (updated, _) =
            incremental_update(&bn, &small_dataset(), &UpdateParams::default()).unwrap();
        assert_eq!(bn.dag(), updated.dag());
    }

    #[test]
    fn invalid_gamma_rejected() {
        let params = UpdateParams {
            learning_rate: 1.5,
            ..UpdateParams::default()
        };
        assert!(params.validate().is_err());
    }
}
