//! Decomposable structure scores and the constraint-enhanced composite.
//!
//! The composite score of a candidate graph is the sum of per-node base
//! scores (BIC, K2 or BDeu, all natural-log) plus reward/penalty terms for
//! elicited mandatory and prohibited edges. Base scores depend only on
//! (child, parent set), which the cache exploits during search.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::dag::Dag;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::math::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseScore {
    Bic,
    K2,
    Bdeu,
}

/// How elicited constraints steer the search: `Hard` restricts the move set
/// so mandatory edges stay and prohibited edges never appear; `Soft` leaves
/// moves unrestricted and lets the reward/penalty terms do the steering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintMode {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub base: BaseScore,
    /// Equivalent sample size for BDeu.
    pub bdeu_ess: f64,
    pub alpha_reward: f64,
    pub alpha_penalty: f64,
    pub beta_penalty: f64,
    pub mode: ConstraintMode,
}

impl ScoreParams {
    /// Hard-constraint defaults: constraints are enforced by the move set,
    /// with reward/penalty terms retained for reporting.
    pub fn hard(base: BaseScore, n_rows: usize) -> Self {
        let ln_n = if n_rows > 1 { libm::log(n_rows as f64) } else { 1.0 };
        Self {
            base,
            bdeu_ess: 1.0,
            alpha_reward: 2.0 * ln_n,
            alpha_penalty: 2.0 * ln_n,
            beta_penalty: 10.0 * ln_n,
            mode: ConstraintMode::Hard,
        }
    }

    /// Soft-constraint variant with data-scaled terms, for low-confidence
    /// constraint sets.
    pub fn soft(base: BaseScore, n_rows: usize) -> Self {
        Self {
            mode: ConstraintMode::Soft,
            ..Self::hard(base, n_rows)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bdeu_ess > 0.0) {
            return Err(Error::Parameter(String::from("bdeu_ess must be positive")));
        }
        for (name, v) in [
            ("alpha_reward", self.alpha_reward),
            ("alpha_penalty", self.alpha_penalty),
            ("beta_penalty", self.beta_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(alloc::format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }
}

/// Joint counts of (parent combination, child state). Rows index parent
/// combinations in mixed-radix order, first parent most significant.
struct CountTable {
    counts: Vec<f64>,
    child_card: usize,
    n_parent_rows: usize,
}

fn count_table(data: &DiscreteDataset, child: usize, parents: &[usize]) -> CountTable {
    let child_card = data.cardinality(child);
    let parent_cards: Vec<usize> = parents.iter().map(|&p| data.cardinality(p)).collect();
    let n_parent_rows: usize = parent_cards.iter().product();
    let mut counts = alloc::vec![0.0f64; n_parent_rows * child_card];
    for r in 0..data.n_rows() {
        let row = data.row(r);
        let mut idx = 0usize;
        for (&p, &card) in parents.iter().zip(&parent_cards) {
            idx = idx * card + row[p] as usize;
        }
        counts[idx * child_card + row[child] as usize] += 1.0;
    }
    CountTable {
        counts,
        child_card,
        n_parent_rows,
    }
}

/// BIC local score: maximum-likelihood log-likelihood of the child given its
/// parents minus (ln N / 2) * (r - 1) * q, with 0 log 0 = 0.
pub fn bic_local(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    let n = data.n_rows();
    if n == 0 {
        return 0.0;
    }
    let t = count_table(data, child, parents);
    let mut ll = 0.0;
    for row in 0..t.n_parent_rows {
        let slice = &t.counts[row * t.child_card..(row + 1) * t.child_card];
        let total: f64 = slice.iter().sum();
        if total == 0.0 {
            continue;
        }
        for &c in slice {
            if c > 0.0 {
                ll += c * libm::log(c / total);
            }
        }
    }
    let penalty =
        libm::log(n as f64) / 2.0 * (t.child_card as f64 - 1.0) * t.n_parent_rows as f64;
    ll - penalty
}

/// K2 local score: Cooper-Herskovits log marginal likelihood under uniform
/// Dirichlet(1) priors.
pub fn k2_local(data: &DiscreteDataset, child: usize, parents: &[usize]) -> f64 {
    let t = count_table(data, child, parents);
    let r = t.child_card as f64;
    let mut score = 0.0;
    for row in 0..t.n_parent_rows {
        let slice = &t.counts[row * t.child_card..(row + 1) * t.child_card];
        let total: f64 = slice.iter().sum();
        if total == 0.0 {
            continue;
        }
        score += ln_gamma(r) - ln_gamma(r + total);
        for &c in slice {
            score += ln_gamma(c + 1.0);
        }
    }
    score
}

/// BDeu local score with Dirichlet hyperparameters ess / (q * r) per cell.
pub fn bdeu_local(data: &DiscreteDataset, child: usize, parents: &[usize], ess: f64) -> f64 {
    debug_assert!(ess > 0.0);
    let t = count_table(data, child, parents);
    let q = t.n_parent_rows as f64;
    let r = t.child_card as f64;
    let row_prior = ess / q;
    let cell_prior = ess / (q * r);
    let mut score = 0.0;
    for row in 0..t.n_parent_rows {
        let slice = &t.counts[row * t.child_card..(row + 1) * t.child_card];
        let total: f64 = slice.iter().sum();
        if total == 0.0 {
            continue;
        }
        score += ln_gamma(row_prior) - ln_gamma(row_prior + total);
        for &c in slice {
            score += ln_gamma(cell_prior + c) - ln_gamma(cell_prior);
        }
    }
    score
}

/// Dispatches to the configured base score.
pub fn base_local(
    data: &DiscreteDataset,
    params: &ScoreParams,
    child: usize,
    parents: &[usize],
) -> f64 {
    match params.base {
        BaseScore::Bic => bic_local(data, child, parents),
        BaseScore::K2 => k2_local(data, child, parents),
        BaseScore::Bdeu => bdeu_local(data, child, parents, params.bdeu_ess),
    }
}

/// Contribution of one directed edge's presence to the constraint score,
/// relative to its absence.
pub(crate) fn presence_delta(edge: (&str, &str), delta: &ConstraintSet, params: &ScoreParams) -> f64 {
    let mut d = 0.0;
    if delta.is_mandatory(edge.0, edge.1) {
        d += params.alpha_reward + params.alpha_penalty;
    }
    if delta.is_prohibited(edge.0, edge.1) {
        d -= params.beta_penalty;
    }
    d
}

/// Constraint score: sum over mandatory edges of
/// `present * alpha_reward - absent * alpha_penalty`, minus `beta_penalty`
/// for every prohibited edge present in the graph. Data-independent.
pub fn llm_score(dag: &Dag, delta: &ConstraintSet, params: &ScoreParams) -> f64 {
    let present = |s: &str, t: &str| {
        match (dag.node_index(s), dag.node_index(t)) {
            (Ok(u), Ok(v)) => dag.has_edge(u, v),
            _ => false,
        }
    };
    let mut score = 0.0;
    for (s, t) in &delta.mandatory {
        if present(s, t) {
            score += params.alpha_reward;
        } else {
            score -= params.alpha_penalty;
        }
    }
    for (s, t) in &delta.prohibited {
        if present(s, t) {
            score -= params.beta_penalty;
        }
    }
    score
}

/// Cache of base local scores keyed by (child, sorted parent set). Valid for
/// one (dataset, score parameters) pair; the owner creates a fresh cache per
/// search run.
#[derive(Debug, Default)]
pub struct LocalScoreCache {
    map: BTreeMap<(usize, Vec<usize>), f64>,
    pub hits: u64,
    pub misses: u64,
}

impl LocalScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Base local score for (child | parents), served from cache when seen
    /// before. `parents` must be sorted ascending.
    pub fn local(
        &mut self,
        data: &DiscreteDataset,
        params: &ScoreParams,
        child: usize,
        parents: &[usize],
    ) -> f64 {
        debug_assert!(parents.windows(2).all(|w| w[0] < w[1]));
        if let Some(&v) = self.map.get(&(child, parents.to_vec())) {
            self.hits += 1;
            return v;
        }
        self.misses += 1;
        let v = base_local(data, params, child, parents);
        self.map.insert((child, parents.to_vec()), v);
        v
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Composite structure score: sum of base locals over all nodes plus the
/// constraint score. Dag nodes are resolved to dataset columns by name.
pub fn total_score(
    dag: &Dag,
    data: &DiscreteDataset,
    delta: &ConstraintSet,
    params: &ScoreParams,
    cache: &mut LocalScoreCache,
) -> Result<f64> {
    let mut columns = Vec::with_capacity(dag.n_nodes());
    for name in dag.nodes() {
        columns.push(data.column_index(name)?);
    }
    let mut score = 0.0;
    for v in 0..dag.n_nodes() {
        let mut parents: Vec<usize> = dag.parents(v).iter().map(|&p| columns[p]).collect();
        parents.sort_unstable();
        score += cache.local(data, params, columns[v], &parents);
    }
    Ok(score + llm_score(dag, delta, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variable::{Role, VariableSpec};
    use alloc::vec;

    fn dataset(names: &[&str], cards: &[usize], rows: Vec<u8>) -> DiscreteDataset {
        let specs: Vec<VariableSpec> = names
            .iter()
            .zip(cards)
            .map(|(n, &c)| {
                let states: Vec<String> = (0..c).map(|i| alloc::format!("{i}")).collect();
                let refs: Vec<&str> = states.iter().map(String::as_str).collect();
                VariableSpec::discrete(n, Role::Measurement, &refs)
            })
            .collect();
        DiscreteDataset::new(specs, rows).unwrap()
    }

    // Hand-computed: LL = 3 ln 0.75 + ln 0.25, penalty = (ln 4)/2.
    #[test]
    fn bic_no_parent_hand_value() {
        let data = dataset(&["x"], &[2], vec![1, 1, 1, 0]);
        let expect = 3.0 * (0.75f64).ln() + (0.25f64).ln() - (4.0f64).ln() / 2.0;
        assert!((bic_local(&data, 0, &[]) - expect).abs() < 1e-12);
        assert!((expect - (-2.9424877590351786)).abs() < 1e-12);
    }

    #[test]
    fn bic_deterministic_child_zero_likelihood() {
        // Child identical to its single parent: LL = 0, score = -(ln N)/2 * q.
        let data = dataset(&["p", "c"], &[2, 2], vec![0, 0, 1, 1, 0, 0, 1, 1]);
        let score = bic_local(&data, 1, &[0]);
        let expect = -(4.0f64).ln() / 2.0 * 2.0;
        assert!((score - expect).abs() < 1e-12);
    }

    #[test]
    fn likelihood_component_monotone_in_parents() {
        // Adding a parent never lowers the ML log-likelihood part. Compare
        // scores with the penalty removed.
        let rows = vec![
            0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1,
        ];
        let data = dataset(&["a", "b", "c"], &[2, 2, 2], rows);
        let n = data.n_rows() as f64;
        let pen = |q: f64| n.ln() / 2.0 * q;
        let ll_small = bic_local(&data, 2, &[0]) + pen(2.0);
        let ll_big = bic_local(&data, 2, &[0, 1]) + pen(4.0);
        assert!(ll_big >= ll_small - 1e-12);
    }

    // Hand-computed closed form: ln GAMMA(2) - ln GAMMA(4) + 2 ln GAMMA(2) = -ln 6.
    #[test]
    fn k2_two_row_hand_value() {
        let data = dataset(&["x"], &[2], vec![1, 0]);
        assert!((k2_local(&data, 0, &[]) - (-(6.0f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn k2_empty_dataset_scores_zero() {
        let data = dataset(&["x"], &[2], vec![]);
        assert_eq!(k2_local(&data, 0, &[]), 0.0);
    }

    #[test]
    fn k2_is_not_score_equivalent() {
        // Asymmetric data over two variables: totals for A->B and B->A differ.
        let rows = vec![
            0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1,
        ];
        let data = dataset(&["a", "b"], &[2, 2], rows);
        let a_to_b = k2_local(&data, 0, &[]) + k2_local(&data, 1, &[0]);
        let b_to_a = k2_local(&data, 1, &[]) + k2_local(&data, 0, &[1]);
        assert!((a_to_b - b_to_a).abs() > 1e-6);
    }

    // Hand-computed: ln GAMMA(1) - ln GAMMA(3) + 2 (ln GAMMA(1.5) - ln GAMMA(0.5)) = -3 ln 2.
    #[test]
    fn bdeu_two_row_hand_value() {
        let data = dataset(&["x"], &[2], vec![1, 0]);
        assert!((bdeu_local(&data, 0, &[], 1.0) - (-3.0 * (2.0f64).ln())).abs() < 1e-12);
    }

    #[test]
    fn bdeu_score_equivalence_on_reversed_edge() {
        let rows = vec![
            0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 1,
        ];
        let data = dataset(&["a", "b"], &[2, 2], rows);
        for ess in [1.0, 2.0, 10.0] {
            let a_to_b = bdeu_local(&data, 0, &[], ess) + bdeu_local(&data, 1, &[0], ess);
            let b_to_a = bdeu_local(&data, 1, &[], ess) + bdeu_local(&data, 0, &[1], ess);
            assert!(
                (a_to_b - b_to_a).abs() < 1e-9,
                "ess={ess}: {a_to_b} vs {b_to_a}"
            );
        }
    }

    fn two_node_dag(edge: Option<(&str, &str)>) -> Dag {
        let mut dag = Dag::new(vec![String::from("A"), String::from("B")]);
        if let Some((u, v)) = edge {
            dag.add_edge_by_name(u, v).unwrap();
        }
        dag
    }

    fn params_with(reward: f64, penalty: f64, beta: f64) -> ScoreParams {
        ScoreParams {
            base: BaseScore::Bic,
            bdeu_ess: 1.0,
            alpha_reward: reward,
            alpha_penalty: penalty,
            beta_penalty: beta,
            mode: ConstraintMode::Soft,
        }
    }

    #[test]
    fn llm_score_empty_delta_is_zero() {
        let dag = two_node_dag(Some(("A", "B")));
        let params = params_with(10.0, 10.0, 1000.0);
        assert_eq!(llm_score(&dag, &ConstraintSet::empty(), &params), 0.0);
    }

    #[test]
    fn llm_score_mandatory_reward_and_penalty() {
        let specs = vec![
            VariableSpec::continuous("A", Role::Measurement),
            VariableSpec::continuous("B", Role::Measurement),
        ];
        let delta = ConstraintSet::from_edges(&[("A", "B")], &[], &specs).unwrap();
        let params = params_with(10.0, 10.0, 1000.0);
        assert_eq!(llm_score(&two_node_dag(Some(("A", "B"))), &delta, &params), 10.0);
        assert_eq!(llm_score(&two_node_dag(None), &delta, &params), -10.0);
    }

    #[test]
    fn llm_score_prohibited_penalty() {
        let specs = vec![
            VariableSpec::continuous("A", Role::Measurement),
            VariableSpec::continuous("B", Role::Measurement),
        ];
        let delta = ConstraintSet::from_edges(&[], &[("B", "A")], &specs).unwrap();
        let params = params_with(10.0, 10.0, 1000.0);
        assert_eq!(llm_score(&two_node_dag(Some(("B", "A"))), &delta, &params), -1000.0);
        assert_eq!(llm_score(&two_node_dag(None), &delta, &params), 0.0);
    }

    #[test]
    fn total_score_reduces_to_base_without_constraints() {
        let rows = vec![0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1];
        let data = dataset(&["A", "B"], &[2, 2], rows);
        let dag = two_node_dag(Some(("A", "B")));
        let params = ScoreParams::hard(BaseScore::Bic, data.n_rows());
        let mut cache = LocalScoreCache::new();
        let total = total_score(&dag, &data, &ConstraintSet::empty(), &params, &mut cache).unwrap();
        let base = bic_local(&data, 0, &[]) + bic_local(&data, 1, &[0]);
        assert_eq!(total, base);
    }

    #[test]
    fn cache_is_transparent() {
        let rows = vec![0, 0, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1];
        let data = dataset(&["A", "B"], &[2, 2], rows);
        let dag = two_node_dag(Some(("A", "B")));
        let params = ScoreParams::hard(BaseScore::K2, data.n_rows());
        let mut cache = LocalScoreCache::new();
        let first = total_score(&dag, &data, &ConstraintSet::empty(), &params, &mut cache).unwrap();
        let second = total_score(&dag, &data, &ConstraintSet::empty(), &params, &mut cache).unwrap();
        assert_eq!(first.to_bits(), second.to_bits());
        assert!(cache.hits >= 2);
    }

    #[test]
    fn decomposability_changing_one_parent_set_changes_one_term() {
        let rows = vec![
            0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 1,
        ];
        let data = dataset(&["a", "b", "c"], &[2, 2, 2], rows);
        let params = ScoreParams::hard(BaseScore::Bic, data.n_rows());
        let mut cache = LocalScoreCache::new();
        let mut dag = Dag::new(vec![String::from("a"), String::from("b"), String::from("c")]);
        dag.add_edge(0, 2).unwrap();
        let before = total_score(&dag, &data, &ConstraintSet::empty(), &params, &mut cache).unwrap();
        let mut dag2 = dag.clone();
        dag2.add_edge(1, 2).unwrap();
        let after = total_score(&dag2, &data, &ConstraintSet::empty(), &params, &mut cache).unwrap();
        let local_delta = bic_local(&data, 2, &[0, 1]) - bic_local(&data, 2, &[0]);
        assert!((after - before - local_delta).abs() < 1e-12);
    }
}
