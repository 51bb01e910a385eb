//! Exact inference and configuration recommendation.
//!
//! Posteriors come from variable elimination with a min-fill ordering,
//! validated against a brute-force enumeration of the factorized joint.
//! Recommendation scores every candidate configuration by weighted expected
//! KPI utility and returns the maximizer with uncertainty metrics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::bn::BayesianNetwork;
use crate::error::{Error, Result};
use crate::variable::{Direction, Role};

/// Default cap on the joint state space the brute-force enumerator will walk.
pub const ENUMERATION_GUARD: u64 = 1 << 20;

/// Observed states for a subset of variables, keyed by node index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    assignments: BTreeMap<usize, usize>,
}

impl Evidence {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_states(pairs: &[(usize, usize)]) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for &(node, state) in pairs {
            if assignments.insert(node, state).is_some() {
                return Err(Error::Parameter(alloc::format!(
                    "variable {node} assigned twice"
                )));
            }
        }
        Ok(Self { assignments })
    }

    /// Builds evidence from (name, state label) pairs resolved against the
    /// network.
    pub fn from_labels(bn: &BayesianNetwork, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        for &(name, label) in pairs {
            let node = bn.node_index(name)?;
            let state = bn.state_index(node, label)?;
            if assignments.insert(node, state).is_some() {
                return Err(Error::Parameter(alloc::format!(
                    "variable {name} assigned twice"
                )));
            }
        }
        Ok(Self { assignments })
    }

    pub fn set(&mut self, node: usize, state: usize) {
        self.assignments.insert(node, state);
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.assignments.get(&node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignments.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Splits into the config part and the measurement part by node role.
    pub fn partition(&self, bn: &BayesianNetwork) -> (Evidence, Evidence) {
        let mut config = Evidence::empty();
        let mut measurement = Evidence::empty();
        for (node, state) in self.iter() {
            match bn.node(node).role {
                Role::Config => config.set(node, state),
                _ => measurement.set(node, state),
            }
        }
        (config, measurement)
    }

    /// Union of two evidence sets; later assignments must not clash.
    pub fn merged(&self, other: &Evidence) -> Result<Evidence> {
        let mut out = self.clone();
        for (node, state) in other.iter() {
            if let Some(existing) = out.get(node) {
                if existing != state {
                    return Err(Error::Parameter(alloc::format!(
                        "variable {node} assigned twice"
                    )));
                }
            }
            out.set(node, state);
        }
        Ok(out)
    }

    pub fn validate(&self, bn: &BayesianNetwork) -> Result<()> {
        for (node, state) in self.iter() {
            if node >= bn.n_nodes() || state >= bn.cardinality(node) {
                return Err(Error::Parameter(alloc::format!(
                    "evidence ({node}, {state}) out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Posterior distribution of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub variable: String,
    pub probs: Vec<f64>,
}

impl Posterior {
    /// Largest state probability (prediction certainty).
    pub fn confidence(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Shannon entropy normalized by ln(state count), in [0, 1].
    pub fn normalized_entropy(&self) -> f64 {
        if self.probs.len() < 2 {
            return 0.0;
        }
        let mut h = 0.0;
        for &p in &self.probs {
            if p > 0.0 {
                h -= p * libm::log(p);
            }
        }
        h / libm::log(self.probs.len() as f64)
    }
}

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

/// Dense factor over a sorted variable scope. Table is mixed-radix row-major
/// with the first scope variable most significant.
#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    fn from_cpd(bn: &BayesianNetwork, node: usize) -> Factor {
        let cpd = bn.cpd(node);
        let mut vars: Vec<usize> = cpd.parents.clone();
        vars.push(node);
        vars.sort_unstable();
        let cards: Vec<usize> = vars.iter().map(|&v| bn.cardinality(v)).collect();
        let size: usize = cards.iter().product();
        let mut table = alloc::vec![0.0; size];
        let mut assignment = alloc::vec![0usize; vars.len()];
        for (linear, slot) in table.iter_mut().enumerate() {
            decode(linear, &cards, &mut assignment);
            let parent_states: Vec<usize> = cpd
                .parents
                .iter()
                .map(|p| assignment[vars.iter().position(|v| v == p).unwrap()])
                .collect();
            let child_state = assignment[vars.iter().position(|v| *v == node).unwrap()];
            *slot = cpd.prob(&parent_states, child_state);
        }
        Factor { vars, cards, table }
    }

    /// Fixes a variable to a state and drops it from the scope.
    fn restrict(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        vars.remove(pos);
        let mut cards = self.cards.clone();
        let removed_card = cards.remove(pos);
        let size: usize = cards.iter().product();
        let mut table = alloc::vec![0.0; size];
        let mut assignment = alloc::vec![0usize; vars.len()];
        for (linear, slot) in table.iter_mut().enumerate() {
            decode(linear, &cards, &mut assignment);
            let mut full = Vec::with_capacity(self.vars.len());
            full.extend_from_slice(&assignment[..pos]);
            full.push(state);
            full.extend_from_slice(&assignment[pos..]);
            *slot = self.table[encode(&full, &self.cards)];
        }
        let _ = removed_card;
        Factor { vars, cards, table }
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        for &v in &other.vars {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let cards: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map(|i| self.cards[i])
                    .unwrap_or_else(|| {
                        let i = other.vars.iter().position(|x| x == v).unwrap();
                        other.cards[i]
                    })
            })
            .collect();
        let size: usize = cards.iter().product();
        let mut table = alloc::vec![0.0; size];
        let mut assignment = alloc::vec![0usize; vars.len()];
        for (linear, slot) in table.iter_mut().enumerate() {
            decode(linear, &cards, &mut assignment);
            let a = self.index_of(&vars, &assignment);
            let b = other.index_of(&vars, &assignment);
            *slot = self.table[a] * other.table[b];
        }
        Factor { vars, cards, table }
    }

    /// Index into this factor's table for an assignment over a superset
    /// scope.
    fn index_of(&self, scope: &[usize], assignment: &[usize]) -> usize {
        let mut idx = 0;
        for (i, &v) in self.vars.iter().enumerate() {
            let pos = scope.iter().position(|x| *x == v).unwrap();
            idx = idx * self.cards[i] + assignment[pos];
        }
        idx
    }

    fn sum_out(&self, var: usize) -> Factor {
        let pos = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable not in scope");
        let mut vars = self.vars.clone();
        vars.remove(pos);
        let mut cards = self.cards.clone();
        let removed_card = cards.remove(pos);
        let size: usize = cards.iter().product();
        let mut table = alloc::vec![0.0; size];
        let mut assignment = alloc::vec![0usize; vars.len()];
        for (linear, slot) in table.iter_mut().enumerate() {
            decode(linear, &cards, &mut assignment);
            let mut full = Vec::with_capacity(self.vars.len());
            full.extend_from_slice(&assignment[..pos]);
            full.push(0);
            full.extend_from_slice(&assignment[pos..]);
            let mut sum = 0.0;
            for s in 0..removed_card {
                full[pos] = s;
                sum += self.table[encode(&full, &self.cards)];
            }
            *slot = sum;
        }
        Factor { vars, cards, table }
    }
}

#[inline]
fn decode(mut linear: usize, cards: &[usize], out: &mut [usize]) {
    for i in (0..cards.len()).rev() {
        out[i] = linear % cards[i];
        linear /= cards[i];
    }
}

#[inline]
fn encode(assignment: &[usize], cards: &[usize]) -> usize {
    let mut idx = 0;
    for (&s, &c) in assignment.iter().zip(cards) {
        idx = idx * c + s;
    }
    idx
}

// ---------------------------------------------------------------------------
// Posterior computation
// ---------------------------------------------------------------------------

/// Brute-force posterior by enumerating the factorized joint. Guarded by the
/// size of the remaining state space; oracle for [`eliminate`].
pub fn enumerate_posterior(
    bn: &BayesianNetwork,
    query: usize,
    evidence: &Evidence,
) -> Result<Posterior> {
    enumerate_posterior_guarded(bn, query, evidence, ENUMERATION_GUARD)
}

/// [`enumerate_posterior`] with an explicit state-space cap.
pub fn enumerate_posterior_guarded(
    bn: &BayesianNetwork,
    query: usize,
    evidence: &Evidence,
    guard: u64,
) -> Result<Posterior> {
    evidence.validate(bn)?;
    if query >= bn.n_nodes() {
        return Err(Error::Parameter(alloc::format!("query node {query} out of range")));
    }
    let n = bn.n_nodes();
    let free: Vec<usize> = (0..n).filter(|v| evidence.get(*v).is_none()).collect();
    let mut space = 1u64;
    for &v in &free {
        space = space.saturating_mul(bn.cardinality(v) as u64);
        if space > guard {
            return Err(Error::TooLarge { size: space, limit: guard });
        }
    }

    let card = bn.cardinality(query);
    let mut buckets = alloc::vec![0.0f64; card];
    let mut assignment = alloc::vec![0usize; n];
    for (v, s) in evidence.iter() {
        assignment[v] = s;
    }
    let mut counters = alloc::vec![0usize; free.len()];
    loop {
        for (i, &v) in free.iter().enumerate() {
            assignment[v] = counters[i];
        }
        let p = bn.factorized_joint(&assignment)?;
        buckets[assignment[query]] += p;

        // Odometer over the free variables.
        let mut i = free.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < bn.cardinality(free[i]) {
                break;
            }
            counters[i] = 0;
            if i == 0 {
                let total: f64 = buckets.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ZeroEvidence);
                }
                for b in &mut buckets {
                    *b /= total;
                }
                return Ok(Posterior {
                    variable: String::from(&bn.node(query).name),
                    probs: buckets,
                });
            }
        }
        if free.is_empty() {
            let total: f64 = buckets.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroEvidence);
            }
            for b in &mut buckets {
                *b /= total;
            }
            return Ok(Posterior {
                variable: String::from(&bn.node(query).name),
                probs: buckets,
            });
        }
    }
}

/// Exact posterior via variable elimination with a min-fill ordering.
/// Matches [`enumerate_posterior`] to within 1e-9 everywhere.
pub fn eliminate(bn: &BayesianNetwork, query: usize, evidence: &Evidence) -> Result<Posterior> {
    evidence.validate(bn)?;
    if query >= bn.n_nodes() {
        return Err(Error::Parameter(alloc::format!("query node {query} out of range")));
    }
    if evidence.get(query).is_some() {
        return Err(Error::Parameter(String::from(
            "query variable must not be part of the evidence",
        )));
    }

    let mut factors: Vec<Factor> = (0..bn.n_nodes()).map(|v| Factor::from_cpd(bn, v)).collect();
    for (v, s) in evidence.iter() {
        factors = factors.into_iter().map(|f| f.restrict(v, s)).collect();
    }

    let mut to_eliminate: Vec<usize> = (0..bn.n_nodes())
        .filter(|&v| v != query && evidence.get(v).is_none())
        .collect();

    while !to_eliminate.is_empty() {
        let var = next_min_fill(&factors, &to_eliminate);
        to_eliminate.retain(|&v| v != var);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.vars.contains(&var));
        let mut product: Option<Factor> = None;
        for f in touching {
            product = Some(match product {
                None => f,
                Some(p) => p.product(&f),
            });
        }
        factors = rest;
        if let Some(p) = product {
            factors.push(p.sum_out(var));
        }
    }

    let mut result: Option<Factor> = None;
    for f in factors {
        result = Some(match result {
            None => f,
            Some(r) => r.product(&f),
        });
    }
    let result = result.ok_or(Error::ZeroEvidence)?;
    debug_assert_eq!(result.vars, alloc::vec![query]);
    let total: f64 = result.table.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let probs: Vec<f64> = result.table.iter().map(|&p| p / total).collect();
    Ok(Posterior {
        variable: String::from(&bn.node(query).name),
        probs,
    })
}

/// Min-fill heuristic: eliminate the variable whose removal adds the fewest
/// interaction edges; ties fall to the smallest index.
fn next_min_fill(factors: &[Factor], candidates: &[usize]) -> usize {
    let mut best = candidates[0];
    let mut best_fill = usize::MAX;
    for &v in candidates {
        let mut neighbors: Vec<usize> = Vec::new();
        for f in factors.iter().filter(|f| f.vars.contains(&v)) {
            for &u in &f.vars {
                if u != v && !neighbors.contains(&u) {
                    neighbors.push(u);
                }
            }
        }
        let mut fill = 0;
        for (i, &a) in neighbors.iter().enumerate() {
            for &b in &neighbors[i + 1..] {
                let connected = factors
                    .iter()
                    .any(|f| f.vars.contains(&a) && f.vars.contains(&b));
                if !connected {
                    fill += 1;
                }
            }
        }
        if fill < best_fill {
            best_fill = fill;
            best = v;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Utility and recommendation
// ---------------------------------------------------------------------------

/// Utility entry for one KPI: a nonnegative importance weight and a utility
/// value per discrete state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiUtility {
    pub kpi: String,
    pub weight: f64,
    pub table: Vec<f64>,
}

/// Weighted multi-KPI utility specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub entries: Vec<KpiUtility>,
    /// Scores within this absolute distance count as tied when ranking
    /// runner-ups (the lower-entropy candidate ranks first).
    pub tie_tolerance: f64,
}

impl UtilitySpec {
    /// Default utility over the network's KPI nodes: benefit KPIs map state s
    /// to s/(K-1), cost KPIs to -s/(K-1), all weights 1. `directions` gives
    /// the per-KPI direction (by name); missing names default to benefit.
    pub fn default_for(bn: &BayesianNetwork, directions: &BTreeMap<String, Direction>) -> Self {
        let mut entries = Vec::new();
        for node in bn.nodes_with_role(Role::Kpi) {
            let name = &bn.node(node).name;
            let k = bn.cardinality(node);
            let direction = directions
                .get(name)
                .copied()
                .unwrap_or(Direction::Benefit);
            let sign = match direction {
                Direction::Cost => -1.0,
                _ => 1.0,
            };
            let table: Vec<f64> = (0..k)
                .map(|s| {
                    if k == 1 {
                        sign
                    } else {
                        sign * s as f64 / (k as f64 - 1.0)
                    }
                })
                .collect();
            entries.push(KpiUtility {
                kpi: name.clone(),
                weight: 1.0,
                table,
            });
        }
        Self {
            entries,
            tie_tolerance: 1e-6,
        }
    }

    pub fn validate(&self, bn: &BayesianNetwork) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Parameter(String::from("utility needs at least one KPI")));
        }
        if !self.entries.iter().any(|e| e.weight > 0.0) {
            return Err(Error::Parameter(String::from(
                "utility needs at least one positive weight",
            )));
        }
        for e in &self.entries {
            if e.weight < 0.0 {
                return Err(Error::Parameter(alloc::format!(
                    "negative weight for {}",
                    e.kpi
                )));
            }
            let node = bn.node_index(&e.kpi)?;
            if e.table.len() != bn.cardinality(node) {
                return Err(Error::Parameter(alloc::format!(
                    "utility table for {} covers {} of {} states",
                    e.kpi,
                    e.table.len(),
                    bn.cardinality(node)
                )));
            }
        }
        Ok(())
    }
}

/// Expected utility of a posterior under a per-state utility table.
pub fn expected_utility(posterior: &Posterior, table: &[f64]) -> Result<f64> {
    if table.len() != posterior.probs.len() {
        return Err(Error::Parameter(alloc::format!(
            "utility table covers {} of {} states",
            table.len(),
            posterior.probs.len()
        )));
    }
    Ok(posterior
        .probs
        .iter()
        .zip(table)
        .map(|(&p, &f)| p * f)
        .sum())
}

/// Mean prediction certainty and mean normalized entropy over a set of KPI
/// posteriors.
pub fn confidence_entropy(posteriors: &[Posterior]) -> Result<(f64, f64)> {
    if posteriors.is_empty() {
        return Err(Error::Parameter(String::from("no posteriors given")));
    }
    let n = posteriors.len() as f64;
    let confidence = posteriors.iter().map(Posterior::confidence).sum::<f64>() / n;
    let entropy = posteriors
        .iter()
        .map(Posterior::normalized_entropy)
        .sum::<f64>()
        / n;
    Ok((confidence, entropy))
}

/// One full assignment of the configuration variables, as sorted
/// (node, state) pairs.
pub type ConfigAssignment = Vec<(usize, usize)>;

/// The candidate configuration grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationSpace {
    assignments: Vec<ConfigAssignment>,
}

impl ConfigurationSpace {
    pub fn new(assignments: Vec<ConfigAssignment>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Parameter(String::from("configuration space is empty")));
        }
        let mut seen = alloc::collections::BTreeSet::new();
        for a in &assignments {
            if a.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::Parameter(String::from(
                    "assignments must be sorted by node with unique nodes",
                )));
            }
            if !seen.insert(a.clone()) {
                return Err(Error::Parameter(String::from(
                    "duplicate configuration in space",
                )));
            }
        }
        Ok(Self { assignments })
    }

    /// Full cartesian grid over the network's config variables, enumerated
    /// with the first config variable most significant.
    pub fn full_grid(bn: &BayesianNetwork) -> Result<Self> {
        let config_nodes = bn.nodes_with_role(Role::Config);
        if config_nodes.is_empty() {
            return Err(Error::Parameter(String::from(
                "network has no config variables",
            )));
        }
        let cards: Vec<usize> = config_nodes.iter().map(|&v| bn.cardinality(v)).collect();
        let total: usize = cards.iter().product();
        let mut assignments = Vec::with_capacity(total);
        let mut states = alloc::vec![0usize; config_nodes.len()];
        for linear in 0..total {
            decode(linear, &cards, &mut states);
            assignments.push(config_nodes.iter().copied().zip(states.iter().copied()).collect());
        }
        Self::new(assignments)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConfigAssignment> {
        self.assignments.iter()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Expected utility of one KPI under a candidate configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiOutcome {
    pub kpi: String,
    pub posterior: Vec<f64>,
    pub expected_utility: f64,
}

/// A scored candidate in the ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedConfig {
    pub config: BTreeMap<String, String>,
    pub score: f64,
    pub confidence: f64,
    pub entropy: f64,
}

/// The chosen configuration with its score decomposition, uncertainty
/// metrics and the ranked runner-up list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub config: BTreeMap<String, String>,
    pub score: f64,
    pub per_kpi: Vec<KpiOutcome>,
    pub confidence: f64,
    pub entropy: f64,
    pub runners_up: Vec<RankedConfig>,
}

struct Candidate {
    assignment: ConfigAssignment,
    score: f64,
    outcomes: Vec<KpiOutcome>,
    confidence: f64,
    entropy: f64,
}

/// Scores every configuration in the space by summed weighted expected KPI
/// utility given the measurement evidence, and returns the maximizer
/// (ties broken lexicographically over config assignments).
pub fn recommend(
    bn: &BayesianNetwork,
    omega: &ConfigurationSpace,
    measurements: &Evidence,
    util: &UtilitySpec,
) -> Result<Recommendation> {
    util.validate(bn)?;
    measurements.validate(bn)?;
    let kpi_nodes: Vec<usize> = util
        .entries
        .iter()
        .map(|e| bn.node_index(&e.kpi))
        .collect::<Result<_>>()?;

    let mut candidates: Vec<Candidate> = Vec::with_capacity(omega.len());
    for assignment in omega.iter() {
        let mut evidence = measurements.clone();
        for &(node, state) in assignment {
            if node >= bn.n_nodes() || state >= bn.cardinality(node) {
                return Err(Error::Parameter(String::from(
                    "configuration assignment out of range",
                )));
            }
            evidence.set(node, state);
        }
        let mut score = 0.0;
        let mut outcomes = Vec::with_capacity(kpi_nodes.len());
        let mut posteriors = Vec::with_capacity(kpi_nodes.len());
        for (entry, &node) in util.entries.iter().zip(&kpi_nodes) {
            let posterior = eliminate(bn, node, &evidence)?;
            let eu = expected_utility(&posterior, &entry.table)?;
            score += entry.weight * eu;
            outcomes.push(KpiOutcome {
                kpi: entry.kpi.clone(),
                posterior: posterior.probs.clone(),
                expected_utility: eu,
            });
            posteriors.push(posterior);
        }
        let (confidence, entropy) = confidence_entropy(&posteriors)?;
        candidates.push(Candidate {
            assignment: assignment.clone(),
            score,
            outcomes,
            confidence,
            entropy,
        });
    }

    // Argmax with lexicographic tie-break over the assignment itself.
    let best_index = (0..candidates.len())
        .max_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.score
                .partial_cmp(&cb.score)
                .expect("scores are finite")
                .then_with(|| cb.assignment.cmp(&ca.assignment))
        })
        .expect("space is non-empty");

    // Ranking: score descending; within tie_tolerance clusters the
    // lower-entropy candidate ranks first.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .score
            .partial_cmp(&candidates[a].score)
            .expect("scores are finite")
            .then_with(|| candidates[a].assignment.cmp(&candidates[b].assignment))
    });
    let tol = util.tie_tolerance.max(0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len()
            && (candidates[order[j - 1]].score - candidates[order[j]].score).abs() <= tol
        {
            j += 1;
        }
        order[i..j].sort_by(|&a, &b| {
            candidates[a]
                .entropy
                .partial_cmp(&candidates[b].entropy)
                .expect("entropies are finite")
                .then_with(|| candidates[a].assignment.cmp(&candidates[b].assignment))
        });
        i = j;
    }

    let labeled = |assignment: &ConfigAssignment| -> BTreeMap<String, String> {
        assignment
            .iter()
            .map(|&(node, state)| {
                (
                    String::from(&bn.node(node).name),
                    String::from(bn.state_label(node, state)),
                )
            })
            .collect()
    };

    let winner = &candidates[best_index];
    let runners_up: Vec<RankedConfig> = order
        .iter()
        .filter(|&&i| i != best_index)
        .map(|&i| RankedConfig {
            config: labeled(&candidates[i].assignment),
            score: candidates[i].score,
            confidence: candidates[i].confidence,
            entropy: candidates[i].entropy,
        })
        .collect();

    Ok(Recommendation {
        config: labeled(&winner.assignment),
        score: winner.score,
        per_kpi: winner.outcomes.clone(),
        confidence: winner.confidence,
        entropy: winner.entropy,
        runners_up,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::{estimate_cpds, NodeInfo};
    use crate::cpd::Cpd;
    use crate::dag::Dag;
    use alloc::vec;

    fn binary_nodes(names: &[&str]) -> Vec<NodeInfo> {
        names
            .iter()
            .map(|n| NodeInfo {
                name: String::from(*n),
                role: Role::Measurement,
                states: vec![String::from("0"), String::from("1")],
            })
            .collect()
    }

    /// A -> B -> C binary chain.
    fn chain_abc() -> BayesianNetwork {
        let mut dag = Dag::new(vec![String::from("A"), String::from("B"), String::from("C")]);
        dag.add_edge(0, 1).unwrap();
        dag.add_edge(1, 2).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.7, 0.3]).unwrap(),
            Cpd::new(1, vec![0], 2, vec![2], vec![0.8, 0.2, 0.1, 0.9]).unwrap(),
            Cpd::new(2, vec![1], 2, vec![2], vec![0.6, 0.4, 0.25, 0.75]).unwrap(),
        ];
        BayesianNetwork::new(dag, cpds, binary_nodes(&["A", "B", "C"])).unwrap()
    }

    #[test]
    fn evidence_on_query_gives_point_mass() {
        let bn = chain_abc();
        let ev = Evidence::from_states(&[(0, 1)]).unwrap();
        let post = enumerate_posterior(&bn, 0, &ev).unwrap();
        assert_eq!(post.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn empty_evidence_gives_prior_marginal() {
        let bn = chain_abc();
        let post = enumerate_posterior(&bn, 0, &Evidence::empty()).unwrap();
        assert!((post.probs[1] - 0.3).abs() < 1e-12);
        let post_b = enumerate_posterior(&bn, 1, &Evidence::empty()).unwrap();
        // P(B=1) = 0.7*0.2 + 0.3*0.9 = 0.41
        assert!((post_b.probs[1] - 0.41).abs() < 1e-12);
    }

    // Hand-computed Bayes inversion on the two-node chain:
    // P(A=1 | B=1) = 0.27 / (0.27 + 0.14) = 0.6585365853658537.
    #[test]
    fn chain_posterior_matches_hand_computation() {
        let mut dag = Dag::new(vec![String::from("A"), String::from("B")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.7, 0.3]).unwrap(),
            Cpd::new(1, vec![0], 2, vec![2], vec![0.8, 0.2, 0.1, 0.9]).unwrap(),
        ];
        let bn = BayesianNetwork::new(dag, cpds, binary_nodes(&["A", "B"])).unwrap();
        let ev = Evidence::from_states(&[(1, 1)]).unwrap();
        for post in [
            enumerate_posterior(&bn, 0, &ev).unwrap(),
            eliminate(&bn, 0, &ev).unwrap(),
        ] {
            assert!((post.probs[1] - 0.6585365853658537).abs() < 1e-12);
        }
    }

    #[test]
    fn eliminate_rejects_query_in_evidence() {
        let bn = chain_abc();
        let ev = Evidence::from_states(&[(0, 1)]).unwrap();
        assert!(eliminate(&bn, 0, &ev).is_err());
    }

    #[test]
    fn single_node_network_returns_its_prior() {
        let dag = Dag::new(vec![String::from("X")]);
        let cpds = vec![Cpd::new(0, vec![], 2, vec![], vec![0.25, 0.75]).unwrap()];
        let bn = BayesianNetwork::new(dag, cpds, binary_nodes(&["X"])).unwrap();
        let post = eliminate(&bn, 0, &Evidence::empty()).unwrap();
        assert_eq!(post.probs, vec![0.25, 0.75]);
    }

    #[test]
    fn d_separated_evidence_leaves_prior() {
        // A -> B, C isolated: evidence on C must not move A.
        let mut dag = Dag::new(vec![String::from("A"), String::from("B"), String::from("C")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.7, 0.3]).unwrap(),
            Cpd::new(1, vec![0], 2, vec![2], vec![0.8, 0.2, 0.1, 0.9]).unwrap(),
            Cpd::new(2, vec![], 2, vec![], vec![0.5, 0.5]).unwrap(),
        ];
        let bn = BayesianNetwork::new(dag, cpds, binary_nodes(&["A", "B", "C"])).unwrap();
        let ev = Evidence::from_states(&[(2, 1)]).unwrap();
        let post = eliminate(&bn, 0, &ev).unwrap();
        assert!((post.probs[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn eliminate_equals_enumeration_on_chain() {
        let bn = chain_abc();
        for state in 0..2 {
            let ev = Evidence::from_states(&[(2, state)]).unwrap();
            let a = eliminate(&bn, 0, &ev).unwrap();
            let b = enumerate_posterior(&bn, 0, &ev).unwrap();
            for (x, y) in a.probs.iter().zip(&b.probs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expected_utility_arithmetic() {
        let post = Posterior {
            variable: String::from("k"),
            probs: vec![0.2, 0.3, 0.5],
        };
        let eu = expected_utility(&post, &[0.0, 0.5, 1.0]).unwrap();
        assert!((eu - 0.65).abs() < 1e-12);
    }

    #[test]
    fn expected_utility_point_mass_and_cost() {
        let point = Posterior {
            variable: String::from("k"),
            probs: vec![1.0, 0.0, 0.0],
        };
        assert_eq!(expected_utility(&point, &[0.0, -0.5, -1.0]).unwrap(), 0.0);
        let mid = Posterior {
            variable: String::from("k"),
            probs: vec![0.0, 1.0, 0.0],
        };
        assert_eq!(expected_utility(&mid, &[0.0, 0.5, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn confidence_entropy_boundaries() {
        let point = Posterior {
            variable: String::from("a"),
            probs: vec![1.0, 0.0],
        };
        let uniform3 = Posterior {
            variable: String::from("b"),
            probs: vec![1.0 / 3.0; 3],
        };
        let (c, h) = confidence_entropy(&[point.clone()]).unwrap();
        assert_eq!((c, h), (1.0, 0.0));
        let (c, h) = confidence_entropy(&[uniform3]).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-12);
        assert!((h - 1.0).abs() < 1e-12);
        let uniform2 = Posterior {
            variable: String::from("c"),
            probs: vec![0.5, 0.5],
        };
        let (c, h) = confidence_entropy(&[point, uniform2]).unwrap();
        assert!((c - 0.75).abs() < 1e-12);
        assert!((h - 0.5).abs() < 1e-12);
    }

    /// Tiny decision network: one 3-state config, one 3-state KPI where
    /// config state 2 deterministically yields the top KPI bin.
    fn decision_net() -> BayesianNetwork {
        let mut dag = Dag::new(vec![String::from("cfg"), String::from("kpi")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 3, vec![], vec![1.0 / 3.0; 3]).unwrap(),
            Cpd::new(
                1,
                vec![0],
                3,
                vec![3],
                vec![0.8, 0.15, 0.05, 0.3, 0.5, 0.2, 0.0, 0.0, 1.0],
            )
            .unwrap(),
        ];
        let nodes = vec![
            NodeInfo {
                name: String::from("cfg"),
                role: Role::Config,
                states: vec![String::from("a"), String::from("b"), String::from("c")],
            },
            NodeInfo {
                name: String::from("kpi"),
                role: Role::Kpi,
                states: vec![String::from("low"), String::from("medium"), String::from("high")],
            },
        ];
        BayesianNetwork::new(dag, cpds, nodes).unwrap()
    }

    #[test]
    fn recommend_picks_deterministic_best_config() {
        let bn = decision_net();
        let omega = ConfigurationSpace::full_grid(&bn).unwrap();
        let util = UtilitySpec::default_for(&bn, &BTreeMap::new());
        let rec = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        assert_eq!(rec.config.get("cfg").unwrap(), "c");
        assert!((rec.score - 1.0).abs() < 1e-12);
        assert_eq!(rec.runners_up.len(), 2);
        assert!(rec.runners_up[0].score >= rec.runners_up[1].score);
    }

    #[test]
    fn single_candidate_space_returns_it() {
        let bn = decision_net();
        let omega = ConfigurationSpace::new(vec![vec![(0, 1)]]).unwrap();
        let util = UtilitySpec::default_for(&bn, &BTreeMap::new());
        let rec = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        assert_eq!(rec.config.get("cfg").unwrap(), "b");
        // E[f] for row [0.3, 0.5, 0.2] with f = [0, 0.5, 1] is 0.45.
        assert!((rec.score - 0.45).abs() < 1e-12);
        assert!(rec.runners_up.is_empty());
    }

    #[test]
    fn weight_scaling_preserves_argmax() {
        let bn = decision_net();
        let omega = ConfigurationSpace::full_grid(&bn).unwrap();
        let mut util = UtilitySpec::default_for(&bn, &BTreeMap::new());
        let rec1 = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        for e in &mut util.entries {
            e.weight *= 10.0;
        }
        let rec2 = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        assert_eq!(rec1.config, rec2.config);
        assert!((rec2.score - 10.0 * rec1.score).abs() < 1e-9);
    }

    #[test]
    fn score_recomputation_matches() {
        let bn = chain_learned_from_samples();
        let omega = ConfigurationSpace::full_grid(&bn).unwrap();
        let util = UtilitySpec::default_for(&bn, &BTreeMap::new());
        let rec = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        let recomputed: f64 = rec
            .per_kpi
            .iter()
            .zip(&util.entries)
            .map(|(o, e)| e.weight * o.expected_utility)
            .sum();
        assert!((rec.score - recomputed).abs() < 1e-12);
    }

    /// Learned two-variable network with a Config root, for grid tests.
    fn chain_learned_from_samples() -> BayesianNetwork {
        use crate::variable::VariableSpec;
        let specs = vec![
            VariableSpec::discrete("cfg", Role::Config, &["0", "1"]),
            VariableSpec::discrete("kpi", Role::Kpi, &["low", "high"]),
        ];
        let rows = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0];
        let data = crate::data::DiscreteDataset::new(specs, rows).unwrap();
        let mut dag = Dag::new(vec![String::from("cfg"), String::from("kpi")]);
        dag.add_edge(0, 1).unwrap();
        estimate_cpds(&dag, &data, 1.0).unwrap()
    }

    #[test]
    fn tied_scores_rank_lower_entropy_first() {
        // Two configs with identical expected utility but different spread.
        let mut dag = Dag::new(vec![String::from("cfg"), String::from("kpi")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.5, 0.5]).unwrap(),
            // cfg=0: [0.5, 0, 0.5] (EU 0.5, high entropy)
            // cfg=1: [0, 1, 0]     (EU 0.5, zero entropy)
            Cpd::new(1, vec![0], 3, vec![2], vec![0.5, 0.0, 0.5, 0.0, 1.0, 0.0]).unwrap(),
        ];
        let nodes = vec![
            NodeInfo {
                name: String::from("cfg"),
                role: Role::Config,
                states: vec![String::from("x"), String::from("y")],
            },
            NodeInfo {
                name: String::from("kpi"),
                role: Role::Kpi,
                states: vec![String::from("low"), String::from("medium"), String::from("high")],
            },
        ];
        let bn = BayesianNetwork::new(dag, cpds, nodes).unwrap();
        let omega = ConfigurationSpace::full_grid(&bn).unwrap();
        let util = UtilitySpec::default_for(&bn, &BTreeMap::new());
        let rec = recommend(&bn, &omega, &Evidence::empty(), &util).unwrap();
        // Exact score ties break lexicographically for the winner, so x is
        // chosen; the ranking itself orders the tied cluster by entropy, so
        // the zero-entropy candidate y heads the runner-up list.
        assert_eq!(rec.config.get("cfg").unwrap(), "x");
        assert_eq!(rec.runners_up.len(), 1);
        assert_eq!(rec.runners_up[0].config.get("cfg").unwrap(), "y");
        assert_eq!(rec.runners_up[0].entropy, 0.0);
    }

    #[test]
    fn empty_omega_is_rejected() {
        assert!(ConfigurationSpace::new(vec![]).is_err());
    }
}
