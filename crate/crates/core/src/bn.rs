//! The Bayesian network model: DAG + one CPD per node, the factorized joint,
//! count-based parameter estimation and the versioned JSON model format.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::cpd::Cpd;
use crate::dag::Dag;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::variable::{Role, VariableSpec};

/// Default Laplace pseudo-count for CPD estimation. Strictly positive tables
/// keep every posterior well defined under arbitrary evidence.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Serialized model schema version.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Node metadata carried by the model: name, role and ordinal state labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub role: Role,
    pub states: Vec<String>,
}

impl From<&VariableSpec> for NodeInfo {
    fn from(spec: &VariableSpec) -> Self {
        Self {
            name: spec.name.clone(),
            role: spec.role,
            states: spec.states.clone(),
        }
    }
}

/// A learned model: structure, per-node CPDs and node metadata. Immutable
/// after construction; adaptation produces new values.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    dag: Dag,
    /// One CPD per node, indexed by node.
    cpds: Vec<Cpd>,
    nodes: Vec<NodeInfo>,
}

impl BayesianNetwork {
    pub fn new(dag: Dag, cpds: Vec<Cpd>, nodes: Vec<NodeInfo>) -> Result<Self> {
        if nodes.len() != dag.n_nodes() || cpds.len() != dag.n_nodes() {
            return Err(Error::Parameter(String::from(
                "need exactly one CPD and one node record per dag node",
            )));
        }
        for (v, cpd) in cpds.iter().enumerate() {
            if cpd.child != v {
                return Err(Error::Parameter(alloc::format!(
                    "cpd at position {v} is for child {}",
                    cpd.child
                )));
            }
            let mut parents = dag.parents(v);
            parents.sort_unstable();
            if parents != cpd.parents {
                return Err(Error::Parameter(alloc::format!(
                    "cpd parents for {} disagree with dag",
                    nodes[v].name
                )));
            }
            if cpd.child_card != nodes[v].states.len() {
                return Err(Error::Parameter(alloc::format!(
                    "cpd cardinality for {} disagrees with state labels",
                    nodes[v].name
                )));
            }
            cpd.validate()?;
        }
        Ok(Self { dag, cpds, nodes })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    pub fn cpd(&self, node: usize) -> &Cpd {
        &self.cpds[node]
    }

    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeInfo {
        &self.nodes[index]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| Error::UnknownVariable(String::from(name)))
    }

    pub fn cardinality(&self, node: usize) -> usize {
        self.nodes[node].states.len()
    }

    pub fn state_label(&self, node: usize, state: usize) -> &str {
        &self.nodes[node].states[state]
    }

    /// Resolves a state label back to its index.
    pub fn state_index(&self, node: usize, label: &str) -> Result<usize> {
        self.nodes[node]
            .states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownState {
                variable: self.nodes[node].name.clone(),
                value: String::from(label),
            })
    }

    /// Node indices with a given role, in node order.
    pub fn nodes_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].role == role)
            .collect()
    }

    /// Replaces one node's table (same shape), renormalizing rows.
    /// Used by context overrides and CPD adaptation.
    pub fn with_table(&self, node: usize, table: Vec<f64>) -> Result<Self> {
        let mut cpd = self.cpds[node].clone();
        if table.len() != cpd.table.len() {
            return Err(Error::Parameter(alloc::format!(
                "replacement table for {} has {} entries, expected {}",
                self.nodes[node].name,
                table.len(),
                cpd.table.len()
            )));
        }
        cpd.table = table;
        cpd.normalize_rows();
        cpd.validate()?;
        let mut cpds = self.cpds.clone();
        cpds[node] = cpd;
        Ok(Self {
            dag: self.dag.clone(),
            cpds,
            nodes: self.nodes.clone(),
        })
    }

    /// Joint probability of a full assignment under the factorization
    /// P(v1..vn) = prod_i P(vi | parents(vi)). Accumulated in log space.
    pub fn factorized_joint(&self, assignment: &[usize]) -> Result<f64> {
        if assignment.len() != self.n_nodes() {
            return Err(Error::Parameter(alloc::format!(
                "assignment covers {} of {} nodes",
                assignment.len(),
                self.n_nodes()
            )));
        }
        for (v, &s) in assignment.iter().enumerate() {
            if s >= self.cardinality(v) {
                return Err(Error::Parameter(alloc::format!(
                    "state {s} out of range for {}",
                    self.nodes[v].name
                )));
            }
        }
        let mut log_p = 0.0;
        for (v, cpd) in self.cpds.iter().enumerate() {
            let parent_states: Vec<usize> = cpd.parents.iter().map(|&p| assignment[p]).collect();
            let p = cpd.prob(&parent_states, assignment[v]);
            if p == 0.0 {
                return Ok(0.0);
            }
            log_p += libm::log(p);
        }
        Ok(libm::exp(log_p))
    }

    /// Serializes to the versioned JSON model format. The round trip through
    /// [`load_model`] is lossless (probabilities bit-equal).
    pub fn save_model(&self) -> Vec<u8> {
        let file = ModelFile::from(self);
        serde_json::to_vec_pretty(&file).expect("model serialization cannot fail")
    }

    /// Parses the JSON model format, verifying schema version and all model
    /// invariants.
    pub fn load_model(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse(alloc::format!("model: {e}")))?;
        file.into_network()
    }
}

/// Estimates one CPD per node by smoothed counting:
/// (count(child=s, parents=pi) + alpha) / (count(parents=pi) + alpha * r).
/// Rows never observed fall back to uniform when alpha = 0.
pub fn estimate_cpds(dag: &Dag, data: &DiscreteDataset, alpha: f64) -> Result<BayesianNetwork> {
    if alpha < 0.0 {
        return Err(Error::Parameter(String::from("alpha must be nonnegative")));
    }
    let mut columns = Vec::with_capacity(dag.n_nodes());
    for name in dag.nodes() {
        columns.push(data.column_index(name)?);
    }
    let mut cpds = Vec::with_capacity(dag.n_nodes());
    let mut nodes = Vec::with_capacity(dag.n_nodes());
    for v in 0..dag.n_nodes() {
        let mut parents = dag.parents(v);
        parents.sort_unstable();
        let child_col = columns[v];
        let child_card = data.cardinality(child_col);
        let parent_cols: Vec<usize> = parents.iter().map(|&p| columns[p]).collect();
        let parent_cards: Vec<usize> = parent_cols.iter().map(|&c| data.cardinality(c)).collect();
        let n_rows: usize = parent_cards.iter().product();

        let mut counts = alloc::vec![0.0f64; n_rows * child_card];
        for r in 0..data.n_rows() {
            let mut idx = 0;
            for (&pc, &card) in parent_cols.iter().zip(&parent_cards) {
                idx = idx * card + data.cell(r, pc);
                debug_assert!(data.cell(r, pc) < card);
            }
            counts[idx * child_card + data.cell(r, child_col)] += 1.0;
        }

        let mut table = alloc::vec![0.0f64; n_rows * child_card];
        for row in 0..n_rows {
            let slice = &counts[row * child_card..(row + 1) * child_card];
            let total: f64 = slice.iter().sum();
            let denom = total + alpha * child_card as f64;
            if denom == 0.0 {
                for s in 0..child_card {
                    table[row * child_card + s] = 1.0 / child_card as f64;
                }
            } else {
                for s in 0..child_card {
                    table[row * child_card + s] = (slice[s] + alpha) / denom;
                }
            }
        }
        cpds.push(Cpd::new(v, parents, child_card, parent_cards, table)?);
        nodes.push(NodeInfo::from(&data.specs()[child_col]));
    }
    BayesianNetwork::new(dag.clone(), cpds, nodes)
}

// ---------------------------------------------------------------------------
// Versioned JSON model format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelFile {
    schema_version: u32,
    variables: Vec<NodeInfo>,
    edges: Vec<(String, String)>,
    cpds: Vec<CpdRecord>,
}

#[derive(Serialize, Deserialize)]
struct CpdRecord {
    child: String,
    parents: Vec<String>,
    table: Vec<f64>,
}

impl From<&BayesianNetwork> for ModelFile {
    fn from(bn: &BayesianNetwork) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            variables: bn.nodes.clone(),
            edges: bn.dag.named_edges(),
            cpds: bn
                .cpds
                .iter()
                .map(|cpd| CpdRecord {
                    child: bn.nodes[cpd.child].name.clone(),
                    parents: cpd
                        .parents
                        .iter()
                        .map(|&p| bn.nodes[p].name.clone())
                        .collect(),
                    table: cpd.table.clone(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    pub(crate) fn into_network(self) -> Result<BayesianNetwork> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let names: Vec<String> = self.variables.iter().map(|v| v.name.clone()).collect();
        let mut dag = Dag::new(names);
        for (u, v) in &self.edges {
            dag.add_edge_by_name(u, v)?;
        }
        let mut cpds: Vec<Option<Cpd>> = alloc::vec![None; dag.n_nodes()];
        for record in self.cpds {
            let child = dag.node_index(&record.child)?;
            let mut parents = Vec::with_capacity(record.parents.len());
            for p in &record.parents {
                parents.push(dag.node_index(p)?);
            }
            parents.sort_unstable();
            let parent_cards: Vec<usize> = parents
                .iter()
                .map(|&p| self.variables[p].states.len())
                .collect();
            let child_card = self.variables[child].states.len();
            if cpds[child].is_some() {
                return Err(Error::Parse(alloc::format!(
                    "duplicate cpd for {}",
                    record.child
                )));
            }
            cpds[child] = Some(Cpd::new(child, parents, child_card, parent_cards, record.table)?);
        }
        let cpds: Vec<Cpd> = cpds
            .into_iter()
            .enumerate()
            .map(|(v, c)| c.ok_or_else(|| Error::Parse(alloc::format!("missing cpd for node {v}"))))
            .collect::<Result<_>>()?;
        BayesianNetwork::new(dag, cpds, self.variables)
    }
}
