//! Directed acyclic graph over named variables.
//!
//! Acyclicity is re-verified on every mutation; a rejected edge reports the
//! directed path that would close the loop.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    nodes: Vec<String>,
    /// Directed edges as (source, target) node indices.
    edges: BTreeSet<(usize, usize)>,
}

impl Dag {
    pub fn new(nodes: Vec<String>) -> Self {
        Self {
            nodes,
            edges: BTreeSet::new(),
        }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(String::from(name)))
    }

    pub fn node_name(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Edges as (source name, target name) pairs in deterministic order.
    pub fn named_edges(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.nodes[u].clone(), self.nodes[v].clone()))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, t)| t == v)
            .map(|&(s, _)| s)
            .collect()
    }

    pub fn children(&self, u: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(s, _)| s == u)
            .map(|&(_, t)| t)
            .collect()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(_, t)| t == v).count()
    }

    /// Adds u -> v, rejecting self-loops and edges that close a directed
    /// cycle (the error carries the offending path). Re-adding an existing
    /// edge is a no-op.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::Parameter(alloc::format!(
                "self-loop on {}",
                self.nodes[u]
            )));
        }
        if self.edges.contains(&(u, v)) {
            return Ok(());
        }
        if let Some(path) = self.directed_path(v, u) {
            let mut cycle = Vec::with_capacity(path.len() + 1);
            cycle.push(self.nodes[u].clone());
            cycle.extend(path.into_iter().map(|i| self.nodes[i].clone()));
            return Err(Error::Cycle { path: cycle });
        }
        self.edges.insert((u, v));
        Ok(())
    }

    pub fn add_edge_by_name(&mut self, u: &str, v: &str) -> Result<()> {
        let ui = self.node_index(u)?;
        let vi = self.node_index(v)?;
        self.add_edge(ui, vi)
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        self.edges.remove(&(u, v))
    }

    /// Reverses u -> v into v -> u if that keeps the graph acyclic.
    pub fn reverse_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if !self.edges.contains(&(u, v)) {
            return Err(Error::Parameter(alloc::format!(
                "edge {} -> {} not present",
                self.nodes[u],
                self.nodes[v]
            )));
        }
        self.edges.remove(&(u, v));
        match self.add_edge(v, u) {
            Ok(()) => Ok(()),
            Err(e) => {
                self.edges.insert((u, v));
                Err(e)
            }
        }
    }

    /// Whether adding u -> v would keep the graph acyclic (edge absent).
    pub fn can_add(&self, u: usize, v: usize) -> bool {
        u != v && !self.edges.contains(&(u, v)) && self.directed_path(v, u).is_none()
    }

    /// BFS for a directed path from `from` to `to`; returns the node sequence
    /// including both endpoints.
    fn directed_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from == to {
            return Some(alloc::vec![from]);
        }
        let n = self.nodes.len();
        let mut prev = alloc::vec![usize::MAX; n];
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(from);
        prev[from] = from;
        while let Some(x) = queue.pop_front() {
            for &(s, t) in self.edges.range((x, 0)..(x + 1, 0)) {
                debug_assert_eq!(s, x);
                if prev[t] == usize::MAX {
                    prev[t] = x;
                    if t == to {
                        let mut path = alloc::vec![to];
                        let mut cur = to;
                        while cur != from {
                            cur = prev[cur];
                            path.push(cur);
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(t);
                }
            }
        }
        None
    }

    /// Topological order (Kahn), deterministic: smallest-index node first.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut indeg = alloc::vec![0usize; n];
        for &(_, t) in &self.edges {
            indeg[t] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &(s, t) in self.edges.range((v, 0)..(v + 1, 0)) {
                debug_assert_eq!(s, v);
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        debug_assert_eq!(order.len(), n, "dag invariant violated");
        order
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::Parameter(alloc::format!("node index {i} out of range")))
        }
    }
}

/// Union of several DAGs: node set and edge set unions, re-verified acyclic.
/// Overlapping node names are merged; a resulting cycle reports which input
/// graphs contributed its edges.
pub fn graph_union(dags: &[Dag]) -> Result<Dag> {
    let mut nodes: Vec<String> = Vec::new();
    for dag in dags {
        for name in dag.nodes() {
            if !nodes.iter().any(|n| n == name) {
                nodes.push(name.clone());
            }
        }
    }
    let mut out = Dag::new(nodes);
    // Track every contributor of every edge so a cycle can be attributed.
    let mut contributors: alloc::collections::BTreeMap<(usize, usize), Vec<usize>> =
        alloc::collections::BTreeMap::new();
    for (k, dag) in dags.iter().enumerate() {
        for (u, v) in dag.edges() {
            let ui = out.node_index(dag.node_name(u))?;
            let vi = out.node_index(dag.node_name(v))?;
            contributors.entry((ui, vi)).or_default().push(k);
            if let Err(Error::Cycle { path }) = out.add_edge(ui, vi) {
                let mut on_cycle = BTreeSet::new();
                for pair in path.windows(2) {
                    let a = out.node_index(&pair[0])?;
                    let b = out.node_index(&pair[1])?;
                    if let Some(ks) = contributors.get(&(a, b)) {
                        on_cycle.extend(ks.iter().copied());
                    }
                }
                on_cycle.insert(k);
                return Err(Error::UnionCycle {
                    path,
                    contributors: on_cycle.into_iter().collect(),
                });
            }
        }
    }
    Ok(out)
}
