//! Structure search: constrained hill-climbing over add/delete/reverse moves,
//! plus an exhaustive small-instance oracle used to validate it.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintSet;
use crate::dag::Dag;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::scoring::{presence_delta, ConstraintMode, LocalScoreCache, ScoreParams};

/// Minimum score improvement for a move to count as strictly improving.
const MIN_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    Lexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Upper bound on any node's parent count (keeps CPTs tractable).
    pub max_in_degree: usize,
    pub max_iterations: usize,
    /// Extra climbs from randomized feasible starting graphs.
    pub random_restarts: usize,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_in_degree: 4,
            max_iterations: 200,
            random_restarts: 0,
            seed: 0,
            tie_break: TieBreak::Lexicographic,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_in_degree == 0 || self.max_iterations == 0 {
            return Err(Error::Parameter(String::from(
                "search bounds must be positive",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

/// A single-edge move, ordered by (kind, source name, target name) for
/// deterministic tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Move {
    pub kind: MoveKind,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    #[serde(flatten)]
    pub applied: Move,
    pub delta: f64,
    pub total: f64,
}

/// Per-run record of the climb: score path and the feasibility certificate
/// (every mandatory edge present, no prohibited edge present).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub initial_score: f64,
    pub final_score: f64,
    pub steps: Vec<TraceStep>,
    pub feasible: bool,
    pub runs: usize,
    pub chosen_run: usize,
    pub seed: u64,
}

/// Whether a graph satisfies the hard constraints.
pub fn is_feasible(dag: &Dag, delta: &ConstraintSet) -> bool {
    let edge_present = |s: &String, t: &String| match (dag.node_index(s), dag.node_index(t)) {
        (Ok(u), Ok(v)) => dag.has_edge(u, v),
        _ => false,
    };
    delta.mandatory.iter().all(|(s, t)| edge_present(s, t))
        && !delta.prohibited.iter().any(|(s, t)| edge_present(s, t))
}

/// Enumerates the legal single-edge moves from a feasible graph: moves that
/// keep acyclicity, never delete or reverse a mandatory edge, never introduce
/// a prohibited edge, and respect the in-degree cap. Sorted by
/// (kind, source, target).
pub fn legal_moves(dag: &Dag, delta: &ConstraintSet, cfg: &SearchConfig) -> Result<Vec<Move>> {
    if !is_feasible(dag, delta) {
        return Err(Error::Infeasible(String::from(
            "input graph violates the hard constraints",
        )));
    }
    let n = dag.n_nodes();
    let name = |i: usize| String::from(dag.node_name(i));
    let mut moves = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let (su, sv) = (dag.node_name(u), dag.node_name(v));
            if dag.has_edge(u, v) {
                if delta.is_mandatory(su, sv) {
                    continue;
                }
                moves.push(Move {
                    kind: MoveKind::Delete,
                    source: name(u),
                    target: name(v),
                });
                if !delta.is_prohibited(sv, su) && dag.in_degree(u) < cfg.max_in_degree {
                    let mut probe = dag.clone();
                    probe.remove_edge(u, v);
                    if probe.can_add(v, u) {
                        moves.push(Move {
                            kind: MoveKind::Reverse,
                            source: name(u),
                            target: name(v),
                        });
                    }
                }
            } else if !delta.is_prohibited(su, sv)
                && dag.in_degree(v) < cfg.max_in_degree
                && dag.can_add(u, v)
            {
                moves.push(Move {
                    kind: MoveKind::Add,
                    source: name(u),
                    target: name(v),
                });
            }
        }
    }
    moves.sort();
    Ok(moves)
}

/// Greedy structure search maximizing the composite score.
///
/// Starts from the graph containing exactly the mandatory edges and applies
/// the best strictly-improving legal move until none remains (ties broken
/// lexicographically). With restarts, additional climbs start from the
/// mandatory edges plus random feasible additions; the best-scoring result
/// wins. In `Hard` mode the output is always feasible.
pub fn hill_climb(
    data: &DiscreteDataset,
    delta: &ConstraintSet,
    params: &ScoreParams,
    cfg: &SearchConfig,
) -> Result<(Dag, SearchTrace)> {
    params.validate()?;
    cfg.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyData(String::from("cannot learn from no rows")));
    }
    if let Some(edge) = delta.mandatory.intersection(&delta.prohibited).next() {
        return Err(Error::Infeasible(alloc::format!(
            "edge {} -> {} is both mandatory and prohibited",
            edge.0,
            edge.1
        )));
    }

    // Hard mode enforces constraints through the move set; soft mode leaves
    // moves unrestricted and lets the score terms steer.
    let move_filter = match params.mode {
        ConstraintMode::Hard => delta.clone(),
        ConstraintMode::Soft => ConstraintSet::empty(),
    };

    let mut cache = LocalScoreCache::new();
    let mut best: Option<(Dag, SearchTrace)> = None;
    let runs = cfg.random_restarts + 1;
    for run in 0..runs {
        let init = initial_graph(data, delta, &move_filter, cfg, run)?;
        let (dag, mut trace) = climb(data, delta, &move_filter, params, cfg, init, &mut cache)?;
        trace.runs = runs;
        trace.chosen_run = run;
        trace.seed = cfg.seed;
        let better = match &best {
            None => true,
            Some((_, t)) => trace.final_score > t.final_score + MIN_DELTA,
        };
        if better {
            best = Some((dag, trace));
        }
    }
    let (dag, trace) = best.expect("at least one run");
    if params.mode == ConstraintMode::Hard {
        debug_assert!(trace.feasible);
    }
    Ok((dag, trace))
}

/// Mandatory edges, plus random feasible additions for restart runs.
fn initial_graph(
    data: &DiscreteDataset,
    delta: &ConstraintSet,
    move_filter: &ConstraintSet,
    cfg: &SearchConfig,
    run: usize,
) -> Result<Dag> {
    let names: Vec<String> = data.specs().iter().map(|s| s.name.clone()).collect();
    let mut dag = Dag::new(names);
    for (s, t) in &delta.mandatory {
        match dag.add_edge_by_name(s, t) {
            Ok(()) => {}
            Err(Error::Cycle { path }) => {
                return Err(Error::UnsatisfiableConstraints { cycle: path })
            }
            Err(e) => return Err(e),
        }
    }
    if run == 0 {
        return Ok(dag);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ (run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    let n = dag.n_nodes();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v)
        .collect();
    pairs.shuffle(&mut rng);
    let extra = rng.random_range(0..=n);
    let mut added = 0;
    for (u, v) in pairs {
        if added >= extra {
            break;
        }
        let (su, sv) = (dag.node_name(u), dag.node_name(v));
        if move_filter.is_prohibited(su, sv) || dag.in_degree(v) >= cfg.max_in_degree {
            continue;
        }
        if dag.can_add(u, v) {
            dag.add_edge(u, v)?;
            added += 1;
        }
    }
    Ok(dag)
}

fn climb(
    data: &DiscreteDataset,
    delta: &ConstraintSet,
    move_filter: &ConstraintSet,
    params: &ScoreParams,
    cfg: &SearchConfig,
    mut dag: Dag,
    cache: &mut LocalScoreCache,
) -> Result<(Dag, SearchTrace)> {
    // Node index == dataset column index: the dag is built over the dataset's
    // variables in column order.
    let n = dag.n_nodes();
    let sorted_parents = |dag: &Dag, v: usize| {
        let mut p = dag.parents(v);
        p.sort_unstable();
        p
    };
    let mut locals: Vec<f64> = (0..n)
        .map(|v| cache.local(data, params, v, &sorted_parents(&dag, v)))
        .collect();
    let llm0 = crate::scoring::llm_score(&dag, delta, params);
    let initial_score = locals.iter().sum::<f64>() + llm0;
    let mut total = initial_score;
    let mut steps = Vec::new();

    for step in 0..cfg.max_iterations {
        let moves = legal_moves(&dag, move_filter, cfg)?;
        let mut best_move: Option<(f64, Move)> = None;
        for m in moves {
            let u = dag.node_index(&m.source)?;
            let v = dag.node_index(&m.target)?;
            let delta_score = match m.kind {
                MoveKind::Add => {
                    let mut p = sorted_parents(&dag, v);
                    let pos = p.binary_search(&u).unwrap_err();
                    p.insert(pos, u);
                    cache.local(data, params, v, &p) - locals[v]
                        + presence_delta((&m.source, &m.target), delta, params)
                }
                MoveKind::Delete => {
                    let mut p = sorted_parents(&dag, v);
                    p.retain(|&x| x != u);
                    cache.local(data, params, v, &p) - locals[v]
                        - presence_delta((&m.source, &m.target), delta, params)
                }
                MoveKind::Reverse => {
                    let mut pv = sorted_parents(&dag, v);
                    pv.retain(|&x| x != u);
                    let mut pu = sorted_parents(&dag, u);
                    let pos = pu.binary_search(&v).unwrap_err();
                    pu.insert(pos, v);
                    cache.local(data, params, v, &pv) + cache.local(data, params, u, &pu)
                        - locals[v]
                        - locals[u]
                        - presence_delta((&m.source, &m.target), delta, params)
                        + presence_delta((&m.target, &m.source), delta, params)
                }
            };
            // Strict improvement; exact ties fall to the earlier
            // (lexicographically smaller) move.
            if delta_score > MIN_DELTA
                && best_move.as_ref().is_none_or(|(d, _)| delta_score > *d)
            {
                best_move = Some((delta_score, m));
            }
        }
        let Some((delta_score, m)) = best_move else {
            break;
        };
        let u = dag.node_index(&m.source)?;
        let v = dag.node_index(&m.target)?;
        match m.kind {
            MoveKind::Add => dag.add_edge(u, v)?,
            MoveKind::Delete => {
                dag.remove_edge(u, v);
            }
            MoveKind::Reverse => dag.reverse_edge(u, v)?,
        }
        locals[v] = cache.local(data, params, v, &sorted_parents(&dag, v));
        locals[u] = cache.local(data, params, u, &sorted_parents(&dag, u));
        total += delta_score;
        steps.push(TraceStep {
            step,
            applied: m,
            delta: delta_score,
            total,
        });
        debug_assert!(is_feasible(&dag, move_filter));
    }

    let feasible = is_feasible(&dag, delta);
    let trace = SearchTrace {
        initial_score,
        final_score: total,
        steps,
        feasible,
        runs: 1,
        chosen_run: 0,
        seed: cfg.seed,
    };
    Ok((dag, trace))
}

/// Exhaustively scores every DAG over the dataset's variables (feasible ones
/// in `Hard` mode) and returns the maximizer, breaking ties by lexicographic
/// edge list. Guarded to five nodes.
pub fn exhaustive_best_dag(
    data: &DiscreteDataset,
    delta: &ConstraintSet,
    params: &ScoreParams,
    node_limit: usize,
) -> Result<Dag> {
    if node_limit > 5 {
        return Err(Error::Parameter(String::from(
            "exhaustive search is limited to five nodes",
        )));
    }
    let n = data.n_vars();
    if n > node_limit {
        return Err(Error::TooLarge {
            size: n as u64,
            limit: node_limit as u64,
        });
    }
    params.validate()?;
    let names: Vec<String> = data.specs().iter().map(|s| s.name.clone()).collect();

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v)
        .collect();
    let bit_of = |u: usize, v: usize| pairs.iter().position(|&p| p == (u, v)).unwrap();

    let mut mandatory_mask = 0u64;
    for (s, t) in &delta.mandatory {
        let u = names.iter().position(|x| x == s);
        let v = names.iter().position(|x| x == t);
        if let (Some(u), Some(v)) = (u, v) {
            mandatory_mask |= 1 << bit_of(u, v);
        }
    }
    let mut prohibited_mask = 0u64;
    for (s, t) in &delta.prohibited {
        let u = names.iter().position(|x| x == s);
        let v = names.iter().position(|x| x == t);
        if let (Some(u), Some(v)) = (u, v) {
            prohibited_mask |= 1 << bit_of(u, v);
        }
    }
    let enforce = params.mode == ConstraintMode::Hard;

    let mut cache = LocalScoreCache::new();
    let mut best: Option<(f64, Vec<(String, String)>, Dag)> = None;
    let m = pairs.len();
    let mut parents_buf: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut indeg = alloc::vec![0usize; n];

    'mask: for mask in 0u64..(1u64 << m) {
        if enforce
            && ((mask & mandatory_mask) != mandatory_mask || (mask & prohibited_mask) != 0)
        {
            continue;
        }
        for p in parents_buf.iter_mut() {
            p.clear();
        }
        indeg.iter_mut().for_each(|d| *d = 0);
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                parents_buf[v].push(u);
                indeg[v] += 1;
            }
        }
        // Kahn's algorithm on the small graph.
        let mut deg = indeg.clone();
        let mut removed = 0usize;
        let mut queue: Vec<usize> = (0..n).filter(|&v| deg[v] == 0).collect();
        while let Some(v) = queue.pop() {
            removed += 1;
            for (bit, &(s, t)) in pairs.iter().enumerate() {
                if s == v && mask & (1 << bit) != 0 {
                    deg[t] -= 1;
                    if deg[t] == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        if removed != n {
            continue 'mask;
        }

        let mut score = 0.0;
        for v in 0..n {
            parents_buf[v].sort_unstable();
            score += cache.local(data, params, v, &parents_buf[v]);
        }
        for (s, t) in &delta.mandatory {
            let present = match (names.iter().position(|x| x == s), names.iter().position(|x| x == t)) {
                (Some(u), Some(v)) => mask & (1 << bit_of(u, v)) != 0,
                _ => false,
            };
            score += if present {
                params.alpha_reward
            } else {
                -params.alpha_penalty
            };
        }
        for (s, t) in &delta.prohibited {
            if let (Some(u), Some(v)) = (names.iter().position(|x| x == s), names.iter().position(|x| x == t)) {
                if mask & (1 << bit_of(u, v)) != 0 {
                    score -= params.beta_penalty;
                }
            }
        }

        let replace = match &best {
            None => true,
            Some((best_score, best_edges, _)) => {
                if score > *best_score {
                    true
                } else if score == *best_score {
                    let edges = named_edge_list(&names, &pairs, mask);
                    edges < *best_edges
                } else {
                    false
                }
            }
        };
        if replace {
            let mut dag = Dag::new(names.clone());
            for (bit, &(u, v)) in pairs.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    dag.add_edge(u, v)?;
                }
            }
            best = Some((score, named_edge_list(&names, &pairs, mask), dag));
        }
    }

    best.map(|(_, _, dag)| dag).ok_or_else(|| {
        Error::Infeasible(String::from("no feasible dag exists for the constraints"))
    })
}

fn named_edge_list(names: &[String], pairs: &[(usize, usize)], mask: u64) -> Vec<(String, String)> {
    let mut edges: Vec<(String, String)> = pairs
        .iter()
        .enumerate()
        .filter(|(bit, _)| mask & (1 << bit) != 0)
        .map(|(_, &(u, v))| (names[u].clone(), names[v].clone()))
        .collect();
    edges.sort();
    edges
}

/// Number of DAGs the exhaustive oracle enumerates for `n` nodes (used by
/// tests; the known sequence is 1, 1, 3, 25, 543, 29281).
pub fn count_dags(n: usize) -> Result<u64> {
    if n > 5 {
        return Err(Error::Parameter(String::from("count is limited to five nodes")));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).map(move |v| (u, v)))
        .filter(|&(u, v)| u != v)
        .collect();
    let m = pairs.len();
    let mut count = 0u64;
    for mask in 0u64..(1u64 << m) {
        let mut indeg = alloc::vec![0usize; n];
        for (bit, &(_, v)) in pairs.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                indeg[v] += 1;
            }
        }
        let mut removed = 0;
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        while let Some(v) = queue.pop() {
            removed += 1;
            for (bit, &(s, t)) in pairs.iter().enumerate() {
                if s == v && mask & (1 << bit) != 0 {
                    indeg[t] -= 1;
                    if indeg[t] == 0 {
                        queue.push(t);
                    }
                }
            }
        }
        if removed == n {
            count += 1;
        }
    }
    Ok(count)
}
