//! PC-algorithm baseline: skeleton discovery via chi-square conditional
//! independence tests, collider orientation, Meek propagation, and a
//! deterministic lexicographic rule for whatever stays undirected.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::math::chi_square_sf;

/// Largest conditioning-set size tried during skeleton discovery.
const MAX_COND_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcResult {
    pub dag: Dag,
    /// Edges whose direction was not identified by colliders or Meek rules
    /// and was forced by the lexicographic rule.
    pub forced_edges: Vec<(String, String)>,
    pub tests_run: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum EdgeState {
    Undirected,
    /// Directed from the smaller-index endpoint to the larger.
    Forward,
    /// Directed from the larger-index endpoint to the smaller.
    Backward,
}

/// Chi-square test of independence between columns `x` and `y` given the
/// columns in `cond`. Returns `None` when the table is degenerate (the test
/// is then skipped and the edge conservatively retained).
fn chi_square_ci(
    data: &DiscreteDataset,
    x: usize,
    y: usize,
    cond: &[usize],
) -> Option<f64> {
    let rx = data.cardinality(x);
    let ry = data.cardinality(y);
    if rx < 2 || ry < 2 || data.n_rows() == 0 {
        return None;
    }
    let strata: usize = cond.iter().map(|&c| data.cardinality(c)).product();
    let mut counts = alloc::vec![0.0f64; strata * rx * ry];
    for r in 0..data.n_rows() {
        let row = data.row(r);
        let mut s = 0usize;
        for &c in cond {
            s = s * data.cardinality(c) + row[c] as usize;
        }
        counts[(s * rx + row[x] as usize) * ry + row[y] as usize] += 1.0;
    }

    let mut stat = 0.0;
    for s in 0..strata {
        let block = &counts[s * rx * ry..(s + 1) * rx * ry];
        let n: f64 = block.iter().sum();
        if n == 0.0 {
            continue;
        }
        let mut row_sum = alloc::vec![0.0; rx];
        let mut col_sum = alloc::vec![0.0; ry];
        for i in 0..rx {
            for j in 0..ry {
                row_sum[i] += block[i * ry + j];
                col_sum[j] += block[i * ry + j];
            }
        }
        for i in 0..rx {
            for j in 0..ry {
                let expected = row_sum[i] * col_sum[j] / n;
                if expected > 0.0 {
                    let diff = block[i * ry + j] - expected;
                    stat += diff * diff / expected;
                }
            }
        }
    }
    let dof = (rx - 1) * (ry - 1) * strata;
    Some(chi_square_sf(stat, dof))
}

/// Lexicographically ordered subsets of `pool` of size `k`.
fn subsets(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(pool: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..pool.len() {
            current.push(pool[i]);
            rec(pool, k, i + 1, current, out);
            current.pop();
        }
    }
    rec(pool, k, 0, &mut current, &mut out);
    out
}

/// Runs the PC algorithm over all dataset variables.
///
/// The skeleton phase uses the stable variant (neighbor sets snapshotted per
/// level) so results do not depend on edge iteration order. The output is a
/// DAG rather than a CPDAG: remaining undirected edges are oriented
/// lexicographically (subject to acyclicity) and flagged in `forced_edges`.
pub fn pc_algorithm(data: &DiscreteDataset, alpha: f64) -> Result<PcResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(String::from(
            "significance level must lie in (0, 1)",
        )));
    }
    let n = data.n_vars();
    let names: Vec<String> = data.specs().iter().map(|s| s.name.clone()).collect();
    let mut adjacent: Vec<BTreeSet<usize>> = (0..n)
        .map(|v| (0..n).filter(|&u| u != v).collect())
        .collect();
    let mut sepsets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut tests_run = 0usize;

    // Skeleton: remove edges found conditionally independent, growing the
    // conditioning-set size.
    for level in 0..=MAX_COND_SIZE {
        let snapshot = adjacent.clone();
        let mut removals: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for x in 0..n {
            for &y in snapshot[x].iter().filter(|&&y| y > x) {
                if !adjacent[x].contains(&y) {
                    continue;
                }
                let mut separated = false;
                'pools: for pool_owner in [x, y] {
                    let pool: Vec<usize> = snapshot[pool_owner]
                        .iter()
                        .copied()
                        .filter(|&z| z != x && z != y)
                        .collect();
                    if pool.len() < level {
                        continue;
                    }
                    for cond in subsets(&pool, level) {
                        tests_run += 1;
                        match chi_square_ci(data, x, y, &cond) {
                            Some(p) if p > alpha => {
                                removals.push((x, y, cond));
                                separated = true;
                                break 'pools;
                            }
                            Some(_) => {}
                            None => {
                                // Degenerate table: skip conservatively.
                            }
                        }
                    }
                }
                let _ = separated;
            }
        }
        for (x, y, cond) in removals {
            adjacent[x].remove(&y);
            adjacent[y].remove(&x);
            sepsets.insert((x.min(y), x.max(y)), cond);
        }
    }

    // Orient unshielded colliders x -> z <- y where z is not in sepset(x, y).
    let mut states: BTreeMap<(usize, usize), EdgeState> = BTreeMap::new();
    for x in 0..n {
        for &z in &adjacent[x] {
            if z > x {
                states.insert((x, z), EdgeState::Undirected);
            }
        }
    }
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let orient = |states: &mut BTreeMap<(usize, usize), EdgeState>, from: usize, to: usize| {
        let k = key(from, to);
        let desired = if from < to {
            EdgeState::Forward
        } else {
            EdgeState::Backward
        };
        match states.get(&k) {
            Some(EdgeState::Undirected) => {
                states.insert(k, desired);
                true
            }
            Some(s) if *s == desired => false,
            Some(_) => {
                log::warn!(
                    "conflicting orientation for edge {} - {}; keeping the first",
                    names[k.0],
                    names[k.1]
                );
                false
            }
            None => false,
        }
    };

    for z in 0..n {
        let neighbors: Vec<usize> = adjacent[z].iter().copied().collect();
        for (i, &x) in neighbors.iter().enumerate() {
            for &y in &neighbors[i + 1..] {
                if adjacent[x].contains(&y) {
                    continue; // shielded
                }
                let sep = sepsets.get(&key(x, y));
                if sep.is_none_or(|s| !s.contains(&z)) {
                    orient(&mut states, x, z);
                    orient(&mut states, y, z);
                }
            }
        }
    }

    // Meek rules R1-R3 to a fixpoint. R4 needs background knowledge to fire,
    // which the plain PC run never has.
    let directed_to = |states: &BTreeMap<(usize, usize), EdgeState>, a: usize, b: usize| {
        match states.get(&key(a, b)) {
            Some(EdgeState::Forward) => a < b,
            Some(EdgeState::Backward) => a > b,
            _ => false,
        }
    };
    let undirected = |states: &BTreeMap<(usize, usize), EdgeState>, a: usize, b: usize| {
        matches!(states.get(&key(a, b)), Some(EdgeState::Undirected))
    };
    loop {
        let mut changed = false;
        let pairs: Vec<(usize, usize)> = states.keys().copied().collect();
        for (a, b) in pairs {
            for (u, v) in [(a, b), (b, a)] {
                if !undirected(&states, u, v) {
                    continue;
                }
                // R1: w -> u, u - v, w and v non-adjacent  =>  u -> v
                let r1 = (0..n).any(|w| {
                    w != v && directed_to(&states, w, u) && !adjacent[w].contains(&v) && w != v
                });
                // R2: u -> w -> v with u - v  =>  u -> v
                let r2 = (0..n).any(|w| directed_to(&states, u, w) && directed_to(&states, w, v));
                // R3: u - w1, u - w2, w1 -> v, w2 -> v, w1 and w2 non-adjacent
                let mut r3 = false;
                let ws: Vec<usize> = (0..n)
                    .filter(|&w| undirected(&states, u, w) && directed_to(&states, w, v))
                    .collect();
                'outer: for (i, &w1) in ws.iter().enumerate() {
                    for &w2 in &ws[i + 1..] {
                        if !adjacent[w1].contains(&w2) {
                            r3 = true;
                            break 'outer;
                        }
                    }
                }
                if r1 || r2 || r3 {
                    changed |= orient(&mut states, u, v);
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Build the DAG: directed edges first (sorted), then force the remaining
    // undirected ones lexicographically by name, keeping acyclicity.
    let mut dag = Dag::new(names.clone());
    let mut forced_edges = Vec::new();
    let mut undecided = Vec::new();
    for (&(a, b), &state) in &states {
        match state {
            EdgeState::Forward => {
                if dag.add_edge(a, b).is_err() {
                    log::warn!("dropping edge {} -> {} to keep acyclicity", names[a], names[b]);
                }
            }
            EdgeState::Backward => {
                if dag.add_edge(b, a).is_err() {
                    log::warn!("dropping edge {} -> {} to keep acyclicity", names[b], names[a]);
                }
            }
            EdgeState::Undirected => undecided.push((a, b)),
        }
    }
    undecided.sort_by(|&(a1, b1), &(a2, b2)| {
        let lo_hi = |a: usize, b: usize| {
            if names[a] <= names[b] {
                (&names[a], &names[b])
            } else {
                (&names[b], &names[a])
            }
        };
        lo_hi(a1, b1).cmp(&lo_hi(a2, b2))
    });
    for (a, b) in undecided {
        let (u, v) = if names[a] <= names[b] { (a, b) } else { (b, a) };
        let oriented = if dag.add_edge(u, v).is_ok() {
            (u, v)
        } else if dag.add_edge(v, u).is_ok() {
            (v, u)
        } else {
            log::warn!("dropping undecidable edge {} - {}", names[a], names[b]);
            continue;
        };
        forced_edges.push((names[oriented.0].clone(), names[oriented.1].clone()));
    }

    Ok(PcResult {
        dag,
        forced_edges,
        tests_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variable::{Role, VariableSpec};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(names: &[&str], rows: Vec<u8>) -> DiscreteDataset {
        let specs: Vec<VariableSpec> = names
            .iter()
            .map(|n| VariableSpec::discrete(n, Role::Measurement, &["0", "1"]))
            .collect();
        DiscreteDataset::new(specs, rows).unwrap()
    }

    #[test]
    fn independent_pair_has_no_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        for _ in 0..10_000 {
            rows.push(u8::from(rng.random::<f64>() < 0.5));
            rows.push(u8::from(rng.random::<f64>() < 0.3));
        }
        let result = pc_algorithm(&dataset(&["A", "B"], rows), 0.05).unwrap();
        assert_eq!(result.dag.n_edges(), 0);
    }

    #[test]
    fn v_structure_is_oriented_as_collider() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        for _ in 0..10_000 {
            let a = u8::from(rng.random::<f64>() < 0.5);
            let b = u8::from(rng.random::<f64>() < 0.5);
            let p = 0.1 + 0.5 * a as f64 + 0.35 * b as f64;
            let c = u8::from(rng.random::<f64>() < p);
            rows.extend_from_slice(&[a, b, c]);
        }
        let result = pc_algorithm(&dataset(&["A", "B", "C"], rows), 0.05).unwrap();
        let mut edges = result.dag.named_edges();
        edges.sort();
        assert_eq!(
            edges,
            vec![
                (String::from("A"), String::from("C")),
                (String::from("B"), String::from("C"))
            ]
        );
        assert!(result.forced_edges.is_empty());
    }

    #[test]
    fn chain_skeleton_recovered_with_forced_orientation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut rows = Vec::new();
        for _ in 0..10_000 {
            let a = u8::from(rng.random::<f64>() < 0.5);
            let b = if rng.random::<f64>() < 0.85 { a } else { 1 - a };
            let c = if rng.random::<f64>() < 0.85 { b } else { 1 - b };
            rows.extend_from_slice(&[a, b, c]);
        }
        let result = pc_algorithm(&dataset(&["A", "B", "C"], rows), 0.05).unwrap();
        // Skeleton A - B - C; a chain is Markov-equivalent in either
        // direction, so both edges come back lexicographically forced.
        let mut skeleton: Vec<(String, String)> = result
            .dag
            .named_edges()
            .into_iter()
            .map(|(u, v)| if u < v { (u, v) } else { (v, u) })
            .collect();
        skeleton.sort();
        assert_eq!(
            skeleton,
            vec![
                (String::from("A"), String::from("B")),
                (String::from("B"), String::from("C"))
            ]
        );
        assert_eq!(result.forced_edges.len(), 2);
    }

    #[test]
    fn bad_alpha_rejected() {
        let data = dataset(&["A"], vec![0, 1]);
        assert!(pc_algorithm(&data, 0.0).is_err());
        assert!(pc_algorithm(&data, 1.0).is_err());
    }
}

