//! Shipped synthetic worlds: the default uplink power-control network used by
//! simulation and evaluation, a variance-trap world for baseline comparison,
//! and a generator for larger profiling networks.
//!
//! The default world mirrors the causal path from uplink power parameters to
//! throughput and error rate: P0 and the SNR target drive UE transmit power,
//! which with the channel determines RSRP, then SNR, MCS selection and
//! finally throughput and BLER. It is fixture truth for tests, not a claim
//! about any measured network.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bn::{BayesianNetwork, NodeInfo};
use crate::constraint::ConstraintSet;
use crate::cpd::Cpd;
use crate::dag::Dag;
use crate::error::Result;
use crate::inference::UtilitySpec;
use crate::sim::{ContextProfile, CpdOverride, GroundTruthSpec, Rule, RuleTable};
use crate::variable::{Direction, Role};

/// Discrete states of the nominal PUSCH power parameter (dBm).
pub const P0_STATES: [&str; 5] = ["-106", "-102", "-96", "-90", "-84"];
/// Discrete states of the uplink target-SNR parameter (dB).
pub const GAMMA_STATES: [&str; 4] = ["12", "15", "20", "28"];

const LEVEL3: [&str; 3] = ["low", "medium", "high"];

fn node(name: &str, role: Role, states: &[&str]) -> NodeInfo {
    NodeInfo {
        name: String::from(name),
        role,
        states: states.iter().map(|s| String::from(*s)).collect(),
    }
}

/// Three-state row concentrated around `center` (in units of state index).
fn soft_level_row(center: f64, sigma: f64) -> Vec<f64> {
    let mut row: Vec<f64> = (0..3)
        .map(|s| {
            let d = s as f64 - center;
            libm::exp(-d * d / (2.0 * sigma * sigma))
        })
        .collect();
    let sum: f64 = row.iter().sum();
    for p in &mut row {
        *p /= sum;
    }
    row
}

fn cpd_from_rows(child: usize, parents: Vec<usize>, parent_cards: Vec<usize>, rows: Vec<Vec<f64>>) -> Cpd {
    let table: Vec<f64> = rows.into_iter().flatten().collect();
    Cpd::new(child, parents, 3, parent_cards, table).expect("authored table is valid")
}

/// The default ten-node, fourteen-edge world over the uplink power-control
/// variables, with cell-center and cell-edge contexts overriding the channel
/// prior.
pub fn default_world() -> GroundTruthSpec {
    let nodes = alloc::vec![
        node("p0_nominal", Role::Config, &P0_STATES),          // 0
        node("pusch_TargetSNRx10", Role::Config, &GAMMA_STATES), // 1
        node("Channel", Role::Measurement, &LEVEL3),           // 2
        node("Noise", Role::Measurement, &LEVEL3),             // 3
        node("TxPower", Role::Measurement, &LEVEL3),           // 4
        node("RSRP", Role::Measurement, &LEVEL3),              // 5
        node("SNR", Role::Measurement, &LEVEL3),               // 6
        node("UL_MCS", Role::Measurement, &LEVEL3),            // 7
        node("UL_Mbps", Role::Kpi, &LEVEL3),                   // 8
        node("UL_BLER", Role::Kpi, &LEVEL3),                   // 9
    ];
    let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
    let mut dag = Dag::new(names);
    for (u, v) in default_world_edges() {
        dag.add_edge_by_name(u, v).unwrap();
    }

    let mut cpds: Vec<Cpd> = Vec::with_capacity(10);
    // p0_nominal: uniform design prior over the grid.
    cpds.push(Cpd::new(0, alloc::vec![], 5, alloc::vec![], alloc::vec![0.2; 5]).unwrap());
    // pusch_TargetSNRx10: uniform design prior.
    cpds.push(Cpd::new(1, alloc::vec![], 4, alloc::vec![], alloc::vec![0.25; 4]).unwrap());
    // Channel prior (overridden by contexts).
    cpds.push(Cpd::new(2, alloc::vec![], 3, alloc::vec![], alloc::vec![0.3, 0.4, 0.3]).unwrap());
    // Noise prior.
    cpds.push(Cpd::new(3, alloc::vec![], 3, alloc::vec![], alloc::vec![0.4, 0.35, 0.25]).unwrap());

    // TxPower | p0_nominal (strong), pusch_TargetSNRx10 (deliberately weak:
    // detectable only through the elicited constraint).
    let mut rows = Vec::new();
    for p0 in 0..5usize {
        for gamma in 0..4usize {
            let z = 0.94 * (p0 as f64 / 4.0) + 0.06 * (gamma as f64 / 3.0);
            rows.push(soft_level_row(2.0 * z, 0.6));
        }
    }
    cpds.push(cpd_from_rows(4, alloc::vec![0, 1], alloc::vec![5, 4], rows));

    // RSRP | Channel, TxPower.
    let mut rows = Vec::new();
    for ch in 0..3usize {
        for tx in 0..3usize {
            let z = 0.42 * (ch as f64 / 2.0) + 0.58 * (tx as f64 / 2.0);
            rows.push(soft_level_row(2.0 * z, 0.5));
        }
    }
    cpds.push(cpd_from_rows(5, alloc::vec![2, 4], alloc::vec![3, 3], rows));

    // SNR | Noise, RSRP.
    let mut rows = Vec::new();
    for noise in 0..3usize {
        for rsrp in 0..3usize {
            let z = 0.72 * (rsrp as f64 / 2.0) + 0.28 * (1.0 - noise as f64 / 2.0);
            rows.push(soft_level_row(2.0 * z, 0.5));
        }
    }
    cpds.push(cpd_from_rows(6, alloc::vec![3, 5], alloc::vec![3, 3], rows));

    // UL_MCS | pusch_TargetSNRx10, RSRP (weak), SNR. The target-SNR gain
    // only materializes when SNR is good and saturates above the third
    // setting.
    let mut rows = Vec::new();
    for gamma in 0..4usize {
        for rsrp in 0..3usize {
            for snr in 0..3usize {
                let s = snr as f64 / 2.0;
                let g = (gamma as f64 / 3.0).min(2.0 / 3.0);
                let z = 0.48 * s + 0.07 * (rsrp as f64 / 2.0) + 0.55 * g * s;
                rows.push(soft_level_row(2.0 * z, 0.45));
            }
        }
    }
    cpds.push(cpd_from_rows(7, alloc::vec![1, 5, 6], alloc::vec![4, 3, 3], rows));

    // UL_Mbps | SNR, UL_MCS.
    let mut rows = Vec::new();
    for snr in 0..3usize {
        for mcs in 0..3usize {
            let z = 0.3 * (snr as f64 / 2.0) + 0.7 * (mcs as f64 / 2.0);
            rows.push(soft_level_row(2.0 * z, 0.45));
        }
    }
    cpds.push(cpd_from_rows(8, alloc::vec![6, 7], alloc::vec![3, 3], rows));

    // UL_BLER | pusch_TargetSNRx10, SNR, UL_MCS: aggressive targets hurt
    // mostly under weak signal, where the MCS gain cannot materialize.
    let mut rows = Vec::new();
    for gamma in 0..4usize {
        for snr in 0..3usize {
            for mcs in 0..3usize {
                let s = snr as f64 / 2.0;
                let g = gamma as f64 / 3.0;
                let z = (0.72 * g * (1.0 - s)
                    + 0.30 * (g - 2.0 / 3.0).max(0.0)
                    + 0.50 * (1.0 - s)
                    + 0.15 * (mcs as f64 / 2.0)
                    - 0.12)
                    .clamp(0.0, 1.0);
                rows.push(soft_level_row(2.0 * z, 0.5));
            }
        }
    }
    cpds.push(cpd_from_rows(9, alloc::vec![1, 6, 7], alloc::vec![4, 3, 3], rows));

    let world = BayesianNetwork::new(dag, cpds, nodes).expect("authored world is valid");
    let contexts = alloc::vec![
        ContextProfile {
            name: String::from("cell_center"),
            description: String::from("near line-of-sight users with good RF conditions"),
            overrides: alloc::vec![CpdOverride {
                node: String::from("Channel"),
                table: alloc::vec![0.06, 0.24, 0.70],
            }],
        },
        ContextProfile {
            name: String::from("cell_edge"),
            description: String::from("obstructed or distant users with weak RF conditions"),
            overrides: alloc::vec![CpdOverride {
                node: String::from("Channel"),
                table: alloc::vec![0.70, 0.24, 0.06],
            }],
        },
    ];
    GroundTruthSpec { world, contexts }
}

/// The fourteen ground-truth edges of [`default_world`].
pub fn default_world_edges() -> Vec<(&'static str, &'static str)> {
    alloc::vec![
        ("p0_nominal", "TxPower"),
        ("pusch_TargetSNRx10", "TxPower"),
        ("TxPower", "RSRP"),
        ("Channel", "RSRP"),
        ("RSRP", "SNR"),
        ("Noise", "SNR"),
        ("RSRP", "UL_MCS"),
        ("SNR", "UL_MCS"),
        ("pusch_TargetSNRx10", "UL_MCS"),
        ("SNR", "UL_Mbps"),
        ("UL_MCS", "UL_Mbps"),
        ("SNR", "UL_BLER"),
        ("pusch_TargetSNRx10", "UL_BLER"),
        ("UL_MCS", "UL_BLER"),
    ]
}

/// The ground truth of [`default_world`] as a DAG value.
pub fn default_truth_dag() -> Dag {
    let world = default_world();
    world.world.dag().clone()
}

/// A partial, correct constraint set over the default world: six mandatory
/// edges (including the weak ones data alone tends to miss) and four
/// prohibited reversals of chain edges.
pub fn partial_domain_constraints() -> Result<ConstraintSet> {
    let world = default_world();
    let specs = world.specs();
    ConstraintSet::from_edges(
        &[
            ("pusch_TargetSNRx10", "TxPower"),
            ("RSRP", "UL_MCS"),
            ("p0_nominal", "TxPower"),
            ("TxPower", "RSRP"),
            ("RSRP", "SNR"),
            ("SNR", "UL_MCS"),
        ],
        &[
            ("SNR", "RSRP"),
            ("UL_MCS", "SNR"),
            ("UL_Mbps", "UL_MCS"),
            ("UL_BLER", "SNR"),
        ],
        &specs,
    )
}

/// Default utility for the world's KPIs: throughput is a benefit, error rate
/// a cost.
pub fn default_utility(bn: &BayesianNetwork) -> UtilitySpec {
    let mut directions = BTreeMap::new();
    directions.insert(String::from("UL_Mbps"), Direction::Benefit);
    directions.insert(String::from("UL_BLER"), Direction::Cost);
    UtilitySpec::default_for(bn, &directions)
}

/// Engineering-heuristic rule table over the default world: low RSRP raises
/// P0 one step, high BLER lowers the SNR target one step; otherwise keep the
/// base configuration (P0 = -96 dBm, target 20 dB).
pub fn default_rule_table() -> RuleTable {
    RuleTable {
        rules: alloc::vec![
            Rule {
                measurement: String::from("RSRP"),
                state: 0,
                config: String::from("p0_nominal"),
                step: 1,
            },
            Rule {
                measurement: String::from("UL_BLER"),
                state: 2,
                config: String::from("pusch_TargetSNRx10"),
                step: -1,
            },
        ],
        base: BTreeMap::from([
            (String::from("p0_nominal"), 2usize),
            (String::from("pusch_TargetSNRx10"), 2usize),
        ]),
    }
}

/// Variance-trap world: the trap configuration has the best historical mean
/// throughput but a heavy error-rate tail; a balanced configuration wins on
/// weighted utility.
pub fn variance_trap_world() -> GroundTruthSpec {
    let nodes = alloc::vec![
        node("cfg", Role::Config, &["c0", "c1", "c2"]),
        node("UL_Mbps", Role::Kpi, &LEVEL3),
        node("UL_BLER", Role::Kpi, &LEVEL3),
    ];
    let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
    let mut dag = Dag::new(names);
    dag.add_edge(0, 1).unwrap();
    dag.add_edge(0, 2).unwrap();
    let cpds = alloc::vec![
        Cpd::new(0, alloc::vec![], 3, alloc::vec![], alloc::vec![1.0 / 3.0; 3]).unwrap(),
        // Throughput: c0 is bimodal with the highest mean; c1 is steady and
        // close behind; c2 is poor.
        Cpd::new(
            1,
            alloc::vec![0],
            3,
            alloc::vec![3],
            alloc::vec![
                0.29, 0.00, 0.71, // c0: mean state 1.42
                0.00, 0.60, 0.40, // c1: mean state 1.40
                0.70, 0.20, 0.10, // c2
            ],
        )
        .unwrap(),
        // Error rate: c0 pays for its throughput tail, c1 stays clean.
        Cpd::new(
            2,
            alloc::vec![0],
            3,
            alloc::vec![3],
            alloc::vec![
                0.15, 0.15, 0.70, // c0
                0.80, 0.15, 0.05, // c1
                0.50, 0.30, 0.20, // c2
            ],
        )
        .unwrap(),
    ];
    let world = BayesianNetwork::new(dag, cpds, nodes).expect("authored world is valid");
    GroundTruthSpec {
        world,
        contexts: Vec::new(),
    }
}

/// Rule table for the variance-trap world: no measurements ever match, so
/// the catch-all keeps the poor default configuration.
pub fn variance_trap_rules() -> RuleTable {
    RuleTable {
        rules: Vec::new(),
        base: BTreeMap::from([(String::from("cfg"), 2usize)]),
    }
}

/// Generates a random world at a given scale for profiling: two config roots
/// (5 x 4 states), three-state intermediates, the last two nodes designated
/// KPIs, edges order-respecting with bounded in-degree.
pub fn synthetic_world(n_vars: usize, n_edges: usize, seed: u64) -> Result<GroundTruthSpec> {
    assert!(n_vars >= 4, "need at least config roots and two KPIs");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(n_vars);
    nodes.push(node("p0_nominal", Role::Config, &P0_STATES));
    nodes.push(node("pusch_TargetSNRx10", Role::Config, &GAMMA_STATES));
    for i in 2..n_vars {
        let name = alloc::format!("m{i:02}");
        let role = if i >= n_vars - 2 { Role::Kpi } else { Role::Measurement };
        nodes.push(node(&name, role, &LEVEL3));
    }
    let names: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
    let mut dag = Dag::new(names);

    // Order-respecting candidate edges keep the graph acyclic by
    // construction; cap in-degree to bound CPT sizes.
    let mut candidates: Vec<(usize, usize)> = (0..n_vars)
        .flat_map(|u| ((u + 1)..n_vars).map(move |v| (u, v)))
        .filter(|&(_, v)| v >= 2)
        .collect();
    use rand::seq::SliceRandom;
    candidates.shuffle(&mut rng);
    let mut added = 0usize;
    for (u, v) in candidates {
        if added >= n_edges {
            break;
        }
        if dag.in_degree(v) >= 4 {
            continue;
        }
        dag.add_edge(u, v)?;
        added += 1;
    }

    let mut cpds = Vec::with_capacity(n_vars);
    for v in 0..n_vars {
        let mut parents = dag.parents(v);
        parents.sort_unstable();
        let child_card = nodes[v].states.len();
        let parent_cards: Vec<usize> = parents.iter().map(|&p| nodes[p].states.len()).collect();
        let n_rows: usize = parent_cards.iter().product();
        let mut table = Vec::with_capacity(n_rows * child_card);
        for _ in 0..n_rows {
            // Skewed random rows so structure is recoverable from samples.
            let mut row: Vec<f64> = (0..child_card)
                .map(|_| {
                    let u: f64 = rng.random();
                    0.05 + u * u
                })
                .collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            table.extend(row);
        }
        cpds.push(Cpd::new(v, parents, child_card, parent_cards, table)?);
    }
    let world = BayesianNetwork::new(dag, cpds, nodes)?;
    Ok(GroundTruthSpec {
        world,
        contexts: Vec::new(),
    })
}
