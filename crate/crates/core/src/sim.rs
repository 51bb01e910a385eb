//! Synthetic ground-truth environment: forward sampling from a known causal
//! network, deployment-context profiles, baseline recommenders, and the
//! closed-loop runner (collect, update, recommend, operate).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{full_relearn, incremental_update, RelearnTrigger, UpdateParams};
use crate::bn::BayesianNetwork;
use crate::constraint::ConstraintSet;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::inference::{recommend, ConfigurationSpace, Evidence, Recommendation, UtilitySpec};
use crate::scoring::ScoreParams;
use crate::search::SearchConfig;
use crate::variable::{Kind, Role, VariableSpec};

/// Replacement table for one node under a deployment context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdOverride {
    pub node: String,
    pub table: Vec<f64>,
}

/// A named deployment context: CPT overrides on selected nodes, structure
/// shared with the base world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextProfile {
    pub name: String,
    pub description: String,
    pub overrides: Vec<CpdOverride>,
}

/// The designated world model plus its deployment contexts.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSpec {
    pub world: BayesianNetwork,
    pub contexts: Vec<ContextProfile>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    #[serde(flatten)]
    model: crate::bn::ModelFile,
    #[serde(default)]
    contexts: Vec<ContextProfile>,
}

impl GroundTruthSpec {
    /// Serializes to the world JSON format: the model schema plus a contexts
    /// section.
    pub fn save(&self) -> Vec<u8> {
        let file = WorldFile {
            model: crate::bn::ModelFile::from(&self.world),
            contexts: self.contexts.clone(),
        };
        serde_json::to_vec_pretty(&file).expect("world serialization cannot fail")
    }

    /// Parses the world JSON format, validating the embedded model and every
    /// context override.
    pub fn load(bytes: &[u8]) -> Result<Self> {
        let file: WorldFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse(alloc::format!("world: {e}")))?;
        let world = file.model.into_network()?;
        let spec = Self {
            world,
            contexts: file.contexts,
        };
        for ctx in &spec.contexts {
            spec.network_for(Some(&ctx.name))?;
        }
        Ok(spec)
    }

    /// The world network under a context (`None` for the base world).
    pub fn network_for(&self, context: Option<&str>) -> Result<BayesianNetwork> {
        let Some(name) = context else {
            return Ok(self.world.clone());
        };
        let profile = self
            .contexts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Parameter(alloc::format!("unknown context {name}")))?;
        let mut bn = self.world.clone();
        for o in &profile.overrides {
            let node = bn.node_index(&o.node)?;
            bn = bn.with_table(node, o.table.clone())?;
        }
        Ok(bn)
    }

    /// Variable specs matching the world's nodes (all columns discrete).
    pub fn specs(&self) -> Vec<VariableSpec> {
        self.world
            .nodes()
            .iter()
            .map(|n| VariableSpec {
                name: n.name.clone(),
                role: n.role,
                kind: Kind::Discrete,
                states: n.states.clone(),
                direction: crate::variable::Direction::Neutral,
            })
            .collect()
    }
}

/// Ancestral sampling in topological order with the config variables pinned.
/// Deterministic under the seed.
pub fn forward_sample(
    world: &BayesianNetwork,
    evidence: &Evidence,
    n: usize,
    seed: u64,
) -> Result<DiscreteDataset> {
    if n == 0 {
        return Err(Error::Parameter(String::from("need at least one sample")));
    }
    evidence.validate(world)?;
    for (node, _) in evidence.iter() {
        if world.node(node).role != Role::Config {
            return Err(Error::Parameter(alloc::format!(
                "forward sampling pins config variables only, got {}",
                world.node(node).name
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(world, evidence, n, &mut rng)
}

fn sample_with_rng(
    world: &BayesianNetwork,
    evidence: &Evidence,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteDataset> {
    let order = world.dag().topological_order();
    let n_vars = world.n_nodes();
    let mut rows = Vec::with_capacity(n * n_vars);
    let mut assignment = alloc::vec![0usize; n_vars];
    for _ in 0..n {
        for &v in &order {
            if let Some(s) = evidence.get(v) {
                assignment[v] = s;
                continue;
            }
            let cpd = world.cpd(v);
            let parent_states: Vec<usize> =
                cpd.parents.iter().map(|&p| assignment[p]).collect();
            let row = cpd.row(cpd.row_index(&parent_states));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut state = row.len() - 1;
            for (s, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = s;
                    break;
                }
            }
            assignment[v] = state;
        }
        rows.extend(assignment.iter().map(|&s| s as u8));
    }
    let specs: Vec<VariableSpec> = world
        .nodes()
        .iter()
        .map(|info| VariableSpec {
            name: info.name.clone(),
            role: info.role,
            kind: Kind::Discrete,
            states: info.states.clone(),
            direction: crate::variable::Direction::Neutral,
        })
        .collect();
    DiscreteDataset::new(specs, rows)
}

/// Samples `n_per_config` rows under every configuration in the space and
/// concatenates the batches (the parametric sweep used for training data).
pub fn sweep_sample(
    world: &BayesianNetwork,
    omega: &ConfigurationSpace,
    n_per_config: usize,
    seed: u64,
) -> Result<DiscreteDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut combined: Option<DiscreteDataset> = None;
    for assignment in omega.iter() {
        let evidence = Evidence::from_states(assignment)?;
        let batch = sample_with_rng(world, &evidence, n_per_config, &mut rng)?;
        combined = Some(match combined {
            None => batch,
            Some(all) => all.concat(&batch)?,
        });
    }
    combined.ok_or_else(|| Error::Parameter(String::from("empty configuration space")))
}

/// One threshold rule: when the measurement sits in the given state, step a
/// config variable by `step` (clamped to its state range).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub measurement: String,
    pub state: usize,
    pub config: String,
    pub step: i32,
}

/// Ordered threshold rules with the current/default configuration as
/// catch-all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
    pub base: BTreeMap<String, usize>,
}

/// First matching rule fires once; no match returns the base configuration.
pub fn rule_based_recommend(
    measurements: &BTreeMap<String, usize>,
    table: &RuleTable,
    world: &BayesianNetwork,
) -> Result<BTreeMap<String, usize>> {
    let mut config = table.base.clone();
    for rule in &table.rules {
        let Some(&observed) = measurements.get(&rule.measurement) else {
            continue;
        };
        if observed != rule.state {
            continue;
        }
        let node = world.node_index(&rule.config)?;
        let card = world.cardinality(node) as i64;
        let current = *config
            .get(&rule.config)
            .ok_or_else(|| Error::Parameter(alloc::format!("rule config {} not in base", rule.config)))?
            as i64;
        let stepped = (current + rule.step as i64).clamp(0, card - 1) as usize;
        config.insert(rule.config.clone(), stepped);
        return Ok(config);
    }
    Ok(config)
}

/// Historical-best baseline: the configuration with the highest mean state
/// index of the target KPI (ordinal bins), ties broken lexicographically.
pub fn greedy_recommend(
    history: &DiscreteDataset,
    target: &str,
) -> Result<BTreeMap<String, usize>> {
    if history.n_rows() == 0 {
        return Err(Error::Parameter(String::from("empty history")));
    }
    let target_col = history.column_index(target)?;
    let config_cols: Vec<usize> = (0..history.n_vars())
        .filter(|&c| history.specs()[c].role == Role::Config)
        .collect();
    if config_cols.is_empty() {
        return Err(Error::Parameter(String::from("history has no config variables")));
    }
    let mut sums: BTreeMap<Vec<usize>, (f64, usize)> = BTreeMap::new();
    for r in 0..history.n_rows() {
        let key: Vec<usize> = config_cols.iter().map(|&c| history.cell(r, c)).collect();
        let entry = sums.entry(key).or_insert((0.0, 0));
        entry.0 += history.cell(r, target_col) as f64;
        entry.1 += 1;
    }
    // BTreeMap iteration is ascending, so on ties the lexicographically
    // smaller configuration is kept.
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (key, (sum, count)) in &sums {
        let mean = sum / *count as f64;
        let replace = match &best {
            None => true,
            Some((_, best_mean)) => mean > *best_mean,
        };
        if replace {
            best = Some((key.clone(), mean));
        }
    }
    let (key, _) = best.expect("non-empty history");
    Ok(config_cols
        .iter()
        .zip(key)
        .map(|(&c, s)| (history.specs()[c].name.clone(), s))
        .collect())
}

/// Engine configuration for the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub delta: ConstraintSet,
    pub score: ScoreParams,
    pub search: SearchConfig,
    /// CPD estimation pseudo-count.
    pub alpha: f64,
    pub update: UpdateParams,
    pub utility: UtilitySpec,
    /// Warm-up sweep size per configuration.
    pub warmup_per_config: usize,
    /// Telemetry rows collected per cycle.
    pub batch_size: usize,
}

/// One closed-loop cycle record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub cycle: usize,
    pub context: Option<String>,
    /// Configuration applied during this cycle (the previous cycle's
    /// recommendation after warm-up).
    pub applied: BTreeMap<String, String>,
    /// Per-KPI state frequencies observed in this cycle's batch.
    pub kpi_summary: BTreeMap<String, Vec<f64>>,
    pub model_version: usize,
    pub relearned: bool,
    pub recommended: BTreeMap<String, String>,
    pub score: f64,
    pub confidence: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopLog {
    pub seed: u64,
    pub cycles: usize,
    pub records: Vec<LoopRecord>,
}

/// Runs the four-process closed loop: sample telemetry under the applied
/// configuration and active context, update the model (incremental, with
/// full relearns at the configured trigger), recommend, apply, log.
/// Deterministic under the seed.
pub fn run_closed_loop(
    world: &GroundTruthSpec,
    context_schedule: &[(usize, String)],
    settings: &EngineSettings,
    cycles: usize,
    seed: u64,
) -> Result<LoopLog> {
    if cycles == 0 {
        return Err(Error::Parameter(String::from("need at least one cycle")));
    }
    if settings.warmup_per_config == 0 || settings.batch_size == 0 {
        return Err(Error::Parameter(String::from(
            "warm-up and batch sizes must be positive",
        )));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let context_at = |cycle: usize| -> Option<&str> {
        context_schedule
            .iter()
            .filter(|(c, _)| *c <= cycle)
            .next_back()
            .map(|(_, name)| name.as_str())
    };

    // Warm-up: parametric sweep across the full grid under the first
    // context, then initial structure + parameter learning.
    let omega_world = ConfigurationSpace::full_grid(&world.world)?;
    let initial_world = world.network_for(context_at(1))?;
    let mut accumulated = sweep_sample(
        &initial_world,
        &omega_world,
        settings.warmup_per_config,
        seeds.next_u64(),
    )?;
    let mut model = full_relearn(
        &accumulated,
        &settings.delta,
        &settings.score,
        &settings.search,
        settings.alpha,
    )?;
    let mut model_version = 1usize;
    let mut training_size = accumulated.n_rows();
    let mut new_since_relearn = 0usize;

    let omega_model = ConfigurationSpace::full_grid(&model)?;
    let mut current = recommend(&model, &omega_model, &Evidence::empty(), &settings.utility)?;

    let kpi_nodes = world.world.nodes_with_role(Role::Kpi);
    let mut records = Vec::with_capacity(cycles);
    for cycle in 1..=cycles {
        let context = context_at(cycle).map(String::from);
        let world_now = world.network_for(context.as_deref())?;
        let applied: BTreeMap<String, String> = current.config.clone();
        let pairs: Vec<(&str, &str)> = applied
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        let pinned = Evidence::from_labels(&world_now, &pairs)?;
        let batch = sample_with_rng(
            &world_now,
            &pinned,
            settings.batch_size,
            &mut ChaCha8Rng::seed_from_u64(seeds.next_u64()),
        )?;

        accumulated = accumulated.concat(&batch)?;
        new_since_relearn += batch.n_rows();
        let relearn_now = settings.update.full_relearn_trigger == RelearnTrigger::SampleCount
            && new_since_relearn > training_size;
        if relearn_now {
            model = full_relearn(
                &accumulated,
                &settings.delta,
                &settings.score,
                &settings.search,
                settings.alpha,
            )?;
            training_size = accumulated.n_rows();
            new_since_relearn = 0;
        } else {
            model = incremental_update(&model, &batch, &settings.update)?.0;
        }
        model_version += 1;

        let recommendation: Recommendation =
            recommend(&model, &omega_model, &Evidence::empty(), &settings.utility)?;

        let mut kpi_summary = BTreeMap::new();
        for &k in &kpi_nodes {
            let col = batch.column_index(&world.world.node(k).name)?;
            let mut freq = alloc::vec![0.0f64; batch.cardinality(col)];
            for r in 0..batch.n_rows() {
                freq[batch.cell(r, col)] += 1.0;
            }
            for f in &mut freq {
                *f /= batch.n_rows() as f64;
            }
            kpi_summary.insert(world.world.node(k).name.clone(), freq);
        }

        records.push(LoopRecord {
            cycle,
            context,
            applied,
            kpi_summary,
            model_version,
            relearned: relearn_now,
            recommended: recommendation.config.clone(),
            score: recommendation.score,
            confidence: recommendation.confidence,
            entropy: recommendation.entropy,
        });
        current = recommendation;
    }

    Ok(LoopLog {
        seed,
        cycles,
        records,
    })
}

/// True expected utility of a configuration under a world model, computed by
/// exact inference on the world itself.
pub fn true_expected_utility(
    world: &BayesianNetwork,
    config: &BTreeMap<String, String>,
    util: &UtilitySpec,
) -> Result<f64> {
    let pairs: Vec<(&str, &str)> = config.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    let evidence = Evidence::from_labels(world, &pairs)?;
    let mut total = 0.0;
    for entry in &util.entries {
        let node = world.node_index(&entry.kpi)?;
        let posterior = crate::inference::eliminate(world, node, &evidence)?;
        total += entry.weight * crate::inference::expected_utility(&posterior, &entry.table)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::NodeInfo;
    use crate::cpd::Cpd;
    use crate::dag::Dag;
    use alloc::vec;

    /// cfg (2 states) -> kpi (2 states), strongly coupled.
    fn tiny_world() -> BayesianNetwork {
        let mut dag = Dag::new(vec![String::from("cfg"), String::from("kpi")]);
        dag.add_edge(0, 1).unwrap();
        let cpds = vec![
            Cpd::new(0, vec![], 2, vec![], vec![0.5, 0.5]).unwrap(),
            Cpd::new(1, vec![0], 2, vec![2], vec![0.9, 0.1, 0.2, 0.8]).unwrap(),
        ];
        let nodes = vec![
            NodeInfo {
                name: String::from("cfg"),
                role: Role::Config,
                states: vec![String::from("off"), String::from("on")],
            },
            NodeInfo {
                name: String::from("kpi"),
                role: Role::Kpi,
                states: vec![String::from("low"), String::from("high")],
            },
        ];
        BayesianNetwork::new(dag, cpds, nodes).unwrap()
    }

    #[test]
    fn same_seed_same_dataset() {
        let world = tiny_world();
        let ev = Evidence::from_states(&[(0, 1)]).unwrap();
        let a = forward_sample(&world, &ev, 500, 99).unwrap();
        let b = forward_sample(&world, &ev, 500, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pinned_config_column_is_constant() {
        let world = tiny_world();
        let ev = Evidence::from_states(&[(0, 1)]).unwrap();
        let data = forward_sample(&world, &ev, 200, 7).unwrap();
        assert!((0..data.n_rows()).all(|r| data.cell(r, 0) == 1));
    }

    #[test]
    fn non_config_evidence_rejected() {
        let world = tiny_world();
        let ev = Evidence::from_states(&[(1, 0)]).unwrap();
        assert!(forward_sample(&world, &ev, 10, 0).is_err());
    }

    #[test]
    fn empirical_frequencies_match_cpt() {
        let world = tiny_world();
        let ev = Evidence::from_states(&[(0, 1)]).unwrap();
        let data = forward_sample(&world, &ev, 100_000, 42).unwrap();
        let mut high = 0usize;
        for r in 0..data.n_rows() {
            high += data.cell(r, 1);
        }
        let freq = high as f64 / data.n_rows() as f64;
        assert!((freq - 0.8).abs() < 0.01, "empirical {freq}");
    }

    #[test]
    fn rule_fires_and_clamps() {
        let world = tiny_world();
        let table = RuleTable {
            rules: vec![Rule {
                measurement: String::from("m"),
                state: 0,
                config: String::from("cfg"),
                step: 1,
            }],
            base: BTreeMap::from([(String::from("cfg"), 1usize)]),
        };
        // Matching measurement: step from 1 clamps at the top state 1.
        let m = BTreeMap::from([(String::from("m"), 0usize)]);
        let cfg = rule_based_recommend(&m, &table, &world).unwrap();
        assert_eq!(cfg.get("cfg"), Some(&1));
        // No match: base returned.
        let cfg = rule_based_recommend(&BTreeMap::new(), &table, &world).unwrap();
        assert_eq!(cfg, table.base);
    }

    #[test]
    fn greedy_picks_highest_mean_with_lex_ties() {
        let specs = vec![
            VariableSpec::discrete("cfg", Role::Config, &["0", "1"]),
            VariableSpec::discrete("kpi", Role::Kpi, &["0", "1", "2"]),
        ];
        // cfg=0 mean 1.0, cfg=1 mean 2.0.
        let rows = vec![0, 0, 0, 2, 1, 2, 1, 2];
        let data = DiscreteDataset::new(specs.clone(), rows).unwrap();
        let cfg = greedy_recommend(&data, "kpi").unwrap();
        assert_eq!(cfg.get("cfg"), Some(&1));
        // Exact tie: lexicographically smaller config wins.
        let rows = vec![0, 1, 1, 1];
        let data = DiscreteDataset::new(specs, rows).unwrap();
        let cfg = greedy_recommend(&data, "kpi").unwrap();
        assert_eq!(cfg.get("cfg"), Some(&0));
    }

    #[test]
    fn empty_history_rejected() {
        let specs = vec![
            VariableSpec::discrete("cfg", Role::Config, &["0"]),
            VariableSpec::discrete("kpi", Role::Kpi, &["0"]),
        ];
        let data = DiscreteDataset::new(specs, vec![]).unwrap();
        assert!(greedy_recommend(&data, "kpi").is_err());
    }
}
