//! Elicited edge constraints: prompt construction, response parsing, ensemble
//! majority voting and validation.
//!
//! Constraints arrive either from a chat-completion endpoint (transport lives
//! in the companion crate) or from a constraint file. Either way they end up
//! as a validated [`ConstraintSet`]: disjoint mandatory/prohibited directed
//! edge sets whose mandatory subgraph is acyclic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::variable::{Role, VariableSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConstraintKind {
    /// Causal relationship that must exist in the learned structure.
    Mandatory,
    /// Relationship that violates causality and must never appear.
    Prohibited,
}

/// One elicited directed-edge constraint with its justification and the
/// number of ensemble runs that voted for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeConstraint {
    #[serde(rename = "type")]
    pub kind: ConstraintKind,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub reasoning: String,
    #[serde(default = "default_votes")]
    pub votes: u32,
}

fn default_votes() -> u32 {
    1
}

/// The elicited constraint sets: mandatory edges, prohibited edges and the
/// per-edge provenance records behind them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub mandatory: BTreeSet<(String, String)>,
    pub prohibited: BTreeSet<(String, String)>,
    pub provenance: Vec<EdgeConstraint>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.mandatory.is_empty() && self.prohibited.is_empty()
    }

    pub fn is_mandatory(&self, source: &str, target: &str) -> bool {
        self.mandatory
            .contains(&(String::from(source), String::from(target)))
    }

    pub fn is_prohibited(&self, source: &str, target: &str) -> bool {
        self.prohibited
            .contains(&(String::from(source), String::from(target)))
    }

    /// Builds a constraint set directly from edge lists (used by fixtures and
    /// tests). Runs full validation against the given specs.
    pub fn from_edges(
        mandatory: &[(&str, &str)],
        prohibited: &[(&str, &str)],
        specs: &[VariableSpec],
    ) -> Result<Self> {
        let mut provenance = Vec::new();
        for &(s, t) in mandatory {
            provenance.push(EdgeConstraint {
                kind: ConstraintKind::Mandatory,
                source: String::from(s),
                target: String::from(t),
                reasoning: String::new(),
                votes: 1,
            });
        }
        for &(s, t) in prohibited {
            provenance.push(EdgeConstraint {
                kind: ConstraintKind::Prohibited,
                source: String::from(s),
                target: String::from(t),
                reasoning: String::new(),
                votes: 1,
            });
        }
        let set = Self {
            mandatory: mandatory
                .iter()
                .map(|&(s, t)| (String::from(s), String::from(t)))
                .collect(),
            prohibited: prohibited
                .iter()
                .map(|&(s, t)| (String::from(s), String::from(t)))
                .collect(),
            provenance,
        };
        validate_constraints(set, specs)
    }
}

/// Ensemble configuration: number of independent elicitation runs and the
/// (strict) majority threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_runs: usize,
    /// An edge is retained iff it appears in strictly more than this fraction
    /// of runs.
    pub vote_threshold: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            n_runs: 5,
            vote_threshold: 0.5,
        }
    }
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Parameter(String::from("ensemble needs at least one run")));
        }
        if !(self.vote_threshold > 0.0 && self.vote_threshold <= 1.0) {
            return Err(Error::Parameter(String::from(
                "vote threshold must lie in (0, 1]",
            )));
        }
        Ok(())
    }
}

/// The staged elicitation prompt: a system preamble, a user message walking
/// the five reasoning stages, and the machine-parseable output contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    /// Stage titles in their fixed order.
    pub stages: Vec<String>,
    pub output_schema: String,
}

const STAGE_TITLES: [&str; 5] = [
    "Parameter classification",
    "Causality tracing",
    "Impossibility conditions",
    "Parameter ranges",
    "Verification",
];

const OUTPUT_SCHEMA: &str = r#"A fenced ```json code block containing an array of records:
[{"type": "MANDATORY" | "PROHIBITED", "source": "<variable>", "target": "<variable>", "reasoning": "<justification>"}]"#;

/// Builds the deterministic five-stage elicitation prompt for a variable set.
pub fn build_prompt(specs: &[VariableSpec]) -> Result<PromptBundle> {
    if specs.is_empty() {
        return Err(Error::Parameter(String::from("no variables to reason about")));
    }
    let system_text = String::from(
        "You are a 5G radio access network domain expert. You analyze causal \
         relationships between gNB configuration parameters, radio measurements \
         and performance KPIs, grounding every claim in 3GPP specifications.",
    );

    let mut user = String::new();
    user.push_str("Analyze the causal structure among the following network variables.\n\nVariables:\n");
    for spec in specs {
        let role = match spec.role {
            Role::Config => "configuration parameter",
            Role::Measurement => "measurement",
            Role::Kpi => "performance KPI",
        };
        user.push_str(&alloc::format!("- {} ({role})\n", spec.name));
    }
    user.push_str(
        "\nWork through the following stages in order, showing your reasoning at each stage.\n",
    );
    for (i, title) in STAGE_TITLES.iter().enumerate() {
        user.push_str(&alloc::format!("\nStage {}: {title}\n", i + 1));
        let body = match i {
            0 => "Classify each variable as a control parameter, a measurement, or a performance metric.",
            1 => "Trace which variables causally influence which others, giving the physical or protocol mechanism for each candidate edge.",
            2 => "Check impossibility conditions: reject relationships that violate temporal ordering, physical mechanisms, or protocol constraints.",
            3 => "State the legal value range of each parameter.",
            4 => "Verify every causal relationship: each must be grounded in a 3GPP specification, state the direction of causality, and explain the mechanism involved.",
            _ => unreachable!(),
        };
        user.push_str(body);
        user.push('\n');
    }
    user.push_str("\nAfter the stages, present the verified causality as structured output.\n");
    user.push_str("Mandatory edges are causal relationships that must exist based on physical mechanisms, temporal ordering, or protocol specifications. ");
    user.push_str("Prohibited edges are relationships that violate causality, including reverse temporal ordering, physically impossible mechanisms, and protocol violations.\n\nOutput format:\n");
    user.push_str(OUTPUT_SCHEMA);
    user.push('\n');

    Ok(PromptBundle {
        system_text,
        user_text: user,
        stages: STAGE_TITLES.iter().map(|s| s.to_string()).collect(),
        output_schema: String::from(OUTPUT_SCHEMA),
    })
}

/// Outcome of parsing one raw model response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub constraints: Vec<EdgeConstraint>,
    /// Records skipped because they were malformed (unknown kind, self-loop,
    /// missing fields).
    pub malformed: usize,
    /// Parameter ranges gathered by the ranges stage, kept for provenance
    /// only.
    pub ranges: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(rename = "type")]
    kind: String,
    source: String,
    target: String,
    #[serde(default)]
    reasoning: String,
}

#[derive(Deserialize)]
struct RawResponse {
    constraints: Vec<RawRecord>,
    #[serde(default)]
    ranges: BTreeMap<String, serde_json::Value>,
}

/// Extracts constraint records from raw response text.
///
/// Accepts a fenced (or bare) JSON array of records, a JSON object with
/// `constraints` and optional `ranges` fields, or a pipe-delimited table as
/// fallback. Malformed records are skipped and counted; if nothing parses the
/// call fails with an excerpt of the offending text.
pub fn parse_constraints(text: &str) -> Result<ParseReport> {
    let mut report = ParseReport::default();

    for candidate in json_candidates(text) {
        if let Ok(records) = serde_json::from_str::<Vec<RawRecord>>(candidate) {
            absorb_records(&mut report, records);
        } else if let Ok(resp) = serde_json::from_str::<RawResponse>(candidate) {
            absorb_records(&mut report, resp.constraints);
            for (k, v) in resp.ranges {
                report.ranges.insert(k, stringify(&v));
            }
        }
    }

    if report.constraints.is_empty() && report.malformed == 0 {
        parse_pipe_table(text, &mut report);
    }

    if report.constraints.is_empty() && report.malformed == 0 {
        let excerpt: String = text.chars().take(160).collect();
        return Err(Error::Parse(alloc::format!(
            "no constraint records found in response: {excerpt:?}"
        )));
    }
    Ok(report)
}

fn stringify(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn absorb_records(report: &mut ParseReport, records: Vec<RawRecord>) {
    for record in records {
        match record.kind.to_ascii_uppercase().as_str() {
            "MANDATORY" | "PROHIBITED" => {}
            other => {
                log::warn!("skipping constraint with unknown kind {other:?}");
                report.malformed += 1;
                continue;
            }
        }
        let kind = if record.kind.eq_ignore_ascii_case("MANDATORY") {
            ConstraintKind::Mandatory
        } else {
            ConstraintKind::Prohibited
        };
        let source = record.source.trim();
        let target = record.target.trim();
        if source.is_empty() || target.is_empty() || source == target {
            log::warn!("skipping malformed constraint {source:?} -> {target:?}");
            report.malformed += 1;
            continue;
        }
        report.constraints.push(EdgeConstraint {
            kind,
            source: String::from(source),
            target: String::from(target),
            reasoning: record.reasoning,
            votes: 1,
        });
    }
}

/// Fenced ```json blocks first, plain fenced blocks next, then the whole text
/// if it looks like bare JSON.
fn json_candidates(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let body = &after[body_start..];
        if let Some(end) = body.find("```") {
            out.push(body[..end].trim());
            rest = &body[end + 3..];
        } else {
            break;
        }
    }
    if out.is_empty() {
        let trimmed = text.trim();
        if trimmed.starts_with('[') || trimmed.starts_with('{') {
            out.push(trimmed);
        }
    }
    out
}

/// Fallback: rows of `MANDATORY | source | target | reasoning`, with or
/// without leading pipe.
fn parse_pipe_table(text: &str, report: &mut ParseReport) {
    for line in text.lines() {
        if !line.contains('|') {
            continue;
        }
        let cells: Vec<&str> = line
            .trim()
            .trim_start_matches('|')
            .trim_end_matches('|')
            .split('|')
            .map(str::trim)
            .collect();
        if cells.len() < 3 {
            continue;
        }
        let kind_cell = cells[0].to_ascii_uppercase();
        if kind_cell != "MANDATORY" && kind_cell != "PROHIBITED" {
            continue; // header or separator row
        }
        let record = RawRecord {
            kind: kind_cell,
            source: String::from(cells[1]),
            target: String::from(cells[2]),
            reasoning: cells.get(3).map(|s| String::from(*s)).unwrap_or_default(),
        };
        absorb_records(report, alloc::vec![record]);
    }
}

/// Majority voting over the per-run constraint lists. An (edge, kind) pair is
/// retained iff it appears in strictly more than `vote_threshold * n_runs`
/// runs; an edge retained as both mandatory and prohibited is dropped from
/// both sets.
pub fn aggregate_votes(
    runs: &[Vec<EdgeConstraint>],
    params: &EnsembleParams,
) -> Result<ConstraintSet> {
    params.validate()?;
    if runs.len() != params.n_runs {
        return Err(Error::Parameter(alloc::format!(
            "got {} runs, expected {}",
            runs.len(),
            params.n_runs
        )));
    }

    // Per-run dedup so one run cannot cast two votes for the same pair.
    let mut votes: BTreeMap<(ConstraintKind, String, String), (u32, String)> = BTreeMap::new();
    for run in runs {
        let mut seen: BTreeSet<(ConstraintKind, &str, &str)> = BTreeSet::new();
        for c in run {
            if !seen.insert((c.kind, &c.source, &c.target)) {
                continue;
            }
            let entry = votes
                .entry((c.kind, c.source.clone(), c.target.clone()))
                .or_insert_with(|| (0, c.reasoning.clone()));
            entry.0 += 1;
            if entry.1.is_empty() {
                entry.1 = c.reasoning.clone();
            }
        }
    }

    let needed = params.vote_threshold * params.n_runs as f64;
    let mut set = ConstraintSet::empty();
    for ((kind, source, target), (count, reasoning)) in votes {
        if (count as f64) <= needed {
            continue;
        }
        let edge = (source.clone(), target.clone());
        match kind {
            ConstraintKind::Mandatory => set.mandatory.insert(edge),
            ConstraintKind::Prohibited => set.prohibited.insert(edge),
        };
        set.provenance.push(EdgeConstraint {
            kind,
            source,
            target,
            reasoning,
            votes: count,
        });
    }

    drop_conflicts(&mut set);
    Ok(set)
}

/// Removes edges retained as both mandatory and prohibited.
fn drop_conflicts(set: &mut ConstraintSet) {
    let conflicts: Vec<(String, String)> = set
        .mandatory
        .intersection(&set.prohibited)
        .cloned()
        .collect();
    for edge in &conflicts {
        log::warn!(
            "edge {} -> {} elicited as both mandatory and prohibited; dropping from both sets",
            edge.0,
            edge.1
        );
        set.mandatory.remove(edge);
        set.prohibited.remove(edge);
        set.provenance
            .retain(|c| !(c.source == edge.0 && c.target == edge.1));
    }
}

/// Validates a constraint set against the variable specs: drops constraints
/// naming unknown variables, removes mandatory/prohibited conflicts, and
/// fails if the mandatory edges contain a directed cycle.
pub fn validate_constraints(
    mut set: ConstraintSet,
    specs: &[VariableSpec],
) -> Result<ConstraintSet> {
    let known: BTreeSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    let resolves = |edge: &(String, String)| {
        known.contains(edge.0.as_str()) && known.contains(edge.1.as_str())
    };
    for edge in set
        .mandatory
        .iter()
        .chain(set.prohibited.iter())
        .filter(|e| !resolves(e))
    {
        log::warn!("dropping constraint with unknown variable: {} -> {}", edge.0, edge.1);
    }
    set.mandatory.retain(resolves);
    set.prohibited.retain(resolves);
    set.provenance
        .retain(|c| known.contains(c.source.as_str()) && known.contains(c.target.as_str()));

    drop_conflicts(&mut set);

    // The mandatory subgraph must embed in a DAG.
    let mut dag = Dag::new(specs.iter().map(|s| s.name.clone()).collect());
    for (s, t) in &set.mandatory {
        if let Err(Error::Cycle { path }) = dag.add_edge_by_name(s, t) {
            return Err(Error::UnsatisfiableConstraints { cycle: path });
        }
    }
    Ok(set)
}

/// Parses a constraint file body: a JSON array of edge-constraint records.
/// Duplicate (kind, source, target) rows are merged with votes summed. The
/// result still needs [`validate_constraints`] against the variable specs.
pub fn constraints_from_json(body: &str) -> Result<ConstraintSet> {
    let records: Vec<EdgeConstraint> = serde_json::from_str(body)
        .map_err(|e| Error::Parse(alloc::format!("constraint file: {e}")))?;
    let mut merged: BTreeMap<(ConstraintKind, String, String), EdgeConstraint> = BTreeMap::new();
    for record in records {
        if record.source == record.target {
            return Err(Error::Parse(alloc::format!(
                "self-loop constraint on {}",
                record.source
            )));
        }
        match merged.entry((record.kind, record.source.clone(), record.target.clone())) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(record);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                e.get_mut().votes += record.votes;
            }
        }
    }
    let mut set = ConstraintSet::empty();
    for ((kind, source, target), record) in merged {
        match kind {
            ConstraintKind::Mandatory => set.mandatory.insert((source, target)),
            ConstraintKind::Prohibited => set.prohibited.insert((source, target)),
        };
        set.provenance.push(record);
    }
    drop_conflicts(&mut set);
    Ok(set)
}
