//! Quantile discretization of continuous telemetry.
//!
//! Continuous columns are cut at the i/k quantiles (linear interpolation
//! between order statistics) into at most k ordinal bins; config columns keep
//! their original discrete values. The resulting map is invertible to bin
//! labels and serialized alongside the dataset for reproducibility.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{DiscreteDataset, RawDataset};
use crate::error::{Error, Result};
use crate::variable::{validate_specs, Kind, VariableSpec};

/// Bin edges and labels for one continuous variable. Bin `i` covers
/// `(edges[i-1], edges[i]]`, with the outer bins open-ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousBins {
    pub edges: Vec<f64>,
    pub labels: Vec<String>,
}

impl ContinuousBins {
    /// Index of the bin containing `value`: the number of edges strictly
    /// below it. Values equal to an edge fall in the lower bin.
    pub fn state_index(&self, value: f64) -> usize {
        self.edges.iter().take_while(|&&e| e < value).count()
    }
}

/// Raw legal values (in ordinal order) for one discrete variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteValues {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
}

impl DiscreteValues {
    pub fn state_index(&self, value: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == value)
    }
}

/// Mapping from one variable's raw values to state indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VariableMap {
    Continuous(ContinuousBins),
    Discrete(DiscreteValues),
}

/// Per-variable raw-to-state mapping for a whole dataset, keyed in spec
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationMap {
    pub variables: Vec<(String, VariableMap)>,
}

impl DiscretizationMap {
    pub fn get(&self, name: &str) -> Option<&VariableMap> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    /// Maps a raw value to (state index, bin label).
    pub fn apply(&self, name: &str, value: f64) -> Result<(usize, &str)> {
        let map = self
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(String::from(name)))?;
        match map {
            VariableMap::Continuous(bins) => {
                let idx = bins.state_index(value);
                Ok((idx, &bins.labels[idx]))
            }
            VariableMap::Discrete(values) => {
                let idx = values.state_index(value).ok_or_else(|| Error::UnknownState {
                    variable: String::from(name),
                    value: format_float(value),
                })?;
                Ok((idx, &values.labels[idx]))
            }
        }
    }
}

/// Quantile cut points for `k` bins: up to k-1 strictly increasing edges at
/// the i/k quantiles, computed by linear interpolation between order
/// statistics. Duplicate edges collapse, shrinking the effective bin count;
/// all-equal data yields no edges (a single bin).
pub fn quantile_bins(values: &[f64], k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Parameter(alloc::format!(
            "bin count must be at least 2, got {k}"
        )));
    }
    if values.is_empty() {
        return Err(Error::EmptyData(String::from("quantile_bins needs samples")));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));

    let mut edges = Vec::with_capacity(k - 1);
    for i in 1..k {
        let q = i as f64 / k as f64;
        let edge = interpolated_quantile(&sorted, q);
        if edges.last().is_none_or(|&last| edge > last) {
            edges.push(edge);
        } else {
            log::warn!("collapsing duplicate quantile edge {edge} at q={q}");
        }
    }
    // An edge at the sample maximum would leave the top bin empty (values map
    // to the bin at or below an edge), so constant data yields a single bin.
    let max = sorted[sorted.len() - 1];
    edges.retain(|&e| e < max);
    Ok(edges)
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Ordinal labels for `n` bins; the 3-bin case uses low/medium/high.
pub fn bin_labels(n: usize) -> Vec<String> {
    match n {
        1 => alloc::vec![String::from("all")],
        2 => alloc::vec![String::from("low"), String::from("high")],
        3 => alloc::vec![
            String::from("low"),
            String::from("medium"),
            String::from("high"),
        ],
        _ => (0..n).map(|i| alloc::format!("bin{i}")).collect(),
    }
}

fn format_float(v: f64) -> String {
    if v == libm::trunc(v) && libm::fabs(v) < 1e15 {
        alloc::format!("{}", v as i64)
    } else {
        alloc::format!("{v}")
    }
}

/// Discretizes a raw dataset: continuous columns are quantile-binned with `k`
/// bins, discrete columns are mapped by value identity against their spec
/// states. Returns the dataset together with the invertible map.
pub fn discretize(
    raw: &RawDataset,
    k: usize,
    specs: &[VariableSpec],
) -> Result<(DiscreteDataset, DiscretizationMap)> {
    validate_specs(specs)?;
    if raw.row_count == 0 {
        return Err(Error::EmptyData(String::from("no rows to discretize")));
    }

    let mut maps = Vec::with_capacity(specs.len());
    let mut out_specs = Vec::with_capacity(specs.len());
    for spec in specs {
        let column = raw.column(&spec.name)?;
        match spec.kind {
            Kind::Continuous => {
                let edges = quantile_bins(column, k)?;
                let labels = bin_labels(edges.len() + 1);
                let mut out = spec.clone();
                out.states = labels.clone();
                out_specs.push(out);
                maps.push((spec.name.clone(), VariableMap::Continuous(ContinuousBins { edges, labels })));
            }
            Kind::Discrete => {
                let values: Vec<f64> = spec
                    .states
                    .iter()
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| {
                            Error::Schema(alloc::format!(
                                "discrete state {s} of {} is not numeric",
                                spec.name
                            ))
                        })
                    })
                    .collect::<Result<_>>()?;
                for &v in column {
                    if !values.contains(&v) {
                        return Err(Error::UnknownState {
                            variable: spec.name.clone(),
                            value: format_float(v),
                        });
                    }
                }
                out_specs.push(spec.clone());
                maps.push((
                    spec.name.clone(),
                    VariableMap::Discrete(DiscreteValues {
                        values,
                        labels: spec.states.clone(),
                    }),
                ));
            }
        }
    }

    let map = DiscretizationMap { variables: maps };
    let mut rows = Vec::with_capacity(raw.row_count * specs.len());
    for r in 0..raw.row_count {
        for spec in specs {
            let value = raw.column(&spec.name)?[r];
            let (idx, _) = map.apply(&spec.name, value)?;
            rows.push(idx as u8);
        }
    }
    let dataset = DiscreteDataset::new(out_specs, rows)?;
    Ok((dataset, map))
}
