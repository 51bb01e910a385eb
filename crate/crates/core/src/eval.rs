//! Structural quality metrics against a ground-truth DAG, and KPI comparison
//! reports.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::error::{Error, Result};

/// Edge-level comparison of a learned DAG against ground truth. Every truth
/// edge is exactly one of correct, missed or reversed; learned edges matching
/// no truth edge in either direction are extra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub correct: usize,
    pub missed: usize,
    pub reversed: usize,
    pub extra: usize,
    /// correct / (correct + reversed); 0 when nothing was found.
    pub directional_accuracy: f64,
    /// correct / truth_edge_count.
    pub recall: f64,
    pub truth_edge_count: usize,
}

impl StructureMetrics {
    /// Plain-text row in the evaluation table's column order
    /// (Correct, Miss, Rev., Dir., Recall).
    pub fn table_row(&self) -> String {
        alloc::format!(
            "{:>7} {:>5} {:>5} {:>6.2} {:>6.2}",
            self.correct,
            self.missed,
            self.reversed,
            self.directional_accuracy,
            self.recall
        )
    }

    pub fn table_header() -> String {
        alloc::format!(
            "{:>7} {:>5} {:>5} {:>6} {:>6}",
            "Correct",
            "Miss",
            "Rev.",
            "Dir.",
            "Recall"
        )
    }
}

/// Classifies learned edges against the ground truth by name pairs.
pub fn compare_structures(learned: &Dag, truth: &Dag) -> StructureMetrics {
    let learned_edges = learned.named_edges();
    let truth_edges = truth.named_edges();
    let has = |edges: &[(String, String)], s: &str, t: &str| {
        edges.iter().any(|(a, b)| a == s && b == t)
    };

    let mut correct = 0;
    let mut missed = 0;
    let mut reversed = 0;
    for (s, t) in &truth_edges {
        if has(&learned_edges, s, t) {
            correct += 1;
        } else if has(&learned_edges, t, s) {
            reversed += 1;
        } else {
            missed += 1;
        }
    }
    let extra = learned_edges
        .iter()
        .filter(|(s, t)| !has(&truth_edges, s, t) && !has(&truth_edges, t, s))
        .count();

    let truth_edge_count = truth_edges.len();
    let directional_accuracy = if correct + reversed == 0 {
        0.0
    } else {
        correct as f64 / (correct + reversed) as f64
    };
    let recall = if truth_edge_count == 0 {
        0.0
    } else {
        correct as f64 / truth_edge_count as f64
    };
    StructureMetrics {
        correct,
        missed,
        reversed,
        extra,
        directional_accuracy,
        recall,
        truth_edge_count,
    }
}

/// Labeled KPI sample vectors for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSamples {
    pub label: String,
    /// (KPI name, raw sample vector) pairs.
    pub kpis: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiStats {
    pub kpi: String,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    /// Empirical CDF as (value, cumulative fraction) steps, duplicates
    /// collapsed.
    pub cdf: Vec<(f64, f64)>,
    /// Percent change of the mean versus the baseline label.
    pub improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    pub kpis: Vec<KpiStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub baseline: String,
    pub labels: Vec<LabelReport>,
}

/// Summary statistics and empirical CDFs per (label, KPI), with percentage
/// improvement of each mean against the designated baseline label.
pub fn kpi_report(runs: &[KpiSamples], baseline: &str) -> Result<KpiReport> {
    let base = runs
        .iter()
        .find(|r| r.label == baseline)
        .ok_or_else(|| Error::Parameter(alloc::format!("unknown baseline label {baseline}")))?;
    for run in runs {
        for (kpi, samples) in &run.kpis {
            if samples.is_empty() {
                return Err(Error::EmptyData(alloc::format!(
                    "no samples for {kpi} in run {}",
                    run.label
                )));
            }
        }
    }

    let baseline_mean = |kpi: &str| -> Option<f64> {
        base.kpis
            .iter()
            .find(|(k, _)| k == kpi)
            .map(|(_, v)| mean(v))
    };

    let mut labels = Vec::with_capacity(runs.len());
    for run in runs {
        let mut kpis = Vec::with_capacity(run.kpis.len());
        for (kpi, samples) in &run.kpis {
            let m = mean(samples);
            let var = samples.iter().map(|&x| (x - m) * (x - m)).sum::<f64>()
                / samples.len() as f64;
            let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let improvement_pct = if run.label == baseline {
                None
            } else {
                baseline_mean(kpi).map(|b| {
                    if b == 0.0 {
                        f64::INFINITY
                    } else {
                        (m - b) / b * 100.0
                    }
                })
            };
            kpis.push(KpiStats {
                kpi: kpi.clone(),
                mean: m,
                variance: var,
                min,
                max,
                cdf: empirical_cdf(samples),
                improvement_pct,
            });
        }
        labels.push(LabelReport {
            label: run.label.clone(),
            kpis,
        });
    }
    Ok(KpiReport {
        baseline: String::from(baseline),
        labels,
    })
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn dag(names: &[&str], edges: &[(&str, &str)]) -> Dag {
        let mut d = Dag::new(names.iter().map(|s| String::from(*s)).collect());
        for (u, v) in edges {
            d.add_edge_by_name(u, v).unwrap();
        }
        d
    }

    #[test]
    fn identical_graphs_are_perfect() {
        let t = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let m = compare_structures(&t, &t);
        assert_eq!((m.correct, m.missed, m.reversed, m.extra), (2, 0, 0, 0));
        assert_eq!(m.directional_accuracy, 1.0);
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn fully_reversed_graph_scores_zero() {
        let truth = dag(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        let flipped = dag(&["A", "B", "C"], &[("B", "A"), ("C", "B")]);
        let m = compare_structures(&flipped, &truth);
        assert_eq!((m.correct, m.reversed, m.missed), (0, 2, 0));
        assert_eq!(m.directional_accuracy, 0.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn reported_mix_matches_reference_arithmetic() {
        // 14 truth edges; learned has 10 correct, 2 reversed, 2 missed.
        let names: Vec<String> = (0..15).map(|i| alloc::format!("n{i}")).collect();
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let truth_edges: Vec<(&str, &str)> = (0..14).map(|i| (name_refs[i], name_refs[i + 1])).collect();
        let truth = dag(&name_refs, &truth_edges);
        let mut learned_edges: Vec<(&str, &str)> = Vec::new();
        for (i, &(u, v)) in truth_edges.iter().enumerate() {
            match i {
                0 | 1 => learned_edges.push((v, u)), // reversed
                2 | 3 => {}                          // missed
                _ => learned_edges.push((u, v)),     // correct
            }
        }
        let learned = dag(&name_refs, &learned_edges);
        let m = compare_structures(&learned, &truth);
        assert_eq!((m.correct, m.reversed, m.missed), (10, 2, 2));
        assert!((m.directional_accuracy - 0.83).abs() <= 0.005);
        assert!((m.recall - 0.71).abs() <= 0.005);
    }

    #[test]
    fn extra_edges_counted_but_excluded_from_metrics() {
        let truth = dag(&["A", "B", "C"], &[("A", "B")]);
        let learned = dag(&["A", "B", "C"], &[("A", "B"), ("A", "C")]);
        let m = compare_structures(&learned, &truth);
        assert_eq!(m.extra, 1);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.directional_accuracy, 1.0);
    }

    proptest! {
        // correct + missed + reversed partitions the truth edges on random
        // graph pairs.
        #[test]
        fn truth_edges_are_partitioned(
            truth_mask in proptest::collection::vec(any::<bool>(), 20),
            learned_mask in proptest::collection::vec(0u8..4, 20),
        ) {
            let names: Vec<String> = (0..5).map(|i| alloc::format!("v{i}")).collect();
            let pairs: Vec<(usize, usize)> = (0..5)
                .flat_map(|u| (0..5).map(move |v| (u, v)))
                .filter(|&(u, v)| u < v)
                .collect();
            let mut truth = Dag::new(names.clone());
            for (i, &(u, v)) in pairs.iter().enumerate() {
                if truth_mask[i % truth_mask.len()] {
                    let _ = truth.add_edge(u, v);
                }
            }
            let mut learned = Dag::new(names);
            for (i, &(u, v)) in pairs.iter().enumerate() {
                match learned_mask[i % learned_mask.len()] {
                    1 => { let _ = learned.add_edge(u, v); }
                    2 => { let _ = learned.add_edge(v, u); }
                    _ => {}
                }
            }
            let m = compare_structures(&learned, &truth);
            prop_assert_eq!(m.correct + m.missed + m.reversed, m.truth_edge_count);
            prop_assert!(m.directional_accuracy >= 0.0 && m.directional_accuracy <= 1.0);
            prop_assert!(m.recall >= 0.0 && m.recall <= 1.0);
        }
    }

    #[test]
    fn improvement_percentage() {
        let runs = vec![
            KpiSamples {
                label: String::from("default"),
                kpis: vec![(String::from("UL_Mbps"), vec![32.61, 32.61])],
            },
            KpiSamples {
                label: String::from("recommended"),
                kpis: vec![(String::from("UL_Mbps"), vec![53.30, 53.30])],
            },
        ];
        let report = kpi_report(&runs, "default").unwrap();
        let improvement = report.labels[1].kpis[0].improvement_pct.unwrap();
        assert!((improvement - 63.446).abs() < 0.01);
    }

    #[test]
    fn identical_runs_have_zero_improvement() {
        let runs = vec![
            KpiSamples {
                label: String::from("a"),
                kpis: vec![(String::from("k"), vec![5.0, 6.0])],
            },
            KpiSamples {
                label: String::from("b"),
                kpis: vec![(String::from("k"), vec![5.0, 6.0])],
            },
        ];
        let report = kpi_report(&runs, "a").unwrap();
        assert_eq!(report.labels[1].kpis[0].improvement_pct, Some(0.0));
    }

    #[test]
    fn constant_sample_cdf_is_single_step() {
        let runs = vec![KpiSamples {
            label: String::from("a"),
            kpis: vec![(String::from("k"), vec![4.2, 4.2, 4.2])],
        }];
        let report = kpi_report(&runs, "a").unwrap();
        assert_eq!(report.labels[0].kpis[0].cdf, vec![(4.2, 1.0)]);
    }

    #[test]
    fn unknown_baseline_rejected() {
        let runs = vec![KpiSamples {
            label: String::from("a"),
            kpis: vec![(String::from("k"), vec![1.0])],
        }];
        assert!(kpi_report(&runs, "nope").is_err());
    }
}
