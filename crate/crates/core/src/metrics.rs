//! EXAM, Top@k and mean first rank, plus cross-setting comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};

use crate::dsl::StatementId;
use crate::exec::Setting;
use crate::sbfl::{Formula, Ranking};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("faulty statement {0} is not in the ranking")]
    FaultNotInRanking(StatementId),
    #[error("ground truth names no faulty statement")]
    NoFaults,
    #[error("empty result group")]
    EmptyGroup,
    #[error("settings disagree on the scenario set for {formula}: {detail}")]
    ScenarioMismatch { formula: Formula, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scenario_id: String,
    pub faulty_statements: BTreeSet<StatementId>,
    /// Source lines of the faulty statements, informational.
    #[serde(default)]
    pub faulty_lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub scenario_id: String,
    pub formula: Formula,
    pub setting: Setting,
    pub exam: f64,
    pub first_rank: f64,
    pub topk_hits: BTreeMap<usize, bool>,
}

fn fault_ranks(ranking: &Ranking, truth: &GroundTruth) -> Result<Vec<f64>, MetricsError> {
    if truth.faulty_statements.is_empty() {
        return Err(MetricsError::NoFaults);
    }
    truth
        .faulty_statements
        .iter()
        .map(|s| ranking.rank_of(*s).ok_or(MetricsError::FaultNotInRanking(*s)))
        .collect()
}

pub fn exam_score(
    ranking: &Ranking,
    truth: &GroundTruth,
    total_statements: usize,
) -> Result<f64, MetricsError> {
    let ranks = fault_ranks(ranking, truth)?;
    let sum: f64 = ranks.iter().map(|r| r / total_statements as f64).sum();
    Ok(sum / ranks.len() as f64)
}

pub fn first_rank(ranking: &Ranking, truth: &GroundTruth) -> Result<f64, MetricsError> {
    Ok(fault_ranks(ranking, truth)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// True iff some faulty statement ranks at or above position `k`. A
/// ranking missing the faults is a miss.
pub fn top_k(ranking: &Ranking, truth: &GroundTruth, k: usize) -> bool {
    first_rank(ranking, truth).is_ok_and(|r| r <= k as f64)
}

pub fn evaluate(
    ranking: &Ranking,
    truth: &GroundTruth,
    total_statements: usize,
    setting: Setting,
    k_values: &[usize],
) -> Result<EvalResult, MetricsError> {
    let first = first_rank(ranking, truth)?;
    Ok(EvalResult {
        scenario_id: truth.scenario_id.clone(),
        formula: ranking.formula,
        setting,
        exam: exam_score(ranking, truth, total_statements)?,
        first_rank: first,
        topk_hits: k_values.iter().map(|k| (*k, first <= *k as f64)).collect(),
    })
}

pub fn mfr(results: &[EvalResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyGroup);
    }
    Ok(results.iter().map(|r| r.first_rank).sum::<f64>() / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub formula: Formula,
    pub setting: Setting,
    pub scenarios: usize,
    pub mfr: f64,
    pub mean_exam: f64,
    /// k to the proportion of scenarios with a hit.
    pub topk: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub formula: Formula,
    pub from: Setting,
    pub to: Setting,
    pub improved: usize,
    pub deteriorated: usize,
    pub tied: usize,
    /// Scenarios where `to` ranked the first fault strictly worse.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deteriorated_scenarios: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub group: String,
    pub summaries: Vec<GroupSummary>,
    pub comparisons: Vec<Comparison>,
    pub results: Vec<EvalResult>,
}

/// Setting pairs compared, in report order.
pub const COMPARED_PAIRS: [(Setting, Setting); 3] = [
    (Setting::Original, Setting::Trycatch),
    (Setting::Trycatch, Setting::Slicing),
    (Setting::Original, Setting::Slicing),
];

/// Summarizes each (formula, setting) group and classifies every scenario
/// per setting pair as improved (smaller first rank), deteriorated or tied.
pub fn compare_settings(
    group: &str,
    reports: &BTreeMap<Setting, Vec<EvalResult>>,
) -> Result<AggregateReport, MetricsError> {
    let mut by_key: BTreeMap<(Formula, Setting), BTreeMap<&str, &EvalResult>> = BTreeMap::new();
    for (setting, results) in reports {
        for r in results {
            by_key
                .entry((r.formula, *setting))
                .or_default()
                .insert(&r.scenario_id, r);
        }
    }
    let formulas: BTreeSet<Formula> = by_key.keys().map(|(f, _)| *f).collect();

    let mut summaries = Vec::new();
    for ((formula, setting), rs) in &by_key {
        let list: Vec<EvalResult> = rs.values().map(|r| (*r).clone()).collect();
        let n = list.len() as f64;
        let ks: BTreeSet<usize> = list.iter().flat_map(|r| r.topk_hits.keys().copied()).collect();
        summaries.push(GroupSummary {
            formula: *formula,
            setting: *setting,
            scenarios: list.len(),
            mfr: mfr(&list)?,
            mean_exam: list.iter().map(|r| r.exam).sum::<f64>() / n,
            topk: ks
                .into_iter()
                .map(|k| {
                    let hits = list.iter().filter(|r| r.topk_hits.get(&k) == Some(&true)).count();
                    (k, hits as f64 / n)
                })
                .collect(),
        });
    }

    let mut comparisons = Vec::new();
    for formula in formulas {
        for (from, to) in COMPARED_PAIRS {
            let (Some(a), Some(b)) = (by_key.get(&(formula, from)), by_key.get(&(formula, to)))
            else {
                continue;
            };
            let ids_a: BTreeSet<&&str> = a.keys().collect();
            let ids_b: BTreeSet<&&str> = b.keys().collect();
            if ids_a != ids_b {
                let only: Vec<_> = ids_a.symmetric_difference(&ids_b).map(|s| s.to_string()).collect();
                return Err(MetricsError::ScenarioMismatch {
                    formula,
                    detail: format!("{from} vs {to}: {}", only.join(", ")),
                });
            }
            let mut c = Comparison {
                formula,
                from,
                to,
                improved: 0,
                deteriorated: 0,
                tied: 0,
                deteriorated_scenarios: Vec::new(),
            };
            for (id, ra) in a {
                let rb = b[id];
                if rb.first_rank < ra.first_rank {
                    c.improved += 1;
                } else if rb.first_rank > ra.first_rank {
                    c.deteriorated += 1;
                    c.deteriorated_scenarios.push(id.to_string());
                } else {
                    c.tied += 1;
                }
            }
            comparisons.push(c);
        }
    }

    let mut results: Vec<EvalResult> = reports.values().flatten().cloned().collect();
    results.sort_by(|x, y| {
        (&x.scenario_id, x.formula, x.setting).cmp(&(&y.scenario_id, y.formula, y.setting))
    });
    Ok(AggregateReport {
        group: group.to_string(),
        summaries,
        comparisons,
        results,
    })
}

impl AggregateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregate serialization is infallible")
    }

    /// One row per (formula, setting): group, MFR, EXAM and Top@k columns.
    pub fn write_summary_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let ks: BTreeSet<usize> = self
            .summaries
            .iter()
            .flat_map(|s| s.topk.keys().copied())
            .collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["group", "formula", "setting", "scenarios", "MFR", "EXAM"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(ks.iter().map(|k| format!("Top@{k}")));
        w.write_record(&header)?;
        for s in &self.summaries {
            let mut rec = vec![
                self.group.clone(),
                s.formula.to_string(),
                s.setting.to_string(),
                s.scenarios.to_string(),
                format!("{:.4}", s.mfr),
                format!("{:.4}", s.mean_exam),
            ];
            rec.extend(
                ks.iter()
                    .map(|k| s.topk.get(k).map_or(String::new(), |p| format!("{p:.4}"))),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// One row per (formula, setting pair): Imp, Det, Tied.
    pub fn write_comparison_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "formula", "comparison", "Imp", "Det", "Tied"])?;
        for c in &self.comparisons {
            w.write_record([
                self.group.clone(),
                c.formula.to_string(),
                format!("{} vs {}", c.from, c.to),
                c.improved.to_string(),
                c.deteriorated.to_string(),
                c.tied.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn comparison(&self, formula: Formula, from: Setting, to: Setting) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.formula == formula && c.from == from && c.to == to)
    }

    pub fn summary(&self, formula: Formula, setting: Setting) -> Option<&GroupSummary> {
        self.summaries
            .iter()
            .find(|s| s.formula == formula && s.setting == setting)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, setting: Setting, first_rank: f64) -> EvalResult {
        EvalResult {
            scenario_id: id.into(),
            formula: Formula::Ochiai,
            setting,
            exam: first_rank / 10.0,
            first_rank,
            topk_hits: BTreeMap::from([(5, first_rank <= 5.0)]),
        }
    }

    #[test]
    fn mismatch_is_reported() {
        let reports = BTreeMap::from([
            (Setting::Original, vec![result("a", Setting::Original, 2.0)]),
            (Setting::Trycatch, vec![result("b", Setting::Trycatch, 2.0)]),
        ]);
        assert!(matches!(
            compare_settings("g", &reports),
            Err(MetricsError::ScenarioMismatch { .. })
        ));
    }

    #[test]
    fn csv_shapes() {
        let reports = BTreeMap::from([
            (Setting::Original, vec![result("a", Setting::Original, 7.0)]),
            (Setting::Trycatch, vec![result("a", Setting::Trycatch, 3.0)]),
        ]);
        let agg = compare_settings("g", &reports).unwrap();
        let mut buf = Vec::new();
        agg.write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next(),
            Some("group,formula,setting,scenarios,MFR,EXAM,Top@5")
        );
        let mut buf = Vec::new();
        agg.write_comparison_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("g,ochiai,original vs trycatch,1,0,0"));
    }
}
