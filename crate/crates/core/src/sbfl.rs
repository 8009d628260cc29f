//! Suspiciousness formulas and tie-adjusted ranking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::StatementId;
use crate::spectrum::{Counts, SpectrumCounts};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SbflError {
    #[error("no failed tests: localization skipped")]
    NoFailedTests,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Ochiai,
    Tarantula,
}

impl Formula {
    pub const ALL: [Formula; 2] = [Formula::Ochiai, Formula::Tarantula];

    pub fn name(self) -> &'static str {
        match self {
            Formula::Ochiai => "ochiai",
            Formula::Tarantula => "tarantula",
        }
    }

    pub fn scores(self, counts: &SpectrumCounts) -> Result<Vec<Suspiciousness>, SbflError> {
        match self {
            Formula::Ochiai => Ok(ochiai(counts)),
            Formula::Tarantula => tarantula(counts),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Formula {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ochiai" => Ok(Formula::Ochiai),
            "tarantula" => Ok(Formula::Tarantula),
            other => Err(format!("unknown formula `{other}`")),
        }
    }
}

/// How a group of equal scores is ranked. `k` is the 1-based position of the
/// group's first member, `n` its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRule {
    /// `n/2 + (k - 1)` for groups of two or more; a lone statement keeps
    /// its position `k`.
    #[default]
    Paper,
    /// `n/2 + (k - 1)` for every group, singletons included.
    PaperLiteral,
    /// `k + (n - 1)/2`, the mean of the positions the group occupies.
    Midpoint,
}

impl TieRule {
    pub fn name(self) -> &'static str {
        match self {
            TieRule::Paper => "paper",
            TieRule::PaperLiteral => "paper-literal",
            TieRule::Midpoint => "midpoint",
        }
    }

    pub fn group_rank(self, n: usize, k: usize) -> f64 {
        let (n, k) = (n as f64, k as f64);
        match self {
            TieRule::Paper if n < 2.0 => k,
            TieRule::Paper | TieRule::PaperLiteral => n / 2.0 + (k - 1.0),
            TieRule::Midpoint => k + (n - 1.0) / 2.0,
        }
    }
}

impl std::str::FromStr for TieRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(TieRule::Paper),
            "paper-literal" => Ok(TieRule::PaperLiteral),
            "midpoint" => Ok(TieRule::Midpoint),
            other => Err(format!("unknown tie rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suspiciousness {
    pub statement: StatementId,
    pub line: u32,
    pub score: f64,
}

pub fn ochiai_score(c: Counts) -> f64 {
    if c.e_f == 0 {
        return 0.0;
    }
    let denom = ((c.failed() * (c.e_f + c.e_p)) as f64).sqrt();
    c.e_f as f64 / denom
}

/// Tarantula with the passed ratio taken as 0 when no test passed.
pub fn tarantula_score(c: Counts) -> f64 {
    if c.e_f == 0 {
        return 0.0;
    }
    let fail_ratio = c.e_f as f64 / c.failed() as f64;
    let pass_ratio = if c.passed() == 0 {
        0.0
    } else {
        c.e_p as f64 / c.passed() as f64
    };
    fail_ratio / (fail_ratio + pass_ratio)
}

fn scored(counts: &SpectrumCounts, f: impl Fn(Counts) -> f64) -> Vec<Suspiciousness> {
    counts
        .statements
        .iter()
        .zip(&counts.lines)
        .zip(&counts.counts)
        .map(|((s, l), c)| Suspiciousness {
            statement: *s,
            line: *l,
            score: f(*c),
        })
        .collect()
}

pub fn ochiai(counts: &SpectrumCounts) -> Vec<Suspiciousness> {
    scored(counts, ochiai_score)
}

pub fn tarantula(counts: &SpectrumCounts) -> Result<Vec<Suspiciousness>, SbflError> {
    if counts.total_failed == 0 {
        return Err(SbflError::NoFailedTests);
    }
    Ok(scored(counts, tarantula_score))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub statement: StatementId,
    pub line: u32,
    pub score: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub formula: Formula,
    pub tie_rule: TieRule,
    pub entries: Vec<RankEntry>,
}

/// Scores closer than this (relative to the larger one) are a tie.
const TIE_EPSILON: f64 = 1e-12;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_EPSILON * a.abs().max(b.abs()).max(1.0)
}

pub fn rank(scores: &[Suspiciousness], formula: Formula, tie_rule: TieRule) -> Ranking {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.statement.cmp(&b.statement))
    });
    let mut entries = Vec::with_capacity(sorted.len());
    let mut start = 0;
    while start < sorted.len() {
        let head = sorted[start].score;
        let mut end = start + 1;
        while end < sorted.len() && tied(head, sorted[end].score) {
            end += 1;
        }
        let r = tie_rule.group_rank(end - start, start + 1);
        entries.extend(sorted[start..end].iter().map(|s| RankEntry {
            statement: s.statement,
            line: s.line,
            score: s.score,
            rank: r,
        }));
        start = end;
    }
    Ranking {
        formula,
        tie_rule,
        entries,
    }
}

impl Ranking {
    pub fn rank_of(&self, id: StatementId) -> Option<f64> {
        self.entries.iter().find(|e| e.statement == id).map(|e| e.rank)
    }

    pub fn score_of(&self, id: StatementId) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.statement == id)
            .map(|e| e.score)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ranking serialization is infallible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(e_f: usize, n_f: usize, e_p: usize, n_p: usize) -> Counts {
        Counts { e_f, n_f, e_p, n_p }
    }

    #[test]
    fn zero_denominators() {
        assert_eq!(ochiai_score(c(0, 3, 5, 0)), 0.0);
        assert_eq!(tarantula_score(c(0, 3, 5, 0)), 0.0);
        assert_eq!(tarantula_score(c(2, 0, 0, 0)), 1.0);
    }

    #[test]
    fn tie_rules() {
        assert_eq!(TieRule::Paper.group_rank(1, 2), 2.0);
        assert_eq!(TieRule::PaperLiteral.group_rank(1, 2), 1.5);
        assert_eq!(TieRule::Midpoint.group_rank(3, 2), 3.0);
        assert_eq!(TieRule::Paper.group_rank(2, 1), 1.0);
    }

    #[test]
    fn secondary_order_is_statement_id() {
        let s = |id, score| Suspiciousness {
            statement: StatementId(id),
            line: id + 1,
            score,
        };
        let r = rank(&[s(4, 0.5), s(1, 0.5), s(2, 0.9)], Formula::Ochiai, TieRule::Paper);
        let order: Vec<u32> = r.entries.iter().map(|e| e.statement.0).collect();
        assert_eq!(order, vec![2, 1, 4]);
        assert_eq!(r.entries[1].rank, r.entries[2].rank);
    }
}
