//! Per-topic effectiveness measures over binary relevance vectors.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trec_io::{relevance_vector, BinaryRanking, Qrels, RunSet, ScoreMatrix, DEFAULT_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Ap,
    Ndcg,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ap => "ap",
            MetricKind::Ndcg => "ndcg",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ap" | "map" => Ok(MetricKind::Ap),
            "ndcg" => Ok(MetricKind::Ndcg),
            _ => Err(invalid(format!("unknown metric {s:?} (expected ap|ndcg)"))),
        }
    }
}

/// Where the relevant-document count used for normalization comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorPolicy {
    /// Count of relevant documents inside the scored ranking itself.
    RetrievedRelevant,
    /// Count of documents judged relevant in the qrels.
    QrelsRelevant,
}

impl std::str::FromStr for DenominatorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "retrieved" | "retrieved_relevant" => Ok(DenominatorPolicy::RetrievedRelevant),
            "qrels" | "qrels_relevant" => Ok(DenominatorPolicy::QrelsRelevant),
            _ => Err(invalid(format!("unknown denominator policy {s:?} (expected retrieved|qrels)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub depth: usize,
    pub denominator: DenominatorPolicy,
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self { kind: MetricKind::Ap, depth: DEFAULT_DEPTH, denominator: DenominatorPolicy::RetrievedRelevant }
    }
}

impl MetricSpec {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(invalid("metric depth must be at least 1"));
        }
        Ok(())
    }

    /// Scores `ranking` truncated at `depth`. `judged_relevant` is only read
    /// under [`DenominatorPolicy::QrelsRelevant`].
    pub fn score(&self, ranking: &BinaryRanking, judged_relevant: usize) -> Result<f64> {
        let cut = &ranking.positions()[..ranking.len().min(self.depth)];
        let total = match self.denominator {
            DenominatorPolicy::RetrievedRelevant => cut.iter().filter(|&&r| r).count(),
            DenominatorPolicy::QrelsRelevant => judged_relevant,
        };
        match self.kind {
            MetricKind::Ap => ap_slice(cut, total),
            MetricKind::Ndcg => ndcg_slice(cut, total, self.depth),
        }
    }
}

fn ap_slice(positions: &[bool], total_relevant: usize) -> Result<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in positions.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    if total_relevant < hits {
        return Err(invalid(format!("total_relevant = {total_relevant} but {hits} relevant documents were retrieved")));
    }
    Ok(sum / total_relevant as f64)
}

/// Average precision: the sum of precision at each relevant position divided
/// by `total_relevant`. Zero when nothing relevant is retrieved.
pub fn average_precision(ranking: &BinaryRanking, total_relevant: usize) -> Result<f64> {
    ap_slice(ranking.positions(), total_relevant)
}

#[inline]
fn discount(position: usize) -> f64 {
    1.0 / ((position + 1) as f64).log2()
}

fn ndcg_slice(positions: &[bool], total_relevant: usize, depth: usize) -> Result<f64> {
    let cut = &positions[..positions.len().min(depth)];
    let hits = cut.iter().filter(|&&r| r).count();
    if total_relevant < hits {
        return Err(invalid(format!("total_relevant = {total_relevant} but {hits} relevant documents were retrieved")));
    }
    let dcg: f64 = cut.iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| discount(i + 1)).sum();
    let ideal: f64 = (1..=total_relevant.min(depth)).map(discount).sum();
    if ideal == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg / ideal)
}

/// NDCG with binary gains and a `1/log2(p + 1)` discount, normalized by
/// `total_relevant` relevant documents packed at the top.
pub fn ndcg(ranking: &BinaryRanking, total_relevant: usize, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    ndcg_slice(ranking.positions(), total_relevant, depth)
}

/// Scores every run on every qrels topic. Rows follow qrels topic order,
/// columns follow `runs` order.
pub fn build_score_matrix(runs: &[RunSet], qrels: &Qrels, spec: &MetricSpec) -> Result<ScoreMatrix> {
    spec.validate()?;
    if runs.is_empty() {
        return Err(invalid("no runs given"));
    }
    let topics: Vec<String> = qrels.topics().map(str::to_string).collect();
    if topics.is_empty() {
        return Err(invalid("qrels contain no topics"));
    }
    let missing: Vec<String> = runs
        .iter()
        .flat_map(|run| {
            topics.iter().filter(|t| !run.contains_topic(t)).map(move |t| format!("{}:{t}", run.system_tag))
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingTopics(missing));
    }

    let mut values = Vec::with_capacity(topics.len() * runs.len());
    for topic in &topics {
        let judged = qrels.relevant_count(topic);
        for run in runs {
            let r = relevance_vector(run, topic, qrels, spec.depth)?;
            values.push(spec.score(&r, judged)?);
        }
    }
    let systems = runs.iter().map(|r| r.system_tag.clone()).collect();
    ScoreMatrix::new(topics, systems, values)
}
