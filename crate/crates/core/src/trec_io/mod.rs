//! TREC run and qrels ingestion, binary relevance vectors, and the
//! score-matrix CSV interchange format.

mod matrix;

pub use matrix::ScoreMatrix;

use std::cmp::Ordering;
use std::fmt::Write as _;

use indexmap::map::Entry;
use indexmap::IndexMap;

use crate::error::{invalid, Error, Result};

/// Standard TREC submission depth.
pub const DEFAULT_DEPTH: usize = 1000;

/// One retrieved document in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// All rankings one system submitted, keyed by topic in first-seen order.
///
/// Each list is sorted by descending score with ties broken by descending
/// document id, and ranks are renumbered `1..=len` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub system_tag: String,
    topics: IndexMap<String, Vec<RankedDoc>>,
}

impl RunSet {
    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn ranking(&self, topic: &str) -> Option<&[RankedDoc]> {
        self.topics.get(topic).map(Vec::as_slice)
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn contains_topic(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }

    /// Keeps at most `depth` documents per topic.
    pub fn truncate(&mut self, depth: usize) {
        for docs in self.topics.values_mut() {
            docs.truncate(depth);
        }
    }

    /// Writes the run back in six-column TREC format.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.topics {
            for d in docs {
                let _ = writeln!(out, "{topic} Q0 {} {} {} {}", d.doc_id, d.rank, d.score, self.system_tag);
            }
        }
        out
    }
}

fn trec_order(a: &RankedDoc, b: &RankedDoc) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| b.doc_id.cmp(&a.doc_id))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses a six-column TREC run: `topic Q0 docid rank score tag`.
pub fn parse_run(text: &str) -> Result<RunSet> {
    let mut tag: Option<String> = None;
    let mut topics: IndexMap<String, Vec<RankedDoc>> = IndexMap::new();
    let mut seen: IndexMap<String, indexmap::IndexSet<String>> = IndexMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_err(line_no, format!("expected 6 columns, found {}", fields.len())));
        }
        let rank: u32 =
            fields[3].parse().map_err(|_| parse_err(line_no, format!("unparsable rank {:?}", fields[3])))?;
        let score: f64 =
            fields[4].parse().map_err(|_| parse_err(line_no, format!("unparsable score {:?}", fields[4])))?;
        if !score.is_finite() {
            return Err(parse_err(line_no, "score is not finite"));
        }
        match &tag {
            None => tag = Some(fields[5].to_string()),
            Some(t) if t != fields[5] => {
                return Err(parse_err(line_no, format!("run tag {:?} differs from {:?}", fields[5], t)));
            }
            Some(_) => {}
        }
        let topic = fields[0].to_string();
        if !seen.entry(topic.clone()).or_default().insert(fields[2].to_string()) {
            return Err(Error::Duplicate(format!("topic {} document {} (line {line_no})", fields[0], fields[2])));
        }
        topics.entry(topic).or_default().push(RankedDoc { doc_id: fields[2].to_string(), rank, score });
    }

    let system_tag = tag.ok_or(Error::NoRecords)?;
    for docs in topics.values_mut() {
        docs.sort_by(trec_order);
        for (i, d) in docs.iter_mut().enumerate() {
            d.rank = i as u32 + 1;
        }
    }
    Ok(RunSet { system_tag, topics })
}

/// Relevance judgments: (topic, document) → grade.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    topics: IndexMap<String, IndexMap<String, u32>>,
}

impl Qrels {
    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.topics.get(topic).and_then(|m| m.get(doc)).copied()
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn contains_topic(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }

    /// Number of documents judged with a grade above zero.
    pub fn relevant_count(&self, topic: &str) -> usize {
        self.topics.get(topic).map_or(0, |m| m.values().filter(|&&g| g > 0).count())
    }

    pub fn len(&self) -> usize {
        self.topics.values().map(IndexMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, topic: &str, doc: &str, grade: u32) -> Result<()> {
        match self.topics.entry(topic.to_string()).or_default().entry(doc.to_string()) {
            Entry::Occupied(_) => Err(Error::Duplicate(format!("topic {topic} document {doc}"))),
            Entry::Vacant(v) => {
                v.insert(grade);
                Ok(())
            }
        }
    }
}

/// Parses four-column qrels: `topic 0 docid grade`.
pub fn parse_qrels(text: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 columns, found {}", fields.len())));
        }
        let grade: i64 =
            fields[3].parse().map_err(|_| parse_err(line_no, format!("unparsable grade {:?}", fields[3])))?;
        if grade < 0 {
            return Err(parse_err(line_no, format!("negative grade {grade}")));
        }
        let grade = u32::try_from(grade).map_err(|_| parse_err(line_no, "grade out of range"))?;
        qrels.insert(fields[0], fields[2], grade).map_err(|e| match e {
            Error::Duplicate(m) => Error::Duplicate(format!("{m} (line {line_no})")),
            other => other,
        })?;
    }
    Ok(qrels)
}

/// A ranking reduced to binary relevance by position (index 0 is rank 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryRanking(Vec<bool>);

impl BinaryRanking {
    pub fn new(positions: Vec<bool>) -> Result<Self> {
        if positions.is_empty() {
            return Err(invalid("binary ranking must have at least one position"));
        }
        Ok(Self(positions))
    }

    /// Builds from 0/1 integers.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let positions = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(invalid(format!("relevance entry {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(positions)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positions(&self) -> &[bool] {
        &self.0
    }

    pub fn relevant_count(&self) -> usize {
        self.0.iter().filter(|&&r| r).count()
    }
}

/// Maps the top `depth` documents of `topic` to 0/1 relevance. Unjudged
/// documents count as non-relevant; the vector is never padded.
pub fn relevance_vector(run: &RunSet, topic: &str, qrels: &Qrels, depth: usize) -> Result<BinaryRanking> {
    if depth == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let docs = run.ranking(topic).ok_or_else(|| Error::TopicNotFound(topic.to_string()))?;
    let positions = docs.iter().take(depth).map(|d| qrels.grade(topic, &d.doc_id).is_some_and(|g| g > 0)).collect();
    BinaryRanking::new(positions)
}
