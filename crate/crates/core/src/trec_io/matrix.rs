use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};

/// An n-topics × m-systems table of effectiveness scores, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    topics: Vec<String>,
    systems: Vec<String>,
    values: Vec<f64>,
}

impl ScoreMatrix {
    /// Builds a matrix from row-major `values`. Topic and system labels
    /// must be unique and every cell finite.
    pub fn new(topics: Vec<String>, systems: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if topics.is_empty() || systems.is_empty() {
            return Err(invalid("score matrix needs at least one topic and one system"));
        }
        if values.len() != topics.len() * systems.len() {
            return Err(invalid(format!(
                "expected {} cells for {} topics x {} systems, got {}",
                topics.len() * systems.len(),
                topics.len(),
                systems.len(),
                values.len()
            )));
        }
        check_unique(&topics, "topic")?;
        check_unique(&systems, "system")?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite score at topic {} system {}",
                topics[pos / systems.len()],
                systems[pos % systems.len()]
            )));
        }
        Ok(Self { topics, systems, values })
    }

    /// Builds a matrix with generated labels `t1..tn` and `s1..sm`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(invalid("ragged rows"));
        }
        let topics = (1..=rows.len()).map(|i| format!("t{i}")).collect();
        let systems = (1..=m).map(|j| format!("s{j}")).collect();
        Self::new(topics, systems, rows.concat())
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, topic: usize, system: usize) -> f64 {
        self.values[topic * self.systems.len() + system]
    }

    pub fn row(&self, topic: usize) -> &[f64] {
        let m = self.systems.len();
        &self.values[topic * m..(topic + 1) * m]
    }

    pub fn column(&self, system: usize) -> Vec<f64> {
        (0..self.topics.len()).map(|t| self.get(t, system)).collect()
    }

    /// Column means, accumulated in topic order.
    pub fn column_means(&self) -> Vec<f64> {
        let m = self.systems.len();
        let mut sums = vec![0.0; m];
        for row in self.values.chunks_exact(m) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        let n = self.topics.len() as f64;
        sums.into_iter().map(|s| s / n).collect()
    }

    /// Sub-matrix made of the given topic rows, in the given order.
    pub fn select_topics(&self, rows: &[usize]) -> Result<Self> {
        let m = self.systems.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        let mut topics = Vec::with_capacity(rows.len());
        for &r in rows {
            if r >= self.topics.len() {
                return Err(invalid(format!("topic row {r} out of range")));
            }
            topics.push(self.topics[r].clone());
            values.extend_from_slice(self.row(r));
        }
        Self::new(topics, self.systems.clone(), values)
    }

    /// Writes `topic,<systems...>` followed by one row per topic, LF line
    /// endings, floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = Vec::with_capacity(self.systems.len() + 1);
        header.push("topic".to_string());
        header.extend(self.systems.iter().cloned());
        w.write_record(&header)?;
        for (t, topic) in self.topics.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.systems.len() + 1);
            rec.push(topic.clone());
            rec.extend(self.row(t).iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "topic" {
            return Err(Error::Parse { line: 1, msg: "header must be `topic,<system tags...>`".into() });
        }
        let systems: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut topics = Vec::new();
        let mut values = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            topics.push(rec[0].to_string());
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("non-numeric cell {cell:?} for system {}", systems[j]),
                })?;
                values.push(v);
            }
        }
        if topics.is_empty() {
            return Err(Error::NoRecords);
        }
        Self::new(topics, systems, values)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Duplicate(format!("{what} {l}")));
        }
    }
    Ok(())
}
