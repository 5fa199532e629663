//! Two-sided paired significance tests and multiple-comparison tests over
//! score matrices.

mod ptukey;
mod quadrature;
mod randomized;
mod ttest;
mod tukey;
mod wilcoxon;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use ptukey::{normal_range_cdf, studentized_range_cdf};
pub use randomized::{fisher_yates, randomized_tukey_hsd, RandomizedTukey};
pub use ttest::{paired_t_test, t_cdf, t_two_sided_tail};
pub use tukey::anova_tukey_hsd;
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMode, EXACT_CUTOFF};

use crate::error::{invalid, Result};
use crate::trec_io::ScoreMatrix;

/// Result of a single scalar test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub p_value: f64,
    pub statistic: f64,
    /// Set when the p-value comes from a degeneracy rule rather than the
    /// test's reference distribution.
    pub degenerate: bool,
}

/// Paired scalar tests usable on each pair of systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairedTest {
    T,
    Wilcoxon(WilcoxonMode),
}

impl PairedTest {
    pub fn name(&self) -> &'static str {
        match self {
            PairedTest::T => "t",
            PairedTest::Wilcoxon(_) => "wilcoxon",
        }
    }

    pub fn run(&self, x: &[f64], y: &[f64]) -> Result<TestOutcome> {
        match *self {
            PairedTest::T => paired_t_test(x, y),
            PairedTest::Wilcoxon(mode) => wilcoxon_signed_rank(x, y, mode),
        }
    }
}

/// Index pairs `(i, j)` with `i < j` in lexicographic order.
pub fn system_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

/// The k = m(m−1)/2 pairwise null hypotheses and their raw p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisFamily {
    pub test_name: String,
    pub systems: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
    pub raw_p: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl HypothesisFamily {
    pub fn new(
        test_name: impl Into<String>,
        systems: Vec<String>,
        raw_p: Vec<f64>,
        degenerate: Vec<bool>,
    ) -> Result<Self> {
        let pairs = system_pairs(systems.len());
        if systems.len() < 2 {
            return Err(invalid("a hypothesis family needs at least 2 systems"));
        }
        if raw_p.len() != pairs.len() || degenerate.len() != pairs.len() {
            return Err(invalid(format!(
                "expected {} p-values for {} systems, got {}",
                pairs.len(),
                systems.len(),
                raw_p.len()
            )));
        }
        if let Some(p) = raw_p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("p-value {p} outside [0, 1]")));
        }
        Ok(Self { test_name: test_name.into(), systems, pairs, raw_p, degenerate })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Writes `sys_i,sys_j,p`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["sys_i", "sys_j", "p"])?;
        for (&(i, j), p) in self.pairs.iter().zip(&self.raw_p) {
            w.write_record([self.systems[i].as_str(), self.systems[j].as_str(), &format!("{p}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Symmetric m × m table of p-values; the diagonal is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueMatrix {
    pub systems: Vec<String>,
    /// Upper-triangle entries in [`system_pairs`] order.
    condensed: Vec<f64>,
    pub degenerate: bool,
}

impl PValueMatrix {
    pub(crate) fn from_condensed(systems: Vec<String>, condensed: Vec<f64>, degenerate: bool) -> Self {
        debug_assert_eq!(condensed.len(), systems.len() * (systems.len() - 1) / 2);
        Self { systems, condensed, degenerate }
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let m = self.systems.len();
        a * (2 * m - a - 1) / 2 + (b - a - 1)
    }

    /// p-value for the pair, `None` on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.condensed[self.index(i, j)])
    }

    /// Upper-triangle p-values in [`system_pairs`] order.
    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    pub fn into_family(self, test_name: impl Into<String>) -> Result<HypothesisFamily> {
        let degenerate = vec![self.degenerate; self.condensed.len()];
        HypothesisFamily::new(test_name, self.systems, self.condensed, degenerate)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["sys_i", "sys_j", "p"])?;
        for ((i, j), p) in system_pairs(self.systems.len()).into_iter().zip(&self.condensed) {
            w.write_record([self.systems[i].as_str(), self.systems[j].as_str(), &format!("{p}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies a paired test to every unordered pair of columns.
pub fn pairwise_family(matrix: &ScoreMatrix, test: PairedTest) -> Result<HypothesisFamily> {
    let m = matrix.n_systems();
    if m < 2 {
        return Err(invalid("pairwise comparison needs at least 2 systems"));
    }
    let columns: Vec<Vec<f64>> = (0..m).map(|s| matrix.column(s)).collect();
    let mut raw_p = Vec::with_capacity(m * (m - 1) / 2);
    let mut degenerate = Vec::with_capacity(raw_p.capacity());
    for (i, j) in system_pairs(m) {
        let out = test.run(&columns[i], &columns[j])?;
        raw_p.push(out.p_value);
        degenerate.push(out.degenerate);
    }
    HypothesisFamily::new(test.name(), matrix.systems().to_vec(), raw_p, degenerate)
}
