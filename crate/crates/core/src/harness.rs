//! Experiment orchestration: repeated simulation, topic subsampling and
//! the error-rate and power estimates computed over them.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjust::{adjust, reject_set, AdjustedFamily, Method, DEFAULT_LEVEL};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_key, stream, tag};
use crate::sigtests::{
    anova_tukey_hsd, pairwise_family, randomized_tukey_hsd, system_pairs, HypothesisFamily, PairedTest,
    RandomizedTukey, WilcoxonMode,
};
use crate::simkit::{simulate_family, RegressorBank, Scenario, SimConfig};
use crate::trec_io::ScoreMatrix;

pub const DEFAULT_PERMUTATIONS: u64 = 100_000;
pub const DEFAULT_GAMMA: f64 = 0.0005;

/// k = m(m − 1)/2.
pub fn pairwise_count(m: usize) -> Result<usize> {
    if m < 2 {
        return Err(invalid("pairwise comparisons need at least 2 systems"));
    }
    Ok(m * (m - 1) / 2)
}

/// `1 − (1 − α)^k`, the family-wise error rate of k independent tests.
pub fn theoretical_fwer(alpha: f64, k: usize) -> f64 {
    1.0 - (1.0 - alpha).powi(k as i32)
}

/// Significance test applied to a whole score matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    T,
    Wilcoxon,
    AnovaTukey,
    RandomizedTukey,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::T, TestKind::Wilcoxon, TestKind::AnovaTukey, TestKind::RandomizedTukey];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::T => "t",
            TestKind::Wilcoxon => "wilcoxon",
            TestKind::AnovaTukey => "tukey",
            TestKind::RandomizedTukey => "rtukey",
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" | "ttest" => Ok(TestKind::T),
            "wilcoxon" => Ok(TestKind::Wilcoxon),
            "tukey" | "anova" => Ok(TestKind::AnovaTukey),
            "rtukey" | "randomized_tukey" => Ok(TestKind::RandomizedTukey),
            _ => Err(invalid(format!("unknown test {s:?} (expected t|wilcoxon|tukey|rtukey)"))),
        }
    }
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A test followed by a p-value adjustment, written `test+adjustment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Procedure {
    pub test: TestKind,
    pub adjustment: Method,
}

impl Procedure {
    pub fn new(test: TestKind, adjustment: Method) -> Self {
        Self { test, adjustment }
    }

    /// Paired tests under every adjustment, plus both Tukey variants
    /// unadjusted.
    pub fn defaults() -> Vec<Procedure> {
        let mut out = Vec::new();
        for test in [TestKind::T, TestKind::Wilcoxon] {
            out.extend(Method::ALL.iter().map(|&m| Procedure::new(test, m)));
        }
        out.push(Procedure::new(TestKind::AnovaTukey, Method::None));
        out.push(Procedure::new(TestKind::RandomizedTukey, Method::None));
        out
    }
}

impl std::str::FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (test, adj) = s.split_once('+').unwrap_or((s, "none"));
        Ok(Procedure::new(test.trim().parse()?, adj.trim().parse()?))
    }
}

impl std::fmt::Display for Procedure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}+{}", self.test, self.adjustment)
    }
}

/// Knobs shared by all tests in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub level: f64,
    pub wilcoxon_mode: WilcoxonMode,
    /// Permutation rounds of the randomised Tukey test.
    pub permutations: u64,
    pub smoothed: bool,
}

impl Default for TestParams {
    fn default() -> Self {
        Self {
            level: DEFAULT_LEVEL,
            wilcoxon_mode: WilcoxonMode::Auto,
            permutations: DEFAULT_PERMUTATIONS,
            smoothed: false,
        }
    }
}

impl TestParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid(format!("level {} must lie in (0, 1)", self.level)));
        }
        if self.permutations == 0 {
            return Err(invalid("permutations must be at least 1"));
        }
        Ok(())
    }
}

/// Raw p-values of `test` on `matrix`. `seed` only matters for the
/// randomised Tukey test.
pub fn run_test(matrix: &ScoreMatrix, test: TestKind, params: &TestParams, seed: u64) -> Result<HypothesisFamily> {
    match test {
        TestKind::T => pairwise_family(matrix, PairedTest::T),
        TestKind::Wilcoxon => pairwise_family(matrix, PairedTest::Wilcoxon(params.wilcoxon_mode)),
        TestKind::AnovaTukey => anova_tukey_hsd(matrix)?.into_family(test.name()),
        TestKind::RandomizedTukey => {
            let rt = RandomizedTukey { permutations: params.permutations, seed, smoothed: params.smoothed };
            randomized_tukey_hsd(matrix, &rt)?.into_family(test.name())
        }
    }
}

/// Rejection flags of every procedure on one matrix, computing each
/// distinct test once.
fn reject_all(
    matrix: &ScoreMatrix,
    procedures: &[Procedure],
    params: &TestParams,
    seed: u64,
) -> Result<Vec<Vec<bool>>> {
    let mut raw: BTreeMap<TestKind, Vec<f64>> = BTreeMap::new();
    procedures
        .iter()
        .map(|proc| {
            let p = match raw.entry(proc.test) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(run_test(matrix, proc.test, params, seed)?.raw_p)
                }
            };
            Ok(reject_set(&adjust(p, proc.adjustment)?, params.level))
        })
        .collect()
}

/// Integer counts behind every rate, so results from separate runs add.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub reps: u64,
    /// Repetitions with at least one targeted pair rejected.
    pub any: u64,
    /// Repetitions with every targeted pair rejected.
    pub all: u64,
    /// Rejected targeted pairs, summed over repetitions.
    pub hits: u64,
    /// Targeted pairs, summed over repetitions.
    pub targets: u64,
}

impl Tally {
    /// Adds one repetition. `targets` restricts attention to the flagged
    /// pairs; `None` targets every pair.
    pub fn record(&mut self, rejected: &[bool], targets: Option<&[bool]>) {
        let mut hits = 0;
        let mut count = 0;
        for (n, &r) in rejected.iter().enumerate() {
            if targets.is_none_or(|t| t[n]) {
                count += 1;
                hits += u64::from(r);
            }
        }
        self.reps += 1;
        self.any += u64::from(hits > 0);
        self.all += u64::from(hits == count);
        self.hits += hits;
        self.targets += count;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.reps += other.reps;
        self.any += other.any;
        self.all += other.all;
        self.hits += other.hits;
        self.targets += other.targets;
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// Fraction of repetitions with any rejection (the FWER when all
    /// targeted nulls are true).
    pub fn minimal(&self) -> f64 {
        Self::ratio(self.any, self.reps)
    }

    pub fn complete(&self) -> f64 {
        Self::ratio(self.all, self.reps)
    }

    pub fn average(&self) -> f64 {
        Self::ratio(self.hits, self.targets)
    }
}

fn tally(families: &[AdjustedFamily], targets: Option<&[bool]>) -> Result<Tally> {
    if families.is_empty() {
        return Err(invalid("at least one repetition is required"));
    }
    let mut t = Tally::default();
    for fam in families {
        if targets.is_some_and(|t| t.len() != fam.adjusted_p.len()) {
            return Err(invalid("truth mask and family sizes differ"));
        }
        t.record(&fam.reject_set(), targets);
    }
    Ok(t)
}

/// Fraction of repetitions whose rejection set is non-empty.
pub fn estimate_fwer(families: &[AdjustedFamily]) -> Result<f64> {
    Ok(tally(families, None)?.minimal())
}

/// Fraction of repetitions rejecting every pair.
pub fn complete_power(families: &[AdjustedFamily]) -> Result<f64> {
    Ok(tally(families, None)?.complete())
}

/// Fraction of repetitions rejecting at least one pair.
pub fn minimal_power(families: &[AdjustedFamily]) -> Result<f64> {
    Ok(tally(families, None)?.minimal())
}

/// Rejections among pairs marked different over `reps × #different`.
pub fn average_power(families: &[AdjustedFamily], truth: &TruthMask) -> Result<f64> {
    if truth.different_count() == 0 {
        return Err(invalid("truth mask has no pairs marked different"));
    }
    Ok(tally(families, Some(&truth.different))?.average())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Different,
    Undecided,
}

/// Ground-truth status for every unordered pair of systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMask {
    pub systems: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
    /// `mean_i − mean_j` on the full topic set.
    pub mean_diff: Vec<f64>,
    pub different: Vec<bool>,
    pub gamma: f64,
}

impl TruthMask {
    pub fn status(&self, n: usize) -> PairStatus {
        if self.different[n] {
            PairStatus::Different
        } else {
            PairStatus::Undecided
        }
    }

    pub fn different_count(&self) -> usize {
        self.different.iter().filter(|d| **d).count()
    }

    /// Writes `sys_i,sys_j,mean_diff,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["sys_i", "sys_j", "mean_diff", "status"])?;
        for (n, &(i, j)) in self.pairs.iter().enumerate() {
            let status = match self.status(n) {
                PairStatus::Different => "different",
                PairStatus::Undecided => "undecided",
            };
            w.write_record([
                self.systems[i].as_str(),
                self.systems[j].as_str(),
                &format!("{}", self.mean_diff[n]),
                status,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Marks a pair different when its mean scores differ by strictly more
/// than `gamma`; every other pair is undecided, never "equal".
pub fn ground_truth_pairs(full: &ScoreMatrix, gamma: f64) -> Result<TruthMask> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("gamma {gamma} must be a non-negative number")));
    }
    let pairs = pairwise_count(full.n_systems()).map(|_| system_pairs(full.n_systems()))?;
    let means = full.column_means();
    let mean_diff: Vec<f64> = pairs.iter().map(|&(i, j)| means[i] - means[j]).collect();
    let different = mean_diff.iter().map(|d| d.abs() > gamma).collect();
    Ok(TruthMask { systems: full.systems().to_vec(), pairs, mean_diff, different, gamma })
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub test: String,
    pub adjustment: String,
    pub m: usize,
    pub n: usize,
    pub reps: u64,
    pub metric: String,
    pub rate_kind: String,
    pub rate: f64,
    pub count: u64,
    pub denominator: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Settings that produced the report.
    pub config: serde_json::Value,
    /// Wall time; kept out of serialized output so reports stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ExperimentReport {
    /// Writes `scenario,test,adjustment,m,n,reps,metric,rate_kind,rate`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["scenario", "test", "adjustment", "m", "n", "reps", "metric", "rate_kind", "rate"])?;
        for r in &self.rows {
            w.write_record([
                r.scenario.as_str(),
                &r.test,
                &r.adjustment,
                &r.m.to_string(),
                &r.n.to_string(),
                &r.reps.to_string(),
                &r.metric,
                &r.rate_kind,
                &format!("{}", r.rate),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Pools two reports over the same rows by adding their counts.
    pub fn merge(&self, other: &ExperimentReport) -> Result<ExperimentReport> {
        if self.rows.len() != other.rows.len() {
            return Err(invalid("reports have different rows"));
        }
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let same = (&a.scenario, &a.test, &a.adjustment, a.m, a.n, &a.metric, &a.rate_kind)
                    == (&b.scenario, &b.test, &b.adjustment, b.m, b.n, &b.metric, &b.rate_kind);
                if !same {
                    return Err(invalid("reports have different rows"));
                }
                let count = a.count + b.count;
                let denominator = a.denominator + b.denominator;
                Ok(ReportRow {
                    reps: a.reps + b.reps,
                    rate: Tally::ratio(count, denominator),
                    count,
                    denominator,
                    ..a.clone()
                })
            })
            .collect::<Result<_>>()?;
        Ok(ExperimentReport {
            rows,
            config: serde_json::json!({ "merged": [self.config, other.config] }),
            elapsed: self.elapsed + other.elapsed,
        })
    }
}

struct RowContext<'a> {
    scenario: &'a str,
    m: usize,
    n: usize,
    metric: &'a str,
}

fn push_rows(rows: &mut Vec<ReportRow>, ctx: &RowContext, proc: &Procedure, t: &Tally, kinds: &[&str]) {
    for &kind in kinds {
        let (count, denominator) = match kind {
            "fwer" | "minimal_power" => (t.any, t.reps),
            "complete_power" => (t.all, t.reps),
            "average_power" => (t.hits, t.targets),
            _ => unreachable!("unknown rate kind"),
        };
        rows.push(ReportRow {
            scenario: ctx.scenario.to_string(),
            test: proc.test.name().to_string(),
            adjustment: proc.adjustment.name().to_string(),
            m: ctx.m,
            n: ctx.n,
            reps: t.reps,
            metric: ctx.metric.to_string(),
            rate_kind: kind.to_string(),
            rate: Tally::ratio(count, denominator),
            count,
            denominator,
        });
    }
}

fn check_procedures(procedures: &[Procedure]) -> Result<()> {
    if procedures.is_empty() {
        return Err(invalid("at least one test is required"));
    }
    Ok(())
}

/// Sums per-repetition tallies; integer addition keeps the result
/// independent of how rayon splits the work.
fn sum_tallies(parts: Vec<Vec<Tally>>, width: usize) -> Vec<Tally> {
    parts.into_iter().fold(vec![Tally::default(); width], |mut acc, part| {
        acc.iter_mut().zip(&part).for_each(|(a, p)| a.merge(p));
        acc
    })
}

/// Runs `cfg.reps` repetitions of a simulation scenario, starting at
/// repetition `cfg.first_rep`, and reports FWER (null scenario) or
/// complete, average and minimal power (alternative scenario) for every
/// procedure.
pub fn run_scenario(
    bank: &RegressorBank,
    cfg: &SimConfig,
    scenario: Scenario,
    procedures: &[Procedure],
    params: &TestParams,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    cfg.validate()?;
    params.validate()?;
    check_procedures(procedures)?;
    // fail fast on settings only the first family would reveal
    simulate_family(scenario, bank, cfg, cfg.first_rep, cfg.seed)?;

    let parts: Vec<Vec<Tally>> = (cfg.first_rep..cfg.first_rep + cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let matrix = simulate_family(scenario, bank, cfg, rep, cfg.seed)?;
            let tukey_seed = derive_key(cfg.seed, &[tag::TUKEY_SEED, rep]);
            let rejections = reject_all(&matrix, procedures, params, tukey_seed)?;
            Ok(rejections
                .iter()
                .map(|r| {
                    let mut t = Tally::default();
                    t.record(r, None);
                    t
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let tallies = sum_tallies(parts, procedures.len());

    let ctx = RowContext { scenario: scenario.name(), m: cfg.m, n: cfg.n, metric: cfg.metric.kind.name() };
    let kinds: &[&str] = match scenario {
        Scenario::Null => &["fwer"],
        Scenario::Alt => &["complete_power", "average_power", "minimal_power"],
    };
    let mut rows = Vec::new();
    for (proc, t) in procedures.iter().zip(&tallies) {
        push_rows(&mut rows, &ctx, proc, t, kinds);
    }
    let config = serde_json::json!({
        "scenario": scenario,
        "run_tag": bank.run_tag,
        "bank_topics": bank.len(),
        "sim": cfg,
        "params": params,
        "procedures": procedures.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    Ok(ExperimentReport { rows, config, elapsed: started.elapsed() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleConfig {
    pub sizes: Vec<usize>,
    pub iters: u64,
    pub gamma: f64,
    pub seed: u64,
    /// Label of the metric the matrix holds, copied into the report.
    pub metric: String,
}

impl SubsampleConfig {
    pub fn new(sizes: Vec<usize>, iters: u64, seed: u64) -> Self {
        Self { sizes, iters, gamma: DEFAULT_GAMMA, seed, metric: "ap".into() }
    }
}

/// For every size, draws `iters` independent topic subsets without
/// replacement and measures the average power of every procedure against
/// the ground truth of the full matrix.
pub fn subsample_power_experiment(
    full: &ScoreMatrix,
    cfg: &SubsampleConfig,
    procedures: &[Procedure],
    params: &TestParams,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    params.validate()?;
    check_procedures(procedures)?;
    if cfg.sizes.is_empty() {
        return Err(invalid("at least one subset size is required"));
    }
    if cfg.iters == 0 {
        return Err(invalid("iters must be at least 1"));
    }
    if let Some(&bad) = cfg.sizes.iter().find(|&&s| s == 0 || s > full.n_topics()) {
        return Err(invalid(format!("subset size {bad} must lie in 1..={}", full.n_topics())));
    }
    let truth = ground_truth_pairs(full, cfg.gamma)?;
    if truth.different_count() == 0 {
        return Err(invalid(format!("no pair of systems differs by more than gamma = {}", cfg.gamma)));
    }

    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let parts: Vec<Vec<Tally>> = (0..cfg.iters)
            .into_par_iter()
            .map(|it| {
                let mut rng = stream(cfg.seed, &[tag::SUBSAMPLE, size as u64, it]);
                let mut idx = sample(&mut rng, full.n_topics(), size).into_vec();
                idx.sort_unstable();
                let sub = full.select_topics(&idx)?;
                let tukey_seed = derive_key(cfg.seed, &[tag::TUKEY_SEED, size as u64, it]);
                let rejections = reject_all(&sub, procedures, params, tukey_seed)?;
                Ok(rejections
                    .iter()
                    .map(|r| {
                        let mut t = Tally::default();
                        t.record(r, Some(&truth.different));
                        t
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let tallies = sum_tallies(parts, procedures.len());
        let ctx = RowContext { scenario: "subsample", m: full.n_systems(), n: size, metric: &cfg.metric };
        for (proc, t) in procedures.iter().zip(&tallies) {
            push_rows(&mut rows, &ctx, proc, t, &["average_power"]);
        }
    }
    let config = serde_json::json!({
        "subsample": cfg,
        "topics": full.n_topics(),
        "systems": full.n_systems(),
        "different_pairs": truth.different_count(),
        "params": params,
        "procedures": procedures.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    Ok(ExperimentReport { rows, config, elapsed: started.elapsed() })
}
