//! Logistic ranking simulation.
//!
//! A [`TopicRegressor`] models the probability that the document at rank
//! position `p` is relevant as `1 / (1 + exp(-θ0 - θ1·p))`. Regressors are
//! fitted per topic from a real run, sampled position by position to
//! produce synthetic rankings, and perturbed to produce systems that are
//! better by construction.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{DenominatorPolicy, MetricSpec};
use crate::rng::{hash_str, stream, tag};
use crate::trec_io::{relevance_vector, BinaryRanking, Qrels, RunSet, ScoreMatrix, DEFAULT_DEPTH};

/// L2 penalty applied to both parameters during fitting.
pub const RIDGE: f64 = 1e-6;
pub const FIT_GRADIENT_TOL: f64 = 1e-8;
pub const FIT_MAX_ITERATIONS: usize = 100;

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicRegressor {
    pub theta0: f64,
    pub theta1: f64,
}

impl TopicRegressor {
    pub fn new(theta0: f64, theta1: f64) -> Result<Self> {
        if !theta0.is_finite() || !theta1.is_finite() {
            return Err(invalid("regressor parameters must be finite"));
        }
        Ok(Self { theta0, theta1 })
    }

    #[inline]
    fn logit(&self, position: usize) -> f64 {
        self.theta0 + self.theta1 * position as f64
    }

    /// Probability of relevance at 1-based `position`.
    #[inline]
    pub fn relevance_probability(&self, position: usize) -> f64 {
        (-softplus(-self.logit(position))).exp()
    }

    /// Scales each parameter by the sign-dependent rule: positive values
    /// are multiplied by `1 + prop`, negative values divided by it. Every
    /// logit `θ0 + θ1·p` with `p >= 0` weakly increases.
    pub fn perturb(&self, prop: f64) -> Result<Self> {
        if !(prop > 0.0 && prop.is_finite()) {
            return Err(invalid(format!("perturbation proportion {prop} must be positive")));
        }
        let scale = |t: f64| {
            if t > 0.0 {
                t * (1.0 + prop)
            } else if t < 0.0 {
                t / (1.0 + prop)
            } else {
                0.0
            }
        };
        Ok(Self { theta0: scale(self.theta0), theta1: scale(self.theta1) })
    }

    /// Relevance probabilities for positions `1..=rank_size`.
    pub fn probabilities(&self, rank_size: usize) -> Vec<f64> {
        (1..=rank_size).map(|p| self.relevance_probability(p)).collect()
    }
}

/// Relevance probability at `position` (free-function form).
pub fn relevance_probability(reg: &TopicRegressor, position: usize) -> f64 {
    reg.relevance_probability(position)
}

/// Penalized Bernoulli log-likelihood of `ranking` under `reg`.
pub fn penalized_log_likelihood(reg: &TopicRegressor, ranking: &BinaryRanking) -> f64 {
    let ll: f64 = ranking
        .positions()
        .iter()
        .enumerate()
        .map(|(i, &rel)| {
            let z = reg.logit(i + 1);
            if rel {
                -softplus(-z)
            } else {
                -softplus(z)
            }
        })
        .sum();
    ll - RIDGE * (reg.theta0 * reg.theta0 + reg.theta1 * reg.theta1)
}

fn gradient_hessian(theta: [f64; 2], ranking: &BinaryRanking) -> ([f64; 2], [f64; 3]) {
    let reg = TopicRegressor { theta0: theta[0], theta1: theta[1] };
    let (mut g0, mut g1) = (0.0, 0.0);
    let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
    for (i, &rel) in ranking.positions().iter().enumerate() {
        let p = (i + 1) as f64;
        let h = reg.relevance_probability(i + 1);
        let resid = f64::from(u8::from(rel)) - h;
        g0 += resid;
        g1 += resid * p;
        let w = h * (1.0 - h);
        h00 += w;
        h01 += w * p;
        h11 += w * p * p;
    }
    g0 -= 2.0 * RIDGE * theta[0];
    g1 -= 2.0 * RIDGE * theta[1];
    // negated Hessian of the objective, positive definite
    ([g0, g1], [h00 + 2.0 * RIDGE, h01, h11 + 2.0 * RIDGE])
}

/// Fits `(θ0, θ1)` by damped Newton ascent on the ridge-penalized
/// log-likelihood, with positions fed as raw integers `1..=len`.
pub fn fit_regressor(ranking: &BinaryRanking) -> Result<TopicRegressor> {
    if ranking.len() < 2 {
        return Err(invalid("fitting a regressor needs a ranking of at least 2 positions"));
    }
    let mut theta = [0.0f64, 0.0];
    let mut current = penalized_log_likelihood(&TopicRegressor { theta0: 0.0, theta1: 0.0 }, ranking);
    for _ in 0..FIT_MAX_ITERATIONS {
        let (g, [a, b, c]) = gradient_hessian(theta, ranking);
        if g[0].hypot(g[1]) <= FIT_GRADIENT_TOL {
            return TopicRegressor::new(theta[0], theta[1]);
        }
        let det = a * c - b * b;
        let step = [(c * g[0] - b * g[1]) / det, (a * g[1] - b * g[0]) / det];
        let mut t = 1.0;
        loop {
            let cand = [theta[0] + t * step[0], theta[1] + t * step[1]];
            let value = penalized_log_likelihood(&TopicRegressor { theta0: cand[0], theta1: cand[1] }, ranking);
            // near the optimum the gain drops below the objective's rounding
            let slack = 1e-12 * current.abs().max(1.0);
            if value >= current - slack || t < 1e-10 {
                if value >= current - slack {
                    theta = cand;
                    current = value;
                }
                break;
            }
            t *= 0.5;
        }
    }
    let (g, _) = gradient_hessian(theta, ranking);
    if g[0].hypot(g[1]) <= FIT_GRADIENT_TOL {
        return TopicRegressor::new(theta[0], theta[1]);
    }
    Err(Error::NonConvergence { iterations: FIT_MAX_ITERATIONS, theta0: theta[0], theta1: theta[1] })
}

/// Draws one ranking: position `p` is relevant with probability `h(p)`,
/// independently for `p = 1..=rank_size`.
pub fn sample_ranking<R: Rng + ?Sized>(reg: &TopicRegressor, rank_size: usize, rng: &mut R) -> Result<BinaryRanking> {
    if rank_size == 0 {
        return Err(invalid("rank size must be at least 1"));
    }
    sample_from_probabilities(&reg.probabilities(rank_size), rng)
}

fn sample_from_probabilities<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<BinaryRanking> {
    BinaryRanking::new(probs.iter().map(|&h| rng.random_bool(h)).collect())
}

/// Per-topic regressors fitted from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorBank {
    pub run_tag: String,
    pub rank_size: usize,
    topics: IndexMap<String, TopicRegressor>,
}

impl RegressorBank {
    pub fn new(run_tag: impl Into<String>, rank_size: usize, topics: IndexMap<String, TopicRegressor>) -> Result<Self> {
        let run_tag = run_tag.into();
        if topics.is_empty() {
            return Err(invalid("regressor bank needs at least one topic"));
        }
        if rank_size == 0 {
            return Err(invalid("rank size must be at least 1"));
        }
        if run_tag.chars().any(char::is_whitespace) {
            return Err(invalid("run tag must not contain whitespace"));
        }
        Ok(Self { run_tag, rank_size, topics })
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn topics(&self) -> impl Iterator<Item = (&str, &TopicRegressor)> {
        self.topics.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, topic: &str) -> Option<&TopicRegressor> {
        self.topics.get(topic)
    }

    /// Fits one regressor per run topic that has judgments, on the top
    /// `depth` documents.
    pub fn fit(run: &RunSet, qrels: &Qrels, depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(invalid("fit depth must be at least 2"));
        }
        let mut topics = IndexMap::new();
        let mut longest = 0;
        for topic in run.topics().filter(|t| qrels.contains_topic(t)) {
            let r = relevance_vector(run, topic, qrels, depth)?;
            longest = longest.max(r.len());
            let reg = fit_regressor(&r).map_err(|e| match e {
                Error::InvalidArgument(m) => invalid(format!("topic {topic}: {m}")),
                other => other,
            })?;
            topics.insert(topic.to_string(), reg);
        }
        if topics.is_empty() {
            return Err(invalid(format!("run {} shares no topics with the qrels", run.system_tag)));
        }
        Self::new(run.system_tag.clone(), longest, topics)
    }

    /// Header `# run_tag=<tag> rank_size=<n>`, then `topic,theta0,theta1`.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# run_tag={} rank_size={}\ntopic,theta0,theta1\n", self.run_tag, self.rank_size);
        for (topic, reg) in &self.topics {
            let _ = writeln!(out, "{topic},{},{}", reg.theta0, reg.theta1);
        }
        out
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let meta = first
            .trim_end()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse { line: 1, msg: "missing `# run_tag=... rank_size=...` header".into() })?;
        let mut run_tag = None;
        let mut rank_size = None;
        for kv in meta.split_whitespace() {
            match kv.split_once('=') {
                Some(("run_tag", v)) => run_tag = Some(v.to_string()),
                Some(("rank_size", v)) => {
                    rank_size = Some(
                        v.parse::<usize>()
                            .map_err(|_| Error::Parse { line: 1, msg: format!("bad rank_size {v:?}") })?,
                    )
                }
                _ => return Err(Error::Parse { line: 1, msg: format!("unexpected header field {kv:?}") }),
            }
        }
        let (Some(run_tag), Some(rank_size)) = (run_tag, rank_size) else {
            return Err(Error::Parse { line: 1, msg: "header needs run_tag and rank_size".into() });
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["topic", "theta0", "theta1"] {
            return Err(Error::Parse { line: 2, msg: "expected header topic,theta0,theta1".into() });
        }
        let mut topics = IndexMap::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 3;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let num = |i: usize| {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { line, msg: format!("bad number {:?}", &rec[i]) })
            };
            let reg = TopicRegressor::new(num(1)?, num(2)?).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if topics.insert(rec[0].to_string(), reg).is_some() {
                return Err(Error::Duplicate(format!("topic {} (line {line})", &rec[0])));
            }
        }
        Self::new(run_tag, rank_size, topics)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }
}

/// Which simulation regime to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Every system samples from the unmodified regressors: all nulls true.
    Null,
    /// System 1 is unmodified, system i+1 uses `props[i]`: all nulls false.
    Alt,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Null => "null",
            Scenario::Alt => "alt",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" | "1" => Ok(Scenario::Null),
            "alt" | "2" => Ok(Scenario::Alt),
            _ => Err(invalid(format!("unknown scenario {s:?} (expected null|alt)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of simulated systems.
    pub m: usize,
    /// Topics per simulated matrix.
    pub n: usize,
    pub reps: u64,
    /// Index of the first repetition; lets a long run be split into parts.
    pub first_rep: u64,
    /// Perturbation proportion for systems 2..=m.
    pub props: Vec<f64>,
    pub rank_size: usize,
    pub metric: MetricSpec,
    pub seed: u64,
}

impl SimConfig {
    /// Defaults: 1000 repetitions, rank size 1000, AP over the sampled
    /// vector, `props[i] = 0.1·(i + 1)`.
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            reps: 1000,
            first_rep: 0,
            props: default_props(m),
            rank_size: DEFAULT_DEPTH,
            metric: MetricSpec { depth: DEFAULT_DEPTH, ..MetricSpec::default() },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(invalid("m must be at least 2"));
        }
        if self.n < 1 {
            return Err(invalid("n must be at least 1"));
        }
        if self.reps < 1 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.props.len() != self.m - 1 {
            return Err(invalid(format!("expected {} props for m = {}, got {}", self.m - 1, self.m, self.props.len())));
        }
        if self.props.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid("props must be positive"));
        }
        if self.rank_size < 1 {
            return Err(invalid("rank size must be at least 1"));
        }
        self.metric.validate()
    }
}

pub fn default_props(m: usize) -> Vec<f64> {
    (1..m).map(|i| 0.1 * i as f64).collect()
}

fn select_topics(bank: &RegressorBank, n: usize, seed: u64, rep: u64) -> Result<Vec<usize>> {
    if n > bank.len() {
        return Err(invalid(format!("bank has {} topics, {n} requested", bank.len())));
    }
    let mut rng = stream(seed, &[tag::TOPIC_SUBSET, rep]);
    let mut idx = sample(&mut rng, bank.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

fn score_sample(metric: &MetricSpec, probs: &[f64], rng: &mut crate::rng::Stream) -> Result<f64> {
    let ranking = sample_from_probabilities(probs, rng)?;
    let judged = match metric.denominator {
        DenominatorPolicy::RetrievedRelevant => 0,
        // no judgments exist for a simulated ranking; assume the expected
        // number of relevant documents in the ranking
        DenominatorPolicy::QrelsRelevant => {
            let expected = probs.iter().sum::<f64>().ceil() as usize;
            expected.max(ranking.relevant_count())
        }
    };
    metric.score(&ranking, judged)
}

fn simulate(
    bank: &RegressorBank,
    cfg: &SimConfig,
    rep: u64,
    seed: u64,
    regressors: impl Fn(&TopicRegressor, usize) -> Result<TopicRegressor>,
) -> Result<ScoreMatrix> {
    cfg.validate()?;
    let rows = select_topics(bank, cfg.n, seed, rep)?;
    let entries: Vec<(&String, &TopicRegressor)> = bank.topics.iter().collect();
    let mut values = Vec::with_capacity(cfg.n * cfg.m);
    let mut topics = Vec::with_capacity(cfg.n);
    for &r in &rows {
        let (topic, base) = entries[r];
        let key = hash_str(topic);
        for system in 0..cfg.m {
            let reg = regressors(base, system)?;
            let probs = reg.probabilities(cfg.rank_size);
            let mut rng = stream(seed, &[tag::SAMPLE_RANKING, rep, key, system as u64]);
            values.push(score_sample(&cfg.metric, &probs, &mut rng)?);
        }
        topics.push(topic.clone());
    }
    let systems = (1..=cfg.m).map(|s| format!("sys{s}")).collect();
    ScoreMatrix::new(topics, systems, values)
}

/// One Scenario-1 matrix: n topics drawn without replacement per
/// repetition, the same topics for every system, all sampled from the
/// unmodified regressors.
pub fn simulate_null_family(bank: &RegressorBank, cfg: &SimConfig, rep: u64, seed: u64) -> Result<ScoreMatrix> {
    simulate(bank, cfg, rep, seed, |reg, _| Ok(*reg))
}

/// One Scenario-2 matrix: system 1 uses the original regressors, system
/// `i + 1` uses each original regressor perturbed by `props[i - 1]`.
pub fn simulate_alt_family(bank: &RegressorBank, cfg: &SimConfig, rep: u64, seed: u64) -> Result<ScoreMatrix> {
    cfg.validate()?;
    if cfg.props.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("props must be strictly increasing so every pair of systems differs"));
    }
    simulate(
        bank,
        cfg,
        rep,
        seed,
        |reg, system| {
            if system == 0 {
                Ok(*reg)
            } else {
                reg.perturb(cfg.props[system - 1])
            }
        },
    )
}

/// Draws a matrix for `scenario`.
pub fn simulate_family(
    scenario: Scenario,
    bank: &RegressorBank,
    cfg: &SimConfig,
    rep: u64,
    seed: u64,
) -> Result<ScoreMatrix> {
    match scenario {
        Scenario::Null => simulate_null_family(bank, cfg, rep, seed),
        Scenario::Alt => simulate_alt_family(bank, cfg, rep, seed),
    }
}

/// A bank of `topics` regressors with `θ0 ~ U[θ0_range]`, `θ1 ~ U[θ1_range]`.
pub fn synthetic_bank(
    topics: usize,
    theta0_range: (f64, f64),
    theta1_range: (f64, f64),
    rank_size: usize,
    seed: u64,
) -> Result<RegressorBank> {
    let mut rng = stream(seed, &[0x5b_a7c5]);
    let mut map = IndexMap::new();
    for t in 1..=topics {
        let reg = TopicRegressor::new(
            rng.random_range(theta0_range.0..=theta0_range.1),
            rng.random_range(theta1_range.0..=theta1_range.1),
        )?;
        map.insert(format!("{t}"), reg);
    }
    RegressorBank::new("synthetic", rank_size, map)
}
