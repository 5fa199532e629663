use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use mcptest_core::adjust::{AdjustedFamily, Method};
use mcptest_core::harness::{
    ground_truth_pairs, run_scenario, run_test, subsample_power_experiment, ExperimentReport, Procedure,
    SubsampleConfig, TestKind, TestParams,
};
use mcptest_core::metrics::{build_score_matrix, MetricSpec};
use mcptest_core::simkit::{default_props, synthetic_bank, RegressorBank, Scenario, SimConfig};
use mcptest_core::trec_io::{parse_qrels, parse_run, Qrels, RunSet};
use mcptest_core::ScoreMatrix;

use crate::args::{
    FitArgs, Format, MetricArgs, ScoreArgs, SimulateArgs, SubsampleArgs, TestArgs, TestOptions, TruthArgs,
};
use crate::Usage;

pub struct Session {
    pub quiet: bool,
}

impl Session {
    fn progress(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("mcptest: {msg}");
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read {}: {e}", path.display())).into())
}

fn load_run(path: &Path) -> Result<RunSet> {
    parse_run(&read_text(path)?).with_context(|| format!("parsing run {}", path.display()))
}

fn load_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(&read_text(path)?).with_context(|| format!("parsing qrels {}", path.display()))
}

fn load_matrix(path: &Path) -> Result<ScoreMatrix> {
    ScoreMatrix::from_csv_str(&read_text(path)?).with_context(|| format!("parsing matrix {}", path.display()))
}

fn usage<T: std::str::FromStr<Err = mcptest_core::Error>>(value: &str) -> Result<T> {
    value.parse::<T>().map_err(|e| Usage(e.to_string()).into())
}

fn emit(out: &str, bytes: &[u8]) -> Result<()> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes)?;
        stdout.flush()?;
    } else {
        std::fs::write(out, bytes).with_context(|| format!("writing {out}"))?;
    }
    Ok(())
}

fn metric_spec(args: &MetricArgs, denominator: &str) -> Result<MetricSpec> {
    let spec = MetricSpec { kind: usage(&args.metric)?, depth: args.depth, denominator: usage(denominator)? };
    spec.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(spec)
}

fn test_params(opts: &TestOptions) -> Result<TestParams> {
    let params = TestParams {
        level: opts.alpha,
        wilcoxon_mode: usage(&opts.wilcoxon_mode)?,
        permutations: opts.permutations,
        smoothed: opts.smoothed,
    };
    params.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(params)
}

fn procedures(list: Option<&[String]>) -> Result<Vec<Procedure>> {
    match list {
        None => Ok(Procedure::defaults()),
        Some(items) => items.iter().map(|s| usage(s.trim())).collect(),
    }
}

fn report_bytes(report: &ExperimentReport, format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Csv => report.to_csv_string().into_bytes(),
        Format::Json => report.to_json_string()?.into_bytes(),
    })
}

pub fn score(ctx: &Session, args: &ScoreArgs) -> Result<()> {
    let spec = metric_spec(&args.metric, &args.denominator)?;
    let runs = args.runs.iter().map(|p| load_run(p)).collect::<Result<Vec<_>>>()?;
    let qrels = load_qrels(&args.qrels)?;
    let matrix = build_score_matrix(&runs, &qrels, &spec)?;
    ctx.progress(format_args!("scored {} runs on {} topics", matrix.n_systems(), matrix.n_topics()));
    emit(&args.out, matrix.to_csv_string().as_bytes())
}

pub fn fit(ctx: &Session, args: &FitArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let qrels = load_qrels(&args.qrels)?;
    let bank = RegressorBank::fit(&run, &qrels, args.depth)?;
    ctx.progress(format_args!("fitted {} topic regressors for {}", bank.len(), bank.run_tag));
    emit(&args.out, bank.to_csv_string().as_bytes())
}

pub fn simulate(ctx: &Session, args: &SimulateArgs) -> Result<()> {
    let scenario: Scenario = usage(&args.scenario)?;
    let seed = args.seed.seed;
    let spec = metric_spec(&args.metric, &args.denominator)?;
    let params = test_params(&args.options)?;
    let procs = procedures(args.tests.as_deref())?;
    let bank = match &args.bank {
        Some(path) => RegressorBank::from_csv_str(&read_text(path)?)
            .with_context(|| format!("parsing bank {}", path.display()))?,
        None => {
            let size = args.rank_size.unwrap_or(mcptest_core::trec_io::DEFAULT_DEPTH);
            synthetic_bank(args.synthetic_topics, (0.5, 1.5), (-0.05, -0.005), size, seed)
                .map_err(|e| Usage(e.to_string()))?
        }
    };
    let cfg = SimConfig {
        m: args.m,
        n: args.n,
        reps: args.reps,
        first_rep: args.first_rep,
        props: args.props.clone().unwrap_or_else(|| default_props(args.m)),
        rank_size: args.rank_size.unwrap_or(bank.rank_size),
        metric: spec,
        seed,
    };
    cfg.validate().map_err(|e| Usage(e.to_string()))?;
    if args.n > bank.len() {
        return Err(Usage(format!("n = {} exceeds the {} topics of the bank", args.n, bank.len())).into());
    }
    if scenario == Scenario::Alt && cfg.props.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Usage("props must be strictly increasing".into()).into());
    }
    ctx.progress(format_args!("{} scenario: {} repetitions, m = {}, n = {}", scenario.name(), cfg.reps, cfg.m, cfg.n));
    let report = run_scenario(&bank, &cfg, scenario, &procs, &params)?;
    ctx.progress(format_args!("done in {:.2?}", report.elapsed));
    emit(&args.output.out, &report_bytes(&report, args.output.format)?)
}

pub fn test(ctx: &Session, args: &TestArgs) -> Result<()> {
    let kind: TestKind = usage(&args.test)?;
    let method: Method = usage(&args.adjust)?;
    let params = test_params(&args.options)?;
    let matrix = load_matrix(&args.matrix)?;
    let started = Instant::now();
    let family = run_test(&matrix, kind, &params, args.seed.seed)?;
    let adjusted = AdjustedFamily::new(family, method, params.level)?;
    ctx.progress(format_args!(
        "{kind}+{method}: {} of {} pairs rejected in {:.2?}",
        adjusted.rejections(),
        adjusted.adjusted_p.len(),
        started.elapsed()
    ));
    let bytes = match args.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            adjusted.write_csv(&mut buf)?;
            buf
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&adjusted)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    emit(&args.output.out, &bytes)
}

pub fn subsample(ctx: &Session, args: &SubsampleArgs) -> Result<()> {
    let params = test_params(&args.options)?;
    let procs = procedures(args.tests.as_deref())?;
    let full = load_matrix(&args.matrix)?;
    if let Some(bad) = args.sizes.iter().find(|&&s| s == 0 || s > full.n_topics()) {
        return Err(Usage(format!("subset size {bad} must lie in 1..={}", full.n_topics())).into());
    }
    let cfg = SubsampleConfig {
        sizes: args.sizes.clone(),
        iters: args.iters,
        gamma: args.gamma,
        seed: args.seed.seed,
        metric: args.metric.clone(),
    };
    ctx.progress(format_args!("subsampling {} sizes x {} iterations", cfg.sizes.len(), cfg.iters));
    let report = subsample_power_experiment(&full, &cfg, &procs, &params)?;
    ctx.progress(format_args!("done in {:.2?}", report.elapsed));
    emit(&args.output.out, &report_bytes(&report, args.output.format)?)
}

pub fn truth(ctx: &Session, args: &TruthArgs) -> Result<()> {
    let full = load_matrix(&args.matrix)?;
    let mask = ground_truth_pairs(&full, args.gamma)?;
    ctx.progress(format_args!(
        "{} of {} pairs differ by more than {}",
        mask.different_count(),
        mask.pairs.len(),
        args.gamma
    ));
    let mut buf = Vec::new();
    mask.write_csv(&mut buf)?;
    emit(&args.out, &buf)
}
