//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mcptest_core::adjust::{adjust, reject_set, AdjustedFamily, Method};
use mcptest_core::harness::{
    average_power, complete_power, estimate_fwer, minimal_power, run_scenario, theoretical_fwer, ExperimentReport,
    Procedure, TestParams, TruthMask,
};
use mcptest_core::rng::{hash_str, stream, tag};
use mcptest_core::sigtests::{
    paired_t_test, randomized_tukey_hsd, studentized_range_cdf, t_cdf, wilcoxon_signed_rank, HypothesisFamily,
    PairedTest, RandomizedTukey, WilcoxonMode,
};
use mcptest_core::simkit::{
    fit_regressor, sample_ranking, synthetic_bank, RegressorBank, Scenario, SimConfig, TopicRegressor,
};
use mcptest_core::{BinaryRanking, ScoreMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- oracles

/// Sequential rejection rules on sorted p-values.
fn brute_force(p: &[f64], method: Method, level: f64) -> Vec<bool> {
    let k = p.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap());
    let mut reject = vec![false; k];
    let kf = k as f64;
    match method {
        Method::None => (0..k).for_each(|i| reject[i] = p[i] <= level),
        Method::Bonferroni => (0..k).for_each(|i| reject[i] = p[i] <= level / kf),
        Method::Holm => {
            for (step, &i) in order.iter().enumerate() {
                if p[i] <= level / (kf - step as f64) {
                    reject[i] = true;
                } else {
                    break;
                }
            }
        }
        Method::Bh | Method::By => {
            let c: f64 = if method == Method::By { (1..=k).map(|j| 1.0 / j as f64).sum() } else { 1.0 };
            let last = (1..=k).rev().find(|&r| p[order[r - 1]] <= r as f64 * level / (kf * c));
            if let Some(last) = last {
                order[..last].iter().for_each(|&i| reject[i] = true);
            }
        }
    }
    reject
}

/// P(min(W+, W−) <= observed) over all 2^n' sign assignments.
fn wilcoxon_enumeration(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let rank: Vec<f64> = abs
        .iter()
        .map(|a| {
            let less = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = rank.iter().sum();
    let w_plus: f64 = nz.iter().zip(&rank).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let observed = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| rank[i]).sum();
        if wp.min(total - wp) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Γ(n/2) for positive integers n.
fn gamma_half(n: u32) -> f64 {
    if n == 1 {
        std::f64::consts::PI.sqrt()
    } else if n == 2 {
        1.0
    } else {
        (n as f64 / 2.0 - 1.0) * gamma_half(n - 2)
    }
}

/// Two-sided t tail by Simpson integration of the density on [0, |t|].
fn t_two_sided_oracle(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    let f = |x: f64| c * (1.0 + x * x / nu).powf(-(nu + 1.0) / 2.0);
    let steps = 200_000;
    let h = t.abs() / steps as f64;
    let mut s = f(0.0) + f(t.abs());
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Monte-Carlo P(Q <= q) from `draws` simulated studentized ranges.
fn ptukey_monte_carlo(q: f64, k: usize, df: Option<u32>, draws: u64, seed: u64) -> f64 {
    let chunks = 200u64;
    let per = draws / chunks;
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, &[c]);
            let mut hits = 0;
            for _ in 0..per {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for _ in 0..k {
                    let z: f64 = rng.sample(StandardNormal);
                    lo = lo.min(z);
                    hi = hi.max(z);
                }
                let scale = match df {
                    None => 1.0,
                    Some(df) => {
                        ((0..df).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum::<f64>() / df as f64).sqrt()
                    }
                };
                hits += u64::from((hi - lo) / scale <= q);
            }
            hits
        })
        .sum();
    hits as f64 / (per * chunks) as f64
}

/// Ridge-penalised log-likelihood of a logistic rank model.
fn objective(theta0: f64, theta1: f64, r: &[bool]) -> f64 {
    let mut ll = 0.0;
    for (i, &rel) in r.iter().enumerate() {
        let z = theta0 + theta1 * (i + 1) as f64;
        let h = 1.0 / (1.0 + (-z).exp());
        ll += if rel { h.ln() } else { (1.0 - h).ln() };
    }
    ll - 1e-6 * (theta0 * theta0 + theta1 * theta1)
}

/// Coarse-to-fine grid search for the maximiser of [`objective`].
fn grid_search(r: &[bool]) -> (f64, f64) {
    let mut best = (0.0, 0.0);
    let mut best_val = f64::NEG_INFINITY;
    for i in -200..=200 {
        for j in -200..=200 {
            let (a, b) = (i as f64 * 0.05, j as f64 * 0.01);
            let v = objective(a, b, r);
            if v > best_val {
                best_val = v;
                best = (a, b);
            }
        }
    }
    let (mut sa, mut sb) = (0.05, 0.01);
    while sa > 1e-7 {
        let centre = best;
        for i in -20..=20 {
            for j in -20..=20 {
                let (a, b) = (centre.0 + i as f64 * sa / 4.0, centre.1 + j as f64 * sb / 4.0);
                let v = objective(a, b, r);
                if v > best_val {
                    best_val = v;
                    best = (a, b);
                }
            }
        }
        sa /= 4.0;
        sb /= 4.0;
    }
    best
}

// --------------------------------------------------------------- criteria

fn adjustment_oracle() -> Outcome {
    let mut rng = stream(101, &[]);
    let mut checked = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=10);
        let p: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        for level in [0.05, 0.2] {
            let rej = |m| reject_set(&adjust(&p, m).unwrap(), level);
            for m in Method::ALL {
                if rej(m) != brute_force(&p, m, level) {
                    return Err(format!("{m} differs from the sequential rule on {p:?} at {level}"));
                }
            }
            let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !x || *y);
            let (bonf, holm, bh, by) = (rej(Method::Bonferroni), rej(Method::Holm), rej(Method::Bh), rej(Method::By));
            if !(subset(&bonf, &holm) && subset(&holm, &bh) && subset(&by, &bh)) {
                return Err(format!("dominance chain broken on {p:?}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} vector/level cases"))
}

fn by_hand_example() -> Outcome {
    let p = [0.01, 0.02, 0.04];
    let bh = reject_set(&adjust(&p, Method::Bh).unwrap(), 0.05);
    let by = reject_set(&adjust(&p, Method::By).unwrap(), 0.05);
    check(bh == [true; 3] && by == [false; 3], format!("bh {bh:?}, by {by:?}"))
}

fn wilcoxon_exactness() -> Outcome {
    let mut rng = stream(303, &[]);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=14);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-6i32..=6) as f64 * 0.125).collect();
        if d.iter().filter(|v| **v != 0.0).count() > 12 || d.iter().all(|v| *v == 0.0) {
            continue;
        }
        let zeros = vec![0.0; d.len()];
        let got = wilcoxon_signed_rank(&d, &zeros, WilcoxonMode::Exact).unwrap().p_value;
        worst = worst.max((got - wilcoxon_enumeration(&d)).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))
}

fn t_distribution() -> Outcome {
    let cdf = t_cdf(2.228, 10.0);
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let p = paired_t_test(&x, &[0.0; 5]).unwrap().p_value;
    let oracle = t_two_sided_oracle(p_to_t(&x), 4);
    check(
        (0.974..=0.976).contains(&cdf) && (p - oracle).abs() <= 1e-4,
        format!("t_cdf {cdf:.6}, p {p:.6} vs oracle {oracle:.6}"),
    )
}

fn p_to_t(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean / (var / n).sqrt()
}

fn studentized_range() -> Outcome {
    let cases = [(3.314, None), (3.877, Some(10u32))];
    let mut details = Vec::new();
    let mut ok = true;
    for (i, &(q, df)) in cases.iter().enumerate() {
        let mc = ptukey_monte_carlo(q, 3, df, 10_000_000, 505 + i as u64);
        let got = studentized_range_cdf(q, 3, df.map_or(f64::INFINITY, f64::from));
        ok &= (got - mc).abs() <= 2e-3 && (got - 0.95).abs() <= 2e-3;
        details.push(format!("Q({q}) = {got:.5}, MC {mc:.5}"));
    }
    check(ok, details.join("; "))
}

fn dyadic_matrix(rng: &mut impl Rng, n: usize, m: usize) -> ScoreMatrix {
    let rows: Vec<Vec<f64>> =
        (0..n).map(|_| (0..m).map(|_| rng.random_range(0..1024) as f64 / 1024.0).collect()).collect();
    ScoreMatrix::from_rows(&rows).unwrap()
}

/// m = 2: each round flips the sign of every topic difference with the
/// swap decision the shuffle would make for that topic.
fn paired_permutation(matrix: &ScoreMatrix, b: u64, seed: u64) -> f64 {
    let d: Vec<f64> = (0..matrix.n_topics()).map(|t| matrix.get(t, 0) - matrix.get(t, 1)).collect();
    let observed = d.iter().sum::<f64>().abs();
    let keys: Vec<u64> = matrix.topics().iter().map(|t| hash_str(t)).collect();
    let mut count = 0;
    for round in 0..b {
        let s: f64 = d
            .iter()
            .zip(&keys)
            .map(|(v, &key)| {
                let mut rng = stream(seed, &[tag::TUKEY_ITER, round, key]);
                if rng.random_range(0..=1u32) == 0 {
                    -v
                } else {
                    *v
                }
            })
            .sum();
        count += u64::from(s.abs() > observed);
    }
    count as f64 / b as f64
}

fn algorithm_fidelity() -> Outcome {
    let mut rng = stream(606, &[]);
    for trial in 0..20 {
        let n = rng.random_range(5..30);
        let matrix = dyadic_matrix(&mut rng, n, 2);
        let got = randomized_tukey_hsd(&matrix, &RandomizedTukey::new(2000, trial)).unwrap().get(0, 1).unwrap();
        let want = paired_permutation(&matrix, 2000, trial);
        if got != want {
            return Err(format!("trial {trial}: {got} vs hand-specialised {want}"));
        }
    }
    for trial in 0..100 {
        let (n, m) = (rng.random_range(3..20), rng.random_range(2..7));
        let matrix = dyadic_matrix(&mut rng, n, m);
        let row = rng.random_range(0..n);
        let c = rng.random_range(-1024..=1024) as f64 / 1024.0;
        let mut values = matrix.values().to_vec();
        values[row * m..(row + 1) * m].iter_mut().for_each(|v| *v += c);
        let shifted = ScoreMatrix::new(matrix.topics().to_vec(), matrix.systems().to_vec(), values).unwrap();
        let params = RandomizedTukey::new(2000, 1000 + trial);
        let a = randomized_tukey_hsd(&matrix, &params).unwrap();
        let b = randomized_tukey_hsd(&shifted, &params).unwrap();
        if a.condensed() != b.condensed() {
            return Err(format!("row shift changed p-values on trial {trial}"));
        }
    }
    Ok("20 paired matches, 100 row shifts".into())
}

fn single_test_calibration() -> Outcome {
    let fams: Vec<AdjustedFamily> = (0..2000u64)
        .map(|rep| {
            let mut rng = stream(707, &[rep]);
            let rows: Vec<Vec<f64>> =
                (0..50).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
            let fam = mcptest_core::sigtests::pairwise_family(&ScoreMatrix::from_rows(&rows).unwrap(), PairedTest::T)
                .unwrap();
            AdjustedFamily::new(fam, Method::None, 0.05).unwrap()
        })
        .collect();
    let rate = estimate_fwer(&fams).unwrap();
    check((rate - 0.05).abs() <= 0.013, format!("type I rate {rate:.4}"))
}

fn reference_bank() -> RegressorBank {
    synthetic_bank(50, (0.5, 1.5), (-0.05, -0.005), 1000, 808).unwrap()
}

fn rate_of(report: &ExperimentReport, proc: &str, kind: &str) -> f64 {
    let p: Procedure = proc.parse().unwrap();
    report
        .rows
        .iter()
        .find(|r| r.test == p.test.name() && r.adjustment == p.adjustment.name() && r.rate_kind == kind)
        .map(|r| r.rate)
        .unwrap()
}

fn null_report() -> ExperimentReport {
    let mut cfg = SimConfig::new(5, 50, 8);
    cfg.reps = 500;
    let procs: Vec<Procedure> =
        ["t", "t+bonferroni", "t+holm", "wilcoxon", "rtukey"].iter().map(|s| s.parse().unwrap()).collect();
    let params = TestParams { permutations: 2000, ..TestParams::default() };
    run_scenario(&reference_bank(), &cfg, Scenario::Null, &procs, &params).unwrap()
}

fn inflation(report: &ExperimentReport) -> Outcome {
    let t = rate_of(report, "t", "fwer");
    let bonf = rate_of(report, "t+bonferroni", "fwer");
    let holm = rate_of(report, "t+holm", "fwer");
    let rt = rate_of(report, "rtukey", "fwer");
    check(
        t > 0.10 && bonf <= 0.08 && holm <= 0.08 && (0.02..=0.09).contains(&rt),
        format!("t {t:.3}, bonferroni {bonf:.3}, holm {holm:.3}, rtukey {rt:.3}"),
    )
}

fn wilcoxon_vs_t(report: &ExperimentReport) -> Outcome {
    let t = rate_of(report, "t", "fwer");
    let w = rate_of(report, "wilcoxon", "fwer");
    check(w >= t - 0.02, format!("wilcoxon {w:.3}, t {t:.3}"))
}

fn power_ordering() -> Outcome {
    let mut cfg = SimConfig::new(3, 50, 10);
    cfg.reps = 500;
    cfg.props = vec![0.1, 0.2];
    let procs: Vec<Procedure> = ["wilcoxon+bh", "t+bonferroni", "rtukey"].iter().map(|s| s.parse().unwrap()).collect();
    let params = TestParams { permutations: 2000, ..TestParams::default() };
    let report = run_scenario(&reference_bank(), &cfg, Scenario::Alt, &procs, &params).unwrap();
    let wbh = rate_of(&report, "wilcoxon+bh", "complete_power");
    let tb = rate_of(&report, "t+bonferroni", "complete_power");
    let rt = rate_of(&report, "rtukey", "complete_power");
    check(wbh >= tb - 0.02 && rt <= wbh, format!("wilcoxon+bh {wbh:.3}, t+bonferroni {tb:.3}, rtukey {rt:.3}"))
}

fn power_definitions() -> Outcome {
    let mut rng = stream(1111, &[]);
    for case in 0..1000 {
        let m = rng.random_range(2..6);
        let k = m * (m - 1) / 2;
        let reps = rng.random_range(1..20);
        let systems: Vec<String> = (0..m).map(|i| format!("s{i}")).collect();
        let fams: Vec<AdjustedFamily> = (0..reps)
            .map(|_| {
                let p = (0..k).map(|_| if rng.random_bool(0.6) { 0.0 } else { 1.0 }).collect();
                AdjustedFamily::new(
                    HypothesisFamily::new("x", systems.clone(), p, vec![false; k]).unwrap(),
                    Method::None,
                    0.05,
                )
                .unwrap()
            })
            .collect();
        let truth = TruthMask {
            systems: systems.clone(),
            pairs: mcptest_core::sigtests::system_pairs(m),
            mean_diff: vec![1.0; k],
            different: vec![true; k],
            gamma: 0.0,
        };
        let (min, avg, all) =
            (minimal_power(&fams).unwrap(), average_power(&fams, &truth).unwrap(), complete_power(&fams).unwrap());
        if !(min >= avg && avg >= all) {
            return Err(format!("case {case}: minimal {min}, average {avg}, complete {all}"));
        }
    }
    Ok("1000 rejection patterns".into())
}

fn fwer_closed_form() -> Outcome {
    let v = theoretical_fwer(0.05, 15);
    check((v - 0.5367).abs() <= 5e-4, format!("{v:.5}"))
}

fn regressor_recovery() -> Outcome {
    let truth = TopicRegressor::new(1.0, -0.01).unwrap();
    let within: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|trial| {
            let r = sample_ranking(&truth, 5000, &mut stream(1313, &[trial])).unwrap();
            let fit = fit_regressor(&r).unwrap();
            ((fit.theta0 - 1.0).abs() <= 0.15, (fit.theta1 + 0.01).abs() <= 0.0015)
        })
        .collect();
    let hits = within.iter().filter(|(a, b)| *a && *b).count();
    let hits0 = within.iter().filter(|(a, _)| *a).count();
    let hits1 = within.iter().filter(|(_, b)| *b).count();
    let mut worst = 0.0f64;
    let mut rng = stream(1314, &[]);
    let mut fixtures = 0;
    while fixtures < 10 {
        let len = rng.random_range(12..40);
        let gen = TopicRegressor::new(rng.random_range(-1.0..2.0), rng.random_range(-0.3..0.0)).unwrap();
        let r = sample_ranking(&gen, len, &mut rng).unwrap();
        if separable(&r) {
            continue;
        }
        let fit = fit_regressor(&r).unwrap();
        let (a, b) = grid_search(r.positions());
        worst = worst.max((fit.theta0 - a).abs()).max((fit.theta1 - b).abs());
        fixtures += 1;
    }
    check(
        hits >= 90 && worst <= 2e-3,
        format!("{hits}/100 within 15% (theta0 {hits0}, theta1 {hits1}), grid deviation {worst:.2e}"),
    )
}

/// True when relevant and non-relevant positions can be split by one cut.
fn separable(r: &BinaryRanking) -> bool {
    let p = r.positions();
    let first_rel = p.iter().position(|x| *x);
    let last_rel = p.iter().rposition(|x| *x);
    let first_non = p.iter().position(|x| !*x);
    let last_non = p.iter().rposition(|x| !*x);
    match (first_rel, last_rel, first_non, last_non) {
        (Some(_), Some(lr), Some(fnr), Some(_)) if lr < fnr => true,
        (Some(fr), Some(_), Some(_), Some(ln)) if ln < fr => true,
        (None, ..) | (_, _, None, _) => true,
        _ => false,
    }
}

fn determinism(dir: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mcptest");
    let run = |threads: u32, name: &str, scenario: &str| -> Result<Vec<u8>, String> {
        let out = dir.join(name);
        let status = Command::new(bin)
            .args(["--quiet", "--threads", &threads.to_string(), "simulate", "--scenario", scenario])
            .args([
                "--m",
                "5",
                "--n",
                "50",
                "--reps",
                "200",
                "--seed",
                "7",
                "--permutations",
                "2000",
                "--format",
                "json",
            ])
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("simulate exited with {status}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    for scenario in ["null", "alt"] {
        let reference = run(1, &format!("{scenario}-1a.json"), scenario)?;
        for (threads, tag) in [(1, "1b"), (4, "4a"), (4, "4b")] {
            if run(threads, &format!("{scenario}-{tag}.json"), scenario)? != reference {
                return Err(format!("{scenario} report with --threads {threads} differs"));
            }
        }
    }
    Ok("null and alt reports identical across 4 runs each".into())
}

fn main() {
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let null = std::cell::OnceCell::new();
    let criteria: Vec<Criterion> = vec![
        ("adjustment oracle equivalence", Box::new(adjustment_oracle)),
        ("BY hand example", Box::new(by_hand_example)),
        ("Wilcoxon exactness", Box::new(wilcoxon_exactness)),
        ("t distribution", Box::new(t_distribution)),
        ("studentized range", Box::new(studentized_range)),
        ("randomised Tukey fidelity", Box::new(algorithm_fidelity)),
        ("single-test calibration", Box::new(single_test_calibration)),
        ("multiple-testing inflation", Box::new(|| inflation(null.get_or_init(null_report)))),
        ("Wilcoxon vs t under the null", Box::new(|| wilcoxon_vs_t(null.get_or_init(null_report)))),
        ("power ordering", Box::new(power_ordering)),
        ("power definitions", Box::new(power_definitions)),
        ("FWER closed form", Box::new(fwer_closed_form)),
        ("regressor recovery", Box::new(regressor_recovery)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (n, (name, criterion)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = criterion();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail} ({secs:.1}s)", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail} ({secs:.1}s)", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", 14 - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
