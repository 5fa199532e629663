use statrs::function::beta::beta_reg;

use super::TestOutcome;
use crate::error::{invalid, Result};

/// Upper two-sided tail `P(|T| >= |t|)` for Student's t with `df` degrees
/// of freedom.
pub fn t_two_sided_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Cumulative distribution of Student's t.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "degrees of freedom must be positive");
    let half_tail = 0.5 * t_two_sided_tail(t, df);
    if t > 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Sum that is bit-identical under reordering and exactly negated under
/// negation of every term: positive and negative magnitudes are summed
/// separately in ascending order.
fn order_free_sum(values: &[f64]) -> f64 {
    let mut pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    let mut neg: Vec<f64> = values.iter().filter(|v| **v < 0.0).map(|v| -v).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    pos.iter().sum::<f64>() - neg.iter().sum::<f64>()
}

/// Two-sided paired t-test on `x - y`.
///
/// Degenerate cases: all differences zero gives p = 1; zero spread with
/// a non-zero mean gives p = 0. Both set `degenerate`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<TestOutcome> {
    if x.len() != y.len() {
        return Err(invalid(format!("paired samples differ in length ({} vs {})", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(invalid("paired t-test needs at least 2 observations"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = order_free_sum(&d) / nf;
    let mut sq: Vec<f64> = d.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let ss: f64 = sq.iter().sum();
    let sd = (ss / (nf - 1.0)).sqrt();

    if sd == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        let statistic = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(TestOutcome { p_value: p, statistic, degenerate: true });
    }
    let t = mean / (sd / nf.sqrt());
    Ok(TestOutcome { p_value: t_two_sided_tail(t, nf - 1.0), statistic: t, degenerate: false })
}
