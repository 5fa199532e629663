use statrs::function::erf::erfc;

use super::TestOutcome;
use crate::error::{invalid, Result};

/// Largest non-zero difference count handled exactly under [`WilcoxonMode::Auto`].
pub const EXACT_CUTOFF: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMode {
    /// Null distribution over all 2^n' sign assignments.
    Exact,
    /// Normal approximation with tie correction and 0.5 continuity correction.
    Approx,
    /// Exact when n' <= [`EXACT_CUTOFF`], otherwise approximate.
    #[default]
    Auto,
}

impl std::str::FromStr for WilcoxonMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "approx" => Ok(Self::Approx),
            "auto" => Ok(Self::Auto),
            _ => Err(invalid(format!("unknown wilcoxon mode {s:?} (expected exact|approx|auto)"))),
        }
    }
}

/// Ranks of the absolute non-zero differences, doubled so that average
/// ranks of tied groups stay integral. Returns (doubled ranks, signs, tie
/// group sizes).
pub(crate) fn doubled_signed_ranks(d: &[f64]) -> (Vec<u64>, Vec<bool>, Vec<usize>) {
    let mut nz: Vec<(f64, bool)> = d.iter().filter(|v| **v != 0.0).map(|&v| (v.abs(), v > 0.0)).collect();
    nz.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = Vec::with_capacity(nz.len());
    let mut ties = Vec::new();
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].0 == nz[i].0 {
            j += 1;
        }
        // positions i..=j (0-based) share rank ((i+1) + (j+1)) / 2
        let doubled = (i + j + 2) as u64;
        ranks.extend(std::iter::repeat_n(doubled, j - i + 1));
        ties.push(j - i + 1);
        i = j + 1;
    }
    let signs = nz.into_iter().map(|(_, s)| s).collect();
    (ranks, signs, ties)
}

/// Null probability mass of the doubled W+ statistic, indexed by value.
fn exact_null_distribution(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut mass = vec![0.0f64; total as usize + 1];
    mass[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let m = mass[s];
            if m != 0.0 {
                mass[s + r] += 0.5 * m;
                mass[s] = 0.5 * m;
            }
        }
        reach += r;
    }
    mass
}

/// Two-sided Wilcoxon signed-rank test on `x - y`.
///
/// Zero differences are discarded. When every difference is zero the
/// outcome is p = 1 flagged `degenerate`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], mode: WilcoxonMode) -> Result<TestOutcome> {
    if x.len() != y.len() {
        return Err(invalid(format!("paired samples differ in length ({} vs {})", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(invalid("wilcoxon test needs at least 1 observation"));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let (ranks, signs, ties) = doubled_signed_ranks(&d);
    let n = ranks.len();
    if n == 0 {
        return Ok(TestOutcome { p_value: 1.0, statistic: 0.0, degenerate: true });
    }
    let total: u64 = ranks.iter().sum();
    let w_plus: u64 = ranks.iter().zip(&signs).filter(|(_, &s)| s).map(|(r, _)| r).sum();
    let w_min = w_plus.min(total - w_plus);
    let statistic = w_min as f64 / 2.0;

    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::Approx => false,
        WilcoxonMode::Auto => n <= EXACT_CUTOFF,
    };
    let p = if exact {
        let mass = exact_null_distribution(&ranks);
        2.0 * mass[..=w_min as usize].iter().sum::<f64>()
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let w = w_plus as f64 / 2.0;
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(TestOutcome { p_value: p.clamp(0.0, 1.0), statistic, degenerate: false })
}
