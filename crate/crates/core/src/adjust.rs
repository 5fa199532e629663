//! Multiple-comparison p-value adjustments.
//!
//! Each method maps raw p-values to adjusted ones such that thresholding
//! the adjusted values at the nominal level reproduces the method's
//! rejection set: Bonferroni and Holm control the family-wise error rate,
//! Benjamini-Hochberg and Benjamini-Yekutieli the false discovery rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sigtests::HypothesisFamily;

/// Default significance level for both α (FWER) and δ (FDR).
pub const DEFAULT_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Bonferroni,
    Holm,
    Bh,
    By,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::None, Method::Bonferroni, Method::Holm, Method::Bh, Method::By];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Bonferroni => "bonferroni",
            Method::Holm => "holm",
            Method::Bh => "bh",
            Method::By => "by",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown adjustment {s:?} (expected none|bonferroni|holm|bh|by)")))
    }
}

/// Indices of `p` in ascending order, ties kept in input order.
fn ascending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    idx
}

fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Step-up adjustment shared by BH and BY: `min(1, min_{i>=j} c·k/i·p_(i))`.
fn step_up(p: &[f64], order: &[usize], factor: f64) -> Vec<f64> {
    let k = p.len();
    let mut out = vec![0.0; k];
    let mut running = f64::INFINITY;
    for rank in (1..=k).rev() {
        let idx = order[rank - 1];
        let v = factor * (k as f64 / rank as f64) * p[idx];
        running = running.min(v);
        out[idx] = running;
    }
    out.iter_mut().for_each(|v| *v = v.min(1.0));
    out
}

/// Adjusts k raw p-values with `method`. Output order matches input order.
pub fn adjust(p: &[f64], method: Method) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(invalid("at least one p-value is required"));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let k = p.len();
    let kf = k as f64;
    Ok(match method {
        Method::None => p.to_vec(),
        Method::Bonferroni => p.iter().map(|v| (kf * v).min(1.0)).collect(),
        Method::Holm => {
            let order = ascending_order(p);
            let mut out = vec![0.0; k];
            let mut running = 0.0f64;
            for (i, &idx) in order.iter().enumerate() {
                running = running.max((kf - i as f64) * p[idx]);
                out[idx] = running;
            }
            out.iter_mut().for_each(|v| *v = v.min(1.0));
            out
        }
        Method::Bh => step_up(p, &ascending_order(p), 1.0),
        Method::By => step_up(p, &ascending_order(p), harmonic(k)),
    })
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level {level} must lie in (0, 1)")))
    }
}

/// A hypothesis family with adjusted p-values at a nominal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedFamily {
    pub base: HypothesisFamily,
    pub method: Method,
    pub adjusted_p: Vec<f64>,
    pub level: f64,
}

impl AdjustedFamily {
    pub fn new(base: HypothesisFamily, method: Method, level: f64) -> Result<Self> {
        check_level(level)?;
        let adjusted_p = adjust(&base.raw_p, method)?;
        Ok(Self { base, method, adjusted_p, level })
    }

    /// Rejection flags, aligned with `base.pairs`.
    pub fn reject_set(&self) -> Vec<bool> {
        reject_set(&self.adjusted_p, self.level)
    }

    pub fn rejections(&self) -> usize {
        self.adjusted_p.iter().filter(|&&p| p <= self.level).count()
    }

    /// Writes `sys_i,sys_j,p,adjusted_p,rejected`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["sys_i", "sys_j", "p", "adjusted_p", "rejected"])?;
        let rejected = self.reject_set();
        for (n, &(i, j)) in self.base.pairs.iter().enumerate() {
            w.write_record([
                self.base.systems[i].as_str(),
                self.base.systems[j].as_str(),
                &format!("{}", self.base.raw_p[n]),
                &format!("{}", self.adjusted_p[n]),
                if rejected[n] { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Flags every p-value at or below `level`.
pub fn reject_set(adjusted_p: &[f64], level: f64) -> Vec<bool> {
    adjusted_p.iter().map(|&p| p <= level).collect()
}
