use super::{studentized_range_cdf, system_pairs, PValueMatrix};
use crate::error::{invalid, Result};
use crate::trec_io::ScoreMatrix;

/// Relative size below which the residual spread counts as zero.
const ZERO_SPREAD: f64 = 1e-13;

/// Two-way ANOVA without replication (topics as blocks, systems as
/// treatments) followed by Tukey's HSD on every pair of systems.
///
/// When the residual mean square vanishes, pairs whose means coincide get
/// p = 1 and all others p = 0, and the matrix is flagged degenerate.
pub fn anova_tukey_hsd(matrix: &ScoreMatrix) -> Result<PValueMatrix> {
    let n = matrix.n_topics();
    let m = matrix.n_systems();
    if n < 2 || m < 2 {
        return Err(invalid("ANOVA needs at least 2 topics and 2 systems"));
    }
    let col_means = matrix.column_means();
    let row_means: Vec<f64> = (0..n).map(|t| matrix.row(t).iter().sum::<f64>() / m as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;

    let mut sse = 0.0;
    let mut scale = 0.0f64;
    for (t, row_mean) in row_means.iter().enumerate() {
        for (x, col_mean) in matrix.row(t).iter().zip(&col_means) {
            let r = x - row_mean - col_mean + grand;
            sse += r * r;
            scale = scale.max((x - grand).abs());
        }
    }
    let df_error = ((n - 1) * (m - 1)) as f64;
    let mse = sse / df_error;
    let se = (mse / n as f64).sqrt();

    let pairs = system_pairs(m);
    let degenerate = se <= ZERO_SPREAD * scale.max(f64::MIN_POSITIVE);
    let p = pairs
        .iter()
        .map(|&(i, j)| {
            let diff = (col_means[i] - col_means[j]).abs();
            if degenerate {
                if diff <= ZERO_SPREAD * scale {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 - studentized_range_cdf(diff / se, m, df_error)
            }
        })
        .collect();
    Ok(PValueMatrix::from_condensed(matrix.systems().to_vec(), p, degenerate))
}
