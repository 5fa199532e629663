use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{system_pairs, PValueMatrix};
use crate::error::{invalid, Result};
use crate::rng::{hash_str, stream, tag};
use crate::trec_io::ScoreMatrix;

/// Parameters of the randomised Tukey HSD permutation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizedTukey {
    /// Number of permutation rounds B.
    pub permutations: u64,
    pub seed: u64,
    /// Report (count + 1) / (B + 1) instead of count / B.
    pub smoothed: bool,
}

impl RandomizedTukey {
    pub fn new(permutations: u64, seed: u64) -> Self {
        Self { permutations, seed, smoothed: false }
    }
}

/// Durstenfeld shuffle: for `i` from `len − 1` down to 1, swap `i` with a
/// uniform index in `0..=i` drawn as `u32`.
pub fn fisher_yates<T, R: Rng + ?Sized>(values: &mut [T], rng: &mut R) {
    for i in (1..values.len()).rev() {
        let j = rng.random_range(0..=i as u32) as usize;
        values.swap(i, j);
    }
}

/// Column sums of the matrix after permuting every topic row. The row for
/// topic `t` in round `round` is shuffled by the stream
/// `(seed, round, hash(t))`, so the result does not depend on row order.
fn permuted_range(
    matrix: &ScoreMatrix,
    row_keys: &[u64],
    seed: u64,
    round: u64,
    row: &mut [f64],
    sums: &mut [f64],
) -> f64 {
    sums.iter_mut().for_each(|s| *s = 0.0);
    for (t, &key) in row_keys.iter().enumerate() {
        row.copy_from_slice(matrix.row(t));
        let mut rng = stream(seed, &[tag::TUKEY_ITER, round, key]);
        fisher_yates(row, &mut rng);
        for (s, v) in sums.iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    let (lo, hi) = sums.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    hi - lo
}

fn column_sums(matrix: &ScoreMatrix) -> Vec<f64> {
    let mut sums = vec![0.0; matrix.n_systems()];
    for t in 0..matrix.n_topics() {
        for (s, v) in sums.iter_mut().zip(matrix.row(t)) {
            *s += v;
        }
    }
    sums
}

/// Paired randomised Tukey HSD.
///
/// Each of the B rounds permutes every topic row independently and takes
/// the spread between the largest and smallest permuted column mean. The
/// p-value of a pair is the fraction of rounds whose spread is strictly
/// larger than the pair's observed absolute mean difference. Column sums
/// stand in for means since all columns share the divisor n.
///
/// With every row constant no spread ever exceeds an observed difference,
/// so all p-values are 0; the matrix is flagged degenerate in that case.
pub fn randomized_tukey_hsd(matrix: &ScoreMatrix, params: &RandomizedTukey) -> Result<PValueMatrix> {
    if params.permutations == 0 {
        return Err(invalid("number of permutations must be at least 1"));
    }
    let m = matrix.n_systems();
    if m < 2 {
        return Err(invalid("randomised Tukey HSD needs at least 2 systems"));
    }
    let row_keys: Vec<u64> = matrix.topics().iter().map(|t| hash_str(t)).collect();
    let observed_sums = column_sums(matrix);
    let pairs = system_pairs(m);
    let observed: Vec<f64> = pairs.iter().map(|&(i, j)| (observed_sums[i] - observed_sums[j]).abs()).collect();

    let mut spreads: Vec<f64> = (0..params.permutations)
        .into_par_iter()
        .map_init(
            || (vec![0.0; m], vec![0.0; m]),
            |(row, sums), round| permuted_range(matrix, &row_keys, params.seed, round, row, sums),
        )
        .collect();
    spreads.sort_by(f64::total_cmp);

    let b = params.permutations as f64;
    let p = observed
        .iter()
        .map(|&obs| {
            let exceed = (spreads.len() - spreads.partition_point(|&d| d <= obs)) as f64;
            if params.smoothed {
                (exceed + 1.0) / (b + 1.0)
            } else {
                exceed / b
            }
        })
        .collect();
    let degenerate = (0..matrix.n_topics()).all(|t| {
        let row = matrix.row(t);
        row.iter().all(|v| *v == row[0])
    });
    Ok(PValueMatrix::from_condensed(matrix.systems().to_vec(), p, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_dyadic(n: usize, m: usize, seed: u64) -> ScoreMatrix {
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..m).map(|_| f64::from(rng.random_range(0..=1024u32)) / 1024.0).collect()).collect();
        ScoreMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_rows_give_zero_p() {
        let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64 / 10.0; 3]).collect();
        let pm = randomized_tukey_hsd(&ScoreMatrix::from_rows(&rows).unwrap(), &RandomizedTukey::new(200, 1)).unwrap();
        assert!(pm.degenerate);
        assert!(pm.condensed().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn deterministic_and_bounded() {
        let x = random_dyadic(12, 4, 5);
        let a = randomized_tukey_hsd(&x, &RandomizedTukey::new(500, 9)).unwrap();
        let b = randomized_tukey_hsd(&x, &RandomizedTukey::new(500, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.condensed().iter().all(|p| (0.0..=1.0).contains(p)));
        let c = randomized_tukey_hsd(&x, &RandomizedTukey::new(500, 10)).unwrap();
        assert_ne!(a.condensed(), c.condensed());
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let x = random_dyadic(10, 5, 3);
        let params = RandomizedTukey::new(3000, 4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| randomized_tukey_hsd(&x, &params)).unwrap();
        let b = four.install(|| randomized_tukey_hsd(&x, &params)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn row_order_does_not_change_result() {
        let x = random_dyadic(9, 4, 11);
        let mut order: Vec<usize> = (0..9).collect();
        order.reverse();
        order.swap(2, 5);
        let y = x.select_topics(&order).unwrap();
        let params = RandomizedTukey::new(1000, 2);
        assert_eq!(
            randomized_tukey_hsd(&x, &params).unwrap().condensed(),
            randomized_tukey_hsd(&y, &params).unwrap().condensed()
        );
    }

    #[test]
    fn smoothed_estimator() {
        let x = random_dyadic(8, 3, 21);
        let raw = randomized_tukey_hsd(&x, &RandomizedTukey::new(400, 1)).unwrap();
        let smooth =
            randomized_tukey_hsd(&x, &RandomizedTukey { smoothed: true, ..RandomizedTukey::new(400, 1) }).unwrap();
        for (r, s) in raw.condensed().iter().zip(smooth.condensed()) {
            assert_eq!(*s, (r * 400.0 + 1.0) / 401.0);
        }
    }

    #[test]
    fn zero_permutations_rejected() {
        assert!(randomized_tukey_hsd(&random_dyadic(3, 3, 0), &RandomizedTukey::new(0, 0)).is_err());
    }
}
