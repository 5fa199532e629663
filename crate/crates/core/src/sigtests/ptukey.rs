//! Studentized range distribution.
//!
//! For k standard normals the range CDF is
//! `W(w) = k ∫ φ(z) [Φ(z + w) − Φ(z)]^(k−1) dz`; with an independent
//! chi scale `s = χ_ν / √ν` the studentized range CDF is
//! `Q(q) = ∫ f_ν(s) W(q s) ds`. Both integrals use composite 16-point
//! Gauss-Legendre panels over ranges outside of which the integrands are
//! below double precision.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::quadrature::integrate;

/// Above this many degrees of freedom the chi scale is treated as 1.
const DF_AS_INFINITE: f64 = 1e7;

const INNER_LIMIT: f64 = 8.5;
const INNER_PANELS_PER_UNIT: f64 = 1.0;
const OUTER_PANELS: usize = 8;

#[inline]
fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ(b) − Φ(a)` for `a <= b`, computed on whichever tail keeps precision.
#[inline]
fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    }
}

/// CDF of the range of `k` independent standard normals.
pub fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let lo = -INNER_LIMIT;
    let hi = INNER_LIMIT;
    let panels = (((hi - lo) * INNER_PANELS_PER_UNIT).ceil() as usize).max(8);
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let f = |z: f64| {
        let dens = inv_sqrt_2pi * (-0.5 * z * z).exp();
        dens * normal_mass(z, z + w).powi(k as i32 - 1)
    };
    (kf * integrate(f, lo, hi, panels)).clamp(0.0, 1.0)
}

fn ln_scale_density(s: f64, df: f64) -> f64 {
    let half = 0.5 * df;
    half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2 + (df - 1.0) * s.ln() - half * s * s
}

/// Interval carrying all but ~e^-40 of the chi-scale density.
fn scale_support(df: f64) -> (f64, f64) {
    let mode = ((df - 1.0) / df).max(0.0).sqrt();
    let peak = ln_scale_density(mode.max(1e-12), df);
    let cutoff = peak - 40.0;
    let width = (1.0 / (2.0 * df).sqrt()).min(1.0);
    let mut hi = mode + width;
    while ln_scale_density(hi, df) > cutoff {
        hi += width;
    }
    let mut lo = mode;
    while lo > 0.0 && ln_scale_density(lo, df) > cutoff {
        lo -= width;
    }
    (lo.max(0.0), hi)
}

/// `P(Q <= q)` for the studentized range with `k` means and `df` error
/// degrees of freedom. Pass `f64::INFINITY` for a known variance.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    assert!(df >= 1.0, "degrees of freedom must be at least 1");
    if q <= 0.0 {
        return 0.0;
    }
    if !q.is_finite() {
        return 1.0;
    }
    if df >= DF_AS_INFINITE {
        return normal_range_cdf(q, k);
    }
    let (lo, hi) = scale_support(df);
    let f = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        ln_scale_density(s, df).exp() * normal_range_cdf(q * s, k)
    };
    integrate(f, lo, hi, OUTER_PANELS).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigtests::ttest::t_cdf;
    use approx::assert_abs_diff_eq;

    // Reference values from an independent statistical library.
    const REFERENCE: &[(f64, usize, f64, f64)] = &[
        (3.314, 3, f64::INFINITY, 0.949_955_859_593_89),
        (3.877, 3, 10.0, 0.950_012_911_246_746_9),
        (1.0, 2, 5.0, 0.488_915_919_569_719_47),
        (2.5, 4, 20.0, 0.682_797_002_627_416_8),
        (4.0, 5, 60.0, 0.951_949_456_456_021_1),
        (3.0, 10, 30.0, 0.472_298_598_506_622_9),
        (0.5, 3, 1.0, 0.062_483_143_264_809_84),
        (6.0, 3, 2.0, 0.907_906_195_753_513_2),
        (5.0, 10, 1000.0, 0.984_580_219_500_362_9),
        (2.0, 3, 100.0, 0.662_516_954_214_995_8),
    ];

    #[test]
    fn matches_reference_library() {
        for &(q, k, df, want) in REFERENCE {
            let got = studentized_range_cdf(q, k, df);
            assert!((got - want).abs() < 1e-6, "q={q} k={k} df={df}: got {got}, want {want}");
        }
    }

    #[test]
    fn two_means_reduce_to_closed_forms() {
        // range of two normals is |N(0, 2)|
        for w in [0.2, 1.0, 1.5, 3.0, 5.0] {
            let exact = 1.0 - 2.0 * upper_tail(w / std::f64::consts::SQRT_2);
            assert_abs_diff_eq!(normal_range_cdf(w, 2), exact, epsilon = 1e-10);
        }
        // studentized range of two means is sqrt(2)|t_df|
        for &(q, df) in &[(1.0, 3.0), (2.5, 7.0), (4.0, 15.0), (0.7, 1.0), (3.0, 120.0)] {
            let exact = 2.0 * t_cdf(q / std::f64::consts::SQRT_2, df) - 1.0;
            assert_abs_diff_eq!(studentized_range_cdf(q, 2, df), exact, epsilon = 1e-8);
        }
    }

    #[test]
    fn boundaries() {
        assert_eq!(studentized_range_cdf(0.0, 3, 10.0), 0.0);
        assert_eq!(studentized_range_cdf(-1.0, 3, 10.0), 0.0);
        assert!(studentized_range_cdf(40.0, 5, 20.0) > 1.0 - 1e-9);
        let mut prev = 0.0;
        for i in 1..60 {
            let v = studentized_range_cdf(i as f64 * 0.1, 4, 12.0);
            assert!(v >= prev);
            prev = v;
        }
    }
}
