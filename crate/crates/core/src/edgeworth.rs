//! Normal-approximation formulas for interval probabilities of `S_n`.
//!
//! All refined formulas are evaluated in the normalized coordinate
//! `v = x n^{-1/2}`; the correction terms are written as `v/√n` and `v²`
//! rather than `x/n` and `x²/n`, which are algebraically identical.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::dist_zoo::DistributionSpec;
use crate::error::{Error, Result};

/// Highest Chebyshev-Hermite degree accepted by [`hermite_che`].
pub const MAX_HERMITE_DEGREE: usize = 10;

/// The target `P(S_n ∈ [x, x+Δ))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalQuery {
    pub n: u64,
    pub x: f64,
    pub delta: f64,
}

impl IntervalQuery {
    pub fn new(n: u64, x: f64, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::param(
                "delta",
                format!("must be positive and finite, got {delta}"),
            ));
        }
        if !x.is_finite() {
            return Err(Error::param("x", format!("must be finite, got {x}")));
        }
        Ok(IntervalQuery { n, x, delta })
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// `x n^{-1/2}`.
    pub fn v(&self) -> f64 {
        self.x / self.sqrt_n()
    }
}

/// The refined approximation, split into its three terms. All values are on
/// the probability scale; divide by `delta` for the per-unit-width form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxBreakdown {
    pub v: f64,
    pub stone_term: f64,
    pub skew_term: f64,
    pub delta_term: f64,
    /// Raw signed sum. It can be negative far in the tails.
    pub total: f64,
}

impl ApproxBreakdown {
    /// `total` clamped at zero, for reporting only.
    pub fn clamped_total(&self) -> f64 {
        self.total.max(0.0)
    }
}

/// Third and fourth cumulants of a standardized variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumulantSet {
    pub gamma3: f64,
    pub gamma4: f64,
}

impl CumulantSet {
    /// `γ₃ = μ₃`, `γ₄ = μ₄ − 3` for a standardized distribution.
    pub fn of(dist: &DistributionSpec) -> Self {
        CumulantSet {
            gamma3: dist.mu3,
            gamma4: dist.raw_moment(4) - 3.0,
        }
    }
}

pub fn normal_density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// Probabilists' Hermite polynomial `He_k(x)` by the three-term recurrence.
pub fn hermite_che(k: usize, x: f64) -> Result<f64> {
    if k > MAX_HERMITE_DEGREE {
        return Err(Error::param(
            "k",
            format!("degree {k} exceeds the cap of {MAX_HERMITE_DEGREE}"),
        ));
    }
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return Ok(prev);
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Stone's approximation `Δ n^{-1/2} φ(x n^{-1/2})`.
pub fn stone_approx(q: &IntervalQuery) -> f64 {
    q.delta / q.sqrt_n() * normal_density(q.v())
}

/// One-term refinement of the Stone approximation with its skewness and
/// interval-width corrections.
pub fn refined_approx(dist: &DistributionSpec, q: &IntervalQuery) -> ApproxBreakdown {
    refined_with_mu3(dist.mu3, q)
}

pub fn refined_with_mu3(mu3: f64, q: &IntervalQuery) -> ApproxBreakdown {
    let v = q.v();
    let rn = q.sqrt_n();
    let stone_term = stone_approx(q);
    let skew_term = stone_term * mu3 * v * (v * v - 3.0) / (6.0 * rn);
    let delta_term = -stone_term * q.delta * v / (2.0 * rn);
    ApproxBreakdown {
        v,
        stone_term,
        skew_term,
        delta_term,
        total: stone_term + skew_term + delta_term,
    }
}

/// Edgeworth expansion of `P(S_n / √n < v)` through order `1/n`.
pub fn edgeworth_cdf(cum: &CumulantSet, n: u64, v: f64) -> f64 {
    let rn = (n as f64).sqrt();
    let he = |k| hermite_che(k, v).expect("degree below cap");
    let first = cum.gamma3 * he(2) / (6.0 * rn);
    let second = (cum.gamma3 * cum.gamma3 * he(5) / 72.0 + cum.gamma4 * he(3) / 24.0) / n as f64;
    normal_cdf(v) - normal_density(v) * (first + second)
}

/// Interval probability obtained by differencing the Edgeworth CDF expansion
/// at `v` and `v + Δ/√n` and keeping terms through order `1/n`.
pub fn cdf_difference_approx(cum: &CumulantSet, q: &IntervalQuery) -> f64 {
    let v = q.v();
    let rn = q.sqrt_n();
    let he3 = hermite_che(3, v).expect("degree below cap");
    let he1 = hermite_che(1, v).expect("degree below cap");
    let bracket = 1.0 + cum.gamma3 * he3 / (6.0 * rn) - q.delta * he1 / (2.0 * rn);
    q.delta / rn * normal_density(v) * bracket
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::dist_zoo::builtin;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn q(n: u64, x: f64, delta: f64) -> IntervalQuery {
        IntervalQuery::new(n, x, delta).unwrap()
    }

    #[test]
    fn query_contract() {
        assert!(IntervalQuery::new(0, 0.0, 1.0).is_err());
        assert!(IntervalQuery::new(1, 0.0, 0.0).is_err());
        assert!(IntervalQuery::new(1, 0.0, -0.5).is_err());
        assert!(IntervalQuery::new(1, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn normal_density_values() {
        assert_abs_diff_eq!(normal_density(0.0), 0.398_942_280_4, epsilon = 1e-10);
        assert_abs_diff_eq!(normal_density(1.0), 0.241_970_724_5, epsilon = 1e-10);
        for t in [0.3, 1.7, 4.2, 9.0] {
            assert_eq!(normal_density(t), normal_density(-t));
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite_che(2, 0.0).unwrap(), -1.0);
        assert_eq!(hermite_che(3, 1.0).unwrap(), -2.0);
        assert_eq!(hermite_che(5, 1.0).unwrap(), 6.0);
        assert_eq!(hermite_che(0, 3.3).unwrap(), 1.0);
        assert!(hermite_che(11, 1.0).is_err());
        assert!(hermite_che(10, 1.0).is_ok());
    }

    #[test]
    fn hermite_matches_explicit_polynomials() {
        let explicit: [fn(f64) -> f64; 6] = [
            |_| 1.0,
            |x| x,
            |x| x * x - 1.0,
            |x| x.powi(3) - 3.0 * x,
            |x| x.powi(4) - 6.0 * x * x + 3.0,
            |x| x.powi(5) - 10.0 * x.powi(3) + 15.0 * x,
        ];
        // 100 deterministic pseudo-random points in [-6, 6]
        let mut s = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..100 {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let x = (s >> 11) as f64 / (1u64 << 53) as f64 * 12.0 - 6.0;
            for (k, p) in explicit.iter().enumerate() {
                let want = p(x);
                let got = hermite_che(k, x).unwrap();
                assert!(
                    (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                    "He_{k}({x}) = {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn stone_examples() {
        assert_abs_diff_eq!(
            stone_approx(&q(100, 0.0, 0.5)),
            0.019_947_114_0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            stone_approx(&q(4, 2.0, 0.1)),
            0.012_098_536_2,
            epsilon = 1e-10
        );
        assert_relative_eq!(
            stone_approx(&q(1, 10.0, 1.0)),
            7.694_598_626_706_419e-23,
            max_relative = 1e-12
        );
    }

    #[test]
    fn refined_examples() {
        let exp = builtin("std_exponential").unwrap();
        let uni = builtin("std_uniform").unwrap();
        let b = refined_approx(&exp, &q(100, 0.0, 0.5));
        assert_abs_diff_eq!(b.total, 0.019_947_114_0, epsilon = 1e-10);
        assert_eq!(b.skew_term, 0.0);
        assert_eq!(b.delta_term, 0.0);
        for (n, x, d) in [(16, 4.0, 0.25), (3, -2.5, 1.0), (1000, 40.0, 0.01)] {
            assert_eq!(refined_approx(&uni, &q(n, x, d)).skew_term, 0.0);
        }
        // 40-digit re-evaluation of the three closed-form terms
        let b = refined_approx(&exp, &q(64, 8.0, 0.25));
        assert_relative_eq!(
            b.stone_term,
            0.007_561_585_141_223_229_7,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            b.skew_term,
            -0.000_630_132_095_101_935_81,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            b.delta_term,
            -0.000_118_149_767_831_612_96,
            max_relative = 1e-13
        );
        assert_relative_eq!(b.total, 0.006_813_303_278_289_680_9, max_relative = 1e-14);
    }

    #[test]
    fn refined_reduces_to_stone_without_corrections() {
        let b = refined_with_mu3(0.0, &q(9, 0.0, 0.7));
        assert_eq!(b.total, stone_approx(&q(9, 0.0, 0.7)));
        let b = refined_with_mu3(0.0, &q(9, 2.0, 0.7));
        assert_eq!(b.total - b.delta_term, stone_approx(&q(9, 2.0, 0.7)));
    }

    #[test]
    fn refined_total_can_go_negative_but_stone_cannot() {
        let exp = builtin("std_exponential").unwrap();
        let b = refined_approx(&exp, &q(4, -8.0, 1.0));
        assert!(b.total < 0.0);
        assert!(b.stone_term >= 0.0);
        assert_eq!(b.clamped_total(), 0.0);
    }

    #[test]
    fn edgeworth_cdf_examples() {
        let zero = CumulantSet {
            gamma3: 0.0,
            gamma4: 0.0,
        };
        for n in [1, 7, 1000] {
            assert_eq!(edgeworth_cdf(&zero, n, 0.0), 0.5);
        }
        let kurt = CumulantSet {
            gamma3: 0.0,
            gamma4: 6.0,
        };
        assert_eq!(edgeworth_cdf(&kurt, 10, 0.0), 0.5);
        let skew = CumulantSet {
            gamma3: 2.0,
            gamma4: 6.0,
        };
        assert_relative_eq!(
            edgeworth_cdf(&skew, 100, 1.0),
            0.841_748_030_609_408_19,
            max_relative = 1e-14
        );
    }

    #[test]
    fn cumulants_of_zoo() {
        let c = CumulantSet::of(&builtin("std_exponential").unwrap());
        assert_eq!(c.gamma3, 2.0);
        assert_abs_diff_eq!(c.gamma4, 6.0, epsilon = 1e-14);
        let c = CumulantSet::of(&builtin("std_uniform").unwrap());
        assert_abs_diff_eq!(c.gamma4, -1.2, epsilon = 1e-15);
    }

    #[test]
    fn cdf_difference_examples() {
        let exp = builtin("std_exponential").unwrap();
        let cum = CumulantSet::of(&exp);
        let query = q(100, 5.0, 0.5);
        assert_relative_eq!(
            cdf_difference_approx(&cum, &query),
            refined_approx(&exp, &query).total,
            max_relative = 1e-14
        );
        let at_zero = q(37, 0.0, 0.3);
        assert_eq!(
            cdf_difference_approx(&cum, &at_zero),
            stone_approx(&at_zero)
        );
        let sym = CumulantSet {
            gamma3: 0.0,
            gamma4: 1.0,
        };
        assert_relative_eq!(
            cdf_difference_approx(&sym, &q(25, 5.0, 0.2)),
            0.2 * normal_density(1.0) / 5.0 * 0.98,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            cdf_difference_approx(&sym, &q(25, 5.0, 0.2)),
            0.009_485_252_401_150_419_3,
            max_relative = 1e-14
        );
    }

    #[test]
    fn edgeworth_difference_tracks_cdf_difference() {
        // The differenced CDF expansion and its linearization agree to o(1/n).
        // The dropped terms are O(n^{-3/2}).
        let cum = CumulantSet {
            gamma3: 2.0,
            gamma4: 6.0,
        };
        for n in [100u64, 10_000] {
            let rn = (n as f64).sqrt();
            for v in [-2.0, -0.5, 0.7, 1.9] {
                let query = q(n, v * rn, 0.5);
                let diff = edgeworth_cdf(&cum, n, v + 0.5 / rn) - edgeworth_cdf(&cum, n, v);
                let lin = cdf_difference_approx(&cum, &query);
                assert!(
                    (diff - lin).abs() < (n as f64).powf(-1.5),
                    "{n} {v}: {diff} vs {lin}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn total_is_sum_of_terms(mu3 in -3.0..3.0f64, n in 1u64..5000, v in -6.0..6.0f64, d in 0.01..2.0f64) {
            let query = q(n, v * (n as f64).sqrt(), d);
            let b = refined_with_mu3(mu3, &query);
            let sum = b.stone_term + b.skew_term + b.delta_term;
            prop_assert!((b.total - sum).abs() <= 1e-14 * b.total.abs().max(f64::MIN_POSITIVE));
            prop_assert!(b.stone_term >= 0.0);
        }

        #[test]
        fn x_form_equals_v_form(mu3 in -3.0..3.0f64, n in 1u64..5000, x in -50.0..50.0f64, d in 0.01..2.0f64) {
            // the x/n form: n^{-1/2} φ(x/√n)(1 + μ₃x(x²/n − 3)/(6n) − Δx/(2n)) times Δ
            let nf = n as f64;
            let query = q(n, x, d);
            let b = refined_with_mu3(mu3, &query);
            let xform = d / nf.sqrt() * normal_density(x / nf.sqrt())
                * (1.0 + mu3 * x / (6.0 * nf) * (x * x / nf - 3.0) - d * x / (2.0 * nf));
            let scale = b.stone_term * (1.0 + (mu3 * b.v.powi(3)).abs() + d * b.v.abs());
            prop_assert!((b.total - xform).abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
        }
    }
}
