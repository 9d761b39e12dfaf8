//! Closed forms for a group of identical members under uniform contagion `q`.
//!
//! With `c1 = P(η_1 <= T)`, `c2 = 1 - c1` and `c3 = 1 - q`, the probability
//! that all `n` members default is
//!
//! ```text
//! S_n = Σ_{k=1..n} C(n,k) c1^k c2^(n-k) (1 - c3^k)^(n-k)
//! ```
//!
//! and the group survives with probability `P(η_0 > T) · (1 - S_n)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Probability;
use crate::scalar::{one_minus_pow_complement, xlogy, Scalar};

/// Largest group size accepted by [`HomogeneousSpec`] and the curve helpers.
pub const N_MAX_HOMOGENEOUS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSpec<T> {
    pub leader_survival: Probability<T>,
    pub c1: Probability<T>,
    pub q: Probability<T>,
    pub n: usize,
}

impl<T: Scalar> HomogeneousSpec<T> {
    pub fn new(leader_survival: T, c1: T, q: T, n: usize) -> Result<Self> {
        let spec = Self {
            leader_survival: Probability::new(leader_survival)
                .map_err(|_| field_error("leader_survival", leader_survival))?,
            c1: Probability::new(c1).map_err(|_| field_error("c1", c1))?,
            q: Probability::new(q).map_err(|_| field_error("q", q))?,
            n,
        };
        check_size(n)?;
        Ok(spec)
    }
}

fn field_error<T: Scalar>(field: &'static str, value: T) -> Error {
    Error::ProbabilityOutOfRange {
        field,
        index: 0,
        value: value.to_f64().unwrap_or(f64::NAN),
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::EmptyGroup)
    } else if n > N_MAX_HOMOGENEOUS {
        Err(Error::SizeCapExceeded {
            n,
            cap: N_MAX_HOMOGENEOUS,
        })
    } else {
        Ok(())
    }
}

/// `C(n, 0..=n)` by the recursion `C(n,k+1) = C(n,k)·(n-k)/(k+1)`.
pub fn binomial_row<T: Scalar>(n: usize) -> Vec<T> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c = T::one();
    row.push(c);
    for k in 0..n {
        c = c * T::count(n - k) / T::count(k + 1);
        row.push(c);
    }
    row
}

/// Binomial(n, c1) probability masses, `pmf[k] = C(n,k) c1^k c2^(n-k)`.
///
/// Coefficients come from [`binomial_row`] while it stays finite; past that
/// the same recursion is carried in log space.
fn binomial_pmf<T: Scalar>(c1: T, n: usize) -> Vec<T> {
    let ln_c1 = c1.ln();
    let ln_c2 = (-c1).ln_1p();
    let weight = |k: usize| xlogy(T::count(k), ln_c1) + xlogy(T::count(n - k), ln_c2);

    let row = binomial_row::<T>(n);
    if row.iter().all(|c| c.is_finite()) {
        return row
            .iter()
            .enumerate()
            .map(|(k, &c)| c * weight(k).exp())
            .collect();
    }
    let mut ln_c = T::zero();
    let mut pmf = Vec::with_capacity(n + 1);
    for k in 0..=n {
        pmf.push((ln_c + weight(k)).exp());
        if k < n {
            ln_c = ln_c + (T::count(n - k) / T::count(k + 1)).ln();
        }
    }
    pmf
}

/// `S_n`, the probability that all `n` members default. `O(n)`.
pub fn s_n<T: Scalar>(c1: T, q: T, n: usize) -> T {
    debug_assert!(n >= 1);
    let c3 = T::one() - q;
    binomial_pmf(c1, n)
        .into_iter()
        .enumerate()
        .skip(1)
        .map(|(k, b)| {
            let left = T::count(n - k);
            b * xlogy(left, (-c3.powi(k as i32)).ln_1p()).exp()
        })
        .sum()
}

/// `1 - S_n`, summed from nonnegative terms so it stays accurate when `S_n`
/// is close to 1:
///
/// `1 - S_n = c2^n + Σ_{k=1..n} C(n,k) c1^k c2^(n-k) [1 - (1 - c3^k)^(n-k)]`.
pub fn complement_s_n<T: Scalar>(c1: T, q: T, n: usize) -> T {
    debug_assert!(n >= 1);
    let c3 = T::one() - q;
    let pmf = binomial_pmf(c1, n);
    let tail: T = pmf
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &b)| b * one_minus_pow_complement(c3.powi(k as i32), T::count(n - k)))
        .sum();
    pmf[0] + tail
}

/// `P(η_0 > T) · (1 - S_n)`.
pub fn survival<T: Scalar>(spec: &HomogeneousSpec<T>) -> T {
    spec.leader_survival.value() * complement_s_n(spec.c1.value(), spec.q.value(), spec.n)
}

/// Survival probabilities for `n = 1..=n_max`.
pub fn survival_curve<T: Scalar>(leader_survival: T, c1: T, q: T, n_max: usize) -> Result<Vec<T>> {
    check_size(n_max)?;
    HomogeneousSpec::new(leader_survival, c1, q, 1)?;
    Ok(unchecked_curve(leader_survival, c1, q, n_max))
}

pub(crate) fn unchecked_curve<T: Scalar>(leader_survival: T, c1: T, q: T, n_max: usize) -> Vec<T> {
    (1..=n_max)
        .into_par_iter()
        .map(|n| leader_survival * complement_s_n(c1, q, n))
        .collect()
}

/// `q = 0`: members fail independently, `P(η_0 > T) · (1 - c1^n)`.
pub fn survival_no_contagion<T: Scalar>(leader_survival: T, c1: T, n: usize) -> T {
    leader_survival * (T::one() - c1.powi(n as i32))
}

/// `q = 1`: any default takes down the group, `P(η_0 > T) · c2^n`.
pub fn survival_full_contagion<T: Scalar>(leader_survival: T, c2: T, n: usize) -> T {
    leader_survival * c2.powi(n as i32)
}

/// Large-`n` estimate of `S_n` with the binomial count replaced by its mean:
/// `T_n = (1 - c3^(n c1))^(n - n c1)`.
pub fn t_n_approx<T: Scalar>(c1: T, q: T, n: usize) -> T {
    let c3 = T::one() - q;
    let nf = T::count(n);
    let mean = nf * c1;
    xlogy(nf - mean, (-c3.powf(mean)).ln_1p()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn s1_is_c1() {
        for q in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert_abs_diff_eq!(s_n(0.7, q, 1), 0.7, epsilon = 1e-15);
            assert_abs_diff_eq!(1.0 - complement_s_n(0.7, q, 1), 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn s2_at_half_contagion() {
        // c3 = 1/2 makes S_2 = S_1.
        assert_abs_diff_eq!(s_n(0.7, 0.5, 2), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn s3_example() {
        assert_abs_diff_eq!(s_n(0.6, 0.3, 3), 0.46224, epsilon = 1e-15);
        assert_abs_diff_eq!(complement_s_n(0.6, 0.3, 3), 1.0 - 0.46224, epsilon = 1e-15);
    }

    #[test]
    fn survival_examples() {
        let spec = HomogeneousSpec::new(0.5, 0.7, 0.42, 1).unwrap();
        assert_abs_diff_eq!(survival(&spec), 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(survival_no_contagion(1.0, 0.7, 3), 0.657, epsilon = 1e-15);
        assert_abs_diff_eq!(survival_no_contagion(0.5, 0.7, 1), 0.15, epsilon = 1e-15);
        assert_eq!(survival_no_contagion(1.0, 1.0, 9), 0.0);
        assert_abs_diff_eq!(survival_full_contagion(0.5, 0.3, 2), 0.045, epsilon = 1e-15);
        assert_eq!(survival_full_contagion(1.0, 1.0, 7), 1.0);
    }

    #[test]
    fn strong_contagion_outweighs_individual_quality() {
        // Weak contagion with poor members (c2 = 0.2) versus strong contagion
        // with good members (c2' = 0.9), n = 5.
        let weak = s_n(0.8, 0.0, 5);
        let strong = s_n(0.1, 1.0, 5);
        assert_abs_diff_eq!(weak, 0.32768, epsilon = 1e-15);
        assert_abs_diff_eq!(strong, 0.40951, epsilon = 1e-15);
        assert!(weak < strong);
    }

    #[test]
    fn spec_bounds() {
        assert_eq!(
            HomogeneousSpec::new(0.5, 0.7, 0.1, 0).unwrap_err(),
            Error::EmptyGroup
        );
        assert!(matches!(
            HomogeneousSpec::new(0.5, 0.7, 0.1, N_MAX_HOMOGENEOUS + 1),
            Err(Error::SizeCapExceeded { .. })
        ));
        assert!(HomogeneousSpec::new(0.5, 1.2, 0.1, 3).is_err());
    }

    #[test]
    fn binomial_row_small() {
        assert_eq!(binomial_row::<f64>(4), vec![1.0, 4.0, 6.0, 4.0, 1.0]);
    }

    #[test]
    fn binomial_row_matches_exact_integers() {
        for n in 0..=60u32 {
            let row = binomial_row::<f64>(n as usize);
            let mut exact: u128 = 1;
            for k in 0..=n {
                if k > 0 {
                    exact = exact * u128::from(n - k + 1) / u128::from(k);
                }
                let expected = exact as f64;
                if n <= 50 {
                    assert_eq!(row[k as usize], expected, "C({n},{k})");
                } else {
                    assert!((row[k as usize] - expected).abs() <= 1e-15 * expected);
                }
            }
        }
    }

    #[test]
    fn large_n_switches_to_log_space() {
        // C(2000, k) overflows f64; both routes must still sum to one.
        let n = 2000;
        let pmf = binomial_pmf(0.3_f64, n);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        let c = complement_s_n(0.3, 0.05, n);
        assert!(c > 0.0 && c < 1e-6);
        assert!((s_n(0.3_f64, 0.05, n) + c - 1.0).abs() < 1e-10);
    }

    #[test]
    fn t_n_limits() {
        assert!(t_n_approx(0.5, 0.5, 100) > 0.99);
        let peak = (1..=100)
            .max_by(|&a, &b| {
                (1.0 - t_n_approx(0.05_f64, 0.85, a)).total_cmp(&(1.0 - t_n_approx(0.05, 0.85, b)))
            })
            .unwrap();
        assert_eq!(peak, 7);
    }

    #[test]
    fn approximation_gap_is_large_for_weak_members() {
        let gap = (1..=100)
            .map(|n| (t_n_approx(0.05_f64, 0.85, n) - s_n(0.05, 0.85, n)).abs())
            .fold(0.0_f64, f64::max);
        assert!(gap > 0.1, "gap {gap}");
    }

    #[test]
    fn curve_rises_then_decays() {
        let curve = survival_curve(0.5_f64, 0.7, 0.05, 60).unwrap();
        let argmax = curve
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(argmax > 0 && argmax < 59);
        assert!(curve[1] > curve[0]);
        assert!(curve[59] < curve[argmax]);
    }

    #[test]
    fn argmax_is_one_for_strong_contagion_rare_default() {
        let curve = survival_curve(1.0_f64, 0.05, 0.85, 100).unwrap();
        let best = curve.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(curve[0], best);
    }

    #[test]
    fn f32_instance() {
        let a = s_n(0.6_f32, 0.3, 3);
        assert!((a - 0.46224).abs() < 1e-6);
        let big = complement_s_n(0.3_f32, 0.05, 400);
        assert!(big.is_finite());
    }
}
