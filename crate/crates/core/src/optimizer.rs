//! Upper bounds on the optimal size of a homogeneous group and the finite
//! linear search they make possible.
//!
//! For interior `c1` and `q`, `1 - S_n <= 3·a^n` once `n` exceeds a threshold
//! `N`, so survival eventually drops below the one-member value. That gives a
//! hard bound on the optimizer. A second, often tighter, bound only promises a
//! size within `δ` of the optimum. The search scans every size up to the
//! smaller of the two.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homogeneous::unchecked_curve;
use crate::lambert::lambert_w_minus1;
use crate::scalar::Scalar;

/// Largest search range [`search_optimal_size`] will scan.
pub const SEARCH_LIMIT_GUARD: u64 = 10_000_000;

/// Thresholds are integers kept exactly in `f64`.
const MAX_EXACT_THRESHOLD: f64 = 9_007_199_254_740_992.0;

/// Decay rate and threshold of the tail bound `1 - S_n <= 3·a^n` for `n > N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound<T> {
    /// `max(exp(-c1²/2), c3^(c1/3))`.
    pub a: T,
    /// `(c1/6)·ln(1/c3)`; `n > N` guarantees `ln(n)/n < alpha`.
    pub alpha: T,
    /// `N`.
    pub threshold: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub a: T,
    #[serde(rename = "N")]
    pub threshold: u64,
    pub prop2_bound: T,
    pub b: T,
    pub prop3_bound: u64,
    pub n_star: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeSearchResult<T> {
    pub best_n: usize,
    pub best_survival: T,
    /// `U = min(ceil(optimal-size bound), δ-suboptimal bound)`.
    pub search_limit: usize,
    /// `(n, survival)` for `n = 1..=U`.
    pub curve: Vec<(usize, T)>,
    pub delta: T,
}

fn check_interior<T: Scalar>(c1: T, q: T) -> Result<()> {
    let inside = |v: T| v > T::zero() && v < T::one();
    if inside(c1) && inside(q) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "c1 and q must lie strictly inside (0, 1), got c1 = {c1}, q = {q}"
        )))
    }
}

fn check_delta<T: Scalar>(delta: T) -> Result<()> {
    if delta > T::zero() && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "delta must be positive, got {delta}"
        )))
    }
}

/// `(a, N)` for the tail bound.
///
/// `N` is the larger root of `ln x = alpha·x`, i.e. `-W_{-1}(-alpha)/alpha`,
/// rounded up. When `alpha > 1/e` there is no root and `N = 1`.
pub fn theorem2_constants<T: Scalar>(c1: T, q: T) -> Result<TailBound<T>> {
    check_interior(c1, q)?;
    let c3 = T::one() - q;
    let a = (-c1 * c1 / T::lit(2.0))
        .exp()
        .max(c3.powf(c1 / T::lit(3.0)));
    let alpha = -(c1 / T::lit(6.0)) * c3.ln();

    let threshold = if alpha > T::one() / T::E() {
        1
    } else {
        let root = -lambert_w_minus1(-alpha)? / alpha;
        let n = root.ceil().to_f64().unwrap_or(f64::INFINITY);
        if !(n <= MAX_EXACT_THRESHOLD) {
            return Err(Error::Domain(format!(
                "tail-bound threshold {n} is not representable for c1 = {c1}, q = {q}"
            )));
        }
        (n as u64).max(1)
    };
    Ok(TailBound {
        a,
        alpha,
        threshold,
    })
}

/// `max(N, ln((1 - c1)/3) / ln a)`: no size above this beats a single member.
pub fn prop2_upper_bound<T: Scalar>(c1: T, q: T) -> Result<T> {
    let tail = theorem2_constants(c1, q)?;
    let crossing = ((T::one() - c1) / T::lit(3.0)).ln() / tail.a.ln();
    Ok(T::from_u64(tail.threshold).unwrap().max(crossing))
}

/// `b = max(exp(-c1²/2), c3^(c1/2))`.
pub fn suboptimal_rate<T: Scalar>(c1: T, q: T) -> Result<T> {
    check_interior(c1, q)?;
    let c3 = T::one() - q;
    Ok((-c1 * c1 / T::lit(2.0))
        .exp()
        .max(c3.powf(c1 / T::lit(2.0))))
}

/// `U = ceil(log_b(δ(1 - b)/2))`, at least 1: some size `n <= U` is within
/// `δ·P(η_0 > T)` of the optimum.
pub fn prop3_suboptimal_bound<T: Scalar>(c1: T, q: T, delta: T) -> Result<u64> {
    check_delta(delta)?;
    let b = suboptimal_rate(c1, q)?;
    let target = delta * (T::one() - b) / T::lit(2.0);
    let u = (target.ln() / b.ln())
        .ceil()
        .to_f64()
        .unwrap_or(f64::INFINITY);
    if !(u <= MAX_EXACT_THRESHOLD) {
        return Err(Error::Domain(format!(
            "suboptimal bound {u} is not representable for c1 = {c1}, q = {q}"
        )));
    }
    Ok(if u < 1.0 { 1 } else { u as u64 })
}

/// Minimizer of the mean-field estimate `T_n`: `ln(1/2) / (c1·ln c3)`.
pub fn approx_optimizer_n_star<T: Scalar>(c1: T, q: T) -> Result<T> {
    check_interior(c1, q)?;
    Ok(T::LN_2() / -(c1 * (T::one() - q).ln()))
}

pub fn bound_report<T: Scalar>(c1: T, q: T, delta: T) -> Result<BoundReport<T>> {
    let tail = theorem2_constants(c1, q)?;
    Ok(BoundReport {
        a: tail.a,
        threshold: tail.threshold,
        prop2_bound: prop2_upper_bound(c1, q)?,
        b: suboptimal_rate(c1, q)?,
        prop3_bound: prop3_suboptimal_bound(c1, q, delta)?,
        n_star: approx_optimizer_n_star(c1, q)?,
    })
}

/// Scans `n = 1..=U` and keeps the smallest size with the highest survival.
///
/// The answer is within `δ·leader_survival` of the supremum over all sizes,
/// and exactly optimal whenever the optimal-size bound is the smaller one.
/// Costs `O(U²)`.
pub fn search_optimal_size<T: Scalar>(
    leader_survival: T,
    c1: T,
    q: T,
    delta: T,
) -> Result<SizeSearchResult<T>> {
    if !(leader_survival >= T::zero() && leader_survival <= T::one()) {
        return Err(Error::ProbabilityOutOfRange {
            field: "leader_survival",
            index: 0,
            value: leader_survival.to_f64().unwrap_or(f64::NAN),
        });
    }
    check_delta(delta)?;
    let optimal = prop2_upper_bound(c1, q)?.ceil();
    let suboptimal = prop3_suboptimal_bound(c1, q, delta)?;
    let limit = optimal
        .to_f64()
        .unwrap_or(f64::INFINITY)
        .min(suboptimal as f64)
        .max(1.0);
    if limit > SEARCH_LIMIT_GUARD as f64 {
        return Err(Error::SearchLimitOverflow {
            limit,
            guard: SEARCH_LIMIT_GUARD,
        });
    }
    let limit = limit as usize;

    let values = unchecked_curve(leader_survival, c1, q, limit);
    let mut best_n = 1;
    let mut best_survival = values[0];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best_survival {
            best_n = i + 1;
            best_survival = v;
        }
    }
    Ok(SizeSearchResult {
        best_n,
        best_survival,
        search_limit: limit,
        curve: values
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i + 1, v))
            .collect(),
        delta,
    })
}
