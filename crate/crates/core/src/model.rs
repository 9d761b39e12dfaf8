//! Exact survival probabilities for heterogeneous groups.
//!
//! A group has a leader and `n` regular members. Member `i` defaults naturally
//! by the horizon with probability `member_default[i]`; a natural defaulter `i`
//! brings down a surviving member `j` with probability `contagion[i][j]`.
//! Victims of contagion never infect anyone else. The group fails when the
//! leader defaults or when every regular member ends up defaulted.
//!
//! The probability that every member defaults is the sum, over every nonempty
//! natural-default set `I`, of the probability of the event "exactly `I`
//! defaults naturally and the rest are all brought down". These events are
//! disjoint, so the evaluators below enumerate subsets as bitmasks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest group enumerated by the constant-contagion evaluator (`2^n` subsets).
pub const N_MAX_CONSTANT: usize = 22;

/// Largest group enumerated by the delayed-contagion evaluator (`3^n` terms).
pub const N_MAX_DELAYED: usize = 14;

/// Masks per work unit in the parallel enumeration. Fixed so the reduction
/// order never depends on the thread count.
const CONSTANT_BLOCK: u64 = 1 << 12;
const DELAYED_BLOCK: u64 = 1 << 8;

/// A value known to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability<T>(T);

impl<T: Scalar> Probability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(Error::ProbabilityOutOfRange {
                field: "probability",
                index: 0,
                value: value.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `1 - p`.
    #[inline]
    pub fn complement(self) -> Self {
        Self(T::one() - self.0)
    }

    /// Strictly inside `(0, 1)`.
    #[inline]
    pub fn is_interior(self) -> bool {
        self.0 > T::zero() && self.0 < T::one()
    }
}

/// Square matrix of pairwise contagion probabilities, row = source, column = target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionMatrix<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> ContagionMatrix<T> {
    /// All-zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![T::zero(); n * n],
        }
    }

    /// `q` everywhere off the diagonal.
    pub fn uniform(n: usize, q: T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m.entries[i * n + j] = q;
                }
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "contagion row",
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Ok(Self { n, entries })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, source: usize, target: usize) -> T {
        self.entries[source * self.n + target]
    }

    #[inline]
    pub fn set(&mut self, source: usize, target: usize, q: T) {
        self.entries[source * self.n + target] = q;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.entries.chunks(self.n.max(1))
    }

    pub(crate) fn map<U>(&self, f: impl Fn(T) -> U) -> ContagionMatrix<U> {
        ContagionMatrix {
            n: self.n,
            entries: self.entries.iter().map(|&q| f(q)).collect(),
        }
    }

    /// Checks entries lie in `[0, 1]` and the diagonal is zero.
    pub fn validate(&self) -> Result<()> {
        for (idx, &q) in self.entries.iter().enumerate() {
            if !(q >= T::zero() && q <= T::one()) {
                return Err(Error::ProbabilityOutOfRange {
                    field: "contagion",
                    index: idx,
                    value: q.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        for i in 0..self.n {
            let d = self.get(i, i);
            if d != T::zero() {
                return Err(Error::NonzeroDiagonal {
                    index: i,
                    value: d.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }
}

/// Index set `I ⊆ {0..n}`; bit `i` set means member `i` is in the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetMask(u64);

impl SubsetMask {
    /// Fails when a bit at or above position `n` is set.
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::Contract("subset masks address at most 64 members"));
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::Contract("subset mask has bits above the group size"));
        }
        Ok(Self(bits))
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= 64, "subset masks address at most 64 members");
        Self(full_bits(n))
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Self(indices.iter().fold(0u64, |acc, &i| acc | (1 << i)))
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }
}

#[inline]
fn full_bits(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Heterogeneous group, parameterized by marginal default probabilities at the
/// horizon `T` (and at `T - Δ` for delayed contagion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec<T> {
    /// `P(η_0 > T)`.
    pub leader_survival: T,
    /// `P(η_i <= T)` per member.
    pub member_default: Vec<T>,
    pub contagion: ContagionMatrix<T>,
    /// `P(η_i <= T - Δ)` per member; only read by the delayed evaluator.
    pub early_default: Option<Vec<T>>,
}

impl<T: Scalar> GroupSpec<T> {
    pub fn new(leader_survival: T, member_default: Vec<T>, contagion: ContagionMatrix<T>) -> Self {
        Self {
            leader_survival,
            member_default,
            contagion,
            early_default: None,
        }
    }

    /// Identical members with uniform contagion `q`.
    pub fn homogeneous(leader_survival: T, c1: T, q: T, n: usize) -> Self {
        Self::new(leader_survival, vec![c1; n], ContagionMatrix::uniform(n, q))
    }

    pub fn with_early_default(mut self, early_default: Vec<T>) -> Self {
        self.early_default = Some(early_default);
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.member_default.len()
    }

    /// Reports the first violated invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::EmptyGroup);
        }
        check_probability("leader_survival", 0, self.leader_survival)?;
        for (i, &c) in self.member_default.iter().enumerate() {
            check_probability("member_default", i, c)?;
        }
        if self.contagion.dim() != n {
            return Err(Error::DimensionMismatch {
                what: "contagion",
                expected: n,
                found: self.contagion.dim(),
            });
        }
        self.contagion.validate()?;
        if let Some(early) = &self.early_default {
            if early.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "early_default",
                    expected: n,
                    found: early.len(),
                });
            }
            for (i, (&e, &c)) in early.iter().zip(&self.member_default).enumerate() {
                check_probability("early_default", i, e)?;
                if e > c {
                    return Err(Error::EarlyExceedsLate {
                        index: i,
                        early: e.to_f64().unwrap_or(f64::NAN),
                        late: c.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }

    fn mask(&self, bits: SubsetMask) -> Result<u64> {
        SubsetMask::new(bits.bits(), self.n()).map(SubsetMask::bits)
    }
}

fn check_probability<T: Scalar>(field: &'static str, index: usize, value: T) -> Result<()> {
    if value >= T::zero() && value <= T::one() {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange {
            field,
            index,
            value: value.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// All-default probability split by the size `|I|` of the natural-default set.
#[derive(Debug, Clone, PartialEq)]
pub struct AllDefaultBreakdown<T> {
    /// `by_size[k - 1]` sums the terms with `|I| = k`.
    pub by_size: Vec<T>,
    pub total: T,
}

/// Precomputed per-spec tables shared by the enumeration loops.
struct Tables<T> {
    n: usize,
    default: Vec<T>,
    survive: Vec<T>,
    /// `log1p(-q_ij)`, `-inf` where `q_ij = 1`.
    log_keep: ContagionMatrix<T>,
}

impl<T: Scalar> Tables<T> {
    fn new(spec: &GroupSpec<T>) -> Self {
        Self {
            n: spec.n(),
            default: spec.member_default.clone(),
            survive: spec.member_default.iter().map(|&c| T::one() - c).collect(),
            log_keep: spec.contagion.map(|q| (-q).ln_1p()),
        }
    }

    /// `∏_{j ∉ sources ∪ defaulted} P(η_j > T) · [1 - ∏_{i ∈ sources} (1 - q_ij)]`.
    ///
    /// `defaulted` is the natural-default set; `sources` ⊆ `defaulted` are the
    /// members able to infect. The bracket is `-expm1(Σ log1p(-q_ij))`; any
    /// `q_ij = 1` makes the sum `-inf` and the bracket exactly 1.
    #[inline]
    fn contagion_factor(&self, defaulted: u64, sources: u64) -> T {
        let mut gamma = T::one();
        for j in 0..self.n {
            if defaulted >> j & 1 == 1 {
                continue;
            }
            let mut log_escape = T::zero();
            let mut rest = sources;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                log_escape = log_escape + self.log_keep.get(i, j);
            }
            gamma = gamma * self.survive[j] * -log_escape.exp_m1();
            if gamma == T::zero() {
                break;
            }
        }
        gamma
    }

    #[inline]
    fn product_over(&self, values: &[T], mask: u64) -> T {
        let mut p = T::one();
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            p = p * values[i];
        }
        p
    }

    #[inline]
    fn constant_term(&self, mask: u64) -> T {
        let beta = self.product_over(&self.default, mask);
        if beta == T::zero() {
            return T::zero();
        }
        beta * self.contagion_factor(mask, mask)
    }

    /// `β_{I'} · γ_{I,I'} · τ_{I,I'}` with `window[i] = P(T - Δ < η_i <= T)`.
    #[inline]
    fn delayed_term(&self, early: &[T], window: &[T], set: u64, early_set: u64) -> T {
        let beta = self.product_over(early, early_set);
        if beta == T::zero() {
            return T::zero();
        }
        let gamma = self.product_over(window, set & !early_set);
        if gamma == T::zero() {
            return T::zero();
        }
        beta * gamma * self.contagion_factor(set, early_set)
    }
}

/// `P(A_I) = β_I γ_I` for constant contagion: exactly `I` defaults naturally
/// and everyone else is brought down.
pub fn prob_a_i_constant<T: Scalar>(spec: &GroupSpec<T>, set: SubsetMask) -> Result<T> {
    let bits = spec.mask(set)?;
    if bits == 0 {
        return Err(Error::Contract("natural-default set must be nonempty"));
    }
    Ok(Tables::new(spec).constant_term(bits))
}

/// One term of the delayed-contagion triple sum: `I` defaults naturally by `T`,
/// of which exactly `I'` default by `T - Δ`, and all of `I^c` is brought down
/// by members of `I'`.
pub fn prob_term_delayed<T: Scalar>(
    spec: &GroupSpec<T>,
    set: SubsetMask,
    early_set: SubsetMask,
) -> Result<T> {
    let bits = spec.mask(set)?;
    let early_bits = spec.mask(early_set)?;
    if bits == 0 || early_bits == 0 {
        return Err(Error::Contract("natural-default sets must be nonempty"));
    }
    if early_bits & !bits != 0 {
        return Err(Error::Contract(
            "early-default set must be a subset of the default set",
        ));
    }
    let early = spec
        .early_default
        .as_ref()
        .ok_or(Error::MissingEarlyDefault)?;
    let window = window_probabilities(&spec.member_default, early);
    Ok(Tables::new(spec).delayed_term(early, &window, bits, early_bits))
}

fn window_probabilities<T: Scalar>(late: &[T], early: &[T]) -> Vec<T> {
    late.iter().zip(early).map(|(&c, &e)| c - e).collect()
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::SizeCapExceeded { n, cap })
    } else {
        Ok(())
    }
}

/// Sums `per_mask(I)` over nonempty masks of an `n`-member group, bucketed by `|I|`.
///
/// Masks are cut into fixed blocks, each block is summed in increasing mask
/// order, and block results are added in block order.
fn enumerate<T, F>(n: usize, block: u64, per_mask: F) -> AllDefaultBreakdown<T>
where
    T: Scalar,
    F: Fn(u64) -> T + Sync,
{
    let end = full_bits(n) + 1;
    let blocks = end.div_ceil(block);
    let partials: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut by_size = vec![T::zero(); n];
            let lo = (b * block).max(1);
            let hi = ((b + 1) * block).min(end);
            for mask in lo..hi {
                let term = per_mask(mask);
                let k = mask.count_ones() as usize;
                by_size[k - 1] = by_size[k - 1] + term;
            }
            by_size
        })
        .collect();

    let mut by_size = vec![T::zero(); n];
    let mut total = T::zero();
    for partial in &partials {
        for (acc, &v) in by_size.iter_mut().zip(partial) {
            *acc = *acc + v;
        }
        total = total + partial.iter().copied().sum::<T>();
    }
    AllDefaultBreakdown { by_size, total }
}

/// Probability that every regular member defaults under constant contagion,
/// with per-`|I|` subtotals.
pub fn all_default_breakdown_constant<T: Scalar>(
    spec: &GroupSpec<T>,
) -> Result<AllDefaultBreakdown<T>> {
    spec.validate()?;
    check_cap(spec.n(), N_MAX_CONSTANT)?;
    let tables = Tables::new(spec);
    Ok(enumerate(spec.n(), CONSTANT_BLOCK, |mask| {
        tables.constant_term(mask)
    }))
}

pub fn all_default_probability_constant<T: Scalar>(spec: &GroupSpec<T>) -> Result<T> {
    all_default_breakdown_constant(spec).map(|b| b.total)
}

/// `P(η_0 > T) · (1 - Σ_I β_I γ_I)`.
pub fn survival_constant<T: Scalar>(spec: &GroupSpec<T>) -> Result<T> {
    Ok(spec.leader_survival * (T::one() - all_default_probability_constant(spec)?))
}

/// Delayed-contagion analogue of [`all_default_breakdown_constant`]; work is
/// `Θ(3^n)` terms, with `I'` walked by submask iteration.
///
/// Sums over every `I' ⊆ I`, including `I' = ∅`; that term is
/// `∏ P(T - Δ < η_i <= T)` for the full group and zero otherwise.
pub fn all_default_breakdown_delayed<T: Scalar>(
    spec: &GroupSpec<T>,
) -> Result<AllDefaultBreakdown<T>> {
    spec.validate()?;
    let early = spec
        .early_default
        .as_ref()
        .ok_or(Error::MissingEarlyDefault)?;
    check_cap(spec.n(), N_MAX_DELAYED)?;
    let tables = Tables::new(spec);
    let window = window_probabilities(&spec.member_default, early);
    Ok(enumerate(spec.n(), DELAYED_BLOCK, |set| {
        let mut acc = T::zero();
        let mut sub = set;
        while sub != 0 {
            acc = acc + tables.delayed_term(early, &window, set, sub);
            sub = (sub - 1) & set;
        }
        // I' = ∅ only survives when I is everyone: all members default
        // naturally, none early enough to infect. For smaller I the empty
        // bracket makes the term zero.
        acc + tables.delayed_term(early, &window, set, 0)
    }))
}

pub fn all_default_probability_delayed<T: Scalar>(spec: &GroupSpec<T>) -> Result<T> {
    all_default_breakdown_delayed(spec).map(|b| b.total)
}

/// Survival when contagion only fires from members defaulting by `T - Δ`.
pub fn survival_delayed<T: Scalar>(spec: &GroupSpec<T>) -> Result<T> {
    Ok(spec.leader_survival * (T::one() - all_default_probability_delayed(spec)?))
}
