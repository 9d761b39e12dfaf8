//! Monte Carlo simulation of the full contagion model.
//!
//! Each trial draws independent natural default times for the leader and the
//! members. Every member defaulting naturally by the horizon then gets one
//! independent Bernoulli draw `Y_ij ~ q_ij(η_i)` against each member still
//! standing; any success marks `j` as a contagion victim. Victims do not infect
//! further, so one pass resolves the trial.
//!
//! Trial `k` draws from ChaCha stream `k` under the run seed, so a trial's
//! outcome depends only on `(seed, k)` and the estimate does not depend on how
//! trials are spread across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContagionMatrix, GroupSpec};

const TRIAL_CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Step,
    Linear,
}

/// Law of a natural default time. `f64::INFINITY` stands for "never defaults".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DefaultTimeDistribution {
    Exponential {
        rate: f64,
    },
    /// Defaults with probability `p_default`, at a time uniform on `[0, T]`.
    PointMassMixture {
        p_default: f64,
    },
    /// CDF through `(t, F(t))` knots; zero before the first knot, flat after
    /// the last, with the remaining mass at infinity.
    UserCdf {
        knots: Vec<(f64, f64)>,
        interpolation: Interpolation,
    },
}

impl DefaultTimeDistribution {
    /// Exponential law with `P(η <= horizon) = default_prob`.
    pub fn exponential_calibrated(default_prob: f64, horizon: f64) -> Self {
        Self::Exponential {
            rate: -(-default_prob).ln_1p() / horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } => {
                if !(*rate >= 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "exponential rate must be nonnegative, got {rate}"
                    )));
                }
            }
            Self::PointMassMixture { p_default } => {
                if !(0.0..=1.0).contains(p_default) {
                    return Err(Error::InvalidDistribution(format!(
                        "default probability {p_default} outside [0, 1]"
                    )));
                }
            }
            Self::UserCdf { knots, .. } => {
                if knots.is_empty() {
                    return Err(Error::InvalidDistribution("CDF table is empty".into()));
                }
                let mut prev: Option<(f64, f64)> = None;
                for (k, &(t, f)) in knots.iter().enumerate() {
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(Error::InvalidDistribution(format!(
                            "knot {k}: time {t} must be finite and nonnegative"
                        )));
                    }
                    if !(0.0..=1.0).contains(&f) {
                        return Err(Error::InvalidDistribution(format!(
                            "knot {k}: F = {f} outside [0, 1]"
                        )));
                    }
                    if let Some((pt, pf)) = prev {
                        if t <= pt {
                            return Err(Error::InvalidDistribution(format!(
                                "knot {k}: times must be strictly increasing"
                            )));
                        }
                        if f < pf {
                            return Err(Error::InvalidDistribution(format!(
                                "knot {k}: CDF decreases from {pf} to {f}"
                            )));
                        }
                    }
                    prev = Some((t, f));
                }
            }
        }
        Ok(())
    }

    /// `P(η <= t)`.
    pub fn cdf(&self, t: f64, horizon: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => {
                if rate.is_infinite() {
                    1.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Self::PointMassMixture { p_default } => p_default * (t / horizon).min(1.0),
            Self::UserCdf {
                knots,
                interpolation,
            } => {
                let after = knots.partition_point(|&(kt, _)| kt <= t);
                if after == 0 {
                    return 0.0;
                }
                let (t0, f0) = knots[after - 1];
                match (interpolation, knots.get(after)) {
                    (Interpolation::Linear, Some(&(t1, f1))) => {
                        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
                    }
                    _ => f0,
                }
            }
        }
    }

    /// Inverse-CDF draw from `u` uniform on `[0, 1)`: `inf { t : F(t) > u }`.
    pub fn sample(&self, u: f64, horizon: f64) -> f64 {
        match self {
            Self::Exponential { rate } => {
                if *rate == 0.0 {
                    f64::INFINITY
                } else {
                    -(-u).ln_1p() / rate
                }
            }
            Self::PointMassMixture { p_default } => {
                if u < *p_default {
                    u / p_default * horizon
                } else {
                    f64::INFINITY
                }
            }
            Self::UserCdf {
                knots,
                interpolation,
            } => {
                let k = knots.partition_point(|&(_, f)| f <= u);
                if k == knots.len() {
                    return f64::INFINITY;
                }
                let (t1, f1) = knots[k];
                match interpolation {
                    Interpolation::Linear if k > 0 => {
                        let (t0, f0) = knots[k - 1];
                        t0 + (u - f0) / (f1 - f0) * (t1 - t0)
                    }
                    _ => t1,
                }
            }
        }
    }
}

/// Time-dependent contagion probabilities `q_ij(t)`, zero after the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContagionSchedule {
    /// `q_ij · 1(t <= T)`.
    Constant { q: ContagionMatrix<f64> },
    /// `q_ij · 1(t <= T - delay)`.
    Delayed { q: ContagionMatrix<f64>, delay: f64 },
    /// `levels[k]` applies on `(breakpoints[k-1], breakpoints[k]]`, zero past
    /// the last breakpoint.
    Piecewise {
        breakpoints: Vec<f64>,
        levels: Vec<ContagionMatrix<f64>>,
    },
}

impl ContagionSchedule {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { q } | Self::Delayed { q, .. } => q.dim(),
            Self::Piecewise { levels, .. } => levels.first().map_or(0, ContagionMatrix::dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { q } => q.validate(),
            Self::Delayed { q, delay } => {
                if !(*delay >= 0.0) {
                    return Err(Error::InvalidSchedule(format!(
                        "delay must be nonnegative, got {delay}"
                    )));
                }
                q.validate()
            }
            Self::Piecewise {
                breakpoints,
                levels,
            } => {
                if levels.is_empty() || levels.len() != breakpoints.len() {
                    return Err(Error::InvalidSchedule(
                        "need one contagion level per breakpoint".into(),
                    ));
                }
                if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidSchedule(
                        "breakpoints must be strictly increasing".into(),
                    ));
                }
                let n = levels[0].dim();
                for level in levels {
                    if level.dim() != n {
                        return Err(Error::InvalidSchedule("levels differ in size".into()));
                    }
                    level.validate()?;
                }
                for (k, pair) in levels.windows(2).enumerate() {
                    for i in 0..n {
                        for j in 0..n {
                            if pair[1].get(i, j) > pair[0].get(i, j) {
                                return Err(Error::InvalidSchedule(format!(
                                    "q[{i}][{j}] increases after breakpoint {k}"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// `q_ij(t)`.
    pub fn q_at(&self, source: usize, target: usize, t: f64, horizon: f64) -> f64 {
        if t > horizon {
            return 0.0;
        }
        match self {
            Self::Constant { q } => q.get(source, target),
            Self::Delayed { q, delay } => {
                if t <= horizon - delay {
                    q.get(source, target)
                } else {
                    0.0
                }
            }
            Self::Piecewise {
                breakpoints,
                levels,
            } => {
                let k = breakpoints.partition_point(|&b| b < t);
                levels.get(k).map_or(0.0, |level| level.get(source, target))
            }
        }
    }
}

/// Family used to turn a target default probability into a default-time law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefaultFamily {
    #[default]
    Exponential,
    PointMassMixture,
}

impl DefaultFamily {
    /// Law with `P(η <= horizon) = default_prob`.
    pub fn calibrate(self, default_prob: f64, horizon: f64) -> DefaultTimeDistribution {
        match self {
            Self::Exponential => {
                DefaultTimeDistribution::exponential_calibrated(default_prob, horizon)
            }
            Self::PointMassMixture => DefaultTimeDistribution::PointMassMixture {
                p_default: default_prob,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub leader: DefaultTimeDistribution,
    pub members: Vec<DefaultTimeDistribution>,
    pub schedule: ContagionSchedule,
    pub horizon: f64,
    pub trials: u64,
    pub seed: u64,
}

impl SimulationSpec {
    /// Simulation whose marginals at the horizon match `spec`.
    ///
    /// Default times are exponential, calibrated to each member's default
    /// probability. With `delay = Some(Δ)` the schedule is delayed; when
    /// `0 < Δ < horizon` and `spec.early_default` is set, member laws become
    /// piecewise-linear CDFs through `(T - Δ, early)` and `(T, late)` so both
    /// marginals match.
    pub fn calibrated(
        spec: &GroupSpec<f64>,
        horizon: f64,
        trials: u64,
        seed: u64,
        delay: Option<f64>,
    ) -> Result<Self> {
        Self::calibrated_with(
            spec,
            DefaultFamily::Exponential,
            horizon,
            trials,
            seed,
            delay,
        )
    }

    /// [`SimulationSpec::calibrated`] with a chosen family for the laws that
    /// only need to match the horizon marginal.
    pub fn calibrated_with(
        spec: &GroupSpec<f64>,
        family: DefaultFamily,
        horizon: f64,
        trials: u64,
        seed: u64,
        delay: Option<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        let leader = family.calibrate(1.0 - spec.leader_survival, horizon);
        let members = match (delay, &spec.early_default) {
            (Some(d), Some(early)) if d > 0.0 && d < horizon => early
                .iter()
                .zip(&spec.member_default)
                .map(|(&e, &c)| DefaultTimeDistribution::UserCdf {
                    knots: vec![(0.0, 0.0), (horizon - d, e), (horizon, c)],
                    interpolation: Interpolation::Linear,
                })
                .collect(),
            _ => spec
                .member_default
                .iter()
                .map(|&c| family.calibrate(c, horizon))
                .collect(),
        };
        let q = spec.contagion.clone();
        let schedule = match delay {
            Some(delay) => ContagionSchedule::Delayed { q, delay },
            None => ContagionSchedule::Constant { q },
        };
        let sim = Self {
            leader,
            members,
            schedule,
            horizon,
            trials,
            seed,
        };
        sim.validate()?;
        Ok(sim)
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.trials == 0 {
            return Err(Error::Domain("at least one trial is required".into()));
        }
        self.leader.validate()?;
        for m in &self.members {
            m.validate()?;
        }
        if self.schedule.dim() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "contagion schedule",
                expected: self.n(),
                found: self.schedule.dim(),
            });
        }
        self.schedule.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialOutcome {
    pub leader_defaulted: bool,
    /// Members with `η_i <= T`, ascending.
    pub natural_defaulters: Vec<usize>,
    /// Members with `η_j > T` brought down by a natural defaulter, ascending.
    pub contagion_victims: Vec<usize>,
    /// `(source, victim)` for the draw that brought each victim down.
    pub infections: Vec<(usize, usize)>,
    pub group_defaulted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub survivors: u64,
    pub trials: u64,
    pub seed: u64,
}

struct Scratch {
    eta: Vec<f64>,
    natural: Vec<usize>,
    victim: Vec<bool>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            eta: vec![0.0; n],
            natural: Vec::with_capacity(n),
            victim: vec![false; n],
        }
    }
}

/// Runs one trial into `scratch`; returns whether the leader defaulted.
fn run_trial(
    spec: &SimulationSpec,
    base: &ChaCha8Rng,
    trial_index: u64,
    scratch: &mut Scratch,
    mut infections: Option<&mut Vec<(usize, usize)>>,
) -> bool {
    let mut rng = base.clone();
    rng.set_stream(trial_index);
    let horizon = spec.horizon;

    let leader_defaulted = spec.leader.sample(rng.random(), horizon) <= horizon;
    scratch.natural.clear();
    for (i, law) in spec.members.iter().enumerate() {
        let eta = law.sample(rng.random(), horizon);
        scratch.eta[i] = eta;
        scratch.victim[i] = false;
        if eta <= horizon {
            scratch.natural.push(i);
        }
    }

    for &i in &scratch.natural {
        let eta_i = scratch.eta[i];
        for j in 0..spec.n() {
            if scratch.eta[j] <= horizon || scratch.victim[j] {
                continue;
            }
            let q = spec.schedule.q_at(i, j, eta_i, horizon);
            let fired = if q >= 1.0 {
                true
            } else if q > 0.0 {
                rng.random::<f64>() < q
            } else {
                false
            };
            if fired {
                scratch.victim[j] = true;
                if let Some(log) = infections.as_deref_mut() {
                    log.push((i, j));
                }
            }
        }
    }
    leader_defaulted
}

fn base_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Outcome of trial `trial_index`; depends only on the spec, its seed and the index.
pub fn sample_trial(spec: &SimulationSpec, trial_index: u64) -> Result<TrialOutcome> {
    spec.validate()?;
    let mut scratch = Scratch::new(spec.n());
    let mut infections = Vec::new();
    let leader_defaulted = run_trial(
        spec,
        &base_rng(spec.seed),
        trial_index,
        &mut scratch,
        Some(&mut infections),
    );
    let contagion_victims: Vec<usize> = (0..spec.n()).filter(|&j| scratch.victim[j]).collect();
    let all_down = scratch.natural.len() + contagion_victims.len() == spec.n();
    Ok(TrialOutcome {
        leader_defaulted,
        natural_defaulters: scratch.natural.clone(),
        contagion_victims,
        infections,
        group_defaulted: leader_defaulted || all_down,
    })
}

/// Fraction of trials in which the group survives, with its binomial
/// standard error and a normal 95% interval.
pub fn estimate_survival(spec: &SimulationSpec) -> Result<SurvivalEstimate> {
    spec.validate()?;
    let base = base_rng(spec.seed);
    let chunks = spec.trials.div_ceil(TRIAL_CHUNK);
    let survivors: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = Scratch::new(spec.n());
            let lo = c * TRIAL_CHUNK;
            let hi = (lo + TRIAL_CHUNK).min(spec.trials);
            (lo..hi)
                .filter(|&t| {
                    let leader_defaulted = run_trial(spec, &base, t, &mut scratch, None);
                    let down =
                        scratch.natural.len() + scratch.victim.iter().filter(|&&v| v).count();
                    !leader_defaulted && down < spec.n()
                })
                .count() as u64
        })
        .sum();

    let trials = spec.trials as f64;
    let p = survivors as f64 / trials;
    let std_error = (p * (1.0 - p) / trials).sqrt();
    Ok(SurvivalEstimate {
        estimate: p,
        std_error,
        ci95: (p - 1.96 * std_error, p + 1.96 * std_error),
        survivors,
        trials: spec.trials,
        seed: spec.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec(n: usize, c1: f64, q: f64, leader: f64, trials: u64) -> SimulationSpec {
        SimulationSpec::calibrated(
            &GroupSpec::homogeneous(leader, c1, q, n),
            1.0,
            trials,
            11,
            None,
        )
        .unwrap()
    }

    fn within(est: &SurvivalEstimate, exact: f64) -> bool {
        (est.estimate - exact).abs() <= 4.0 * est.std_error.max(1e-12)
    }

    #[test]
    fn calibration_hits_target() {
        let law = DefaultTimeDistribution::exponential_calibrated(0.7, 2.0);
        assert!((law.cdf(2.0, 2.0) - 0.7).abs() < 1e-15);
        let sure = DefaultTimeDistribution::exponential_calibrated(1.0, 2.0);
        assert_eq!(sure.cdf(0.0, 2.0), 1.0);
        assert!(sure.sample(0.3, 2.0) <= 2.0);
        let never = DefaultTimeDistribution::exponential_calibrated(0.0, 2.0);
        assert_eq!(never.sample(0.99, 2.0), f64::INFINITY);
    }

    #[test]
    fn user_cdf_inverse() {
        let law = DefaultTimeDistribution::UserCdf {
            knots: vec![(0.0, 0.0), (0.5, 0.4), (1.0, 0.7)],
            interpolation: Interpolation::Linear,
        };
        law.validate().unwrap();
        assert!((law.cdf(0.25, 1.0) - 0.2).abs() < 1e-15);
        assert!((law.sample(0.2, 1.0) - 0.25).abs() < 1e-15);
        assert!((law.sample(0.55, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(law.sample(0.7, 1.0), f64::INFINITY);

        let step = DefaultTimeDistribution::UserCdf {
            knots: vec![(0.5, 0.4), (1.0, 0.7)],
            interpolation: Interpolation::Step,
        };
        assert_eq!(step.cdf(0.7, 1.0), 0.4);
        assert_eq!(step.sample(0.1, 1.0), 0.5);
        assert_eq!(step.sample(0.5, 1.0), 1.0);
    }

    #[test]
    fn invalid_tables() {
        let bad = DefaultTimeDistribution::UserCdf {
            knots: vec![(0.0, 0.5), (1.0, 0.4)],
            interpolation: Interpolation::Linear,
        };
        assert!(bad.validate().is_err());
        let bad = DefaultTimeDistribution::UserCdf {
            knots: vec![],
            interpolation: Interpolation::Step,
        };
        assert!(bad.validate().is_err());
        assert!(DefaultTimeDistribution::Exponential { rate: -1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn piecewise_schedule_must_not_increase() {
        let sched = ContagionSchedule::Piecewise {
            breakpoints: vec![0.5, 1.0],
            levels: vec![
                ContagionMatrix::uniform(2, 0.2),
                ContagionMatrix::uniform(2, 0.3),
            ],
        };
        assert!(sched.validate().is_err());
        let sched = ContagionSchedule::Piecewise {
            breakpoints: vec![0.5, 1.0],
            levels: vec![
                ContagionMatrix::uniform(2, 0.3),
                ContagionMatrix::uniform(2, 0.1),
            ],
        };
        sched.validate().unwrap();
        assert_eq!(sched.q_at(0, 1, 0.5, 1.0), 0.3);
        assert_eq!(sched.q_at(0, 1, 0.7, 1.0), 0.1);
        assert_eq!(sched.q_at(0, 1, 1.2, 2.0), 0.0);
    }

    #[test]
    fn no_contagion_means_no_victims() {
        let spec = uniform_spec(4, 0.5, 0.0, 1.0, 1);
        for t in 0..500 {
            assert!(sample_trial(&spec, t).unwrap().contagion_victims.is_empty());
        }
    }

    #[test]
    fn full_contagion_takes_everyone() {
        let spec = uniform_spec(4, 0.3, 1.0, 1.0, 1);
        for t in 0..500 {
            let o = sample_trial(&spec, t).unwrap();
            if !o.natural_defaulters.is_empty() {
                assert_eq!(o.natural_defaulters.len() + o.contagion_victims.len(), 4);
                assert!(o.group_defaulted);
            }
        }
    }

    #[test]
    fn outcome_invariants() {
        let spec = uniform_spec(6, 0.4, 0.3, 0.8, 1);
        for t in 0..2000 {
            let o = sample_trial(&spec, t).unwrap();
            assert!(o
                .natural_defaulters
                .iter()
                .all(|i| !o.contagion_victims.contains(i)));
            if o.natural_defaulters.is_empty() {
                assert!(o.contagion_victims.is_empty());
            }
            for (src, dst) in &o.infections {
                assert!(o.natural_defaulters.contains(src));
                assert!(!o.contagion_victims.contains(src));
                assert!(o.contagion_victims.contains(dst));
            }
            let all = o.natural_defaulters.len() + o.contagion_victims.len() == 6;
            assert_eq!(o.group_defaulted, o.leader_defaulted || all);
        }
    }

    #[test]
    fn delay_past_horizon_matches_no_contagion() {
        let group = GroupSpec::homogeneous(0.9, 0.5, 0.6, 4);
        let delayed = SimulationSpec::calibrated(&group, 1.0, 1, 5, Some(1.5)).unwrap();
        let none =
            SimulationSpec::calibrated(&GroupSpec::homogeneous(0.9, 0.5, 0.0, 4), 1.0, 1, 5, None)
                .unwrap();
        for t in 0..500 {
            assert_eq!(
                sample_trial(&delayed, t).unwrap(),
                sample_trial(&none, t).unwrap()
            );
        }
    }

    #[test]
    fn single_member_estimate() {
        let spec = SimulationSpec::calibrated(
            &GroupSpec::new(0.5, vec![0.7], ContagionMatrix::zeros(1)),
            1.0,
            1_000_000,
            3,
            None,
        )
        .unwrap();
        let est = estimate_survival(&spec).unwrap();
        assert!(within(&est, 0.15), "{est:?}");
    }

    #[test]
    fn estimate_is_reproducible() {
        let spec = uniform_spec(5, 0.4, 0.2, 0.9, 20_000);
        let a = estimate_survival(&spec).unwrap();
        let b = estimate_survival(&spec).unwrap();
        assert_eq!(a, b);
        let serial = (0..spec.trials)
            .filter(|&t| !sample_trial(&spec, t).unwrap().group_defaulted)
            .count() as u64;
        assert_eq!(a.survivors, serial);
    }

    #[test]
    fn calibration_frequency() {
        let law = DefaultTimeDistribution::exponential_calibrated(0.37, 3.0);
        let rng = base_rng(99);
        let trials = 200_000u64;
        let hits = (0..trials)
            .filter(|&t| {
                let mut r = rng.clone();
                r.set_stream(t);
                law.sample(r.random(), 3.0) <= 3.0
            })
            .count() as f64;
        let p = hits / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((p - 0.37).abs() <= 4.0 * se);
    }
}
