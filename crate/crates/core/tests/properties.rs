use contagion_core::homogeneous::{
    complement_s_n, s_n, survival, survival_full_contagion, survival_no_contagion,
};
use contagion_core::model::{
    prob_a_i_constant, survival_constant, survival_delayed, ContagionMatrix,
};
use contagion_core::optimizer::{search_optimal_size, theorem2_constants};
use contagion_core::{lambert_w_minus1, GroupSpec, HomogeneousSpec, SubsetMask};
use proptest::prelude::*;

fn group(max_n: usize) -> impl Strategy<Value = GroupSpec> {
    (1..=max_n).prop_flat_map(|n| {
        (
            0.0..=1.0f64,
            prop::collection::vec(0.0..=1.0f64, n),
            prop::collection::vec(0.0..=1.0f64, n * n),
            prop::collection::vec(0.0..=1.0f64, n),
        )
            .prop_map(move |(leader, c, q, early_frac)| {
                let mut m = ContagionMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            m.set(i, j, q[i * n + j]);
                        }
                    }
                }
                let early = c.iter().zip(&early_frac).map(|(c, f)| c * f).collect();
                GroupSpec::new(leader, c, m).with_early_default(early)
            })
    })
}

/// Independent bisection for `w e^w = x` on `w <= -1`.
fn bisection_w_minus1(x: f64) -> f64 {
    let (mut lo, mut hi) = (-800.0_f64, -1.0_f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid * mid.exp() < x {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn event_probabilities_are_probabilities(spec in group(7)) {
        let n = spec.n();
        let mut sum = 0.0;
        for bits in 1..(1u64 << n) {
            let p = prob_a_i_constant(&spec, SubsetMask::new(bits, n).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            sum += p;
        }
        prop_assert!(sum <= 1.0 + 1e-12);
        let s = survival_constant(&spec).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
    }

    #[test]
    fn delayed_with_zero_delay_is_constant(spec in group(8)) {
        let mut spec = spec;
        spec.early_default = Some(spec.member_default.clone());
        let d = survival_delayed(&spec).unwrap();
        let c = survival_constant(&spec).unwrap();
        prop_assert!((d - c).abs() <= 1e-12);
    }

    #[test]
    fn delayed_past_horizon_is_independent(spec in group(8)) {
        let mut spec = spec;
        spec.early_default = Some(vec![0.0; spec.n()]);
        let d = survival_delayed(&spec).unwrap();
        let all: f64 = spec.member_default.iter().product();
        prop_assert!((d - spec.leader_survival * (1.0 - all)).abs() <= 1e-12);
    }

    #[test]
    fn boundary_sandwich(
        leader in 0.0..=1.0f64,
        c in prop::collection::vec(0.0..=1.0f64, 1..=8),
        q in 0.0..=1.0f64,
    ) {
        let n = c.len();
        let at = |q: f64| {
            survival_constant(&GroupSpec::new(leader, c.clone(), ContagionMatrix::uniform(n, q))).unwrap()
        };
        let lower: f64 = leader * c.iter().map(|ci| 1.0 - ci).product::<f64>();
        let upper = leader * (1.0 - c.iter().product::<f64>());
        prop_assert!((at(1.0) - lower).abs() <= 1e-12);
        prop_assert!((at(0.0) - upper).abs() <= 1e-12);
        prop_assert!(at(1.0) <= at(q) + 1e-12);
        prop_assert!(at(q) <= at(0.0) + 1e-12);
    }

    #[test]
    fn homogeneous_survival_non_increasing_in_q(c1 in 0.0..=1.0f64, n in 1usize..=8) {
        let mut prev = f64::INFINITY;
        for step in 0..=20 {
            let q = step as f64 / 20.0;
            let s = survival_constant(&GroupSpec::homogeneous(1.0, c1, q, n)).unwrap();
            prop_assert!(s <= prev + 1e-12);
            prev = s;
        }
    }

    #[test]
    fn closed_form_matches_enumeration(
        c1 in 0.0..=1.0f64,
        q in 0.0..=1.0f64,
        leader in 0.0..=1.0f64,
        n in 1usize..=12,
    ) {
        let enumerated = survival_constant(&GroupSpec::homogeneous(leader, c1, q, n)).unwrap();
        let closed = survival(&HomogeneousSpec::new(leader, c1, q, n).unwrap());
        prop_assert!((enumerated - closed).abs() <= 1e-10);
        prop_assert!((s_n(c1, q, n) + complement_s_n(c1, q, n) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_boundaries(c1 in 0.0..=1.0f64, leader in 0.0..=1.0f64, n in 1usize..=30) {
        let at0 = survival(&HomogeneousSpec::new(leader, c1, 0.0, n).unwrap());
        let at1 = survival(&HomogeneousSpec::new(leader, c1, 1.0, n).unwrap());
        prop_assert!((at0 - survival_no_contagion(leader, c1, n)).abs() <= 1e-12);
        prop_assert!((at1 - survival_full_contagion(leader, 1.0 - c1, n)).abs() <= 1e-12);
        prop_assert!((s_n(c1, 0.0, n) - c1.powi(n as i32)).abs() <= 1e-12);
        prop_assert!((s_n(c1, 0.7, 1) - c1).abs() <= 1e-15);
    }

    #[test]
    fn s_n_non_decreasing_in_q(c1 in 0.01..0.99f64, n in 1usize..=60) {
        let mut prev = -1.0;
        for step in 0..=100 {
            let s = s_n(c1, step as f64 / 100.0, n);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
            prop_assert!(s >= prev - 1e-12);
            prev = s;
        }
    }

    #[test]
    fn two_member_sign_identity(c1 in 0.01..0.99f64, q in 0.01..0.99f64) {
        let c3 = 1.0 - q;
        let diff = s_n(c1, q, 2) - s_n(c1, q, 1);
        prop_assert!((diff - c1 * (c1 - 1.0) * (2.0 * c3 - 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn lambert_residual(t in 0.0..1.0f64) {
        let x = -1.0 / std::f64::consts::E + t * (1.0 / std::f64::consts::E - 1e-8);
        let w = lambert_w_minus1(x).unwrap();
        prop_assert!(w <= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-13 * x.abs());
    }

    #[test]
    fn lambert_matches_bisection(x in -0.36..-1e-6f64) {
        let w = lambert_w_minus1(x).unwrap();
        let b = bisection_w_minus1(x);
        prop_assert!((w - b).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn tail_bound(c1 in 0.2..0.95f64, q in 0.2..0.95f64) {
        let tail = theorem2_constants(c1, q).unwrap();
        for n in tail.threshold + 1..=tail.threshold + 50 {
            prop_assert!(complement_s_n(c1, q, n as usize) <= 3.0 * tail.a.powi(n as i32));
        }
    }

    #[test]
    fn search_is_delta_suboptimal(
        c1 in 0.3..0.95f64,
        q in 0.1..0.9f64,
        leader in 0.2..=1.0f64,
        delta in prop::sample::select(vec![0.05, 0.03, 0.01]),
    ) {
        let r = search_optimal_size(leader, c1, q, delta).unwrap();
        let best = (1..=3 * r.search_limit)
            .map(|n| leader * complement_s_n(c1, q, n))
            .fold(f64::MIN, f64::max);
        prop_assert!(best - r.best_survival <= leader * delta + 1e-12);
        prop_assert_eq!(r.curve[r.best_n - 1].1, r.best_survival);
        prop_assert!(r.curve[..r.best_n - 1].iter().all(|&(_, v)| v < r.best_survival));
    }
}
