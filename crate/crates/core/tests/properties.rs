mod common;

use proptest::prelude::*;

use metabounds::acquisition::{eqi_of, AcquisitionConfig};
use metabounds::bounds_reduction::{reduce_bounds_from_records, BoundDecision, ReductionConfig};
use metabounds::gp_surrogate::{GpHyperParams, GpModel, Posterior};
use metabounds::lhs_design::{maximin_lhs, min_pairwise_distance};
use metabounds::param_space::ParameterSpace;
use metabounds::similarity::{descriptor, DescriptorConfig};
use metabounds::stats_tests::{percentile, vasicek_entropy, wilcoxon_signed_rank};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lhs_is_stratified(n in 1usize..40, m in 1usize..8, seed in any::<u64>(), restarts in 1usize..8) {
        let d = maximin_lhs(n, m, seed, restarts).unwrap();
        prop_assert_eq!(d.len(), n);
        prop_assert!(common::stratified(d.points()));
    }

    #[test]
    fn more_restarts_never_hurt(n in 3usize..20, m in 1usize..6, seed in any::<u64>(), a in 1usize..10, extra in 0usize..20) {
        let few = min_pairwise_distance(&maximin_lhs(n, m, seed, a).unwrap()).unwrap();
        let many = min_pairwise_distance(&maximin_lhs(n, m, seed, a + extra).unwrap()).unwrap();
        prop_assert!(many >= few);
    }

    #[test]
    fn percentiles_are_ordered(xs in prop::collection::vec(-10.0f64..10.0, 1..50), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let pl = percentile(&xs, lo).unwrap();
        let ph = percentile(&xs, hi).unwrap();
        prop_assert!(pl <= ph);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min <= pl && ph <= max);
    }

    #[test]
    fn wilcoxon_p_in_unit_interval_and_sign_symmetric(xs in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let p = wilcoxon_signed_rank(&xs, 0.0).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        prop_assert_eq!(p, wilcoxon_signed_rank(&neg, 0.0).unwrap().p_value);
    }

    #[test]
    fn entropy_is_shift_invariant(xs in prop::collection::vec(0.0f64..0.5, 9..40), shift in 0.0f64..0.5) {
        let w = 2;
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let a = vasicek_entropy(&xs, w).unwrap();
        let b = vasicek_entropy(&shifted, w).unwrap();
        prop_assert!(a == b || (a - b).abs() < 1e-9 || (a.is_infinite() && b.is_infinite()));
    }

    #[test]
    fn reduced_bounds_nest_in_defaults(seed in any::<u64>(), n in 15usize..120) {
        let space = ParameterSpace::default_grasping();
        let records = common::synthetic_records(&space, n, seed);
        let rb = reduce_bounds_from_records("t", &records, &space, &ReductionConfig::default(), seed).unwrap();
        for (p, b) in rb.params.iter().zip(space.bounds()) {
            prop_assert!(b.lower <= p.reduced.0 && p.reduced.0 < p.reduced.1 && p.reduced.1 <= b.upper);
            match p.decision {
                BoundDecision::Unchanged => prop_assert_eq!(p.reduced, (b.lower, b.upper)),
                BoundDecision::LowerRaised => prop_assert_eq!(p.reduced.1, b.upper),
                BoundDecision::UpperLowered => prop_assert_eq!(p.reduced.0, b.lower),
                BoundDecision::Both => {}
            }
        }
        prop_assert!(space.restrict(&rb).is_ok());
    }

    #[test]
    fn scale_round_trips(u in prop::collection::vec(0.0f64..=1.0, 9)) {
        let space = ParameterSpace::default_grasping();
        let raw = space.unscale(&u).unwrap();
        prop_assert!(space.contains(&raw));
        let back = space.scale(&raw).unwrap();
        for (a, b) in u.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eqi_is_nonnegative_and_monotone_in_incumbent(
        m in -2.0f64..2.0, s in 0.0f64..2.0, tau in 0.0f64..1.0, beta in 0.5f64..0.99, q in -2.0f64..2.0, dq in 0.0f64..1.0,
    ) {
        let cfg = AcquisitionConfig::new(beta, tau).unwrap();
        let post = Posterior { mean: m, variance: s * s };
        let a = eqi_of(post, &cfg, q);
        let b = eqi_of(post, &cfg, q + dq);
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn gp_variance_bounded_by_prior(seed in any::<u64>(), n in 1usize..10) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let model = GpModel::new(GpHyperParams::isotropic(2, 1.3, 0.3, 0.01), inputs, targets).unwrap();
        for _ in 0..5 {
            let p = model.posterior(&[rng.random(), rng.random()]);
            prop_assert!(p.variance >= 0.0 && p.variance <= 1.3 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn descriptor_ignores_point_order(seed in any::<u64>(), rot in 0usize..50) {
        let cloud = metabounds::shapes::generate(metabounds::shapes::ShapeKind::Cone, 80, seed);
        let mut rotated = cloud.clone();
        rotated.rotate_left(rot);
        let cfg = DescriptorConfig { pair_samples: 5000, ..Default::default() };
        prop_assert_eq!(descriptor(&cloud, &cfg).unwrap(), descriptor(&rotated, &cfg).unwrap());
    }
}
