mod common;

use rand::Rng;

use metabounds::acquisition::{eqi, eqi_of, expected_improvement, AcquisitionConfig};
use metabounds::bounds_reduction::{reduce_bounds_from_records, ReductionConfig};
use metabounds::cmaes::{self, CmaConfig};
use metabounds::gp_surrogate::{FitOptions, GpHyperParams, GpModel, Posterior};
use metabounds::lhs_design::{maximin_lhs, min_pairwise_distance};
use metabounds::param_space::ParameterSpace;
use metabounds::stats_tests::wilcoxon_signed_rank;

#[test]
fn reduction_matches_transcription() {
    let space = ParameterSpace::default_grasping();
    let cfg = ReductionConfig::default();
    let mut decisions = std::collections::HashSet::new();
    for seed in 0..25u64 {
        let n = 30 + (seed as usize * 37) % 151;
        let records = common::synthetic_records(&space, n, seed);
        let got = reduce_bounds_from_records("synthetic", &records, &space, &cfg, seed).unwrap();
        let want = common::reference_reduction(&records, &space, &cfg, seed);
        for (g, w) in got.params.iter().zip(&want) {
            assert_eq!(g.decision.as_str(), w.decision, "seed {seed} {}", g.name);
            assert_eq!(g.reduced, (w.lower, w.upper), "seed {seed} {}", g.name);
            decisions.insert(w.decision);
        }
    }
    assert_eq!(decisions.len(), 4, "{decisions:?}");
}

#[test]
fn wilcoxon_matches_enumeration() {
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        // coarse values force ties and zeros
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-4i32..=6) as f64 / 4.0)
            .collect();
        let got = wilcoxon_signed_rank(&xs, 0.0).unwrap().p_value;
        let want = common::wilcoxon_enumerated(&xs);
        assert!((got - want).abs() < 1e-12, "{xs:?}: {got} vs {want}");
    }
}

#[test]
fn wilcoxon_example_values() {
    let xs = [0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
    assert_eq!(wilcoxon_signed_rank(&xs, 0.5).unwrap().p_value, 2.0 / 64.0);
    let sym = [0.3, 0.4, 0.6, 0.7];
    let t = wilcoxon_signed_rank(&sym, 0.5).unwrap();
    assert_eq!((t.statistic, t.p_value), (5.0, 1.0));
}

#[test]
fn gp_matches_dense_inverse() {
    let mut rng = common::rng(5);
    for _ in 0..20 {
        let dim = rng.random_range(1..=4);
        let n = rng.random_range(1..=12);
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random()).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let hyper = GpHyperParams {
            signal_variance: rng.random_range(0.2..3.0),
            lengthscales: (0..dim).map(|_| rng.random_range(0.1..2.0)).collect(),
            noise_variance: rng.random_range(1e-4..0.3),
            prior_mean: rng.random_range(-1.0..1.0),
        };
        let model = GpModel::new(hyper.clone(), inputs.clone(), targets.clone()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let post = model.posterior(&x);
            let (m, v) = common::dense_posterior(&inputs, &targets, &hyper, model.jitter(), &x);
            assert!((post.mean - m).abs() < 1e-8, "{} vs {m}", post.mean);
            assert!(
                (post.variance - v.max(0.0)).abs() < 1e-8,
                "{} vs {v}",
                post.variance
            );
        }
    }
}

#[test]
fn gp_interpolates_without_noise() {
    let mut rng = common::rng(6);
    let inputs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random(), rng.random()]).collect();
    let targets: Vec<f64> = inputs.iter().map(|x| (3.0 * x[0]).sin() + x[1]).collect();
    let model = GpModel::new(
        GpHyperParams::isotropic(2, 1.0, 0.4, 0.0),
        inputs.clone(),
        targets.clone(),
    )
    .unwrap();
    for (x, y) in inputs.iter().zip(&targets) {
        let p = model.posterior(x);
        assert!((p.mean - y).abs() < 1e-6);
        assert!(p.variance < 1e-6);
    }
}

#[test]
fn eqi_agrees_with_monte_carlo() {
    let cases = [
        (0.0, 1.0, 0.5, 0.65, 0.2),
        (0.3, 0.2, 0.1, 0.5, 0.1),
        (-0.5, 0.6, 1.0, 0.9, -0.3),
        (1.0, 0.05, 0.3, 0.65, 1.2),
    ];
    for (k, (m, s, tau, beta, q)) in cases.into_iter().enumerate() {
        let cfg = AcquisitionConfig::new(beta, tau).unwrap();
        let closed = eqi_of(
            Posterior {
                mean: m,
                variance: s * s,
            },
            &cfg,
            q,
        );
        let (mc, se) = common::eqi_monte_carlo(m, s, tau, beta, q, 200_000, k as u64);
        assert!(
            (closed - mc).abs() <= 3.0 * se + 1e-12,
            "case {k}: {closed} vs {mc} ± {se}"
        );
    }
}

#[test]
fn eqi_reduces_to_ei() {
    let mut rng = common::rng(8);
    let inputs: Vec<Vec<f64>> = (0..10)
        .map(|_| vec![rng.random(), rng.random(), rng.random()])
        .collect();
    let targets: Vec<f64> = inputs.iter().map(|x| x.iter().sum::<f64>().cos()).collect();
    let model = GpModel::fit(inputs, targets, &FitOptions::default(), 1).unwrap();
    let cfg = AcquisitionConfig::new(0.5, 0.0).unwrap();
    for _ in 0..50 {
        let x = vec![rng.random(), rng.random(), rng.random()];
        let q = rng.random_range(-1.0..1.0);
        assert!((eqi(&model, &x, &cfg, q) - expected_improvement(&model, &x, q)).abs() < 1e-10);
    }
}

#[test]
fn cmaes_solves_rosenbrock() {
    let mut solved = 0;
    for seed in 0..10 {
        let mut rng = common::rng(100 + seed);
        let cfg = CmaConfig {
            initial_mean: Some(vec![
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]),
            max_evals: 3000,
            ..Default::default()
        };
        let out = cmaes::minimize(common::rosenbrock, &[(-3.0, 3.0); 2], &cfg, seed).unwrap();
        assert!(out.evaluations <= 3000);
        if out.best_value <= 1e-4 {
            solved += 1;
        }
    }
    assert!(solved >= 8, "{solved}/10");
}

#[test]
fn lhs_distance_matches_brute_force() {
    for seed in 0..20 {
        let d = maximin_lhs(3 + seed as usize, 4, seed, 10).unwrap();
        assert!(common::stratified(d.points()));
        let got = min_pairwise_distance(&d).unwrap();
        assert!((got - common::brute_min_distance(d.points())).abs() < 1e-12);
    }
}
