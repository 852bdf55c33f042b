use std::collections::HashSet;
use std::sync::Arc;

use bigcs_core::linop::*;
use bigcs_core::solver::{LambdaRule, SolverParams};
use bigcs_core::synthetic::planted_tree_coefficients;
use bigcs_core::tssp::*;
use bigcs_core::wavelet::{Band, WaveletLayout};
use bigcs_core::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

fn setup(side: usize, levels: usize, rate: f64, seed: u64) -> (WaveletLayout, Operator) {
    let layout = WaveletLayout::new(side, levels).unwrap();
    let spec = SrmSpec::from_rate(side * side, rate, seed).unwrap();
    (layout, Arc::new(srm_op(spec).unwrap()))
}

fn measure(phi: &Operator, layout: &WaveletLayout, x: &[f64]) -> Vec<f64> {
    unweighted_operator(phi, layout).unwrap().forward(x)
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let e: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    norm2(&e) / norm2(b)
}

#[test]
fn planted_tree_recovery() {
    let (layout, phi) = setup(64, 3, 0.4, 11);
    let k = (0.02 * 4096.0f64).round() as usize;
    let x_true = planted_tree_coefficients(&layout, k, 11).unwrap();
    let y = measure(&phi, &layout, &x_true);
    let rec = recover_tssp(&y, &phi, &layout, &TsspConfig::default()).unwrap();
    let err = rel_error(&rec.coefficients, &x_true);
    assert!(err <= 0.05, "relative error {err}");
    assert_eq!(rec.stages.len(), layout.levels() + 1);
}

#[test]
fn stage_invariants_hold() {
    let (layout, phi) = setup(32, 3, 0.3, 5);
    let x_true = planted_tree_coefficients(&layout, 40, 5).unwrap();
    let mut y = measure(&phi, &layout, &x_true);
    let mut rng = StdRng::seed_from_u64(5);
    y.iter_mut().for_each(|v| *v += 0.01 * rng.sample::<f64, _>(StandardNormal));
    let rec = recover_tssp(&y, &phi, &layout, &TsspConfig::default()).unwrap();
    let levels = layout.levels();

    assert!(rec.weights.is_well_formed(&layout));
    for s in &rec.stages {
        assert!(s.trace.final_objective <= s.initial_objective(), "stage {}", s.stage);
        assert!(s.trace.objective_non_increasing(1e-12));
    }
    let stage_numbers: Vec<usize> = rec.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stage_numbers, (1..=levels + 1).collect::<Vec<_>>());

    // tree validity: each I_s is confined to its level and grown from the surviving parents
    assert_eq!(rec.tree.len(), levels);
    let mut seen = HashSet::new();
    for w in rec.tree.windows(2) {
        let (upper_level, upper) = (&w[0].0, &w[0].1);
        let (level, nodes) = (&w[1].0, &w[1].1);
        assert_eq!(*level + 1, *upper_level);
        let pruned = &rec.pruned.iter().find(|(l, _)| l == level).unwrap().1;
        for &i in nodes.iter().chain(pruned) {
            let parent = layout.parent(i).unwrap().unwrap();
            assert!(upper.contains(&parent));
        }
    }
    for (level, nodes) in &rec.tree {
        for &i in nodes {
            let loc = layout.locate(i).unwrap();
            assert_eq!(loc.subband.level, *level);
            assert_ne!(loc.subband.band, Band::LL);
            assert!(seen.insert(i), "index {i} in two tree sets");
            let want = tree_weight(levels, *level);
            assert_eq!(rec.weights.values()[i], want);
            assert_eq!(rec.weights.tags()[i], WeightTag::Tree(*level));
        }
    }
    for (_, removed) in &rec.pruned {
        for &j in removed {
            assert_eq!(rec.weights.values()[j], 1.0);
        }
    }
    let csv = rec.stages_csv();
    assert_eq!(csv.lines().count(), levels + 2);
    assert!(csv.starts_with("stage,level,lambda,iterations,final_objective,support"));
}

#[test]
fn zero_measurements_give_zero_image() {
    let (layout, phi) = setup(16, 3, 0.5, 2);
    let y = vec![0.0; phi.rows()];
    let rec = recover_tssp(&y, &phi, &layout, &TsspConfig::default()).unwrap();
    assert!(rec.coefficients.iter().all(|&v| v == 0.0));
    assert!(rec.stages.iter().all(|s| s.trace.iterations() == 0));
}

#[test]
fn recovery_is_deterministic() {
    let (layout, phi) = setup(32, 3, 0.25, 9);
    let x_true = planted_tree_coefficients(&layout, 30, 9).unwrap();
    let y = measure(&phi, &layout, &x_true);
    let cfg = TsspConfig::default();
    let a = recover_tssp(&y, &phi, &layout, &cfg).unwrap();
    let (layout2, phi2) = setup(32, 3, 0.25, 9);
    let b = recover_tssp(&y, &phi2, &layout2, &cfg).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.coefficients), bits(&b.coefficients));
    assert_eq!(a.weights, b.weights);
}

#[test]
fn warm_start_changes_speed_not_answer() {
    let (layout, phi) = setup(32, 3, 0.4, 3);
    let x_true = planted_tree_coefficients(&layout, 40, 3).unwrap();
    let y = measure(&phi, &layout, &x_true);
    let params = SolverParams {
        tol: 1e-9,
        max_iter: 200_000,
        ..SolverParams::default()
    };
    let warm = TsspConfig {
        solver: params,
        ..TsspConfig::default()
    };
    let cold = TsspConfig {
        warm_start: false,
        ..warm
    };
    let a = recover_tssp(&y, &phi, &layout, &warm).unwrap();
    let b = recover_tssp(&y, &phi, &layout, &cold).unwrap();
    assert_eq!(a.weights, b.weights);
    assert!(rel_error(&a.coefficients, &b.coefficients) < 1e-5);
    assert!(a.total_iterations() <= b.total_iterations());
}

#[test]
fn weighted_and_unweighted_share_lambda() {
    let (layout, phi) = setup(16, 3, 0.5, 4);
    let x_true = planted_tree_coefficients(&layout, 20, 4).unwrap();
    let y = measure(&phi, &layout, &x_true);
    let rule = LambdaRule::Relative(0.02);
    let tssp = recover_tssp(
        &y,
        &phi,
        &layout,
        &TsspConfig {
            lambda: rule,
            ..TsspConfig::default()
        },
    )
    .unwrap();
    let plain = recover_unweighted(&y, &phi, &layout, rule, SolverParams::default()).unwrap();
    assert_eq!(plain.stages.len(), 1);
    assert!(plain.weights.values().iter().all(|&w| w == 1.0));
    assert!(tssp.stages.iter().all(|s| s.lambda == plain.stages[0].lambda));
}

#[test]
fn failures_name_the_stage() {
    let (layout, phi) = setup(16, 3, 0.5, 1);
    let y = vec![f64::MAX; phi.rows()];
    let cfg = TsspConfig {
        lambda: LambdaRule::Fixed(1.0),
        ..TsspConfig::default()
    };
    match recover_tssp(&y, &phi, &layout, &cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, 1);
            assert!(matches!(*source, Error::Diverged { .. }));
        }
        other => panic!("expected a stage error, got {other:?}"),
    }
    let short = vec![0.0; 3];
    assert!(matches!(
        recover_tssp(&short, &phi, &layout, &TsspConfig::default()),
        Err(Error::InvalidShape(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_operator_adjoint_consistency(seed in any::<u64>(), p in 1.0f64..100.0) {
        let (layout, phi) = setup(16, 3, 0.4, seed);
        let mut rng = StdRng::seed_from_u64(seed);
        let c: Vec<f64> = (0..256).map(|_| rng.random::<f64>()).collect();
        let mut w = init_weights(&layout);
        let roots = select_roots(&c, &layout, p).unwrap();
        w.assign_level(&roots, 3, 3);
        let kids = grow_level(&mut w, &layout, &roots, 2).unwrap();
        prop_assert_eq!(kids.len(), 4 * roots.len());
        prop_assert!(w.is_well_formed(&layout));

        let a = weighted_operator(&phi, &layout, &w).unwrap();
        let x: Vec<f64> = (0..256).map(|_| rng.sample(StandardNormal)).collect();
        let yv: Vec<f64> = (0..a.rows()).map(|_| rng.sample(StandardNormal)).collect();
        let lhs = dot(&a.forward(&x), &yv);
        let rhs = dot(&x, &a.adjoint(&yv));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }
}
