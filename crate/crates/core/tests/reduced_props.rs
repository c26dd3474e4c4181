use mfg_core::checks::{check_displacement_monotone, sample_pairs};
use mfg_core::coupling::{
    constant, quadratic_interaction, selection_example, InteractionCoupling, LinearCoupling, PolynomialKernel,
    QuadraticPotential, SumCoupling,
};
use mfg_core::reduced::{FixedPointOptions, MinimizeOptions, Scan};
use mfg_core::{Coupling, EmpiricalMeasure, GameSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn convex_coupling(rng: &mut ChaCha8Rng, d: usize) -> SumCoupling {
    let center = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    SumCoupling::new(vec![
        Box::new(LinearCoupling::new(
            QuadraticPotential { stiffness: rng.random_range(0.1..2.0), quartic: rng.random_range(0.0..0.5), center },
            "confine",
        )),
        Box::new(InteractionCoupling::new(
            PolynomialKernel { quadratic: rng.random_range(0.0..2.0), quartic: rng.random_range(0.0..0.5) },
            "interaction",
        )),
    ])
}

proptest! {
    #[test]
    fn stationarity_is_rescaled_nash_residual(
        x in prop::collection::vec(-3.0f64..3.0, 6),
        y in prop::collection::vec(-3.0f64..3.0, 6),
        t in 0.1f64..4.0,
    ) {
        let spec = GameSpec::new(t, EmpiricalMeasure::from_flat(x, 2).unwrap(), quadratic_interaction(1.3)).unwrap();
        let y = EmpiricalMeasure::from_flat(y, 2).unwrap();
        let grad = spec.potential_gradient(&y).unwrap();
        let block_max = grad.chunks(2).map(|b| (b[0] * b[0] + b[1] * b[1]).sqrt()).fold(0.0, f64::max);
        let residual = spec.nash_residual(&y).unwrap();
        let scale = t * 3.0;
        prop_assert!((block_max * scale - residual).abs() <= 1e-12 * (1.0 + residual));
    }

    #[test]
    fn additive_constant_shifts_potential_only(x in prop::collection::vec(-2.0f64..2.0, 3), shift in -5.0f64..5.0) {
        let m = EmpiricalMeasure::from_scalars(&x).unwrap();
        let base = GameSpec::new(1.0, m.clone(), quadratic_interaction(1.0)).unwrap();
        let shifted = GameSpec::new(
            1.0,
            m,
            SumCoupling::new(vec![Box::new(quadratic_interaction(1.0)), Box::new(constant(shift))]),
        )
        .unwrap();
        let opts = MinimizeOptions::default();
        let a = base.minimize_potential(&[], &opts).unwrap();
        let b = shifted.minimize_potential(&[], &opts).unwrap();
        prop_assert!((b.potential_value - a.potential_value - shift).abs() <= 1e-9);
        prop_assert!(a.terminal.as_flat().iter().zip(b.terminal.as_flat()).all(|(p, q)| (p - q).abs() <= 1e-8));
    }
}

#[test]
fn converged_minimizers_are_equilibria() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=12);
        let x = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let spec = GameSpec::new(
            rng.random_range(0.2..2.0),
            EmpiricalMeasure::from_flat(x, d).unwrap(),
            convex_coupling(&mut rng, d),
        )
        .unwrap();
        let opts = MinimizeOptions { tol: 1e-10, restarts: 2, ..Default::default() };
        let res = spec.minimize_potential(&[], &opts).unwrap();
        assert!(res.converged, "n={n} d={d} iters={} resid={}", res.iterations, res.nash_residual);
        assert!(res.nash_residual <= 10.0 * opts.tol, "residual {}", res.nash_residual);
    }
}

#[test]
fn displacement_convex_games_have_one_equilibrium() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..10 {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(2..=8);
        let coupling = convex_coupling(&mut rng, d);
        assert!(check_displacement_monotone(&coupling, &sample_pairs(n, d, 100, 1.5, case)) >= -1e-12);
        let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let spec = GameSpec::new(1.0, EmpiricalMeasure::from_flat(x.clone(), d).unwrap(), coupling).unwrap();
        let inits: Vec<Vec<f64>> =
            (0..5).map(|_| x.iter().map(|c| c + rng.random_range(-2.0..2.0)).collect()).collect();
        let opts = MinimizeOptions { tol: 1e-11, ..Default::default() };
        let mut terminals = Vec::new();
        for init in &inits {
            // each start on its own: all must land on the same point
            let r = spec.minimize_potential(std::slice::from_ref(init), &opts).unwrap();
            terminals.push(r.terminal);
        }
        let fp =
            spec.nash_fixed_point(spec.initial(), &FixedPointOptions { tol: 1e-12, ..Default::default() }).unwrap();
        assert!(fp.converged);
        for t in &terminals {
            let gap = t.as_flat().iter().zip(fp.terminal.as_flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-6, "case {case}: gap {gap}");
        }
    }
}

#[test]
fn selection_example_is_a_non_uniqueness_witness() {
    let c = selection_example();
    let witness = [(EmpiricalMeasure::from_scalars(&[-0.5]).unwrap(), EmpiricalMeasure::from_scalars(&[0.0]).unwrap())];
    assert!(check_displacement_monotone(&c, &witness) < 0.0);
    let spec = GameSpec::new(2.0, EmpiricalMeasure::from_scalars(&[0.4]).unwrap(), &c).unwrap();
    let e = spec.enumerate_equilibria_1d(&Scan::new(-5.0, 5.0, 10_000)).unwrap();
    assert!(e.roots.len() >= 3);
    assert!(e.roots.iter().all(|r| r.residual <= 1e-9));
}

#[test]
fn potential_and_fixed_point_agree_on_interaction_pair() {
    let spec =
        GameSpec::new(1.0, EmpiricalMeasure::from_scalars(&[0.0, 2.0]).unwrap(), quadratic_interaction(1.0)).unwrap();
    let a = spec.minimize_potential(&[], &MinimizeOptions::default()).unwrap();
    let b = spec.nash_fixed_point(spec.initial(), &FixedPointOptions::default()).unwrap();
    for (p, q) in a.terminal.as_flat().iter().zip(b.terminal.as_flat()) {
        assert!((p - q).abs() < 1e-8);
    }
    let _: &dyn Coupling = &spec.coupling;
}
