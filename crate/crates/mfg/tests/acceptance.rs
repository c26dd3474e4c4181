//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mfg::{Command, LoadedConfig, Overrides};
use mfg_core::checks::{check_finite_dim_gradient, check_potentializable, equilibrium_field, DEFAULT_FD_STEP};
use mfg_core::coupling::{
    constant, quadratic_interaction, selection_example, InteractionCoupling, LinearCoupling, PolynomialKernel,
    QuadraticPotential, SecondMomentTilt, SumCoupling,
};
use mfg_core::hjb::{
    godunov_burgers, hopf_lax_value, initial_velocity, viscous_burgers, Grid1D, DEFAULT_CFL, DEFAULT_MULTIPLICITY_GAP,
};
use mfg_core::lagrangian::{
    potential_functional, straight_line_lift, verify_equilibrium_support, PathAtom, PathMeasure,
};
use mfg_core::measures::{w2_assignment, w2_sorted_1d};
use mfg_core::reduced::{FixedPointOptions, MinimizeOptions, Scan};
use mfg_core::simplex::{minimize_on_simplex, simplex_minimizer_is_equilibrium};
use mfg_core::{Coupling, EmpiricalMeasure, GameSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    ensure(secs < limit, format!("{detail}; {secs:.3} s (limit {limit} s)"))
}

fn run_cli(command: Command, json: &str) -> Result<String, String> {
    let cfg = LoadedConfig::parse(json).map_err(|e| e.to_string())?;
    let out = mfg::run(command, &cfg, Overrides::default()).map_err(|e| e.to_string())?;
    match out.not_converged {
        None => Ok(out.body),
        Some(why) => Err(why),
    }
}

fn csv_column(body: &str, column: usize) -> Vec<f64> {
    body.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(column).unwrap().parse().unwrap())
        .collect()
}

fn comments<'a>(body: &'a str, key: &str) -> Vec<&'a str> {
    body.lines().filter_map(|l| l.strip_prefix("# ")).filter(|l| l.starts_with(key)).collect()
}

fn trichotomy() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for x in [0.2, 0.4, 0.6, 0.8] {
        let cfg = format!(
            r#"{{"schema_version": 1, "spec": {{"T": 2, "initial": [{x}], "coupling": {{"label": "selection"}}}}}}"#
        );
        let mut roots = csv_column(&run_cli(Command::Enumerate, &cfg)?, 0);
        roots.sort_by(f64::total_cmp);
        let expected = [x - 2.0, -x, x];
        if roots.len() != 3 {
            return Err(format!("x = {x}: {} roots {roots:?}", roots.len()));
        }
        for (r, e) in roots.iter().zip(expected) {
            worst = worst.max((r - e).abs());
        }
    }
    ensure(worst <= 1e-8, format!("max root error {worst:.2e}")).and_then(|d| within(start.elapsed(), 1.0, d))
}

fn selection_switch() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for t in [1.5f64, 2.0, 3.0] {
        // sweep straddling the expected switch (t - 1)/2
        let cfg = format!(
            r#"{{"schema_version": 1,
                "spec": {{"T": {t}, "initial": [0.0], "coupling": {{"label": "selection"}}}},
                "pde": {{"nx": 800, "eps_list": [0.05]}},
                "sweep": {{"x_lo": 0.05, "x_hi": {hi}, "count": 40, "t": {t}}}}}"#,
            hi = t - 0.05
        );
        let body = run_cli(Command::Select, &cfg)?;
        let switches: Vec<f64> =
            comments(&body, "switch_x=").iter().map(|l| l["switch_x=".len()..].parse().unwrap()).collect();
        if switches.len() != 1 {
            return Err(format!("t = {t}: switch points {switches:?}"));
        }
        worst = worst.max((switches[0] - 0.5 * (t - 1.0)).abs());
    }
    ensure(worst <= 1e-6, format!("max switch error {worst:.2e}")).and_then(|d| within(start.elapsed(), 5.0, d))
}

fn entropy_shock() -> Outcome {
    let start = Instant::now();
    let cfg = r#"{"schema_version": 1,
        "spec": {"T": 2, "initial": [0.0], "coupling": {"label": "selection"}},
        "pde": {"x_lo": -4, "x_hi": 4, "nx": 4000, "t_final": 2, "schemes": ["godunov"], "shock_threshold": 0.25}}"#;
    let body = run_cli(Command::Burgers, cfg)?;
    let shocks: Vec<f64> =
        comments(&body, "shock").iter().map(|l| l.rsplit("x=").next().unwrap().parse().unwrap()).collect();
    if shocks.len() != 1 {
        return Err(format!("detected {shocks:?}"));
    }
    let err = (shocks[0] - 0.5).abs();
    ensure(err <= 0.004 + 1e-12, format!("shock at {:.6}, error {err:.1e}", shocks[0]))
        .and_then(|d| within(start.elapsed(), 10.0, d))
}

fn entropy_is_value_gradient() -> Outcome {
    let c = selection_example();
    let grid = Grid1D::new(-4.0, 4.0, 4000).map_err(|e| e.to_string())?;
    let field = godunov_burgers(&grid, initial_velocity(&c), 2.0, DEFAULT_CFL).map_err(|e| e.to_string())?;
    let scan = Scan::new(-8.0, 8.0, 16_000);
    let xs: Vec<f64> =
        (0..220).map(|i| -3.5 + 7.0 * (i as f64 + 0.5) / 220.0).filter(|x| (x - 0.5).abs() > 0.05).take(200).collect();
    if xs.len() < 200 {
        return Err(format!("only {} sample points", xs.len()));
    }
    let mut worst = 0.0f64;
    for &x in &xs {
        let hl = hopf_lax_value(&c, 2.0, x, &scan, DEFAULT_MULTIPLICITY_GAP).map_err(|e| e.to_string())?;
        let g = hl.gradient.ok_or(format!("no classical gradient at x = {x}"))?;
        worst = worst.max((field.sample(x) - g).abs());
    }
    ensure(worst <= 5e-2, format!("max |u - D_x V| {worst:.2e} on {} points", xs.len()))
}

fn vanishing_viscosity() -> Outcome {
    let c = selection_example();
    let grid = Grid1D::new(-4.0, 4.0, 800).map_err(|e| e.to_string())?;
    let u0 = initial_velocity(&c);
    let god = godunov_burgers(&grid, &u0, 2.0, DEFAULT_CFL).map_err(|e| e.to_string())?;
    let mut l1 = Vec::new();
    for eps in [0.1, 0.05, 0.02, 0.01] {
        let v = viscous_burgers(&grid, &u0, 2.0, eps, DEFAULT_CFL).map_err(|e| e.to_string())?;
        l1.push(v.l1_distance(&god).map_err(|e| e.to_string())?);
    }
    let shown: Vec<String> = l1.iter().map(|v| format!("{v:.4}")).collect();
    ensure(l1.windows(2).all(|w| w[1] < w[0]), format!("L1 = [{}]", shown.join(", ")))
}

fn random_convex(rng: &mut ChaCha8Rng, d: usize) -> SumCoupling {
    let center = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    SumCoupling::new(vec![
        Box::new(LinearCoupling::new(
            QuadraticPotential { stiffness: rng.random_range(0.0..1.5), quartic: rng.random_range(0.0..0.3), center },
            "confine",
        )),
        Box::new(InteractionCoupling::new(
            PolynomialKernel { quadratic: rng.random_range(0.1..2.0), quartic: rng.random_range(0.0..0.5) },
            "interaction",
        )),
    ])
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> EmpiricalMeasure {
    EmpiricalMeasure::from_flat((0..n * d).map(|_| rng.random_range(-scale..scale)).collect(), d).unwrap()
}

fn minimizers_are_equilibria() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_res, mut worst_margin) = (0.0f64, f64::INFINITY);
    for case in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=50);
        let t = rng.random_range(0.2..2.0);
        let c = random_convex(&mut rng, d);
        let spec = GameSpec::new(t, random_points(&mut rng, n, d, 2.0), &c).map_err(|e| e.to_string())?;
        let res = spec.minimize_potential(&[], &MinimizeOptions::default()).map_err(|e| e.to_string())?;
        if !res.converged {
            return Err(format!("case {case}: minimizer did not converge"));
        }
        worst_res = worst_res.max(res.nash_residual);
        let eta = straight_line_lift(spec.initial(), &res.terminal, t, 8).map_err(|e| e.to_string())?;
        let report = verify_equilibrium_support(&eta, &c, 500, 0.5, case).map_err(|e| e.to_string())?;
        worst_margin = worst_margin.min(report.worst());
    }
    ensure(
        worst_res <= 1e-6 && worst_margin >= -1e-9,
        format!("max residual {worst_res:.2e}, min support margin {worst_margin:.2e}"),
    )
}

fn uniqueness_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(1..=10);
        let c = random_convex(&mut rng, d);
        let spec = GameSpec::new(rng.random_range(0.2..2.0), random_points(&mut rng, n, d, 2.0), &c)
            .map_err(|e| e.to_string())?;
        let opts = MinimizeOptions { restarts: 5, tol: 1e-11, seed: 3, ..Default::default() };
        let a = spec.minimize_potential(&[], &opts).map_err(|e| e.to_string())?;
        let b = spec
            .nash_fixed_point(spec.initial(), &FixedPointOptions { tol: 1e-12, ..Default::default() })
            .map_err(|e| e.to_string())?;
        if !(a.converged && b.converged) {
            return Err("a solver did not converge".into());
        }
        let gap = a.terminal.as_flat().iter().zip(b.terminal.as_flat()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    let body = run_cli(
        Command::Enumerate,
        r#"{"schema_version": 1, "spec": {"T": 2, "initial": [0.4], "coupling": {"label": "selection"}}}"#,
    )?;
    let mut roots = csv_column(&body, 0);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);
    ensure(
        worst <= 1e-6 && roots.len() >= 3,
        format!("minimizer vs fixed point {worst:.2e}; {} distinct selection equilibria", roots.len()),
    )
}

fn builtins() -> Vec<Box<dyn Coupling>> {
    vec![
        Box::new(constant(0.0)),
        Box::new(selection_example()),
        Box::new(LinearCoupling::new(
            QuadraticPotential { stiffness: 0.8, quartic: 0.25, center: vec![0.5, -0.2, 0.1] },
            "quadratic",
        )),
        Box::new(quadratic_interaction(1.0)),
        Box::new(InteractionCoupling::new(PolynomialKernel { quadratic: 0.7, quartic: 0.4 }, "quartic")),
    ]
}

fn finite_dim_derivative() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for c in builtins() {
        for n in [1, 2, 5, 20] {
            for _ in 0..20 {
                let d = rng.random_range(1..=3);
                let x = random_points(&mut rng, n, d, 2.0);
                worst = worst.max(check_finite_dim_gradient(&c, &x, DEFAULT_FD_STEP));
            }
        }
    }
    ensure(worst <= 1e-5, format!("worst relative error {worst:.2e}"))
}

fn brute_w2(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    fn go(a: &EmpiricalMeasure, b: &EmpiricalMeasure, j: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if j == a.count() {
            *best = best.min(acc);
            return;
        }
        for k in 0..a.count() {
            if !used[k] {
                used[k] = true;
                let c: f64 = a.point(j).iter().zip(b.point(k)).map(|(p, q)| (p - q) * (p - q)).sum();
                go(a, b, j + 1, used, acc + c, best);
                used[k] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, 0, &mut vec![false; a.count()], 0.0, &mut best);
    (best / a.count() as f64).sqrt()
}

fn wasserstein_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst, mut worst_1d) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=3);
        let (a, b) = (random_points(&mut rng, n, d, 3.0), random_points(&mut rng, n, d, 3.0));
        worst = worst.max((w2_assignment(&a, &b).unwrap() - brute_w2(&a, &b)).abs());
        let (a, b) = (random_points(&mut rng, n, 1, 3.0), random_points(&mut rng, n, 1, 3.0));
        worst_1d = worst_1d.max((w2_assignment(&a, &b).unwrap() - w2_sorted_1d(&a, &b).unwrap()).abs());
    }
    ensure(worst <= 1e-12 && worst_1d <= 1e-12, format!("vs brute force {worst:.1e}, vs sorted 1D {worst_1d:.1e}"))
}

fn straight_line_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut worst_gain, mut worst_k) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=3);
        let t = rng.random_range(0.3..3.0);
        let segments = rng.random_range(2..=12);
        let c = random_convex(&mut rng, d);
        let (x, y) = (random_points(&mut rng, n, d, 2.0), random_points(&mut rng, n, d, 2.0));
        let lift = straight_line_lift(&x, &y, t, segments).unwrap();
        let amplitude = rng.random_range(0.01..1.0);
        let mut atoms = Vec::new();
        for a in lift.atoms() {
            let k = a.knot_count();
            let mut pts = Vec::with_capacity(k * d);
            for i in 0..k {
                let interior = i > 0 && i + 1 < k;
                for &v in a.knot(i) {
                    pts.push(if interior { v + amplitude * rng.random_range(-1.0..1.0) } else { v });
                }
            }
            atoms.push(PathAtom::new(a.times().to_vec(), pts, d).unwrap());
        }
        let bent = PathMeasure::new(atoms).unwrap();
        let j_lift = potential_functional(&lift, &c);
        worst_gain = worst_gain.max(j_lift - potential_functional(&bent, &c));
        let k = GameSpec::new(t, x, &c).unwrap().potential(&y).unwrap();
        worst_k = worst_k.max((j_lift - k).abs());
    }
    ensure(
        worst_gain <= 1e-12 && worst_k <= 1e-12,
        format!("max J(lift) - J(perturbed) {worst_gain:.2e}, max |J(lift) - K_n| {worst_k:.1e}"),
    )
}

fn potentializability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let interaction = InteractionCoupling::new(PolynomialKernel { quadratic: 1.0, quartic: 0.5 }, "interaction");
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=3);
        let x = random_points(&mut rng, n, d, 2.0);
        worst = worst.max(check_potentializable(equilibrium_field(&interaction), &x, DEFAULT_FD_STEP));
    }
    let probe = EmpiricalMeasure::from_scalars(&[0.0, 1.0]).unwrap();
    let tilt = check_potentializable(equilibrium_field(&SecondMomentTilt), &probe, DEFAULT_FD_STEP);
    ensure(worst <= 1e-5 && tilt >= 0.5, format!("interaction asymmetry {worst:.1e}, tilt asymmetry {tilt:.4}"))
}

fn simplex_games() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(1..=10);
        // F(a) = |B a|^2 / 2 + c.a, convex
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: Vec<f64> = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum()
            })
            .collect();
        let grad = |a: &[f64]| -> Vec<f64> {
            (0..n).map(|i| c[i] + (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>()).collect()
        };
        let value = |a: &[f64]| -> f64 {
            let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>()).collect();
            (0..n).map(|i| 0.5 * a[i] * g[i] + c[i] * a[i]).sum()
        };
        let lipschitz: f64 = q.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        let a = minimize_on_simplex(grad, n, 1.0 / lipschitz, 200_000, 1e-14);
        let report = simplex_minimizer_is_equilibrium(value, grad, &a, 1e-8).map_err(|e| e.to_string())?;
        worst = worst.min(report.worst_margin());
    }
    ensure(worst >= -1e-8, format!("worst support margin {worst:.2e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("equilibrium trichotomy", trichotomy),
        ("selection switch", selection_switch),
        ("entropy shock position", entropy_shock),
        ("entropy solution = value gradient", entropy_is_value_gradient),
        ("vanishing viscosity", vanishing_viscosity),
        ("minimizers are equilibria", minimizers_are_equilibria),
        ("uniqueness equivalence", uniqueness_equivalence),
        ("finite-dimensional derivative", finite_dim_derivative),
        ("Wasserstein oracle", wasserstein_oracle),
        ("straight-line reduction", straight_line_reduction),
        ("potentializability", potentializability),
        ("simplex potential games", simplex_games),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
