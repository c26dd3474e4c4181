//! The five commands. Each returns the document to write plus a status; the
//! binary maps statuses and errors onto exit codes.

use log::{debug, info, warn};
use mfg_core::checks::{
    check_displacement_monotone, check_finite_dim_gradient, check_linear_derivative, check_ll_monotone,
    check_potentializable, displacement_pairing, equilibrium_field, sample_pairs,
};
use mfg_core::hjb::{
    biased_viscous_burgers, detect_shock, godunov_burgers, initial_velocity, selection_row, switch_points,
    viscous_burgers, BurgersField, CompareOptions, DEFAULT_MULTIPLICITY_GAP,
};
use mfg_core::lagrangian::{straight_line_lift, DEFAULT_SEGMENTS};
use mfg_core::reduced::{FixedPointOptions, MinimizeOptions, NewtonOptions, Scan};
use mfg_core::{Coupling, EmpiricalMeasure, EquilibriumResult, GameSpec, Method};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Built, Datum, Format, LoadedConfig, MethodName, Scheme};
use crate::error::{CliError, CliResult};
use crate::format::{self, num, opt_num, Csv, ResultJson};

/// Thresholds used to turn the checkers' raw numbers into pass flags.
pub const LINEAR_DERIVATIVE_TOL: f64 = 1e-6;
pub const FINITE_DIM_TOL: f64 = 1e-5;
pub const MONOTONE_TOL: f64 = 1e-9;
pub const SYMMETRY_TOL: f64 = 1e-5;

/// Residual below which a fictitious-play round counts as an equilibrium.
const FICTITIOUS_PLAY_TOL: f64 = 1e-6;
const DEFAULT_SCAN_STEPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Solve,
    Enumerate,
    Select,
    Burgers,
    Check,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    /// Set when the run finished but did not meet its tolerance.
    pub not_converged: Option<String>,
}

impl Output {
    fn done(body: String) -> Self {
        Self { body, not_converged: None }
    }
}

pub fn run(command: Command, cfg: &LoadedConfig, ov: Overrides) -> CliResult<Output> {
    match command {
        Command::Solve => solve(cfg, ov),
        Command::Enumerate => enumerate(cfg),
        Command::Select => select(cfg),
        Command::Burgers => burgers(cfg),
        Command::Check => check(cfg, ov),
    }
}

fn game(cfg: &LoadedConfig, ov: Overrides) -> CliResult<GameSpec<Box<dyn Coupling>>> {
    let spec = cfg.spec()?;
    Ok(GameSpec::new(spec.horizon, cfg.initial(ov.seed)?, cfg.coupling()?)?)
}

/// Covers `[lo - t - 5, hi + t + 5]` unless the config says otherwise.
fn scan_for(cfg: &LoadedConfig, lo: f64, hi: f64, t: f64) -> Scan {
    cfg.scan().unwrap_or_else(|| Scan::new(lo - t - 5.0, hi + t + 5.0, DEFAULT_SCAN_STEPS))
}

fn flat(points: &crate::config::Points, d: usize) -> CliResult<EmpiricalMeasure> {
    let m = points.to_measure()?;
    if m.dim() != d {
        return Err(CliError::config(format!("points live in R^{}, the game in R^{d}", m.dim()), None));
    }
    Ok(m)
}

pub fn solve(cfg: &LoadedConfig, ov: Overrides) -> CliResult<Output> {
    let spec = game(cfg, ov)?;
    let s = &cfg.config.solver;
    let d = spec.initial().dim();
    let init = s.init.as_ref().map(|p| flat(p, d)).transpose()?;
    info!("solve: n = {}, d = {d}, method {:?}", spec.initial().count(), s.method);
    let result = match s.method {
        MethodName::Potential => {
            let mut opts =
                MinimizeOptions { restarts: s.restarts, seed: ov.seed.unwrap_or(s.seed), ..Default::default() };
            opts.tol = s.tol.unwrap_or(opts.tol);
            opts.max_iter = s.max_iter.unwrap_or(opts.max_iter);
            let inits: Vec<Vec<f64>> = init.iter().map(|m| m.as_flat().to_vec()).collect();
            spec.minimize_potential(&inits, &opts)?
        }
        MethodName::FixedPoint => {
            let mut opts = FixedPointOptions { relaxation: s.relaxation, ..Default::default() };
            opts.tol = s.tol.unwrap_or(opts.tol);
            opts.max_iter = s.max_iter.unwrap_or(opts.max_iter);
            spec.nash_fixed_point(init.as_ref().unwrap_or(spec.initial()), &opts)?
        }
        MethodName::FictitiousPlay => {
            let tol = s.tol.unwrap_or(FICTITIOUS_PLAY_TOL);
            let rounds = spec.fictitious_play(
                init.as_ref().unwrap_or(spec.initial()),
                s.rounds,
                tol,
                &NewtonOptions::default(),
            )?;
            for r in &rounds {
                debug!("round {}: residual {:e}", r.iterations, r.nash_residual);
            }
            rounds.into_iter().last().expect("at least one round")
        }
        MethodName::Enumeration => {
            let x = spec.initial().as_flat().first().copied().unwrap_or(0.0);
            let e = spec.enumerate_equilibria_1d(&scan_for(cfg, x, x, spec.horizon()))?;
            if e.boundary_warning {
                warn!("a root sits on the edge of the scan interval; widen the scan");
            }
            let root = e
                .selected(x)
                .ok_or_else(|| CliError::NotConverged("no equilibrium inside the scan interval".into()))?;
            let terminal = EmpiricalMeasure::from_scalars(&[root.y])?;
            EquilibriumResult {
                nash_residual: spec.nash_residual(&terminal)?,
                potential_value: root.potential,
                terminal,
                method: Method::Enumeration,
                iterations: e.roots.len(),
                converged: true,
            }
        }
    };
    info!("solve: residual {:e}, converged {}", result.nash_residual, result.converged);
    let body = match cfg.config.output.format.unwrap_or(Format::Json) {
        Format::Json => format::to_json(&ResultJson::from(&result)),
        Format::Csv => format::measure_csv(&result.terminal),
        Format::PathsCsv => {
            let segments = cfg.config.output.segments.unwrap_or(DEFAULT_SEGMENTS);
            format::paths_csv(&straight_line_lift(spec.initial(), &result.terminal, spec.horizon(), segments)?)
        }
    };
    let not_converged = (!result.converged).then(|| {
        format!(
            "{} stopped after {} iterations with residual {:e}",
            result.method.as_str(),
            result.iterations,
            result.nash_residual
        )
    });
    Ok(Output { body, not_converged })
}

fn require_csv(cfg: &LoadedConfig, command: &str) -> CliResult<()> {
    match cfg.config.output.format {
        None | Some(Format::Csv) => Ok(()),
        Some(other) => Err(cfg.error_at(&["output", "format"], format!("`{command}` writes CSV, not {other:?}"))),
    }
}

pub fn enumerate(cfg: &LoadedConfig) -> CliResult<Output> {
    require_csv(cfg, "enumerate")?;
    let spec = game(cfg, Overrides::default())?;
    let x = spec.initial().as_flat().first().copied().unwrap_or(0.0);
    let e = spec.enumerate_equilibria_1d(&scan_for(cfg, x, x, spec.horizon()))?;
    if e.boundary_warning {
        warn!("a root sits on the edge of the scan interval; widen the scan");
    }
    info!("enumerate: {} equilibria", e.roots.len());
    let mut csv = Csv::new(&["y", "residual", "K"]);
    for r in &e.roots {
        csv.row(&[num(r.y), num(r.residual), num(r.potential)]);
    }
    Ok(Output::done(csv.finish()))
}

pub fn select(cfg: &LoadedConfig) -> CliResult<Output> {
    require_csv(cfg, "select")?;
    let sweep = cfg.config.sweep.ok_or_else(|| CliError::config("`select` needs a `sweep` block", None))?;
    let coupling = cfg.coupling()?;
    let pde = &cfg.config.pde;
    let t = sweep.t;
    let xs = sweep.points();
    let opts = CompareOptions {
        scan: scan_for(cfg, sweep.x_lo, sweep.x_hi, t),
        grid: pde.grid()?,
        cfl: pde.cfl,
        eps_list: pde.eps_list.clone(),
        gap: DEFAULT_MULTIPLICITY_GAP,
    };
    let u0 = initial_velocity(&coupling);
    let godunov = godunov_burgers(&opts.grid, &u0, t, opts.cfl)?;
    let viscous = opts
        .eps_list
        .par_iter()
        .map(|&eps| viscous_burgers(&opts.grid, initial_velocity(&coupling), t, eps, opts.cfl))
        .collect::<mfg_core::Result<Vec<BurgersField>>>()?;
    let rows = xs
        .par_iter()
        .map(|&x| selection_row(&coupling, t, x, &opts, &godunov, &viscous))
        .collect::<mfg_core::Result<Vec<_>>>()?;
    let switches = switch_points(&coupling, t, &xs, &opts.scan)?;
    info!("select: {} rows, {} switch points", rows.len(), switches.len());

    let mut header: Vec<String> = ["x", "hl_value", "hl_grad", "godunov_u"].iter().map(|s| s.to_string()).collect();
    header.extend(opts.eps_list.iter().map(|e| format!("viscous_u_eps{e}")));
    header.extend(["equilibria", "selected_y", "selected_velocity"].iter().map(|s| s.to_string()));
    let mut csv = Csv::new(&header);
    for r in &rows {
        let mut fields = vec![num(r.x), num(r.hl_value), opt_num(r.hl_grad), num(r.godunov_u)];
        fields.extend(r.viscous_u.iter().map(|&v| num(v)));
        fields.push(r.equilibria.iter().map(|&y| num(y)).collect::<Vec<_>>().join(";"));
        fields.push(opt_num(r.selected_y));
        fields.push(opt_num(r.selected_velocity));
        csv.row(&fields);
    }
    for s in switches {
        csv.comment(&format!("switch_x={}", num(s)));
    }
    Ok(Output::done(csv.finish()))
}

pub fn burgers(cfg: &LoadedConfig) -> CliResult<Output> {
    require_csv(cfg, "burgers")?;
    let pde = &cfg.config.pde;
    let t = pde.t_final.ok_or_else(|| cfg.error_at(&["pde"], "`burgers` needs pde.t_final"))?;
    let grid = pde.grid()?;
    let coupling = match pde.datum {
        Datum::Coupling => Some(cfg.coupling()?),
        _ => None,
    };
    let u0 = |x: f64| -> f64 {
        match pde.datum {
            Datum::Coupling => initial_velocity(coupling.as_ref().expect("built above"))(x),
            Datum::Riemann { left, right, at } => {
                if x < at {
                    left
                } else {
                    right
                }
            }
            Datum::Constant { value } => value,
        }
    };
    let mut runs: Vec<(Scheme, Option<f64>)> = Vec::new();
    for &scheme in &pde.schemes {
        match scheme {
            Scheme::Godunov => runs.push((scheme, None)),
            _ => runs.extend(pde.eps_list.iter().map(|&e| (scheme, Some(e)))),
        }
    }
    let theta = pde.theta;
    let fields = runs
        .par_iter()
        .map(|&(scheme, eps)| match (scheme, eps) {
            (Scheme::Godunov, _) => godunov_burgers(&grid, u0, t, pde.cfl),
            (Scheme::Viscous, Some(e)) => viscous_burgers(&grid, u0, t, e, pde.cfl),
            (Scheme::Biased, Some(e)) => biased_viscous_burgers(&grid, u0, t, e, &|_| theta, pde.cfl),
            _ => unreachable!("viscous runs always carry a viscosity"),
        })
        .collect::<mfg_core::Result<Vec<_>>>()?;

    let mut csv = Csv::new(&["scheme", "eps", "t", "x", "u"]);
    let mut shocks = Vec::new();
    for ((scheme, eps), field) in runs.iter().zip(&fields) {
        if field.boundary_touched {
            warn!("{} run reached the domain boundary; widen the grid", scheme.as_str());
        }
        for (x, &u) in grid.centers().zip(&field.values) {
            csv.row(&[scheme.as_str().to_owned(), opt_num(*eps), num(t), num(x), num(u)]);
        }
        for x in detect_shock(field, pde.shock_threshold) {
            shocks.push(format!("shock scheme={} eps={} x={}", scheme.as_str(), opt_num(*eps), num(x)));
        }
    }
    for s in &shocks {
        csv.comment(s);
    }
    info!("burgers: {} runs, {} shocks", runs.len(), shocks.len());
    Ok(Output::done(csv.finish()))
}

#[derive(Debug, Serialize)]
struct Verdict {
    worst: Option<f64>,
    pass: Option<bool>,
}

impl Verdict {
    fn at_most(worst: Option<f64>, tol: f64) -> Self {
        Self { worst, pass: worst.map(|w| w <= tol) }
    }
    fn at_least(worst: Option<f64>, tol: f64) -> Self {
        Self { worst, pass: worst.map(|w| w >= -tol) }
    }
}

#[derive(Debug, Serialize)]
struct CheckReport {
    coupling: String,
    linear_derivative: Verdict,
    finite_dim_gradient: Verdict,
    displacement_monotone: Verdict,
    /// The pair `[X, Y]` attaining the displacement minimum.
    displacement_witness: Option<[Vec<Vec<f64>>; 2]>,
    lasry_lions_monotone: Verdict,
    potentializability: Verdict,
}

pub fn check(cfg: &LoadedConfig, ov: Overrides) -> CliResult<Output> {
    if let Some(f) = cfg.config.output.format.filter(|f| *f != Format::Json) {
        return Err(cfg.error_at(&["output", "format"], format!("`check` writes JSON, not {f:?}")));
    }
    let built = cfg.coupling_field()?;
    let field = built.field();
    let k = &cfg.config.check;
    let seed = ov.seed.unwrap_or(k.seed);
    let (n, d) = (k.n, k.dim);

    let mut pairs = sample_pairs(n, d, k.samples, k.scale, seed);
    for (x, y) in &k.pairs {
        let (x, y) = (flat(x, d)?, flat(y, d)?);
        if x.count() != y.count() {
            return Err(cfg.error_at(&["check", "pairs"], "paired configurations need the same number of points"));
        }
        pairs.push((x, y));
    }
    let configs: Vec<EmpiricalMeasure> = pairs.iter().map(|p| p.0.clone()).collect();

    let (linear, finite) = match &built {
        Built::Full(c) => {
            // mixtures of every sampled configuration with its partner
            let ld: Vec<f64> = pairs.par_iter().map(|(a, b)| check_linear_derivative(c, a, b, k.quad_order)).collect();
            let fd: Vec<f64> = configs.par_iter().map(|x| check_finite_dim_gradient(c, x, k.fd_step)).collect();
            (max(&ld), max(&fd))
        }
        Built::FieldOnly(_) => (None, None),
    };

    let disp: Vec<f64> = pairs.par_iter().map(|(x, y)| displacement_pairing(field, x, y)).collect();
    let worst_pair = disp.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
    debug_assert_eq!(worst_pair.map(|i| disp[i]).unwrap_or(f64::INFINITY), check_displacement_monotone(field, &pairs));
    let ll: Vec<f64> = pairs.par_iter().map(|(x, y)| check_ll_monotone(field, x, y)).collect();

    let probe = match &k.points {
        Some(p) => flat(p, d)?,
        None => configs.first().cloned().unwrap_or(EmpiricalMeasure::from_flat(vec![0.0; n * d], d)?),
    };
    let asymmetry = check_potentializable(equilibrium_field(field), &probe, k.fd_step);

    let report = CheckReport {
        coupling: field.label().to_owned(),
        linear_derivative: Verdict::at_most(linear, LINEAR_DERIVATIVE_TOL),
        finite_dim_gradient: Verdict::at_most(finite, FINITE_DIM_TOL),
        displacement_monotone: Verdict::at_least(min(&disp), MONOTONE_TOL),
        displacement_witness: worst_pair
            .map(|i| [format::measure_json(&pairs[i].0), format::measure_json(&pairs[i].1)]),
        lasry_lions_monotone: Verdict::at_least(min(&ll), MONOTONE_TOL),
        potentializability: Verdict::at_most(Some(asymmetry), SYMMETRY_TOL),
    };
    Ok(Output::done(format::to_json(&report)))
}

fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

fn min(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::min)
}
