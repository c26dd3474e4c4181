//! One player in one dimension: the Hopf–Lax value of the reduced potential,
//! the Burgers equation for its gradient, and the machinery comparing the
//! potential-minimizing equilibrium with the entropy solution.
//!
//! For `n = d = 1` the value `U(t, x) = inf_y { |x - y|^2 / (2t) + G(delta_y) }`
//! solves a Hamilton–Jacobi equation whose spatial gradient solves
//! `u_t + (u^2 / 2)_x = 0` with `u(0, x) = D_x g(delta_x, x)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::coupling::Coupling;
use crate::error::{invalid, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::reduced::{Enumeration, GameSpec, Scan};

pub const DEFAULT_CFL: f64 = 0.5;
/// Cap on the explicit diffusion number `eps dt / dx^2`.
pub const DIFFUSION_NUMBER: f64 = 0.4;
/// Two Hopf–Lax minimizers closer in value than this make `x` a shock point.
pub const DEFAULT_MULTIPLICITY_GAP: f64 = 1e-6;
/// More time steps than this is treated as a time-step underflow.
pub const MAX_STEPS: usize = 50_000_000;

/// Uniform cells on `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
}

impl Grid1D {
    pub fn new(x_lo: f64, x_hi: f64, nx: usize) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(invalid!("grid interval [{x_lo}, {x_hi}] is empty"));
        }
        if nx < 8 {
            return Err(invalid!("grid needs at least 8 cells, got {nx}"));
        }
        Ok(Self { x_lo, x_hi, nx })
    }

    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.dx()
    }

    /// Position of the interface between cells `i` and `i + 1`.
    pub fn interface(&self, i: usize) -> f64 {
        self.x_lo + (i + 1) as f64 * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nx).map(|i| self.center(i))
    }
}

/// Cell-centered values of `u(t, .)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersField {
    pub grid: Grid1D,
    pub time: f64,
    pub values: Vec<f64>,
    /// The end cells moved away from their initial far-field states, so
    /// waves reached the boundary and constant extension was not faithful.
    pub boundary_touched: bool,
    pub steps: usize,
}

impl BurgersField {
    /// Linear interpolation between cell centers, constant beyond them.
    pub fn sample(&self, x: f64) -> f64 {
        let s = (x - self.grid.x_lo) / self.grid.dx() - 0.5;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if s >= last as f64 {
            return self.values[last];
        }
        let i = s.floor() as usize;
        let w = s - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    /// `sum_i |u_i - v_i| dx`; both fields must share the grid.
    pub fn l1_distance(&self, other: &BurgersField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(invalid!("fields live on different grids"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.grid.dx())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// The initial datum `u(0, x) = D_x g(delta_x, x)` of a one-dimensional coupling.
pub fn initial_velocity<C: Coupling + ?Sized>(c: &C) -> impl Fn(f64) -> f64 + '_ {
    move |x| {
        let m = EmpiricalMeasure::from_flat(vec![x], 1).expect("finite sample point");
        c.grad_x_vec(&m, &[x])[0]
    }
}

/// Exact Riemann (Godunov) flux for `f(u) = u^2 / 2`, including the
/// transonic rarefaction `u_l < 0 < u_r`.
pub fn godunov_flux(ul: f64, ur: f64) -> f64 {
    if ul <= ur {
        if ul > 0.0 {
            0.5 * ul * ul
        } else if ur < 0.0 {
            0.5 * ur * ur
        } else {
            0.0
        }
    } else {
        0.5 * (ul * ul).max(ur * ur)
    }
}

fn sample_initial(grid: &Grid1D, u0: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let values: Vec<f64> = grid.centers().map(u0).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid!("initial datum is not finite at x = {}", grid.center(i)));
    }
    Ok(values)
}

struct Viscosity<'a> {
    eps: f64,
    theta: Option<&'a dyn Fn(f64) -> f64>,
}

fn evolve(
    grid: &Grid1D,
    u0: impl Fn(f64) -> f64,
    t_final: f64,
    cfl: f64,
    viscosity: Option<Viscosity<'_>>,
) -> Result<BurgersField> {
    if !(cfl > 0.0 && cfl <= 0.9) {
        return Err(invalid!("cfl must lie in (0, 0.9], got {cfl}"));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(invalid!("final time must be non-negative, got {t_final}"));
    }
    let dx = grid.dx();
    let nx = grid.nx;
    let mut u = sample_initial(grid, u0)?;
    let (left_state, right_state) = (u[0], u[nx - 1]);
    let diffusive_dt = match &viscosity {
        Some(v) => {
            if !(v.eps > 0.0) {
                return Err(invalid!("viscosity must be positive, got {}", v.eps));
            }
            let dt = DIFFUSION_NUMBER * dx * dx / v.eps;
            if t_final / dt > MAX_STEPS as f64 {
                return Err(Error::Config(alloc::format!(
                    "viscosity {} needs a time step of {dt:e} on this grid; more than {MAX_STEPS} steps",
                    v.eps
                )));
            }
            dt
        }
        None => f64::INFINITY,
    };

    let mut flux = vec![0.0; nx + 1];
    let mut next = vec![0.0; nx];
    let mut t = 0.0;
    let mut steps = 0;
    while t < t_final {
        let speed = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let convective_dt = if speed > 0.0 { cfl * dx / speed } else { f64::INFINITY };
        // the combined explicit update stays monotone while lambda |u| + 2 mu <= 1
        let combined_dt = match &viscosity {
            Some(v) => 0.9 / (speed / dx + 2.0 * v.eps / (dx * dx)),
            None => f64::INFINITY,
        };
        let mut dt = convective_dt.min(diffusive_dt).min(combined_dt);
        if !dt.is_finite() || t + dt >= t_final {
            dt = t_final - t;
        }
        // flux[i] sits at the interface left of cell i; ghosts copy the end cells
        for i in 0..=nx {
            let ul = u[i.saturating_sub(1)];
            let ur = u[i.min(nx - 1)];
            flux[i] = godunov_flux(ul, ur);
        }
        let lambda = dt / dx;
        for i in 0..nx {
            next[i] = u[i] - lambda * (flux[i + 1] - flux[i]);
        }
        if let Some(v) = &viscosity {
            let mu = v.eps * dt / (dx * dx);
            let bias = v.theta.map(|th| th(t)).unwrap_or(0.0);
            for i in 0..nx {
                let ul = u[i.saturating_sub(1)];
                let ur = u[(i + 1).min(nx - 1)];
                next[i] += mu * (ur - 2.0 * u[i] + ul);
                if bias != 0.0 {
                    let ux = (ur - ul) / (2.0 * dx);
                    next[i] += v.eps * bias * dt * ux * ux;
                }
            }
        }
        core::mem::swap(&mut u, &mut next);
        t += dt;
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Config(alloc::format!("more than {MAX_STEPS} time steps")));
        }
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("u at cell {i}")));
    }
    let boundary_touched = (u[0] - left_state).abs() > 1e-12 || (u[nx - 1] - right_state).abs() > 1e-12;
    Ok(BurgersField { grid: *grid, time: t_final, values: u, boundary_touched, steps })
}

/// First-order Godunov scheme for `u_t + (u^2/2)_x = 0` with
/// `dt = cfl dx / max|u|` and constant extension at both ends.
pub fn godunov_burgers(grid: &Grid1D, u0: impl Fn(f64) -> f64, t_final: f64, cfl: f64) -> Result<BurgersField> {
    evolve(grid, u0, t_final, cfl, None)
}

/// Adds `eps u_xx` by centered differences to the Godunov update;
/// `dt` also obeys `eps dt / dx^2 <= 0.4` and keeps the update monotone.
pub fn viscous_burgers(
    grid: &Grid1D,
    u0: impl Fn(f64) -> f64,
    t_final: f64,
    eps: f64,
    cfl: f64,
) -> Result<BurgersField> {
    evolve(grid, u0, t_final, cfl, Some(Viscosity { eps, theta: None }))
}

/// `u_t + u u_x = eps (u_xx + theta(t) |u_x|^2)`. With `theta = 0` the
/// arithmetic is exactly that of [`viscous_burgers`].
pub fn biased_viscous_burgers(
    grid: &Grid1D,
    u0: impl Fn(f64) -> f64,
    t_final: f64,
    eps: f64,
    theta: &dyn Fn(f64) -> f64,
    cfl: f64,
) -> Result<BurgersField> {
    evolve(grid, u0, t_final, cfl, Some(Viscosity { eps, theta: Some(theta) }))
}

/// Interfaces whose jump exceeds `threshold * (max u - min u)`, grouped into
/// runs of adjacent interfaces; each run reports its steepest interface.
pub fn detect_shock(field: &BurgersField, threshold: f64) -> Vec<f64> {
    let (lo, hi) = field.min_max();
    let scale = hi - lo;
    if !(scale > 0.0) || !(threshold > 0.0) {
        return Vec::new();
    }
    let jumps: Vec<f64> = field.values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut shocks = Vec::new();
    let mut run: Option<usize> = None;
    for (i, &jump) in jumps.iter().enumerate() {
        if jump > threshold * scale {
            run = Some(match run {
                Some(best) if jumps[best] >= jump => best,
                _ => i,
            });
        } else if let Some(best) = run.take() {
            shocks.push(field.grid.interface(best));
        }
    }
    if let Some(best) = run {
        shocks.push(field.grid.interface(best));
    }
    shocks
}

/// Forward characteristics `x = y + t u0(y)` from the samples `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub pairs: Vec<(f64, f64)>,
    /// The map `y -> x` is not monotone on the (sorted) samples.
    pub crossing: bool,
}

pub fn characteristics(u0: impl Fn(f64) -> f64, ys: &[f64], t: f64) -> Result<Characteristics> {
    if !(t >= 0.0) {
        return Err(invalid!("time must be non-negative"));
    }
    let mut pairs: Vec<(f64, f64)> = ys.iter().map(|&y| (y, y + t * u0(y))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let crossing = pairs.windows(2).any(|w| w[1].1 < w[0].1);
    Ok(Characteristics { pairs, crossing })
}

/// Hopf–Lax value at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSample {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    /// All minimizers within `1e-8` of the value, sorted.
    pub minimizers: Vec<f64>,
    /// `(x - y*) / t`, present only when the minimizer is isolated by more
    /// than the multiplicity gap.
    pub gradient: Option<f64>,
    pub boundary_warning: bool,
}

/// `inf_y { |x - y|^2 / (2t) + G(delta_y) }` by a grid scan followed by
/// golden-section refinement of every local minimum.
pub fn hopf_lax_value<C: Coupling + ?Sized>(c: &C, t: f64, x: f64, scan: &Scan, gap: f64) -> Result<ValueSample> {
    if !(t > 0.0) {
        return Err(invalid!("Hopf–Lax needs t > 0, got {t}"));
    }
    scan.validate()?;
    let k = |y: f64| -> f64 {
        let m = EmpiricalMeasure::from_flat(vec![y], 1).expect("finite scan node");
        (x - y) * (x - y) / (2.0 * t) + c.value(&m)
    };
    // slope of the objective; locates the minimizer far below the sqrt(eps) floor of value comparisons
    let dk = |y: f64| -> f64 {
        let m = EmpiricalMeasure::from_flat(vec![y], 1).expect("finite scan node");
        (y - x) / t + c.grad_x_vec(&m, &[y])[0]
    };
    let values: Vec<f64> = (0..=scan.steps).map(|i| k(scan.node(i))).collect();
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    let mut boundary_warning = false;
    for i in 0..=scan.steps {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i == scan.steps { f64::INFINITY } else { values[i + 1] };
        if values[i] <= left && values[i] <= right {
            if i == 0 || i == scan.steps {
                boundary_warning = true;
            }
            let a = scan.node(i.saturating_sub(1));
            let b = scan.node((i + 1).min(scan.steps));
            let y = if dk(a) < 0.0 && dk(b) > 0.0 { bisect_slope(&dk, a, b) } else { golden_section(&k, a, b) };
            let (y, v) = if k(y) <= values[i] { (y, k(y)) } else { (scan.node(i), values[i]) };
            candidates.push((y, v));
        }
    }
    // merge candidates found from neighbouring nodes of a flat bottom
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for (y, v) in candidates {
        match clusters.last_mut() {
            Some(last) if (y - last.0).abs() <= 2.0 * scan.step() => {
                if v < last.1 {
                    *last = (y, v);
                }
            }
            _ => clusters.push((y, v)),
        }
    }
    let value = clusters.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let minimizers: Vec<f64> = clusters.iter().filter(|c| c.1 <= value + 1e-8).map(|c| c.0).collect();
    let rivals = clusters.iter().filter(|c| c.1 <= value + gap).count();
    let gradient = (rivals == 1).then(|| (x - minimizers[0]) / t);
    Ok(ValueSample { t, x, value, minimizers, gradient, boundary_warning })
}

fn bisect_slope(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 * (1.0 + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Settings for [`selection_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    /// Scan for both Hopf–Lax minimization and equilibrium enumeration.
    pub scan: Scan,
    pub grid: Grid1D,
    pub cfl: f64,
    pub eps_list: Vec<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub x: f64,
    pub hl_value: f64,
    pub hl_grad: Option<f64>,
    pub godunov_u: f64,
    /// One entry per viscosity, in the order of `eps_list`.
    pub viscous_u: Vec<f64>,
    pub equilibria: Vec<f64>,
    pub selected_y: Option<f64>,
    pub selected_velocity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    pub t: f64,
    pub eps_list: Vec<f64>,
    pub rows: Vec<SelectionRow>,
    pub godunov: BurgersField,
    pub viscous: Vec<BurgersField>,
}

fn one_player<C: Coupling + ?Sized>(c: &C, t: f64, x: f64, scan: &Scan) -> Result<Enumeration> {
    GameSpec::new(t, EmpiricalMeasure::from_flat(vec![x], 1)?, c)?.enumerate_equilibria_1d(scan)
}

/// The Burgers fields at time `t` (Godunov and one viscous run per `eps`)
/// against the Hopf–Lax gradient and the potential-selected equilibrium at
/// every `x`.
pub fn selection_compare<C: Coupling + ?Sized>(
    c: &C,
    t: f64,
    xs: &[f64],
    opts: &CompareOptions,
) -> Result<SelectionTable> {
    let u0 = initial_velocity(c);
    let godunov = godunov_burgers(&opts.grid, &u0, t, opts.cfl)?;
    let viscous = opts
        .eps_list
        .iter()
        .map(|&eps| viscous_burgers(&opts.grid, &u0, t, eps, opts.cfl))
        .collect::<Result<Vec<_>>>()?;
    let rows = xs.iter().map(|&x| selection_row(c, t, x, opts, &godunov, &viscous)).collect::<Result<Vec<_>>>()?;
    Ok(SelectionTable { t, eps_list: opts.eps_list.clone(), rows, godunov, viscous })
}

/// A single row of [`selection_compare`] against precomputed fields.
pub fn selection_row<C: Coupling + ?Sized>(
    c: &C,
    t: f64,
    x: f64,
    opts: &CompareOptions,
    godunov: &BurgersField,
    viscous: &[BurgersField],
) -> Result<SelectionRow> {
    let hl = hopf_lax_value(c, t, x, &opts.scan, opts.gap)?;
    let eq = one_player(c, t, x, &opts.scan)?;
    let selected = eq.selected(x).map(|r| r.y);
    Ok(SelectionRow {
        x,
        hl_value: hl.value,
        hl_grad: hl.gradient,
        godunov_u: godunov.sample(x),
        viscous_u: viscous.iter().map(|f| f.sample(x)).collect(),
        equilibria: eq.roots.iter().map(|r| r.y).collect(),
        selected_y: selected,
        selected_velocity: selected.map(|y| (x - y) / t),
    })
}

/// Points where the potential-selected equilibrium jumps between branches.
///
/// Consecutive sweep points whose selected roots jump by more than the
/// sweep can explain bracket a switch; it is then located by bisection on
/// the potential difference between the two competing branches (identified
/// by their rank among the sorted equilibria).
pub fn switch_points<C: Coupling + ?Sized>(c: &C, t: f64, xs: &[f64], scan: &Scan) -> Result<Vec<f64>> {
    let ranked = |x: f64| -> Result<(Enumeration, Option<usize>)> {
        let e = one_player(c, t, x, scan)?;
        let sel = e.selected(x).and_then(|s| e.roots.iter().position(|r| r.y == s.y));
        Ok((e, sel))
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, Enumeration, Option<usize>)> = None;
    for &x in xs {
        let (e, sel) = ranked(x)?;
        if let Some((px, pe, psel)) = &prev {
            if let (Some(a), Some(b)) = (*psel, sel) {
                let ya = pe.roots[a].y;
                let yb = e.roots[b].y;
                let jumped = (yb - ya).abs() > 10.0 * (x - px).abs() + 1e-6;
                if jumped && pe.roots.len() >= 2 && e.roots.len() >= 2 {
                    // competing branches by rank from the bottom (a) and top (b)
                    let from_top_b = e.roots.len() - 1 - b;
                    let diff = |z: f64| -> Result<Option<f64>> {
                        let (ez, _) = ranked(z)?;
                        let n = ez.roots.len();
                        if n < 2 || a >= n || from_top_b >= n {
                            return Ok(None);
                        }
                        Ok(Some(ez.roots[a].potential - ez.roots[n - 1 - from_top_b].potential))
                    };
                    // near-ties can put the jump one sweep step early or late
                    let h = (x - px).abs();
                    let found = match bisect_switch(&diff, *px, x)? {
                        Some(s) => Some(s),
                        None => bisect_switch(&diff, px - h, x + h)?,
                    };
                    if let Some(s) = found {
                        out.push(s);
                    }
                }
            }
        }
        prev = Some((x, e, sel));
    }
    Ok(out)
}

fn bisect_switch(diff: &impl Fn(f64) -> Result<Option<f64>>, mut lo: f64, mut hi: f64) -> Result<Option<f64>> {
    let (Some(mut dlo), Some(dhi)) = (diff(lo)?, diff(hi)?) else {
        return Ok(None);
    };
    if dlo == 0.0 {
        return Ok(Some(lo));
    }
    if dlo * dhi > 0.0 {
        return Ok(None);
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        match diff(mid)? {
            Some(0.0) => return Ok(Some(mid)),
            Some(d) if (d < 0.0) == (dlo < 0.0) => {
                lo = mid;
                dlo = d;
            }
            Some(_) => hi = mid,
            None => return Ok(None),
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
