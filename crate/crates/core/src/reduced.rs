//! The reduced terminal-cost game.
//!
//! With quadratic Lagrangian and no running cost, optimal paths are straight
//! lines and the game reduces to choosing terminal points `y` for the ordered
//! initial atoms `x`. The potential is
//!
//! ```text
//! K_n(y) = |x - y|^2 / (2 T n) + G(m_y)
//! ```
//!
//! and `y` is a Nash equilibrium iff `y_j + T D_x g(m_y, y_j) = x_j` for
//! every `j`, which is exactly `grad K_n(y) = 0` after scaling by `T n`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coupling::Coupling;
use crate::error::{invalid, Error, Result};
use crate::linalg::{block_max_norm, dist_sq, dot, norm, solve};
use crate::measures::{DiscreteLaw, EmpiricalMeasure};

/// Horizon, initial configuration and coupling of a reduced game.
pub struct GameSpec<C> {
    horizon: f64,
    initial: EmpiricalMeasure,
    pub coupling: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Potential,
    FixedPoint,
    FictitiousPlay,
    Enumeration,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Potential => "potential",
            Method::FixedPoint => "fixed_point",
            Method::FictitiousPlay => "fictitious_play",
            Method::Enumeration => "enumeration",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub terminal: EmpiricalMeasure,
    pub nash_residual: f64,
    pub potential_value: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop once `T n |grad K_n|` (block max norm) is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of extra starts drawn around `x` with Gaussian noise.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000, restarts: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference step for the Jacobian of `D_x g` in `y`.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    pub newton: NewtonOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, relaxation: 0.5, newton: NewtonOptions::default() }
    }
}

/// Grid used to bracket roots or minima on an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scan {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Scan {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo, hi, steps }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(invalid!("scan interval [{}, {}] is empty", self.lo, self.hi));
        }
        if self.steps < 2 {
            return Err(invalid!("scan needs at least 2 steps"));
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + (self.hi - self.lo) * i as f64 / self.steps as f64
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub y: f64,
    pub residual: f64,
    pub potential: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Sorted by `y`.
    pub roots: Vec<Root>,
    /// A root sits within one scan step of the interval ends.
    pub boundary_warning: bool,
}

impl Enumeration {
    /// The root with the lowest potential, ties going to the root closest to `x`.
    pub fn selected(&self, x: f64) -> Option<Root> {
        self.roots.iter().copied().reduce(|best, r| {
            if r.potential < best.potential - 1e-12
                || ((r.potential - best.potential).abs() <= 1e-12 && (r.y - x).abs() < (best.y - x).abs())
            {
                r
            } else {
                best
            }
        })
    }
}

impl<C: Coupling> GameSpec<C> {
    pub fn new(horizon: f64, initial: EmpiricalMeasure, coupling: C) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid!("horizon must be positive and finite, got {horizon}"));
        }
        Ok(Self { horizon, initial, coupling })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> &EmpiricalMeasure {
        &self.initial
    }

    fn check_shape(&self, y: &EmpiricalMeasure) -> Result<()> {
        if y.dim() != self.initial.dim() || y.count() != self.initial.count() {
            return Err(invalid!(
                "terminal configuration has {} points in R^{}, expected {} in R^{}",
                y.count(),
                y.dim(),
                self.initial.count(),
                self.initial.dim()
            ));
        }
        Ok(())
    }

    fn to_measure(&self, coords: Vec<f64>) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::from_flat(coords, self.initial.dim())
    }

    /// `K_n(y)`.
    pub fn potential(&self, y: &EmpiricalMeasure) -> Result<f64> {
        self.check_shape(y)?;
        Ok(self.potential_unchecked(y))
    }

    fn potential_unchecked(&self, y: &EmpiricalMeasure) -> f64 {
        let n = self.initial.count() as f64;
        let transport = dist_sq(self.initial.as_flat(), y.as_flat()) / (2.0 * self.horizon * n);
        transport + self.coupling.value(y)
    }

    /// Stacked `y_j + T D_x g(m_y, y_j) - x_j`.
    pub fn nash_defect(&self, y: &EmpiricalMeasure) -> Result<Vec<f64>> {
        self.check_shape(y)?;
        Ok(self.defect_unchecked(y))
    }

    fn defect_unchecked(&self, y: &EmpiricalMeasure) -> Vec<f64> {
        let d = self.initial.dim();
        let mut out = vec![0.0; y.as_flat().len()];
        let mut g = vec![0.0; d];
        for j in 0..y.count() {
            let yj = y.point(j);
            self.coupling.grad_x(y, yj, &mut g);
            let xj = self.initial.point(j);
            for k in 0..d {
                out[j * d + k] = yj[k] + self.horizon * g[k] - xj[k];
            }
        }
        out
    }

    /// `grad K_n(y)`, component `j` being `(y_j - x_j)/(T n) + D_x g(m_y, y_j)/n`.
    pub fn potential_gradient(&self, y: &EmpiricalMeasure) -> Result<Vec<f64>> {
        let scale = self.horizon * self.initial.count() as f64;
        Ok(self.nash_defect(y)?.into_iter().map(|r| r / scale).collect())
    }

    /// `max_j |y_j + T D_x g(m_y, y_j) - x_j|`.
    pub fn nash_residual(&self, y: &EmpiricalMeasure) -> Result<f64> {
        Ok(block_max_norm(&self.nash_defect(y)?, self.initial.dim()))
    }

    fn result(&self, y: EmpiricalMeasure, method: Method, iterations: usize, converged: bool) -> EquilibriumResult {
        let nash_residual = block_max_norm(&self.defect_unchecked(&y), self.initial.dim());
        let potential_value = self.potential_unchecked(&y);
        EquilibriumResult { terminal: y, nash_residual, potential_value, method, iterations, converged }
    }

    /// Gradient descent on `K_n` with Armijo backtracking from every start in
    /// `inits`, from `x`, from the coupling's hints and from `opts.restarts`
    /// noisy copies of `x`. Returns the run with the lowest potential.
    pub fn minimize_potential(&self, inits: &[Vec<f64>], opts: &MinimizeOptions) -> Result<EquilibriumResult> {
        if !(opts.tol > 0.0) {
            return Err(invalid!("tolerance must be positive"));
        }
        let x = self.initial.as_flat();
        let mut starts: Vec<Vec<f64>> = inits.to_vec();
        starts.push(x.to_vec());
        starts.extend(self.coupling.restart_hints(&self.initial, self.horizon));
        let spread = {
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let var = x.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / x.len() as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.restarts {
            let noise: Vec<f64> = x
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + spread * z
                })
                .collect();
            starts.push(noise);
        }

        let mut best: Option<EquilibriumResult> = None;
        for start in starts {
            let y0 = self.to_measure(start)?;
            self.check_shape(&y0)?;
            let run = self.descend(y0, opts)?;
            best = Some(match best {
                None => run,
                Some(b) => {
                    let dk = run.potential_value - b.potential_value;
                    let closer = dist_sq(run.terminal.as_flat(), x) < dist_sq(b.terminal.as_flat(), x);
                    if dk < -1e-12 || (dk.abs() <= 1e-12 && closer) {
                        run
                    } else {
                        b
                    }
                }
            });
        }
        Ok(best.expect("at least the initial configuration is tried"))
    }

    fn descend(&self, mut y: EmpiricalMeasure, opts: &MinimizeOptions) -> Result<EquilibriumResult> {
        const ARMIJO: f64 = 1e-4;
        const MEMORY: usize = 12;
        let d = self.initial.dim();
        // work with T n K_n, whose gradient is exactly the Nash defect
        let scale = self.horizon * self.initial.count() as f64;
        let mut k = scale * self.potential_unchecked(&y);
        let mut g = self.defect_unchecked(&y);
        let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(MEMORY);
        for iter in 0..opts.max_iter {
            if block_max_norm(&g, d) <= opts.tol {
                return Ok(self.result(y, Method::Potential, iter, true));
            }
            let mut dir = lbfgs_direction(&g, &history);
            let mut slope = dot(&dir, &g);
            if !(slope > 0.0) {
                history.clear();
                dir = g.clone();
                slope = dot(&g, &g);
            }
            let mut step = 1.0;
            let gnorm = norm(&g);
            let (trial, kt, gt) = loop {
                let trial: Vec<f64> = y.as_flat().iter().zip(&dir).map(|(a, b)| a - step * b).collect();
                let trial = self.to_measure(trial)?;
                let kt = scale * self.potential_unchecked(&trial);
                let predicted = ARMIJO * step * slope;
                if kt <= k - predicted {
                    let gt = self.defect_unchecked(&trial);
                    break (trial, kt, gt);
                }
                if predicted <= 64.0 * f64::EPSILON * (1.0 + k.abs()) {
                    // the decrease is below rounding of K; judge by the gradient instead
                    let gt = self.defect_unchecked(&trial);
                    if norm(&gt) < gnorm {
                        break (trial, kt, gt);
                    }
                }
                step *= 0.5;
                if step < 1e-20 {
                    if history.is_empty() {
                        // no further decrease representable
                        return Ok(self.result(y, Method::Potential, iter, false));
                    }
                    history.clear();
                    dir = g.clone();
                    slope = dot(&g, &g);
                    step = 1.0;
                }
            };
            let s: Vec<f64> = trial.as_flat().iter().zip(y.as_flat()).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &dg);
            if sy > 1e-14 * norm(&s) * norm(&dg) {
                if history.len() == MEMORY {
                    history.remove(0);
                }
                history.push((s, dg, 1.0 / sy));
            }
            y = trial;
            k = kt;
            g = gt;
        }
        let converged = block_max_norm(&g, d) <= opts.tol;
        Ok(self.result(y, Method::Potential, opts.max_iter, converged))
    }

    /// Solves `y + T D_x g(anticipated, y) = x_j` for every initial atom by
    /// damped Newton started at `x_j`.
    pub fn best_response(&self, anticipated: &dyn DiscreteLaw, opts: &NewtonOptions) -> Result<EmpiricalMeasure> {
        if anticipated.dim() != self.initial.dim() {
            return Err(invalid!(
                "anticipated measure lives in R^{}, game in R^{}",
                anticipated.dim(),
                self.initial.dim()
            ));
        }
        let mut coords = Vec::with_capacity(self.initial.as_flat().len());
        for (j, xj) in self.initial.points().enumerate() {
            coords.extend(self.respond_atom(anticipated, j, xj, opts)?);
        }
        self.to_measure(coords)
    }

    fn respond_atom(&self, m: &dyn DiscreteLaw, atom: usize, x: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>> {
        let d = x.len();
        let t = self.horizon;
        let residual = |y: &[f64]| -> Vec<f64> {
            let g = self.coupling.grad_x_vec(m, y);
            (0..d).map(|k| y[k] + t * g[k] - x[k]).collect()
        };
        let target = opts.tol * (1.0 + norm(x));
        let mut y = x.to_vec();
        let mut r = residual(&y);
        let mut rn = norm(&r);
        for _ in 0..opts.max_iter {
            if rn <= target {
                return Ok(y);
            }
            let mut jac = vec![0.0; d * d];
            let mut probe = y.clone();
            for col in 0..d {
                let h = opts.fd_step * (1.0 + y[col].abs());
                probe[col] = y[col] + h;
                let up = self.coupling.grad_x_vec(m, &probe);
                probe[col] = y[col] - h;
                let down = self.coupling.grad_x_vec(m, &probe);
                probe[col] = y[col];
                for row in 0..d {
                    jac[row * d + col] = t * (up[row] - down[row]) / (2.0 * h);
                }
                jac[col * d + col] += 1.0;
            }
            let delta = solve(jac, r.clone()).ok_or(Error::NewtonFailure { atom, residual: rn })?;
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, b)| a - step * b).collect();
                let rt = residual(&trial);
                let rtn = norm(&rt);
                if rtn < rn {
                    y = trial;
                    r = rt;
                    rn = rtn;
                    break;
                }
                step *= 0.5;
                if step < 1.0 / (1u64 << 20) as f64 {
                    return Err(Error::NewtonFailure { atom, residual: rn });
                }
            }
        }
        if rn <= target {
            Ok(y)
        } else {
            Err(Error::NewtonFailure { atom, residual: rn })
        }
    }

    /// Relaxed Picard iteration `y <- (1 - w) y + w BR(m_y)`.
    pub fn nash_fixed_point(&self, init: &EmpiricalMeasure, opts: &FixedPointOptions) -> Result<EquilibriumResult> {
        let w = opts.relaxation;
        if !(w > 0.0 && w <= 1.0) {
            return Err(invalid!("relaxation must lie in (0, 1], got {w}"));
        }
        self.check_shape(init)?;
        let mut y = init.clone();
        for iter in 1..=opts.max_iter {
            let br = self.best_response(&y, &opts.newton)?;
            let next: Vec<f64> = y.as_flat().iter().zip(br.as_flat()).map(|(a, b)| (1.0 - w) * a + w * b).collect();
            let moved = next.iter().zip(y.as_flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            y = self.to_measure(next)?;
            if moved <= opts.tol {
                return Ok(self.result(y, Method::FixedPoint, iter, true));
            }
        }
        Ok(self.result(y, Method::FixedPoint, opts.max_iter, false))
    }

    /// Round `k` best-responds to the pooled empirical measure of `init` and
    /// the `k - 1` previous responses. One result per round; `converged`
    /// flags rounds whose Nash residual is at most `tol`.
    pub fn fictitious_play(
        &self,
        init: &EmpiricalMeasure,
        rounds: usize,
        tol: f64,
        newton: &NewtonOptions,
    ) -> Result<Vec<EquilibriumResult>> {
        if rounds == 0 {
            return Err(invalid!("fictitious play needs at least one round"));
        }
        self.check_shape(init)?;
        let mut history = vec![init.clone()];
        let mut out = Vec::with_capacity(rounds);
        for round in 1..=rounds {
            let pooled = EmpiricalMeasure::pooled(history.iter())?;
            let y = self.best_response(&pooled, newton)?;
            let mut res = self.result(y.clone(), Method::FictitiousPlay, round, false);
            res.converged = res.nash_residual <= tol;
            out.push(res);
            history.push(y);
        }
        Ok(out)
    }

    /// All equilibria of a one-player, one-dimensional game: sign changes of
    /// `r(y) = y + T D_x g(delta_y, y) - x` on the scan grid, refined by
    /// bisection to `1e-10` and deduplicated within `1e-8`.
    pub fn enumerate_equilibria_1d(&self, scan: &Scan) -> Result<Enumeration> {
        if self.initial.count() != 1 || self.initial.dim() != 1 {
            return Err(invalid!("enumeration needs a single atom in one dimension"));
        }
        scan.validate()?;
        let x = self.initial.as_flat()[0];
        let t = self.horizon;
        let r = |y: f64| -> f64 {
            let m = EmpiricalMeasure::from_flat(vec![y], 1).expect("finite scan node");
            y + t * self.coupling.grad_x_vec(&m, &[y])[0] - x
        };
        let mut found: Vec<f64> = Vec::new();
        let mut prev = (scan.node(0), r(scan.node(0)));
        if prev.1 == 0.0 {
            found.push(prev.0);
        }
        for i in 1..=scan.steps {
            let y = scan.node(i);
            let ry = r(y);
            if ry == 0.0 {
                found.push(y);
            } else if prev.1 * ry < 0.0 {
                found.push(bisect(&r, prev.0, y, prev.1));
            }
            prev = (y, ry);
        }
        found.sort_by(f64::total_cmp);
        found.dedup_by(|a, b| (*a - *b).abs() <= 1e-8);
        let h = scan.step();
        let boundary_warning = found.iter().any(|&y| y - scan.lo < h || scan.hi - y < h);
        let roots = found
            .into_iter()
            .map(|y| {
                let m = EmpiricalMeasure::from_flat(vec![y], 1).expect("finite root");
                Root { y, residual: r(y).abs(), potential: self.potential_unchecked(&m) }
            })
            .collect();
        Ok(Enumeration { roots, boundary_warning })
    }
}

fn bisect(r: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut r_lo: f64) -> f64 {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let rm = r(mid);
        if rm == 0.0 {
            return mid;
        }
        if (rm < 0.0) == (r_lo < 0.0) {
            lo = mid;
            r_lo = rm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-loop recursion: approximates the inverse Hessian applied to `g`.
fn lbfgs_direction(g: &[f64], history: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; history.len()];
    for (i, (s, y, rho)) in history.iter().enumerate().rev() {
        alpha[i] = rho * dot(s, &q);
        for (qk, yk) in q.iter_mut().zip(y) {
            *qk -= alpha[i] * yk;
        }
    }
    if let Some((s, y, _)) = history.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qk in q.iter_mut() {
            *qk *= gamma;
        }
    }
    for (i, (s, y, rho)) in history.iter().enumerate() {
        let beta = rho * dot(y, &q);
        for (qk, sk) in q.iter_mut().zip(s) {
            *qk += (alpha[i] - beta) * sk;
        }
    }
    q
}
