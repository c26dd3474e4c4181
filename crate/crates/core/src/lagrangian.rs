//! Discrete path measures: uniformly weighted piecewise-linear curves on a
//! shared time grid, their kinetic action, time marginals, the individual
//! cost `J(eta, gamma)` and the potential `J(eta)` for the terminal-cost game,
//! and a sampling check of the Nash property on the support of `eta`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coupling::Coupling;
use crate::error::{invalid, Result};
use crate::linalg::dist_sq;
use crate::measures::EmpiricalMeasure;

pub const DEFAULT_SEGMENTS: usize = 16;

/// A piecewise-linear curve through `points[k]` at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAtom {
    times: Vec<f64>,
    points: Vec<f64>,
    dim: usize,
}

impl PathAtom {
    /// `times` must increase strictly from `0`; `points` holds one
    /// `dim`-vector per knot, row-major.
    pub fn new(times: Vec<f64>, points: Vec<f64>, dim: usize) -> Result<Self> {
        if times.len() < 2 {
            return Err(invalid!("a path needs at least two knots"));
        }
        if times[0] != 0.0 {
            return Err(invalid!("paths start at t = 0, got {}", times[0]));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times[times.len() - 1].is_finite() {
            return Err(invalid!("knot times must increase strictly"));
        }
        if dim == 0 || points.len() != times.len() * dim {
            return Err(invalid!("{} coordinates for {} knots in R^{dim}", points.len(), times.len()));
        }
        if points.iter().any(|c| !c.is_finite()) {
            return Err(invalid!("path coordinates must be finite"));
        }
        Ok(Self { times, points, dim })
    }

    /// `gamma(t) = x + (t / T)(y - x)` sampled on `segments` uniform steps.
    pub fn straight(x: &[f64], y: &[f64], horizon: f64, segments: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid!("endpoints have different dimensions"));
        }
        if segments == 0 {
            return Err(invalid!("need at least one segment"));
        }
        let times: Vec<f64> = (0..=segments).map(|k| horizon * k as f64 / segments as f64).collect();
        let mut points = Vec::with_capacity(times.len() * x.len());
        for k in 0..=segments {
            let s = k as f64 / segments as f64;
            points.extend(x.iter().zip(y).map(|(a, b)| a + s * (b - a)));
        }
        Self::new(times, points, x.len())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn knot_count(&self) -> usize {
        self.times.len()
    }

    pub fn knot(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start(&self) -> &[f64] {
        self.knot(0)
    }

    pub fn end(&self) -> &[f64] {
        self.knot(self.knot_count() - 1)
    }

    /// `sum_k |gamma_{k+1} - gamma_k|^2 / (2 (t_{k+1} - t_k))`, the exact
    /// kinetic action of the piecewise-linear curve.
    pub fn action(&self) -> f64 {
        (0..self.knot_count() - 1)
            .map(|k| dist_sq(self.knot(k + 1), self.knot(k)) / (2.0 * (self.times[k + 1] - self.times[k])))
            .sum()
    }

    /// Linear interpolation at `t`; `None` outside `[0, T]`.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return None;
        }
        let k = match self.times.iter().position(|&s| s >= t) {
            Some(0) => return Some(self.start().to_vec()),
            Some(k) => k,
            None => return Some(self.end().to_vec()),
        };
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        Some(self.knot(k - 1).iter().zip(self.knot(k)).map(|(a, b)| a + s * (b - a)).collect())
    }
}

/// Kinetic action of a path atom.
pub fn path_action(p: &PathAtom) -> f64 {
    p.action()
}

/// Uniformly weighted path atoms sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure {
    atoms: Vec<PathAtom>,
}

impl PathMeasure {
    pub fn new(atoms: Vec<PathAtom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| invalid!("a path measure needs at least one atom"))?;
        if let Some(j) = atoms.iter().position(|a| a.times != first.times || a.dim != first.dim) {
            return Err(invalid!("atom {j} does not share the grid and dimension of atom 0"));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[PathAtom] {
        &self.atoms
    }

    pub fn horizon(&self) -> f64 {
        self.atoms[0].horizon()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim
    }

    pub fn times(&self) -> &[f64] {
        &self.atoms[0].times
    }

    /// Law of `gamma(t)` under the path measure.
    pub fn marginal_at(&self, t: f64) -> Result<EmpiricalMeasure> {
        let mut coords = Vec::with_capacity(self.atoms.len() * self.dim());
        for a in &self.atoms {
            coords.extend(a.at(t).ok_or_else(|| invalid!("time {t} is outside [0, {}]", self.horizon()))?);
        }
        EmpiricalMeasure::from_flat(coords, self.dim())
    }

    pub fn terminal(&self) -> EmpiricalMeasure {
        self.marginal_at(self.horizon()).expect("the horizon is on the grid")
    }

    pub fn mean_action(&self) -> f64 {
        self.atoms.iter().map(PathAtom::action).sum::<f64>() / self.atoms.len() as f64
    }
}

/// Atom `j` runs straight from `x_j` to `y_j` over `[0, T]`.
pub fn straight_line_lift(
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    horizon: f64,
    segments: usize,
) -> Result<PathMeasure> {
    if x.count() != y.count() || x.dim() != y.dim() {
        return Err(invalid!("endpoint configurations differ in shape"));
    }
    if !(horizon > 0.0) {
        return Err(invalid!("horizon must be positive"));
    }
    let atoms = x
        .points()
        .zip(y.points())
        .map(|(a, b)| PathAtom::straight(a, b, horizon, segments))
        .collect::<Result<Vec<_>>>()?;
    PathMeasure::new(atoms)
}

/// `J(eta, gamma) = action(gamma) + g(m^eta(T), gamma(T))`.
pub fn individual_cost<C: Coupling + ?Sized>(eta: &PathMeasure, path: &PathAtom, coupling: &C) -> Result<f64> {
    if path.dim != eta.dim() {
        return Err(invalid!("path lives in R^{}, measure in R^{}", path.dim, eta.dim()));
    }
    Ok(individual_cost_given(&eta.terminal(), path, coupling))
}

fn individual_cost_given<C: Coupling + ?Sized>(terminal: &EmpiricalMeasure, path: &PathAtom, coupling: &C) -> f64 {
    path.action() + coupling.derivative(terminal, path.end())
}

/// Mean action plus `G(m^eta(T))`.
pub fn potential_functional<C: Coupling + ?Sized>(eta: &PathMeasure, coupling: &C) -> f64 {
    eta.mean_action() + coupling.value(&eta.terminal())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    /// Per atom, the smallest `J(eta, gamma') - J(eta, gamma*)` seen.
    pub min_margins: Vec<f64>,
    pub trials: usize,
}

impl SupportReport {
    pub fn worst(&self) -> f64 {
        self.min_margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `true` when no sampled deviation beat its atom by more than `tol`.
    pub fn no_violation(&self, tol: f64) -> bool {
        self.worst() >= -tol
    }
}

/// Compares each atom against `trials` deviations with the same start.
/// A deviation adds `amplitude * (s z_end + sin(pi s) z_mid)` at `s = t / T`
/// with independent standard normal vectors `z_end, z_mid`: the start stays
/// put, the terminal point is free and the interior bends. `eta` itself is
/// held fixed, since a single deviating player does not move the crowd.
pub fn verify_equilibrium_support<C: Coupling + ?Sized>(
    eta: &PathMeasure,
    coupling: &C,
    trials: usize,
    amplitude: f64,
    seed: u64,
) -> Result<SupportReport> {
    if trials == 0 {
        return Err(invalid!("need at least one trial"));
    }
    if !(amplitude > 0.0) {
        return Err(invalid!("amplitude must be positive"));
    }
    let terminal = eta.terminal();
    let horizon = eta.horizon();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_margins = Vec::with_capacity(eta.atoms.len());
    for atom in &eta.atoms {
        let base = individual_cost_given(&terminal, atom, coupling);
        let mut worst = f64::INFINITY;
        let mut points = vec![0.0; atom.points.len()];
        let mut z_end = vec![0.0; atom.dim];
        let mut z_mid = vec![0.0; atom.dim];
        for _ in 0..trials {
            for z in z_end.iter_mut().chain(z_mid.iter_mut()) {
                *z = StandardNormal.sample(&mut rng);
            }
            for (k, &t) in atom.times.iter().enumerate() {
                let s = t / horizon;
                let bump = (PI * s).sin();
                for c in 0..atom.dim {
                    let shift = amplitude * (s * z_end[c] + bump * z_mid[c]);
                    points[k * atom.dim + c] = atom.points[k * atom.dim + c] + shift;
                }
            }
            let deviation = PathAtom { times: atom.times.clone(), points: points.clone(), dim: atom.dim };
            worst = worst.min(individual_cost_given(&terminal, &deviation, coupling) - base);
        }
        min_margins.push(worst);
    }
    Ok(SupportReport { min_margins, trials })
}
