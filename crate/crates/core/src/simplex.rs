//! Potential games on the probability simplex: the support-margin test for
//! Nash equilibria and a projected-gradient minimizer.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Per-support-index margins `min_i f_i(a) - f_j(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexReport {
    pub margins: Vec<(usize, f64)>,
    pub is_equilibrium: bool,
    pub potential: f64,
}

impl SimplexReport {
    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min)
    }
}

fn check_on_simplex(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(invalid!("empty mixed strategy"));
    }
    if let Some(j) = a.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid!("component {j} is negative or not finite"));
    }
    let s: f64 = a.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(invalid!("components sum to {s}, not 1"));
    }
    Ok(())
}

/// `a` is an equilibrium of the game with costs `f = grad F` iff every
/// strategy in its support (`a_j > tol`) is no worse than any other.
pub fn simplex_minimizer_is_equilibrium(
    potential: impl Fn(&[f64]) -> f64,
    costs: impl Fn(&[f64]) -> Vec<f64>,
    a: &[f64],
    tol: f64,
) -> Result<SimplexReport> {
    check_on_simplex(a)?;
    let f = costs(a);
    if f.len() != a.len() {
        return Err(invalid!("cost vector has length {} instead of {}", f.len(), a.len()));
    }
    let best = f.iter().copied().fold(f64::INFINITY, f64::min);
    let margins: Vec<(usize, f64)> =
        a.iter().enumerate().filter(|(_, &aj)| aj > tol).map(|(j, _)| (j, best - f[j])).collect();
    let is_equilibrium = margins.iter().all(|&(_, m)| m >= -tol);
    Ok(SimplexReport { margins, is_equilibrium, potential: potential(a) })
}

/// Euclidean projection onto the unit simplex (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projected gradient descent with fixed step `step` from the barycenter.
pub fn minimize_on_simplex(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    step: f64,
    max_iter: usize,
    tol: f64,
) -> Vec<f64> {
    let mut a = alloc::vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let g = grad(&a);
        let trial: Vec<f64> = a.iter().zip(&g).map(|(x, gx)| x - step * gx).collect();
        let next = project_to_simplex(&trial);
        let moved = next.iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        a = next;
        if moved <= tol {
            break;
        }
    }
    a
}
