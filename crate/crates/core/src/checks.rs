//! Structural checks on couplings: linear-derivative consistency, the
//! finite-dimensional gradient identity, displacement and Lasry–Lions
//! monotonicity, and symmetry of the equilibrium field.
//!
//! The monotonicity and symmetry checks sample; a negative result is a
//! constructive violation, a non-negative one only means none was found.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::coupling::{Coupling, CouplingField};
use crate::linalg::dot;
use crate::measures::{integrate, DiscreteLaw, EmpiricalMeasure, Mixture};

pub const DEFAULT_QUAD_ORDER: usize = 8;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order.max(1);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(z) and P_n'(z) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn_1) / (z * z - 1.0);
            let step = pn / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - z));
        weights.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (nodes, weights)
}

/// `|G(m1) - G(m0) - int_0^1 int g(m_l, x) d(m1 - m0)(x) dl|` with
/// `m_l = (1 - l) m0 + l m1`, the `l`-integral by Gauss–Legendre.
pub fn check_linear_derivative<C: Coupling + ?Sized>(
    c: &C,
    m0: &dyn DiscreteLaw,
    m1: &dyn DiscreteLaw,
    quad_order: usize,
) -> f64 {
    let (nodes, weights) = gauss_legendre(quad_order);
    let line: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&lambda, &w)| {
            let mix = Mixture { a: m0, b: m1, lambda };
            let on1 = integrate(m1, |x| c.derivative(&mix, x));
            let on0 = integrate(m0, |x| c.derivative(&mix, x));
            w * (on1 - on0)
        })
        .sum();
    (c.value(m1) - c.value(m0) - line).abs()
}

/// Compares central differences of `x -> G(m_x)` with `(1/n) D_x g(m_x, x_j)`
/// and returns the worst error, relative to `max(1, |analytic|)`.
pub fn check_finite_dim_gradient<C: Coupling + ?Sized>(c: &C, x: &EmpiricalMeasure, h: f64) -> f64 {
    let n = x.count();
    let d = x.dim();
    let mut worst = 0.0f64;
    let mut coords = x.as_flat().to_vec();
    for j in 0..n {
        let analytic = c.grad_x_vec(x, x.point(j));
        for (k, a) in analytic.iter().enumerate() {
            let idx = j * d + k;
            let orig = coords[idx];
            coords[idx] = orig + h;
            let up = c.value(&measure(&coords, d));
            coords[idx] = orig - h;
            let down = c.value(&measure(&coords, d));
            coords[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = a / n as f64;
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
    }
    worst
}

fn measure(coords: &[f64], d: usize) -> EmpiricalMeasure {
    EmpiricalMeasure::from_flat(coords.to_vec(), d).expect("perturbed coordinates stay finite")
}

/// `(1/n) sum_j (D_x g(m_X, x_j) - D_x g(m_Y, y_j)) . (x_j - y_j)` for one
/// ordered pair of configurations.
pub fn displacement_pairing<C: CouplingField + ?Sized>(c: &C, x: &EmpiricalMeasure, y: &EmpiricalMeasure) -> f64 {
    let n = x.count();
    let mut total = 0.0;
    for j in 0..n {
        let gx = c.grad_x_vec(x, x.point(j));
        let gy = c.grad_x_vec(y, y.point(j));
        let diff: Vec<f64> = x.point(j).iter().zip(y.point(j)).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
        total += dot(&dg, &diff);
    }
    total / n as f64
}

/// Minimum of [`displacement_pairing`] over `pairs`; `+inf` for no pairs.
pub fn check_displacement_monotone<C: CouplingField + ?Sized>(
    c: &C,
    pairs: &[(EmpiricalMeasure, EmpiricalMeasure)],
) -> f64 {
    pairs.iter().map(|(x, y)| displacement_pairing(c, x, y)).fold(f64::INFINITY, f64::min)
}

/// `count` pairs of standard-normal configurations of `n` points in R^d,
/// scaled by `scale`.
pub fn sample_pairs(
    n: usize,
    d: usize,
    count: usize,
    scale: f64,
    seed: u64,
) -> Vec<(EmpiricalMeasure, EmpiricalMeasure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let coords = (0..n * d)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect::<Vec<f64>>();
        EmpiricalMeasure::from_flat(coords, d).expect("gaussian samples are finite")
    };
    (0..count).map(|_| (draw(&mut rng), draw(&mut rng))).collect()
}

/// `int (f(m1, x) - f(m2, x)) d(m1 - m2)(x)`, symmetric in its arguments.
pub fn check_ll_monotone<C: CouplingField + ?Sized>(c: &C, m1: &EmpiricalMeasure, m2: &EmpiricalMeasure) -> f64 {
    let diff = |x: &[f64]| c.derivative(m1, x) - c.derivative(m2, x);
    integrate(m1, diff) - integrate(m2, diff)
}

/// The equilibrium field `u_j(x) = D_x g(m_x, x_j)` of a coupling.
pub fn equilibrium_field<C: CouplingField + ?Sized>(c: &C) -> impl Fn(&EmpiricalMeasure, usize) -> Vec<f64> + '_ {
    move |m, j| c.grad_x_vec(m, m.point(j))
}

/// Builds the `nd x nd` Jacobian of the stacked field by central differences
/// and returns `max |J_ab - J_ba|`.
pub fn check_potentializable(
    field: impl Fn(&EmpiricalMeasure, usize) -> Vec<f64>,
    x: &EmpiricalMeasure,
    h: f64,
) -> f64 {
    let n = x.count();
    let d = x.dim();
    let nd = n * d;
    let mut jac = vec![0.0; nd * nd];
    let mut coords = x.as_flat().to_vec();
    let stacked = |coords: &[f64]| -> Vec<f64> {
        let m = measure(coords, d);
        (0..n).flat_map(|j| field(&m, j)).collect()
    };
    for b in 0..nd {
        let orig = coords[b];
        coords[b] = orig + h;
        let up = stacked(&coords);
        coords[b] = orig - h;
        let down = stacked(&coords);
        coords[b] = orig;
        for a in 0..nd {
            jac[a * nd + b] = (up[a] - down[a]) / (2.0 * h);
        }
    }
    let mut worst = 0.0f64;
    for a in 0..nd {
        for b in a + 1..nd {
            worst = worst.max((jac[a * nd + b] - jac[b * nd + a]).abs());
        }
    }
    worst
}
