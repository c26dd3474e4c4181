//! Couplings: a potential `G` on measures, its linear derivative `g(m, x)`
//! and the spatial gradient `D_x g(m, x)`, which is also the Wasserstein
//! gradient of `G`.
//!
//! [`CouplingField`] carries only `g` and `D_x g`; [`Coupling`] adds the
//! potential itself. Fields that admit no potential (such as
//! [`SecondMomentTilt`]) implement only the former.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::measures::{integrate, DiscreteLaw, EmpiricalMeasure};

pub trait CouplingField: Send + Sync {
    fn label(&self) -> &str;

    /// `g(m, x)`.
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64;

    /// Writes `D_x g(m, x)` into `out` (overwriting it).
    fn grad_x(&self, m: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]);

    fn grad_x_vec(&self, m: &dyn DiscreteLaw, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.grad_x(m, x, &mut out);
        out
    }
}

pub trait Coupling: CouplingField {
    /// `G(m)`.
    fn value(&self, m: &dyn DiscreteLaw) -> f64;

    /// Extra starting configurations worth trying when minimizing the
    /// reduced potential from `initial` over horizon `horizon`.
    fn restart_hints(&self, _initial: &EmpiricalMeasure, _horizon: f64) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

impl<C: CouplingField + ?Sized> CouplingField for Box<C> {
    fn label(&self) -> &str {
        (**self).label()
    }
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        (**self).derivative(m, x)
    }
    fn grad_x(&self, m: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]) {
        (**self).grad_x(m, x, out)
    }
}

impl<C: CouplingField + ?Sized> CouplingField for &C {
    fn label(&self) -> &str {
        (**self).label()
    }
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        (**self).derivative(m, x)
    }
    fn grad_x(&self, m: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]) {
        (**self).grad_x(m, x, out)
    }
}

impl<C: Coupling + ?Sized> Coupling for &C {
    fn value(&self, m: &dyn DiscreteLaw) -> f64 {
        (**self).value(m)
    }
    fn restart_hints(&self, initial: &EmpiricalMeasure, horizon: f64) -> Vec<Vec<f64>> {
        (**self).restart_hints(initial, horizon)
    }
}

impl<C: Coupling + ?Sized> Coupling for Box<C> {
    fn value(&self, m: &dyn DiscreteLaw) -> f64 {
        (**self).value(m)
    }
    fn restart_hints(&self, initial: &EmpiricalMeasure, horizon: f64) -> Vec<Vec<f64>> {
        (**self).restart_hints(initial, horizon)
    }
}

/// A scalar function on R^d with its gradient.
pub trait Potential: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64], out: &mut [f64]);

    /// A candidate terminal point for an atom starting at `x`, if the
    /// potential knows where its basins are.
    fn restart_hint(&self, _x: &[f64], _horizon: f64) -> Option<Vec<f64>> {
        None
    }
}

/// `phi(x) = c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPotential(pub f64);

impl Potential for ConstantPotential {
    fn value(&self, _: &[f64]) -> f64 {
        self.0
    }
    fn grad(&self, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `phi(x) = (k/2) |x - c|^2 + (q/4) |x - c|^4`; an empty center means the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    pub stiffness: f64,
    pub quartic: f64,
    pub center: Vec<f64>,
}

impl QuadraticPotential {
    pub fn new(stiffness: f64) -> Self {
        Self { stiffness, quartic: 0.0, center: Vec::new() }
    }

    fn offset(&self, x: &[f64], k: usize) -> f64 {
        x[k] - self.center.get(k).copied().unwrap_or(0.0)
    }
}

impl Potential for QuadraticPotential {
    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = (0..x.len()).map(|k| self.offset(x, k)).map(|o| o * o).sum();
        0.5 * self.stiffness * r2 + 0.25 * self.quartic * r2 * r2
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let r2: f64 = (0..x.len()).map(|k| self.offset(x, k)).map(|o| o * o).sum();
        let s = self.stiffness + self.quartic * r2;
        for (k, o) in out.iter_mut().enumerate() {
            *o = s * self.offset(x, k);
        }
    }
}

/// The piecewise terminal cost with three-branch equilibria, applied to each
/// coordinate and summed:
///
/// ```text
/// phi(x) = x + 1/2     x <= -1
///        = -x^2 / 2    -1 <= x <= 0
///        = 0           x >= 0
/// ```
///
/// `phi'` is `1`, `-x`, `0` on the same pieces; the additive constant is
/// normalized by `phi(0) = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SelectionPotential;

impl SelectionPotential {
    pub fn phi(x: f64) -> f64 {
        if x <= -1.0 {
            x + 0.5
        } else if x <= 0.0 {
            -0.5 * x * x
        } else {
            0.0
        }
    }

    pub fn phi_prime(x: f64) -> f64 {
        if x <= -1.0 {
            1.0
        } else if x <= 0.0 {
            -x
        } else {
            0.0
        }
    }
}

impl Potential for SelectionPotential {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&c| Self::phi(c)).sum()
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, &c) in out.iter_mut().zip(x) {
            *o = Self::phi_prime(c);
        }
    }
    fn restart_hint(&self, x: &[f64], horizon: f64) -> Option<Vec<f64>> {
        // left branch of the equilibrium fan: y = x - T
        Some(x.iter().map(|c| c - horizon).collect())
    }
}

/// A potential given by a pair of closures.
pub struct FnPotential<V, G> {
    pub value: V,
    pub grad: G,
}

impl<V, G> Potential for FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
}

/// `G(m) = int phi dm`, so `g(m, x) = phi(x)` does not depend on `m`.
pub struct LinearCoupling<P> {
    pub potential: P,
    label: String,
}

impl<P: Potential> LinearCoupling<P> {
    pub fn new(potential: P, label: impl Into<String>) -> Self {
        Self { potential, label: label.into() }
    }
}

/// The coupling `G(m) = int phi dm` with the three-branch `phi` of
/// [`SelectionPotential`].
pub type SelectionExampleCoupling = LinearCoupling<SelectionPotential>;

pub fn selection_example() -> SelectionExampleCoupling {
    LinearCoupling::new(SelectionPotential, "selection")
}

pub fn constant(c: f64) -> LinearCoupling<ConstantPotential> {
    LinearCoupling::new(ConstantPotential(c), "constant")
}

impl<P: Potential> CouplingField for LinearCoupling<P> {
    fn label(&self) -> &str {
        &self.label
    }
    fn derivative(&self, _: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        self.potential.value(x)
    }
    fn grad_x(&self, _: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]) {
        self.potential.grad(x, out)
    }
}

impl<P: Potential> Coupling for LinearCoupling<P> {
    fn value(&self, m: &dyn DiscreteLaw) -> f64 {
        integrate(m, |p| self.potential.value(p))
    }
    fn restart_hints(&self, initial: &EmpiricalMeasure, horizon: f64) -> Vec<Vec<f64>> {
        let mut hint = Vec::with_capacity(initial.as_flat().len());
        for p in initial.points() {
            match self.potential.restart_hint(p, horizon) {
                Some(y) => hint.extend(y),
                None => return Vec::new(),
            }
        }
        vec![hint]
    }
}

/// An even interaction kernel `psi` on R^d.
pub trait Kernel: Send + Sync {
    fn value(&self, z: &[f64]) -> f64;
    fn grad(&self, z: &[f64], out: &mut [f64]);
}

/// `psi(z) = (a/2) |z|^2 + (b/4) |z|^4`. Convex (hence displacement monotone
/// as an interaction) whenever `a, b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialKernel {
    pub quadratic: f64,
    pub quartic: f64,
}

impl Kernel for PolynomialKernel {
    fn value(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|c| c * c).sum();
        0.5 * self.quadratic * r2 + 0.25 * self.quartic * r2 * r2
    }
    fn grad(&self, z: &[f64], out: &mut [f64]) {
        let r2: f64 = z.iter().map(|c| c * c).sum();
        let s = self.quadratic + self.quartic * r2;
        for (o, c) in out.iter_mut().zip(z) {
            *o = s * c;
        }
    }
}

/// `G(m) = (1/2) int int psi(x - y) dm dm`, `g(m, x) = int psi(x - y) dm(y)`.
pub struct InteractionCoupling<K> {
    pub kernel: K,
    label: String,
}

impl<K: Kernel> InteractionCoupling<K> {
    pub fn new(kernel: K, label: impl Into<String>) -> Self {
        Self { kernel, label: label.into() }
    }
}

/// Interaction with `psi(z) = k |z|^2 / 2`.
pub fn quadratic_interaction(k: f64) -> InteractionCoupling<PolynomialKernel> {
    InteractionCoupling::new(PolynomialKernel { quadratic: k, quartic: 0.0 }, "interaction")
}

impl<K: Kernel> CouplingField for InteractionCoupling<K> {
    fn label(&self) -> &str {
        &self.label
    }
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        let mut z = vec![0.0; x.len()];
        integrate(m, |y| {
            for ((zk, xk), yk) in z.iter_mut().zip(x).zip(y) {
                *zk = xk - yk;
            }
            self.kernel.value(&z)
        })
    }
    fn grad_x(&self, m: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut z = vec![0.0; x.len()];
        let mut gz = vec![0.0; x.len()];
        for i in 0..m.len() {
            let w = m.weight(i);
            for ((zk, xk), yk) in z.iter_mut().zip(x).zip(m.point(i)) {
                *zk = xk - yk;
            }
            self.kernel.grad(&z, &mut gz);
            for (o, g) in out.iter_mut().zip(&gz) {
                *o += w * g;
            }
        }
    }
}

impl<K: Kernel> Coupling for InteractionCoupling<K> {
    fn value(&self, m: &dyn DiscreteLaw) -> f64 {
        0.5 * integrate(m, |x| self.derivative(m, x))
    }
}

/// Pointwise sum of couplings.
pub struct SumCoupling {
    parts: Vec<Box<dyn Coupling>>,
    label: String,
}

impl SumCoupling {
    pub fn new(parts: Vec<Box<dyn Coupling>>) -> Self {
        let label = parts.iter().map(|p| p.label()).collect::<Vec<_>>().join("+");
        Self { parts, label }
    }

    pub fn with_label(mut self, label: impl ToString) -> Self {
        self.label = label.to_string();
        self
    }
}

impl CouplingField for SumCoupling {
    fn label(&self) -> &str {
        &self.label
    }
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.derivative(m, x)).sum()
    }
    fn grad_x(&self, m: &dyn DiscreteLaw, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut part = vec![0.0; x.len()];
        for p in &self.parts {
            p.grad_x(m, x, &mut part);
            for (o, g) in out.iter_mut().zip(&part) {
                *o += g;
            }
        }
    }
}

impl Coupling for SumCoupling {
    fn value(&self, m: &dyn DiscreteLaw) -> f64 {
        self.parts.iter().map(|p| p.value(m)).sum()
    }
    fn restart_hints(&self, initial: &EmpiricalMeasure, horizon: f64) -> Vec<Vec<f64>> {
        self.parts.iter().flat_map(|p| p.restart_hints(initial, horizon)).collect()
    }
}

/// `f(m, x) = (x_1 + ... + x_d) * int |y|^2 dm(y)`.
///
/// Its equilibrium field has a non-symmetric Jacobian, so no potential
/// exists; it is only a [`CouplingField`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondMomentTilt;

impl CouplingField for SecondMomentTilt {
    fn label(&self) -> &str {
        "second_moment_tilt"
    }
    fn derivative(&self, m: &dyn DiscreteLaw, x: &[f64]) -> f64 {
        let m2 = integrate(m, |y| y.iter().map(|c| c * c).sum());
        x.iter().sum::<f64>() * m2
    }
    fn grad_x(&self, m: &dyn DiscreteLaw, _: &[f64], out: &mut [f64]) {
        let m2 = integrate(m, |y| y.iter().map(|c| c * c).sum());
        out.fill(m2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_phi_is_continuous_at_breakpoints() {
        for b in [-1.0, 0.0] {
            for f in [SelectionPotential::phi, SelectionPotential::phi_prime] {
                let l = f(b - 1e-12);
                let r = f(b + 1e-12);
                assert!((l - r).abs() < 1e-11, "jump at {b}");
            }
        }
        assert_eq!(SelectionPotential::phi(0.0), 0.0);
        assert_eq!(SelectionPotential::phi(-1.6), -1.1);
        assert_eq!(SelectionPotential::phi_prime(-1.6), 1.0);
        assert_eq!(SelectionPotential::phi_prime(-0.4), 0.4);
        assert_eq!(SelectionPotential::phi_prime(0.4), 0.0);
    }

    #[test]
    fn interaction_matches_double_sum() {
        let m = EmpiricalMeasure::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        let c = quadratic_interaction(1.0);
        let mut brute = 0.0;
        for a in m.points() {
            for b in m.points() {
                brute += 0.5 * 0.5 * (a[0] - b[0]).powi(2) / 9.0;
            }
        }
        assert!((c.value(&m) - brute).abs() < 1e-14);
        // D_x g(m, x) = x - mean(m) for psi = z^2/2
        assert!((c.grad_x_vec(&m, &[2.0])[0] - (2.0 - 4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn sum_coupling_adds_parts() {
        let s = SumCoupling::new(vec![
            Box::new(quadratic_interaction(1.0)),
            Box::new(LinearCoupling::new(QuadraticPotential::new(2.0), "quad")),
        ]);
        let m = EmpiricalMeasure::from_scalars(&[0.0, 2.0]).unwrap();
        assert_eq!(s.label(), "interaction+quad");
        assert!((s.value(&m) - (0.5 + 2.0)).abs() < 1e-14);
        assert!((s.grad_x_vec(&m, &[2.0])[0] - (1.0 + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn selection_hint_is_left_branch() {
        let m = EmpiricalMeasure::from_scalars(&[0.4]).unwrap();
        let hints = selection_example().restart_hints(&m, 2.0);
        assert_eq!(hints, vec![vec![0.4 - 2.0]]);
    }
}
