//! Uniform empirical measures on R^d and quadratic Wasserstein distances
//! between them.
//!
//! An [`EmpiricalMeasure`] keeps its points in order. The order is what lets
//! the same value double as a lifted configuration `(x_1, ..., x_n)`; anything
//! computed at the level of the law must not depend on it.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::dist_sq;

/// A finitely supported, weighted collection of points. Couplings are
/// evaluated against this trait so that mixtures of empirical measures can
/// be handled without materializing them.
pub trait DiscreteLaw {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn weight(&self, i: usize) -> f64;
    fn point(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `sum_i w_i h(x_i)`.
pub fn integrate(m: &dyn DiscreteLaw, mut h: impl FnMut(&[f64]) -> f64) -> f64 {
    (0..m.len()).map(|i| m.weight(i) * h(m.point(i))).sum()
}

/// `n` equally weighted points in R^d, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    coords: Vec<f64>,
    dim: usize,
}

impl EmpiricalMeasure {
    /// Builds a measure from a flat row-major coordinate buffer.
    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid!("dimension must be positive"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(invalid!(
                "{} coordinates do not form a non-empty set of {dim}-dimensional points",
                coords.len()
            ));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(invalid!("coordinate {i} is not finite"));
        }
        Ok(Self { coords, dim })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        if let Some(j) = points.iter().position(|p| p.as_ref().len() != dim) {
            return Err(invalid!("point {j} does not have dimension {dim}"));
        }
        let coords = points.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
        Self::from_flat(coords, dim)
    }

    /// One-dimensional measure from scalar atoms.
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        Self::from_flat(xs.to_vec(), 1)
    }

    pub fn count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinates, i.e. the lifted vector in (R^d)^n.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    /// Applies `map` to every point, keeping order and count.
    pub fn push_forward(&self, mut map: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len());
        for (j, p) in self.points().enumerate() {
            let image = map(p);
            if image.len() != self.dim {
                return Err(invalid!("map sent point {j} to dimension {} instead of {}", image.len(), self.dim));
            }
            if image.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("image of point {j}")));
            }
            coords.extend_from_slice(&image);
        }
        Ok(Self { coords, dim: self.dim })
    }

    /// `(1/n) sum_j |x_j|^2`.
    pub fn second_moment(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>() / self.count() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for p in self.points() {
            for (acc, c) in m.iter_mut().zip(p) {
                *acc += c;
            }
        }
        let n = self.count() as f64;
        m.iter_mut().for_each(|c| *c /= n);
        m
    }

    /// Concatenation of several measures of equal dimension, each atom
    /// keeping weight `1 / total count`.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a EmpiricalMeasure>) -> Result<Self> {
        let mut coords = Vec::new();
        let mut dim = None;
        for m in parts {
            match dim {
                None => dim = Some(m.dim),
                Some(d) if d != m.dim => return Err(invalid!("pooled measures differ in dimension")),
                _ => {}
            }
            coords.extend_from_slice(&m.coords);
        }
        Self::from_flat(coords, dim.ok_or_else(|| invalid!("nothing to pool"))?)
    }
}

impl DiscreteLaw for EmpiricalMeasure {
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.count()
    }
    fn weight(&self, _: usize) -> f64 {
        1.0 / self.count() as f64
    }
    fn point(&self, i: usize) -> &[f64] {
        EmpiricalMeasure::point(self, i)
    }
}

/// The mixture `(1 - lambda) a + lambda b`, realized as a weighted union.
pub struct Mixture<'a> {
    pub a: &'a dyn DiscreteLaw,
    pub b: &'a dyn DiscreteLaw,
    pub lambda: f64,
}

impl DiscreteLaw for Mixture<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn len(&self) -> usize {
        self.a.len() + self.b.len()
    }
    fn weight(&self, i: usize) -> f64 {
        let na = self.a.len();
        if i < na {
            (1.0 - self.lambda) * self.a.weight(i)
        } else {
            self.lambda * self.b.weight(i - na)
        }
    }
    fn point(&self, i: usize) -> &[f64] {
        let na = self.a.len();
        if i < na {
            self.a.point(i)
        } else {
            self.b.point(i - na)
        }
    }
}

fn check_same_shape(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<()> {
    if mu.dim != nu.dim {
        return Err(invalid!("dimension mismatch: {} vs {}", mu.dim, nu.dim));
    }
    if mu.count() != nu.count() {
        return Err(invalid!("point count mismatch: {} vs {}", mu.count(), nu.count()));
    }
    Ok(())
}

/// W_2 between two one-dimensional measures with the same number of atoms,
/// via the monotone (sorted) matching.
pub fn w2_sorted_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_same_shape(mu, nu)?;
    if mu.dim != 1 {
        return Err(invalid!("sorted W2 needs one-dimensional measures, got d = {}", mu.dim));
    }
    let mut a = mu.coords.clone();
    let mut b = nu.coords.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    Ok((a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt())
}

/// W_2 between two uniform measures with the same number of atoms. The
/// optimal coupling is a permutation, found by the Hungarian method on the
/// squared-distance cost matrix.
pub fn w2_assignment(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_same_shape(mu, nu)?;
    let n = mu.count();
    let cost: Vec<f64> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| dist_sq(mu.point(i), nu.point(j))).collect();
    let sigma = min_cost_assignment(&cost, n);
    let total: f64 = sigma.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).max(0.0).sqrt())
}

/// Minimum-cost perfect matching on a dense `n x n` row-major cost matrix.
/// Returns `sigma` with row `i` assigned to column `sigma[i]`.
///
/// Shortest augmenting paths with row/column potentials, O(n^3).
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    // 1-based arrays; index 0 is the virtual root of each augmenting path.
    let mut u = alloc::vec![0.0f64; n + 1];
    let mut v = alloc::vec![0.0f64; n + 1];
    let mut col_owner = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = alloc::vec![f64::INFINITY; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = alloc::vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            sigma[col_owner[j] - 1] = j - 1;
        }
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m1(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_scalars(xs).unwrap()
    }

    #[test]
    fn sorted_w2_examples() {
        assert_eq!(w2_sorted_1d(&m1(&[0.0, 1.0]), &m1(&[1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(w2_sorted_1d(&m1(&[0.0, 2.0]), &m1(&[1.0, 1.0])).unwrap(), 1.0);
        let m = m1(&[0.3, -2.0, 7.5]);
        assert_eq!(w2_sorted_1d(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn sorted_w2_rejects_bad_shapes() {
        let a = EmpiricalMeasure::from_points(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(w2_sorted_1d(&a, &a), Err(Error::InvalidInput(_))));
        assert!(w2_sorted_1d(&m1(&[0.0]), &m1(&[0.0, 1.0])).is_err());
        assert!(w2_assignment(&m1(&[0.0]), &m1(&[0.0, 1.0])).is_err());
        assert!(w2_assignment(&a, &m1(&[0.0])).is_err());
    }

    #[test]
    fn assignment_handles_crossing_pairs() {
        let mu = EmpiricalMeasure::from_points(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let nu = EmpiricalMeasure::from_points(&[[1.0, 0.1], [0.0, 0.1]]).unwrap();
        assert!((w2_assignment(&mu, &nu).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(w2_assignment(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn push_forward_examples() {
        let m = m1(&[1.0, 2.0]);
        assert_eq!(m.push_forward(|p| p.to_vec()).unwrap(), m);
        assert_eq!(m.push_forward(|p| vec![2.0 * p[0]]).unwrap(), m1(&[2.0, 4.0]));
        let shifted = m.push_forward(|p| vec![p[0] - 3.5]).unwrap();
        assert!((w2_assignment(&m, &shifted).unwrap() - 3.5).abs() < 1e-15);
        assert!(matches!(m.push_forward(|p| vec![p[0] / 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn second_moment_examples() {
        assert_eq!(m1(&[0.0]).second_moment(), 0.0);
        assert_eq!(m1(&[1.0, -1.0]).second_moment(), 1.0);
        assert_eq!(m1(&[3.0, 4.0]).second_moment(), 12.5);
    }

    #[test]
    fn rejects_degenerate_construction() {
        assert!(EmpiricalMeasure::from_flat(vec![], 1).is_err());
        assert!(EmpiricalMeasure::from_flat(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(EmpiricalMeasure::from_flat(vec![f64::NAN], 1).is_err());
        assert!(EmpiricalMeasure::from_points(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn mixture_weights_sum_to_one() {
        let a = m1(&[0.0, 1.0, 2.0]);
        let b = m1(&[5.0]);
        let mix = Mixture { a: &a, b: &b, lambda: 0.25 };
        let total: f64 = (0..mix.len()).map(|i| mix.weight(i)).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert_eq!(mix.point(3), &[5.0]);
        assert!((integrate(&mix, |p| p[0]) - (0.75 * 1.0 + 0.25 * 5.0)).abs() < 1e-15);
    }
}
