//! Dense complex matrix helpers and the Liouville-space vectorization.
//!
//! Vectorization is column stacking: element `ρ[(m, n)]` of an `N×N` matrix
//! lives at index `m + n·N` of the Liouville vector. With this convention
//! `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Liouville index of `ρ[(row, col)]`.
#[inline]
pub fn liouville_index(row: usize, col: usize, n: usize) -> usize {
    row + col * n
}

/// Inverse of [`liouville_index`].
#[inline]
pub fn liouville_pair(index: usize, n: usize) -> (usize, usize) {
    (index % n, index / n)
}

pub fn vectorize(rho: &CMat) -> CVec {
    // nalgebra stores column-major, which is exactly column stacking.
    CVec::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    assert_eq!(v.len(), n * n, "Liouville vector has wrong length");
    CMat::from_column_slice(n, n, v.as_slice())
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Superoperator of `ρ ↦ A ρ`.
pub fn left_mul(a: &CMat) -> CMat {
    CMat::identity(a.nrows(), a.nrows()).kronecker(a)
}

/// Superoperator of `ρ ↦ ρ B`.
pub fn right_mul(b: &CMat) -> CMat {
    b.transpose().kronecker(&CMat::identity(b.nrows(), b.nrows()))
}

/// Superoperator of `ρ ↦ A ρ B`.
pub fn sandwich(a: &CMat, b: &CMat) -> CMat {
    b.transpose().kronecker(a)
}

/// Superoperator of `ρ ↦ [H, ρ]`.
pub fn commutator(h: &CMat) -> CMat {
    left_mul(h) - right_mul(h)
}

/// Superoperator of `ρ ↦ {H, ρ}`.
pub fn anticommutator(h: &CMat) -> CMat {
    left_mul(h) + right_mul(h)
}

pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Sorted eigenvalues of a Hermitian matrix (symmetrized before solving).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, seed: u64) -> CMat {
        CMat::from_fn(n, n, |i, j| {
            let x = (seed as f64 + 1.3 * i as f64 + 0.7 * j as f64).sin();
            let y = (seed as f64 * 0.5 + 0.9 * i as f64 - 1.1 * j as f64).cos();
            C64::new(x, y)
        })
    }

    #[test]
    fn index_map_is_column_stacking() {
        let n = 3;
        let rho = sample(n, 4);
        let v = vectorize(&rho);
        for r in 0..n {
            for c in 0..n {
                assert_eq!(v[liouville_index(r, c, n)], rho[(r, c)]);
                assert_eq!(liouville_pair(liouville_index(r, c, n), n), (r, c));
            }
        }
        assert_eq!(unvectorize(&v, n), rho);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let (a, b, rho) = (sample(3, 1), sample(3, 2), sample(3, 3));
        let direct = &a * &rho * &b;
        let via = unvectorize(&(sandwich(&a, &b) * vectorize(&rho)), 3);
        assert!(max_abs(&(direct - via)) < 1e-12);
        let comm = &a * &rho - &rho * &a;
        let via = unvectorize(&(commutator(&a) * vectorize(&rho)), 3);
        assert!(max_abs(&(comm - via)) < 1e-12);
    }
}
