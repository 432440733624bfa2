//! Thin helpers over `nalgebra` for the dense Hermitian work done here.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::{CMatrix, C64};

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Only the Hermitian part `(m + m†)/2` is decomposed.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let sym = hermitian_part(m);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// `max |m - m†|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Entrywise max-norm of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Rotate a vector's global phase so its largest-magnitude component is real
/// and positive. Ties resolve to the lowest index.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, z) in v.iter().enumerate() {
        let n = z.norm();
        if n > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = n;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_norm;
    for z in v.iter_mut() {
        *z *= phase;
    }
}

/// Apply [`fix_phase`] to every column.
pub fn fix_column_phases(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let mut buf: Vec<C64> = col.iter().copied().collect();
        fix_phase(&mut buf);
        for (dst, src) in col.iter_mut().zip(buf) {
            *dst = src;
        }
    }
}

/// Allowed momenta `2πn/len`, `n = 0..len`, of a periodic ring.
pub fn momenta(len: usize) -> Vec<f64> {
    (0..len).map(|n| 2.0 * PI * n as f64 / len as f64).collect()
}

/// `e^{-i θ}`.
#[inline]
pub fn phase(theta: f64) -> C64 {
    C64::from_polar(1.0, -theta)
}

/// Determinant by LU; `1` for the empty matrix.
pub fn determinant(m: &CMatrix) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

pub fn column(m: &CMatrix, c: usize) -> DVector<C64> {
    m.column(c).into_owned()
}
