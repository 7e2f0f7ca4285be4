//! Pointwise linear algebra for small complex matrices stored row-major in
//! flat slices. Hermitian eigendecompositions are delegated to nalgebra, and
//! the metric-aware helpers (h-Hermitian functional calculus) symmetrize
//! through H^{1/2} so every eigenproblem is flat-Hermitian.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::CoreError;
use crate::Result;

pub type CMat = Vec<Complex64>;

pub fn zeros(r: usize, c: usize) -> CMat {
    vec![Complex64::new(0.0, 0.0); r * c]
}

pub fn identity(r: usize) -> CMat {
    let mut m = zeros(r, r);
    for i in 0..r {
        m[i * r + i] = Complex64::new(1.0, 0.0);
    }
    m
}

/// C = A·B for an (ra×ca) by (ca×cb) pair, written into `out`.
pub fn matmul_into(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], ra: usize, ca: usize, cb: usize) {
    debug_assert_eq!(a.len(), ra * ca);
    debug_assert_eq!(b.len(), ca * cb);
    debug_assert_eq!(out.len(), ra * cb);
    for i in 0..ra {
        for j in 0..cb {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..ca {
                acc += a[i * ca + k] * b[k * cb + j];
            }
            out[i * cb + j] = acc;
        }
    }
}

pub fn matmul(a: &[Complex64], b: &[Complex64], ra: usize, ca: usize, cb: usize) -> CMat {
    let mut out = zeros(ra, cb);
    matmul_into(&mut out, a, b, ra, ca, cb);
    out
}

/// Conjugate transpose of an (r×c) matrix.
pub fn adjoint(a: &[Complex64], r: usize, c: usize) -> CMat {
    let mut out = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j].conj();
        }
    }
    out
}

/// Plain transpose of an (r×c) matrix.
pub fn transpose(a: &[Complex64], r: usize, c: usize) -> CMat {
    let mut out = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j];
        }
    }
    out
}

pub fn trace(a: &[Complex64], r: usize) -> Complex64 {
    (0..r).map(|i| a[i * r + i]).sum()
}

/// Frobenius norm.
pub fn fro_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian deviation |A − A*| in Frobenius norm.
pub fn hermitian_defect(a: &[Complex64], r: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..r {
        for j in 0..r {
            let d = a[i * r + j] - a[j * r + i].conj();
            acc += d.norm_sqr();
        }
    }
    acc.sqrt() * 0.5
}

/// (A + A*)/2.
pub fn hermitian_part(a: &[Complex64], r: usize) -> CMat {
    let mut out = zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            out[i * r + j] = (a[i * r + j] + a[j * r + i].conj()) * 0.5;
        }
    }
    out
}

fn to_dmatrix(a: &[Complex64], r: usize, c: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(r, c, |i, j| a[i * c + j])
}

fn from_dmatrix(m: &DMatrix<Complex64>) -> CMat {
    let (r, c) = m.shape();
    let mut out = zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
    out
}

/// Inverse of a small square matrix.
pub fn inverse(a: &[Complex64], r: usize) -> Result<CMat> {
    if r == 1 {
        let v = a[0];
        if v.norm() < 1e-300 {
            return Err(CoreError::Singular(v.norm()));
        }
        return Ok(vec![v.inv()]);
    }
    let m = to_dmatrix(a, r, r);
    match m.try_inverse() {
        Some(inv) => Ok(from_dmatrix(&inv)),
        None => Err(CoreError::Singular(0.0)),
    }
}

pub fn det(a: &[Complex64], r: usize) -> Complex64 {
    if r == 1 {
        return a[0];
    }
    to_dmatrix(a, r, r).determinant()
}

/// Eigendecomposition of a flat-Hermitian matrix: A = U diag(λ) U*.
/// Returns real eigenvalues (ascending) and the unitary U (columns).
pub fn hermitian_eig(a: &[Complex64], r: usize) -> (Vec<f64>, CMat) {
    if r == 1 {
        return (vec![a[0].re], identity(1));
    }
    let m = to_dmatrix(&hermitian_part(a, r), r, r);
    let se = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let mut vals = Vec::with_capacity(r);
    let mut vecs = zeros(r, r);
    for (col, &src) in order.iter().enumerate() {
        vals.push(se.eigenvalues[src]);
        for i in 0..r {
            vecs[i * r + col] = se.eigenvectors[(i, src)];
        }
    }
    (vals, vecs)
}

/// Apply a real function on the spectrum of a flat-Hermitian matrix.
pub fn hermitian_function(a: &[Complex64], r: usize, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, u) = hermitian_eig(a, r);
    let mut scaled = zeros(r, r);
    // scaled = U · diag(f(λ))
    for i in 0..r {
        for j in 0..r {
            scaled[i * r + j] = u[i * r + j] * f(vals[j]);
        }
    }
    let uh = adjoint(&u, r, r);
    matmul(&scaled, &uh, r, r, r)
}

/// Principal square root of a Hermitian positive definite matrix.
pub fn hermitian_sqrt(a: &[Complex64], r: usize) -> CMat {
    hermitian_function(a, r, |x| x.max(0.0).sqrt())
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt(a: &[Complex64], r: usize) -> CMat {
    hermitian_function(a, r, |x| 1.0 / x.max(1e-300).sqrt())
}

/// Smallest eigenvalue of a flat-Hermitian matrix.
pub fn min_eigenvalue(a: &[Complex64], r: usize) -> f64 {
    hermitian_eig(a, r).0[0]
}

/// Cholesky-type factor: returns T upper-triangular with A = T*·T for
/// Hermitian positive definite A.
pub fn cholesky_upper(a: &[Complex64], r: usize) -> Result<CMat> {
    let m = to_dmatrix(a, r, r);
    match m.cholesky() {
        Some(ch) => {
            // nalgebra returns lower L with A = L L*; T = L*.
            let l = ch.l();
            Ok(from_dmatrix(&l.adjoint()))
        }
        None => Err(CoreError::DegenerateMetric(min_eigenvalue(a, r))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_eig_of_complex_matrix() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        let (vals, u) = hermitian_eig(&a, 2);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // U unitary
        let uh = adjoint(&u, 2, 2);
        let prod = matmul(&uh, &u, 2, 2, 2);
        assert!(fro_norm(&sub(&prod, &identity(2))) < 1e-12);
        // reconstruction
        let mut d = zeros(2, 2);
        d[0] = c(vals[0], 0.0);
        d[3] = c(vals[1], 0.0);
        let rec = matmul(&matmul(&u, &d, 2, 2, 2), &uh, 2, 2, 2);
        assert!(fro_norm(&sub(&rec, &a)) < 1e-12);
    }

    fn sub(a: &[Complex64], b: &[Complex64]) -> CMat {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    #[test]
    fn exp_log_roundtrip() {
        let a = vec![c(0.4, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(-0.3, 0.0)];
        let e = hermitian_function(&a, 2, f64::exp);
        let back = hermitian_function(&e, 2, f64::ln);
        assert!(fro_norm(&sub(&back, &a)) < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![c(2.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(1.5, 0.0)];
        let t = cholesky_upper(&a, 2).unwrap();
        let th = adjoint(&t, 2, 2);
        let rec = matmul(&th, &t, 2, 2, 2);
        assert!(fro_norm(&sub(&rec, &a)) < 1e-12);
    }
}
