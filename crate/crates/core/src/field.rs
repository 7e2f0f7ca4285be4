//! Grids of r×c complex matrices with an automorphy-covariance descriptor.
//!
//! A field stored here is always strictly periodic in both grid directions.
//! The covariance descriptor records which transformation law the underlying
//! geometric object obeys across the two lattice seams; since the storage is
//! periodic, covariance demands the pointwise fixed-point relation
//!
//!   F(z) = L_λ(z) · F(z) · R_λ(z)        (λ ∈ {1, τ})
//!
//! whose sup-norm defect is the seam residual. Endomorphism fields of a
//! bundle with multipliers a_λ use L = a_λ, R = a_λ^{-1}; morphism fields
//! S → E use the multipliers of both bundles.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::CoreError;
use crate::geometry::{Bidegree, DiffDirection, ScalarField, TorusGeometry};
use crate::linalg::{self, CMat};
use crate::Result;

/// Lattice generator of the torus cover.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Generator {
    One,
    Tau,
}

/// Factor of automorphy: the multiplier matrices a_1(z), a_τ(z) as an
/// evaluable expression (closed under dual, direct sum and tensor).
#[derive(Clone, Debug)]
pub enum Multiplier {
    /// a_1 = a_τ = id.
    Trivial { rank: usize },
    /// Degree-d line bundle: a_1(z) = 1, a_τ(z) = e^{−πidτ − 2πidz}.
    Line { d: i64 },
    /// Constant matrices (clock/shift presets).
    Constant { m1: CMat, mt: CMat, rank: usize },
    /// Block direct sum.
    DirectSum(Vec<Multiplier>),
    /// Dual bundle: inverse transpose.
    InvTranspose(Box<Multiplier>),
    /// Tensor product: Kronecker.
    Kronecker(Box<Multiplier>, Box<Multiplier>),
}

impl Multiplier {
    pub fn rank(&self) -> usize {
        match self {
            Multiplier::Trivial { rank } => *rank,
            Multiplier::Line { .. } => 1,
            Multiplier::Constant { rank, .. } => *rank,
            Multiplier::DirectSum(parts) => parts.iter().map(|p| p.rank()).sum(),
            Multiplier::InvTranspose(inner) => inner.rank(),
            Multiplier::Kronecker(a, b) => a.rank() * b.rank(),
        }
    }

    /// Evaluate a_λ(z).
    pub fn eval(&self, gen: Generator, z: Complex64, tau: Complex64) -> CMat {
        match self {
            Multiplier::Trivial { rank } => linalg::identity(*rank),
            Multiplier::Line { d } => {
                let df = *d as f64;
                let v = match gen {
                    Generator::One => Complex64::new(1.0, 0.0),
                    Generator::Tau => {
                        // e^{−πidτ − 2πidz}
                        let arg = Complex64::new(0.0, -PI * df) * tau
                            + Complex64::new(0.0, -2.0 * PI * df) * z;
                        arg.exp()
                    }
                };
                vec![v]
            }
            Multiplier::Constant { m1, mt, .. } => match gen {
                Generator::One => m1.clone(),
                Generator::Tau => mt.clone(),
            },
            Multiplier::DirectSum(parts) => {
                let r = self.rank();
                let mut out = linalg::zeros(r, r);
                let mut off = 0;
                for p in parts {
                    let pr = p.rank();
                    let m = p.eval(gen, z, tau);
                    for i in 0..pr {
                        for j in 0..pr {
                            out[(off + i) * r + (off + j)] = m[i * pr + j];
                        }
                    }
                    off += pr;
                }
                out
            }
            Multiplier::InvTranspose(inner) => {
                let r = inner.rank();
                let m = inner.eval(gen, z, tau);
                let inv = linalg::inverse(&m, r).expect("multiplier must be invertible");
                linalg::transpose(&inv, r, r)
            }
            Multiplier::Kronecker(a, b) => {
                let (ra, rb) = (a.rank(), b.rank());
                let ma = a.eval(gen, z, tau);
                let mb = b.eval(gen, z, tau);
                kron(&ma, ra, &mb, rb)
            }
        }
    }
}

/// Kronecker product of square matrices.
pub fn kron(a: &[Complex64], ra: usize, b: &[Complex64], rb: usize) -> CMat {
    let r = ra * rb;
    let mut out = linalg::zeros(r, r);
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[(i * rb + k) * r + (j * rb + l)] = a[i * ra + j] * b[k * rb + l];
                }
            }
        }
    }
    out
}

/// Transformation law of a stored field across the lattice seams.
#[derive(Clone, Debug)]
pub enum Covariance {
    /// Entries are globally defined functions; no transport.
    Periodic,
    /// Endomorphism of a bundle: F ↦ a_λ F a_λ^{-1}.
    Endomorphism(Arc<Multiplier>),
    /// Morphism from `domain` to `codomain`: F ↦ a^cod_λ F (a^dom_λ)^{-1}.
    Morphism {
        codomain: Arc<Multiplier>,
        domain: Arc<Multiplier>,
    },
}

/// N×N grid of r×c complex matrices.
#[derive(Clone, Debug)]
pub struct MatrixField {
    geom: TorusGeometry,
    rows: usize,
    cols: usize,
    bidegree: Bidegree,
    covariance: Covariance,
    /// layout: point-major, data[p·rows·cols + i·cols + j], p = k·N + j_s.
    data: Vec<Complex64>,
}

impl MatrixField {
    pub fn zeros(
        geom: &TorusGeometry,
        rows: usize,
        cols: usize,
        bidegree: Bidegree,
        covariance: Covariance,
    ) -> Self {
        Self {
            geom: geom.clone(),
            rows,
            cols,
            bidegree,
            covariance,
            data: vec![Complex64::new(0.0, 0.0); geom.points() * rows * cols],
        }
    }

    /// Constant matrix at every grid point.
    pub fn constant(
        geom: &TorusGeometry,
        mat: &[Complex64],
        rows: usize,
        cols: usize,
        bidegree: Bidegree,
        covariance: Covariance,
    ) -> Self {
        assert_eq!(mat.len(), rows * cols);
        let mut data = Vec::with_capacity(geom.points() * rows * cols);
        for _ in 0..geom.points() {
            data.extend_from_slice(mat);
        }
        Self {
            geom: geom.clone(),
            rows,
            cols,
            bidegree,
            covariance,
            data,
        }
    }

    pub fn identity(geom: &TorusGeometry, rank: usize, covariance: Covariance) -> Self {
        Self::constant(
            geom,
            &linalg::identity(rank),
            rank,
            rank,
            Bidegree::Zero,
            covariance,
        )
    }

    /// Sample a matrix-valued closure.
    pub fn sample(
        geom: &TorusGeometry,
        rows: usize,
        cols: usize,
        bidegree: Bidegree,
        covariance: Covariance,
        f: impl Fn(Complex64) -> CMat,
    ) -> Self {
        let n = geom.grid_n();
        let mut data = Vec::with_capacity(geom.points() * rows * cols);
        for kt in 0..n {
            for js in 0..n {
                let m = f(geom.point(js, kt));
                assert_eq!(m.len(), rows * cols);
                data.extend_from_slice(&m);
            }
        }
        Self {
            geom: geom.clone(),
            rows,
            cols,
            bidegree,
            covariance,
            data,
        }
    }

    /// Promote a scalar field to a scalar multiple of the identity.
    pub fn scalar_identity(field: &ScalarField, rank: usize, covariance: Covariance) -> Self {
        let geom = field.geometry().clone();
        let mut out = Self::zeros(&geom, rank, rank, field.bidegree(), covariance);
        for (p, &v) in field.values().iter().enumerate() {
            for i in 0..rank {
                out.data[p * rank * rank + i * rank + i] = v;
            }
        }
        out
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn bidegree(&self) -> Bidegree {
        self.bidegree
    }
    pub fn set_bidegree(&mut self, b: Bidegree) {
        self.bidegree = b;
    }
    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }
    pub fn set_covariance(&mut self, c: Covariance) {
        self.covariance = c;
    }

    pub fn at(&self, p: usize) -> &[Complex64] {
        let sz = self.rows * self.cols;
        &self.data[p * sz..(p + 1) * sz]
    }

    pub fn at_mut(&mut self, p: usize) -> &mut [Complex64] {
        let sz = self.rows * self.cols;
        &mut self.data[p * sz..(p + 1) * sz]
    }

    pub fn matrix(&self, p: usize) -> CMat {
        self.at(p).to_vec()
    }

    /// Pointwise matrix product; bidegrees add with the wedge sign
    /// (dz̄∧dz = −dz∧dz̄).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let (sign, bidegree) = wedge_bidegree(self.bidegree, other.bidegree);
        let mut out = Self::zeros(
            &self.geom,
            self.rows,
            other.cols,
            bidegree,
            compose_covariance(&self.covariance, &other.covariance),
        );
        let sz_out = self.rows * other.cols;
        for p in 0..self.geom.points() {
            let a = self.at(p);
            let b = other.at(p);
            let o = &mut out.data[p * sz_out..(p + 1) * sz_out];
            linalg::matmul_into(o, a, b, self.rows, self.cols, other.cols);
            if sign < 0.0 {
                for v in o.iter_mut() {
                    *v = -*v;
                }
            } else if sign == 0.0 {
                for v in o.iter_mut() {
                    *v = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        assert_eq!(self.bidegree, other.bidegree);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        out
    }

    /// Pointwise flat conjugate transpose. A (1,0) coefficient becomes a
    /// (0,1) coefficient and vice versa.
    pub fn adjoint(&self) -> Self {
        let bidegree = match self.bidegree {
            Bidegree::OneZero => Bidegree::ZeroOne,
            Bidegree::ZeroOne => Bidegree::OneZero,
            b => b,
        };
        let mut out = Self::zeros(
            &self.geom,
            self.cols,
            self.rows,
            bidegree,
            adjoint_covariance(&self.covariance),
        );
        for p in 0..self.geom.points() {
            let a = linalg::adjoint(self.at(p), self.rows, self.cols);
            out.at_mut(p).copy_from_slice(&a);
        }
        out
    }

    /// Pointwise transpose without conjugation (keeps the bidegree).
    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(
            &self.geom,
            self.cols,
            self.rows,
            self.bidegree,
            Covariance::Periodic,
        );
        for p in 0..self.geom.points() {
            let a = linalg::transpose(self.at(p), self.rows, self.cols);
            out.at_mut(p).copy_from_slice(&a);
        }
        out
    }

    pub fn map_matrices(&self, f: impl Fn(&[Complex64]) -> CMat) -> Self {
        let mut out = self.clone();
        for p in 0..self.geom.points() {
            let m = f(self.at(p));
            out.at_mut(p).copy_from_slice(&m);
        }
        out
    }

    /// Pointwise inverse.
    pub fn inverse(&self) -> Result<Self> {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for p in 0..self.geom.points() {
            let inv = linalg::inverse(self.at(p), self.rows)?;
            out.at_mut(p).copy_from_slice(&inv);
        }
        Ok(out)
    }

    /// Pointwise trace as a scalar field (strictly periodic for covariant
    /// endomorphism fields).
    pub fn trace_field(&self) -> ScalarField {
        assert_eq!(self.rows, self.cols);
        let values = (0..self.geom.points())
            .map(|p| linalg::trace(self.at(p), self.rows))
            .collect();
        ScalarField::from_values(&self.geom, self.bidegree, values)
    }

    /// Pointwise determinant as a scalar field.
    pub fn det_field(&self) -> ScalarField {
        assert_eq!(self.rows, self.cols);
        let values = (0..self.geom.points())
            .map(|p| linalg::det(self.at(p), self.rows))
            .collect();
        ScalarField::from_values(&self.geom, Bidegree::Zero, values)
    }

    /// Largest pointwise Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.geom.points())
            .map(|p| linalg::fro_norm(self.at(p)))
            .fold(0.0, f64::max)
    }

    /// Entrywise spectral derivative with the ScalarField bidegree rules.
    pub fn derivative(&self, direction: DiffDirection) -> Result<Self> {
        use Bidegree::*;
        use DiffDirection::*;
        let (out_bidegree, holo, sign) = match (self.bidegree, direction) {
            (Zero, Holomorphic) => (OneZero, true, 1.0),
            (Zero, Antiholomorphic) => (ZeroOne, false, 1.0),
            (OneZero, Antiholomorphic) => (OneOne, false, -1.0),
            (ZeroOne, Holomorphic) => (OneOne, true, 1.0),
            (b, _) => return Err(CoreError::BidegreeOverflow(b.label())),
        };
        let npts = self.geom.points();
        let sz = self.rows * self.cols;
        let mut out = self.clone();
        out.bidegree = out_bidegree;
        let mut buf = vec![Complex64::new(0.0, 0.0); npts];
        for e in 0..sz {
            for p in 0..npts {
                buf[p] = self.data[p * sz + e];
            }
            if holo {
                self.geom.dz_raw(&mut buf);
            } else {
                self.geom.dzbar_raw(&mut buf);
            }
            for p in 0..npts {
                out.data[p * sz + e] = if sign < 0.0 { -buf[p] } else { buf[p] };
            }
        }
        Ok(out)
    }

    /// Entrywise application of a real spectral multiplier.
    pub(crate) fn apply_real_symbol(&self, symbol: &[f64]) -> Self {
        let npts = self.geom.points();
        let sz = self.rows * self.cols;
        let mut out = self.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); npts];
        for e in 0..sz {
            for p in 0..npts {
                buf[p] = self.data[p * sz + e];
            }
            self.geom.fft2(&mut buf, false);
            for (p, v) in buf.iter_mut().enumerate() {
                *v *= symbol[p];
            }
            self.geom.fft2(&mut buf, true);
            for p in 0..npts {
                out.data[p * sz + e] = buf[p];
            }
        }
        out
    }
}

fn form_degree(b: Bidegree) -> usize {
    match b {
        Bidegree::Zero => 0,
        Bidegree::OneZero | Bidegree::ZeroOne => 1,
        Bidegree::OneOne => 2,
    }
}

/// Graded commutator with wedge signs: [A, B] = A·B − (−1)^{|A||B|} B·A.
pub fn graded_commutator(a: &MatrixField, b: &MatrixField) -> MatrixField {
    let deg_a = form_degree(a.bidegree());
    let deg_b = form_degree(b.bidegree());
    let ab = a.mul(b);
    let ba = b.mul(a);
    if deg_a * deg_b % 2 == 1 {
        ab.add(&ba)
    } else {
        ab.sub(&ba)
    }
}

/// Bidegree of a wedge product together with the orientation sign against
/// the fixed dz∧dz̄ frame; sign 0 marks a vanishing wedge (dz∧dz).
fn wedge_bidegree(a: Bidegree, b: Bidegree) -> (f64, Bidegree) {
    use Bidegree::*;
    match (a, b) {
        (Zero, x) | (x, Zero) => (1.0, x),
        (OneZero, ZeroOne) => (1.0, OneOne),
        (ZeroOne, OneZero) => (-1.0, OneOne),
        (OneZero, OneZero) | (ZeroOne, ZeroOne) => (0.0, OneOne),
        _ => panic!("wedge product exceeds the top degree"),
    }
}

fn compose_covariance(a: &Covariance, b: &Covariance) -> Covariance {
    match (a, b) {
        (Covariance::Periodic, Covariance::Periodic) => Covariance::Periodic,
        (Covariance::Endomorphism(m), _) | (_, Covariance::Endomorphism(m)) => {
            Covariance::Endomorphism(m.clone())
        }
        (Covariance::Morphism { codomain, .. }, Covariance::Morphism { domain, .. }) => {
            Covariance::Morphism {
                codomain: codomain.clone(),
                domain: domain.clone(),
            }
        }
        (Covariance::Morphism { codomain, domain }, _)
        | (_, Covariance::Morphism { codomain, domain }) => Covariance::Morphism {
            codomain: codomain.clone(),
            domain: domain.clone(),
        },
    }
}

fn adjoint_covariance(c: &Covariance) -> Covariance {
    match c {
        Covariance::Morphism { codomain, domain } => Covariance::Morphism {
            codomain: domain.clone(),
            domain: codomain.clone(),
        },
        other => other.clone(),
    }
}

/// Sup-norm defect of the periodic-storage covariance relation
/// F(z) = L_λ(z) F(z) R_λ(z) over both seams.
pub fn seam_residual_of(field: &MatrixField) -> f64 {
    let geom = field.geometry();
    let tau = geom.tau();
    let (rows, cols) = (field.rows(), field.cols());
    let mut worst: f64 = 0.0;
    let transported = |gen: Generator, p: usize, z: Complex64| -> Option<CMat> {
        match field.covariance() {
            Covariance::Periodic => None,
            Covariance::Endomorphism(m) => {
                let a = m.eval(gen, z, tau);
                let ainv = linalg::inverse(&a, rows).ok()?;
                let t = linalg::matmul(&a, field.at(p), rows, rows, cols);
                Some(linalg::matmul(&t, &ainv, rows, cols, cols))
            }
            Covariance::Morphism { codomain, domain } => {
                let ac = codomain.eval(gen, z, tau);
                let ad = domain.eval(gen, z, tau);
                let adinv = linalg::inverse(&ad, cols).ok()?;
                let t = linalg::matmul(&ac, field.at(p), rows, rows, cols);
                Some(linalg::matmul(&t, &adinv, rows, cols, cols))
            }
        }
    };
    let n = geom.grid_n();
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let z = geom.point(js, kt);
            for gen in [Generator::One, Generator::Tau] {
                if let Some(t) = transported(gen, p, z) {
                    let d: f64 = field
                        .at(p)
                        .iter()
                        .zip(&t)
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    worst = worst.max(d);
                }
            }
        }
    }
    worst
}

/// Clock matrix diag(1, ω, ω², …) with ω = e^{2πi p/r}.
pub fn clock_matrix(r: usize, p: i64) -> CMat {
    let mut m = linalg::zeros(r, r);
    for i in 0..r {
        m[i * r + i] = Complex64::from_polar(1.0, 2.0 * PI * p as f64 * i as f64 / r as f64);
    }
    m
}

/// Cyclic shift matrix S e_j = e_{j+1 mod r}.
pub fn shift_matrix(r: usize) -> CMat {
    let mut m = linalg::zeros(r, r);
    for i in 0..r {
        m[((i + 1) % r) * r + i] = Complex64::new(1.0, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusGeometry;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn geom() -> TorusGeometry {
        TorusGeometry::new(c(0.0, 1.0), 8).unwrap()
    }

    #[test]
    fn wedge_orientation_signs() {
        let g = geom();
        let one = |b| MatrixField::constant(&g, &[c(1.0, 0.0)], 1, 1, b, Covariance::Periodic);
        let p = one(Bidegree::OneZero);
        let q = one(Bidegree::ZeroOne);
        let pq = p.mul(&q);
        let qp = q.mul(&p);
        assert_eq!(pq.bidegree(), Bidegree::OneOne);
        assert!((pq.at(0)[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((qp.at(0)[0] + c(1.0, 0.0)).norm() < 1e-15);
        let pp = p.mul(&p);
        assert!(pp.sup_norm() < 1e-15);
    }

    #[test]
    fn line_multiplier_commutation_is_untwisted() {
        let g = geom();
        let m = Multiplier::Line { d: 2 };
        let z = g.point(3, 5);
        let tau = g.tau();
        // a_τ(z+1)·a_1(z) = ε·a_1(z+τ)·a_τ(z) with ε = 1
        let lhs = m.eval(Generator::Tau, z + 1.0, tau)[0] * m.eval(Generator::One, z, tau)[0];
        let rhs = m.eval(Generator::One, z + tau, tau)[0] * m.eval(Generator::Tau, z, tau)[0];
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn seam_residual_detects_clock_conjugation() {
        // constant E₁₂ is moved by the clock multiplier of a twisted bundle
        let g = geom();
        let r = 3usize;
        let mult = Arc::new(Multiplier::Constant {
            m1: shift_matrix(r),
            mt: clock_matrix(r, 1),
            rank: r,
        });
        let id = MatrixField::identity(&g, r, Covariance::Endomorphism(mult.clone()));
        assert!(seam_residual_of(&id) < 1e-14);
        let mut e12 = linalg::zeros(r, r);
        e12[1] = c(1.0, 0.0);
        let f = MatrixField::constant(
            &g,
            &e12,
            r,
            r,
            Bidegree::Zero,
            Covariance::Endomorphism(mult),
        );
        assert!(seam_residual_of(&f) > 0.5);
    }

    #[test]
    fn clock_shift_commutation() {
        // Ω^p S = e^{2πip/r} S Ω^p
        let r = 3;
        let u = clock_matrix(r, 1);
        let s = shift_matrix(r);
        let us = linalg::matmul(&u, &s, r, r, r);
        let su = linalg::matmul(&s, &u, r, r, r);
        let eps = Complex64::from_polar(1.0, 2.0 * PI / 3.0);
        let diff: f64 = us
            .iter()
            .zip(&su)
            .map(|(a, b)| (a - eps * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-14);
    }

    #[test]
    fn kron_of_identities() {
        let a = linalg::identity(2);
        let b = linalg::identity(3);
        let k = kron(&a, 2, &b, 3);
        let diff: f64 = k
            .iter()
            .zip(&linalg::identity(6))
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-15);
    }
}
