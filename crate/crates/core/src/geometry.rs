//! Flat complex torus X = C/(Z + τZ) with Kähler form σ_g = (i/2) dz∧dz̄,
//! discretized on an N×N periodic grid.
//!
//! Real coordinates (s,t) ∈ [0,1)² parametrize z = s + tτ. The chain rule
//! gives the spectral symbols
//!
//!   ∂_z = (τ̄ ∂_s − ∂_t)/(τ̄ − τ),   ∂_z̄ = (∂_t − τ ∂_s)/(τ̄ − τ),
//!
//! and the scalar Laplace-type operator iΛ_g ∂̄∂ acts on the Fourier mode
//! e^{2πi(ms+nt)} by multiplication with 2π²|mτ − n|²/(Im τ)².
//!
//! Form fields are stored as coefficients against the fixed coframe
//! dz, dz̄, dz∧dz̄, which turns Λ_g and integration into scalar algebra:
//! Λ_g(φ dz∧dz̄) = −2iφ and ∫_X φ dz∧dz̄ = −2i·Imτ·mean(φ).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::CoreError;
use crate::Result;

/// Coefficient basis for the four form degrees that exist on a curve.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Bidegree {
    /// function
    Zero,
    /// coefficient against dz
    OneZero,
    /// coefficient against dz̄
    ZeroOne,
    /// coefficient against dz∧dz̄
    OneOne,
}

impl Bidegree {
    pub fn label(self) -> &'static str {
        match self {
            Bidegree::Zero => "(0,0)",
            Bidegree::OneZero => "(1,0)",
            Bidegree::ZeroOne => "(0,1)",
            Bidegree::OneOne => "(1,1)",
        }
    }
}

impl fmt::Display for Bidegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Direction of the spectral derivative.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DiffDirection {
    Holomorphic,
    Antiholomorphic,
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Flat torus geometry with cached FFT plans and spectral symbols.
///
/// Cloning is cheap; the plans are shared.
#[derive(Clone)]
pub struct TorusGeometry {
    tau: Complex64,
    grid_n: usize,
    volume: f64,
    fft: Arc<FftPair>,
    /// ∂_z symbol per (m,n) mode, layout matches field storage.
    sym_dz: Arc<Vec<Complex64>>,
    /// ∂_z̄ symbol per mode.
    sym_dzbar: Arc<Vec<Complex64>>,
    /// iΛ_g ∂̄∂ symbol per mode (real, ≥ 0).
    sym_laplace: Arc<Vec<f64>>,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("tau", &self.tau)
            .field("grid_n", &self.grid_n)
            .field("volume", &self.volume)
            .finish()
    }
}

impl TorusGeometry {
    /// Build the geometry for modulus τ on an N×N grid.
    ///
    /// Rejects Im(τ) ≤ 0 and odd or too-small grids: spectral differentiation
    /// needs symmetric Fourier modes.
    pub fn new(tau: Complex64, grid_n: usize) -> Result<Self> {
        if tau.im <= 0.0 {
            return Err(CoreError::NonPositiveModulus(tau.im));
        }
        if grid_n < 8 || grid_n % 2 != 0 {
            return Err(CoreError::BadGrid(grid_n));
        }
        let mut planner = FftPlanner::new();
        let fft = Arc::new(FftPair {
            forward: planner.plan_fft_forward(grid_n),
            inverse: planner.plan_fft_inverse(grid_n),
        });

        let im = tau.im;
        let n = grid_n;
        let mut sym_dz = vec![Complex64::new(0.0, 0.0); n * n];
        let mut sym_dzbar = vec![Complex64::new(0.0, 0.0); n * n];
        let mut sym_laplace = vec![0.0; n * n];
        for kt in 0..n {
            let nn = mode_number(kt, n);
            for js in 0..n {
                let mm = mode_number(js, n);
                let idx = kt * n + js;
                // Zero the asymmetric Nyquist mode in first derivatives.
                let (meff, neff) = (
                    if js == n / 2 { 0.0 } else { mm as f64 },
                    if kt == n / 2 { 0.0 } else { nn as f64 },
                );
                let w = Complex64::new(meff, 0.0) * tau.conj() - neff;
                sym_dz[idx] = -w * (PI / im);
                let wb = Complex64::new(neff, 0.0) - Complex64::new(meff, 0.0) * tau;
                sym_dzbar[idx] = -wb * (PI / im);
                let wfull = Complex64::new(mm as f64, 0.0) * tau - nn as f64;
                sym_laplace[idx] = 2.0 * PI * PI * wfull.norm_sqr() / (im * im);
            }
        }

        Ok(Self {
            tau,
            grid_n,
            volume: im,
            fft,
            sym_dz: Arc::new(sym_dz),
            sym_dzbar: Arc::new(sym_dzbar),
            sym_laplace: Arc::new(sym_laplace),
        })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    /// Vol(X) = ∫_X σ_g = Im τ.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn points(&self) -> usize {
        self.grid_n * self.grid_n
    }

    /// Sample point z_{jk} = j/N + (k/N)τ; index = k·N + j.
    pub fn point(&self, js: usize, kt: usize) -> Complex64 {
        let n = self.grid_n as f64;
        Complex64::new(js as f64 / n, 0.0) + self.tau * (kt as f64 / n)
    }

    /// Linear index of the grid node (j, k).
    pub fn index(&self, js: usize, kt: usize) -> usize {
        kt * self.grid_n + js
    }

    /// Constant scalar field.
    pub fn constant(&self, value: Complex64) -> ScalarField {
        ScalarField {
            geom: self.clone(),
            bidegree: Bidegree::Zero,
            values: vec![value; self.points()],
        }
    }

    /// Sample a closure z ↦ f(z) into a (0,0) field.
    pub fn sample(&self, f: impl Fn(Complex64) -> Complex64) -> ScalarField {
        let n = self.grid_n;
        let mut values = Vec::with_capacity(n * n);
        for kt in 0..n {
            for js in 0..n {
                values.push(f(self.point(js, kt)));
            }
        }
        ScalarField {
            geom: self.clone(),
            bidegree: Bidegree::Zero,
            values,
        }
    }

    /// Sample a closure over the unit-square coordinates (s, t).
    pub fn sample_st(&self, f: impl Fn(f64, f64) -> Complex64) -> ScalarField {
        let n = self.grid_n;
        let nf = n as f64;
        let mut values = Vec::with_capacity(n * n);
        for kt in 0..n {
            for js in 0..n {
                values.push(f(js as f64 / nf, kt as f64 / nf));
            }
        }
        ScalarField {
            geom: self.clone(),
            bidegree: Bidegree::Zero,
            values,
        }
    }

    /// The Kähler form σ_g as a (1,1) field: coefficient i/2 against dz∧dz̄.
    pub fn kaehler_form(&self) -> ScalarField {
        ScalarField {
            geom: self.clone(),
            bidegree: Bidegree::OneOne,
            values: vec![Complex64::new(0.0, 0.5); self.points()],
        }
    }

    /// In-place 2D FFT of a raw buffer (row-major, k·N+j).
    pub(crate) fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid_n;
        debug_assert_eq!(data.len(), n * n);
        let plan = if inverse {
            &self.fft.inverse
        } else {
            &self.fft.forward
        };
        // rows (contiguous)
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        // columns via transpose
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for k in 0..n {
                col[k] = data[k * n + j];
            }
            plan.process(&mut col);
            for k in 0..n {
                data[k * n + j] = col[k];
            }
        }
        if inverse {
            let scale = 1.0 / (n * n) as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Apply a spectral symbol to a raw periodic buffer.
    pub(crate) fn apply_symbol(&self, data: &mut [Complex64], symbol: &dyn Fn(usize) -> Complex64) {
        self.fft2(data, false);
        for (idx, v) in data.iter_mut().enumerate() {
            *v *= symbol(idx);
        }
        self.fft2(data, true);
    }

    /// ∂_z of a raw periodic buffer.
    pub(crate) fn dz_raw(&self, data: &mut [Complex64]) {
        let sym = self.sym_dz.clone();
        self.apply_symbol(data, &move |i| sym[i]);
    }

    /// ∂_z̄ of a raw periodic buffer.
    pub(crate) fn dzbar_raw(&self, data: &mut [Complex64]) {
        let sym = self.sym_dzbar.clone();
        self.apply_symbol(data, &move |i| sym[i]);
    }

    /// Damping symbol exp(−dt·λ) of the scalar heat operator, per mode.
    pub(crate) fn heat_symbol(&self, dt: f64) -> Vec<f64> {
        self.sym_laplace.iter().map(|&l| (-dt * l).exp()).collect()
    }

    /// φ₁ symbol (1 − e^{−dtλ})/(dtλ) of the heat operator, per mode.
    pub(crate) fn phi1_symbol(&self, dt: f64) -> Vec<f64> {
        self.sym_laplace
            .iter()
            .map(|&l| {
                let x = dt * l;
                if x < 1e-12 {
                    1.0
                } else {
                    (1.0 - (-x).exp()) / x
                }
            })
            .collect()
    }

    pub(crate) fn laplace_symbol(&self) -> &[f64] {
        &self.sym_laplace
    }

    /// Same grid and modulus.
    pub fn compatible(&self, other: &TorusGeometry) -> bool {
        self.grid_n == other.grid_n && (self.tau - other.tau).norm() < 1e-14
    }
}

/// Signed mode number for index j on an N-point lattice.
pub(crate) fn mode_number(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        if j == n / 2 {
            -((n / 2) as i64)
        } else {
            j as i64
        }
    } else {
        j as i64 - n as i64
    }
}

/// Strictly periodic complex field over the fundamental domain, stored as a
/// coefficient against the coframe selected by `bidegree`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub(crate) geom: TorusGeometry,
    pub(crate) bidegree: Bidegree,
    pub(crate) values: Vec<Complex64>,
}

impl ScalarField {
    pub fn from_values(geom: &TorusGeometry, bidegree: Bidegree, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), geom.points());
        Self {
            geom: geom.clone(),
            bidegree,
            values,
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn bidegree(&self) -> Bidegree {
        self.bidegree
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn mean(&self) -> Complex64 {
        let sum: Complex64 = self.values.iter().sum();
        sum / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            geom: self.geom.clone(),
            bidegree: self.bidegree,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.bidegree, other.bidegree);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            geom: self.geom.clone(),
            bidegree: self.bidegree,
            values,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise product with a (0,0) field; the bidegree of `self` is kept.
    pub fn mul_function(&self, func: &Self) -> Self {
        assert_eq!(func.bidegree, Bidegree::Zero);
        let values = self
            .values
            .iter()
            .zip(&func.values)
            .map(|(a, b)| a * b)
            .collect();
        Self {
            geom: self.geom.clone(),
            bidegree: self.bidegree,
            values,
        }
    }
}

/// Spectral ∂_z f or ∂_z̄ f with the bidegree raised accordingly.
///
/// The (1,1) coefficients follow the conventions ∂̄(g dz) = −(∂_z̄ g) dz∧dz̄
/// and ∂(g dz̄) = (∂_z g) dz∧dz̄.
pub fn derivative(field: &ScalarField, direction: DiffDirection) -> Result<ScalarField> {
    use Bidegree::*;
    use DiffDirection::*;
    let (out_bidegree, holo, sign) = match (field.bidegree, direction) {
        (Zero, Holomorphic) => (OneZero, true, 1.0),
        (Zero, Antiholomorphic) => (ZeroOne, false, 1.0),
        (OneZero, Antiholomorphic) => (OneOne, false, -1.0),
        (ZeroOne, Holomorphic) => (OneOne, true, 1.0),
        (b, _) => return Err(CoreError::BidegreeOverflow(b.label())),
    };
    let mut values = field.values.clone();
    if holo {
        field.geom.dz_raw(&mut values);
    } else {
        field.geom.dzbar_raw(&mut values);
    }
    if sign < 0.0 {
        for v in values.iter_mut() {
            *v = -*v;
        }
    }
    Ok(ScalarField {
        geom: field.geom.clone(),
        bidegree: out_bidegree,
        values,
    })
}

/// Hodge contraction Λ_g of a (1,1) form: φ dz∧dz̄ ↦ −2iφ, so Λ_g σ_g = 1.
pub fn hodge_lambda(form: &ScalarField) -> Result<ScalarField> {
    if form.bidegree != Bidegree::OneOne {
        return Err(CoreError::WrongBidegree {
            needed: "(1,1)",
            found: form.bidegree.label(),
        });
    }
    let c = Complex64::new(0.0, -2.0);
    let mut out = form.map(|v| v * c);
    out.bidegree = Bidegree::Zero;
    Ok(out)
}

/// ∫_X of a (1,1) form, or of a function against σ_g.
///
/// Spectrally exact Riemann sum: ∫ φ dz∧dz̄ = −2i·Imτ·mean(φ) and
/// ∫ f σ_g = Imτ·mean(f).
pub fn integrate(form: &ScalarField) -> Result<Complex64> {
    let im = form.geom.volume();
    match form.bidegree {
        Bidegree::OneOne => Ok(form.mean() * Complex64::new(0.0, -2.0 * im)),
        Bidegree::Zero => Ok(form.mean() * im),
        b => Err(CoreError::WrongBidegree {
            needed: "(1,1) or (0,0)",
            found: b.label(),
        }),
    }
}

/// Unique zero-mean u with iΛ_g ∂̄∂ u = rhs, by Fourier division.
pub fn poisson_solve(rhs: &ScalarField) -> Result<ScalarField> {
    if rhs.bidegree != Bidegree::Zero {
        return Err(CoreError::WrongBidegree {
            needed: "(0,0)",
            found: rhs.bidegree.label(),
        });
    }
    let scale = rhs.sup_norm().max(1.0);
    let mean = rhs.mean().norm();
    if mean > 1e-10 * scale {
        return Err(CoreError::NonZeroMean(mean));
    }
    let geom = &rhs.geom;
    let mut hat = rhs.values.clone();
    geom.fft2(&mut hat, false);
    let lam = geom.laplace_symbol();
    for (idx, v) in hat.iter_mut().enumerate() {
        if lam[idx] > 0.0 {
            *v /= lam[idx];
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    geom.fft2(&mut hat, true);
    Ok(ScalarField {
        geom: geom.clone(),
        bidegree: Bidegree::Zero,
        values: hat,
    })
}

/// iΛ_g ∂̄∂ applied to a function field (the scalar heat operator).
pub fn laplace(field: &ScalarField) -> Result<ScalarField> {
    if field.bidegree != Bidegree::Zero {
        return Err(CoreError::WrongBidegree {
            needed: "(0,0)",
            found: field.bidegree.label(),
        });
    }
    let geom = &field.geom;
    let mut hat = field.values.clone();
    geom.fft2(&mut hat, false);
    for (idx, v) in hat.iter_mut().enumerate() {
        *v *= geom.laplace_symbol()[idx];
    }
    geom.fft2(&mut hat, true);
    Ok(ScalarField {
        geom: geom.clone(),
        bidegree: Bidegree::Zero,
        values: hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tau_i() -> Complex64 {
        Complex64::new(0.0, 1.0)
    }

    #[test]
    fn torus_volume_is_im_tau() {
        let g = TorusGeometry::new(tau_i(), 8).unwrap();
        assert_abs_diff_eq!(g.volume(), 1.0, epsilon = 1e-15);
        let g2 = TorusGeometry::new(Complex64::new(0.0, 2.0), 8).unwrap();
        assert_abs_diff_eq!(g2.volume(), 2.0, epsilon = 1e-15);
        // volume equals ∫ 1 σ_g
        let one = g2.constant(Complex64::new(1.0, 0.0));
        let v = integrate(&one).unwrap();
        assert_abs_diff_eq!(v.re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn torus_rejects_bad_parameters() {
        assert!(matches!(
            TorusGeometry::new(Complex64::new(1.0, 0.0), 8),
            Err(CoreError::NonPositiveModulus(_))
        ));
        assert!(matches!(
            TorusGeometry::new(tau_i(), 7),
            Err(CoreError::BadGrid(7))
        ));
        assert!(matches!(
            TorusGeometry::new(tau_i(), 6),
            Err(CoreError::BadGrid(6))
        ));
    }

    #[test]
    fn derivative_matches_chain_rule_oracle() {
        // f = e^{2πi s}, τ = i: the chain rule gives ∂_z f = πi f and ∂_z̄ f = πi f.
        let g = TorusGeometry::new(tau_i(), 16).unwrap();
        let f = g.sample_st(|s, _| Complex64::from_polar(1.0, 2.0 * PI * s));
        let dzf = derivative(&f, DiffDirection::Holomorphic).unwrap();
        let dzbf = derivative(&f, DiffDirection::Antiholomorphic).unwrap();
        for idx in 0..g.points() {
            let expect = Complex64::new(0.0, PI) * f.values()[idx];
            assert!((dzf.values()[idx] - expect).norm() < 1e-11);
            assert!((dzbf.values()[idx] - expect).norm() < 1e-11);
        }
        assert_eq!(dzf.bidegree(), Bidegree::OneZero);
        assert_eq!(dzbf.bidegree(), Bidegree::ZeroOne);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = TorusGeometry::new(tau_i(), 8).unwrap();
        let f = g.constant(Complex64::new(1.0, 0.0));
        let d = derivative(&f, DiffDirection::Holomorphic).unwrap();
        assert!(d.sup_norm() < 1e-14);
    }

    #[test]
    fn derivative_overflow_is_rejected() {
        let g = TorusGeometry::new(tau_i(), 8).unwrap();
        let f = g.constant(Complex64::new(1.0, 0.0));
        let dz = derivative(&f, DiffDirection::Holomorphic).unwrap();
        assert!(matches!(
            derivative(&dz, DiffDirection::Holomorphic),
            Err(CoreError::BidegreeOverflow(_))
        ));
        let ddbar = derivative(&dz, DiffDirection::Antiholomorphic).unwrap();
        assert!(matches!(
            derivative(&ddbar, DiffDirection::Holomorphic),
            Err(CoreError::BidegreeOverflow(_))
        ));
    }

    #[test]
    fn mixed_partials_commute() {
        let g = TorusGeometry::new(tau_i(), 16).unwrap();
        let f = g.sample_st(|s, t| {
            Complex64::new((2.0 * PI * s).cos() * (2.0 * PI * t).sin(), (2.0 * PI * t).cos())
        });
        // ∂̄∂f and −(∂∂̄f) both land in (1,1) with opposite orientation signs,
        // so ∂_z∂_z̄ f = ∂_z̄∂_z f is the statement that they are negatives.
        let a = derivative(&derivative(&f, DiffDirection::Holomorphic).unwrap(), DiffDirection::Antiholomorphic).unwrap();
        let b = derivative(&derivative(&f, DiffDirection::Antiholomorphic).unwrap(), DiffDirection::Holomorphic).unwrap();
        let diff = a.add(&b);
        assert!(diff.sup_norm() < 1e-12 * (1.0 + a.sup_norm()));
    }

    #[test]
    fn hodge_lambda_of_kaehler_form_is_one() {
        let g = TorusGeometry::new(tau_i(), 8).unwrap();
        let sigma = g.kaehler_form();
        let l = hodge_lambda(&sigma).unwrap();
        for v in l.values() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let twice = hodge_lambda(&sigma.scaled(Complex64::new(2.0, 0.0))).unwrap();
        assert!((twice.mean() - Complex64::new(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hodge_lambda_oracle_value() {
        // (πd/Imτ) dz∧dz̄ contracts to −2πi d/Imτ.
        let tau = Complex64::new(0.3, 1.7);
        let g = TorusGeometry::new(tau, 8).unwrap();
        let d = 3.0;
        let coef = Complex64::new(PI * d / tau.im, 0.0);
        let mut form = g.constant(coef);
        form.bidegree = Bidegree::OneOne;
        let l = hodge_lambda(&form).unwrap();
        let expect = Complex64::new(0.0, -2.0 * PI * d / tau.im);
        assert!((l.mean() - expect).norm() < 1e-13);
    }

    #[test]
    fn integrate_mean_zero_mode() {
        let g = TorusGeometry::new(tau_i(), 16).unwrap();
        let f = g.sample_st(|s, _| Complex64::from_polar(1.0, 2.0 * PI * s));
        let v = integrate(&f).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn integrate_dbar_of_one_zero_form_vanishes() {
        // Stokes on the closed torus.
        let g = TorusGeometry::new(Complex64::new(0.5, 1.3), 16).unwrap();
        let mut eta = g.sample_st(|s, t| {
            Complex64::new((2.0 * PI * (s + t)).sin(), (2.0 * PI * s).cos() * (2.0 * PI * t).cos())
        });
        eta.bidegree = Bidegree::OneZero;
        let dbar = derivative(&eta, DiffDirection::Antiholomorphic).unwrap();
        let v = integrate(&dbar).unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn poisson_solve_oracle_cosine() {
        // iΛ∂̄∂ = −2∂_z∂_z̄ = −(1/2)(∂_s² + ∂_t²) at τ = i, so
        // rhs = cos(2πs) has solution u = cos(2πs)/(2π²).
        let g = TorusGeometry::new(tau_i(), 32).unwrap();
        let rhs = g.sample_st(|s, _| Complex64::new((2.0 * PI * s).cos(), 0.0));
        let u = poisson_solve(&rhs).unwrap();
        for (idx, v) in u.values().iter().enumerate() {
            let s = (idx % 32) as f64 / 32.0;
            let expect = (2.0 * PI * s).cos() / (2.0 * PI * PI);
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn poisson_zero_rhs_and_obstruction() {
        let g = TorusGeometry::new(tau_i(), 8).unwrap();
        let zero = g.constant(Complex64::new(0.0, 0.0));
        let u = poisson_solve(&zero).unwrap();
        assert!(u.sup_norm() < 1e-15);
        let one = g.constant(Complex64::new(1.0, 0.0));
        assert!(matches!(poisson_solve(&one), Err(CoreError::NonZeroMean(_))));
    }

    #[test]
    fn poisson_is_two_sided_inverse_on_zero_mean() {
        let tau = Complex64::new(-0.2, 0.9);
        let g = TorusGeometry::new(tau, 32).unwrap();
        let mut f = g.sample_st(|s, t| {
            Complex64::new(
                (2.0 * PI * s).cos() + (4.0 * PI * t).sin() * (2.0 * PI * s).sin(),
                (2.0 * PI * (s - t)).sin(),
            )
        });
        let mean = f.mean();
        f = f.map(|v| v - mean);
        let u = poisson_solve(&f).unwrap();
        let back = laplace(&u).unwrap();
        assert!(back.sub(&f).sup_norm() < 1e-10);
        let u2 = poisson_solve(&laplace(&f).unwrap()).unwrap();
        assert!(u2.sub(&f).sup_norm() < 1e-10);
    }
}
