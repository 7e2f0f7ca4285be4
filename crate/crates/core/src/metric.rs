//! Hermitian metrics and forms on twisted bundles, the endomorphism
//! dictionary f^{h,v}, functional calculus in the h-inner product, the gauge
//! action, the L² Riemannian structure on the space of metrics and geodesic
//! paths.
//!
//! A metric h is stored by the periodic relative endomorphism
//! F := f^{h_ref,h} = H_ref^{-1}H together with its logarithm S (the
//! perturbation exponent), so h = ĥ_ref·exp(S) in the dictionary sense. The
//! raw matrix H = H_ref·F of a nontrivial line bundle is only quasi-periodic
//! and is therefore never differentiated directly; it is reconstructed
//! pointwise where needed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle::{seam_residual, BundleSpec, FieldCapability};
use crate::error::CoreError;
use crate::field::{Covariance, MatrixField};
use crate::geometry::{integrate, Bidegree, ScalarField};
use crate::linalg::{self, CMat};
use crate::Result;

const SEAM_TOL: f64 = 1e-10;

/// Positive Hermitian metric, stored relative to the analytic reference.
#[derive(Clone, Debug)]
pub struct MetricState {
    bundle: BundleSpec,
    /// F = f^{h_ref,h}, periodic, h_ref-Hermitian positive.
    rel: MatrixField,
    /// S = log F, h_ref-Hermitian.
    exponent: MatrixField,
}

/// Hermitian (not necessarily definite) form, stored by Φ = f^{h_ref,v}.
#[derive(Clone, Debug)]
pub struct HermitianFormField {
    bundle: BundleSpec,
    rel: MatrixField,
}

/// Spectral function selector for the h-Hermitian functional calculus.
#[derive(Clone, Copy, Debug)]
pub enum Calc {
    Exp,
    Log,
    Power(f64),
}

impl MetricState {
    /// The analytic reference metric itself: F = id.
    pub fn reference(bundle: &BundleSpec) -> Result<Self> {
        let geom = bundle.geometry();
        let rel = MatrixField::identity(geom, bundle.rank(), bundle.endo_covariance());
        let exponent = MatrixField::zeros(
            geom,
            bundle.rank(),
            bundle.rank(),
            Bidegree::Zero,
            bundle.endo_covariance(),
        );
        Ok(Self {
            bundle: bundle.clone(),
            rel,
            exponent,
        })
    }

    /// Build from a h_ref-Hermitian exponent field: h = ĥ_ref·exp(S).
    pub fn from_exponent(bundle: &BundleSpec, exponent: MatrixField) -> Result<Self> {
        let res = seam_residual(&exponent, bundle)?;
        if res > SEAM_TOL {
            return Err(CoreError::CovarianceViolation(res));
        }
        let defect = href_hermitian_defect(bundle, &exponent);
        if defect > 1e-10 {
            return Err(CoreError::NotHermitian(defect));
        }
        let rel = href_function(bundle, &exponent, f64::exp)?;
        let mut rel = rel;
        rel.set_covariance(bundle.endo_covariance());
        let mut exponent = exponent;
        exponent.set_covariance(bundle.endo_covariance());
        Ok(Self {
            bundle: bundle.clone(),
            rel,
            exponent,
        })
    }

    /// Build from the relative endomorphism F = f^{h_ref,h} directly.
    pub fn from_relative(bundle: &BundleSpec, rel: MatrixField) -> Result<Self> {
        let res = seam_residual(&rel, bundle)?;
        if res > SEAM_TOL {
            return Err(CoreError::CovarianceViolation(res));
        }
        let defect = href_hermitian_defect(bundle, &rel);
        if defect > 1e-10 {
            return Err(CoreError::NotHermitian(defect));
        }
        // positivity gate: degenerate metrics are rejected, not regularized
        let min_eig = href_min_eigenvalue(bundle, &rel);
        if min_eig < 1e-12 {
            return Err(CoreError::DegenerateMetric(min_eig));
        }
        let exponent = href_function(bundle, &rel, f64::ln)?;
        let mut rel = rel;
        rel.set_covariance(bundle.endo_covariance());
        Ok(Self {
            bundle: bundle.clone(),
            rel,
            exponent,
        })
    }

    /// Conformal change h ↦ e^{u} h by a real periodic function u (only the
    /// real part of u is used).
    pub fn conformal(&self, u: &ScalarField) -> Result<Self> {
        let r = self.bundle.rank();
        let mut rel = self.rel.clone();
        for p in 0..self.bundle.geometry().points() {
            let f = Complex64::new(u.values()[p].re.exp(), 0.0);
            for v in rel.at_mut(p).iter_mut() {
                *v *= f;
            }
        }
        let mut exponent = self.exponent.clone();
        for p in 0..self.bundle.geometry().points() {
            let uu = u.values()[p].re;
            let e = exponent.at_mut(p);
            for i in 0..r {
                e[i * r + i] += uu;
            }
        }
        Ok(Self {
            bundle: self.bundle.clone(),
            rel,
            exponent,
        })
    }

    pub fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    /// F = f^{h_ref,h} as a periodic endomorphism field.
    pub fn relative(&self) -> &MatrixField {
        &self.rel
    }

    /// The perturbation exponent S = log f^{h_ref,h}.
    pub fn exponent(&self) -> &MatrixField {
        &self.exponent
    }

    /// Raw metric matrix H(z) = H_ref(z)·F(z) at grid point p.
    pub fn matrix_at(&self, p: usize) -> CMat {
        let geom = self.bundle.geometry();
        let n = geom.grid_n();
        let (js, kt) = (p % n, p / n);
        let z = geom.point(js, kt);
        let href = self.bundle.reference().h(z, geom.tau());
        let r = self.bundle.rank();
        linalg::matmul(&href, self.rel.at(p), r, r, r)
    }

    /// Smallest raw-metric eigenvalue over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        let r = self.bundle.rank();
        let mut min = f64::INFINITY;
        for p in 0..self.bundle.geometry().points() {
            let h = self.matrix_at(p);
            min = min.min(linalg::min_eigenvalue(&h, r));
        }
        min
    }

    /// Seam residual of the stored relative field.
    pub fn seam_residual(&self) -> f64 {
        seam_residual(&self.rel, &self.bundle).unwrap_or(f64::INFINITY)
    }

    /// sup_z |F_a(z) − F_b(z)| — the gauge-frame sup distance used by the
    /// flow semigroup diagnostics.
    pub fn sup_distance(&self, other: &MetricState) -> f64 {
        self.rel.sub(&other.rel).sup_norm()
    }
}

impl HermitianFormField {
    pub fn from_relative(bundle: &BundleSpec, rel: MatrixField) -> Result<Self> {
        let res = seam_residual(&rel, bundle)?;
        if res > SEAM_TOL {
            return Err(CoreError::CovarianceViolation(res));
        }
        let defect = href_hermitian_defect(bundle, &rel);
        if defect > 1e-10 {
            return Err(CoreError::NotHermitian(defect));
        }
        Ok(Self {
            bundle: bundle.clone(),
            rel,
        })
    }

    /// The form of the metric itself: v = h.
    pub fn from_metric(h: &MetricState) -> Self {
        Self {
            bundle: h.bundle.clone(),
            rel: h.rel.clone(),
        }
    }

    pub fn bundle(&self) -> &BundleSpec {
        &self.bundle
    }

    pub fn relative(&self) -> &MatrixField {
        &self.rel
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            bundle: self.bundle.clone(),
            rel: self.rel.add(&other.rel),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            bundle: self.bundle.clone(),
            rel: self.rel.scaled(Complex64::new(c, 0.0)),
        }
    }
}

/// Endomorphism associated to h and v: matrices H^{-1}V = F^{-1}Φ.
pub fn endo_from_form(h: &MetricState, v: &HermitianFormField) -> Result<MatrixField> {
    if !h.bundle.compatible(&v.bundle) {
        return Err(CoreError::BundleMismatch("endo_from_form".into()));
    }
    let finv = h.rel.inverse()?;
    Ok(finv.mul(&v.rel))
}

/// Hermitian form associated to h and a h-Hermitian endomorphism f:
/// matrices V = H·f, i.e. Φ = F·f.
pub fn form_from_endo(h: &MetricState, f: &MatrixField) -> Result<HermitianFormField> {
    let defect = h_hermitian_defect(h, f);
    if defect > 1e-8 {
        return Err(CoreError::NotHermitian(defect));
    }
    Ok(HermitianFormField {
        bundle: h.bundle.clone(),
        rel: h.rel.mul(f),
    })
}

/// Deviation of f from being h-Hermitian: sup |HF − (HF)*| / (1 + |HF|).
pub fn h_hermitian_defect(h: &MetricState, f: &MatrixField) -> f64 {
    let r = h.bundle.rank();
    let mut worst: f64 = 0.0;
    for p in 0..h.bundle.geometry().points() {
        let hm = h.matrix_at(p);
        let hf = linalg::matmul(&hm, f.at(p), r, r, r);
        let scale = 1.0 + linalg::fro_norm(&hf);
        worst = worst.max(2.0 * linalg::hermitian_defect(&hf, r) / scale);
    }
    worst
}

fn href_hermitian_defect(bundle: &BundleSpec, f: &MatrixField) -> f64 {
    let geom = bundle.geometry();
    let r = bundle.rank();
    let n = geom.grid_n();
    let mut worst: f64 = 0.0;
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let href = bundle.reference().h(geom.point(js, kt), geom.tau());
            let hf = linalg::matmul(&href, f.at(p), r, r, r);
            let scale = 1.0 + linalg::fro_norm(&hf);
            worst = worst.max(2.0 * linalg::hermitian_defect(&hf, r) / scale);
        }
    }
    worst
}

fn href_min_eigenvalue(bundle: &BundleSpec, f: &MatrixField) -> f64 {
    // eigenvalues of the h_ref-Hermitian field f in the h_ref inner product
    let geom = bundle.geometry();
    let r = bundle.rank();
    let n = geom.grid_n();
    let mut min = f64::INFINITY;
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let href = bundle.reference().h(geom.point(js, kt), geom.tau());
            let w = linalg::hermitian_sqrt(&href, r);
            let winv = linalg::hermitian_inv_sqrt(&href, r);
            let m = linalg::matmul(&linalg::matmul(&w, f.at(p), r, r, r), &winv, r, r, r);
            min = min.min(linalg::min_eigenvalue(&m, r));
        }
    }
    min
}

fn href_function(
    bundle: &BundleSpec,
    f: &MatrixField,
    func: impl Fn(f64) -> f64,
) -> Result<MatrixField> {
    let geom = bundle.geometry();
    let r = bundle.rank();
    let n = geom.grid_n();
    let mut out = f.clone();
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let href = bundle.reference().h(geom.point(js, kt), geom.tau());
            let w = linalg::hermitian_sqrt(&href, r);
            let winv = linalg::hermitian_inv_sqrt(&href, r);
            let m = linalg::matmul(&linalg::matmul(&w, f.at(p), r, r, r), &winv, r, r, r);
            let fm = linalg::hermitian_function(&m, r, &func);
            let back = linalg::matmul(&linalg::matmul(&winv, &fm, r, r, r), &w, r, r, r);
            out.at_mut(p).copy_from_slice(&back);
        }
    }
    Ok(out)
}

/// Pointwise eigendecomposition in the h-inner product: applies the selected
/// function on the spectrum of a h-Hermitian field. The result is again
/// h-Hermitian.
pub fn functional_calculus(h: &MetricState, f: &MatrixField, func: Calc) -> Result<MatrixField> {
    let defect = h_hermitian_defect(h, f);
    if defect > 1e-8 {
        return Err(CoreError::NotHermitian(defect));
    }
    let geom = h.bundle.geometry();
    let r = h.bundle.rank();
    let needs_positive = matches!(func, Calc::Log | Calc::Power(_));
    let mut out = f.clone();
    for p in 0..geom.points() {
        let hm = h.matrix_at(p);
        let w = linalg::hermitian_sqrt(&hm, r);
        let winv = linalg::hermitian_inv_sqrt(&hm, r);
        let m = linalg::matmul(&linalg::matmul(&w, f.at(p), r, r, r), &winv, r, r, r);
        let (vals, _) = linalg::hermitian_eig(&m, r);
        if needs_positive && vals[0] <= 0.0 {
            return Err(CoreError::SpectrumOutOfDomain(format!(
                "eigenvalue {:.3e} not strictly positive",
                vals[0]
            )));
        }
        let fm = match func {
            Calc::Exp => linalg::hermitian_function(&m, r, f64::exp),
            Calc::Log => linalg::hermitian_function(&m, r, f64::ln),
            Calc::Power(s) => linalg::hermitian_function(&m, r, |x| x.powf(s)),
        };
        let back = linalg::matmul(&linalg::matmul(&winv, &fm, r, r, r), &w, r, r, r);
        out.at_mut(p).copy_from_slice(&back);
    }
    Ok(out)
}

/// Gauge action (a, v) ↦ a·v with matrices a*·V·a, so that
/// f^{a·h, a·v} = a^{-1} ∘ f^{h,v} ∘ a.
pub fn gauge_act(a: &MatrixField, v: &HermitianFormField) -> Result<HermitianFormField> {
    let bundle = &v.bundle;
    let geom = bundle.geometry();
    let r = bundle.rank();
    let n = geom.grid_n();
    let mut rel = v.rel.clone();
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let am = a.at(p);
            let d = linalg::det(am, r).norm();
            if d < 1e-14 {
                return Err(CoreError::Singular(d));
            }
            let href = bundle.reference().h(geom.point(js, kt), geom.tau());
            let vraw = linalg::matmul(&href, v.rel.at(p), r, r, r);
            let astar = linalg::adjoint(am, r, r);
            let transported = linalg::matmul(&linalg::matmul(&astar, &vraw, r, r, r), am, r, r, r);
            let href_inv = linalg::inverse(&href, r)?;
            let new_rel = linalg::matmul(&href_inv, &transported, r, r, r);
            rel.at_mut(p).copy_from_slice(&new_rel);
        }
    }
    Ok(HermitianFormField {
        bundle: bundle.clone(),
        rel,
    })
}

/// Gauge action on a metric (positive form).
pub fn gauge_act_metric(a: &MatrixField, h: &MetricState) -> Result<MetricState> {
    let form = gauge_act(a, &HermitianFormField::from_metric(h))?;
    MetricState::from_relative(&h.bundle, form.rel)
}

/// Pointwise Cholesky witness of gauge transitivity: an a with
/// h = gauge_act(a, k).
pub fn gauge_transitivity_witness(h: &MetricState, k: &MetricState) -> Result<MatrixField> {
    if !h.bundle.compatible(&k.bundle) {
        return Err(CoreError::BundleMismatch("gauge witness".into()));
    }
    let r = h.bundle.rank();
    let geom = h.bundle.geometry();
    let mut out = MatrixField::zeros(
        geom,
        r,
        r,
        Bidegree::Zero,
        Covariance::Periodic,
    );
    for p in 0..geom.points() {
        let hm = h.matrix_at(p);
        let km = k.matrix_at(p);
        // H = T_H^* T_H, K = T_K^* T_K  ⇒  a = T_K^{-1} T_H satisfies a*Ka = H
        let th = linalg::cholesky_upper(&hm, r)?;
        let tk = linalg::cholesky_upper(&km, r)?;
        let tk_inv = linalg::inverse(&tk, r)?;
        let a = linalg::matmul(&tk_inv, &th, r, r, r);
        out.at_mut(p).copy_from_slice(&a);
    }
    Ok(out)
}

/// L² inner product (v, w)_h = ∫_X Tr(f^{h,v} ∘ f^{h,w}) σ_g.
pub fn inner_product(
    h: &MetricState,
    v: &HermitianFormField,
    w: &HermitianFormField,
) -> Result<f64> {
    if !h.bundle.compatible(&v.bundle) || !h.bundle.compatible(&w.bundle) {
        return Err(CoreError::BundleMismatch("inner_product".into()));
    }
    let fv = endo_from_form(h, v)?;
    let fw = endo_from_form(h, w)?;
    let tr = fv.mul(&fw).trace_field();
    Ok(integrate(&tr)?.re)
}

/// Squared L² norm of a Hermitian form at h.
pub fn form_norm_sq(h: &MetricState, v: &HermitianFormField) -> Result<f64> {
    inner_product(h, v, v)
}

/// Parameterization of a path of metrics.
#[derive(Clone, Debug)]
pub enum PathKind {
    /// h_t = ĥ(h, exp(t·S)) with the constant velocity S = log f^{h,k}.
    Geodesic,
    /// H_t = (1−t)H + tK.
    Linear,
    /// Externally supplied samples; tangents by central differences.
    Custom,
}

/// Sampled path in Herm⁺(E) with analytic tangents where available.
#[derive(Clone, Debug)]
pub struct MetricPath {
    kind: PathKind,
    samples: Vec<MetricState>,
    /// Geodesic velocity field S (kind = Geodesic only).
    velocity: Option<MatrixField>,
}

impl MetricPath {
    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    pub fn nodes(&self) -> usize {
        self.samples.len()
    }

    pub fn sample(&self, i: usize) -> &MetricState {
        &self.samples[i]
    }

    pub fn start(&self) -> &MetricState {
        &self.samples[0]
    }

    pub fn end(&self) -> &MetricState {
        self.samples.last().unwrap()
    }

    /// Node position t_i on [0,1].
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / (self.samples.len() - 1) as f64
    }

    /// Tangent endomorphism f^{h_t, h'_t} at node i.
    pub fn tangent_endo(&self, i: usize) -> Result<MatrixField> {
        match self.kind {
            PathKind::Geodesic => Ok(self.velocity.clone().expect("geodesic velocity")),
            PathKind::Linear => {
                // f = H_t^{-1}(K − H) = F_t^{-1}(F_k − F_h)
                let diff = self
                    .samples
                    .last()
                    .unwrap()
                    .rel
                    .sub(&self.samples[0].rel);
                let finv = self.samples[i].rel.inverse()?;
                Ok(finv.mul(&diff))
            }
            PathKind::Custom => {
                let m = self.samples.len();
                let dt = 1.0 / (m - 1) as f64;
                let (a, b, scale) = if i == 0 {
                    (0, 1, 1.0 / dt)
                } else if i == m - 1 {
                    (m - 2, m - 1, 1.0 / dt)
                } else {
                    (i - 1, i + 1, 1.0 / (2.0 * dt))
                };
                let diff = self.samples[b].rel.sub(&self.samples[a].rel);
                let finv = self.samples[i].rel.inverse()?;
                Ok(finv.mul(&diff).scaled(Complex64::new(scale, 0.0)))
            }
        }
    }

    /// Reversed path.
    pub fn reversed(&self) -> MetricPath {
        let mut samples = self.samples.clone();
        samples.reverse();
        MetricPath {
            kind: match self.kind {
                PathKind::Geodesic => PathKind::Geodesic,
                PathKind::Linear => PathKind::Linear,
                PathKind::Custom => PathKind::Custom,
            },
            samples,
            velocity: self
                .velocity
                .as_ref()
                .map(|v| v.scaled(Complex64::new(-1.0, 0.0))),
        }
    }

    pub fn from_samples(samples: Vec<MetricState>) -> MetricPath {
        assert!(samples.len() >= 3 && samples.len() % 2 == 1);
        MetricPath {
            kind: PathKind::Custom,
            samples,
            velocity: None,
        }
    }
}

/// Geodesic from h to k sampled at `nodes` Simpson points:
/// h_t = ĥ(h, exp(t·S)), S = log f^{h,k}; endpoints exact.
pub fn geodesic_path(h: &MetricState, k: &MetricState, nodes: usize) -> Result<MetricPath> {
    assert!(nodes >= 3 && nodes % 2 == 1, "Simpson quadrature needs odd nodes >= 3");
    if !h.bundle.compatible(&k.bundle) {
        return Err(CoreError::BundleMismatch("geodesic".into()));
    }
    let fhk = endo_from_form(h, &HermitianFormField::from_metric(k))?;
    let s = functional_calculus(h, &fhk, Calc::Log)?;
    let mut samples = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = i as f64 / (nodes - 1) as f64;
        if i == 0 {
            samples.push(h.clone());
        } else if i == nodes - 1 {
            samples.push(k.clone());
        } else {
            let ts = s.scaled(Complex64::new(t, 0.0));
            let exp_ts = functional_calculus(h, &ts, Calc::Exp)?;
            let rel = h.rel.mul(&exp_ts);
            samples.push(MetricState::from_relative(&h.bundle, rel)?);
        }
    }
    Ok(MetricPath {
        kind: PathKind::Geodesic,
        samples,
        velocity: Some(s),
    })
}

/// Linear path H_t = (1−t)H + tK at `nodes` Simpson points.
pub fn linear_path(h: &MetricState, k: &MetricState, nodes: usize) -> Result<MetricPath> {
    assert!(nodes >= 3 && nodes % 2 == 1);
    if !h.bundle.compatible(&k.bundle) {
        return Err(CoreError::BundleMismatch("linear path".into()));
    }
    let mut samples = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let t = i as f64 / (nodes - 1) as f64;
        let rel = h
            .rel
            .scaled(Complex64::new(1.0 - t, 0.0))
            .add(&k.rel.scaled(Complex64::new(t, 0.0)));
        samples.push(MetricState::from_relative(&h.bundle, rel)?);
    }
    Ok(MetricPath {
        kind: PathKind::Linear,
        samples,
        velocity: None,
    })
}

/// Deterministic band-limited random Hermitian exponent respecting the
/// bundle's field capability; sup norm scaled to `amplitude`.
pub fn random_exponent(
    bundle: &BundleSpec,
    seed: u64,
    amplitude: f64,
    band: usize,
) -> MatrixField {
    let geom = bundle.geometry();
    let r = bundle.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = band.max(1) as i64;
    // independent real band-limited scalar fields
    let mut scalar = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut coeffs = Vec::new();
        for m in -band..=band {
            for nn in -band..=band {
                if m == 0 && nn == 0 {
                    continue;
                }
                let re: f64 = rng.gen_range(-1.0..1.0);
                let im: f64 = rng.gen_range(-1.0..1.0);
                coeffs.push((m, nn, Complex64::new(re, im)));
            }
        }
        let n = geom.grid_n();
        let mut vals = vec![0.0; geom.points()];
        for kt in 0..n {
            for js in 0..n {
                let s = js as f64 / n as f64;
                let t = kt as f64 / n as f64;
                let mut acc = 0.0;
                for &(m, nn, c) in &coeffs {
                    let phase = 2.0 * std::f64::consts::PI * (m as f64 * s + nn as f64 * t);
                    acc += c.re * phase.cos() - c.im * phase.sin();
                }
                vals[geom.index(js, kt)] = acc;
            }
        }
        vals
    };

    let mut entries: Vec<Vec<f64>> = Vec::new();
    let cap = bundle.capability();
    let slots = match cap {
        FieldCapability::Scalar => 1,
        FieldCapability::Diagonal => r,
        FieldCapability::Full => r * r,
    };
    for _ in 0..slots {
        entries.push(scalar(&mut rng));
    }

    let mut field = MatrixField::zeros(geom, r, r, Bidegree::Zero, bundle.endo_covariance());
    for p in 0..geom.points() {
        let m = field.at_mut(p);
        match cap {
            FieldCapability::Scalar => {
                for i in 0..r {
                    m[i * r + i] = Complex64::new(entries[0][p], 0.0);
                }
            }
            FieldCapability::Diagonal => {
                for i in 0..r {
                    m[i * r + i] = Complex64::new(entries[i][p], 0.0);
                }
            }
            FieldCapability::Full => {
                // Hermitian assembly: diagonal real, off-diagonal pairs
                for i in 0..r {
                    m[i * r + i] = Complex64::new(entries[i * r + i][p], 0.0);
                }
                for i in 0..r {
                    for j in (i + 1)..r {
                        let re = entries[i * r + j][p];
                        let im = entries[j * r + i][p];
                        m[i * r + j] = Complex64::new(re, im);
                        m[j * r + i] = Complex64::new(re, -im);
                    }
                }
            }
        }
    }
    // flat-Hermitian exponent is h_ref-Hermitian for our reference metrics
    // only when it commutes with H_ref; symmetrize in the h_ref inner product
    let field = href_symmetrize(bundle, &field);
    let sup = field.sup_norm();
    if sup > 0.0 {
        field.scaled(Complex64::new(amplitude / sup, 0.0))
    } else {
        field
    }
}

fn href_symmetrize(bundle: &BundleSpec, f: &MatrixField) -> MatrixField {
    let geom = bundle.geometry();
    let r = bundle.rank();
    let n = geom.grid_n();
    let mut out = f.clone();
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let href = bundle.reference().h(geom.point(js, kt), geom.tau());
            let hf = linalg::matmul(&href, f.at(p), r, r, r);
            let sym = linalg::hermitian_part(&hf, r);
            let hinv = linalg::inverse(&href, r).expect("reference positive");
            let new = linalg::matmul(&hinv, &sym, r, r, r);
            out.at_mut(p).copy_from_slice(&new);
        }
    }
    out
}

/// Random conformal perturbation of the reference metric.
pub fn random_conformal_metric(
    bundle: &BundleSpec,
    seed: u64,
    amplitude: f64,
    band: usize,
) -> Result<MetricState> {
    let geom = bundle.geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = band.max(1) as i64;
    let mut coeffs = Vec::new();
    for m in -band..=band {
        for nn in -band..=band {
            if m == 0 && nn == 0 {
                continue;
            }
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            coeffs.push((m, nn, Complex64::new(re, im)));
        }
    }
    let u = geom.sample_st(|s, t| {
        let mut acc = 0.0;
        for &(m, nn, c) in &coeffs {
            let phase = 2.0 * std::f64::consts::PI * (m as f64 * s + nn as f64 * t);
            acc += c.re * phase.cos() - c.im * phase.sin();
        }
        Complex64::new(acc, 0.0)
    });
    let sup = u.sup_norm();
    let u = if sup > 0.0 {
        u.scaled(Complex64::new(amplitude / sup, 0.0))
    } else {
        u
    };
    MetricState::reference(bundle)?.conformal(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{line_bundle, make_preset, Preset};
    use crate::geometry::TorusGeometry;

    fn geom() -> TorusGeometry {
        TorusGeometry::new(Complex64::new(0.0, 1.0), 16).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn atiyah(g: &TorusGeometry) -> BundleSpec {
        make_preset(g, &Preset::AtiyahF2 { beta: c(1.0, 0.0) }, 0.0).unwrap()
    }

    #[test]
    fn endo_of_metric_itself_is_identity() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 5, 0.4);
        let f = endo_from_form(&h, &HermitianFormField::from_metric(&h)).unwrap();
        let id = MatrixField::identity(&g, 2, b.endo_covariance());
        assert!(f.sub(&id).sup_norm() < 1e-12);
    }

    fn random_metric(b: &BundleSpec, seed: u64, amp: f64) -> MetricState {
        let s = random_exponent(b, seed, amp, 2);
        MetricState::from_exponent(b, s).unwrap()
    }

    #[test]
    fn constant_diagonal_dictionary_example() {
        // H = diag(2,1), V = diag(4,3) ⇒ f = diag(2,3)
        let g = geom();
        let b = atiyah(&g);
        let mut hrel = MatrixField::identity(&g, 2, b.endo_covariance());
        let mut vrel = MatrixField::identity(&g, 2, b.endo_covariance());
        for p in 0..g.points() {
            let hm = hrel.at_mut(p);
            hm[0] = c(2.0, 0.0);
            hm[3] = c(1.0, 0.0);
            let vm = vrel.at_mut(p);
            vm[0] = c(4.0, 0.0);
            vm[3] = c(3.0, 0.0);
        }
        let h = MetricState::from_relative(&b, hrel).unwrap();
        let v = HermitianFormField::from_relative(&b, vrel).unwrap();
        let f = endo_from_form(&h, &v).unwrap();
        assert!((f.at(0)[0] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((f.at(0)[3] - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dictionary_composition_rule() {
        // f^{k,ĥ(h,v)->v?}: composition f^{k,h} ∘ f^{h,v} = f^{k,v}
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 1, 0.3);
        let k = random_metric(&b, 2, 0.3);
        let vrel = random_exponent(&b, 3, 0.5, 2);
        let v = HermitianFormField::from_relative(&b, vrel).unwrap();
        let fkh = endo_from_form(&k, &HermitianFormField::from_metric(&h)).unwrap();
        let fhv = endo_from_form(&h, &v).unwrap();
        let fkv = endo_from_form(&k, &v).unwrap();
        let comp = fkh.mul(&fhv);
        assert!(comp.sub(&fkv).sup_norm() < 1e-10);
    }

    #[test]
    fn form_endo_roundtrip() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 7, 0.4);
        // an h-Hermitian endomorphism via the dictionary
        let vrel = random_exponent(&b, 8, 0.6, 2);
        let v = HermitianFormField::from_relative(&b, vrel).unwrap();
        let f = endo_from_form(&h, &v).unwrap();
        let v2 = form_from_endo(&h, &f).unwrap();
        assert!(v2.relative().sub(v.relative()).sup_norm() < 1e-11);
        // identity maps to the metric itself
        let id = MatrixField::identity(&g, 2, b.endo_covariance());
        let vh = form_from_endo(&h, &id).unwrap();
        assert!(vh.relative().sub(h.relative()).sup_norm() < 1e-12);
    }

    #[test]
    fn dictionary_linearity() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 11, 0.3);
        let v1 = HermitianFormField::from_relative(&b, random_exponent(&b, 12, 0.5, 2)).unwrap();
        let v2 = HermitianFormField::from_relative(&b, random_exponent(&b, 13, 0.5, 2)).unwrap();
        let lin = v1.scaled(0.7).add(&v2.scaled(-1.3));
        let f_lin = endo_from_form(&h, &lin).unwrap();
        let f_sep = endo_from_form(&h, &v1)
            .unwrap()
            .scaled(c(0.7, 0.0))
            .add(&endo_from_form(&h, &v2).unwrap().scaled(c(-1.3, 0.0)));
        assert!(f_lin.sub(&f_sep).sup_norm() < 1e-12);
    }

    #[test]
    fn fhk_inverse_and_two_sided_hermiticity() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 21, 0.4);
        let k = random_metric(&b, 22, 0.4);
        let fhk = endo_from_form(&h, &HermitianFormField::from_metric(&k)).unwrap();
        let fkh = endo_from_form(&k, &HermitianFormField::from_metric(&h)).unwrap();
        let prod = fhk.mul(&fkh);
        let id = MatrixField::identity(&g, 2, b.endo_covariance());
        assert!(prod.sub(&id).sup_norm() < 1e-12);
        // f^{h,k} is both h- and k-Hermitian
        assert!(h_hermitian_defect(&h, &fhk) < 1e-10);
        assert!(h_hermitian_defect(&k, &fhk) < 1e-10);
    }

    #[test]
    fn functional_calculus_pairs() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 31, 0.3);
        let s = random_exponent(&b, 32, 0.8, 2);
        // exp(0) = id
        let zero = MatrixField::zeros(&g, 2, 2, Bidegree::Zero, b.endo_covariance());
        let e0 = functional_calculus(&h, &zero, Calc::Exp).unwrap();
        let id = MatrixField::identity(&g, 2, b.endo_covariance());
        assert!(e0.sub(&id).sup_norm() < 1e-13);
        // log(exp(S)) = S — S must be h-Hermitian, so symmetrize against h
        let hs = functional_calculus(&h, &href_symmetrize_for_test(&h, &s), Calc::Exp).unwrap();
        let back = functional_calculus(&h, &hs, Calc::Log).unwrap();
        assert!(back.sub(&href_symmetrize_for_test(&h, &s)).sup_norm() < 1e-10);
        // sqrt squared
        let f = functional_calculus(&h, &hs, Calc::Power(0.5)).unwrap();
        assert!(f.mul(&f).sub(&hs).sup_norm() < 1e-10);
        // log of a non-positive field is rejected
        let neg = id.scaled(c(-1.0, 0.0));
        assert!(matches!(
            functional_calculus(&h, &neg, Calc::Log),
            Err(CoreError::SpectrumOutOfDomain(_))
        ));
    }

    fn href_symmetrize_for_test(h: &MetricState, f: &MatrixField) -> MatrixField {
        let r = h.bundle().rank();
        let mut out = f.clone();
        for p in 0..h.bundle().geometry().points() {
            let hm = h.matrix_at(p);
            let hf = linalg::matmul(&hm, f.at(p), r, r, r);
            let sym = linalg::hermitian_part(&hf, r);
            let hinv = linalg::inverse(&hm, r).unwrap();
            let m = linalg::matmul(&hinv, &sym, r, r, r);
            out.at_mut(p).copy_from_slice(&m);
        }
        out
    }

    #[test]
    fn eigenvalues_of_h_hermitian_fields_are_real() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 41, 0.4);
        let v = HermitianFormField::from_relative(&b, random_exponent(&b, 42, 0.7, 2)).unwrap();
        let f = endo_from_form(&h, &v).unwrap();
        // eigenvalues of the non-symmetric pointwise 2x2 matrix must be real
        for p in (0..g.points()).step_by(37) {
            let m = f.at(p);
            let tr = m[0] + m[3];
            let det = m[0] * m[3] - m[1] * m[2];
            let disc = (tr * tr - det * 4.0).sqrt();
            for lam in [(tr + disc) * 0.5, (tr - disc) * 0.5] {
                assert!(lam.im.abs() < 1e-10, "imaginary part {}", lam.im);
            }
        }
    }

    #[test]
    fn gauge_action_identities() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 51, 0.3);
        let v = HermitianFormField::from_relative(&b, random_exponent(&b, 52, 0.5, 2)).unwrap();
        // identity acts trivially
        let id = MatrixField::identity(&g, 2, b.endo_covariance());
        let v2 = gauge_act(&id, &v).unwrap();
        assert!(v2.relative().sub(v.relative()).sup_norm() < 1e-13);
        // transitivity witness
        let k = random_metric(&b, 53, 0.3);
        let a = gauge_transitivity_witness(&h, &k).unwrap();
        let hk = gauge_act_metric(&a, &k).unwrap();
        assert!(hk.sup_distance(&h) < 1e-10);
        // conjugation identity f^{ah,av} = a^{-1} f^{h,v} a
        let ah = gauge_act_metric(&a, &h).unwrap();
        let av = gauge_act(&a, &v).unwrap();
        let lhs = endo_from_form(&ah, &av).unwrap();
        let fhv = endo_from_form(&h, &v).unwrap();
        let ainv = a.inverse().unwrap();
        let rhs = ainv.mul(&fhv).mul(&a);
        assert!(lhs.sub(&rhs).sup_norm() < 1e-10);
    }

    #[test]
    fn inner_product_properties() {
        let g = geom();
        let b = atiyah(&g);
        let h = random_metric(&b, 61, 0.3);
        // (h,h)_h = r·Vol
        let vh = HermitianFormField::from_metric(&h);
        let hh = inner_product(&h, &vh, &vh).unwrap();
        assert!((hh - 2.0 * g.volume()).abs() < 1e-10);
        // positive definiteness
        let v = HermitianFormField::from_relative(&b, random_exponent(&b, 62, 0.5, 2)).unwrap();
        assert!(form_norm_sq(&h, &v).unwrap() > 0.0);
        // gauge invariance
        let k = random_metric(&b, 63, 0.3);
        let a = gauge_transitivity_witness(&h, &k).unwrap();
        let w = HermitianFormField::from_relative(&b, random_exponent(&b, 64, 0.5, 2)).unwrap();
        let lhs = inner_product(
            &gauge_act_metric(&a, &h).unwrap(),
            &gauge_act(&a, &v).unwrap(),
            &gauge_act(&a, &w).unwrap(),
        )
        .unwrap();
        let rhs = inner_product(&h, &v, &w).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn geodesic_properties() {
        let g = geom();
        let b = line_bundle(&g, 0, 0.0);
        let h = MetricState::reference(&b).unwrap();
        // constant path for k = h
        let p = geodesic_path(&h, &h, 5).unwrap();
        for i in 0..5 {
            assert!(p.sample(i).sup_distance(&h) < 1e-14);
        }
        // conformal endpoints: midpoint is e^{u/2} h
        let u = g.sample_st(|s, _| c((2.0 * std::f64::consts::PI * s).cos(), 0.0));
        let k = h.conformal(&u).unwrap();
        let p = geodesic_path(&h, &k, 5).unwrap();
        let mid = p.sample(2);
        let expect = h.conformal(&u.scaled(c(0.5, 0.0))).unwrap();
        assert!(mid.sup_distance(&expect) < 1e-12);
        // the velocity f^{h_t,h'_t} is t-independent by construction; check
        // against a finite difference of the samples
        let fd = p.sample(3).relative().sub(p.sample(1).relative());
        let finv = p.sample(2).relative().inverse().unwrap();
        let numeric = finv.mul(&fd).scaled(c(1.0 / (2.0 * 0.25), 0.0));
        let analytic = p.tangent_endo(2).unwrap();
        assert!(numeric.sub(&analytic).sup_norm() < 2e-2);
    }

    #[test]
    fn degenerate_metric_rejected() {
        let g = geom();
        let b = atiyah(&g);
        let mut rel = MatrixField::identity(&g, 2, b.endo_covariance());
        for p in 0..g.points() {
            rel.at_mut(p)[0] = c(1e-15, 0.0);
        }
        assert!(matches!(
            MetricState::from_relative(&b, rel),
            Err(CoreError::DegenerateMetric(_))
        ));
    }

    #[test]
    fn heisenberg_scalar_capability() {
        let g = geom();
        let b = make_preset(&g, &Preset::Heisenberg { rank: 3, p: 1 }, 0.0).unwrap();
        let s = random_exponent(&b, 77, 0.5, 2);
        // scalar capability: exponent is a multiple of the identity
        let m = s.at(5);
        assert!((m[0] - m[4]).norm() < 1e-14 && (m[4] - m[8]).norm() < 1e-14);
        let h = MetricState::from_exponent(&b, s).unwrap();
        assert!(h.seam_residual() < 1e-12);
    }
}
