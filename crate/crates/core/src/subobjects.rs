//! Sub-bundles and quotients: induced metrics, orthogonal splittings, second
//! fundamental forms, the twisted Gauss-Codazzi equations, slope verdicts
//! against declared witnesses, and the weakly-holomorphic-subbundle
//! residuals of the Uhlenbeck-Yau destabilizer.
//!
//! The quotient is represented on the fixed coordinate p: E → Q carried by
//! the witness; the h-dependence of the splitting sits entirely in the
//! orthogonal lift φ_h = H^{-1}p*(pH^{-1}p*)^{-1}, which satisfies
//! p∘φ_h = id_Q and π_h∘φ_h = 0. The second fundamental forms are
//!
//!   A = p ∘ D^{1,0} ∘ f   ∈ A^{1,0}(Hom(S,Q)),
//!   C = π ∘ ∂̄_E ∘ φ      ∈ A^{0,1}(Hom(Q,S)),
//!
//! and the block Gauss-Codazzi reconstruction is checked against the
//! directly computed curvature expressed in the h-adapted frame.

use num_complex::Complex64;

use crate::bundle::{BundleSpec, InclusionSpec};
use crate::chern::{self, chern_connection, curvature};
use crate::error::CoreError;
use crate::field::{MatrixField, Covariance};
use crate::geometry::{integrate, Bidegree, DiffDirection, ScalarField};
use crate::linalg::{self, CMat};
use crate::metric::MetricState;
use crate::Result;

/// Induced data of the C^∞ splitting E = S ⊕ S^⊥ determined by h.
#[derive(Clone, Debug)]
pub struct SplitStructure {
    pub sub_metric: MetricState,
    pub quotient_metric: MetricState,
    /// π_h : E → S with π∘f = id_S and kernel S^⊥.
    pub projection_to_sub: MatrixField,
    /// φ_h : Q → E with p∘φ = id_Q, image S^⊥.
    pub splitting_from_quotient: MatrixField,
    /// A = p∘D^{1,0}∘f, bidegree (1,0), valued in Hom(S,Q).
    pub second_form_a: MatrixField,
    /// C = π∘∂̄_E∘φ, bidegree (0,1), valued in Hom(Q,S).
    pub second_form_c: MatrixField,
}

/// Verdict of the witness-based slope comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum VerdictKind {
    StableAmongWitnesses,
    StrictlySemistableWitnessed,
    UnstableWitnessed,
}

/// Slopes of the bundle and of every declared witness sub-bundle.
#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub verdict: VerdictKind,
    pub slope_total: f64,
    /// (witness index, sub rank, μ(S_i))
    pub witness_slopes: Vec<(usize, usize, f64)>,
}

const SLOPE_EQ_TOL: f64 = 1e-6;

/// Raw metric matrices of h sampled on the grid (pointwise only).
fn raw_metric(h: &MetricState) -> Vec<CMat> {
    let geom = h.bundle().geometry();
    (0..geom.points()).map(|p| h.matrix_at(p)).collect()
}

/// Induced metrics, projections and second fundamental forms for a declared
/// witness sub-bundle.
pub fn induced_structures(
    bundle: &BundleSpec,
    incl: &InclusionSpec,
    h: &MetricState,
) -> Result<SplitStructure> {
    let geom = bundle.geometry();
    let r = bundle.rank();
    let s = incl.sub_rank();
    let q = incl.quotient_rank();
    let f = &incl.inclusion_field;
    let p0 = &incl.quotient_coordinate;
    let hraw = raw_metric(h);

    let mut pi = MatrixField::zeros(geom, s, r, Bidegree::Zero, Covariance::Morphism {
        codomain: incl.sub.multiplier().clone(),
        domain: bundle.multiplier().clone(),
    });
    let mut phi = MatrixField::zeros(geom, r, q, Bidegree::Zero, Covariance::Morphism {
        codomain: bundle.multiplier().clone(),
        domain: incl.quotient.multiplier().clone(),
    });
    let mut sub_rel = MatrixField::zeros(geom, s, s, Bidegree::Zero, incl.sub.endo_covariance());
    let mut quo_rel = MatrixField::zeros(geom, q, q, Bidegree::Zero, incl.quotient.endo_covariance());

    let tau = geom.tau();
    let n = geom.grid_n();
    for kt in 0..n {
        for js in 0..n {
            let p = geom.index(js, kt);
            let z = geom.point(js, kt);
            let hm = &hraw[p];
            let fm = f.at(p);
            // injectivity: smallest eigenvalue of F*F
            let fstar = linalg::adjoint(fm, r, s);
            let ff = linalg::matmul(&fstar, fm, s, r, s);
            let min_sv = linalg::min_eigenvalue(&ff, s);
            if min_sv < 1e-12 {
                return Err(CoreError::NotInjective(min_sv.max(0.0).sqrt()));
            }
            // H_S = F*HF, π = H_S^{-1} F* H
            let fh = linalg::matmul(&fstar, hm, s, r, r);
            let hs = linalg::matmul(&fh, fm, s, r, s);
            let hs_inv = linalg::inverse(&hs, s)?;
            let pim = linalg::matmul(&hs_inv, &fh, s, s, r);
            pi.at_mut(p).copy_from_slice(&pim);
            // φ = H^{-1} P₀* (P₀ H^{-1} P₀*)^{-1}, H_Q = (P₀ H^{-1} P₀*)^{-1}
            let hinv = linalg::inverse(hm, r)?;
            let p0m = p0.at(p);
            let p0s = linalg::adjoint(p0m, q, r);
            let hp = linalg::matmul(&hinv, &p0s, r, r, q);
            let php = linalg::matmul(p0m, &hp, q, r, q);
            let hq = linalg::inverse(&php, q)?;
            let phim = linalg::matmul(&hp, &hq, r, q, q);
            phi.at_mut(p).copy_from_slice(&phim);
            // relative endomorphisms against the sub/quotient references
            let href_s = incl.sub.reference().h(z, tau);
            let href_q = incl.quotient.reference().h(z, tau);
            let rs = linalg::matmul(&linalg::inverse(&href_s, s)?, &hs, s, s, s);
            let rq = linalg::matmul(&linalg::inverse(&href_q, q)?, &hq, q, q, q);
            sub_rel.at_mut(p).copy_from_slice(&rs);
            quo_rel.at_mut(p).copy_from_slice(&rq);
        }
    }

    let sub_metric = MetricState::from_relative(&incl.sub, sub_rel)?;
    let quotient_metric = MetricState::from_relative(&incl.quotient, quo_rel)?;

    // C = π ∘ (∂̄φ + Aφ): the quotient connection term dies under π∘φ = 0
    let dphi = phi.derivative(DiffDirection::Antiholomorphic)?;
    let aphi = bundle.dolbeault_deformation().mul(&phi);
    let mut c_form = pi.mul(&dphi.add(&aphi));
    c_form.set_bidegree(Bidegree::ZeroOne);

    // A = p ∘ D^{1,0} f = p(∂F + Γ_total F − F Γ_S): the pF = 0 relation
    // kills the sub connection term
    let gamma = chern_connection(bundle, h)?;
    let df = f.derivative(DiffDirection::Holomorphic)?;
    let mut a_form = p0.mul(&df.add(&gamma.mul(f)));
    a_form.set_bidegree(Bidegree::OneZero);

    Ok(SplitStructure {
        sub_metric,
        quotient_metric,
        projection_to_sub: pi,
        splitting_from_quotient: phi,
        second_form_a: a_form,
        second_form_c: c_form,
    })
}

/// h-adjoint of C: C* = H_Q^{-1} C_m* H_S as a (1,0) form in Hom(S,Q).
pub fn second_form_adjoint(split: &SplitStructure) -> Result<MatrixField> {
    let c = &split.second_form_c;
    let s = c.rows();
    let q = c.cols();
    let geom = split.sub_metric.bundle().geometry();
    let mut out = MatrixField::zeros(geom, q, s, Bidegree::OneZero, Covariance::Periodic);
    for p in 0..geom.points() {
        let hs = split.sub_metric.matrix_at(p);
        let hq = split.quotient_metric.matrix_at(p);
        let cm = c.at(p);
        let cstar = linalg::adjoint(cm, s, q);
        let t = linalg::matmul(&linalg::inverse(&hq, q)?, &cstar, q, q, s);
        let m = linalg::matmul(&t, &hs, q, s, s);
        out.at_mut(p).copy_from_slice(&m);
    }
    Ok(out)
}

/// ‖C_h‖²_{L²} = ∫ 2·Tr(C H_Q^{-1} C* H_S) σ_g, the metric L² norm of the
/// second fundamental form.
pub fn c_norm_sq(split: &SplitStructure) -> Result<f64> {
    let c = &split.second_form_c;
    let s = c.rows();
    let q = c.cols();
    let geom = split.sub_metric.bundle().geometry();
    let mut vals = Vec::with_capacity(geom.points());
    for p in 0..geom.points() {
        let hs = split.sub_metric.matrix_at(p);
        let hq = split.quotient_metric.matrix_at(p);
        let cm = c.at(p);
        let cstar = linalg::adjoint(cm, s, q);
        let t = linalg::matmul(cm, &linalg::inverse(&hq, q)?, s, q, q);
        let t = linalg::matmul(&t, &cstar, s, q, s);
        let t = linalg::matmul(&t, &hs, s, s, s);
        vals.push(Complex64::new(2.0 * linalg::trace(&t, s).re, 0.0));
    }
    let field = ScalarField::from_values(geom, Bidegree::Zero, vals);
    Ok(integrate(&field)?.re)
}

/// Sup-norm deviation of the block Gauss-Codazzi reconstruction
/// [[R_S − C∧C*, D^{1,0}C], [−D^{0,1}C*, R_Q − C*∧C]] from the directly
/// computed curvature expressed in the h-adapted frame.
pub fn gauss_codazzi_residual(
    bundle: &BundleSpec,
    incl: &InclusionSpec,
    h: &MetricState,
) -> Result<f64> {
    let split = induced_structures(bundle, incl, h)?;
    let s = incl.sub_rank();
    let q = incl.quotient_rank();
    let geom = bundle.geometry();

    // direct curvature in the adapted frame
    let r_e = curvature(bundle, h)?.value;
    let f = &incl.inclusion_field;
    let p0 = &incl.quotient_coordinate;
    let pi = &split.projection_to_sub;
    let phi = &split.splitting_from_quotient;
    let r_ss = pi.mul(&r_e.mul(f));
    let r_sq = pi.mul(&r_e.mul(phi));
    let r_qs = p0.mul(&r_e.mul(f));
    let r_qq = p0.mul(&r_e.mul(phi));

    // block reconstruction
    let r_s = curvature(&incl.sub, &split.sub_metric)?.value;
    let r_q = curvature(&incl.quotient, &split.quotient_metric)?.value;
    let c = &split.second_form_c;
    let cstar = second_form_adjoint(&split)?;
    let c_cstar = c.mul(&cstar); // (0,1)(1,0) wedge, Hom(S,S)
    let cstar_c = cstar.mul(c); // (1,0)(0,1) wedge, Hom(Q,Q)
    let top_left = r_s.sub(&c_cstar);
    let bottom_right = r_q.sub(&cstar_c);

    // D^{1,0} C on Hom(Q,S): ∂C + Γ_S∧C − C∧Γ_Q
    let gamma_s = chern_connection(&incl.sub, &split.sub_metric)?;
    let gamma_q = chern_connection(&incl.quotient, &split.quotient_metric)?;
    let top_right = c
        .derivative(DiffDirection::Holomorphic)?
        .add(&gamma_s.mul(c))
        .sub(&c.mul(&gamma_q));

    // −D^{0,1} C* on Hom(S,Q): the sub/quotient ∂̄ operators carry no
    // deformation for the presets in scope
    let bottom_left = cstar
        .derivative(DiffDirection::Antiholomorphic)?
        .scaled(Complex64::new(-1.0, 0.0));

    let mut worst: f64 = 0.0;
    for p in 0..geom.points() {
        let mut acc = 0.0;
        for (direct, recon, rows, cols) in [
            (r_ss.at(p), top_left.at(p), s, s),
            (r_sq.at(p), top_right.at(p), s, q),
            (r_qs.at(p), bottom_left.at(p), q, s),
            (r_qq.at(p), bottom_right.at(p), q, q),
        ] {
            let _ = (rows, cols);
            for (a, b) in direct.iter().zip(recon) {
                acc += (a - b).norm_sqr();
            }
        }
        worst = worst.max(acc.sqrt());
    }
    Ok(worst)
}

/// Slope comparison against every declared witness.
pub fn slope_verdict(bundle: &BundleSpec, h: &MetricState) -> Result<StabilityVerdict> {
    let rep = chern::bundle_report(bundle, h)?;
    let mu_total = rep.slope;
    if bundle.rank() == 1 {
        // line bundles are stable outright
        return Ok(StabilityVerdict {
            verdict: VerdictKind::StableAmongWitnesses,
            slope_total: mu_total,
            witness_slopes: Vec::new(),
        });
    }
    if bundle.declared_subbundles().is_empty() {
        return Err(CoreError::NoWitnesses);
    }
    let mut witness_slopes = Vec::new();
    let mut verdict = VerdictKind::StableAmongWitnesses;
    for (i, incl) in bundle.declared_subbundles().iter().enumerate() {
        let split = induced_structures(bundle, incl, h)?;
        let sub_rep = chern::bundle_report(&incl.sub, &split.sub_metric)?;
        let mu = sub_rep.slope;
        witness_slopes.push((i, incl.sub_rank(), mu));
        if mu > mu_total + SLOPE_EQ_TOL {
            verdict = VerdictKind::UnstableWitnessed;
        } else if (mu - mu_total).abs() <= SLOPE_EQ_TOL
            && verdict != VerdictKind::UnstableWitnessed
        {
            verdict = VerdictKind::StrictlySemistableWitnessed;
        }
    }
    Ok(StabilityVerdict {
        verdict,
        slope_total: mu_total,
        witness_slopes,
    })
}

/// The three residuals of the weakly holomorphic subbundle condition:
/// sup |π − π*_h|, sup |π − π²|, sup |(id − π)∘∂̄_E(π)|.
pub fn weakly_holo_residual(
    bundle: &BundleSpec,
    h: &MetricState,
    proj: &MatrixField,
) -> Result<(f64, f64, f64)> {
    let r = bundle.rank();
    let geom = bundle.geometry();
    let mut r_adj: f64 = 0.0;
    let mut r_idem: f64 = 0.0;
    for p in 0..geom.points() {
        let hm = h.matrix_at(p);
        let pm = proj.at(p);
        // h-adjoint: H^{-1} π* H
        let hinv = linalg::inverse(&hm, r)?;
        let pstar = linalg::adjoint(pm, r, r);
        let adj = linalg::matmul(&linalg::matmul(&hinv, &pstar, r, r, r), &hm, r, r, r);
        let da: f64 = pm
            .iter()
            .zip(&adj)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        r_adj = r_adj.max(da);
        let pp = linalg::matmul(pm, pm, r, r, r);
        let di: f64 = pm
            .iter()
            .zip(&pp)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        r_idem = r_idem.max(di);
    }
    let dbar_p = chern::dbar_end(bundle, proj)?;
    let id = MatrixField::identity(geom, r, bundle.endo_covariance());
    let complement = id.sub(proj);
    let r_dbar = complement.mul(&dbar_p).sup_norm();
    Ok((r_adj, r_idem, r_dbar))
}
