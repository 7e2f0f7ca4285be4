//! Twist data (α, B, ω) specialized to the two translation generators of the
//! torus cover.
//!
//! The Čech class of α is carried by the projective phase ε in
//!
//!   a_τ(z+1) · a_1(z) = ε · a_1(z+τ) · a_τ(z),
//!
//! and the B-field is the constant purely imaginary (1,1)-form
//! B = i·b·σ_g, stored by its real coefficient b. With constant B the
//! correction one-forms ω vanish and the compatibility dω = 0, B − B = dω
//! holds trivially.

use num_complex::Complex64;

use crate::bundle::BundleSpec;
use crate::chern;
use crate::error::CoreError;
use crate::field::Generator;
use crate::linalg;
use crate::metric::MetricState;
use crate::Result;

/// Projective multiplier phase, B-field coefficient and correction one-forms.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistDescriptor {
    /// Unit-modulus projective phase of the generator pair.
    pub epsilon: Complex64,
    /// B = i·b_coeff·σ_g.
    pub b_coeff: f64,
    /// Per-generator constant (1,0)-form coefficients; zero for constant B.
    pub omega: [Complex64; 2],
}

impl TwistDescriptor {
    pub fn trivial() -> Self {
        Self {
            epsilon: Complex64::new(1.0, 0.0),
            b_coeff: 0.0,
            omega: [Complex64::new(0.0, 0.0); 2],
        }
    }

    pub fn with_phase(epsilon: Complex64, b_coeff: f64) -> Self {
        Self {
            epsilon,
            b_coeff,
            omega: [Complex64::new(0.0, 0.0); 2],
        }
    }

    /// |ε| = 1 within 1e-14.
    pub fn is_unitary(&self) -> bool {
        (self.epsilon.norm() - 1.0).abs() < 1e-14
    }

    pub fn is_trivial(&self) -> bool {
        (self.epsilon - Complex64::new(1.0, 0.0)).norm() < 1e-12 && self.b_coeff.abs() < 1e-14
    }

    /// Equality of phases up to 1e-12.
    pub fn same_phase(&self, other: &Self) -> bool {
        (self.epsilon - other.epsilon).norm() < 1e-12
    }
}

/// Operation selector for twist arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistOp {
    Tensor,
    Dual,
    Conjugate,
}

/// Twist arithmetic under tensor, dual and conjugate.
///
/// Tensor multiplies phases and adds B-fields; the dual inverts the phase and
/// negates B (−B induces the twist α^{-1}); conjugation conjugates both.
pub fn twist_compose(a: &TwistDescriptor, b: &TwistDescriptor, op: TwistOp) -> TwistDescriptor {
    match op {
        TwistOp::Tensor => TwistDescriptor {
            epsilon: a.epsilon * b.epsilon,
            b_coeff: a.b_coeff + b.b_coeff,
            omega: [a.omega[0] + b.omega[0], a.omega[1] + b.omega[1]],
        },
        TwistOp::Dual => TwistDescriptor {
            epsilon: a.epsilon.inv(),
            b_coeff: -a.b_coeff,
            omega: [-a.omega[0], -a.omega[1]],
        },
        TwistOp::Conjugate => TwistDescriptor {
            epsilon: a.epsilon.conj(),
            b_coeff: -a.b_coeff,
            omega: [a.omega[0].conj(), a.omega[1].conj()],
        },
    }
}

/// Outcome of the projective cocycle check.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    /// Relative sup-norm defect of a_τ(z+1)a_1(z) = ε·a_1(z+τ)a_τ(z).
    pub defect: f64,
    /// Phase estimated from the multiplier data.
    pub epsilon: Complex64,
    /// Deviation of the estimate from the declared phase.
    pub declared_mismatch: f64,
    pub passes: bool,
}

/// Measure the projective commutation defect of the bundle multipliers over
/// the grid and estimate the twist phase.
pub fn validate_twist(bundle: &BundleSpec) -> Result<ValidationReport> {
    let geom = bundle.geometry();
    let tau = geom.tau();
    let r = bundle.rank();
    let mult = bundle.multiplier();
    if mult.rank() != r {
        return Err(CoreError::ShapeMismatch(format!(
            "multiplier rank {} vs bundle rank {}",
            mult.rank(),
            r
        )));
    }
    let n = geom.grid_n();
    let products = |z: Complex64| -> (Vec<Complex64>, Vec<Complex64>) {
        let p = linalg::matmul(
            &mult.eval(Generator::Tau, z + 1.0, tau),
            &mult.eval(Generator::One, z, tau),
            r,
            r,
            r,
        );
        let q = linalg::matmul(
            &mult.eval(Generator::One, z + tau, tau),
            &mult.eval(Generator::Tau, z, tau),
            r,
            r,
            r,
        );
        (p, q)
    };
    // First pass: estimate ε from tr(Q^{-1} P).
    let mut eps_acc = Complex64::new(0.0, 0.0);
    for kt in 0..n {
        for js in 0..n {
            let (p, q) = products(geom.point(js, kt));
            let qinv = linalg::inverse(&q, r)?;
            let ratio = linalg::matmul(&qinv, &p, r, r, r);
            eps_acc += linalg::trace(&ratio, r) / r as f64;
        }
    }
    let eps = eps_acc / (n * n) as f64;
    // Second pass: relative defect against the estimated phase.
    let mut defect: f64 = 0.0;
    for kt in 0..n {
        for js in 0..n {
            let (p, q) = products(geom.point(js, kt));
            let qn = linalg::fro_norm(&q);
            let diff: f64 = p
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - eps * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            defect = defect.max(diff / qn.max(1e-300));
        }
    }
    let declared_mismatch = (eps - bundle.twist().epsilon).norm();
    Ok(ValidationReport {
        defect,
        epsilon: eps,
        declared_mismatch,
        passes: defect < 1e-10 && declared_mismatch < 1e-10,
    })
}

/// Predicted and measured effect of shifting the B-field coefficient.
#[derive(Clone, Debug)]
pub struct ShiftReport {
    pub delta_degree: f64,
    pub delta_einstein_constant: f64,
    /// sup-norm change of K − c·id under the shift (should vanish).
    pub k_minus_c_change_sup: f64,
}

/// Predict the degree and Einstein-constant shifts induced by ΔB = i·Δb·σ_g
/// and measure that they cancel in K − c·id.
///
/// Δdeg = −(r/2π)·i·∫ΔB = (r·Δb·Vol)/(2π) and Δc = 2π·Δdeg/(r·Vol) = Δb.
pub fn b_shift_report(bundle: &BundleSpec, delta_b: f64) -> Result<ShiftReport> {
    let geom = bundle.geometry();
    let r = bundle.rank() as f64;
    let vol = geom.volume();
    let delta_degree = r * delta_b * vol / (2.0 * std::f64::consts::PI);
    let delta_c = delta_b;

    let shifted = bundle.with_b_coeff(bundle.twist().b_coeff + delta_b);
    let h0 = MetricState::reference(bundle)?;
    let h1 = MetricState::reference(&shifted)?;
    let k0 = chern::mean_curvature_deviation(bundle, &h0)?;
    let k1 = chern::mean_curvature_deviation(&shifted, &h1)?;
    let k_minus_c_change_sup = k1.sub(&k0).sup_norm();
    Ok(ShiftReport {
        delta_degree,
        delta_einstein_constant: delta_c,
        k_minus_c_change_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    #[test]
    fn tensor_of_opposite_phases_is_untwisted() {
        let a = TwistDescriptor::with_phase(phase(2.0 * std::f64::consts::PI / 3.0), 0.0);
        let b = TwistDescriptor::with_phase(phase(-2.0 * std::f64::consts::PI / 3.0), 0.0);
        let t = twist_compose(&a, &b, TwistOp::Tensor);
        assert!(t.is_trivial());
    }

    #[test]
    fn dual_inverts_phase_and_negates_b() {
        let a = TwistDescriptor::with_phase(phase(2.0 * std::f64::consts::PI / 3.0), 0.5);
        let d = twist_compose(&a, &a, TwistOp::Dual);
        assert!((d.epsilon - phase(-2.0 * std::f64::consts::PI / 3.0)).norm() < 1e-15);
        assert!((d.b_coeff + 0.5).abs() < 1e-15);
    }

    #[test]
    fn tensor_of_trivials_is_trivial() {
        let t = twist_compose(
            &TwistDescriptor::trivial(),
            &TwistDescriptor::trivial(),
            TwistOp::Tensor,
        );
        assert!(t.is_trivial());
    }

    #[test]
    fn twist_group_action_properties() {
        // tensor associative, dual is an involution, tensor with dual trivial
        let a = TwistDescriptor::with_phase(phase(0.7), 0.3);
        let b = TwistDescriptor::with_phase(phase(-1.1), -0.2);
        let c = TwistDescriptor::with_phase(phase(2.2), 1.0);
        let ab_c = twist_compose(&twist_compose(&a, &b, TwistOp::Tensor), &c, TwistOp::Tensor);
        let a_bc = twist_compose(&a, &twist_compose(&b, &c, TwistOp::Tensor), TwistOp::Tensor);
        assert!((ab_c.epsilon - a_bc.epsilon).norm() < 1e-15);
        assert!((ab_c.b_coeff - a_bc.b_coeff).abs() < 1e-15);

        let dd = twist_compose(&twist_compose(&a, &a, TwistOp::Dual), &a, TwistOp::Dual);
        assert!((dd.epsilon - a.epsilon).norm() < 1e-15);
        assert!((dd.b_coeff - a.b_coeff).abs() < 1e-15);

        let unit = twist_compose(&a, &twist_compose(&a, &a, TwistOp::Dual), TwistOp::Tensor);
        assert!(unit.is_trivial());
    }
}
