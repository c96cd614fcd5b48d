//! The Lagrangian `L(x, λ) = f(x) + ⟨λ, Φ(x)⟩`, the augmented Lagrangian
//!
//! ```text
//! 𝓛(x, λ, ρ) = f(x) + (ρ/2)·dist²(Φ(x) + λ/ρ; Q) − ‖λ‖²/(2ρ)
//! ```
//!
//! its gradients, a generalized Hessian in `x`, and the KKT residual
//! `σ(x, λ) = ‖∇ₓL(x, λ)‖ + ‖Φ(x) − Π_Q(Φ(x) + λ)‖`.
//!
//! With `μ := Π_{−Q}(ρΦ(x) + λ)` positive homogeneity of the projection gives
//! `(ρ/2)·dist²(Φ + λ/ρ; Q) = ‖μ‖²/(2ρ)`, which is how the value is computed.

use nalgebra::{DMatrix, DVector};

use crate::cone::{self, ConeVec};
use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::model::SocpProblem;

#[derive(Debug, Clone)]
pub struct LagrangianEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub hess_xx: DMatrix<f64>,
}

/// Value and gradients of the augmented Lagrangian at one `(x, λ, ρ)`.
#[derive(Debug, Clone)]
pub struct AugEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    /// `ρ⁻¹(polar_proj − λ)`.
    pub grad_lambda: DVector<f64>,
    /// `ρΦ(x) + λ`.
    pub shifted: ConeVec,
    /// `Π_{−Q}(ρΦ(x) + λ)`.
    pub polar_proj: ConeVec,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty parameter must be positive and finite, got {rho}"
        )));
    }
    Ok(())
}

fn check_dims(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<()> {
    p.check_x(x)?;
    p.check_lambda(lambda)
}

pub fn lagrangian_l(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<LagrangianEval> {
    check_dims(p, x, lambda)?;
    let phi = p.phi(x);
    let jac = p.phi_jac(x);
    Ok(LagrangianEval {
        value: p.f(x) + lambda.dot(&phi),
        grad_x: p.grad_f(x) + jac.transpose() * lambda,
        hess_xx: symmetrize(&(p.hess_f(x) + p.phi_hess_contract(x, lambda))),
    })
}

/// `∇ₓL(x, λ) = ∇f(x) + ∇Φ(x)ᵀλ`.
pub fn grad_lagrangian(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(p, x, lambda)?;
    Ok(p.grad_f(x) + p.phi_jac(x).transpose() * lambda)
}

/// `∇²ₓₓL(x, λ)`, symmetrized.
pub fn hessian_lagrangian(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_dims(p, x, lambda)?;
    Ok(symmetrize(&(p.hess_f(x) + p.phi_hess_contract(x, lambda))))
}

pub fn aug_lagrangian(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>, rho: f64) -> Result<AugEval> {
    check_rho(rho)?;
    check_dims(p, x, lambda)?;
    let phi = p.phi(x);
    let jac = p.phi_jac(x);
    let shifted = &phi * rho + lambda;
    let mu = cone::project_polar_raw(&shifted);
    let value = p.f(x) + (mu.norm_squared() - lambda.norm_squared()) / (2.0 * rho);
    let grad_x = p.grad_f(x) + jac.transpose() * &mu;
    let grad_lambda = (&mu - lambda) / rho;
    Ok(AugEval {
        value,
        grad_x,
        grad_lambda,
        shifted: ConeVec::wrap(shifted),
        polar_proj: ConeVec::wrap(mu),
    })
}

/// Value of `𝓛` only (no Jacobian evaluation).
pub fn aug_value(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    check_dims(p, x, lambda)?;
    let shifted = p.phi(x) * rho + lambda;
    let mu = cone::project_polar_raw(&shifted);
    Ok(p.f(x) + (mu.norm_squared() - lambda.norm_squared()) / (2.0 * rho))
}

/// Generalized Hessian of `x ↦ 𝓛(x, λ, ρ)`:
///
/// ```text
/// H = ∇²ₓₓL(x, μ) + ρ ∇Φ(x)ᵀ V ∇Φ(x),   μ = Π_{−Q}(ρΦ(x)+λ),  V = ∇Π_{−Q}(ρΦ(x)+λ)
/// ```
///
/// This is the Hessian wherever the shifted point avoids the cone boundaries;
/// at kinks it is the element picked by [`cone::jacobian_project_polar`].
pub fn aug_hessian(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>, rho: f64) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    check_dims(p, x, lambda)?;
    let jac = p.phi_jac(x);
    let shifted = p.phi(x) * rho + lambda;
    let mu = cone::project_polar_raw(&shifted);
    let v = cone::jacobian_project_polar_raw(&shifted);
    let h = p.hess_f(x) + p.phi_hess_contract(x, &mu) + jac.transpose() * v * &jac * rho;
    Ok(symmetrize(&h))
}

/// KKT residual `σ(x, λ)`.
pub fn residual(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
    check_dims(p, x, lambda)?;
    let phi = p.phi(x);
    let stationarity = (p.grad_f(x) + p.phi_jac(x).transpose() * lambda).norm();
    let complementarity = (&phi - cone::project_q_raw(&(&phi + lambda))).norm();
    Ok(stationarity + complementarity)
}
