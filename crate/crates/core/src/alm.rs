//! The augmented Lagrangian method.
//!
//! Outer iteration `k`:
//!
//! ```text
//! x_{k+1}  ≈ argmin_x 𝓛(x, λ_k, ρ_k)      with ‖∇ₓ𝓛(x_{k+1}, λ_k, ρ_k)‖ ≤ ε_k
//! λ_{k+1}  = Π_{−Q}(ρ_k Φ(x_{k+1}) + λ_k)
//! ```
//!
//! The inner problem is solved by a regularized semismooth Newton method with
//! Armijo backtracking. Algorithmic failures (iteration limits, a stalled
//! inner solve) are reported through [`AlmStatus`] together with the partial
//! trace; `Err` is reserved for invalid input.

use nalgebra::DVector;
use serde::Serialize;

use crate::cone::{self, ConeVec};
use crate::error::{Error, Result};
use crate::lagrangian;
use crate::linalg::regularized_solve;
use crate::model::{KktPoint, SocpProblem};

/// Smallest gradient tolerance the inner solver is asked to reach.
pub const MACHINE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct InnerConfig {
    /// First nonzero Newton shift; doubled until the shifted system factors.
    pub mu0: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_inner: usize,
    /// Use `−∇ₓ𝓛` when the Newton direction is unavailable or not a descent direction.
    pub gradient_fallback: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            mu0: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_inner: 200,
            gradient_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EpsRule {
    /// `ε_k` at the machine floor.
    Exact,
    /// `ε_k = η σ_k`.
    Proportional(f64),
    /// `ε_k` read from the list; the last entry repeats.
    FixedSequence(Vec<f64>),
}

#[derive(Debug, Clone, Serialize)]
pub struct AlmConfig {
    pub rho0: f64,
    pub rho_bar: f64,
    pub rho_growth: f64,
    pub rho_max: f64,
    pub eps_rule: EpsRule,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner: InnerConfig,
    pub seed: u64,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            rho_bar: 1.0,
            rho_growth: 10.0,
            rho_max: 1e8,
            eps_rule: EpsRule::Proportional(0.1),
            outer_tol: 1e-9,
            max_outer: 100,
            inner: InnerConfig::default(),
            seed: 0,
        }
    }
}

impl AlmConfig {
    /// Constant penalty `rho` (no growth), otherwise defaults.
    pub fn constant_rho(rho: f64) -> Self {
        Self {
            rho0: rho,
            rho_bar: rho,
            rho_growth: 1.0,
            rho_max: rho,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rho_bar) || !positive(self.rho0) {
            return bad(format!("rho0 = {} and rho_bar = {} must be positive", self.rho0, self.rho_bar));
        }
        if self.rho0 < self.rho_bar {
            return bad(format!("rho0 = {} is below the floor rho_bar = {}", self.rho0, self.rho_bar));
        }
        if !(self.rho_growth >= 1.0) || !self.rho_growth.is_finite() {
            return bad(format!("rho_growth = {} must be at least 1", self.rho_growth));
        }
        if !(self.rho_max >= self.rho0) {
            return bad(format!("rho_max = {} is below rho0 = {}", self.rho_max, self.rho0));
        }
        if !positive(self.outer_tol) {
            return bad(format!("outer_tol = {} must be positive", self.outer_tol));
        }
        match &self.eps_rule {
            EpsRule::Exact => {}
            EpsRule::Proportional(eta) => {
                if !(*eta > 0.0 && *eta < 1.0) {
                    return bad(format!("eps factor {eta} must lie in (0, 1)"));
                }
            }
            EpsRule::FixedSequence(list) => {
                if list.is_empty() || list.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
                    return bad("eps sequence must be a non-empty list of non-negative numbers".into());
                }
            }
        }
        let inner = &self.inner;
        if !positive(inner.mu0)
            || !(inner.armijo_c1 > 0.0 && inner.armijo_c1 < 1.0)
            || !(inner.backtrack > 0.0 && inner.backtrack < 1.0)
            || inner.max_inner == 0
        {
            return bad(format!("invalid inner configuration {inner:?}"));
        }
        Ok(())
    }

    fn eps_for(&self, k: usize, sigma: f64) -> f64 {
        match &self.eps_rule {
            EpsRule::Exact => 0.0,
            EpsRule::Proportional(eta) => eta * sigma,
            EpsRule::FixedSequence(list) => list[k.min(list.len() - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AlmStatus {
    Converged,
    MaxIterations,
    InnerFailure,
}

impl AlmStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AlmStatus::Converged => "Converged",
            AlmStatus::MaxIterations => "MaxIterations",
            AlmStatus::InnerFailure => "InnerFailure",
        }
    }
}

/// Row `k` holds the iterate `(x_k, λ_k)`, the penalty `ρ_k` and `σ_k`.
/// When an inner solve was started from it, the row also carries `ε_k`,
/// the inner iteration count, the final inner gradient norm and
/// `𝓛(x_{k+1}, λ_k, ρ_k)`; the last row of a run has these unset (unless
/// the run ended in an inner failure).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub k: usize,
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub eps: Option<f64>,
    pub inner_iters: Option<usize>,
    pub grad_norm: Option<f64>,
    pub value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AlmTrace {
    pub rows: Vec<TraceRow>,
    pub status: AlmStatus,
}

impl AlmTrace {
    /// Number of completed outer steps.
    pub fn outer_iterations(&self) -> usize {
        self.rows.iter().filter(|r| r.value.is_some()).count()
    }

    pub fn final_sigma(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.sigma)
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: DVector<f64>,
    pub grad_norm: f64,
    pub iters: usize,
}

/// Approximately minimizes `x ↦ 𝓛(x, λ_k, ρ_k)` until
/// `‖∇ₓ𝓛‖ ≤ max(eps_k, floor)`.
///
/// The floor is [`MACHINE_FLOOR`] times the size of the two terms that
/// cancel in `∇ₓ𝓛 = ∇f(x) + ∇Φ(x)ᵀμ` (at least one), i.e. the level below
/// which the computed gradient is rounding noise.
///
/// Steps are accepted by an Armijo test on `𝓛`. Once the predicted decrease
/// of a Newton step is below the rounding level of `𝓛` itself, the test
/// switches to the gradient norm, which still resolves progress there.
pub fn inner_solve(
    p: &SocpProblem,
    lambda_k: &DVector<f64>,
    rho_k: f64,
    x_start: &DVector<f64>,
    eps_k: f64,
    cfg: &InnerConfig,
) -> Result<InnerResult> {
    if !(eps_k >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps_k = {eps_k} must be non-negative")));
    }
    let mut x = x_start.clone();
    let mut eval = lagrangian::aug_lagrangian(p, &x, lambda_k, rho_k)?;
    let mut gnorm = eval.grad_x.norm();
    for iter in 0..=cfg.max_inner {
        let tol = eps_k.max(gradient_floor(p, &x, &eval.polar_proj));
        if gnorm <= tol {
            return Ok(InnerResult { x, grad_norm: gnorm, iters: iter });
        }
        if iter == cfg.max_inner {
            break;
        }
        let g = &eval.grad_x;
        let h = lagrangian::aug_hessian(p, &x, lambda_k, rho_k)?;
        let newton = regularized_solve(&h, &(-g), cfg.mu0, 200)
            .map(|(d, _)| d)
            .filter(|d| g.dot(d) < -1e-14 * gnorm * d.norm());
        let (dir, is_newton) = match newton {
            Some(d) => (d, true),
            None if cfg.gradient_fallback => (-g, false),
            None => break,
        };
        let slope = g.dot(&dir);
        let value_noise = 1e3 * f64::EPSILON * (1.0 + eval.value.abs());
        let by_gradient = is_newton && -slope <= value_noise;
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let cand = &x + &dir * t;
            let ok = if by_gradient {
                let ce = lagrangian::aug_lagrangian(p, &cand, lambda_k, rho_k)?;
                ce.grad_x.norm() <= (1.0 - cfg.armijo_c1 * t) * gnorm
            } else {
                let val = lagrangian::aug_value(p, &cand, lambda_k, rho_k)?;
                val <= eval.value + cfg.armijo_c1 * t * slope
            };
            if ok {
                accepted = Some(cand);
                break;
            }
            t *= cfg.backtrack;
        }
        match accepted {
            Some(cand) if cand != x => {
                x = cand;
                eval = lagrangian::aug_lagrangian(p, &x, lambda_k, rho_k)?;
                gnorm = eval.grad_x.norm();
            }
            _ => {
                return Err(Error::InnerFailure { iters: iter + 1, grad_norm: gnorm });
            }
        }
    }
    Err(Error::InnerFailure { iters: cfg.max_inner, grad_norm: gnorm })
}

fn gradient_floor(p: &SocpProblem, x: &DVector<f64>, mu: &ConeVec) -> f64 {
    let scale = p
        .grad_f(x)
        .norm()
        .max((p.phi_jac(x).transpose() * mu.as_vector()).norm())
        .max(1.0);
    MACHINE_FLOOR * scale
}

/// `Π_{−Q}(ρ_k Φ(x_{k+1}) + λ_k)`.
pub fn update_multiplier(phi_x_next: &ConeVec, lambda_k: &DVector<f64>, rho_k: f64) -> Result<DVector<f64>> {
    if !(rho_k > 0.0) {
        return Err(Error::InvalidParameter(format!("rho_k = {rho_k} must be positive")));
    }
    crate::error::check_len("multiplier", phi_x_next.m() + 1, lambda_k.len())?;
    Ok(cone::project_polar_raw(&(phi_x_next.as_vector() * rho_k + lambda_k)))
}

/// Runs the method from `(x0, λ0)`.
pub fn solve(
    p: &SocpProblem,
    x0: &DVector<f64>,
    lambda0: &DVector<f64>,
    cfg: &AlmConfig,
) -> Result<(KktPoint, AlmTrace)> {
    cfg.validate()?;
    p.check_x(x0)?;
    p.check_lambda(lambda0)?;
    let mut x = x0.clone();
    let mut lambda = lambda0.clone();
    let mut rho = cfg.rho0;
    let mut sigma = lagrangian::residual(p, &x, &lambda)?;
    let mut rows = Vec::new();
    let mut k = 0;
    let status = loop {
        let mut row = TraceRow {
            k,
            x: x.clone(),
            lambda: lambda.clone(),
            rho,
            sigma,
            eps: None,
            inner_iters: None,
            grad_norm: None,
            value: None,
        };
        if sigma <= cfg.outer_tol {
            rows.push(row);
            break AlmStatus::Converged;
        }
        if k >= cfg.max_outer {
            rows.push(row);
            break AlmStatus::MaxIterations;
        }
        let eps = cfg.eps_for(k, sigma);
        row.eps = Some(eps);
        let inner = match inner_solve(p, &lambda, rho, &x, eps, &cfg.inner) {
            Ok(r) => r,
            Err(Error::InnerFailure { iters, grad_norm }) => {
                row.inner_iters = Some(iters);
                row.grad_norm = Some(grad_norm);
                rows.push(row);
                break AlmStatus::InnerFailure;
            }
            Err(e) => return Err(e),
        };
        row.inner_iters = Some(inner.iters);
        row.grad_norm = Some(inner.grad_norm);
        row.value = Some(lagrangian::aug_value(p, &inner.x, &lambda, rho)?);
        rows.push(row);

        let phi = ConeVec::wrap(p.phi(&inner.x));
        lambda = update_multiplier(&phi, &lambda, rho)?;
        x = inner.x;
        let next_sigma = lagrangian::residual(p, &x, &lambda)?;
        if next_sigma > 0.5 * sigma {
            rho = (rho * cfg.rho_growth).min(cfg.rho_max).max(cfg.rho_bar);
        }
        sigma = next_sigma;
        k += 1;
    };
    Ok((KktPoint::new(x, lambda), AlmTrace { rows, status }))
}
