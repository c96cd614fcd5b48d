//! Second-order variational objects at a KKT pair `(x̄, λ̄)`.
//!
//! The critical cone `K = T_Q(Φ(x̄)) ∩ {λ̄}⊥` takes one of six shapes depending
//! on where `Φ(x̄)` and `λ̄` sit; everything else here (second subderivatives,
//! SOSC, the dual qualification condition) is dispatched on that shape.
//!
//! | `Φ(x̄)`         | `λ̄`              | `K`               |
//! |----------------|------------------|-------------------|
//! | `int Q`        | `0`              | `R^{m+1}`         |
//! | `bd Q \ {0}`   | `≠ 0`            | `{λ̄}⊥`            |
//! | `bd Q \ {0}`   | `0`              | `{v : ⟨Φ̃, v⟩ ≤ 0}` |
//! | `0`            | `0`              | `Q`               |
//! | `0`            | `int(−Q)`        | `{0}`             |
//! | `0`            | `bd(−Q) \ {0}`   | `R₊ λ̃`            |

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cone::{self, ConeRegion, ConeVec};
use crate::error::{Error, Result};
use crate::lagrangian;
use crate::linalg::{self, min_eigen, null_space};
use crate::model::SocpProblem;
use crate::sampling;

/// Absolute tolerance for cone and subspace membership decisions.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum CriticalConeKind {
    FullSpace,
    ZeroOnly,
    Hyperplane { normal: ConeVec },
    HalfSpace { outward_normal: ConeVec },
    Ray { direction: ConeVec },
    WholeConeQ,
}

impl CriticalConeKind {
    pub fn label(&self) -> &'static str {
        match self {
            CriticalConeKind::FullSpace => "FullSpace",
            CriticalConeKind::ZeroOnly => "ZeroOnly",
            CriticalConeKind::Hyperplane { .. } => "Hyperplane",
            CriticalConeKind::HalfSpace { .. } => "HalfSpace",
            CriticalConeKind::Ray { .. } => "Ray",
            CriticalConeKind::WholeConeQ => "WholeConeQ",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalCone {
    pub kind: CriticalConeKind,
    pub base_point: ConeVec,
    pub multiplier: ConeVec,
}

impl CriticalCone {
    /// Membership by the case formulas, with an absolute tolerance.
    pub fn contains(&self, v: &ConeVec, tol: f64) -> bool {
        let v = v.as_vector();
        match &self.kind {
            CriticalConeKind::FullSpace => true,
            CriticalConeKind::ZeroOnly => v.norm() <= tol,
            CriticalConeKind::Hyperplane { normal } => {
                let u = normal.as_vector();
                u.dot(v).abs() / u.norm() <= tol
            }
            CriticalConeKind::HalfSpace { outward_normal } => {
                let u = outward_normal.as_vector();
                u.dot(v) / u.norm() <= tol
            }
            CriticalConeKind::Ray { direction } => {
                let d = direction.as_vector();
                let dn = d.norm();
                let along = d.dot(v) / dn;
                let perp = (v - d * (along / dn)).norm();
                along >= -tol && perp <= tol
            }
            CriticalConeKind::WholeConeQ => {
                v.rows(1, v.len() - 1).norm() <= v[0] + tol
            }
        }
    }
}

/// Extended real value `R ∪ {+∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

pub fn critical_cone(phi_xbar: &ConeVec, lambda_bar: &ConeVec, tol: f64) -> Result<CriticalCone> {
    if phi_xbar.m() != lambda_bar.m() {
        return Err(Error::DimensionMismatch {
            what: "critical cone".into(),
            expected: phi_xbar.m() + 1,
            got: lambda_bar.m() + 1,
        });
    }
    let phi_region = cone::classify(phi_xbar, tol)?;
    if !phi_region.in_q() {
        return Err(Error::NotInCone(cone::dist2_q(phi_xbar).sqrt()));
    }
    let violation = cone::normal_cone_violation(lambda_bar.as_vector(), phi_xbar.as_vector());
    if violation > tol * phi_xbar.norm().max(lambda_bar.norm()).max(1.0) {
        return Err(Error::NotInNormalCone(violation));
    }
    let lambda_region = cone::classify(lambda_bar, tol)?;
    let kind = match phi_region {
        ConeRegion::InteriorQ => CriticalConeKind::FullSpace,
        ConeRegion::BoundaryQNonzero => {
            if lambda_region == ConeRegion::Zero {
                CriticalConeKind::HalfSpace {
                    outward_normal: phi_xbar.tilde(),
                }
            } else {
                CriticalConeKind::Hyperplane {
                    normal: lambda_bar.clone(),
                }
            }
        }
        _ => match lambda_region {
            ConeRegion::Zero => CriticalConeKind::WholeConeQ,
            ConeRegion::InteriorPolar => CriticalConeKind::ZeroOnly,
            _ => CriticalConeKind::Ray {
                direction: lambda_bar.tilde(),
            },
        },
    };
    Ok(CriticalCone {
        kind,
        base_point: phi_xbar.clone(),
        multiplier: lambda_bar.clone(),
    })
}

/// Exact `dist²(v; K)` by the case formulas.
pub fn dist2_critical(k: &CriticalCone, v: &ConeVec) -> f64 {
    let v = v.as_vector();
    match &k.kind {
        CriticalConeKind::FullSpace => 0.0,
        CriticalConeKind::ZeroOnly => v.norm_squared(),
        CriticalConeKind::Hyperplane { normal } => {
            let u = normal.as_vector();
            u.dot(v).powi(2) / u.norm_squared()
        }
        CriticalConeKind::HalfSpace { outward_normal } => {
            let u = outward_normal.as_vector();
            u.dot(v).max(0.0).powi(2) / u.norm_squared()
        }
        CriticalConeKind::Ray { direction } => {
            let d = direction.as_vector();
            (v.norm_squared() - d.dot(v).max(0.0).powi(2) / d.norm_squared()).max(0.0)
        }
        CriticalConeKind::WholeConeQ => cone::project_polar_raw(v).norm_squared(),
    }
}

/// Second subderivative `d²δ_Q(Φ(x̄), λ̄)(w)`.
pub fn d2_indicator_q(phi_xbar: &ConeVec, lambda_bar: &ConeVec, w: &ConeVec) -> Result<ExtendedReal> {
    let k = critical_cone(phi_xbar, lambda_bar, MEMBERSHIP_TOL)?;
    if w.m() != phi_xbar.m() {
        return Err(Error::DimensionMismatch {
            what: "d2 indicator direction".into(),
            expected: phi_xbar.m() + 1,
            got: w.m() + 1,
        });
    }
    if !k.contains(w, MEMBERSHIP_TOL * w.norm().max(1.0)) {
        return Ok(ExtendedReal::PosInfinity);
    }
    Ok(ExtendedReal::Finite(boundary_curvature(&k) * lorentz_form(w.as_vector())))
}

/// `‖λ̄‖/‖Φ(x̄)‖` when `Φ(x̄) ∈ bd Q \ {0}`, else zero.
fn boundary_curvature(k: &CriticalCone) -> f64 {
    match k.kind {
        CriticalConeKind::Hyperplane { .. } | CriticalConeKind::HalfSpace { .. } => {
            k.multiplier.norm() / k.base_point.norm()
        }
        _ => 0.0,
    }
}

/// `‖w_r‖² − w₀²`.
fn lorentz_form(w: &DVector<f64>) -> f64 {
    w.rows(1, w.len() - 1).norm_squared() - w[0] * w[0]
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "penalty parameter must be positive and finite, got {rho}"
        )));
    }
    Ok(())
}

/// Everything second-order at one KKT pair, computed once.
struct Local {
    hess: DMatrix<f64>,
    jac: DMatrix<f64>,
    cone: CriticalCone,
}

fn local_data(p: &SocpProblem, xbar: &DVector<f64>, lambda_bar: &DVector<f64>, kkt_tol: f64) -> Result<Local> {
    let sigma = lagrangian::residual(p, xbar, lambda_bar)?;
    if sigma > kkt_tol {
        return Err(Error::NotKkt(sigma));
    }
    let phi = ConeVec::from_vec(p.phi(xbar))?;
    let lam = ConeVec::from_vec(lambda_bar.clone())?;
    let cone = critical_cone(&phi, &lam, MEMBERSHIP_TOL.max(kkt_tol))?;
    Ok(Local {
        hess: lagrangian::hessian_lagrangian(p, xbar, lambda_bar)?,
        jac: p.phi_jac(xbar),
        cone,
    })
}

/// Matrix of the extra curvature term of `Q_{x̄,λ̄,ρ}` on `v = ∇Φ(x̄)w`:
/// `coef · (‖v_r‖² − ⟨λ̄_r, v_r⟩²/‖λ̄_r‖²)` as a quadratic form in `v`.
fn curvature_matrix(lambda_bar: &DVector<f64>, coef: f64) -> DMatrix<f64> {
    let d = lambda_bar.len();
    let mut c = DMatrix::zeros(d, d);
    if coef == 0.0 {
        return c;
    }
    let lr = lambda_bar.rows(1, d - 1);
    let lr2 = lr.norm_squared();
    for i in 0..d - 1 {
        for j in 0..d - 1 {
            let delta = if i == j { 1.0 } else { 0.0 };
            c[(i + 1, j + 1)] = coef * (delta - lr[i] * lr[j] / lr2);
        }
    }
    c
}

/// Coefficient `ρ‖λ̄‖/(ρ‖Φ(x̄)‖ + ‖λ̄‖)` in the second branch, zero in the first.
fn fq_coefficient(k: &CriticalCone, rho: f64) -> f64 {
    match k.kind {
        CriticalConeKind::Hyperplane { .. } => {
            let ln = k.multiplier.norm();
            rho * ln / (rho * k.base_point.norm() + ln)
        }
        _ => 0.0,
    }
}

/// `Q_{x̄,λ̄,ρ}(w)`.
pub fn quad_form_q(
    p: &SocpProblem,
    xbar: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    rho: f64,
    w: &DVector<f64>,
) -> Result<f64> {
    check_rho(rho)?;
    p.check_x(w)?;
    let loc = local_data(p, xbar, lambda_bar, DEFAULT_KKT_TOL)?;
    Ok(quad_form_local(&loc, rho, w))
}

fn quad_form_local(loc: &Local, rho: f64, w: &DVector<f64>) -> f64 {
    let base = w.dot(&(&loc.hess * w));
    let coef = fq_coefficient(&loc.cone, rho);
    if coef == 0.0 {
        return base;
    }
    let v = &loc.jac * w;
    let lam = loc.cone.multiplier.as_vector();
    let vr = v.rows(1, v.len() - 1);
    let lr = lam.rows(1, lam.len() - 1);
    base + coef * (vr.norm_squared() - lr.dot(&vr).powi(2) / lr.norm_squared())
}

/// Second subderivative of `x ↦ 𝓛(x, λ̄, ρ)` at `x̄` for `0`:
/// `Q_{x̄,λ̄,ρ}(w) + ρ·dist²(∇Φ(x̄)w; K)`.
pub fn d2_aug_lagrangian(
    p: &SocpProblem,
    xbar: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    rho: f64,
    w: &DVector<f64>,
) -> Result<f64> {
    check_rho(rho)?;
    p.check_x(w)?;
    let loc = local_data(p, xbar, lambda_bar, DEFAULT_KKT_TOL)?;
    Ok(d2_local(&loc, rho, w))
}

fn d2_local(loc: &Local, rho: f64, w: &DVector<f64>) -> f64 {
    let v = ConeVec::wrap(&loc.jac * w);
    quad_form_local(loc, rho, w) + rho * dist2_critical(&loc.cone, &v)
}

/// Second-order difference quotient of `x ↦ 𝓛(x, λ, ρ)` at `x` in direction `w`:
/// `[𝓛(x+tw) − 𝓛(x) − t⟨∇ₓ𝓛(x), w⟩] / (t²/2)`.
pub fn difference_quotient_oracle(
    p: &SocpProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
    w: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("step t must be positive, got {t}")));
    }
    p.check_x(w)?;
    let base = lagrangian::aug_lagrangian(p, x, lambda, rho)?;
    let moved = lagrangian::aug_value(p, &(x + w * t), lambda, rho)?;
    Ok((moved - base.value - t * base.grad_x.dot(w)) / (0.5 * t * t))
}

const DEFAULT_KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SoscMethod {
    ExactEigen,
    PiecewiseEigen,
    SampledPenalty,
}

#[derive(Debug, Clone)]
pub struct SoscOptions {
    /// Positivity threshold for the minimum of the reduced quadratic form.
    pub tol: f64,
    /// Residual threshold for accepting `(x̄, λ̄)` as a KKT pair.
    pub kkt_tol: f64,
    /// Random starts for the sampled (copositivity) case.
    pub starts: usize,
    /// First penalty of the geometric sweep `rho0 · 2^j`.
    pub rho0: f64,
    /// Number of doublings in the sampled sweep.
    pub doublings: usize,
    /// Doublings allowed when searching the penalty at which the exact
    /// minimum of `d²ₓ𝓛` becomes positive.
    pub certify_doublings: usize,
    pub seed: u64,
}

impl Default for SoscOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            kkt_tol: DEFAULT_KKT_TOL,
            starts: 64,
            rho0: 1.0,
            doublings: 8,
            certify_doublings: 60,
            seed: 0,
        }
    }
}

/// Outcome of the SOSC check.
///
/// For `ExactEigen` / `PiecewiseEigen`, `modulus` is the minimum of
/// `⟨∇²ₓₓL w, w⟩ + d²δ_Q(Φ(x̄), λ̄)(∇Φ(x̄)w)` over unit `w` with
/// `∇Φ(x̄)w ∈ K` (`+∞` when only `w = 0` qualifies) and `rho_used` is the
/// first penalty in `rho0 · 2^j` at which the exact minimum of `d²ₓ𝓛` over
/// the unit sphere exceeds `tol` (`+∞` if none). For `SampledPenalty` both
/// come from the penalty sweep and the result is not a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct SoscReport {
    pub holds: bool,
    pub modulus: f64,
    pub rho_used: f64,
    pub method: SoscMethod,
    pub critical_cone: String,
    pub certificate_detail: String,
}

pub fn check_sosc(
    p: &SocpProblem,
    xbar: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    opts: &SoscOptions,
) -> Result<SoscReport> {
    let loc = local_data(p, xbar, lambda_bar, opts.kkt_tol)?;
    let label = loc.cone.kind.label().to_string();
    let jac = &loc.jac;
    let n = p.n;
    match &loc.cone.kind {
        CriticalConeKind::FullSpace
        | CriticalConeKind::ZeroOnly
        | CriticalConeKind::Hyperplane { .. } => {
            let (basis, form) = match &loc.cone.kind {
                CriticalConeKind::FullSpace => (DMatrix::identity(n, n), loc.hess.clone()),
                CriticalConeKind::ZeroOnly => (null_space(jac, MEMBERSHIP_TOL), loc.hess.clone()),
                CriticalConeKind::Hyperplane { normal } => {
                    let row = DMatrix::from_row_slice(1, n, (normal.as_vector().transpose() * jac).as_slice());
                    let c = boundary_curvature(&loc.cone);
                    let mut lorentz = DMatrix::<f64>::identity(p.m + 1, p.m + 1);
                    lorentz[(0, 0)] = -1.0;
                    (
                        null_space(&row, MEMBERSHIP_TOL),
                        &loc.hess + jac.transpose() * lorentz * jac * c,
                    )
                }
                _ => unreachable!(),
            };
            let (modulus, detail) = reduced_min(&basis, &form);
            let rho_used = certify_rho(&loc, opts);
            Ok(SoscReport {
                holds: modulus > opts.tol,
                modulus,
                rho_used,
                method: SoscMethod::ExactEigen,
                critical_cone: label,
                certificate_detail: detail,
            })
        }
        CriticalConeKind::HalfSpace { outward_normal } => {
            // {w : ⟨Φ̃, ∇Φ w⟩ ≤ 0}; λ̄ = 0 so there is no curvature term
            let g = jac.transpose() * outward_normal.as_vector();
            let basis = DMatrix::identity(n, n);
            let (modulus, detail) = piecewise_min(&basis, &loc.hess, &g);
            let rho_used = certify_rho(&loc, opts);
            Ok(SoscReport {
                holds: modulus > opts.tol,
                modulus,
                rho_used,
                method: SoscMethod::PiecewiseEigen,
                critical_cone: label,
                certificate_detail: detail,
            })
        }
        CriticalConeKind::Ray { direction } => {
            // {w : ∇Φ w ∈ R₊d} = {w : (I − d̂d̂ᵀ)∇Φ w = 0, ⟨d, ∇Φ w⟩ ≥ 0}
            let d = direction.as_vector();
            let dd = d * d.transpose() / d.norm_squared();
            let perp = (DMatrix::identity(p.m + 1, p.m + 1) - dd) * jac;
            let basis = null_space(&perp, MEMBERSHIP_TOL);
            let g = -(jac.transpose() * d);
            let (modulus, detail) = piecewise_min(&basis, &loc.hess, &g);
            let rho_used = certify_rho(&loc, opts);
            Ok(SoscReport {
                holds: modulus > opts.tol,
                modulus,
                rho_used,
                method: SoscMethod::PiecewiseEigen,
                critical_cone: label,
                certificate_detail: detail,
            })
        }
        CriticalConeKind::WholeConeQ => {
            let mut best = f64::NEG_INFINITY;
            let mut rho_used = opts.rho0;
            let mut holds = false;
            for j in 0..=opts.doublings {
                let rho = opts.rho0 * 2f64.powi(j as i32);
                let (val, _) = sphere_minimize(
                    n,
                    |w| d2_with_grad_whole_cone(&loc, rho, w),
                    opts.starts,
                    opts.seed.wrapping_add(j as u64),
                    &[],
                );
                best = val;
                rho_used = rho;
                if val > opts.tol {
                    holds = true;
                    break;
                }
            }
            Ok(SoscReport {
                holds,
                modulus: best,
                rho_used,
                method: SoscMethod::SampledPenalty,
                critical_cone: label,
                certificate_detail: format!(
                    "non-certifying: copositivity case; best sampled min of d2 over the unit sphere \
                     = {best:e} at rho = {rho_used} ({} starts, seed {})",
                    opts.starts, opts.seed
                ),
            })
        }
    }
}

/// Minimum eigenvalue of `ZᵀMZ`; `+∞` for an empty basis.
fn reduced_min(basis: &DMatrix<f64>, form: &DMatrix<f64>) -> (f64, String) {
    if basis.ncols() == 0 {
        return (
            f64::INFINITY,
            "critical directions reduce to {0}; SOSC holds vacuously".into(),
        );
    }
    let reduced = basis.transpose() * form * basis;
    let (val, _) = min_eigen(&reduced).expect("non-empty reduced form");
    (
        val,
        format!(
            "min eigenvalue of the reduced form on a {}-dimensional subspace = {val:e}",
            basis.ncols()
        ),
    )
}

/// Minimum of `wᵀMw` over unit `w ∈ span(Z)` with `⟨g, w⟩ ≤ 0`, split into
/// the inactive piece (eigen-analysis on `span(Z)`, feasible up to the sign
/// of the eigenvector) and the active piece `span(Z) ∩ g⊥`.
fn piecewise_min(basis: &DMatrix<f64>, form: &DMatrix<f64>, g: &DVector<f64>) -> (f64, String) {
    if basis.ncols() == 0 {
        return (
            f64::INFINITY,
            "critical directions reduce to {0}; SOSC holds vacuously".into(),
        );
    }
    let reduced = basis.transpose() * form * basis;
    let (inactive, eigvec) = min_eigen(&reduced).expect("non-empty reduced form");
    let w = basis * eigvec;
    let slope = g.dot(&w);
    debug_assert!(slope <= MEMBERSHIP_TOL || -slope <= MEMBERSHIP_TOL || slope.is_finite());
    let gz = (basis.transpose() * g).transpose();
    let active_basis = if gz.norm() <= MEMBERSHIP_TOL {
        basis.clone()
    } else {
        basis * null_space(&DMatrix::from_row_slice(1, gz.len(), gz.as_slice()), MEMBERSHIP_TOL)
    };
    let active = if active_basis.ncols() == 0 {
        f64::INFINITY
    } else {
        min_eigen(&(active_basis.transpose() * form * &active_basis))
            .map(|(v, _)| v)
            .unwrap_or(f64::INFINITY)
    };
    let modulus = inactive.min(active);
    (
        modulus,
        format!(
            "piece inactive (dim {}): {inactive:e}; piece active (dim {}): {active:e}",
            basis.ncols(),
            active_basis.ncols()
        ),
    )
}

/// Exact minimum of `d²ₓ𝓛((x̄,λ̄,ρ),0)` over the unit sphere for every
/// critical-cone shape except `WholeConeQ` (where it returns `None`).
///
/// For the subspace shapes `dist²(·; K)` is a quadratic form; for `HalfSpace`
/// and `Ray` it is one of two quadratic forms on complementary half-spaces,
/// and because quadratic forms are even the minimum over a half-space equals
/// the unconstrained minimum of that form.
fn exact_d2_min(loc: &Local, rho: f64) -> Option<f64> {
    let jac = &loc.jac;
    let d = jac.nrows();
    let coef = fq_coefficient(&loc.cone, rho);
    let base = &loc.hess
        + jac.transpose() * curvature_matrix(loc.cone.multiplier.as_vector(), coef) * jac;
    let eig = |m: &DMatrix<f64>| min_eigen(m).map(|(v, _)| v).unwrap_or(f64::INFINITY);
    match &loc.cone.kind {
        CriticalConeKind::FullSpace => Some(eig(&base)),
        CriticalConeKind::ZeroOnly => Some(eig(&(&base + jac.transpose() * jac * rho))),
        CriticalConeKind::Hyperplane { normal } => {
            let u = normal.as_vector();
            let proj = u * u.transpose() / u.norm_squared();
            Some(eig(&(&base + jac.transpose() * proj * jac * rho)))
        }
        CriticalConeKind::HalfSpace { outward_normal } => {
            let u = outward_normal.as_vector();
            let proj = u * u.transpose() / u.norm_squared();
            Some(eig(&base).min(eig(&(&base + jac.transpose() * proj * jac * rho))))
        }
        CriticalConeKind::Ray { direction } => {
            let u = direction.as_vector();
            let perp = DMatrix::identity(d, d) - u * u.transpose() / u.norm_squared();
            let along_side = &base + jac.transpose() * perp * jac * rho;
            let opposite_side = &base + jac.transpose() * jac * rho;
            Some(eig(&along_side).min(eig(&opposite_side)))
        }
        CriticalConeKind::WholeConeQ => None,
    }
}

fn certify_rho(loc: &Local, opts: &SoscOptions) -> f64 {
    (0..=opts.certify_doublings)
        .map(|j| opts.rho0 * 2f64.powi(j as i32))
        .find(|&rho| exact_d2_min(loc, rho).is_some_and(|v| v > opts.tol))
        .unwrap_or(f64::INFINITY)
}

/// `d²ₓ𝓛` and its gradient in `w` when `K = Q` (so `Φ(x̄) = 0`, `λ̄ = 0`):
/// `⟨w, Hw⟩ + ρ‖Π_{−Q}(Jw)‖²`.
fn d2_with_grad_whole_cone(loc: &Local, rho: f64, w: &DVector<f64>) -> (f64, DVector<f64>) {
    let v = &loc.jac * w;
    let pol = cone::project_polar_raw(&v);
    let hw = &loc.hess * w;
    let value = w.dot(&hw) + rho * pol.norm_squared();
    let grad = hw * 2.0 + loc.jac.transpose() * pol * (2.0 * rho);
    (value, grad)
}

/// Multi-start projected gradient descent on the unit sphere of `R^dim`.
/// Each start uses its own seeded stream, so results depend only on
/// `(seed, starts)` and the extra starting points.
pub(crate) fn sphere_minimize<F>(
    dim: usize,
    f: F,
    starts: usize,
    seed: u64,
    extra_starts: &[DVector<f64>],
) -> (f64, DVector<f64>)
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut initial: Vec<DVector<f64>> = extra_starts
        .iter()
        .filter(|v| v.norm() > 0.0)
        .map(|v| v.normalize())
        .collect();
    for s in 0..starts {
        initial.push(sampling::unit_sphere(&mut sampling::substream(seed, s as u64), dim));
    }
    let mut best = (f64::INFINITY, DVector::zeros(dim));
    for mut w in initial {
        let (mut val, mut grad) = f(&w);
        let mut step = 1.0;
        for _ in 0..500 {
            let tangent = &grad - &w * grad.dot(&w);
            let tn2 = tangent.norm_squared();
            if tn2.sqrt() < 1e-12 {
                break;
            }
            let mut accepted = false;
            while step > 1e-14 {
                let cand = (&w - &tangent * step).normalize();
                let (cv, cg) = f(&cand);
                if cv <= val - 1e-4 * step * tn2 {
                    w = cand;
                    val = cv;
                    grad = cg;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if val < best.0 {
            best = (val, w);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DualQualMethod {
    Exact,
    Sampled,
}

/// Calmness of the multiplier mapping at `((0,0), λ̄)` as far as it can be
/// decided from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Calmness {
    Calm,
    NotCalm,
    /// `Φ(x̄) = 0` with a ray of multipliers on `bd(−Q)`: no verifiable
    /// criterion is available for this configuration.
    Unknown,
}

#[derive(Debug, Clone)]
pub struct DualQualOptions {
    pub tol: f64,
    pub margin: f64,
    pub kkt_tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for DualQualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            margin: 1e-6,
            kkt_tol: DEFAULT_KKT_TOL,
            starts: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualQualReport {
    pub holds: bool,
    /// Unit vector in `DN_Q(Φ(x̄), λ̄)(0) ∩ ker ∇Φ(x̄)ᵀ` when the condition fails.
    pub witness: Option<Vec<f64>>,
    pub method: DualQualMethod,
    /// False when the sampled search ended between `tol` and `margin`.
    pub conclusive: bool,
    pub calmness: Calmness,
    pub critical_cone: String,
    pub detail: String,
}

/// Tests `K° ∩ ker ∇Φ(x̄)ᵀ = {0}` where `K°` is the polar of the critical cone.
pub fn check_dual_qualification(
    p: &SocpProblem,
    xbar: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    opts: &DualQualOptions,
) -> Result<DualQualReport> {
    let loc = local_data(p, xbar, lambda_bar, opts.kkt_tol)?;
    let jt = loc.jac.transpose();
    let kernel = null_space(&jt, MEMBERSHIP_TOL);
    let label = loc.cone.kind.label().to_string();
    let first_kernel_vec = || kernel.column(0).into_owned();

    let mut method = DualQualMethod::Exact;
    let mut conclusive = true;
    let (holds, witness, detail): (bool, Option<DVector<f64>>, String) = match &loc.cone.kind {
        CriticalConeKind::FullSpace => (true, None, "polar of the critical cone is {0}".into()),
        CriticalConeKind::Hyperplane { normal: u } | CriticalConeKind::HalfSpace { outward_normal: u } => {
            let uh = u.as_vector().normalize();
            let img = (&jt * &uh).norm();
            if img <= MEMBERSHIP_TOL.max(opts.tol) {
                (false, Some(uh), format!("polar direction lies in ker: |∇Φᵀu| = {img:e}"))
            } else {
                (true, None, format!("|∇Φᵀu|/|u| = {img:e} > 0"))
            }
        }
        CriticalConeKind::ZeroOnly => {
            if kernel.ncols() == 0 {
                (true, None, "ker ∇Φᵀ = {0}".into())
            } else {
                (
                    false,
                    Some(first_kernel_vec()),
                    format!("polar is the whole space and dim ker ∇Φᵀ = {}", kernel.ncols()),
                )
            }
        }
        CriticalConeKind::Ray { direction } => {
            if kernel.ncols() == 0 {
                (true, None, "ker ∇Φᵀ = {0}".into())
            } else {
                let d = direction.as_vector();
                let pd = linalg::project_onto_span(&kernel, d);
                let pl = linalg::project_onto_span(&kernel, lambda_bar);
                let w = if pd.norm() > MEMBERSHIP_TOL {
                    -pd.normalize()
                } else if pl.norm() > MEMBERSHIP_TOL {
                    pl.normalize()
                } else {
                    first_kernel_vec()
                };
                (
                    false,
                    Some(w),
                    format!(
                        "polar is a half-space and dim ker ∇Φᵀ = {}",
                        kernel.ncols()
                    ),
                )
            }
        }
        CriticalConeKind::WholeConeQ => {
            if kernel.ncols() == 0 {
                (true, None, "ker ∇Φᵀ = {0}".into())
            } else {
                method = DualQualMethod::Sampled;
                let (best2, c) = kernel_cone_search(&kernel, opts, |v| {
                    let pq = cone::project_q_raw(v);
                    (pq.norm_squared(), pq * 2.0)
                });
                let dist = best2.max(0.0).sqrt();
                let v = &kernel * c;
                if dist < opts.tol {
                    (false, Some(v), format!("found unit v in ker ∩ −Q, dist(v; −Q) = {dist:e}"))
                } else if dist > opts.margin {
                    (true, None, format!("min dist(v; −Q) over unit v in ker = {dist:e} (sampled)"))
                } else {
                    conclusive = false;
                    (
                        false,
                        None,
                        format!("inconclusive: min dist(v; −Q) = {dist:e} between tol and margin"),
                    )
                }
            }
        }
    };

    let calmness = classify_calmness(p, xbar, lambda_bar, &loc, &kernel, holds, opts);
    Ok(DualQualReport {
        holds,
        witness: witness.map(|w| w.iter().copied().collect()),
        method,
        conclusive,
        calmness,
        critical_cone: label,
        detail,
    })
}

fn kernel_cone_search<F>(kernel: &DMatrix<f64>, opts: &DualQualOptions, f: F) -> (f64, DVector<f64>)
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let k = kernel.ncols();
    let mut extra = Vec::new();
    for i in 0..k {
        let mut e = DVector::zeros(k);
        e[i] = 1.0;
        extra.push(e.clone());
        extra.push(-e);
    }
    sphere_minimize(
        k,
        |c| {
            let v = kernel * c;
            let (val, g) = f(&v);
            (val, kernel.transpose() * g)
        },
        opts.starts,
        opts.seed,
        &extra,
    )
}

fn classify_calmness(
    p: &SocpProblem,
    xbar: &DVector<f64>,
    lambda_bar: &DVector<f64>,
    loc: &Local,
    kernel: &DMatrix<f64>,
    dq_holds: bool,
    opts: &DualQualOptions,
) -> Calmness {
    if dq_holds {
        return Calmness::Calm;
    }
    match &loc.cone.kind {
        // Φ(x̄) ∈ int Q or bd Q \ {0}: always calm
        CriticalConeKind::FullSpace
        | CriticalConeKind::Hyperplane { .. }
        | CriticalConeKind::HalfSpace { .. } => Calmness::Calm,
        // λ̄ ∈ int(−Q): strict complementarity
        CriticalConeKind::ZeroOnly => Calmness::Calm,
        CriticalConeKind::Ray { .. } => {
            // the boundary of −Q at λ̄ has outward normal (1, λ̄_r/‖λ̄_r‖)
            let lr = lambda_bar.rows(1, lambda_bar.len() - 1);
            let mut normal = DVector::zeros(lambda_bar.len());
            normal[0] = 1.0;
            normal.rows_mut(1, lr.len()).copy_from(&(lr / lr.norm()));
            if linalg::project_onto_span(kernel, &normal).norm() > MEMBERSHIP_TOL {
                return Calmness::Calm;
            }
            let grad_f = p.grad_f(xbar).norm();
            let jt_lambda = (&loc.jac.transpose() * lambda_bar).norm();
            if grad_f <= opts.kkt_tol && jt_lambda <= opts.kkt_tol {
                Calmness::Unknown
            } else {
                Calmness::NotCalm
            }
        }
        CriticalConeKind::WholeConeQ => {
            // Λ(x̄) = ker ∩ −Q: an interior point means calm, otherwise a ray
            let (best, _) = kernel_cone_search(kernel, opts, |v| {
                let vr = v.rows(1, v.len() - 1);
                let nr = vr.norm();
                let mut g = DVector::zeros(v.len());
                g[0] = 1.0;
                if nr > 0.0 {
                    g.rows_mut(1, vr.len()).copy_from(&(vr / nr));
                }
                (v[0] + nr, g)
            });
            if best < -opts.tol {
                Calmness::Calm
            } else {
                Calmness::Unknown
            }
        }
    }
}
