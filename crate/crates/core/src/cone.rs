//! Geometry of the second-order (Lorentz) cone
//!
//! ```text
//! Q = {(y0, yr) ∈ R × R^m : ‖yr‖ ≤ y0},   m ≥ 1
//! ```
//!
//! Everything here is closed form: membership and region classification,
//! the metric projections onto `Q` and its polar `−Q`, the Jacobian of the
//! polar projection, and the normal-cone membership test
//! `λ ∈ N_Q(y) ⇔ Π_Q(y + λ) = y`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for region classification; scaled by `max(1, ‖y‖)`.
pub const CONE_TOL: f64 = 1e-12;

/// A vector `y = (y0, yr)` of `R^{m+1}` with `m ≥ 1` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVec(DVector<f64>);

impl ConeVec {
    pub fn new(y0: f64, yr: &[f64]) -> Result<Self> {
        let mut data = Vec::with_capacity(yr.len() + 1);
        data.push(y0);
        data.extend_from_slice(yr);
        Self::from_vec(DVector::from_vec(data))
    }

    /// Wraps a full `(m+1)`-vector. Rejects `m = 0` and non-finite entries.
    pub fn from_vec(v: DVector<f64>) -> Result<Self> {
        if v.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "cone vectors need m >= 1 (got length {})",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("cone vector"));
        }
        Ok(Self(v))
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::from_vec(DVector::from_column_slice(v))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m + 1))
    }

    /// Trusted constructor for values produced by this crate's own arithmetic.
    pub(crate) fn wrap(v: DVector<f64>) -> Self {
        debug_assert!(v.len() >= 2);
        Self(v)
    }

    pub fn y0(&self) -> f64 {
        self.0[0]
    }

    pub fn yr(&self) -> nalgebra::DVectorView<'_, f64> {
        self.0.rows(1, self.0.len() - 1)
    }

    /// The cone parameter `m` (the vector has length `m + 1`).
    pub fn m(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    /// `ỹ = (−y0, yr)`.
    pub fn tilde(&self) -> Self {
        Self(tilde_raw(&self.0))
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl From<ConeVec> for DVector<f64> {
    fn from(v: ConeVec) -> Self {
        v.0
    }
}

/// Mutually exclusive location of a point relative to `Q` and `−Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeRegion {
    InteriorQ,
    BoundaryQNonzero,
    Zero,
    InteriorPolar,
    BoundaryPolarNonzero,
    Outside,
}

impl ConeRegion {
    pub fn in_q(self) -> bool {
        matches!(
            self,
            ConeRegion::InteriorQ | ConeRegion::BoundaryQNonzero | ConeRegion::Zero
        )
    }

    pub fn in_polar(self) -> bool {
        matches!(
            self,
            ConeRegion::InteriorPolar | ConeRegion::BoundaryPolarNonzero | ConeRegion::Zero
        )
    }
}

pub fn classify(y: &ConeVec, tol: f64) -> Result<ConeRegion> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "classification tolerance must be finite and >= 0, got {tol}"
        )));
    }
    Ok(classify_raw(&y.0, tol))
}

pub(crate) fn classify_raw(y: &DVector<f64>, tol: f64) -> ConeRegion {
    let scale = tol * y.norm().max(1.0);
    let y0 = y[0];
    let nr = y.rows(1, y.len() - 1).norm();
    if y.norm() <= scale {
        ConeRegion::Zero
    } else if nr - y0 < -scale {
        ConeRegion::InteriorQ
    } else if nr - y0 <= scale && y0 > 0.0 {
        ConeRegion::BoundaryQNonzero
    } else if nr + y0 < -scale {
        ConeRegion::InteriorPolar
    } else if nr + y0 <= scale && y0 < 0.0 {
        ConeRegion::BoundaryPolarNonzero
    } else {
        ConeRegion::Outside
    }
}

pub(crate) fn tilde_raw(y: &DVector<f64>) -> DVector<f64> {
    let mut t = y.clone();
    t[0] = -t[0];
    t
}

/// Metric projection onto `Q`.
pub fn project_q(y: &ConeVec) -> ConeVec {
    ConeVec(project_q_raw(&y.0))
}

/// Metric projection onto the polar cone `−Q`, i.e. `y − Π_Q(y)`.
pub fn project_polar(y: &ConeVec) -> ConeVec {
    ConeVec(project_polar_raw(&y.0))
}

pub(crate) fn project_q_raw(y: &DVector<f64>) -> DVector<f64> {
    let y0 = y[0];
    let yr = y.rows(1, y.len() - 1);
    let nr = yr.norm();
    if nr <= y0 {
        return y.clone();
    }
    if nr <= -y0 {
        return DVector::zeros(y.len());
    }
    let c = 0.5 * (y0 + nr);
    let mut p = DVector::zeros(y.len());
    p[0] = c;
    p.rows_mut(1, y.len() - 1).copy_from(&(yr * (c / nr)));
    p
}

pub(crate) fn project_polar_raw(y: &DVector<f64>) -> DVector<f64> {
    let y0 = y[0];
    let nr = y.rows(1, y.len() - 1).norm();
    if nr <= y0 {
        return DVector::zeros(y.len());
    }
    if nr <= -y0 {
        return y.clone();
    }
    y - project_q_raw(y)
}

/// `dist²(y; Q) = ‖Π_{−Q}(y)‖²`.
pub fn dist2_q(y: &ConeVec) -> f64 {
    project_polar_raw(&y.0).norm_squared()
}

/// Jacobian of `Π_{−Q}` at `y`.
///
/// Identity on `int(−Q)`, zero on `int Q`, and otherwise
///
/// ```text
/// ½ [ 1          −yrᵀ/‖yr‖                                  ]
///   [ −yr/‖yr‖   (1 − y0/‖yr‖) I + (y0/‖yr‖) yr yrᵀ/‖yr‖²   ]
/// ```
///
/// On the boundaries of `Q` and `−Q` the outside formula is used (its limit
/// from the region between the cones); when `‖yr‖` is below the
/// classification tolerance the interior matrix is used, with `y ≈ 0`
/// mapped to the zero matrix.
pub fn jacobian_project_polar(y: &ConeVec) -> DMatrix<f64> {
    jacobian_project_polar_raw(&y.0)
}

pub(crate) fn jacobian_project_polar_raw(y: &DVector<f64>) -> DMatrix<f64> {
    let d = y.len();
    let m = d - 1;
    let tau = CONE_TOL * y.norm().max(1.0);
    let y0 = y[0];
    let yr = y.rows(1, m);
    let nr = yr.norm();
    if nr <= tau {
        return if y0 < -tau {
            DMatrix::identity(d, d)
        } else {
            DMatrix::zeros(d, d)
        };
    }
    if nr + y0 < -tau {
        return DMatrix::identity(d, d);
    }
    if nr - y0 < -tau {
        return DMatrix::zeros(d, d);
    }
    let u = yr / nr;
    let ratio = y0 / nr;
    let mut j = DMatrix::zeros(d, d);
    j[(0, 0)] = 0.5;
    for i in 0..m {
        j[(0, i + 1)] = -0.5 * u[i];
        j[(i + 1, 0)] = -0.5 * u[i];
        for k in 0..m {
            let delta = if i == k { 1.0 - ratio } else { 0.0 };
            j[(i + 1, k + 1)] = 0.5 * (delta + ratio * u[i] * u[k]);
        }
    }
    j
}

/// Tests `λ ∈ N_Q(y)` through `‖Π_Q(y + λ) − y‖ ≤ tol`.
///
/// Fails with [`Error::NotInCone`] when `y` itself is farther than
/// `tol · max(1, ‖y‖)` from `Q`.
pub fn in_normal_cone(lambda: &ConeVec, y: &ConeVec, tol: f64) -> Result<bool> {
    if lambda.m() != y.m() {
        return Err(Error::DimensionMismatch {
            what: "normal cone test".into(),
            expected: y.0.len(),
            got: lambda.0.len(),
        });
    }
    let dist = project_polar_raw(&y.0).norm();
    if dist > tol * y.norm().max(1.0) {
        return Err(Error::NotInCone(dist));
    }
    Ok(normal_cone_violation(&lambda.0, &y.0) <= tol)
}

/// `‖Π_Q(y + λ) − y‖`, zero exactly when `y ∈ Q` and `λ ∈ N_Q(y)`.
pub(crate) fn normal_cone_violation(lambda: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (project_q_raw(&(y + lambda)) - y).norm()
}
