//! Empirical checks of the quantitative statements behind the method:
//! two-sided error bounds for the KKT residual, second-order growth of the
//! augmented Lagrangian, local solvability of the subproblems and the linear
//! rate of the outer iteration.
//!
//! Everything is sampled with seeded streams, so reports are reproducible.

use nalgebra::DVector;
use serde::Serialize;

use crate::alm::{self, AlmTrace, InnerConfig};
use crate::cone;
use crate::error::{Error, Result};
use crate::lagrangian;
use crate::linalg::joint_norm;
use crate::model::{builtin, Builtin, SocpProblem};
use crate::sampling;
use crate::variational::{check_sosc, SoscOptions};

/// `dist(λ; Λ(x̄))` for a singleton or a ray multiplier set.
pub fn dist_to_multiplier_set(p: &SocpProblem, lambda: &DVector<f64>) -> Result<f64> {
    let sol = p.known()?;
    p.check_lambda(lambda)?;
    Ok(match &sol.multiplier_ray {
        Some(d) => {
            let s = (lambda.dot(d) / d.norm_squared()).max(0.0);
            (lambda - d * s).norm()
        }
        None => (lambda - &sol.lambda).norm(),
    })
}

/// `‖x − x̄‖ + dist(λ; Λ(x̄))`.
pub fn primal_dual_distance(p: &SocpProblem, x: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
    let sol = p.known()?;
    p.check_x(x)?;
    Ok((x - &sol.x).norm() + dist_to_multiplier_set(p, lambda)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorBoundReport {
    /// Sup of `(‖x−x̄‖ + dist(λ;Λ))/σ` at `ball_radius`.
    pub kappa1_hat: f64,
    /// Sup of `σ/(‖x−x̄‖ + dist(λ;Λ))` at `ball_radius`.
    pub kappa2_hat: f64,
    /// Same suprema on the ball of radius `ball_radius / 10`.
    pub kappa1_hat_inner: f64,
    pub kappa2_hat_inner: f64,
    pub ball_radius: f64,
    pub samples: usize,
    /// Stationary probes that landed inside the ball (counted at both radii).
    pub probes: usize,
    /// `kappa1_hat_inner > 10 · kappa1_hat`: the primal-dual estimate is
    /// degrading faster than the radius shrinks. A heuristic threshold.
    pub failed: bool,
    pub seed: u64,
}

#[derive(Default)]
struct Sup {
    k1: f64,
    k2: f64,
}

impl Sup {
    fn add(&mut self, dist: f64, sigma: f64) {
        if dist <= 0.0 && sigma <= 0.0 {
            return;
        }
        if sigma > 0.0 {
            self.k1 = self.k1.max(dist / sigma);
        } else {
            self.k1 = f64::INFINITY;
        }
        if dist > 0.0 {
            self.k2 = self.k2.max(sigma / dist);
        }
    }
}

/// Estimates both error-bound constants on the ball of radius `radius` around
/// `(x̄, λ̄)` and on the ball of radius `radius/10`.
///
/// Uniform samples are drawn once and scaled to both radii. In addition,
/// "stationary probes" take `λ = Π_{−Q}(λ̄ + δ)` and restore stationarity
/// `∇ₓL(x, λ) = 0` by Newton's method from `x̄`; these follow the directions
/// in which the primal estimate can break down and are kept only when they
/// fall inside the ball.
pub fn verify_error_bound(p: &SocpProblem, radius: f64, samples: usize, seed: u64) -> Result<ErrorBoundReport> {
    let sol = p.known()?.clone();
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let (n, d) = (p.n, p.m + 1);
    let mut outer = Sup::default();
    let mut inner = Sup::default();
    let mut probes = 0;
    let record = |sup: &mut Sup, x: &DVector<f64>, l: &DVector<f64>| -> Result<()> {
        let sigma = lagrangian::residual(p, x, l)?;
        sup.add(primal_dual_distance(p, x, l)?, sigma);
        Ok(())
    };
    for i in 0..samples {
        let mut rng = sampling::substream(seed, i as u64);
        let z = sampling::uniform_ball(&mut rng, n + d, 1.0);
        let dx = z.rows(0, n).into_owned();
        let dl = z.rows(n, d).into_owned();
        for (sup, r) in [(&mut outer, radius), (&mut inner, radius / 10.0)] {
            record(sup, &(&sol.x + &dx * r), &(&sol.lambda + &dl * r))?;
        }
    }
    for i in 0..samples {
        let mut rng = sampling::substream(seed ^ 0x5eed_0001, i as u64);
        let delta = sampling::uniform_ball(&mut rng, d, 1.0);
        for (sup, r) in [(&mut outer, radius), (&mut inner, radius / 10.0)] {
            let l = cone::project_polar_raw(&(&sol.lambda + &delta * r));
            let Some(x) = stationary_point(p, &l, &sol.x) else {
                continue;
            };
            if joint_norm(&(&x - &sol.x), &(&l - &sol.lambda)) > r {
                continue;
            }
            probes += 1;
            record(sup, &x, &l)?;
        }
    }
    Ok(ErrorBoundReport {
        kappa1_hat: outer.k1,
        kappa2_hat: outer.k2,
        kappa1_hat_inner: inner.k1,
        kappa2_hat_inner: inner.k2,
        ball_radius: radius,
        samples,
        probes,
        failed: samples > 0 && inner.k1 > 10.0 * outer.k1,
        seed,
    })
}

/// Newton's method on `∇ₓL(·, λ) = 0` from `x_start`.
fn stationary_point(p: &SocpProblem, lambda: &DVector<f64>, x_start: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = x_start.clone();
    for _ in 0..50 {
        let g = lagrangian::grad_lagrangian(p, &x, lambda).ok()?;
        if g.norm() <= 1e-14 * (1.0 + x.norm()) {
            return Some(x);
        }
        let h = lagrangian::hessian_lagrangian(p, &x, lambda).ok()?;
        let step = h.lu().solve(&(-g))?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        x += step;
    }
    let g = lagrangian::grad_lagrangian(p, &x, lambda).ok()?;
    (g.norm() <= 1e-10).then_some(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct Example32Ratio {
    pub t: f64,
    /// `dist²(λ_t; Λ(x̄))` from the closed form `(3 − 2t − t²)/2`.
    pub dist2: f64,
    /// `‖∇ₓL(x̄, λ_t)‖²` from the closed form `(t − 1)²`.
    pub grad2: f64,
    pub ratio: f64,
    pub dist2_oracle: f64,
    pub grad2_oracle: f64,
}

/// Closed-form distance and stationarity quantities along the multipliers
/// `λ_t = (−1, t, √(1−t²))` of the built-in nonunique-multiplier problem,
/// cross-checked against the problem oracles.
pub fn example32_ratio(t: f64) -> Result<Example32Ratio> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must lie in (0, 1)")));
    }
    let dist2 = (3.0 - 2.0 * t - t * t) / 2.0;
    let grad2 = (t - 1.0).powi(2);
    let p = builtin(&Builtin::Example32)?;
    let lambda = DVector::from_column_slice(&[-1.0, t, (1.0 - t * t).sqrt()]);
    let xbar = p.known()?.x.clone();
    let dist2_oracle = dist_to_multiplier_set(&p, &lambda)?.powi(2);
    let grad2_oracle = lagrangian::grad_lagrangian(&p, &xbar, &lambda)?.norm_squared();
    for (name, closed, oracle) in [("dist2", dist2, dist2_oracle), ("grad2", grad2, grad2_oracle)] {
        if (closed - oracle).abs() > 1e-10 * closed.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::OracleMismatch(format!(
                "{name} at t = {t}: closed form {closed:e}, oracle {oracle:e}"
            )));
        }
    }
    Ok(Example32Ratio {
        t,
        dist2,
        grad2,
        ratio: dist2 / grad2,
        dist2_oracle,
        grad2_oracle,
    })
}

/// Growth estimate at one penalty value.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthRow {
    pub rho: f64,
    /// `min (𝓛(x,λ,ρ) − f(x̄))/‖x−x̄‖²` over samples, one entry per radius.
    pub ell_by_radius: Vec<f64>,
    pub ell_hat: f64,
    pub gamma_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    /// Smallest tested `ρ` with `ell_hat > 0`, or the largest tested `ρ`.
    pub rho_used: f64,
    pub ell_hat: f64,
    pub gamma_hat: f64,
    pub multiplier_samples: usize,
    /// One `(ell_hat, gamma_hat)` pair is valid for every sampled multiplier.
    pub uniform: bool,
    pub radii: Vec<f64>,
    pub table: Vec<GrowthRow>,
    pub seed: u64,
}

pub const GROWTH_RADII: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// For each `ρ`, samples `x` in balls of the radii in [`GROWTH_RADII`] and
/// multipliers in `Λ(x̄)` near `λ̄`, and records the largest `ℓ` with
/// `𝓛(x,λ,ρ) ≥ f(x̄) + ℓ‖x−x̄‖²` on all samples of a radius.
///
/// `ell_hat` is the best `ℓ` over the radii and `gamma_hat` the largest
/// radius with positive `ℓ` (zero when there is none). The samples do not
/// depend on `ρ`, and `𝓛` is nondecreasing in `ρ`, so both are monotone in `ρ`.
pub fn certify_growth(
    p: &SocpProblem,
    rho_list: &[f64],
    x_samples: usize,
    lambda_samples: usize,
    seed: u64,
) -> Result<GrowthReport> {
    let sol = p.known()?.clone();
    if rho_list.is_empty() || rho_list.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("rho list must be non-empty and positive".into()));
    }
    let fbar = p.f(&sol.x);
    let mut multipliers = vec![sol.lambda.clone()];
    if let Some(dir) = &sol.multiplier_ray {
        // points (s·c)·d of the ray around λ̄ = c·d with s ∈ [0.5, 1.5]
        let c = sol.lambda.dot(dir) / dir.norm_squared();
        for j in 1..lambda_samples {
            let mut rng = sampling::substream(seed ^ 0x1a4b_da00, j as u64);
            let s = 0.5 + sampling::uniform_ball(&mut rng, 1, 1.0)[0].abs();
            multipliers.push(dir * (c * s));
        }
    }
    let mut xs: Vec<Vec<DVector<f64>>> = Vec::new();
    for (ri, r) in GROWTH_RADII.iter().enumerate() {
        xs.push(
            (0..x_samples)
                .map(|i| {
                    let mut rng = sampling::substream(seed.wrapping_add(ri as u64), i as u64);
                    &sol.x + sampling::uniform_ball(&mut rng, p.n, *r)
                })
                .collect(),
        );
    }

    let mut table = Vec::with_capacity(rho_list.len());
    for &rho in rho_list {
        let mut ell_by_radius = Vec::with_capacity(GROWTH_RADII.len());
        for ring in &xs {
            let mut ell = f64::INFINITY;
            for x in ring {
                let d2 = (x - &sol.x).norm_squared();
                if d2 < 1e-300 {
                    continue;
                }
                for l in &multipliers {
                    let v = lagrangian::aug_value(p, x, l, rho)?;
                    ell = ell.min((v - fbar) / d2);
                }
            }
            ell_by_radius.push(ell);
        }
        let ell_hat = ell_by_radius.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gamma_hat = GROWTH_RADII
            .iter()
            .zip(&ell_by_radius)
            .filter(|(_, e)| **e > 0.0)
            .map(|(r, _)| *r)
            .fold(0.0, f64::max);
        table.push(GrowthRow { rho, ell_by_radius, ell_hat, gamma_hat });
    }
    let chosen = table
        .iter()
        .find(|row| row.ell_hat > 0.0)
        .unwrap_or_else(|| table.last().expect("non-empty rho list"))
        .clone();
    Ok(GrowthReport {
        rho_used: chosen.rho,
        ell_hat: chosen.ell_hat,
        gamma_hat: chosen.gamma_hat,
        multiplier_samples: multipliers.len(),
        uniform: chosen.ell_hat > 0.0,
        radii: GROWTH_RADII.to_vec(),
        table,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub q_per_iter: Vec<f64>,
    pub q_geomean: f64,
}

/// Per-step contraction `e_{k+1}/e_k` of `e_k = ‖x_k−x̄‖ + dist(λ_k;Λ(x̄))`
/// and the geometric mean over the last half of the steps. Steps whose
/// denominator is below `1e−14` are skipped.
pub fn estimate_rate(trace: &AlmTrace, p: &SocpProblem) -> Result<RateEstimate> {
    let errs = trace
        .rows
        .iter()
        .map(|r| primal_dual_distance(p, &r.x, &r.lambda))
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<f64> = errs
        .windows(2)
        .filter(|w| w[0] >= 1e-14)
        .map(|w| w[1] / w[0])
        .collect();
    let tail = &q[q.len() / 2..];
    let q_geomean = if tail.is_empty() || tail.iter().any(|v| *v == 0.0) {
        0.0
    } else {
        (tail.iter().map(|v| v.ln()).sum::<f64>() / tail.len() as f64).exp()
    };
    Ok(RateEstimate { q_per_iter: q, q_geomean })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolvabilityReport {
    /// Sup of `‖x(λ) − x̄‖/‖λ − λ̄‖` over the sampled multipliers.
    pub ell_hat: f64,
    pub rho: f64,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Minimizes `𝓛(·, λ, ρ)` from `x̄` for multipliers `λ` sampled in the ball
/// of radius `radius` around `λ̄` and reports the Lipschitz-type ratio of the
/// minimizers. Refuses problems on which SOSC does not hold.
pub fn solvability_estimate(
    p: &SocpProblem,
    rho: f64,
    lambda_samples: usize,
    seed: u64,
    radius: f64,
) -> Result<SolvabilityReport> {
    let sol = p.known()?.clone();
    let sosc = check_sosc(p, &sol.x, &sol.lambda, &SoscOptions::default())?;
    if !sosc.holds {
        return Err(Error::InvalidParameter(format!(
            "not applicable: SOSC fails at the known solution (modulus {:e})",
            sosc.modulus
        )));
    }
    let inner = InnerConfig::default();
    let mut ell: f64 = 0.0;
    for i in 0..lambda_samples {
        let mut rng = sampling::substream(seed, i as u64);
        let l = &sol.lambda + sampling::uniform_ball(&mut rng, p.m + 1, radius);
        let dl = (&l - &sol.lambda).norm();
        if dl == 0.0 {
            continue;
        }
        let r = alm::inner_solve(p, &l, rho, &sol.x, 1e-12, &inner)?;
        ell = ell.max((r.x - &sol.x).norm() / dl);
    }
    if !ell.is_finite() {
        return Err(Error::NonFinite("solvability ratio"));
    }
    Ok(SolvabilityReport { ell_hat: ell, rho, radius, samples: lambda_samples, seed })
}

/// Penalty floor `max{ρ_sosc, 2κ̂₁, 8κ̂₁²κ̂₂}` assembled from the SOSC
/// certificate and the error-bound constants.
#[derive(Debug, Clone, Serialize)]
pub struct RhoFloor {
    pub rho_sosc: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub floor: f64,
}

pub fn certified_rho_floor(p: &SocpProblem, seed: u64) -> Result<RhoFloor> {
    let sol = p.known()?.clone();
    let sosc = check_sosc(p, &sol.x, &sol.lambda, &SoscOptions { seed, ..SoscOptions::default() })?;
    if !sosc.holds {
        return Err(Error::InvalidParameter("not applicable: SOSC fails at the known solution".into()));
    }
    let eb = verify_error_bound(p, 1e-2, 200, seed)?;
    let kappa1 = eb.kappa1_hat.max(eb.kappa1_hat_inner);
    let kappa2 = eb.kappa2_hat.max(eb.kappa2_hat_inner);
    let floor = sosc.rho_used.max(2.0 * kappa1).max(8.0 * kappa1 * kappa1 * kappa2);
    Ok(RhoFloor { rho_sosc: sosc.rho_used, kappa1, kappa2, floor })
}
