//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use socp_alm::model::{self, Builtin};
use socp_alm::{ConeRegion, ConeVec, SocpProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        // Box-Muller keeps the fixture independent of the library's sampler
        let u: f64 = rng.gen_range(1e-12..1.0);
        let v: f64 = rng.gen::<f64>();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    })
}

pub fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let g = gaussian(rng, n);
        let norm = g.norm();
        if norm > 1e-8 {
            return g / norm;
        }
    }
}

pub fn projection(a: &[f64]) -> SocpProblem {
    model::builtin(&Builtin::Projection(ConeVec::from_slice(a).unwrap())).unwrap()
}

pub fn planted(n: usize, m: usize, region: ConeRegion, seed: u64) -> SocpProblem {
    model::generate_planted(n, m, region, seed).unwrap()
}

/// Every builtin family, with the parameters used across the test suite.
pub fn builtins() -> Vec<SocpProblem> {
    vec![
        model::builtin(&Builtin::Example32).unwrap(),
        projection(&[0.0, 2.0, 0.0]),
        projection(&[-1.0, 1.0, 0.0]),
        projection(&[0.0, 0.0, 0.0]),
        projection(&[2.0, 1.0, -0.5]),
        model::builtin(&Builtin::InteriorTrivial).unwrap(),
        model::builtin(&Builtin::NegativeCurvature).unwrap(),
        model::builtin(&Builtin::ScaledQuadratic { seed: 0 }).unwrap(),
        planted(4, 2, ConeRegion::BoundaryQNonzero, 1),
        planted(3, 3, ConeRegion::InteriorQ, 2),
        planted(5, 2, ConeRegion::Zero, 3),
    ]
}

/// Coordinatewise central difference of a vector-valued map.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    for j in 0..x.len() {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        jac.set_column(j, &((f(&plus) - f(&minus)) / (2.0 * h)));
    }
    jac
}

pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |j, _| {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1.0)
}

/// Margin of `y` from the non-smooth set of the projection.
pub fn kink_margin(y: &DVector<f64>) -> f64 {
    let r = y.rows(1, y.len() - 1).norm();
    (r - y[0].abs()).abs().min(r.max(y[0].abs()))
}

/// A point at joint distance `dist` from the known solution in a random direction.
pub fn start_near(p: &SocpProblem, dist: f64, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let sol = p.known().unwrap();
    let mut r = rng(seed);
    let d = unit(&mut r, p.n + p.m + 1) * dist;
    (&sol.x + d.rows(0, p.n), &sol.lambda + d.rows(p.n, p.m + 1))
}
