mod common;

use common::*;
use nalgebra::DVector;
use socp_alm::cone::ConeVec;
use socp_alm::model::{self, Builtin};
use socp_alm::variational::{
    self, check_dual_qualification, check_sosc, critical_cone, d2_aug_lagrangian, d2_indicator_q,
    difference_quotient_oracle, dist2_critical, quad_form_q, Calmness, CriticalConeKind, DualQualOptions,
    ExtendedReal, SoscMethod, SoscOptions,
};
use socp_alm::{ConeRegion, Error, SocpProblem};

fn cv(v: &[f64]) -> ConeVec {
    ConeVec::from_slice(v).unwrap()
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn example32() -> SocpProblem {
    model::builtin(&Builtin::Example32).unwrap()
}

fn oracle_problems() -> Vec<SocpProblem> {
    vec![
        example32(),
        projection(&[0.0, 2.0, 0.0]),
        projection(&[-1.0, 1.0, 0.0]),
        projection(&[-1.0, 0.5, 0.0]),
        projection(&[2.0, 1.0, 0.0]),
        projection(&[0.0, 0.0, 0.0]),
    ]
}

/// Brute-force second-order quotient of `x ↦ 𝓛(x, λ̄, ρ)` evaluated without
/// any of the library's closed forms. Used to re-derive the documented values.
fn brute_quotient(a: &[f64], w: &[f64], rho: f64, t: f64) -> f64 {
    // f(x) = ½‖x − a‖², Φ(x) = x
    let a = v(a);
    let w = v(w);
    let xbar = socp_alm::cone::project_q(&ConeVec::from_vec(a.clone()).unwrap()).into_vector();
    let lbar = &a - &xbar;
    let polar = |y: &DVector<f64>| {
        let r = y.rows(1, y.len() - 1).norm();
        if r <= y[0] {
            DVector::zeros(y.len())
        } else if r <= -y[0] {
            y.clone()
        } else {
            let s = 0.5 * (y[0] - r);
            let mut out = y.clone() * (-s / r);
            out[0] = s;
            out
        }
    };
    let aug = |x: &DVector<f64>| {
        let mu = polar(&(x * rho + &lbar));
        0.5 * (x - &a).norm_squared() + (mu.norm_squared() - lbar.norm_squared()) / (2.0 * rho)
    };
    // ∇ₓ𝓛 at a KKT pair vanishes, so the quotient is a plain second difference
    (aug(&(&xbar + &w * t)) - aug(&xbar)) / (0.5 * t * t)
}

#[test]
fn documented_projection_value_is_rederived_by_brute_force() {
    let brute = brute_quotient(&[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0], 1.0, 1e-4);
    assert!((brute - 1.5).abs() <= 1e-3, "brute {brute}");
    let p = projection(&[0.0, 2.0, 0.0]);
    let sol = p.known().unwrap();
    let w = v(&[0.0, 0.0, 1.0]);
    let q = quad_form_q(&p, &sol.x, &sol.lambda, 1.0, &w).unwrap();
    let d2 = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 1.0, &w).unwrap();
    assert!((q - 1.5).abs() <= 1e-12);
    assert!((d2 - 1.5).abs() <= 1e-12);
    let dq = difference_quotient_oracle(&p, &sol.x, &sol.lambda, 1.0, &w, 1e-4).unwrap();
    assert!((dq - 1.5).abs() <= 1e-3);
}

#[test]
fn brute_force_agrees_with_closed_form_on_random_directions() {
    let mut r = rng(5);
    for a in [[0.0, 2.0, 0.0], [-1.0, 1.0, 0.0], [-1.0, 0.3, 0.2], [3.0, 1.0, 1.0], [0.5, -2.0, 1.0]] {
        let p = projection(&a);
        let sol = p.known().unwrap();
        for rho in [1.0, 10.0] {
            for _ in 0..20 {
                let w = unit(&mut r, 3);
                let d2 = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, rho, &w).unwrap();
                let brute = brute_quotient(&a, w.as_slice(), rho, 1e-5);
                assert!((d2 - brute).abs() <= 1e-3, "a={a:?} rho={rho} d2={d2} brute={brute}");
            }
        }
    }
}

fn worst_rate_constant(p: &SocpProblem, rho: f64, t: f64, dirs: &[DVector<f64>]) -> f64 {
    let sol = p.known().unwrap();
    dirs.iter()
        .map(|w| {
            let d2 = d2_aug_lagrangian(p, &sol.x, &sol.lambda, rho, w).unwrap();
            let dq = difference_quotient_oracle(p, &sol.x, &sol.lambda, rho, w, t).unwrap();
            (dq - d2).abs() / t
        })
        .fold(0.0, f64::max)
}

fn directions(n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut r = rng(seed);
    let mut dirs = vec![v(&vec![1.0; n]).normalize()];
    dirs.extend((0..n).map(|i| DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 })));
    dirs.extend((0..30).map(|_| unit(&mut r, n)));
    dirs
}

#[test]
fn quotient_within_ten_t_on_reference_problems() {
    for p in [example32(), projection(&[0.0, 2.0, 0.0])] {
        let dirs = directions(p.n, 11);
        for rho in [1.0, 10.0] {
            for t in [1e-3, 1e-4, 1e-5] {
                let c = worst_rate_constant(&p, rho, t, &dirs);
                assert!(c <= 10.0, "{} rho={rho} t={t}: C = {c}", p.name);
            }
        }
    }
}

#[test]
fn quotient_rate_constant_is_stable() {
    // C = |Δ²_t − d²|/t settles to a problem-dependent constant; at a vertex
    // with ρ = 10 it is about 25, so only stability is asserted here
    for p in oracle_problems() {
        let dirs = directions(p.n, 12);
        for rho in [1.0, 10.0] {
            let c3 = worst_rate_constant(&p, rho, 1e-3, &dirs);
            let c4 = worst_rate_constant(&p, rho, 1e-4, &dirs);
            assert!((c3 - c4).abs() <= 0.1 * c3 + 1e-2, "{} rho={rho}: {c3} vs {c4}", p.name);
        }
    }
}

#[test]
fn example32_documented_values() {
    let p = example32();
    let sol = p.known().unwrap();
    let w = v(&[1.0, 0.0]);
    let d2 = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 1.0, &w).unwrap();
    assert!((d2 - 2.0).abs() <= 1e-12);
    let dq = difference_quotient_oracle(&p, &sol.x, &sol.lambda, 1.0, &w, 1e-4).unwrap();
    assert!((dq - 2.0).abs() <= 1e-3);
    let q = quad_form_q(&p, &sol.x, &sol.lambda, 3.0, &v(&[0.3, -0.4])).unwrap();
    assert!((q - 2.0 * 0.25).abs() <= 1e-12);
    assert_eq!(d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 1.0, &v(&[0.0, 0.0])).unwrap(), 0.0);
}

#[test]
fn second_subderivative_is_homogeneous_and_monotone() {
    let mut r = rng(12);
    let mut problems = oracle_problems();
    problems.push(planted(4, 2, ConeRegion::BoundaryQNonzero, 1));
    problems.push(planted(4, 3, ConeRegion::Zero, 2));
    for p in problems {
        let sol = p.known().unwrap().clone();
        let hess = socp_alm::lagrangian::hessian_lagrangian(&p, &sol.x, &sol.lambda).unwrap();
        for _ in 0..30 {
            let w = gaussian(&mut r, p.n);
            let base = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 2.0, &w).unwrap();
            let symmetric = matches!(
                critical_kind(&p).as_str(),
                "FullSpace" | "ZeroOnly" | "Hyperplane"
            );
            let scales: &[f64] = if symmetric { &[2.0, 0.5, -1.0] } else { &[2.0, 0.5] };
            for &s in scales {
                let scaled = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 2.0, &(&w * s)).unwrap();
                assert!((scaled - s * s * base).abs() <= 1e-10 * (1.0 + base.abs()) * s * s);
            }
            let mut prev_q = f64::NEG_INFINITY;
            let mut prev_d = f64::NEG_INFINITY;
            for rho in [0.1, 1.0, 10.0, 100.0, 1e4] {
                let q = quad_form_q(&p, &sol.x, &sol.lambda, rho, &w).unwrap();
                let d = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, rho, &w).unwrap();
                assert!(q >= prev_q - 1e-12 * (1.0 + q.abs()));
                assert!(d >= prev_d - 1e-12 * (1.0 + d.abs()));
                assert!(q >= w.dot(&(&hess * &w)) - 1e-12 * (1.0 + q.abs()));
                prev_q = q;
                prev_d = d;
            }
        }
    }
}

fn critical_kind(p: &SocpProblem) -> String {
    let sol = p.known().unwrap();
    check_sosc(p, &sol.x, &sol.lambda, &SoscOptions::default()).unwrap().critical_cone
}

#[test]
fn reflection_changes_the_value_on_a_ray() {
    // dist²(−v; R₊d) ≠ dist²(v; R₊d), so d² is only positively homogeneous
    let p = projection(&[-1.0, 1.0, 0.0]);
    let sol = p.known().unwrap();
    let w = v(&[1.0, 1.0, 0.0]);
    let plus = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 1.0, &w).unwrap();
    let minus = d2_aug_lagrangian(&p, &sol.x, &sol.lambda, 1.0, &(-&w)).unwrap();
    assert!((plus - 2.0).abs() < 1e-12);
    assert!((minus - 4.0).abs() < 1e-12);
}

#[test]
fn critical_cone_cases() {
    let k = critical_cone(&cv(&[2.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap();
    assert_eq!(k.kind, CriticalConeKind::FullSpace);
    let k = critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap();
    match &k.kind {
        CriticalConeKind::Hyperplane { normal } => {
            assert!((normal.as_vector().normalize() - v(&[-1.0, 1.0, 0.0]).normalize()).norm() < 1e-12)
        }
        other => panic!("{other:?}"),
    }
    let k = critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap();
    match &k.kind {
        CriticalConeKind::Ray { direction } => {
            assert!((direction.as_vector().normalize() - v(&[1.0, 1.0, 0.0]).normalize()).norm() < 1e-12)
        }
        other => panic!("{other:?}"),
    }
    let k = critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 0.0, 0.0]), 1e-10).unwrap();
    assert_eq!(k.kind, CriticalConeKind::ZeroOnly);
    let k = critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap();
    assert_eq!(k.kind, CriticalConeKind::WholeConeQ);
    let k = critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap();
    assert!(matches!(k.kind, CriticalConeKind::HalfSpace { .. }));

    assert!(matches!(
        critical_cone(&cv(&[0.0, 2.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10),
        Err(Error::NotInCone(_))
    ));
    assert!(matches!(
        critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[-1.0, 0.0, 0.0]), 1e-10),
        Err(Error::NotInNormalCone(_))
    ));
}

#[test]
fn critical_distances() {
    let hyper = critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap();
    assert!(dist2_critical(&hyper, &cv(&[1.0, 1.0, 0.0])).abs() < 1e-15);
    let ray = critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap();
    assert!((dist2_critical(&ray, &cv(&[0.0, 0.0, 1.0])) - 1.0).abs() < 1e-15);
    let whole = critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap();
    assert!((dist2_critical(&whole, &cv(&[0.0, 2.0, 0.0])) - 2.0).abs() < 1e-15);
}

#[test]
fn distance_vanishes_exactly_on_the_cone() {
    let mut r = rng(13);
    let cones = [
        critical_cone(&cv(&[2.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap(),
        critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 0.0, 0.0]), 1e-10).unwrap(),
        critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap(),
        critical_cone(&cv(&[1.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap(),
        critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), 1e-10).unwrap(),
        critical_cone(&cv(&[0.0, 0.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), 1e-10).unwrap(),
    ];
    for k in &cones {
        for _ in 0..200 {
            let y = ConeVec::from_vec(gaussian(&mut r, 3)).unwrap();
            let d = dist2_critical(k, &y);
            assert!(d >= 0.0);
            assert_eq!(d <= 1e-20, k.contains(&y, 1e-10), "{:?} at {:?}", k.kind, y);
            // the nearest point of a convex cone is at distance d, so moving
            // there drives the distance to zero
            if k.contains(&y, 0.0) {
                assert_eq!(d, 0.0);
            }
        }
        let zero = ConeVec::zeros(2);
        assert_eq!(dist2_critical(k, &zero), 0.0);
    }
}

#[test]
fn indicator_second_subderivative_examples() {
    assert_eq!(
        d2_indicator_q(&cv(&[2.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 0.0]), &cv(&[3.0, -1.0, 2.0])).unwrap(),
        ExtendedReal::Finite(0.0)
    );
    match d2_indicator_q(&cv(&[1.0, 1.0, 0.0]), &cv(&[-1.0, 1.0, 0.0]), &cv(&[0.0, 0.0, 1.0])).unwrap() {
        ExtendedReal::Finite(val) => assert!((val - 1.0).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    assert_eq!(
        d2_indicator_q(&cv(&[0.0, 0.0, 0.0]), &cv(&[-1.0, 0.0, 0.0]), &cv(&[1.0, 0.0, 0.0])).unwrap(),
        ExtendedReal::PosInfinity
    );
}

#[test]
fn sosc_certificates() {
    let opts = SoscOptions::default();
    let p = example32();
    let sol = p.known().unwrap();
    let rep = check_sosc(&p, &sol.x, &sol.lambda, &opts).unwrap();
    assert!(rep.holds);
    assert_eq!(rep.method, SoscMethod::PiecewiseEigen);
    assert!((rep.modulus - 2.0).abs() < 1e-9);

    let p = model::builtin(&Builtin::InteriorTrivial).unwrap();
    let sol = p.known().unwrap();
    let rep = check_sosc(&p, &sol.x, &sol.lambda, &opts).unwrap();
    assert!(rep.holds && (rep.modulus - 1.0).abs() < 1e-12);
    assert_eq!(rep.method, SoscMethod::ExactEigen);

    let p = model::builtin(&Builtin::NegativeCurvature).unwrap();
    let sol = p.known().unwrap();
    let rep = check_sosc(&p, &sol.x, &sol.lambda, &opts).unwrap();
    assert!(!rep.holds && (rep.modulus + 2.0).abs() < 1e-12);
    assert!(rep.rho_used.is_infinite());

    // x = (1, 0) is not stationary for f = −‖x‖²
    let err = check_sosc(&p, &v(&[1.0, 0.0]), &sol.lambda, &opts);
    assert!(matches!(err, Err(Error::NotKkt(_))));
}

#[test]
fn sosc_modulus_matches_sampled_minimum() {
    // on planted problems the certified penalty makes the sampled minimum positive
    let mut r = rng(14);
    for region in [ConeRegion::BoundaryQNonzero, ConeRegion::InteriorQ, ConeRegion::Zero] {
        for seed in 0..3 {
            let p = planted(4, 2, region, seed);
            let sol = p.known().unwrap().clone();
            let rep = check_sosc(&p, &sol.x, &sol.lambda, &SoscOptions::default()).unwrap();
            assert!(rep.holds, "{region:?} seed {seed}");
            let min = (0..300)
                .map(|_| d2_aug_lagrangian(&p, &sol.x, &sol.lambda, rep.rho_used, &unit(&mut r, p.n)).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "{region:?} seed {seed}: {min}");
        }
    }
}

#[test]
fn dual_qualification_cases() {
    let opts = DualQualOptions::default();
    let p = example32();
    let sol = p.known().unwrap();
    let rep = check_dual_qualification(&p, &sol.x, &sol.lambda, &opts).unwrap();
    assert!(!rep.holds && rep.conclusive);
    assert_eq!(rep.calmness, Calmness::Unknown);
    let w = v(rep.witness.as_ref().unwrap());
    let cos = w.dot(&v(&[-1.0, 1.0, 0.0])) / (w.norm() * 2f64.sqrt());
    assert!(cos >= 0.999, "cosine {cos}");

    // Φ(x̄) = 0 with an identity Jacobian
    let p = projection(&[-1.0, 1.0, 0.0]);
    let sol = p.known().unwrap();
    let rep = check_dual_qualification(&p, &sol.x, &sol.lambda, &opts).unwrap();
    assert!(rep.holds && rep.witness.is_none());

    let p = model::builtin(&Builtin::InteriorTrivial).unwrap();
    let sol = p.known().unwrap();
    assert!(check_dual_qualification(&p, &sol.x, &sol.lambda, &opts).unwrap().holds);
}

#[test]
fn sampled_penalty_is_flagged_as_non_certifying() {
    let p = projection(&[0.0, 0.0, 0.0]);
    let sol = p.known().unwrap();
    let rep = check_sosc(&p, &sol.x, &sol.lambda, &SoscOptions::default()).unwrap();
    assert_eq!(rep.method, SoscMethod::SampledPenalty);
    assert_eq!(rep.critical_cone, "WholeConeQ");
    assert!(rep.holds);
    let dq = check_dual_qualification(&p, &sol.x, &sol.lambda, &DualQualOptions::default()).unwrap();
    assert!(dq.holds);
    assert!(!variational::MEMBERSHIP_TOL.is_nan());
}
