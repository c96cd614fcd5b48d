use nalgebra::DVector;
use proptest::prelude::*;
use socp_alm::cone::{self, ConeRegion, ConeVec};

const TOL: f64 = 1e-10;

fn cone_vec(max_m: usize) -> impl Strategy<Value = ConeVec> {
    (1..=max_m)
        .prop_flat_map(|m| prop::collection::vec(-10.0f64..10.0, m + 1))
        .prop_map(|v| ConeVec::from_slice(&v).unwrap())
}

fn pair(max_m: usize) -> impl Strategy<Value = (ConeVec, ConeVec)> {
    (1..=max_m)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(-10.0f64..10.0, m + 1),
                prop::collection::vec(-10.0f64..10.0, m + 1),
            )
        })
        .prop_map(|(a, b)| (ConeVec::from_slice(&a).unwrap(), ConeVec::from_slice(&b).unwrap()))
}

fn in_q(y: &ConeVec, tol: f64) -> bool {
    y.yr().norm() <= y.y0() + tol
}

fn in_polar(y: &ConeVec, tol: f64) -> bool {
    y.yr().norm() <= -y.y0() + tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn projection_is_feasible_and_orthogonal(y in cone_vec(10)) {
        let p = cone::project_q(&y);
        let r = ConeVec::from_vec(y.as_vector() - p.as_vector()).unwrap();
        let scale = 1.0 + y.norm();
        prop_assert!(in_q(&p, TOL * scale));
        prop_assert!(in_polar(&r, TOL * scale));
        prop_assert!(r.as_vector().dot(p.as_vector()).abs() <= TOL * scale * scale);
    }

    #[test]
    fn moreau_decomposition(y in cone_vec(10)) {
        let p = cone::project_q(&y);
        let q = cone::project_polar(&y);
        let scale = 1.0 + y.norm();
        prop_assert!((p.as_vector() + q.as_vector() - y.as_vector()).amax() <= TOL * scale);
        prop_assert!(p.as_vector().dot(q.as_vector()).abs() <= TOL * scale * scale);
    }

    #[test]
    fn projection_is_idempotent_and_nonexpansive((a, b) in pair(6)) {
        let pa = cone::project_q(&a);
        let again = cone::project_q(&pa);
        prop_assert!((again.as_vector() - pa.as_vector()).amax() <= 1e-12 * (1.0 + a.norm()));
        let pb = cone::project_q(&b);
        let lhs = (pa.as_vector() - pb.as_vector()).norm();
        let rhs = (a.as_vector() - b.as_vector()).norm();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn normal_cone_matches_projection_test(z in cone_vec(8)) {
        // every z splits into y = Π_Q(z) and λ = Π_{−Q}(z) with λ ∈ N_Q(y)
        let y = cone::project_q(&z);
        let l = cone::project_polar(&z);
        prop_assert!(cone::in_normal_cone(&l, &y, 1e-9).unwrap());
        let back = cone::project_q(&ConeVec::from_vec(y.as_vector() + l.as_vector()).unwrap());
        prop_assert!((back.as_vector() - y.as_vector()).amax() <= 1e-9 * (1.0 + z.norm()));
    }

    #[test]
    fn normal_cone_agrees_with_projection_on_random_pairs((y, l) in pair(4)) {
        let y = cone::project_q(&y);
        let back = cone::project_q(&ConeVec::from_vec(y.as_vector() + l.as_vector()).unwrap());
        let fixed = (back.as_vector() - y.as_vector()).norm() <= 1e-9;
        let member = cone::in_normal_cone(&l, &y, 1e-9).unwrap();
        // random pairs are almost never on the boundary of the relation
        prop_assert_eq!(fixed, member);
    }

    #[test]
    fn tilde_is_an_involution(y in cone_vec(10)) {
        prop_assert_eq!(y.tilde().tilde(), y.clone());
    }

    #[test]
    fn classify_is_consistent_with_membership(y in cone_vec(6)) {
        let region = cone::classify(&y, 1e-12).unwrap();
        match region {
            ConeRegion::InteriorQ | ConeRegion::BoundaryQNonzero | ConeRegion::Zero => {
                prop_assert_eq!(cone::project_q(&y), y.clone());
            }
            ConeRegion::InteriorPolar | ConeRegion::BoundaryPolarNonzero => {
                prop_assert!(cone::project_q(&y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
            ConeRegion::Outside => {
                prop_assert!(!in_q(&y, 0.0) && !in_polar(&y, 0.0));
            }
        }
        prop_assert!((cone::dist2_q(&y) - cone::project_polar(&y).as_vector().norm_squared()).abs()
            <= 1e-10 * (1.0 + y.norm()).powi(2));
    }

    #[test]
    fn jacobian_matches_finite_differences(y in cone_vec(6)) {
        let gap = y.yr().norm() - y.y0().abs();
        prop_assume!(gap.abs() > 1e-3 && y.yr().norm() > 1e-3);
        let jac = cone::jacobian_project_polar(&y);
        let h = 1e-6;
        for j in 0..=y.m() {
            let mut plus = y.as_vector().clone();
            let mut minus = y.as_vector().clone();
            plus[j] += h;
            minus[j] -= h;
            let fp = cone::project_polar(&ConeVec::from_vec(plus).unwrap());
            let fm = cone::project_polar(&ConeVec::from_vec(minus).unwrap());
            let col = (fp.as_vector() - fm.as_vector()) / (2.0 * h);
            prop_assert!((col - jac.column(j)).amax() <= 1e-6, "column {j} of {:?}", y);
        }
    }
}

#[test]
fn closed_form_examples() {
    let v = |s: &[f64]| ConeVec::from_slice(s).unwrap();
    assert_eq!(cone::project_q(&v(&[1.0, 0.5, 0.0])), v(&[1.0, 0.5, 0.0]));
    assert_eq!(cone::project_q(&v(&[-2.0, 1.0, 0.0])), v(&[0.0, 0.0, 0.0]));
    assert_eq!(cone::project_q(&v(&[0.0, 2.0, 0.0])), v(&[1.0, 1.0, 0.0]));
    assert_eq!(cone::project_polar(&v(&[0.0, 2.0, 0.0])), v(&[-1.0, 1.0, 0.0]));
    assert_eq!(cone::classify(&v(&[1.0, 0.5]), 0.0).unwrap(), ConeRegion::InteriorQ);
    assert_eq!(cone::classify(&v(&[0.0, 0.0]), 0.0).unwrap(), ConeRegion::Zero);
    assert_eq!(cone::classify(&v(&[0.0, 2.0, 0.0]), 0.0).unwrap(), ConeRegion::Outside);
    assert!(!cone::in_normal_cone(&v(&[-1.0, 0.0, 0.0]), &v(&[1.0, 1.0, 0.0]), 1e-12).unwrap());
    assert!(cone::in_normal_cone(&v(&[-1.0, 1.0, 0.0]), &v(&[0.0, 0.0, 0.0]), 1e-12).unwrap());
}

#[test]
fn rejects_bad_vectors() {
    assert!(ConeVec::from_slice(&[1.0]).is_err());
    assert!(ConeVec::from_slice(&[f64::NAN, 0.0]).is_err());
    assert!(ConeVec::from_vec(DVector::from_vec(vec![0.0, f64::INFINITY])).is_err());
}
