mod common;

use common::{point, random_vector, RandomField};
use magcurv_core::geom::{christoffel, lorentz, nabla_omega};
use magcurv_core::nalgebra::DVector;
use magcurv_core::{builtins, Connection, PointGeometry};
use proptest::prelude::*;

fn coords() -> impl Strategy<Value = [f64; 3]> {
    [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lorentz_operator_is_g_antisymmetric(seed in 0u64..1000, x in coords()) {
        let field = RandomField::from_seed(seed);
        let sys = field.system();
        let x = point(x);
        let c = Connection::at(&sys, &x).unwrap();
        let (v, w) = (random_vector(seed ^ 1, 3), random_vector(seed ^ 2, 3));
        let lhs = c.inner(&lorentz(&sys, &x, &v).unwrap(), &w);
        prop_assert!((lhs + c.inner(&v, &c.lorentz(&w))).abs() < 1e-10);
        // ⟨v, Ωw⟩ = σ(v, w)
        prop_assert!((c.inner(&v, &c.lorentz(&w)) - v.dot(&(&c.sigma * &w))).abs() < 1e-12);
    }

    #[test]
    fn closed_two_form_cyclic_identity(seed in 0u64..1000, x in coords()) {
        let sys = RandomField::from_seed(seed).system();
        let x = point(x);
        let p = PointGeometry::at(&sys, &x).unwrap();
        let (u, v, w) = (random_vector(seed ^ 3, 3), random_vector(seed ^ 4, 3), random_vector(seed ^ 5, 3));
        // (∇_u σ)(v, w) = ⟨v, (∇_u Ω) w⟩
        let d = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>| p.inner(b, &nabla_omega(&sys, &x, a, c).unwrap());
        let cyclic = d(&u, &v, &w) + d(&v, &w, &u) + d(&w, &u, &v);
        prop_assert!(cyclic.abs() < 1e-6, "cyclic sum {cyclic}");
        let anti = p.inner(&p.nabla_omega(&u, &v), &w) + p.inner(&v, &p.nabla_omega(&u, &w));
        prop_assert!(anti.abs() < 1e-8, "∇Ω not antisymmetric: {anti}");
    }

    #[test]
    fn riemann_symmetries(seed in 0u64..1000, x in coords()) {
        let sys = RandomField::from_seed(seed).system();
        let p = PointGeometry::at(&sys, &point(x)).unwrap();
        let [u, v, w, z] = [6, 7, 8, 9].map(|s| random_vector(seed ^ s, 3));
        let r = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>| p.inner(&p.riemann(a, b, c), d);
        let scale = 1.0 + r(&u, &v, &w, &z).abs();
        prop_assert!((r(&u, &v, &w, &z) + r(&v, &u, &w, &z)).abs() < 1e-12 * scale);
        prop_assert!((r(&u, &v, &w, &z) + r(&u, &v, &z, &w)).abs() < 1e-8 * scale);
        prop_assert!((r(&u, &v, &w, &z) - r(&w, &z, &u, &v)).abs() < 1e-8 * scale);
        let bianchi = p.riemann(&u, &v, &w) + p.riemann(&v, &w, &u) + p.riemann(&w, &u, &v);
        prop_assert!(bianchi.amax() < 1e-8 * scale);
    }

    #[test]
    fn levi_civita_is_metric_and_torsion_free(seed in 0u64..1000, x in coords()) {
        let field = RandomField::from_seed(seed);
        let sys = field.system();
        let x0 = point(x);
        let gamma = christoffel(&sys, &x0).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert_eq!(gamma.get(k, i, j), gamma.get(k, j, i));
                }
            }
        }
        // d/dt ⟨V, W⟩ = ⟨DV/dt, W⟩ + ⟨V, DW/dt⟩ along x(t) = x0 + t a
        let [a, v0, v1, w0, w1] = [10, 11, 12, 13, 14].map(|s| random_vector(seed ^ s, 3));
        let pairing = |t: f64| {
            let g = field.metric(&(&x0 + &a * t));
            (&v0 + &v1 * t).dot(&(g * (&w0 + &w1 * t)))
        };
        let h = 1e-3;
        let numeric = (pairing(-2.0 * h) - 8.0 * pairing(-h) + 8.0 * pairing(h) - pairing(2.0 * h)) / (12.0 * h);
        let c = Connection::at(&sys, &x0).unwrap();
        let dv = &v1 + c.christoffel_contract(&a, &v0);
        let dw = &w1 + c.christoffel_contract(&a, &w0);
        let covariant = c.inner(&dv, &w0) + c.inner(&v0, &dw);
        prop_assert!((numeric - covariant).abs() < 1e-7, "{numeric} vs {covariant}");
    }

    #[test]
    fn sphere_has_unit_sectional_curvature(x in [-3.0f64..3.0, -3.0f64..3.0], seed in 0u64..1000) {
        let sys = builtins::round_sphere(0.0);
        let p = PointGeometry::at(&sys, &DVector::from_vec(x.to_vec())).unwrap();
        let (u, v) = (random_vector(seed, 2), random_vector(seed + 1, 2));
        prop_assume!((u[0] * v[1] - u[1] * v[0]).abs() > 1e-3);
        prop_assert!((p.sectional(&u, &v) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn polar_sphere_christoffel_symbols() {
    let sys = builtins::round_sphere_polar();
    let theta = 0.7;
    let gamma = christoffel(&sys, &DVector::from_vec(vec![theta, 0.3])).unwrap();
    // Γ^θ_φφ = −sin θ cos θ, Γ^φ_θφ = cot θ
    assert!((gamma.get(0, 1, 1) + theta.sin() * theta.cos()).abs() < 1e-14);
    assert!((gamma.get(1, 0, 1) - 1.0 / theta.tan()).abs() < 1e-14);
    assert_eq!(gamma.get(0, 0, 0), 0.0);
    assert_eq!(gamma.get(1, 1, 1), 0.0);
}

#[test]
fn flat_torus_is_flat_and_omega_rotates() {
    let sys = builtins::flat_torus(2.0);
    let x = DVector::from_vec(vec![0.3, 5.0]);
    let gamma = christoffel(&sys, &x).unwrap();
    assert!((0..8).all(|i| gamma.get(i / 4, (i / 2) % 2, i % 2) == 0.0));
    let e1 = DVector::from_vec(vec![1.0, 0.0]);
    assert_eq!(lorentz(&sys, &x, &e1).unwrap(), DVector::from_vec(vec![0.0, -2.0]));
}

#[test]
fn analytic_and_finite_difference_schemes_agree() {
    let sys = builtins::modulated_torus(1.0, 0.2);
    let fd = sys
        .clone()
        .with_scheme(magcurv_core::DerivativeScheme::finite_difference(magcurv_core::DerivativeScheme::DEFAULT_STEP))
        .unwrap();
    let x = DVector::from_vec(vec![1.3, 0.4]);
    let (a, b) = (PointGeometry::at(&sys, &x).unwrap(), PointGeometry::at(&fd, &x).unwrap());
    let v = DVector::from_vec(vec![0.6, -0.8]);
    assert!((a.nabla_omega(&v, &v) - b.nabla_omega(&v, &v)).amax() < 1e-9);
}

#[test]
fn cyclic_sum_detects_a_non_closed_form() {
    // σ = x³ dx¹∧dx², so dσ = dx¹∧dx²∧dx³
    let sys = magcurv_core::ChartedSystem::new(
        "open",
        3,
        std::sync::Arc::new(|_| Ok(magcurv_core::nalgebra::DMatrix::identity(3, 3))),
        std::sync::Arc::new(|x| {
            let mut s = magcurv_core::nalgebra::DMatrix::zeros(3, 3);
            s[(0, 1)] = x[2];
            s[(1, 0)] = -x[2];
            Ok(s)
        }),
    )
    .unwrap();
    let x = point([0.1, 0.2, 0.3]);
    let p = PointGeometry::at(&sys, &x).unwrap();
    let e = |i: usize| {
        let mut v = DVector::zeros(3);
        v[i] = 1.0;
        v
    };
    let d = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>| p.inner(b, &p.nabla_omega(a, c));
    let cyclic = d(&e(0), &e(1), &e(2)) + d(&e(1), &e(2), &e(0)) + d(&e(2), &e(0), &e(1));
    assert!((cyclic.abs() - 1.0).abs() < 1e-8, "{cyclic}");
}
