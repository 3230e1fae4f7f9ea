// frozen reference values keep every printed digit
#![allow(clippy::excessive_precision)]

mod common;

use bkp_core::{Lattice, C64};
use common::*;
use proptest::prelude::*;

fn lattices() -> Vec<Lattice> {
    vec![
        Lattice::square(0.5),
        Lattice::hexagonal(0.5),
        Lattice::new(c(0.6, 0.1), c(0.2, 0.7)).unwrap(),
    ]
}

#[test]
fn row_oracle_agrees_with_square_truncation() {
    let o = RowOracle::new(c(0.5, 0.0), c(0.0, 0.5));
    let z = c(0.3, 0.2);
    let b100 = brute_sums(o.omega, o.omega_prime, z, 100);
    let b200 = brute_sums(o.omega, o.omega_prime, z, 200);
    // truncation tails decay like radius⁻²
    for (coarse, fine, exact) in [
        (b100.wp, b200.wp, o.wp(z)),
        (b100.zeta, b200.zeta, o.zeta(z)),
        (b100.g4, b200.g4, o.g4_sum()),
    ] {
        let (e1, e2) = (rel(coarse, exact), rel(fine, exact));
        assert!(e2 < 5e-6, "{e2}");
        assert!((3.5..4.5).contains(&(e1 / e2)), "{e1} {e2}");
    }
}

#[test]
fn frozen_square_lattice_values() {
    let o = RowOracle::new(c(0.5, 0.0), c(0.0, 0.5));
    let lat = Lattice::square(0.5);
    let wp = c(3.37210367373581832e0, -5.99141860045564112e0);
    let zeta = c(0.0, -2.29118014146634819e0);
    let sigma = c(2.50364711371263871e-1, 9.89462811370073470e-2);
    let g2 = c(1.89072720129233829e2, 0.0);
    let phi = c(5.36336743941238048e0, 2.93227906224549306e0);

    assert!(rel(o.wp(c(0.3, 0.2)), wp) < 1e-13);
    assert!(rel(o.g2(), g2) < 1e-13);

    assert!(rel(lat.wp(c(0.3, 0.2), 0).unwrap(), wp) < 1e-12);
    assert!(rel(lat.zeta(c(0.0, 0.4)).unwrap(), zeta) < 1e-12);
    assert!(rel(lat.sigma(c(0.25, 0.1)), sigma) < 1e-12);
    assert!(rel(lat.g2(), g2) < 1e-12);
    assert!(rel(lat.eta(), c(std::f64::consts::FRAC_PI_2, 0.0)) < 1e-13);
    assert!(rel(lat.phi(c(0.3, 0.0), c(0.0, 0.2), 0).unwrap().value, phi) < 1e-12);
}

#[test]
fn invariants_match_eisenstein_sums() {
    for lat in lattices() {
        let o = RowOracle::of(&lat);
        let scale = lat.g2().norm().max(lat.g3().norm());
        assert!((lat.g2() - o.g2()).norm() < 1e-10 * scale);
        assert!((lat.g3() - o.g3()).norm() < 1e-10 * scale);
        assert!(rel(lat.eta(), o.eta()) < 1e-10);
        assert!(rel(lat.eta_prime(), o.eta_prime()) < 1e-10);
        assert!(lat.legendre_residual() < 1e-12);
    }
}

#[test]
fn evaluators_match_oracle_at_random_points() {
    for (k, lat) in lattices().into_iter().enumerate() {
        let o = RowOracle::of(&lat);
        let mut rng = rng(100 + k as u64);
        for _ in 0..100 {
            let z = guarded_point(&mut rng, &lat, 0.05);
            let w = lat.wp_all(z).unwrap();
            assert!(rel(w[0], o.wp(z)) < 1e-9, "wp at {z}");
            assert!(rel(w[1], o.wp_prime(z)) < 1e-9, "wp' at {z}");
            assert!(rel(w[2], o.wp_second(z)) < 1e-9, "wp'' at {z}");
            assert!(rel(w[3], o.wp_third(z)) < 1e-9, "wp''' at {z}");
            assert!(rel(lat.zeta(z).unwrap(), o.zeta(z)) < 1e-9, "zeta at {z}");
            assert!(rel(lat.sigma(z), o.sigma(z)) < 1e-9, "sigma at {z}");
        }
    }
}

#[test]
fn phi_and_derivatives_match_contour_oracle() {
    for (k, lat) in lattices().into_iter().enumerate() {
        let o = RowOracle::of(&lat);
        let mut rng = rng(200 + k as u64);
        let mut checked = 0;
        while checked < 30 {
            let x = guarded_point(&mut rng, &lat, 0.1);
            let l = guarded_point(&mut rng, &lat, 0.1);
            let d = lat
                .distance_to_lattice(x + l)
                .min(lat.distance_to_lattice(x));
            if d < 0.1 * lat.min_period() {
                continue;
            }
            let r = 0.3 * d;
            let p = lat.phi(x, l, 3).unwrap();
            assert!(rel(p.value, o.phi(x, l)) < 1e-9);
            for order in 1..=3u32 {
                let got = p.deriv(order as usize).unwrap();
                let want = o.phi_deriv(x, l, order, r);
                assert!(
                    (got - want).norm() < 1e-9 * (1.0 + want.norm()),
                    "order {order}: {got} vs {want}"
                );
            }
            checked += 1;
        }
    }
}

#[test]
fn differential_equation_holds() {
    for (k, lat) in lattices().into_iter().enumerate() {
        let mut rng = rng(300 + k as u64);
        for _ in 0..100 {
            let z = guarded_point(&mut rng, &lat, 0.05);
            let (p, dp) = lat.wp_pair(z).unwrap();
            let r = dp * dp - (4.0 * p * p * p - lat.g2() * p - lat.g3());
            assert!(r.norm() < 1e-10 * (1.0 + p.norm().powi(3)));
            let w = lat.wp_all(z).unwrap();
            assert!((w[3] - 12.0 * w[0] * w[1]).norm() < 1e-10 * (1.0 + p.norm().powi(3)));
        }
    }
}

#[test]
fn degenerate_lattice_is_nearly_rational() {
    let lat = Lattice::new(c(50.0, 0.0), c(0.0, 50.0)).unwrap();
    let mut rng = rng(5);
    for _ in 0..100 {
        let z = complex_in_disk(&mut rng, 1.0);
        if z.norm() < 1e-3 {
            continue;
        }
        let p = lat.wp(z, 0).unwrap();
        assert!((p - 1.0 / (z * z)).norm() < 1e-5);
    }
}

fn any_point() -> impl Strategy<Value = (f64, f64)> {
    (-0.5f64..0.5, -0.5f64..0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wp_is_even_and_periodic((a, b) in any_point(), m in -3i32..3, n in -3i32..3) {
        let lat = Lattice::new(c(0.6, 0.1), c(0.2, 0.7)).unwrap();
        let z = 2.0 * (a * lat.omega() + b * lat.omega_prime());
        prop_assume!(lat.distance_to_lattice(z) > 0.05);
        let p = lat.wp(z, 0).unwrap();
        let shift = 2.0 * (m as f64 * lat.omega() + n as f64 * lat.omega_prime());
        prop_assert!((lat.wp(-z, 0).unwrap() - p).norm() < 1e-11 * (1.0 + p.norm()));
        prop_assert!((lat.wp(z + shift, 0).unwrap() - p).norm() < 1e-10 * (1.0 + p.norm()));
    }

    #[test]
    fn zeta_quasi_periods((a, b) in any_point()) {
        let lat = Lattice::hexagonal(0.5);
        let z = 2.0 * (a * lat.omega() + b * lat.omega_prime());
        prop_assume!(lat.distance_to_lattice(z) > 0.05);
        let zz = lat.zeta(z).unwrap();
        let d1 = lat.zeta(z + 2.0 * lat.omega()).unwrap() - zz;
        let d2 = lat.zeta(z + 2.0 * lat.omega_prime()).unwrap() - zz;
        prop_assert!((d1 - 2.0 * lat.eta()).norm() < 1e-10 * (1.0 + zz.norm()));
        prop_assert!((d2 - 2.0 * lat.eta_prime()).norm() < 1e-10 * (1.0 + zz.norm()));
    }

    #[test]
    fn phi_multiplier((a, b) in any_point(), (la, lb) in any_point()) {
        let lat = Lattice::square(0.5);
        let x = 2.0 * (a * lat.omega() + b * lat.omega_prime());
        let l = 2.0 * (la * lat.omega() + lb * lat.omega_prime());
        prop_assume!(lat.distance_to_lattice(x) > 0.05 && lat.distance_to_lattice(l) > 0.05);
        prop_assume!(lat.distance_to_lattice(x + l) > 0.05);
        let p = lat.phi(x, l, 0).unwrap().value;
        let shifted = lat.phi(x + 2.0 * lat.omega(), l, 0).unwrap().value;
        let zl = lat.zeta(l).unwrap();
        let mult = (2.0 * (lat.eta() * l - zl * lat.omega())).exp();
        prop_assert!((shifted - mult * p).norm() < 1e-10 * p.norm());
    }
}

#[test]
fn sigma_quasi_periodicity() {
    let lat = Lattice::new(c(0.6, 0.1), c(0.2, 0.7)).unwrap();
    let mut rng = rng(11);
    for _ in 0..20 {
        let z: C64 = cell_point(&mut rng, &lat);
        let s = lat.sigma(z);
        let shifted = lat.sigma(z + 2.0 * lat.omega());
        let want = -(2.0 * lat.eta() * (z + lat.omega())).exp() * s;
        assert!((shifted - want).norm() < 1e-10 * (1.0 + want.norm()));
    }
}

#[test]
fn regular_parts_match_subtraction_away_from_origin() {
    for (k, lat) in lattices().into_iter().enumerate() {
        let o = RowOracle::of(&lat);
        let mut rng = rng(400 + k as u64);
        for _ in 0..50 {
            // straddle the switch between series and subtraction
            let z = complex_in_disk(&mut rng, 0.4 * lat.min_period());
            if z.norm() < 0.05 * lat.min_period() {
                continue;
            }
            let wp = o.wp(z) - 1.0 / (z * z);
            let ze = o.zeta(z) - 1.0 / z;
            let scale = 1.0 + (1.0 / (z * z)).norm();
            assert!(
                (lat.wp_regular(z).unwrap() - wp).norm() < 1e-10 * scale,
                "{z}"
            );
            assert!(
                (lat.zeta_regular(z).unwrap() - ze).norm() < 1e-10 * scale,
                "{z}"
            );
        }
    }
}

#[test]
fn regular_parts_near_origin_follow_leading_terms() {
    let lat = Lattice::square(0.5);
    let z = c(3e-4, 2e-4);
    let g2 = lat.g2();
    let wp = lat.wp_regular(z).unwrap();
    assert!(rel(wp, g2 * z * z / 20.0) < 1e-6);
    let ze = lat.zeta_regular(z).unwrap();
    assert!(rel(ze, -g2 * z.powi(3) / 60.0) < 1e-6);
}
