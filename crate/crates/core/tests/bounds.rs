use std::f64::consts::PI;

use proptest::prelude::*;
use steklov_core::bounds::{
    k1_k2, k_of_lambda, moser_exponents, rate_constant_main, rate_constant_p2, report, unit_ball_volume, DomainConstants,
};
use steklov_core::mesh::{build_cube_mesh, build_disk_mesh, build_square_mesh};

fn constants(n: usize, p: f64, vol: f64, perim: f64, c_tr: f64) -> DomainConstants {
    DomainConstants::new(n, p, vol, perim, c_tr, 1.0, 0.5).unwrap()
}

#[test]
fn moser_exponents_on_a_grid() {
    for n in [2usize, 3, 4] {
        for p in [1.5, 2.0, 3.0] {
            let m = moser_exponents(n, p).unwrap();
            let nf = n as f64;
            let conj = p / (p - 1.0);
            assert!((m.chi - (1.0 + (p - 1.0) / (p * (nf - 1.0)))).abs() < 1e-14);
            assert!((m.gamma - (nf - 1.0) * conj).abs() < 1e-14);
            let beta = m.gamma * (nf - 1.0) * ((nf + 1.0) * p - 1.0) / (nf * p - 1.0);
            assert!((m.beta - beta).abs() < 1e-12 * beta);
            assert!(m.chi > 1.0);
        }
    }
    let m = moser_exponents(3, 2.0).unwrap();
    assert_eq!((m.chi, m.gamma), (1.25, 4.0));
    assert!((m.beta - 11.2).abs() < 1e-14);
    assert!(moser_exponents(1, 2.0).is_err());
    assert!(moser_exponents(2, 1.0).is_err());
}

#[test]
fn unit_ball_volumes() {
    assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
    assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-12);
}

#[test]
fn k_of_lambda_at_the_first_eigenvalue() {
    for (n, p) in [(2, 2.0), (3, 2.0), (2, 3.0)] {
        let dc = DomainConstants::new(n, p, 1.0, 4.0, 0.8, 1.0, 0.7).unwrap();
        let expected = (0.7f64.powf(1.0 / p) + 1.0).powf((n as f64 - 1.0) / (p - 1.0));
        assert!((k_of_lambda(0.7, &dc, p) - expected).abs() < 1e-14);
    }
}

#[test]
fn unit_perimeter_gives_unit_constants() {
    for p in [1.5, 2.0, 3.0] {
        for c_tr in [0.3, 1.0] {
            let (k1, k2) = k1_k2(&constants(2, p, 0.05, 1.0, c_tr), p);
            assert!((k1 - 1.0).abs() < 1e-15 && (k2 - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn second_constant_dominates_for_large_perimeters() {
    for i in 1..=30 {
        let p = 1.0 + 0.1 * i as f64;
        for j in 0..=18 {
            let perim = 1.0 + 0.5 * j as f64;
            for c_tr in [0.5, 1.0, 1.5] {
                let (k1, k2) = k1_k2(&constants(2, p, 1.0, perim, c_tr), p);
                assert!(k2 >= k1 * (1.0 - 1e-14), "p = {p}, |∂Ω| = {perim}");
            }
        }
    }
}

#[test]
fn rate_constants_by_hand() {
    let sq = constants(2, 2.0, 1.0, 4.0, 0.5);
    assert!((rate_constant_p2(&sq) - 2.0).abs() < 1e-14);
    // 4² · max{0.25, 2, ½, ¼, ½}
    assert!((rate_constant_main(&sq, 2.0) - 32.0).abs() < 1e-12);
    let cube = constants(3, 2.0, 1.0, 6.0, 1.2);
    assert!((rate_constant_p2(&cube) - 1.728 * 6f64.powf(0.25)).abs() < 1e-12);
    // 6¹ · max{1.728, √6, 1/√6, 1/√6, 1/√6}
    assert!((rate_constant_main(&cube, 2.0) - 6.0 * 6f64.sqrt()).abs() < 1e-12);
}

#[test]
fn fitted_constants_are_consistent() {
    for (mesh, p) in [(build_square_mesh(12).unwrap(), 2.0), (build_disk_mesh(3).unwrap(), 3.0), (build_cube_mesh(4).unwrap(), 2.0)] {
        let dc = DomainConstants::fit(&mesh, p, 20, 7).unwrap();
        assert_eq!(dc.n, mesh.dim());
        assert!((dc.perim - mesh.boundary_measure()).abs() < 1e-12);
        assert!(dc.isoperimetric_ok());
        // the constant function alone gives |∂Ω| / |Ω|
        assert!(dc.c_tr >= dc.perim / dc.vol * (1.0 - 1e-12));
        assert!(dc.c_tr_p >= dc.lam1_ref.powf(-1.0 / p) * (1.0 - 1e-12));
        let r = report(&dc).unwrap();
        assert!(r.k2 >= r.k1 && r.k_lam1 > 0.0 && r.rate_constant_main > 0.0);
    }
}

#[test]
fn invalid_constants_are_rejected() {
    assert!(DomainConstants::new(2, 2.0, 1.0, 0.0, 1.0, 1.0, 1.0).is_err());
    assert!(DomainConstants::new(2, 1.0, 1.0, 4.0, 1.0, 1.0, 1.0).is_err());
    assert!(DomainConstants::new(2, 2.0, f64::NAN, 4.0, 1.0, 1.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn k_is_increasing_in_lambda(lam in 1e-3f64..1e3, p in 1.1f64..5.0, c_tr in 0.1f64..5.0, n in 2usize..4) {
        let dc = DomainConstants::new(n, p, 1.0, 4.0, c_tr, 1.0, 0.4).unwrap();
        prop_assert!(k_of_lambda(2.0 * lam, &dc, p) > k_of_lambda(lam, &dc, p));
    }
}
