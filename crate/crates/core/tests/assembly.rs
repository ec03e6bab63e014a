use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steklov_core::assembly::{assemble_boundary_mass, assemble_interior, p_boundary_norm, p_energy, p_energy_gradient, PFunctional};
use steklov_core::eigen_linear::solve_linear_steklov;
use steklov_core::mesh::{build_cube_mesh, build_square_mesh, Mesh};
use steklov_core::quadrature::{BoundaryQuadrature, QuadOptions};
use steklov_core::space::FeSpace;
use steklov_core::weights::{Profile, WeightSpec};

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn cosine() -> Profile {
    Profile::cosine(1.0, 2.0, [1, 1, 0])
}

#[test]
fn linear_function_energy_is_exact() {
    let mesh = build_square_mesh(8).unwrap();
    let a = assemble_interior(&mesh).unwrap();
    let u: Vec<f64> = (0..mesh.n_vertices()).map(|i| mesh.vertex(i)[0]).collect();
    assert!((a.quad_form(&u) - (1.0 + 1.0 / 3.0)).abs() < 1e-10);
}

#[test]
fn constant_weight_mass_sums_to_the_perimeter() {
    let mesh = build_square_mesh(6).unwrap();
    let b = assemble_boundary_mass(&mesh, &WeightSpec::constant(1.0).unwrap()).unwrap();
    assert!((b.total() - 4.0).abs() < 1e-12);
    let b7 = assemble_boundary_mass(&mesh, &WeightSpec::constant(7.0).unwrap()).unwrap();
    for (x, y) in b.values().iter().zip(b7.values()) {
        assert!((7.0 * x - y).abs() <= 1e-14 * y.abs().max(1.0));
    }
}

/// ∫₀ᴸ q(t) cos(θ₀ + θ₁t) dt for a quadratic q = c₀ + c₁t + c₂t².
fn cos_moment(c: [f64; 3], th0: f64, th1: f64, len: f64) -> f64 {
    let prim = |t: f64| {
        let (s, co) = ((th0 + th1 * t).sin(), (th0 + th1 * t).cos());
        let q = c[0] + c[1] * t + c[2] * t * t;
        let dq = c[1] + 2.0 * c[2] * t;
        q * s / th1 + dq * co / th1.powi(2) - 2.0 * c[2] * s / th1.powi(3)
    };
    prim(len) - prim(0.0)
}

#[test]
fn oscillating_mass_matches_closed_form_integrals() {
    let mesh = build_square_mesh(4).unwrap();
    let eps = 0.1;
    let b = assemble_boundary_mass(&mesh, &WeightSpec::new(cosine(), eps).unwrap()).unwrap();
    let n = mesh.n_vertices();
    let mut exact = vec![0.0; n * n];
    for f in 0..mesh.n_boundary_facets() {
        let v = mesh.facet(f);
        let (p, q) = (mesh.vertex(v[0]), mesh.vertex(v[1]));
        let len = mesh.facet_measure(f);
        let k = 2.0 * PI / eps;
        let th0 = k * (p[0] + p[1]);
        let th1 = k * ((q[0] - p[0]) + (q[1] - p[1])) / len;
        // hats 1 − t/L and t/L
        let prods = [[1.0, -2.0 / len, 1.0 / len.powi(2)], [0.0, 1.0 / len, -1.0 / len.powi(2)], [0.0, 0.0, 1.0 / len.powi(2)]];
        let plain = [len / 3.0, len / 6.0, len / 3.0];
        let entry = |i: usize| 2.0 * plain[i] + cos_moment(prods[i], th0, th1, len);
        exact[v[0] * n + v[0]] += entry(0);
        exact[v[0] * n + v[1]] += entry(1);
        exact[v[1] * n + v[0]] += entry(1);
        exact[v[1] * n + v[1]] += entry(2);
    }
    for r in 0..n {
        for c in 0..n {
            assert!((b.get(r, c) - exact[r * n + c]).abs() < 1e-10, "({r}, {c}): {} vs {}", b.get(r, c), exact[r * n + c]);
        }
    }
}

#[test]
fn quadratic_energy_matches_the_operator() {
    let mesh = build_square_mesh(6).unwrap();
    let space = FeSpace::full(&mesh);
    let spec = WeightSpec::new(cosine(), 0.2).unwrap();
    let quad = BoundaryQuadrature::new(&mesh, &spec, &QuadOptions::default()).unwrap();
    let f = PFunctional::new(&space, &quad, 2.0).unwrap();
    let a = assemble_interior(&mesh).unwrap();
    let b = assemble_boundary_mass(&mesh, &spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let u = random_vec(&mut rng, space.n_dofs());
        let e = a.quad_form(&u);
        assert!((p_energy(&f, &u) - e).abs() <= 1e-10 * e);
        let nb = b.quad_form(&u);
        assert!((p_boundary_norm(&f, &u) - nb).abs() <= 1e-10 * nb);
    }
}

#[test]
fn zero_and_constant_fields() {
    let mesh = build_square_mesh(5).unwrap();
    let space = FeSpace::full(&mesh);
    let quad = BoundaryQuadrature::new(&mesh, &WeightSpec::constant(1.0).unwrap(), &QuadOptions::default()).unwrap();
    let f = PFunctional::new(&space, &quad, 3.0).unwrap();
    let zero = vec![0.0; space.n_dofs()];
    assert_eq!(p_energy(&f, &zero), 0.0);
    assert!(p_energy_gradient(&f, &zero).iter().all(|&g| g == 0.0));
    let one = vec![1.0; space.n_dofs()];
    assert!((p_energy(&f, &one) - 1.0).abs() < 1e-13);
    assert!((p_boundary_norm(&f, &one) - 4.0).abs() < 1e-13);
}

fn fd_check(mesh: &Mesh, spec: &WeightSpec) {
    let space = FeSpace::full(mesh);
    let quad = BoundaryQuadrature::new(mesh, spec, &QuadOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for p in [1.5, 2.0, 3.0, 4.0] {
        let f = PFunctional::new(&space, &quad, p).unwrap();
        for _ in 0..10 {
            let u = random_vec(&mut rng, space.n_dofs());
            let d = random_vec(&mut rng, space.n_dofs());
            let h = 1e-6;
            let shifted = |t: f64| -> Vec<f64> { u.iter().zip(&d).map(|(a, b)| a + t * b).collect() };
            for (value, grad) in [
                (&(|v: &[f64]| f.energy(v)) as &dyn Fn(&[f64]) -> f64, f.energy_gradient(&u)),
                (&|v: &[f64]| f.boundary_norm(v), f.boundary_norm_gradient(&u)),
            ] {
                let fd = (value(&shifted(h)) - value(&shifted(-h))) / (2.0 * h);
                let exact: f64 = grad.iter().zip(&d).map(|(g, b)| g * b).sum();
                assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "p = {p}: {fd} vs {exact}");
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences_in_2d() {
    fd_check(&build_square_mesh(6).unwrap(), &WeightSpec::new(cosine(), 0.15).unwrap());
}

#[test]
fn gradients_match_finite_differences_in_3d() {
    fd_check(&build_cube_mesh(3).unwrap(), &WeightSpec::new(cosine(), 0.3).unwrap());
}

#[test]
fn discrete_trace_constant_stays_bounded_under_refinement() {
    let spec = WeightSpec::constant(1.0).unwrap();
    let mut prev: Option<f64> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [4, 8, 16, 32] {
        let mesh = build_square_mesh(d).unwrap();
        let c_h = 1.0 / solve_linear_steklov(&mesh, &spec, 1).unwrap()[0].lambda;
        let space = FeSpace::full(&mesh);
        let quad = BoundaryQuadrature::new(&mesh, &spec, &QuadOptions::default()).unwrap();
        let f = PFunctional::new(&space, &quad, 2.0).unwrap();
        for _ in 0..20 {
            let u = random_vec(&mut rng, space.n_dofs());
            assert!(p_boundary_norm(&f, &u) <= c_h * p_energy(&f, &u) * (1.0 + 1e-10));
        }
        if let Some(c) = prev {
            assert!((c_h - c).abs() <= 0.05 * c, "C_h {c_h} after {c}");
        }
        prev = Some(c_h);
    }
}

#[test]
fn rayleigh_quotient_of_a_smooth_function_converges() {
    // u = x² + y²: ∫|∇u|² + u² = 8/3 + 28/45, ∫_{∂Ω} u² = 2·(1/5) + 2·(1 + 2/3 + 1/5)
    let exact = (8.0 / 3.0 + 28.0 / 45.0) / (2.0 / 5.0 + 2.0 * (1.0 + 2.0 / 3.0 + 1.0 / 5.0));
    let mut prev = f64::INFINITY;
    for d in [2, 4, 8, 16] {
        let mesh = build_square_mesh(d).unwrap();
        let space = FeSpace::full(&mesh);
        let quad = BoundaryQuadrature::new(&mesh, &WeightSpec::constant(1.0).unwrap(), &QuadOptions::default()).unwrap();
        let f = PFunctional::new(&space, &quad, 2.0).unwrap();
        let u = space.interpolate(|x| x[0] * x[0] + x[1] * x[1]);
        let err = (f.rayleigh(&u) - exact).abs();
        assert!(err < prev, "d = {d}: error {err} after {prev}");
        prev = err;
    }
    assert!(prev < 1e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn functionals_are_p_homogeneous(seed in 0u64..1000, t in -5.0f64..5.0, pi in 0usize..4) {
        prop_assume!(t.abs() > 1e-3);
        let p = [1.5, 2.0, 3.0, 4.0][pi];
        let mesh = build_square_mesh(4).unwrap();
        let space = FeSpace::full(&mesh);
        let spec = WeightSpec::new(cosine(), 0.3).unwrap();
        let quad = BoundaryQuadrature::new(&mesh, &spec, &QuadOptions::default()).unwrap();
        let f = PFunctional::new(&space, &quad, p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vec(&mut rng, space.n_dofs());
        let tu: Vec<f64> = u.iter().map(|x| t * x).collect();
        let scale = t.abs().powf(p);
        let (e, et) = (p_energy(&f, &u), p_energy(&f, &tu));
        prop_assert!((et - scale * e).abs() <= 1e-12 * et);
        let (n, nt) = (p_boundary_norm(&f, &u), p_boundary_norm(&f, &tu));
        prop_assert!((nt - scale * n).abs() <= 1e-12 * nt);
        prop_assert!((f.rayleigh(&tu) - f.rayleigh(&u)).abs() <= 1e-12 * f.rayleigh(&u));
    }
}
