use steklov_core::eigen_linear::solve_linear_steklov;
use steklov_core::fucik::{c_of_s, curve_points, partition_value, FucikOptions, MINUS, PLUS};
use steklov_core::mesh::{build_disk_mesh, build_square_mesh, Mesh};
use steklov_core::weights::{Profile, WeightSpec};

fn one() -> WeightSpec {
    WeightSpec::constant(1.0).unwrap()
}

/// Splits the cells by the sign of ⟨centroid − (½, ½), dir⟩ − offset.
fn half_plane(mesh: &Mesh, dir: [f64; 2], offset: f64) -> Vec<i8> {
    (0..mesh.n_cells())
        .map(|c| {
            let x = mesh.cell_centroid(c);
            if (x[0] - 0.5) * dir[0] + (x[1] - 0.5) * dir[1] > offset {
                PLUS
            } else {
                MINUS
            }
        })
        .collect()
}

#[test]
fn optimum_is_below_every_tested_partition() {
    let mesh = build_square_mesh(8).unwrap();
    let opts = FucikOptions::default();
    for s in [0.5, 1.0, 2.0] {
        let c = c_of_s(&mesh, &one(), &one(), s, 2.0).unwrap().c;
        for dir in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]] {
            for offset in [-0.2, -0.1, 0.0, 0.1, 0.2] {
                let part = half_plane(&mesh, dir, offset);
                let v = partition_value(&mesh, &one(), &one(), s, 2.0, &part, &opts).unwrap();
                assert!(c <= v * (1.0 + 1e-12), "s = {s}: {c} above {v}");
            }
        }
    }
}

#[test]
fn branches_balance_at_the_optimum() {
    let mesh = build_square_mesh(16).unwrap();
    let b = WeightSpec::constant(2.0).unwrap();
    for s in [0.5, 1.0, 2.0, 4.0] {
        let q = c_of_s(&mesh, &one(), &b, s, 2.0).unwrap();
        assert!(q.converged);
        assert!(q.imbalance() <= 0.05, "s = {s}: imbalance {}", q.imbalance());
    }
}

#[test]
fn curve_lies_above_the_trivial_lines() {
    let mesh = build_square_mesh(8).unwrap();
    let b = WeightSpec::constant(1.5).unwrap();
    let lam_a = solve_linear_steklov(&mesh, &one(), 1).unwrap()[0].lambda;
    let lam_b = solve_linear_steklov(&mesh, &b, 1).unwrap()[0].lambda;
    for s in [0.25, 1.0, 3.0] {
        let c = c_of_s(&mesh, &one(), &b, s, 2.0).unwrap().c;
        assert!(c > lam_a.max(s * lam_b) * (1.0 + 1e-6));
    }
}

#[test]
fn swapping_the_weights_reflects_the_curve() {
    let mesh = build_square_mesh(8).unwrap();
    let b = WeightSpec::constant(2.0).unwrap();
    for s in [0.5, 2.0] {
        let ab = c_of_s(&mesh, &one(), &b, s, 2.0).unwrap().c;
        let ba = c_of_s(&mesh, &b, &one(), 1.0 / s, 2.0).unwrap().c;
        assert!((ab - s * ba).abs() <= 1e-8 * ab, "{ab} vs {}", s * ba);
    }
}

#[test]
fn curve_scales_inversely_with_common_weights() {
    let mesh = build_square_mesh(8).unwrap();
    let w = WeightSpec::new(Profile::cosine(1.0, 2.0, [1, 0, 0]), 0.3).unwrap();
    let w3 = w.scaled(3.0).unwrap();
    for s in [0.5, 1.0, 2.0] {
        let c = c_of_s(&mesh, &w, &w, s, 2.0).unwrap().c;
        let c3 = c_of_s(&mesh, &w3, &w3, s, 2.0).unwrap().c;
        assert!((3.0 * c3 - c).abs() <= 1e-8 * c, "{} vs {c}", 3.0 * c3);
    }
}

#[test]
fn disk_diagonal_point_is_the_second_eigenvalue() {
    let mesh = build_disk_mesh(3).unwrap();
    let q = c_of_s(&mesh, &one(), &one(), 1.0, 2.0).unwrap();
    assert!((q.c - 1.240193).abs() <= 0.02 * 1.240193);
    assert_eq!(q.alpha, q.beta);
}

#[test]
fn alpha_approaches_the_first_eigenvalue() {
    let mesh = build_square_mesh(8).unwrap();
    let lam1 = solve_linear_steklov(&mesh, &one(), 1).unwrap()[0].lambda;
    let curve = curve_points(&mesh, &one(), &one(), &[1.0, 2.0, 4.0, 8.0], 2.0).unwrap();
    assert!(curve.monotone, "violations {} / {}", curve.alpha_violation, curve.beta_violation);
    let (first, last) = (&curve.points[0], &curve.points[3]);
    assert!(last.alpha - lam1 < first.alpha - lam1);
    assert!(curve.points.iter().all(|q| q.partition.len() == mesh.n_cells()));
}

#[test]
fn invalid_arguments_are_rejected() {
    let mesh = build_square_mesh(4).unwrap();
    assert!(c_of_s(&mesh, &one(), &one(), 0.0, 2.0).is_err());
    assert!(curve_points(&mesh, &one(), &one(), &[2.0, 1.0], 2.0).is_err());
    let all_plus = vec![PLUS; mesh.n_cells()];
    assert!(partition_value(&mesh, &one(), &one(), 1.0, 2.0, &all_plus, &FucikOptions::default()).is_err());
}
