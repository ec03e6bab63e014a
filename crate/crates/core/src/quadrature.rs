//! Quadrature rules: Gauss–Legendre on segments, collapsed Gauss rules on
//! triangles, degree-2 cell rules and the ε-resolving boundary rule.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::mesh::Mesh;
use crate::par::{self, Exec};
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Gauss–Legendre nodes and weights mapped to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(n.max(1)).expect("nonzero");
    GaussLegendre::new(n).as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Collapsed (Duffy) `q×q` Gauss rule on a triangle. Points are barycentric,
/// weights sum to one (i.e. are fractions of the triangle area).
pub fn triangle_rule(q: usize) -> Vec<([f64; 3], f64)> {
    let gl = gauss_legendre_unit(q);
    let mut out = Vec::with_capacity(q * q);
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            let x1 = u;
            let x2 = v * (1.0 - u);
            out.push(([1.0 - x1 - x2, x1, x2], 2.0 * wu * wv * (1.0 - u)));
        }
    }
    out
}

const TRI_A: f64 = 2.0 / 3.0;
const TRI_B: f64 = 1.0 / 6.0;
const TET_A: f64 = 0.585_410_196_624_968_5;
const TET_B: f64 = 0.138_196_601_125_010_5;

/// Degree-2 interior rule (3 points on triangles, 4 on tetrahedra).
/// Barycentric points padded to length 4; weights sum to one.
pub fn cell_rule(dim: usize) -> &'static [([f64; 4], f64)] {
    static TRI: [([f64; 4], f64); 3] =
        [([TRI_A, TRI_B, TRI_B, 0.0], 1.0 / 3.0), ([TRI_B, TRI_A, TRI_B, 0.0], 1.0 / 3.0), ([TRI_B, TRI_B, TRI_A, 0.0], 1.0 / 3.0)];
    static TET: [([f64; 4], f64); 4] = [
        ([TET_A, TET_B, TET_B, TET_B], 0.25),
        ([TET_B, TET_A, TET_B, TET_B], 0.25),
        ([TET_B, TET_B, TET_A, TET_B], 0.25),
        ([TET_B, TET_B, TET_B, TET_A], 0.25),
    ];
    if dim == 2 {
        &TRI
    } else {
        &TET
    }
}

/// Controls for the boundary rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Gauss points per sub-segment on boundary edges (2D meshes).
    pub line_points: usize,
    /// Gauss points per direction on boundary sub-triangles (3D meshes).
    pub tri_points: usize,
    /// Allow splitting facets longer than the oscillation scale.
    pub subdivide: bool,
    /// Upper bound on the number of boundary points.
    pub max_points: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { line_points: 8, tri_points: 5, subdivide: true, max_points: 400_000_000 }
    }
}

/// One boundary quadrature point: barycentric position in its facet,
/// physical weight (including the facet measure) and weight value ρ_ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPoint {
    pub bary: [f64; 3],
    pub w: f64,
    pub rho: f64,
}

/// Number of pieces each facet edge is cut into for a smooth oscillating weight.
fn pieces_per_facet(dim: usize, diam: f64, eps: f64) -> usize {
    let target = if dim == 2 { 0.5 * eps } else { 0.25 * eps };
    ((diam / target).ceil() as usize).max(1)
}

/// Checks the resolution contract and returns the estimated point count.
pub fn check_resolution(mesh: &Mesh, spec: &WeightSpec, opts: &QuadOptions) -> Result<usize> {
    let eps = spec.epsilon();
    let dim = mesh.dim();
    let q = if dim == 2 { opts.line_points } else { opts.tri_points };
    let per_piece = if dim == 2 { q } else { q * q };
    let nf = mesh.n_boundary_facets();
    if !spec.is_oscillating() {
        return Ok(nf * per_piece);
    }
    let h = mesh.boundary_h_max();
    let m = if opts.subdivide { pieces_per_facet(dim, h, eps) } else { 1 };
    let piece = h / m as f64;
    if spec.needs_subdivision() && piece / q as f64 > eps / 8.0 * (1.0 + 1e-12) {
        return Err(Error::QuadratureUnderresolved {
            eps,
            detail: format!("point spacing {:.3e} exceeds eps/8 (boundary_h_max {:.3e}, {} points per piece)", piece / q as f64, h, q),
        });
    }
    let pieces = if spec.needs_subdivision() {
        m.pow(dim as u32 - 1)
    } else {
        let cuts = spec.jump_planes(dim).len() as f64 * (h / spec.jump_spacing() + 2.0);
        (cuts.ceil() as usize + 1).pow(dim as u32 - 1) * if dim == 3 { 2 } else { 1 }
    };
    let total = nf.saturating_mul(pieces).saturating_mul(per_piece);
    if total > opts.max_points {
        return Err(Error::ResourceLimit(format!("boundary quadrature would need ~{total} points (limit {})", opts.max_points)));
    }
    Ok(total)
}

/// Appends the quadrature points of boundary facet `f` to `out`.
pub fn facet_points(mesh: &Mesh, f: usize, spec: &WeightSpec, opts: &QuadOptions, out: &mut Vec<QPoint>) {
    let dim = mesh.dim();
    let verts = mesh.facet(f);
    let x = |k: usize| -> [f64; 3] {
        let v = mesh.vertex(verts[k]);
        [v[0], v[1], if dim == 3 { v[2] } else { 0.0 }]
    };
    let measure = mesh.facet_measure(f);
    let planes = spec.jump_planes(dim);
    let eps = spec.epsilon();
    if dim == 2 {
        let (a, b) = (x(0), x(1));
        let mut cuts = vec![0.0, 1.0];
        if spec.needs_subdivision() && opts.subdivide {
            let m = pieces_per_facet(2, measure, eps);
            cuts.extend((1..m).map(|i| i as f64 / m as f64));
        }
        for (n, spacing) in &planes {
            let ga = dot(n, &a) / spacing;
            let gb = dot(n, &b) / spacing;
            if (gb - ga).abs() < 1e-300 {
                continue;
            }
            let (lo, hi) = (ga.min(gb), ga.max(gb));
            let mut j = lo.floor() + 1.0;
            while j < hi {
                let t = (j - ga) / (gb - ga);
                if t > 1e-14 && t < 1.0 - 1e-14 {
                    cuts.push(t);
                }
                j += 1.0;
            }
        }
        cuts.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
        let gl = gauss_legendre_unit(opts.line_points);
        for win in cuts.windows(2) {
            let (t0, t1) = (win[0], win[1]);
            for &(s, w) in &gl {
                let t = t0 + s * (t1 - t0);
                let p = lerp(&a, &b, t);
                out.push(QPoint { bary: [1.0 - t, t, 0.0], w: w * (t1 - t0) * measure, rho: spec.eval(&p[..2]) });
            }
        }
        return;
    }
    // triangles: start from the facet, optionally subdivide, then cut along jump planes
    let mut polys: Vec<Vec<[f64; 3]>> = Vec::new();
    if spec.needs_subdivision() && opts.subdivide {
        let m = pieces_per_facet(3, mesh.facet_diameter(f), eps);
        let mf = m as f64;
        let b = |i: usize, j: usize| [1.0 - (i + j) as f64 / mf, i as f64 / mf, j as f64 / mf];
        for i in 0..m {
            for j in 0..m - i {
                polys.push(vec![b(i, j), b(i + 1, j), b(i, j + 1)]);
                if i + j + 2 <= m {
                    polys.push(vec![b(i + 1, j), b(i + 1, j + 1), b(i, j + 1)]);
                }
            }
        }
    } else {
        polys.push(vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }
    let (xa, xb, xc) = (x(0), x(1), x(2));
    let phys = |bc: &[f64; 3]| -> [f64; 3] {
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = bc[0] * xa[k] + bc[1] * xb[k] + bc[2] * xc[k];
        }
        p
    };
    for (n, spacing) in &planes {
        let g = |bc: &[f64; 3]| dot(n, &phys(bc)) / spacing;
        let mut next = Vec::with_capacity(polys.len());
        for poly in polys {
            let vals: Vec<f64> = poly.iter().map(g).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut rest = poly;
            let mut j = lo.floor() + 1.0;
            while j < hi {
                let (below, above) = split_polygon(&rest, |bc| g(bc) - j);
                if below.len() >= 3 {
                    next.push(below);
                }
                rest = above;
                j += 1.0;
            }
            if rest.len() >= 3 {
                next.push(rest);
            }
        }
        polys = next;
    }
    let rule = triangle_rule(opts.tri_points);
    for poly in &polys {
        for k in 1..poly.len() - 1 {
            let (p0, p1, p2) = (poly[0], poly[k], poly[k + 1]);
            // area fraction of the sub-triangle in barycentric coordinates
            let frac = ((p1[1] - p0[1]) * (p2[2] - p0[2]) - (p2[1] - p0[1]) * (p1[2] - p0[2])).abs();
            if frac < 1e-300 {
                continue;
            }
            for (bc, w) in &rule {
                let mut q = [0.0; 3];
                for i in 0..3 {
                    q[i] = bc[0] * p0[i] + bc[1] * p1[i] + bc[2] * p2[i];
                }
                let xp = phys(&q);
                out.push(QPoint { bary: q, w: w * frac * measure, rho: spec.eval(&xp) });
            }
        }
    }
}

/// Splits a convex polygon into the parts where `level < 0` and `level >= 0`.
fn split_polygon<F: Fn(&[f64; 3]) -> f64>(poly: &[[f64; 3]], level: F) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let mut below = Vec::new();
    let mut above = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let (lp, lq) = (level(&p), level(&q));
        if lp < 0.0 {
            below.push(p);
        } else {
            above.push(p);
        }
        if (lp < 0.0) != (lq < 0.0) {
            let t = lp / (lp - lq);
            let r = lerp(&p, &q, t);
            below.push(r);
            above.push(r);
        }
    }
    (below, above)
}

fn lerp(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Stored boundary rule for every boundary facet of a mesh.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    facet_ptr: Vec<usize>,
    points: Vec<QPoint>,
    epsilon: f64,
}

impl BoundaryQuadrature {
    pub fn new(mesh: &Mesh, spec: &WeightSpec, opts: &QuadOptions) -> Result<Self> {
        Self::with_exec(mesh, spec, opts, Exec::Parallel)
    }

    pub fn with_exec(mesh: &Mesh, spec: &WeightSpec, opts: &QuadOptions, exec: Exec) -> Result<Self> {
        check_resolution(mesh, spec, opts)?;
        let per_facet = par::map_range(exec, mesh.n_boundary_facets(), |f| {
            let mut pts = Vec::new();
            facet_points(mesh, f, spec, opts, &mut pts);
            pts
        });
        let mut facet_ptr = Vec::with_capacity(per_facet.len() + 1);
        facet_ptr.push(0);
        let total: usize = per_facet.iter().map(Vec::len).sum();
        let mut points = Vec::with_capacity(total);
        for pts in per_facet {
            points.extend(pts);
            facet_ptr.push(points.len());
        }
        Ok(BoundaryQuadrature { facet_ptr, points, epsilon: spec.epsilon() })
    }

    pub fn facet(&self, f: usize) -> &[QPoint] {
        &self.points[self.facet_ptr[f]..self.facet_ptr[f + 1]]
    }

    pub fn n_facets(&self) -> usize {
        self.facet_ptr.len() - 1
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// ∫_{∂Ω} g(ρ_ε, x-bary) over all facets, summed in facet order.
    pub fn integrate<F: Fn(usize, &QPoint) -> f64>(&self, g: F) -> f64 {
        let mut total = 0.0;
        for f in 0..self.n_facets() {
            let mut s = 0.0;
            for q in self.facet(f) {
                s += q.w * g(f, q);
            }
            total += s;
        }
        total
    }
}
