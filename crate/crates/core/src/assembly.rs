//! Discrete forms: stiffness-plus-mass operator, weighted boundary mass and
//! the p-energy functionals.

use crate::mesh::Mesh;
use crate::par::{self, Exec};
use crate::quadrature::{self, BoundaryQuadrature, QPoint, QuadOptions};
use crate::space::FeSpace;
use crate::sparse::{Definiteness, SparseSymMatrix};
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Cells are processed in chunks of this size: local matrices of one chunk are
/// computed in parallel, then added to the global matrix in cell order.
const CHUNK: usize = 1 << 15;

/// Barycentric gradients (rows `0..=dim`) and volume of cell `c`.
pub fn cell_gradients(mesh: &Mesh, c: usize) -> Result<([[f64; 3]; 4], f64)> {
    let dim = mesh.dim();
    let cell = mesh.cell(c);
    let x0 = mesh.vertex(cell[0]);
    let mut j = [[0.0f64; 3]; 3];
    for k in 0..dim {
        let xk = mesh.vertex(cell[k + 1]);
        for i in 0..dim {
            j[i][k] = xk[i] - x0[i];
        }
    }
    let mut g = [[0.0f64; 3]; 4];
    let vol;
    if dim == 2 {
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return Err(Error::AssemblyFailure { cell: c, detail: format!("non-positive volume {det}") });
        }
        // rows of J⁻¹
        g[1] = [j[1][1] / det, -j[0][1] / det, 0.0];
        g[2] = [-j[1][0] / det, j[0][0] / det, 0.0];
        vol = 0.5 * det;
    } else {
        let cof = |a: usize, b: usize, c: usize, d: usize| j[a][b] * j[c][d] - j[a][d] * j[c][b];
        let det = j[0][0] * cof(1, 1, 2, 2) - j[0][1] * cof(1, 0, 2, 2) + j[0][2] * cof(1, 0, 2, 1);
        if !(det > 0.0) {
            return Err(Error::AssemblyFailure { cell: c, detail: format!("non-positive volume {det}") });
        }
        // inverse via the adjugate
        let inv = [
            [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
            [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
            [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
        ];
        for k in 0..3 {
            g[k + 1] = [inv[k][0] / det, inv[k][1] / det, inv[k][2] / det];
        }
        vol = det / 6.0;
    }
    for i in 0..3 {
        g[0][i] = -(1..=dim).map(|k| g[k][i]).sum::<f64>();
    }
    Ok((g, vol))
}

/// Lower-triangular sparsity pattern of the dof coupling through `cells`.
fn pattern(n: usize, cells: &[usize], dofs_of: impl Fn(usize) -> Vec<usize>) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &c in cells {
        let d = dofs_of(c);
        for &a in &d {
            for &b in &d {
                if b <= a {
                    rows[a].push(b);
                }
            }
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for r in rows.iter_mut() {
        r.sort_unstable();
        r.dedup();
        col_idx.extend_from_slice(r);
        row_ptr.push(col_idx.len());
    }
    (row_ptr, col_idx)
}

/// A = stiffness + mass on the full mesh.
pub fn assemble_interior(mesh: &Mesh) -> Result<SparseSymMatrix> {
    assemble_operator(&FeSpace::full(mesh), 1.0, 1.0, Exec::Parallel)
}

/// `stiff·K + mass·M` on the dofs of `space`.
pub fn assemble_operator(space: &FeSpace, stiff: f64, mass: f64, exec: Exec) -> Result<SparseSymMatrix> {
    let mesh = space.mesh();
    let dim = mesh.dim();
    let nl = dim + 1;
    let dofs_of = |c: usize| mesh.cell(c).iter().filter_map(|&v| space.dof(v)).collect::<Vec<_>>();
    let (row_ptr, col_idx) = pattern(space.n_dofs(), space.cells(), dofs_of);
    let definiteness = if mass > 0.0 { Definiteness::Spd } else { Definiteness::Spsd };
    let mut a = SparseSymMatrix::from_pattern(space.n_dofs(), row_ptr, col_idx, definiteness);
    let mass_scale = 1.0 / ((nl * (nl + 1)) as f64);
    for chunk in space.cells().chunks(CHUNK) {
        let locals = par::map_slice(exec, chunk, |&c| -> Result<[f64; 16]> {
            let (g, vol) = cell_gradients(mesh, c)?;
            let mut k = [0.0; 16];
            for i in 0..nl {
                for j in 0..=i {
                    let gij: f64 = (0..dim).map(|t| g[i][t] * g[j][t]).sum();
                    let m = if i == j { 2.0 } else { 1.0 } * mass_scale;
                    k[i * 4 + j] = vol * (stiff * gij + mass * m);
                }
            }
            Ok(k)
        });
        for (&c, local) in chunk.iter().zip(locals) {
            let local = local?;
            let cell = mesh.cell(c);
            for i in 0..nl {
                let Some(di) = space.dof(cell[i]) else { continue };
                for j in 0..=i {
                    let Some(dj) = space.dof(cell[j]) else { continue };
                    let slot = a.entry_index(di, dj).expect("pattern covers cell couplings");
                    a.values_mut()[slot] += local[i * 4 + j];
                }
            }
        }
    }
    Ok(a)
}

/// Weighted boundary mass B_ρ on all vertices of the mesh.
pub fn assemble_boundary_mass(mesh: &Mesh, spec: &WeightSpec) -> Result<SparseSymMatrix> {
    let space = FeSpace::full(mesh);
    let mb = boundary_mass_block(&space, spec, &QuadOptions::default(), Exec::Parallel)?;
    let bd = space.boundary_dofs();
    let mut trip = Vec::with_capacity(mb.nnz_lower());
    for r in 0..mb.order() {
        for (c, v) in mb.row(r) {
            trip.push((bd[r], bd[c], v));
        }
    }
    Ok(SparseSymMatrix::from_triplets(space.n_dofs(), &trip, Definiteness::Spsd))
}

/// Boundary mass restricted to the boundary dofs of `space`, indexed by
/// position in [`FeSpace::boundary_dofs`].
pub fn boundary_mass_block(space: &FeSpace, spec: &WeightSpec, opts: &QuadOptions, exec: Exec) -> Result<SparseSymMatrix> {
    let mesh = space.mesh();
    quadrature::check_resolution(mesh, spec, opts)?;
    boundary_mass_from(space, exec, |f, pts| quadrature::facet_points(mesh, f, spec, opts, pts))
}

/// Boundary mass from a stored boundary rule.
pub fn boundary_mass_block_from_quadrature(space: &FeSpace, quad: &BoundaryQuadrature, exec: Exec) -> Result<SparseSymMatrix> {
    boundary_mass_from(space, exec, |f, pts| pts.extend_from_slice(quad.facet(f)))
}

fn boundary_mass_from<G>(space: &FeSpace, exec: Exec, points: G) -> Result<SparseSymMatrix>
where
    G: Fn(usize, &mut Vec<QPoint>) + Sync + Send,
{
    let mesh = space.mesh();
    let dim = mesh.dim();
    let pos = space.boundary_position();
    let bdofs = |f: usize| mesh.facet(f).iter().filter_map(|&v| space.dof(v)).map(|d| pos[d]).collect::<Vec<_>>();
    let nb = space.boundary_dofs().len();
    let (row_ptr, col_idx) = pattern(nb, space.facets(), bdofs);
    let mut m = SparseSymMatrix::from_pattern(nb, row_ptr, col_idx, Definiteness::Spd);
    for chunk in space.facets().chunks(CHUNK) {
        let locals = par::map_slice(exec, chunk, |&f| {
            let mut pts = Vec::new();
            points(f, &mut pts);
            let mut k = [0.0; 9];
            for q in &pts {
                for i in 0..dim {
                    for j in 0..=i {
                        k[i * 3 + j] += q.w * q.rho * q.bary[i] * q.bary[j];
                    }
                }
            }
            k
        });
        for (&f, local) in chunk.iter().zip(locals) {
            let verts = mesh.facet(f);
            for i in 0..dim {
                let Some(di) = space.dof(verts[i]) else { continue };
                for j in 0..=i {
                    let Some(dj) = space.dof(verts[j]) else { continue };
                    let slot = m.entry_index(pos[di], pos[dj]).expect("pattern covers facet couplings");
                    m.values_mut()[slot] += local[i * 3 + j];
                }
            }
        }
    }
    Ok(m)
}

/// ∫_{∂Ω} g(ρ_ε) φ_i dH for every dof `i` of the full space.
pub fn boundary_load<F>(space: &FeSpace, spec: &WeightSpec, opts: &QuadOptions, g: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let mesh = space.mesh();
    quadrature::check_resolution(mesh, spec, opts)?;
    let dim = mesh.dim();
    let mut load = vec![0.0; space.n_dofs()];
    for chunk in space.facets().chunks(CHUNK) {
        let locals = par::map_slice(Exec::Parallel, chunk, |&f| {
            let mut pts = Vec::new();
            quadrature::facet_points(mesh, f, spec, opts, &mut pts);
            let mut l = [0.0; 3];
            for q in &pts {
                let v = q.w * g(q.rho);
                for i in 0..dim {
                    l[i] += v * q.bary[i];
                }
            }
            l
        });
        for (&f, l) in chunk.iter().zip(locals) {
            for (i, &v) in mesh.facet(f).iter().enumerate() {
                if let Some(d) = space.dof(v) {
                    load[d] += l[i];
                }
            }
        }
    }
    Ok(load)
}

/// ∫_Ω φ_i dx for every dof.
pub fn mass_row_sums(space: &FeSpace) -> Vec<f64> {
    let mesh = space.mesh();
    let nl = mesh.dim() + 1;
    let mut out = vec![0.0; space.n_dofs()];
    for &c in space.cells() {
        let share = mesh.cell_volume(c) / nl as f64;
        for &v in mesh.cell(c) {
            if let Some(d) = space.dof(v) {
                out[d] += share;
            }
        }
    }
    out
}

/// The p-energy functionals
/// `E(u) = ∫_Ω |∇u|ᵖ + |u|ᵖ` and `N(u) = ∫_{∂Ω} ρ_ε |u|ᵖ`.
#[derive(Debug, Clone)]
pub struct PFunctional<'a> {
    p: f64,
    space: &'a FeSpace<'a>,
    quad: &'a BoundaryQuadrature,
    grads: Vec<[[f64; 3]; 4]>,
    vols: Vec<f64>,
    exec: Exec,
}

/// Smoothing floor inside |∇u|^{p−2}.
pub const GRAD_FLOOR: f64 = 1e-12;

impl<'a> PFunctional<'a> {
    pub fn new(space: &'a FeSpace<'a>, quad: &'a BoundaryQuadrature, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
        }
        let mesh = space.mesh();
        if quad.n_facets() != mesh.n_boundary_facets() {
            return Err(Error::InvalidArgument("boundary rule built for a different mesh".into()));
        }
        let geo: Vec<([[f64; 3]; 4], f64)> = space.cells().iter().map(|&c| cell_gradients(mesh, c)).collect::<Result<_>>()?;
        let (grads, vols) = geo.into_iter().unzip();
        Ok(PFunctional { p, space, quad, grads, vols, exec: Exec::Parallel })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn space(&self) -> &'a FeSpace<'a> {
        self.space
    }

    pub fn quadrature(&self) -> &'a BoundaryQuadrature {
        self.quad
    }

    fn local_values(&self, u: &[f64], c: usize) -> [f64; 4] {
        let mut x = [0.0; 4];
        for (k, &v) in self.space.mesh().cell(c).iter().enumerate() {
            x[k] = self.space.value(u, v);
        }
        x
    }

    /// Energy of one active cell (by position) and optionally its gradient.
    fn cell_term(&self, u: &[f64], k: usize, grad: Option<&mut [f64; 4]>) -> f64 {
        let x = self.local_values(u, self.space.cells()[k]);
        self.cell_term_local(&x, k, grad)
    }

    fn cell_term_local(&self, x: &[f64; 4], k: usize, grad: Option<&mut [f64; 4]>) -> f64 {
        let p = self.p;
        let dim = self.space.mesh().dim();
        let nl = dim + 1;
        let g = &self.grads[k];
        let vol = self.vols[k];
        let mut du = [0.0; 3];
        for a in 0..nl {
            for t in 0..dim {
                du[t] += x[a] * g[a][t];
            }
        }
        let norm = (du[0] * du[0] + du[1] * du[1] + du[2] * du[2]).sqrt();
        let mut e = vol * norm.powf(p);
        let rule = quadrature::cell_rule(dim);
        let mut uq = [0.0; 4];
        for (qi, (bc, w)) in rule.iter().enumerate() {
            let val: f64 = (0..nl).map(|a| bc[a] * x[a]).sum();
            uq[qi] = val;
            e += vol * w * val.abs().powf(p);
        }
        if let Some(out) = grad {
            *out = [0.0; 4];
            if norm > 0.0 {
                let s = p * vol * norm.max(GRAD_FLOOR).powf(p - 2.0);
                for a in 0..nl {
                    out[a] += s * (0..dim).map(|t| du[t] * g[a][t]).sum::<f64>();
                }
            }
            for (qi, (bc, w)) in rule.iter().enumerate() {
                let val = uq[qi];
                let s = p * vol * w * val.signum() * val.abs().powf(p - 1.0);
                for a in 0..nl {
                    out[a] += s * bc[a];
                }
            }
        }
        e
    }

    /// E(v) − E(u), summed as per-cell differences so that tiny changes are
    /// not lost to cancellation.
    pub fn energy_difference(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.space.cells().len();
        let mut total = 0.0;
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let parts = par::map_range(self.exec, end - start, |i| {
                let k = start + i;
                let c = self.space.cells()[k];
                let xu = self.local_values(u, c);
                let xv = self.local_values(v, c);
                if xu == xv {
                    return 0.0;
                }
                self.cell_term_local(&xv, k, None) - self.cell_term_local(&xu, k, None)
            });
            total += parts.iter().sum::<f64>();
        }
        total
    }

    /// N(v) − N(u), summed as per-facet differences.
    pub fn boundary_norm_difference(&self, u: &[f64], v: &[f64]) -> f64 {
        let parts = par::map_slice(self.exec, self.space.facets(), |&f| self.facet_term(v, f, None) - self.facet_term(u, f, None));
        parts.iter().sum()
    }

    /// E(u) = Σ_cells |∇u|ᵖ·vol + ∫|u|ᵖ.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let n = self.space.cells().len();
        let mut total = 0.0;
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let parts = par::map_range(self.exec, end - start, |i| self.cell_term(u, start + i, None));
            total += parts.iter().sum::<f64>();
        }
        total
    }

    /// E(u) and ∇E(u).
    pub fn energy_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let mesh = self.space.mesh();
        let n = self.space.cells().len();
        let mut total = 0.0;
        let mut grad = vec![0.0; self.space.n_dofs()];
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let parts = par::map_range(self.exec, end - start, |i| {
                let mut g = [0.0; 4];
                let e = self.cell_term(u, start + i, Some(&mut g));
                (e, g)
            });
            for (i, (e, g)) in parts.into_iter().enumerate() {
                total += e;
                for (a, &v) in mesh.cell(self.space.cells()[start + i]).iter().enumerate() {
                    if let Some(d) = self.space.dof(v) {
                        grad[d] += g[a];
                    }
                }
            }
        }
        (total, grad)
    }

    pub fn energy_gradient(&self, u: &[f64]) -> Vec<f64> {
        self.energy_and_gradient(u).1
    }

    fn facet_term(&self, u: &[f64], f: usize, grad: Option<&mut [f64; 3]>) -> f64 {
        let p = self.p;
        let verts = self.space.mesh().facet(f);
        let dim = verts.len();
        let mut x = [0.0; 3];
        for (k, &v) in verts.iter().enumerate() {
            x[k] = self.space.value(u, v);
        }
        let mut n = 0.0;
        let mut g = [0.0; 3];
        let want = grad.is_some();
        for q in self.quad.facet(f) {
            let val: f64 = (0..dim).map(|a| q.bary[a] * x[a]).sum();
            let a = val.abs();
            n += q.w * q.rho * a.powf(p);
            if want {
                let s = p * q.w * q.rho * val.signum() * a.powf(p - 1.0);
                for k in 0..dim {
                    g[k] += s * q.bary[k];
                }
            }
        }
        if let Some(out) = grad {
            *out = g;
        }
        n
    }

    /// N(u) = ∫_{∂Ω} ρ_ε |u|ᵖ over the active boundary facets.
    pub fn boundary_norm(&self, u: &[f64]) -> f64 {
        let facets = self.space.facets();
        let parts = par::map_slice(self.exec, facets, |&f| self.facet_term(u, f, None));
        parts.iter().sum()
    }

    /// N(u) and ∇N(u).
    pub fn boundary_norm_and_gradient(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let mesh = self.space.mesh();
        let facets = self.space.facets();
        let parts = par::map_slice(self.exec, facets, |&f| {
            let mut g = [0.0; 3];
            let n = self.facet_term(u, f, Some(&mut g));
            (n, g)
        });
        let mut total = 0.0;
        let mut grad = vec![0.0; self.space.n_dofs()];
        for (&f, (n, g)) in facets.iter().zip(parts) {
            total += n;
            for (k, &v) in mesh.facet(f).iter().enumerate() {
                if let Some(d) = self.space.dof(v) {
                    grad[d] += g[k];
                }
            }
        }
        (total, grad)
    }

    pub fn boundary_norm_gradient(&self, u: &[f64]) -> Vec<f64> {
        self.boundary_norm_and_gradient(u).1
    }

    /// ∫_{∂Ω} (ρ₀ − ρ_ε)|u|ᵖ over the active facets.
    pub fn oscillation(&self, u: &[f64], rho0: f64) -> f64 {
        let p = self.p;
        let mut total = 0.0;
        for &f in self.space.facets() {
            let verts = self.space.mesh().facet(f);
            let x: Vec<f64> = verts.iter().map(|&v| self.space.value(u, v)).collect();
            let mut s = 0.0;
            for q in self.quad.facet(f) {
                let val: f64 = x.iter().enumerate().map(|(a, xa)| q.bary[a] * xa).sum();
                s += q.w * (rho0 - q.rho) * val.abs().powf(p);
            }
            total += s;
        }
        total
    }

    /// Rayleigh quotient E(u)/N(u).
    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        self.energy(u) / self.boundary_norm(u)
    }
}

/// Free-standing energy (full mesh).
pub fn p_energy(f: &PFunctional, u: &[f64]) -> f64 {
    f.energy(u)
}

pub fn p_energy_gradient(f: &PFunctional, u: &[f64]) -> Vec<f64> {
    f.energy_gradient(u)
}

pub fn p_boundary_norm(f: &PFunctional, u: &[f64]) -> f64 {
    f.boundary_norm(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cube_mesh, build_square_mesh};

    #[test]
    fn reference_triangle_constant_function() {
        let m = Mesh::from_parts(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0, 1, 2]).unwrap();
        let a = assemble_interior(&m).unwrap();
        assert!((a.quad_form(&[1.0; 3]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_function_energy_is_exact() {
        let m = build_square_mesh(6).unwrap();
        let a = assemble_interior(&m).unwrap();
        let u: Vec<f64> = (0..m.n_vertices()).map(|v| m.vertex(v)[0]).collect();
        assert!((a.quad_form(&u) - 4.0 / 3.0).abs() < 1e-12);
        let m3 = build_cube_mesh(3).unwrap();
        let a3 = assemble_interior(&m3).unwrap();
        let u3: Vec<f64> = (0..m3.n_vertices()).map(|v| m3.vertex(v)[2]).collect();
        assert!((a3.quad_form(&u3) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let m = build_cube_mesh(2).unwrap();
        let k = assemble_operator(&FeSpace::full(&m), 1.0, 0.0, Exec::Sequential).unwrap();
        let r = k.matvec(&vec![1.0; m.n_vertices()]);
        assert!(r.iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn sequential_and_parallel_assembly_agree_bitwise() {
        let m = build_square_mesh(12).unwrap();
        let s = FeSpace::full(&m);
        let a = assemble_operator(&s, 1.0, 1.0, Exec::Sequential).unwrap();
        let b = assemble_operator(&s, 1.0, 1.0, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
