//! P1 finite-element spaces on a mesh or on a union of its cells.

use crate::mesh::Mesh;
use crate::{Error, Result};

const NONE: usize = usize::MAX;

/// Continuous piecewise-linear functions on a set of active cells.
///
/// On the full mesh every vertex is a degree of freedom. On a subdomain
/// (a proper subset of cells) vertices touching an inactive cell carry a
/// homogeneous Dirichlet condition and are not degrees of freedom; only the
/// boundary facets owned by active cells carry the Steklov term.
#[derive(Debug, Clone)]
pub struct FeSpace<'m> {
    mesh: &'m Mesh,
    cells: Vec<usize>,
    facets: Vec<usize>,
    dof_of_vertex: Vec<usize>,
    vertex_of_dof: Vec<usize>,
    boundary_dofs: Vec<usize>,
    interior_dofs: Vec<usize>,
    is_boundary_dof: Vec<bool>,
}

impl<'m> FeSpace<'m> {
    pub fn full(mesh: &'m Mesh) -> FeSpace<'m> {
        let mask = vec![true; mesh.n_cells()];
        FeSpace::subdomain(mesh, &mask).expect("full mesh is a valid subdomain")
    }

    /// Space on the cells flagged in `active`.
    pub fn subdomain(mesh: &'m Mesh, active: &[bool]) -> Result<FeSpace<'m>> {
        if active.len() != mesh.n_cells() {
            return Err(Error::InvalidArgument("cell mask length does not match the mesh".into()));
        }
        let nv = mesh.n_vertices();
        // 0: untouched, 1: active only, 2: touches an inactive cell
        let mut state = vec![0u8; nv];
        for c in 0..mesh.n_cells() {
            for &v in mesh.cell(c) {
                if active[c] {
                    if state[v] == 0 {
                        state[v] = 1;
                    }
                } else {
                    state[v] = 2;
                }
            }
        }
        let cells: Vec<usize> = (0..mesh.n_cells()).filter(|&c| active[c]).collect();
        if cells.is_empty() {
            return Err(Error::InvalidArgument("empty subdomain".into()));
        }
        let mut dof_of_vertex = vec![NONE; nv];
        let mut vertex_of_dof = Vec::new();
        for v in 0..nv {
            if state[v] == 1 {
                dof_of_vertex[v] = vertex_of_dof.len();
                vertex_of_dof.push(v);
            }
        }
        let facets: Vec<usize> = (0..mesh.n_boundary_facets()).filter(|&f| active[mesh.facet_cell(f)]).collect();
        let mut is_boundary_dof = vec![false; vertex_of_dof.len()];
        for &f in &facets {
            for &v in mesh.facet(f) {
                let d = dof_of_vertex[v];
                if d != NONE {
                    is_boundary_dof[d] = true;
                }
            }
        }
        let boundary_dofs = (0..vertex_of_dof.len()).filter(|&d| is_boundary_dof[d]).collect();
        let interior_dofs = (0..vertex_of_dof.len()).filter(|&d| !is_boundary_dof[d]).collect();
        Ok(FeSpace { mesh, cells, facets, dof_of_vertex, vertex_of_dof, boundary_dofs, interior_dofs, is_boundary_dof })
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    /// Active cells in increasing order.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Active boundary facets (mesh facet indices) in increasing order.
    pub fn facets(&self) -> &[usize] {
        &self.facets
    }

    pub fn dof(&self, vertex: usize) -> Option<usize> {
        let d = self.dof_of_vertex[vertex];
        (d != NONE).then_some(d)
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.vertex_of_dof[dof]
    }

    /// Dofs lying on an active boundary facet, increasing.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.is_boundary_dof[dof]
    }

    /// Position of each dof in `boundary_dofs` (or `usize::MAX`).
    pub fn boundary_position(&self) -> Vec<usize> {
        let mut pos = vec![NONE; self.n_dofs()];
        for (k, &d) in self.boundary_dofs.iter().enumerate() {
            pos[d] = k;
        }
        pos
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.vertex_of_dof.iter().map(|&v| f(self.mesh.vertex(v))).collect()
    }

    /// Value of dof vector `u` at `vertex` (zero on Dirichlet vertices).
    #[inline]
    pub fn value(&self, u: &[f64], vertex: usize) -> f64 {
        let d = self.dof_of_vertex[vertex];
        if d == NONE {
            0.0
        } else {
            u[d]
        }
    }

    /// Extends a dof vector to all mesh vertices.
    pub fn to_vertex_values(&self, u: &[f64]) -> Vec<f64> {
        (0..self.mesh.n_vertices()).map(|v| self.value(u, v)).collect()
    }
}
