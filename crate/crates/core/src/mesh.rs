//! Simplicial meshes of the unit square, unit disk and unit cube.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Built-in convex domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Square,
    Disk,
    Cube,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::Square | DomainKind::Disk => 2,
            DomainKind::Cube => 3,
        }
    }

    /// Exact |Ω| of the analytic domain.
    pub fn volume(self) -> f64 {
        match self {
            DomainKind::Square | DomainKind::Cube => 1.0,
            DomainKind::Disk => std::f64::consts::PI,
        }
    }

    /// Exact |∂Ω| of the analytic domain.
    pub fn perimeter(self) -> f64 {
        match self {
            DomainKind::Square => 4.0,
            DomainKind::Cube => 6.0,
            DomainKind::Disk => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Square => "square",
            DomainKind::Disk => "disk",
            DomainKind::Cube => "cube",
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(DomainKind::Square),
            "disk" => Ok(DomainKind::Disk),
            "cube" => Ok(DomainKind::Cube),
            other => Err(Error::InvalidArgument(format!("unknown domain `{other}`"))),
        }
    }
}

impl std::fmt::Display for DomainKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Maximum disk refinement level accepted by [`build_disk_mesh`].
pub const MAX_DISK_LEVEL: usize = 9;

/// Strength of the radial grading applied by the disk refiner.
const DISK_STRETCH: f64 = 0.2;

/// An immutable simplicial mesh with its boundary facets.
///
/// Coordinates, cells and facets are stored flat: vertex `i` occupies
/// `coords[i*dim..(i+1)*dim]`, cell `c` occupies `cells[c*(dim+1)..]` and facet
/// `f` occupies `facets[f*dim..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_cell: Vec<usize>,
    h_max: f64,
    boundary_h_max: f64,
    domain: Option<DomainKind>,
}

impl Mesh {
    /// Builds a mesh from raw vertex and cell arrays. Cells are reoriented to
    /// positive volume and the boundary facets are extracted.
    pub fn from_parts(dim: usize, coords: Vec<f64>, mut cells: Vec<usize>) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("unsupported dimension {dim}")));
        }
        if !coords.len().is_multiple_of(dim) || !cells.len().is_multiple_of(dim + 1) {
            return Err(Error::InvalidArgument("ragged vertex or cell array".into()));
        }
        let nv = coords.len() / dim;
        if let Some(&bad) = cells.iter().find(|&&v| v >= nv) {
            return Err(Error::InvalidArgument(format!("cell references missing vertex {bad}")));
        }
        let nc = cells.len() / (dim + 1);
        for c in 0..nc {
            let cell = &mut cells[c * (dim + 1)..(c + 1) * (dim + 1)];
            let det = signed_det(dim, &coords, cell);
            let scale = cell_diameter(dim, &coords, cell).powi(dim as i32);
            if det.abs() <= 1e-14 * scale || !det.is_finite() {
                return Err(Error::AssemblyFailure { cell: c, detail: "degenerate cell".into() });
            }
            if det < 0.0 {
                cell.swap(dim - 1, dim);
            }
        }
        let (facets, facet_cell) = extract_boundary(dim, &coords, &cells)?;
        let mut mesh = Mesh { dim, coords, cells, facets, facet_cell, h_max: 0.0, boundary_h_max: 0.0, domain: None };
        mesh.h_max = (0..nc).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
        mesh.boundary_h_max = (0..mesh.n_boundary_facets()).map(|f| mesh.facet_diameter(f)).fold(0.0, f64::max);
        Ok(mesh)
    }

    fn with_domain(mut self, domain: DomainKind) -> Mesh {
        self.domain = Some(domain);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<DomainKind> {
        self.domain
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.facets.len() / self.dim
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c * (self.dim + 1)..(c + 1) * (self.dim + 1)]
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    /// Cell owning boundary facet `f`.
    pub fn facet_cell(&self, f: usize) -> usize {
        self.facet_cell[f]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn boundary_h_max(&self) -> f64 {
        self.boundary_h_max
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        signed_det(self.dim, &self.coords, self.cell(c)) / factorial(self.dim)
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        cell_diameter(self.dim, &self.coords, self.cell(c))
    }

    pub fn facet_diameter(&self, f: usize) -> f64 {
        cell_diameter(self.dim, &self.coords, self.facet(f))
    }

    /// Facet area normal: unit outward normal scaled by the facet measure.
    pub fn facet_area_normal(&self, f: usize) -> [f64; 3] {
        let v = self.facet(f);
        let a = self.vertex(v[0]);
        let b = self.vertex(v[1]);
        if self.dim == 2 {
            // outward for counter-clockwise traversal
            [b[1] - a[1], -(b[0] - a[0]), 0.0]
        } else {
            let c = self.vertex(v[2]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let w = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = cross(u, w);
            [0.5 * n[0], 0.5 * n[1], 0.5 * n[2]]
        }
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        let n = self.facet_area_normal(f);
        (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    pub fn facet_unit_normal(&self, f: usize) -> [f64; 3] {
        let n = self.facet_area_normal(f);
        let m = self.facet_measure(f);
        [n[0] / m, n[1] / m, n[2] / m]
    }

    pub fn volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn boundary_measure(&self) -> f64 {
        (0..self.n_boundary_facets()).map(|f| self.facet_measure(f)).sum()
    }

    /// Sorted, deduplicated boundary vertex indices.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v = self.facets.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Face-sharing neighbours of each cell, in increasing index order.
    pub fn cell_neighbors(&self) -> Vec<Vec<usize>> {
        let d = self.dim;
        let mut owner: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut nbrs = vec![Vec::new(); self.n_cells()];
        for c in 0..self.n_cells() {
            for skip in 0..=d {
                let face = sorted_face(self.cell(c), skip);
                if let Some(o) = owner.remove(&face) {
                    nbrs[c].push(o);
                    nbrs[o].push(c);
                } else {
                    owner.insert(face, c);
                }
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
        }
        nbrs
    }

    /// Cells sharing a vertex with each vertex.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for c in 0..self.n_cells() {
            for &v in self.cell(c) {
                out[v].push(c);
            }
        }
        out
    }

    /// Cell barycentre.
    pub fn cell_centroid(&self, c: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let cell = self.cell(c);
        for &v in cell {
            for (k, xk) in self.vertex(v).iter().enumerate() {
                x[k] += xk;
            }
        }
        let w = 1.0 / cell.len() as f64;
        [x[0] * w, x[1] * w, x[2] * w]
    }

    /// Serialises the mesh to the plain-text exchange format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {}", self.dim);
        let _ = writeln!(s, "vertices {}", self.n_vertices());
        for i in 0..self.n_vertices() {
            let line: Vec<String> = self.vertex(i).iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        let _ = writeln!(s, "cells {}", self.n_cells());
        for c in 0..self.n_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        let _ = writeln!(s, "boundary_facets {}", self.n_boundary_facets());
        for f in 0..self.n_boundary_facets() {
            let line: Vec<String> = self.facet(f).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    /// Parses the plain-text exchange format. Boundary facets are re-derived
    /// from the cells and checked against the listed ones.
    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut header = |name: &str| -> Result<usize> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing `{name}`")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Parse(format!("expected `{name}`, found `{line}`")));
            }
            it.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad `{name}` header")))
        };
        let dim = header("dim")?;
        let nv = header("vertices")?;
        let mut rest: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).skip(2).collect();
        let take = |rest: &mut Vec<&str>, n: usize| -> Result<Vec<String>> {
            if rest.len() < n {
                return Err(Error::Parse("truncated mesh file".into()));
            }
            Ok(rest.drain(..n).map(str::to_string).collect())
        };
        let mut coords = Vec::with_capacity(nv * dim);
        for line in take(&mut rest, nv)? {
            let vals: Vec<f64> =
                line.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| Error::Parse(e.to_string()))).collect::<Result<_>>()?;
            if vals.len() != dim {
                return Err(Error::Parse(format!("vertex line `{line}`")));
            }
            coords.extend(vals);
        }
        let parse_block = |rest: &mut Vec<&str>, name: &str, width: usize| -> Result<Vec<usize>> {
            let head = take(rest, 1)?.remove(0);
            let mut it = head.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Parse(format!("expected `{name}`, found `{head}`")));
            }
            let n: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse(format!("bad `{name}` header")))?;
            let mut out = Vec::with_capacity(n * width);
            for line in take(rest, n)? {
                let vals: Vec<usize> =
                    line.split_whitespace().map(|t| t.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))).collect::<Result<_>>()?;
                if vals.len() != width {
                    return Err(Error::Parse(format!("{name} line `{line}`")));
                }
                out.extend(vals);
            }
            Ok(out)
        };
        let cells = parse_block(&mut rest, "cells", dim + 1)?;
        let facets = parse_block(&mut rest, "boundary_facets", dim)?;
        let mesh = Mesh::from_parts(dim, coords, cells)?;
        if mesh.facets != facets {
            return Err(Error::Parse("listed boundary facets do not match the cells".into()));
        }
        Ok(mesh)
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_text(path: &Path) -> Result<Mesh> {
        Mesh::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Crossed-triangle mesh of [0,1]²: every grid square is split into four
/// triangles about its centroid.
pub fn build_square_mesh(divisions: usize) -> Result<Mesh> {
    if divisions == 0 {
        return Err(Error::InvalidArgument("divisions must be at least 1".into()));
    }
    let d = divisions;
    let h = 1.0 / d as f64;
    let corner = |i: usize, j: usize| j * (d + 1) + i;
    let centre = |i: usize, j: usize| (d + 1) * (d + 1) + j * d + i;
    let mut coords = Vec::with_capacity(2 * ((d + 1) * (d + 1) + d * d));
    for j in 0..=d {
        for i in 0..=d {
            coords.extend([grid(i, d), grid(j, d)]);
        }
    }
    for j in 0..d {
        for i in 0..d {
            coords.extend([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
        }
    }
    let mut cells = Vec::with_capacity(12 * d * d);
    for j in 0..d {
        for i in 0..d {
            let (a, b, c, e) = (corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1));
            let m = centre(i, j);
            cells.extend([a, b, m, b, c, m, c, e, m, e, a, m]);
        }
    }
    Ok(Mesh::from_parts(2, coords, cells)?.with_domain(DomainKind::Square))
}

/// Kuhn mesh of [0,1]³: every grid cube is split into six tetrahedra sharing
/// the main diagonal.
pub fn build_cube_mesh(divisions: usize) -> Result<Mesh> {
    if divisions == 0 {
        return Err(Error::InvalidArgument("divisions must be at least 1".into()));
    }
    let d = divisions;
    let idx = |i: usize, j: usize, k: usize| (k * (d + 1) + j) * (d + 1) + i;
    let mut coords = Vec::with_capacity(3 * (d + 1).pow(3));
    for k in 0..=d {
        for j in 0..=d {
            for i in 0..=d {
                coords.extend([grid(i, d), grid(j, d), grid(k, d)]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(24 * d * d * d);
    for k in 0..d {
        for j in 0..d {
            for i in 0..d {
                for perm in PERMS {
                    let mut p = [i, j, k];
                    let mut tet = [idx(p[0], p[1], p[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        p[axis] += 1;
                        tet[step + 1] = idx(p[0], p[1], p[2]);
                    }
                    cells.extend(tet);
                }
            }
        }
    }
    Ok(Mesh::from_parts(3, coords, cells)?.with_domain(DomainKind::Cube))
}

/// Mesh of the unit disk obtained by red refinement of a hexagon fan.
///
/// Refinement happens in per-sector reference coordinates `(t, s)` (radial
/// fraction and angular fraction of the 60° sector); vertices are placed at
/// radius `g(t)` and angle `θ_k + s·60°`, so boundary vertices lie exactly on
/// the unit circle and form a regular `6·2^level`-gon. The mild radial grading
/// `g(t) = t(1 + 0.2(1 − t))` keeps the cell diameter shrinking by at least a
/// factor 0.6 per level.
pub fn build_disk_mesh(level: usize) -> Result<Mesh> {
    if level > MAX_DISK_LEVEL {
        return Err(Error::ResourceLimit(format!("disk refinement level {level} exceeds the limit {MAX_DISK_LEVEL}")));
    }
    // reference hexagon: centre plus six unit-circle vertices
    let mut refc: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    for k in 0..6 {
        let th = k as f64 * std::f64::consts::FRAC_PI_3;
        refc.push([th.cos(), th.sin()]);
    }
    let mut tris: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, refc: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let (p, q) = (refc[a], refc[b]);
                refc.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                refc.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut refc);
            let bc = midpoint(b, c, &mut refc);
            let ca = midpoint(c, a, &mut refc);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        tris = next;
    }
    let mut coords = Vec::with_capacity(refc.len() * 2);
    for p in &refc {
        let [x, y] = map_disk_point(*p);
        coords.extend([x, y]);
    }
    let cells: Vec<usize> = tris.iter().flatten().copied().collect();
    Ok(Mesh::from_parts(2, coords, cells)?.with_domain(DomainKind::Disk))
}

/// Maps a point of the reference hexagon to the disk.
fn map_disk_point(p: [f64; 2]) -> [f64; 2] {
    let r_hex = p[0].hypot(p[1]);
    if r_hex == 0.0 {
        return [0.0, 0.0];
    }
    let sector_angle = std::f64::consts::FRAC_PI_3;
    let mut ang = p[1].atan2(p[0]);
    if ang < 0.0 {
        ang += 2.0 * std::f64::consts::PI;
    }
    let k = ((ang / sector_angle).floor() as usize).min(5);
    let th0 = k as f64 * sector_angle;
    let (v1, v2) = ([th0.cos(), th0.sin()], [(th0 + sector_angle).cos(), (th0 + sector_angle).sin()]);
    // p = l1·v1 + l2·v2
    let det = v1[0] * v2[1] - v1[1] * v2[0];
    let l1 = (p[0] * v2[1] - p[1] * v2[0]) / det;
    let l2 = (v1[0] * p[1] - v1[1] * p[0]) / det;
    let t = l1 + l2;
    let s = (l2 / t).clamp(0.0, 1.0);
    let r = t * (1.0 + DISK_STRETCH * (1.0 - t));
    let th = th0 + s * sector_angle;
    if (t - 1.0).abs() < 1e-12 {
        return [th.cos(), th.sin()];
    }
    [r * th.cos(), r * th.sin()]
}

fn grid(i: usize, d: usize) -> f64 {
    if i == d {
        1.0
    } else {
        i as f64 / d as f64
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

fn cross(u: [f64; 3], w: [f64; 3]) -> [f64; 3] {
    [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]]
}

fn signed_det(dim: usize, coords: &[f64], cell: &[usize]) -> f64 {
    let x = |v: usize, k: usize| coords[cell[v] * dim + k];
    if dim == 2 {
        (x(1, 0) - x(0, 0)) * (x(2, 1) - x(0, 1)) - (x(2, 0) - x(0, 0)) * (x(1, 1) - x(0, 1))
    } else {
        let e = |v: usize| [x(v, 0) - x(0, 0), x(v, 1) - x(0, 1), x(v, 2) - x(0, 2)];
        let (a, b, c) = (e(1), e(2), e(3));
        let n = cross(b, c);
        a[0] * n[0] + a[1] * n[1] + a[2] * n[2]
    }
}

fn cell_diameter(dim: usize, coords: &[f64], verts: &[usize]) -> f64 {
    let mut h: f64 = 0.0;
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            let d2: f64 = (0..dim).map(|k| (coords[a * dim + k] - coords[b * dim + k]).powi(2)).sum();
            h = h.max(d2.sqrt());
        }
    }
    h
}

fn sorted_face(cell: &[usize], skip: usize) -> Vec<usize> {
    let mut f: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
    f.sort_unstable();
    f
}

/// Finds faces owned by a single cell and orients them outward.
fn extract_boundary(dim: usize, coords: &[f64], cells: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let nc = cells.len() / (dim + 1);
    let mut count: HashMap<Vec<usize>, u32> = HashMap::with_capacity(nc * (dim + 1));
    for c in 0..nc {
        let cell = &cells[c * (dim + 1)..(c + 1) * (dim + 1)];
        for skip in 0..=dim {
            *count.entry(sorted_face(cell, skip)).or_insert(0) += 1;
        }
    }
    if let Some((face, n)) = count.iter().find(|(_, &n)| n > 2) {
        return Err(Error::InvalidArgument(format!("face {face:?} shared by {n} cells")));
    }
    let mut facets = Vec::new();
    let mut owner = Vec::new();
    for c in 0..nc {
        let cell = &cells[c * (dim + 1)..(c + 1) * (dim + 1)];
        for skip in 0..=dim {
            if count[&sorted_face(cell, skip)] != 1 {
                continue;
            }
            let mut face: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            // with the opposite vertex appended, an outward facet gives a
            // positive simplex in 2D and a negative one in 3D
            let mut probe = face.clone();
            probe.push(cell[skip]);
            let det = signed_det(dim, coords, &probe);
            if (dim == 2 && det < 0.0) || (dim == 3 && det > 0.0) {
                face.swap(0, 1);
            }
            facets.extend(face);
            owner.push(c);
        }
    }
    Ok((facets, owner))
}
