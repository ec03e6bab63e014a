//! The p = 2 discrete Steklov problem `A u = λ B_ρ u`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly;
use crate::mesh::Mesh;
use crate::par::Exec;
use crate::pencil::{self, KrylovOptions};
use crate::quadrature::QuadOptions;
use crate::space::FeSpace;
use crate::sparse::{self, Cholesky, SparseSymMatrix};
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Eigenvalues within this relative gap form one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

/// An eigenvalue with its coefficient vector and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// One-based index.
    pub k: usize,
    pub lambda: f64,
    /// Dof values, normalised to ∫_{∂Ω} ρ|u|ᵖ = 1.
    pub u: Vec<f64>,
    /// Relative residual of the discrete eigen-equation.
    pub residual: f64,
    pub sup_norm: f64,
    pub w1p_norm: f64,
    /// Index of the cluster of (numerically) equal eigenvalues.
    pub cluster: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// JSON export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub k: usize,
    pub lambda: f64,
    pub residual: f64,
    pub sup_norm: f64,
    pub w1p_norm: f64,
}

impl EigenPair {
    pub fn summary(&self) -> EigenSummary {
        EigenSummary { k: self.k, lambda: self.lambda, residual: self.residual, sup_norm: self.sup_norm, w1p_norm: self.w1p_norm }
    }
}

/// Boundary eigensolver route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    /// Dense for small boundaries, Krylov otherwise.
    #[default]
    Auto,
    /// Schur complement and dense pencil.
    Dense,
    /// Block Krylov iteration on `S⁻¹M_b` using solves with the full `A`.
    Krylov,
}

impl std::str::FromStr for EigenMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(EigenMethod::Auto),
            "dense" | "schur" => Ok(EigenMethod::Dense),
            "krylov" | "lanczos" => Ok(EigenMethod::Krylov),
            other => Err(Error::InvalidArgument(format!("unknown eigen method `{other}`"))),
        }
    }
}

/// Boundary sizes up to which `Auto` picks the dense route.
pub const AUTO_DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub method: EigenMethod,
    pub krylov: KrylovOptions,
    pub quad: QuadOptions,
    pub exec: Exec,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { method: EigenMethod::Auto, krylov: KrylovOptions::default(), quad: QuadOptions::default(), exec: Exec::Parallel }
    }
}

/// S = A_bb − A_bi A_ii⁻¹ A_ib for the given boundary index set.
pub fn schur_reduce(a: &SparseSymMatrix, boundary: &[usize]) -> Result<Mat<f64>> {
    Ok(SchurData::new(a, boundary)?.s)
}

/// Interior factorisation, coupling and Schur complement.
struct SchurData {
    s: Mat<f64>,
    interior: Vec<usize>,
    chol_ii: Option<Cholesky>,
    /// Rows of A_bi: for each boundary position, (interior position, value).
    coupling: Vec<Vec<(usize, f64)>>,
}

impl SchurData {
    fn new(a: &SparseSymMatrix, boundary: &[usize]) -> Result<SchurData> {
        let n = a.order();
        let nb = boundary.len();
        let mut bpos = vec![usize::MAX; n];
        for (k, &b) in boundary.iter().enumerate() {
            if b >= n || bpos[b] != usize::MAX {
                return Err(Error::InvalidArgument("boundary index set must be distinct dofs".into()));
            }
            bpos[b] = k;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| bpos[i] == usize::MAX).collect();
        let mut ipos = vec![usize::MAX; n];
        for (k, &i) in interior.iter().enumerate() {
            ipos[i] = k;
        }
        let mut s = Mat::<f64>::zeros(nb, nb);
        let mut coupling = vec![Vec::new(); nb];
        for r in 0..n {
            for (c, v) in a.row(r) {
                match (bpos[r] != usize::MAX, bpos[c] != usize::MAX) {
                    (true, true) => {
                        s[(bpos[r], bpos[c])] = v;
                        s[(bpos[c], bpos[r])] = v;
                    }
                    (true, false) => coupling[bpos[r]].push((ipos[c], v)),
                    (false, true) => coupling[bpos[c]].push((ipos[r], v)),
                    (false, false) => {}
                }
            }
        }
        if interior.is_empty() {
            return Ok(SchurData { s, interior, chol_ii: None, coupling });
        }
        let a_ii = a.principal_submatrix(&interior);
        let chol = Cholesky::new(&a_ii)?;
        let ni = interior.len();
        const BLOCK: usize = 32;
        let mut checked = false;
        for start in (0..nb).step_by(BLOCK) {
            let cols = BLOCK.min(nb - start);
            let mut x = vec![0.0; ni * cols];
            for j in 0..cols {
                for &(i, v) in &coupling[start + j] {
                    x[j * ni + i] += v;
                }
            }
            let rhs = if checked { Vec::new() } else { x.clone() };
            chol.solve_block_in_place(&mut x, cols);
            if !checked {
                let col = &x[..ni];
                let res: Vec<f64> = a_ii.matvec(col).iter().zip(&rhs[..ni]).map(|(p, q)| p - q).collect();
                let rel = sparse::norm2(&res) / sparse::norm2(&rhs[..ni]).max(f64::MIN_POSITIVE);
                if rel > 1e-12 && sparse::norm2(&rhs[..ni]) > 0.0 {
                    return Err(Error::NumericalFailure(format!("interior solve residual {rel:.2e}")));
                }
                checked = true;
            }
            for j in 0..cols {
                let col = &x[j * ni..(j + 1) * ni];
                for r in 0..nb {
                    let mut acc = 0.0;
                    for &(i, v) in &coupling[r] {
                        acc += v * col[i];
                    }
                    s[(r, start + j)] -= acc;
                }
            }
        }
        // exact symmetry
        for i in 0..nb {
            for j in 0..i {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(SchurData { s, interior, chol_ii: Some(chol), coupling })
    }

    /// Interior values u_i = −A_ii⁻¹ A_ib y.
    fn extend(&self, y: &[f64]) -> Vec<f64> {
        let ni = self.interior.len();
        let mut rhs = vec![0.0; ni];
        for (r, yr) in y.iter().enumerate() {
            for &(i, v) in &self.coupling[r] {
                rhs[i] -= v * yr;
            }
        }
        if let Some(chol) = &self.chol_ii {
            chol.solve_in_place(&mut rhs);
        }
        rhs
    }
}

enum Backend {
    Dense(SchurData),
    Krylov(Cholesky),
}

/// The ρ-independent part of the p = 2 problem on a space: the operator A
/// and either its Schur complement or its factorisation. Prepared once per
/// mesh and reused for every weight.
pub struct LinearSolver<'a> {
    space: &'a FeSpace<'a>,
    a: SparseSymMatrix,
    backend: Backend,
    opts: LinearOptions,
}

impl<'a> LinearSolver<'a> {
    pub fn new(space: &'a FeSpace<'a>, opts: LinearOptions) -> Result<Self> {
        let a = assembly::assemble_operator(space, 1.0, 1.0, opts.exec)?;
        Self::with_operator(space, a, opts)
    }

    pub fn with_operator(space: &'a FeSpace<'a>, a: SparseSymMatrix, opts: LinearOptions) -> Result<Self> {
        let nb = space.boundary_dofs().len();
        if nb == 0 {
            return Err(Error::InvalidArgument("space has no boundary dofs".into()));
        }
        let dense = match opts.method {
            EigenMethod::Dense => true,
            EigenMethod::Krylov => false,
            EigenMethod::Auto => nb <= AUTO_DENSE_LIMIT,
        };
        let backend = if dense { Backend::Dense(SchurData::new(&a, space.boundary_dofs())?) } else { Backend::Krylov(Cholesky::new(&a)?) };
        Ok(LinearSolver { space, a, backend, opts })
    }

    pub fn space(&self) -> &'a FeSpace<'a> {
        self.space
    }

    pub fn operator(&self) -> &SparseSymMatrix {
        &self.a
    }

    pub fn options(&self) -> &LinearOptions {
        &self.opts
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.backend, Backend::Dense(_))
    }

    /// Factorisation of the full operator, when the Krylov route is active.
    pub fn cholesky(&self) -> Option<&Cholesky> {
        match &self.backend {
            Backend::Krylov(c) => Some(c),
            Backend::Dense(_) => None,
        }
    }

    /// Boundary mass block for `spec` on this space.
    pub fn boundary_mass(&self, spec: &WeightSpec) -> Result<SparseSymMatrix> {
        assembly::boundary_mass_block(self.space, spec, &self.opts.quad, self.opts.exec)
    }

    /// First `k` eigenpairs for the weight `spec`.
    pub fn solve(&self, spec: &WeightSpec, k: usize) -> Result<Vec<EigenPair>> {
        let mb = self.boundary_mass(spec)?;
        self.solve_with_mass(&mb, k, None)
    }

    /// First `k` eigenpairs for a precomputed boundary mass block. `start`
    /// optionally seeds the Krylov iteration with boundary vectors.
    pub fn solve_with_mass(&self, mb: &SparseSymMatrix, k: usize, start: Option<&[Vec<f64>]>) -> Result<Vec<EigenPair>> {
        let nb = self.space.boundary_dofs().len();
        if k == 0 || k > nb {
            return Err(Error::InvalidArgument(format!("K = {k} must lie in 1..={nb} (boundary dofs)")));
        }
        let bd = self.space.boundary_dofs();
        let (lambdas, ys, fulls, iterations, converged) = match &self.backend {
            Backend::Dense(schur) => {
                let (l, y) = pencil::dense_pencil(&schur.s, &mb.to_dense(), k)?;
                let fulls = y
                    .iter()
                    .map(|yv| {
                        let ui = schur.extend(yv);
                        let mut u = vec![0.0; self.space.n_dofs()];
                        for (p, &d) in bd.iter().enumerate() {
                            u[d] = yv[p];
                        }
                        for (p, &d) in schur.interior.iter().enumerate() {
                            u[d] = ui[p];
                        }
                        u
                    })
                    .collect::<Vec<_>>();
                (l, y, fulls, 1, true)
            }
            Backend::Krylov(chol) => {
                if !mb.probe_positive(4, self.opts.krylov.seed) {
                    return Err(Error::InvalidWeight("boundary mass matrix is not positive definite".into()));
                }
                let n = self.space.n_dofs();
                let embed_solve = |y: &[f64]| -> Vec<f64> {
                    let my = mb.matvec(y);
                    let mut z = vec![0.0; n];
                    for (p, &d) in bd.iter().enumerate() {
                        z[d] = my[p];
                    }
                    chol.solve_in_place(&mut z);
                    z
                };
                let apply_block = |xs: &[Vec<f64>]| -> Vec<Vec<f64>> {
                    // one multi-column solve per block
                    let cols = xs.len();
                    let mut z = vec![0.0; n * cols];
                    for (j, y) in xs.iter().enumerate() {
                        let my = mb.matvec(y);
                        for (p, &d) in bd.iter().enumerate() {
                            z[j * n + d] = my[p];
                        }
                    }
                    chol.solve_block_in_place(&mut z, cols);
                    (0..cols).map(|j| bd.iter().map(|&d| z[j * n + d]).collect()).collect()
                };
                let r = pencil::largest_eigenpairs(apply_block, mb, k, &self.opts.krylov, start)?;
                let lambdas: Vec<f64> = r.theta.iter().map(|t| 1.0 / t).collect();
                let fulls = r
                    .vectors
                    .iter()
                    .zip(&lambdas)
                    .map(|(y, &l)| {
                        let mut u = embed_solve(y);
                        u.iter_mut().for_each(|x| *x *= l);
                        // keep the boundary trace exactly equal to y
                        for (p, &d) in bd.iter().enumerate() {
                            u[d] = y[p];
                        }
                        u
                    })
                    .collect();
                (lambdas, r.vectors, fulls, r.iterations, r.converged)
            }
        };
        let mut pairs = Vec::with_capacity(k);
        for (i, ((lambda, y), mut u)) in lambdas.into_iter().zip(ys).zip(fulls).enumerate() {
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::NumericalFailure(format!("non-positive eigenvalue {lambda}")));
            }
            // sign convention on the first significant boundary value
            if let Some(&first) = y.iter().find(|v| v.abs() > 1e-8) {
                if first < 0.0 {
                    u.iter_mut().for_each(|x| *x = -*x);
                }
            }
            let residual = self.residual(mb, lambda, &u);
            let sup_norm = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let w1p_norm = self.a.quad_form(&u).max(0.0).sqrt();
            pairs.push(EigenPair { k: i + 1, lambda, u, residual, sup_norm, w1p_norm, cluster: 0, converged, iterations });
        }
        assign_clusters(&mut pairs);
        Ok(pairs)
    }

    /// ‖Au − λBu‖ / ‖Au‖.
    pub fn residual(&self, mb: &SparseSymMatrix, lambda: f64, u: &[f64]) -> f64 {
        let bd = self.space.boundary_dofs();
        let mut r = self.a.matvec(u);
        let norm_au = sparse::norm2(&r);
        let y: Vec<f64> = bd.iter().map(|&d| u[d]).collect();
        let my = mb.matvec(&y);
        for (p, &d) in bd.iter().enumerate() {
            r[d] -= lambda * my[p];
        }
        sparse::norm2(&r) / norm_au.max(f64::MIN_POSITIVE)
    }

    /// Boundary trace of a dof vector.
    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        self.space.boundary_dofs().iter().map(|&d| u[d]).collect()
    }
}

/// Numbers clusters of eigenvalues whose relative gap is below [`CLUSTER_GAP`].
pub fn assign_clusters(pairs: &mut [EigenPair]) {
    let mut cluster = 0;
    for i in 0..pairs.len() {
        if i > 0 {
            let (a, b) = (pairs[i - 1].lambda, pairs[i].lambda);
            if (b - a).abs() > CLUSTER_GAP * b.abs() {
                cluster += 1;
            }
        }
        pairs[i].cluster = cluster;
    }
}

/// First `k` Steklov eigenpairs on the full mesh.
pub fn solve_linear_steklov(mesh: &Mesh, spec: &WeightSpec, k: usize) -> Result<Vec<EigenPair>> {
    solve_linear_steklov_with(mesh, spec, k, LinearOptions::default())
}

pub fn solve_linear_steklov_with(mesh: &Mesh, spec: &WeightSpec, k: usize, opts: LinearOptions) -> Result<Vec<EigenPair>> {
    let space = FeSpace::full(mesh);
    let solver = LinearSolver::new(&space, opts)?;
    solver.solve(spec, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk_mesh, build_square_mesh};

    #[test]
    fn dense_and_krylov_routes_agree() {
        let mesh = build_square_mesh(10).unwrap();
        let spec = WeightSpec::new(crate::weights::Profile::cosine(1.0, 2.0, [1, 1, 0]), 0.3).unwrap();
        let space = FeSpace::full(&mesh);
        let dense = LinearSolver::new(&space, LinearOptions { method: EigenMethod::Dense, ..Default::default() }).unwrap();
        let kry = LinearSolver::new(&space, LinearOptions { method: EigenMethod::Krylov, ..Default::default() }).unwrap();
        let a = dense.solve(&spec, 6).unwrap();
        let b = kry.solve(&spec, 6).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.lambda - q.lambda).abs() < 1e-10 * p.lambda, "{} {}", p.lambda, q.lambda);
            assert!(p.residual < 1e-9 && q.residual < 1e-9);
        }
    }

    #[test]
    fn disk_first_eigenvalue_is_simple_and_positive() {
        let mesh = build_disk_mesh(3).unwrap();
        let pairs = solve_linear_steklov(&mesh, &WeightSpec::constant(1.0).unwrap(), 3).unwrap();
        assert_eq!(pairs[0].cluster, 0);
        assert_eq!(pairs[1].cluster, pairs[2].cluster);
        assert!(pairs[0].u.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn too_many_eigenpairs_rejected() {
        let mesh = build_square_mesh(1).unwrap();
        let r = solve_linear_steklov(&mesh, &WeightSpec::constant(1.0).unwrap(), 5);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
