//! Dense and iterative eigensolvers for symmetric-definite pencils.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseSymMatrix;
use crate::{Error, Result};

/// Smallest `k` eigenpairs of `S y = λ M y` for dense symmetric `S` and SPD
/// `M`. Eigenvectors are M-orthonormal, eigenvalues ascending.
pub fn dense_pencil(s: &Mat<f64>, m: &Mat<f64>, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = s.nrows();
    let llt = m.llt(Side::Lower).map_err(|_| Error::InvalidWeight("boundary mass matrix is not positive definite".into()))?;
    let l = llt.L();
    // C = L⁻¹ S L⁻ᵀ
    let mut x = s.clone();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let evd = c.self_adjoint_eigen(Side::Lower).map_err(|e| Error::NumericalFailure(format!("dense eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector();
    let mut z = evd.U().subcols(0, k).to_owned();
    solve_upper_triangular_in_place(l.transpose(), z.as_mut(), Par::Seq);
    let lambdas = (0..k).map(|i| vals[i]).collect();
    let vecs = (0..k).map(|j| (0..n).map(|i| z[(i, j)]).collect()).collect();
    Ok((lambdas, vecs))
}

/// Options of the block Krylov eigensolver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub block: usize,
    pub max_basis: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { block: 4, max_basis: 120, tol: 1e-12, max_iters: 2000, seed: 42 }
    }
}

/// Result of [`largest_eigenpairs`].
#[derive(Debug, Clone)]
pub struct KrylovResult {
    /// Ritz values, descending.
    pub theta: Vec<f64>,
    /// M-orthonormal Ritz vectors.
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

fn m_dot(m: &SparseSymMatrix, mx: &[f64], y: &[f64]) -> f64 {
    let _ = m;
    mx.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Largest `k` eigenpairs of an operator `T` that is self-adjoint and
/// positive in the `M` inner product, by a block Krylov method with full
/// reorthogonalisation and thick restarts.
///
/// Each sweep extends the basis by the residuals of the not yet converged
/// Ritz pairs, which spans the same space as a block Lanczos step. `apply`
/// maps a block of vectors to their images.
pub fn largest_eigenpairs<F>(
    apply: F,
    m: &SparseSymMatrix,
    k: usize,
    opts: &KrylovOptions,
    start: Option<&[Vec<f64>]>,
) -> Result<KrylovResult>
where
    F: Fn(&[Vec<f64>]) -> Vec<Vec<f64>>,
{
    let n = m.order();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of an order-{n} pencil")));
    }
    let block = opts.block.max(1);
    let max_basis = opts.max_basis.max(2 * (k + block)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };

    let mut v: Vec<Vec<f64>> = Vec::new();
    let mut mv: Vec<Vec<f64>> = Vec::new();
    let mut w: Vec<Vec<f64>> = Vec::new();

    let mut initial: Vec<Vec<f64>> = start.map(|s| s.to_vec()).unwrap_or_default();
    while initial.len() < block.max(k.min(block)) {
        initial.push(random_vec(&mut rng));
    }
    let mut pending = initial;
    let mut iterations = 0;
    loop {
        // orthonormalise the pending block against the basis and itself
        let mut fresh = Vec::new();
        for mut x in pending.drain(..) {
            let mut accepted = false;
            for attempt in 0..3 {
                let mut mx = m.matvec(&x);
                let n0 = m_dot(m, &mx, &x).sqrt();
                for _ in 0..2 {
                    for (vi, mvi) in v.iter().zip(&mv).chain(fresh.iter().map(|(a, b)| (a, b))) {
                        let c = m_dot(m, mvi, &x);
                        x.iter_mut().zip(vi).for_each(|(xj, vj)| *xj -= c * vj);
                    }
                    mx = m.matvec(&x);
                }
                let nn = m_dot(m, &mx, &x).sqrt();
                if nn > 1e-10 * n0 && nn > 0.0 {
                    x.iter_mut().for_each(|xj| *xj /= nn);
                    mx.iter_mut().for_each(|xj| *xj /= nn);
                    fresh.push((x, mx));
                    accepted = true;
                    break;
                }
                if attempt < 2 {
                    x = random_vec(&mut rng);
                } else {
                    break;
                }
            }
            if !accepted && v.len() + fresh.len() >= n {
                break;
            }
        }
        if fresh.is_empty() && v.is_empty() {
            return Err(Error::NumericalFailure("Krylov basis collapsed".into()));
        }
        let xs: Vec<Vec<f64>> = fresh.iter().map(|(x, _)| x.clone()).collect();
        let txs = if xs.is_empty() { Vec::new() } else { apply(&xs) };
        for ((x, mx), tx) in fresh.into_iter().zip(txs) {
            v.push(x);
            mv.push(mx);
            w.push(tx);
        }
        iterations += 1;

        // Rayleigh–Ritz
        let dim = v.len();
        let mut h = Mat::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let a = m_dot(m, &mv[i], &w[j]);
                let b = m_dot(m, &mv[j], &w[i]);
                h[(i, j)] = 0.5 * (a + b);
                h[(j, i)] = h[(i, j)];
            }
        }
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::NumericalFailure(format!("Ritz eigensolver: {e:?}")))?;
        let vals = evd.S().column_vector();
        let s = evd.U();
        let want = (k + block).min(dim);
        let mut theta = Vec::with_capacity(want);
        let mut xs = Vec::with_capacity(want);
        let mut txs = Vec::with_capacity(want);
        for r in 0..want {
            let col = dim - 1 - r;
            theta.push(vals[col]);
            let mut x = vec![0.0; n];
            let mut tx = vec![0.0; n];
            for i in 0..dim {
                let c = s[(i, col)];
                x.iter_mut().zip(&v[i]).for_each(|(a, b)| *a += c * b);
                tx.iter_mut().zip(&w[i]).for_each(|(a, b)| *a += c * b);
            }
            xs.push(x);
            txs.push(tx);
        }
        let mut residuals = Vec::new();
        let mut all_converged = dim >= k;
        for r in 0..want.min(k) {
            let res: Vec<f64> = txs[r].iter().zip(&xs[r]).map(|(a, b)| a - theta[r] * b).collect();
            let mr = m.matvec(&res);
            let norm = m_dot(m, &mr, &res).max(0.0).sqrt();
            if norm > opts.tol * theta[r].abs() {
                all_converged = false;
                if residuals.len() < block {
                    residuals.push(res);
                }
            }
        }
        if all_converged || dim >= n {
            theta.truncate(k);
            xs.truncate(k);
            return Ok(KrylovResult { theta, vectors: xs, iterations, converged: all_converged || dim >= n });
        }
        if iterations >= opts.max_iters {
            theta.truncate(k);
            xs.truncate(k);
            return Ok(KrylovResult { theta, vectors: xs, iterations, converged: false });
        }
        if dim + residuals.len() > max_basis {
            // thick restart on the wanted Ritz vectors
            mv = xs.iter().map(|x| m.matvec(x)).collect();
            v = xs;
            w = txs;
        }
        pending = residuals;
    }
}
