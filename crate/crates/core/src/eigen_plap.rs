//! First and second eigenpairs for general p, the auxiliary Neumann problem
//! and the oscillation integral.

use serde::{Deserialize, Serialize};

use crate::assembly::{self, PFunctional};
use crate::eigen_linear::{EigenPair, LinearOptions, LinearSolver};
use crate::fucik::{self, FucikOptions};
use crate::mesh::Mesh;
use crate::par::Exec;
use crate::quadrature::{self, BoundaryQuadrature, QuadOptions};
use crate::space::FeSpace;
use crate::sparse::{self, Cholesky};
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Options of the constrained Rayleigh-quotient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative decrease of R over `window` iterations below which the
    /// quotient counts as stationary.
    pub tol_rel: f64,
    /// Bound on the dual norm of the Lagrangian gradient.
    pub tol_grad: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub window: usize,
    /// Polak–Ribière+ conjugate directions instead of plain preconditioned descent.
    pub conjugate: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            tol_rel: 1e-10,
            tol_grad: 1e-8,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            window: 5,
            conjugate: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidArgument("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidArgument("backtrack_factor must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 || self.window == 0 {
            return Err(Error::InvalidArgument("max_iters and window must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one descent run, with the quotient history.
#[derive(Debug, Clone)]
pub struct DescentResult {
    pub pair: EigenPair,
    /// R at every accepted iterate (starting point first).
    pub history: Vec<f64>,
    /// Final dual norm of the Lagrangian gradient.
    pub grad_norm: f64,
}

/// Minimises R(u) = E(u)/N(u) from `init` by preconditioned descent with
/// renormalisation N(u) = 1 after every step.
///
/// Search directions are the gradient of R in the inner product of the
/// stiffness-plus-mass operator (its factorisation `precond`), optionally
/// combined Polak–Ribière+ style. Steps follow an Armijo backtracking rule.
pub fn minimize_rayleigh(f: &PFunctional, precond: &Cholesky, init: &[f64], opts: &SolverOptions) -> Result<DescentResult> {
    opts.validate()?;
    let p = f.p();
    let n = f.space().n_dofs();
    if init.len() != n || precond.order() != n {
        return Err(Error::InvalidArgument("initial vector or preconditioner has the wrong size".into()));
    }
    let mut u = init.to_vec();
    let n0 = f.boundary_norm(&u);
    if !(n0 > 0.0) {
        return Err(Error::InvalidArgument("initial vector has zero trace".into()));
    }
    scale(&mut u, n0.powf(-1.0 / p));

    let (mut e, mut ge) = f.energy_and_gradient(&u);
    let (mut nn, mut gn) = f.boundary_norm_and_gradient(&u);
    let mut r = e / nn;
    let mut g = lagrangian_gradient(&ge, &gn, r, nn);
    let mut z = precond.solve(&g);
    let mut gz = sparse::dot(&g, &z);
    let mut d: Vec<f64> = z.iter().map(|x| -x).collect();
    let mut history = vec![r];
    let mut t_prev = 0.5 / p;
    let mut plain = true;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iters {
        iterations = it;
        let grad_norm = gz.max(0.0).sqrt();
        let stationary = history.len() > opts.window && {
            let old = history[history.len() - 1 - opts.window];
            (old - r) / r.abs() < opts.tol_rel
        };
        if grad_norm < opts.tol_grad && (stationary || history.len() <= opts.window) {
            converged = true;
            break;
        }
        let mut slope = sparse::dot(&g, &d);
        if !(slope < 0.0) {
            d = z.iter().map(|x| -x).collect();
            slope = -gz;
            plain = true;
        }
        let mut t = (2.0 * t_prev).min(1.0);
        let mut accepted = None;
        let mut tries = 0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let de = f.energy_difference(&u, &trial);
            let dn = f.boundary_norm_difference(&u, &trial);
            let n_new = nn + dn;
            if n_new > 0.0 {
                // R(trial) − R(u) without cancellation
                let dr = (de * nn - e * dn) / (nn * n_new);
                if dr <= opts.armijo_c * t * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= opts.backtrack_factor;
            tries += 1;
            if tries > 60 {
                break;
            }
        }
        let Some(mut next) = accepted else {
            if !plain {
                d = z.iter().map(|x| -x).collect();
                t_prev = 0.5 / p;
                plain = true;
                continue;
            }
            // no representable decrease remains
            converged = grad_norm < opts.tol_grad;
            break;
        };
        t_prev = t;
        let n_next = f.boundary_norm(&next);
        let s = n_next.powf(-1.0 / p);
        scale(&mut next, s);
        u = next;
        let (e2, ge2) = f.energy_and_gradient(&u);
        let (n2, gn2) = f.boundary_norm_and_gradient(&u);
        let r2 = e2 / n2;
        let g2 = lagrangian_gradient(&ge2, &gn2, r2, n2);
        let z2 = precond.solve(&g2);
        let gz2 = sparse::dot(&g2, &z2);
        let beta = if opts.conjugate && gz > 0.0 {
            let num: f64 = g2.iter().zip(z2.iter().zip(&z)).map(|(a, (b, c))| a * (b - s * c)).sum();
            (num / gz).max(0.0)
        } else {
            0.0
        };
        d = z2.iter().zip(&d).map(|(a, b)| -a + beta * s * b).collect();
        plain = beta == 0.0;
        (e, ge, nn, gn, r, g, z, gz) = (e2, ge2, n2, gn2, r2, g2, z2, gz2);
        history.push(r);
        iterations = it + 1;
    }
    let grad_norm = gz.max(0.0).sqrt();
    let pair = finish_pair(f, u, e, nn, &ge, &gn, converged, iterations);
    Ok(DescentResult { pair, history, grad_norm })
}

fn lagrangian_gradient(ge: &[f64], gn: &[f64], r: f64, n: f64) -> Vec<f64> {
    ge.iter().zip(gn).map(|(a, b)| (a - r * b) / n).collect()
}

fn scale(u: &mut [f64], s: f64) {
    u.iter_mut().for_each(|x| *x *= s);
}

#[allow(clippy::too_many_arguments)]
fn finish_pair(f: &PFunctional, mut u: Vec<f64>, e: f64, n: f64, ge: &[f64], gn: &[f64], converged: bool, iterations: usize) -> EigenPair {
    let lambda = e / n;
    let res: Vec<f64> = ge.iter().zip(gn).map(|(a, b)| a - lambda * b).collect();
    let residual = sparse::norm2(&res) / sparse::norm2(ge).max(f64::MIN_POSITIVE);
    let space = f.space();
    if let Some(&d) = space.boundary_dofs().iter().find(|&&d| u[d].abs() > 1e-8) {
        if u[d] < 0.0 {
            scale(&mut u, -1.0);
        }
    }
    let sup_norm = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    EigenPair { k: 1, lambda, u, residual, sup_norm, w1p_norm: e.max(0.0).powf(1.0 / f.p()), cluster: 0, converged, iterations }
}

/// Reusable state for p-eigenvalue solves on one space: the p = 2 solver
/// (initial guesses) and the preconditioner.
pub struct PSolver<'a> {
    linear: LinearSolver<'a>,
    own_precond: Option<Cholesky>,
    quad_opts: QuadOptions,
}

impl<'a> PSolver<'a> {
    pub fn new(space: &'a FeSpace<'a>, linear_opts: LinearOptions) -> Result<Self> {
        let linear = LinearSolver::new(space, linear_opts)?;
        let own_precond = if linear.cholesky().is_some() { None } else { Some(Cholesky::new(linear.operator())?) };
        Ok(PSolver { linear, own_precond, quad_opts: linear_opts.quad })
    }

    pub fn linear(&self) -> &LinearSolver<'a> {
        &self.linear
    }

    pub fn precond(&self) -> &Cholesky {
        self.own_precond.as_ref().or(self.linear.cholesky()).expect("a factorisation exists")
    }

    pub fn space(&self) -> &'a FeSpace<'a> {
        self.linear.space()
    }

    /// First eigenpair for exponent `p`. Without `init` the descent starts
    /// from the p = 2 first eigenfunction for the same weight.
    pub fn first(&self, spec: &WeightSpec, p: f64, opts: &SolverOptions, init: Option<&[f64]>) -> Result<DescentResult> {
        if !(p > 1.0) {
            return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
        }
        let quad = BoundaryQuadrature::new(self.space().mesh(), spec, &self.quad_opts)?;
        self.first_with_quadrature(&quad, spec, p, opts, init)
    }

    pub fn first_with_quadrature(
        &self,
        quad: &BoundaryQuadrature,
        spec: &WeightSpec,
        p: f64,
        opts: &SolverOptions,
        init: Option<&[f64]>,
    ) -> Result<DescentResult> {
        let start = match init {
            Some(u) => u.to_vec(),
            None => self.linear.solve(spec, 1)?.remove(0).u,
        };
        let f = PFunctional::new(self.space(), quad, p)?;
        minimize_rayleigh(&f, self.precond(), &start, opts)
    }
}

/// λ₁ for exponent `p` on the full mesh.
pub fn first_eigen_p(mesh: &Mesh, spec: &WeightSpec, p: f64, opts: &SolverOptions) -> Result<EigenPair> {
    let space = FeSpace::full(mesh);
    let solver = PSolver::new(&space, LinearOptions::default())?;
    Ok(solver.first(spec, p, opts, None)?.pair)
}

/// λ₂ for exponent `p`, realised as c(1) of the Fučík curve with a = b.
pub fn second_eigen_p(mesh: &Mesh, spec: &WeightSpec, p: f64) -> Result<EigenPair> {
    second_eigen_p_with(mesh, spec, p, &FucikOptions::default())
}

pub fn second_eigen_p_with(mesh: &Mesh, spec: &WeightSpec, p: f64, opts: &FucikOptions) -> Result<EigenPair> {
    Ok(second_eigen_p_from(mesh, spec, p, opts, None)?.0)
}

/// λ₂ with the partition search started from `initial`; also returns the
/// optimal partition.
pub fn second_eigen_p_from(
    mesh: &Mesh,
    spec: &WeightSpec,
    p: f64,
    opts: &FucikOptions,
    initial: Option<&[i8]>,
) -> Result<(EigenPair, Vec<i8>)> {
    let point = fucik::c_of_s_from(mesh, spec, spec, 1.0, p, opts, initial)?;
    let space = FeSpace::full(mesh);
    // the two pieces each carry unit boundary norm
    let w = 2f64.powf(-1.0 / p);
    let u: Vec<f64> = point.u_plus.iter().zip(&point.u_minus).map(|(a, b)| w * (a - b)).collect();
    let quad = BoundaryQuadrature::new(mesh, spec, &opts.linear.quad)?;
    let f = PFunctional::new(&space, &quad, p)?;
    let (e, ge) = f.energy_and_gradient(&u);
    let (n, gn) = f.boundary_norm_and_gradient(&u);
    let mut pair = finish_pair(&f, u, e, n, &ge, &gn, point.converged, point.iterations);
    pair.k = 2;
    pair.lambda = point.c;
    Ok((pair, point.partition))
}

const NEUMANN_MAX_ITERS: usize = 500;
const NEUMANN_TOL: f64 = 1e-12;

/// Solution of the auxiliary Neumann problem.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    /// Vertex values of v_ε (mean zero).
    pub v: Vec<f64>,
    /// ‖∇v_ε‖_{L²(Ω)}.
    pub grad_norm: f64,
    /// M_ε used in the data.
    pub mean_deviation: f64,
    /// Sum of the load vector (discrete compatibility).
    pub load_sum: f64,
    /// Relative residual of the discrete Neumann system.
    pub residual: f64,
}

/// Solves −Δv = 0 in Ω, ∂_ν v = ρ₀ − ρ_ε − M_ε on ∂Ω with ∫_Ω v = 0 by
/// conjugate gradients on the singular stiffness system, preconditioned with
/// the Cholesky factor of K + M and followed by removal of the mean.
pub fn solve_aux_neumann(mesh: &Mesh, spec: &WeightSpec) -> Result<Vec<f64>> {
    Ok(solve_aux_neumann_with(mesh, spec, &QuadOptions::default())?.v)
}

pub fn solve_aux_neumann_with(mesh: &Mesh, spec: &WeightSpec, qopts: &QuadOptions) -> Result<NeumannSolution> {
    let space = FeSpace::full(mesh);
    let n = space.n_dofs();
    let rho0 = spec.rho0();
    let measure = assembly::boundary_load(&space, spec, qopts, |_| 1.0)?;
    let deviation = assembly::boundary_load(&space, spec, qopts, |rho| rho0 - rho)?;
    let perim: f64 = measure.iter().sum();
    let m_eps = deviation.iter().sum::<f64>() / perim;
    let load: Vec<f64> = deviation.iter().zip(&measure).map(|(d, m)| d - m_eps * m).collect();
    let load_sum: f64 = load.iter().sum();
    if !spec.is_oscillating() {
        return Ok(NeumannSolution { v: vec![0.0; n], grad_norm: 0.0, mean_deviation: 0.0, load_sum: 0.0, residual: 0.0 });
    }
    let k = assembly::assemble_operator(&space, 1.0, 0.0, Exec::Parallel)?;
    let precond = Cholesky::new(&assembly::assemble_operator(&space, 1.0, 1.0, Exec::Parallel)?)?;
    let mean = assembly::mass_row_sums(&space);
    // project onto the range of K (vectors with zero sum)
    let project = |r: &mut [f64]| {
        let shift = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|x| *x -= shift);
    };
    let mut rhs = load.clone();
    project(&mut rhs);
    let rhs_norm = sparse::norm2(&rhs).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = precond.solve(&r);
    let mut d = z.clone();
    let mut rz = sparse::dot(&r, &z);
    let mut residual = 1.0;
    for _ in 0..NEUMANN_MAX_ITERS {
        let kd = k.matvec(&d);
        let alpha = rz / sparse::dot(&d, &kd);
        x.iter_mut().zip(&d).for_each(|(a, b)| *a += alpha * b);
        r.iter_mut().zip(&kd).for_each(|(a, b)| *a -= alpha * b);
        project(&mut r);
        residual = sparse::norm2(&r) / rhs_norm;
        if residual <= NEUMANN_TOL {
            break;
        }
        z = precond.solve(&r);
        let rz_next = sparse::dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        d.iter_mut().zip(&z).for_each(|(a, b)| *a = b + beta * *a);
    }
    let mut kx = k.matvec(&x);
    kx.iter_mut().zip(&rhs).for_each(|(a, b)| *a -= b);
    residual = residual.max(sparse::norm2(&kx) / rhs_norm);
    if residual > 1e-10 {
        return Err(Error::NumericalFailure(format!("Neumann solve residual {residual:.2e}")));
    }
    let shift = sparse::dot(&mean, &x) / mean.iter().sum::<f64>();
    x.iter_mut().for_each(|a| *a -= shift);
    let grad_norm = k.quad_form(&x).max(0.0).sqrt();
    Ok(NeumannSolution { v: x, grad_norm, mean_deviation: m_eps, load_sum, residual })
}

/// ∫_{∂Ω} (ρ₀ − ρ_ε)|u|ᵖ dH for vertex values `u`.
pub fn oscillation_integral(mesh: &Mesh, spec: &WeightSpec, u: &[f64], p: f64) -> Result<f64> {
    oscillation_integral_with(mesh, spec, u, p, &QuadOptions::default())
}

pub fn oscillation_integral_with(mesh: &Mesh, spec: &WeightSpec, u: &[f64], p: f64, qopts: &QuadOptions) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
    }
    if u.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument("u must hold one value per vertex".into()));
    }
    if !spec.is_oscillating() {
        return Ok(0.0);
    }
    quadrature::check_resolution(mesh, spec, qopts)?;
    let rho0 = spec.rho0();
    let parts = crate::par::map_range(Exec::Parallel, mesh.n_boundary_facets(), |f| {
        let mut pts = Vec::new();
        quadrature::facet_points(mesh, f, spec, qopts, &mut pts);
        let verts = mesh.facet(f);
        pts.iter()
            .map(|q| {
                let val: f64 = verts.iter().enumerate().map(|(a, &v)| q.bary[a] * u[v]).sum();
                q.w * (rho0 - q.rho) * val.abs().powf(p)
            })
            .sum::<f64>()
    });
    Ok(parts.iter().sum())
}
