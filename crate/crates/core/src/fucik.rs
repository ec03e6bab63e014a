//! The first nontrivial Dancer–Fučík curve via the partition min-max
//! c(s) = inf max{s λ₁(a, ω₋), λ₁(b, ω₊)} over two-colourings of the mesh.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::assembly;
use crate::eigen_linear::{LinearOptions, LinearSolver};
use crate::eigen_plap::{PSolver, SolverOptions};
use crate::harness::{self, RateFit};
use crate::mesh::Mesh;
use crate::par::{self, Exec};
use crate::quadrature::BoundaryQuadrature;
use crate::space::FeSpace;
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Cell colours of a partition.
pub const PLUS: i8 = 1;
pub const MINUS: i8 = -1;
pub const UNASSIGNED: i8 = 0;

/// Relative gap λ₃ − λ₂ below which λ₂ is treated as double.
const DOUBLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FucikOptions {
    pub linear: LinearOptions,
    /// Descent options for the subdomain problems when p ≠ 2.
    pub plap: SolverOptions,
    /// Relative improvement a single-cell move must achieve.
    pub tol: f64,
    pub max_moves: usize,
    pub bisection_steps: usize,
    /// Execution of independent points of an s-grid or ε-list.
    pub exec: Exec,
}

impl Default for FucikOptions {
    fn default() -> Self {
        let mut linear = LinearOptions::default();
        linear.krylov.block = 1;
        FucikOptions { linear, plap: SolverOptions::default(), tol: 1e-10, max_moves: 20_000, bisection_steps: 40, exec: Exec::Parallel }
    }
}

/// One point (α(s), β(s)) = (c(s)/s, c(s)) of the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FucikPoint {
    pub s: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    /// λ₁(a, ω₋).
    pub lam_minus: f64,
    /// λ₁(b, ω₊).
    pub lam_plus: f64,
    /// Colour per cell: [`PLUS`], [`MINUS`] or [`UNASSIGNED`].
    pub partition: Vec<i8>,
    /// Accepted single-cell moves.
    pub iterations: usize,
    /// Subdomain eigenvalue evaluations.
    pub evaluations: usize,
    pub converged: bool,
    /// Vertex values of the ω₊ eigenfunction (unit boundary norm).
    #[serde(skip)]
    pub u_plus: Vec<f64>,
    /// Vertex values of the ω₋ eigenfunction (unit boundary norm).
    #[serde(skip)]
    pub u_minus: Vec<f64>,
}

impl FucikPoint {
    /// |sλ₋ − λ₊| / c.
    pub fn imbalance(&self) -> f64 {
        (self.s * self.lam_minus - self.lam_plus).abs() / self.c
    }
}

#[derive(Debug, Clone)]
struct Evaluation {
    lam_minus: f64,
    lam_plus: f64,
    u_minus: Vec<f64>,
    u_plus: Vec<f64>,
}

impl Evaluation {
    fn objective(&self, s: f64) -> f64 {
        (s * self.lam_minus).max(self.lam_plus)
    }
}

/// Evaluates partitions for one (a, b, p) problem on a mesh.
struct Partitioner<'m> {
    mesh: &'m Mesh,
    a: WeightSpec,
    b: WeightSpec,
    quad_a: BoundaryQuadrature,
    quad_b: BoundaryQuadrature,
    p: f64,
    opts: FucikOptions,
    neighbors: Vec<Vec<usize>>,
    boundary_cells: Vec<bool>,
    cache: HashMap<u64, Option<Evaluation>>,
    evaluations: usize,
}

impl<'m> Partitioner<'m> {
    fn new(mesh: &'m Mesh, a: &WeightSpec, b: &WeightSpec, p: f64, opts: &FucikOptions) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
        }
        let quad_a = BoundaryQuadrature::with_exec(mesh, a, &opts.linear.quad, opts.linear.exec)?;
        let quad_b = BoundaryQuadrature::with_exec(mesh, b, &opts.linear.quad, opts.linear.exec)?;
        let mut boundary_cells = vec![false; mesh.n_cells()];
        for f in 0..mesh.n_boundary_facets() {
            boundary_cells[mesh.facet_cell(f)] = true;
        }
        Ok(Partitioner {
            mesh,
            a: a.clone(),
            b: b.clone(),
            quad_a,
            quad_b,
            p,
            opts: *opts,
            neighbors: mesh.cell_neighbors(),
            boundary_cells,
            cache: HashMap::new(),
            evaluations: 0,
        })
    }

    /// λ₁ and its eigenfunction (vertex values) on the cells of `colour`.
    fn subdomain_eigen(&self, part: &[i8], colour: i8, warm: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        let mask: Vec<bool> = part.iter().map(|&c| c == colour).collect();
        let space = FeSpace::subdomain(self.mesh, &mask)?;
        if space.boundary_dofs().is_empty() {
            return Err(Error::InvalidArgument("subdomain has no Steklov boundary".into()));
        }
        let (spec, quad) = if colour == MINUS { (&self.a, &self.quad_a) } else { (&self.b, &self.quad_b) };
        let linear = self.opts.linear;
        let (lambda, u) = if self.p == 2.0 {
            let solver = LinearSolver::new(&space, linear)?;
            let mb = assembly::boundary_mass_block_from_quadrature(&space, quad, linear.exec)?;
            let start = warm.map(|w| vec![space.boundary_dofs().iter().map(|&d| w[space.vertex(d)]).collect::<Vec<_>>()]);
            let pair = solver.solve_with_mass(&mb, 1, start.as_deref())?.remove(0);
            (pair.lambda, pair.u)
        } else {
            let solver = PSolver::new(&space, linear)?;
            let init = warm.map(|w| (0..space.n_dofs()).map(|d| w[space.vertex(d)]).collect::<Vec<_>>());
            let init = init.filter(|v| v.iter().any(|x| *x != 0.0));
            let r = solver.first_with_quadrature(quad, spec, self.p, &self.opts.plap, init.as_deref())?;
            (r.pair.lambda, r.pair.u)
        };
        let mut vals = space.to_vertex_values(&u);
        if vals.iter().sum::<f64>() < 0.0 {
            vals.iter_mut().for_each(|x| *x = -*x);
        }
        Ok((lambda, vals))
    }

    fn evaluate(&mut self, part: &[i8], warm: Option<&Evaluation>) -> Option<Evaluation> {
        let key = partition_key(part);
        if let Some(e) = self.cache.get(&key) {
            return e.clone();
        }
        self.evaluations += 1;
        let eval = (|| -> Result<Evaluation> {
            if !self.is_valid(part) {
                return Err(Error::InvalidArgument("invalid partition".into()));
            }
            let (lam_minus, u_minus) = self.subdomain_eigen(part, MINUS, warm.map(|w| w.u_minus.as_slice()))?;
            let (lam_plus, u_plus) = self.subdomain_eigen(part, PLUS, warm.map(|w| w.u_plus.as_slice()))?;
            Ok(Evaluation { lam_minus, lam_plus, u_minus, u_plus })
        })()
        .ok();
        self.cache.insert(key, eval.clone());
        eval
    }

    /// Both colours non-empty, connected and touching the boundary.
    fn is_valid(&self, part: &[i8]) -> bool {
        [PLUS, MINUS].iter().all(|&c| self.touches_boundary(part, c) && self.is_connected(part, c, None))
    }

    fn touches_boundary(&self, part: &[i8], colour: i8) -> bool {
        part.iter().zip(&self.boundary_cells).any(|(&c, &b)| b && c == colour)
    }

    /// Whether the cells of `colour` (minus `removed`) form one face-connected set.
    fn is_connected(&self, part: &[i8], colour: i8, removed: Option<usize>) -> bool {
        let member = |c: usize| part[c] == colour && Some(c) != removed;
        let Some(start) = (0..part.len()).find(|&c| member(c)) else { return false };
        let total = (0..part.len()).filter(|&c| member(c)).count();
        let mut seen = vec![false; part.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 0;
        while let Some(c) = stack.pop() {
            count += 1;
            for &n in &self.neighbors[c] {
                if !seen[n] && member(n) {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        count == total
    }

    /// Keeps the largest component of each colour, recolouring the rest.
    fn make_connected(&self, part: &mut [i8]) {
        for colour in [PLUS, MINUS] {
            let comps = self.components(part, colour);
            if let Some(largest) = comps.iter().enumerate().max_by_key(|(i, c)| (c.len(), usize::MAX - i)).map(|(i, _)| i) {
                for (i, comp) in comps.iter().enumerate() {
                    if i != largest {
                        for &c in comp {
                            part[c] = -colour;
                        }
                    }
                }
            }
        }
    }

    fn components(&self, part: &[i8], colour: i8) -> Vec<Vec<usize>> {
        let mut seen = vec![false; part.len()];
        let mut out = Vec::new();
        for s in 0..part.len() {
            if seen[s] || part[s] != colour {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(c) = stack.pop() {
                comp.push(c);
                for &n in &self.neighbors[c] {
                    if !seen[n] && part[n] == colour {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Partitions from the level sets {w − t u₁ > 0} of the p = 2
    /// eigenfunctions, with t bisected to balance the two branches. w is u₂,
    /// or four directions in span{u₂, u₃} when λ₂ is (nearly) double.
    fn initial_partitions(&mut self, s: f64) -> Result<Vec<(Vec<i8>, Evaluation)>> {
        let space = FeSpace::full(self.mesh);
        let solver = LinearSolver::new(&space, self.opts.linear)?;
        let mb = assembly::boundary_mass_block_from_quadrature(&space, &self.quad_b, self.opts.linear.exec)?;
        let pairs = solver.solve_with_mass(&mb, 3, None)?;
        let u1 = &pairs[0].u;
        let double = pairs.len() > 2 && pairs[2].lambda - pairs[1].lambda <= DOUBLE_TOL * pairs[1].lambda;
        let angles: &[f64] = if double { &[0.0, 0.25, 0.5, 0.75] } else { &[0.0] };
        let mut out = Vec::new();
        for &a in angles {
            let (cs, sn) = ((a * std::f64::consts::PI).cos(), (a * std::f64::consts::PI).sin());
            let w: Vec<f64> =
                if a == 0.0 { pairs[1].u.clone() } else { pairs[1].u.iter().zip(&pairs[2].u).map(|(x, y)| cs * x + sn * y).collect() };
            if let Some(start) = self.level_set_start(s, u1, &w) {
                out.push(start);
            }
        }
        if out.is_empty() {
            return Err(Error::NumericalFailure("no valid initial partition".into()));
        }
        Ok(out)
    }

    fn level_set_start(&mut self, s: f64, u1: &[f64], w: &[f64]) -> Option<(Vec<i8>, Evaluation)> {
        let ratios: Vec<f64> = u1.iter().zip(w).map(|(a, b)| b / a).collect();
        let mut lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let level = |t: f64| -> Vec<i8> {
            (0..self.mesh.n_cells())
                .map(|c| {
                    let v: f64 = self.mesh.cell(c).iter().map(|&v| w[v] - t * u1[v]).sum();
                    if v > 0.0 {
                        PLUS
                    } else {
                        MINUS
                    }
                })
                .collect()
        };
        let mut best: Option<(f64, Vec<i8>, Evaluation)> = None;
        let mut t = 0.0f64.clamp(lo, hi);
        for _ in 0..self.opts.bisection_steps {
            let mut part = level(t);
            self.make_connected(&mut part);
            // positive f: the minus branch dominates and must grow
            let f = match self.evaluate(&part, None) {
                Some(e) => {
                    let obj = e.objective(s);
                    if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
                        best = Some((obj, part.clone(), e.clone()));
                    }
                    s * e.lam_minus - e.lam_plus
                }
                None => {
                    if self.touches_boundary(&part, MINUS) {
                        -1.0
                    } else {
                        1.0
                    }
                }
            };
            if f > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 1e-12 * (hi.abs() + lo.abs()).max(1e-300) {
                break;
            }
            t = 0.5 * (lo + hi);
        }
        best.map(|(_, part, eval)| (part, eval))
    }

    /// Greedy first-improvement single-cell moves from `part`.
    fn optimise(&mut self, s: f64, mut part: Vec<i8>, mut eval: Evaluation) -> (Vec<i8>, Evaluation, usize, bool) {
        let n = part.len();
        let mut cursor = 0;
        let mut moves = 0;
        let mut converged = false;
        while moves < self.opts.max_moves {
            let obj = eval.objective(s);
            let grow = if s * eval.lam_minus >= eval.lam_plus { MINUS } else { PLUS };
            let mut accepted = false;
            for step in 0..n {
                let c = (cursor + step) % n;
                if part[c] != -grow || !self.neighbors[c].iter().any(|&m| part[m] == grow) {
                    continue;
                }
                let mut trial = part.clone();
                trial[c] = grow;
                if !self.touches_boundary(&trial, -grow) || !self.is_connected(&part, -grow, Some(c)) {
                    continue;
                }
                let Some(e) = self.evaluate(&trial, Some(&eval)) else { continue };
                if e.objective(s) < obj * (1.0 - self.opts.tol) {
                    part = trial;
                    eval = e;
                    cursor = (c + 1) % n;
                    moves += 1;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                converged = true;
                break;
            }
        }
        (part, eval, moves, converged)
    }
}

fn partition_key(part: &[i8]) -> u64 {
    let mut h = DefaultHasher::new();
    part.hash(&mut h);
    h.finish()
}

/// c(s) for weights `a` (on ω₋) and `b` (on ω₊).
pub fn c_of_s(mesh: &Mesh, a: &WeightSpec, b: &WeightSpec, s: f64, p: f64) -> Result<FucikPoint> {
    c_of_s_with(mesh, a, b, s, p, &FucikOptions::default())
}

pub fn c_of_s_with(mesh: &Mesh, a: &WeightSpec, b: &WeightSpec, s: f64, p: f64, opts: &FucikOptions) -> Result<FucikPoint> {
    c_of_s_from(mesh, a, b, s, p, opts, None)
}

/// c(s) with the optimisation also started from `initial` (a partition of
/// the same mesh); the lower of the two local minima is returned.
pub fn c_of_s_from(
    mesh: &Mesh,
    a: &WeightSpec,
    b: &WeightSpec,
    s: f64,
    p: f64,
    opts: &FucikOptions,
    initial: Option<&[i8]>,
) -> Result<FucikPoint> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("slope s = {s} must be positive")));
    }
    let mut part_solver = Partitioner::new(mesh, a, b, p, opts)?;
    let mut starts = Vec::new();
    if let Some(init) = initial {
        if init.len() != mesh.n_cells() {
            return Err(Error::InvalidArgument("initial partition does not match the mesh".into()));
        }
        let mut part: Vec<i8> = init.iter().map(|&c| if c == UNASSIGNED { PLUS } else { c }).collect();
        part_solver.make_connected(&mut part);
        if let Some(e) = part_solver.evaluate(&part, None) {
            starts.push((part, e));
        }
    }
    starts.extend(part_solver.initial_partitions(s)?);
    let mut best: Option<(Vec<i8>, Evaluation, usize, bool)> = None;
    for (part, eval) in starts {
        let run = part_solver.optimise(s, part, eval);
        if best.as_ref().is_none_or(|b| run.1.objective(s) < b.1.objective(s)) {
            best = Some(run);
        }
    }
    let (part, eval, moves, converged) = best.expect("at least one start");
    let c = eval.objective(s);
    Ok(FucikPoint {
        s,
        c,
        alpha: c / s,
        beta: c,
        lam_minus: eval.lam_minus,
        lam_plus: eval.lam_plus,
        partition: part,
        iterations: moves,
        evaluations: part_solver.evaluations,
        converged,
        u_plus: eval.u_plus,
        u_minus: eval.u_minus,
    })
}

/// max{sλ₁(a, ω₋), λ₁(b, ω₊)} for a fixed partition.
pub fn partition_value(mesh: &Mesh, a: &WeightSpec, b: &WeightSpec, s: f64, p: f64, part: &[i8], opts: &FucikOptions) -> Result<f64> {
    let mut solver = Partitioner::new(mesh, a, b, p, opts)?;
    if part.len() != mesh.n_cells() {
        return Err(Error::InvalidArgument("partition does not match the mesh".into()));
    }
    solver
        .evaluate(part, None)
        .map(|e| e.objective(s))
        .ok_or_else(|| Error::InvalidArgument("partition colours must be connected and touch the boundary".into()))
}

/// Points along an ascending s-grid with the monotonicity post-check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<FucikPoint>,
    /// Largest relative increase of α between consecutive points.
    pub alpha_violation: f64,
    /// Largest relative decrease of β between consecutive points.
    pub beta_violation: f64,
    /// Both violations within [`MONOTONE_TOL`].
    pub monotone: bool,
}

pub const MONOTONE_TOL: f64 = 0.02;

pub fn curve_points(mesh: &Mesh, a: &WeightSpec, b: &WeightSpec, s_grid: &[f64], p: f64) -> Result<Curve> {
    curve_points_with(mesh, a, b, s_grid, p, &FucikOptions::default(), None)
}

pub fn curve_points_with(
    mesh: &Mesh,
    a: &WeightSpec,
    b: &WeightSpec,
    s_grid: &[f64],
    p: f64,
    opts: &FucikOptions,
    initial: Option<&[Vec<i8>]>,
) -> Result<Curve> {
    if s_grid.is_empty() || s_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("s-grid must be non-empty and strictly ascending".into()));
    }
    if initial.is_some_and(|i| i.len() != s_grid.len()) {
        return Err(Error::InvalidArgument("one initial partition per s value is required".into()));
    }
    let idx: Vec<usize> = (0..s_grid.len()).collect();
    let points = par::map_tasks(opts.exec, &idx, |&i| c_of_s_from(mesh, a, b, s_grid[i], p, opts, initial.map(|v| v[i].as_slice())))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut alpha_violation = 0.0f64;
    let mut beta_violation = 0.0f64;
    for w in points.windows(2) {
        alpha_violation = alpha_violation.max((w[1].alpha - w[0].alpha) / w[0].alpha);
        beta_violation = beta_violation.max((w[0].beta - w[1].beta) / w[0].beta);
    }
    let monotone = alpha_violation <= MONOTONE_TOL && beta_violation <= MONOTONE_TOL;
    Ok(Curve { points, alpha_violation, beta_violation, monotone })
}

/// One row of the curve-convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub s: f64,
    pub alpha_eps: f64,
    pub beta_eps: f64,
    pub alpha_0: f64,
    pub beta_0: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveConvergence {
    pub rows: Vec<ConvergenceRow>,
    pub baseline: Curve,
    /// Fitted rate of |β_ε(s) − β₀(s)| per s (None when refused).
    pub beta_rates: Vec<(f64, Option<RateFit>)>,
    pub alpha_rates: Vec<(f64, Option<RateFit>)>,
}

/// Compares the curve for (a_ε, b_ε) with the curve for the homogenised
/// constants (a₀, b₀) on the same mesh. Each ε run starts from the
/// homogenised optimal partition.
pub fn curve_convergence(
    mesh: &Mesh,
    a: &WeightSpec,
    b: &WeightSpec,
    eps_list: &[f64],
    s_grid: &[f64],
    p: f64,
    opts: &FucikOptions,
) -> Result<CurveConvergence> {
    let baseline = curve_points_with(mesh, &a.homogenized(), &b.homogenized(), s_grid, p, opts, None)?;
    let initial: Vec<Vec<i8>> = baseline.points.iter().map(|q| q.partition.clone()).collect();
    let curves = par::map_tasks(opts.exec, eps_list, |&eps| -> Result<Curve> {
        let (ae, be) = (a.with_epsilon(eps)?, b.with_epsilon(eps)?);
        curve_points_with(mesh, &ae, &be, s_grid, p, &FucikOptions { exec: Exec::Sequential, ..*opts }, Some(&initial))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (&eps, curve) in eps_list.iter().zip(&curves) {
        for (q, q0) in curve.points.iter().zip(&baseline.points) {
            rows.push(ConvergenceRow {
                eps,
                s: q.s,
                alpha_eps: q.alpha,
                beta_eps: q.beta,
                alpha_0: q0.alpha,
                beta_0: q0.beta,
                d_alpha: (q.alpha - q0.alpha).abs(),
                d_beta: (q.beta - q0.beta).abs(),
            });
        }
    }
    let fit_for = |s: f64, pick: fn(&ConvergenceRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.s == s).map(|r| (r.eps, pick(r))).collect();
        harness::fit_points(&pts).ok()
    };
    let beta_rates = s_grid.iter().map(|&s| (s, fit_for(s, |r| r.d_beta))).collect();
    let alpha_rates = s_grid.iter().map(|&s| (s, fit_for(s, |r| r.d_alpha))).collect();
    Ok(CurveConvergence { rows, baseline, beta_rates, alpha_rates })
}

/// Writes the point table with columns
/// `s,alpha,beta,c,lam_minus,lam_plus,iterations,converged`.
pub fn write_curve_csv<W: std::io::Write>(points: &[FucikPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s", "alpha", "beta", "c", "lam_minus", "lam_plus", "iterations", "converged"])?;
    for q in points {
        out.write_record([
            format!("{:?}", q.s),
            format!("{:?}", q.alpha),
            format!("{:?}", q.beta),
            format!("{:?}", q.c),
            format!("{:?}", q.lam_minus),
            format!("{:?}", q.lam_plus),
            q.iterations.to_string(),
            q.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
