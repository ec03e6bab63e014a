//! Explicit constants of the L∞ and rate estimates, fitted trace constants
//! and the empirical L∞ ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{self, PFunctional};
use crate::eigen_linear::{EigenPair, LinearOptions, LinearSolver};
use crate::eigen_plap::{PSolver, SolverOptions};
use crate::mesh::Mesh;
use crate::quadrature::{self, BoundaryQuadrature, QuadOptions};
use crate::space::FeSpace;
use crate::weights::WeightSpec;
use crate::{Error, Result};

/// Geometric and spectral constants of a domain for one exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConstants {
    pub n: usize,
    pub p: f64,
    pub vol: f64,
    pub perim: f64,
    /// Fitted L¹ trace constant max ‖u‖_{L¹(∂Ω)} / ‖u‖_{W^{1,1}(Ω)}.
    pub c_tr: f64,
    /// Fitted p-trace constant max ‖u‖_{Lᵖ(∂Ω)} / ‖u‖_{W^{1,p}(Ω)}.
    pub c_tr_p: f64,
    /// First eigenvalue for ρ ≡ 1.
    pub lam1_ref: f64,
}

/// Limiting exponents of the Moser iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserExponents {
    pub chi: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// χ = (np−1)/(np−p), γ = p(n−1)/(p−1), β = p(n−1)²/(p−1)·((n+1)p−1)/(np−1).
pub fn moser_exponents(n: usize, p: f64) -> Result<MoserExponents> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension n = {n} must be at least 2")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
    }
    let nf = n as f64;
    Ok(MoserExponents {
        chi: (nf * p - 1.0) / (nf * p - p),
        gamma: p * (nf - 1.0) / (p - 1.0),
        beta: p * (nf - 1.0).powi(2) / (p - 1.0) * ((nf + 1.0) * p - 1.0) / (nf * p - 1.0),
    })
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h + 1.0)
}

impl DomainConstants {
    /// Constants with known trace constants and reference eigenvalue.
    pub fn new(n: usize, p: f64, vol: f64, perim: f64, c_tr: f64, c_tr_p: f64, lam1_ref: f64) -> Result<Self> {
        let dc = DomainConstants { n, p, vol, perim, c_tr, c_tr_p, lam1_ref };
        dc.validate()?;
        Ok(dc)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.vol, self.perim, self.c_tr, self.c_tr_p, self.lam1_ref];
        if self.n < 2 || !(self.p > 1.0) || vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("domain constants must be positive and finite".into()));
        }
        Ok(())
    }

    /// n ω_n^{1/n} |Ω|^{(n−1)/n} ≤ |∂Ω|.
    pub fn isoperimetric_ok(&self) -> bool {
        let nf = self.n as f64;
        nf * unit_ball_volume(self.n).powf(1.0 / nf) * self.vol.powf((nf - 1.0) / nf) <= self.perim * (1.0 + 1e-12)
    }

    /// Fits the constants on `mesh`: the trace constants by maximising the
    /// trace quotients over the first linear eigenfunctions, the constant
    /// function and `probes` random nodal vectors.
    pub fn fit(mesh: &Mesh, p: f64, probes: usize, seed: u64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidArgument(format!("exponent p = {p} must exceed 1")));
        }
        let one = WeightSpec::constant(1.0)?;
        let space = FeSpace::full(mesh);
        let linear = LinearSolver::new(&space, LinearOptions::default())?;
        let nb = space.boundary_dofs().len();
        let basis = linear.solve(&one, nb.min(24))?;
        let lam1_ref = if p == 2.0 {
            basis[0].lambda
        } else {
            let ps = PSolver::new(&space, LinearOptions::default())?;
            ps.first(&one, p, &SolverOptions::default(), Some(&basis[0].u))?.pair.lambda
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut candidates: Vec<Vec<f64>> = basis.iter().map(|e| e.u.clone()).collect();
        candidates.push(vec![1.0; space.n_dofs()]);
        for _ in 0..probes {
            candidates.push((0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
        let quad = BoundaryQuadrature::new(mesh, &one, &QuadOptions::default())?;
        let f = PFunctional::new(&space, &quad, p)?;
        let mut c_tr = 0.0f64;
        let mut c_tr_p = lam1_ref.powf(-1.0 / p);
        for u in &candidates {
            let (b, w) = l1_norms(mesh, u);
            if w > 0.0 {
                c_tr = c_tr.max(b / w);
            }
            let e = f.energy(u);
            if e > 0.0 {
                c_tr_p = c_tr_p.max((f.boundary_norm(u) / e).powf(1.0 / p));
            }
        }
        DomainConstants::new(mesh.dim(), p, mesh.volume(), mesh.boundary_measure(), c_tr, c_tr_p, lam1_ref)
    }
}

/// (‖u‖_{L¹(∂Ω)}, ‖u‖_{W^{1,1}(Ω)}) for vertex values `u`.
pub fn l1_norms(mesh: &Mesh, u: &[f64]) -> (f64, f64) {
    let dim = mesh.dim();
    let rule = quadrature::triangle_rule(6);
    let line = quadrature::gauss_legendre_unit(12);
    let mut boundary = 0.0;
    for f in 0..mesh.n_boundary_facets() {
        let v = mesh.facet(f);
        let m = mesh.facet_measure(f);
        boundary += if dim == 2 {
            segment_abs(u[v[0]], u[v[1]]) * m
        } else {
            m * rule.iter().map(|(b, w)| w * (b[0] * u[v[0]] + b[1] * u[v[1]] + b[2] * u[v[2]]).abs()).sum::<f64>()
        };
    }
    let mut interior = 0.0;
    for c in 0..mesh.n_cells() {
        let (g, vol) = assembly::cell_gradients(mesh, c).expect("mesh cells are non-degenerate");
        let cell = mesh.cell(c);
        let mut du = [0.0; 3];
        for (a, &v) in cell.iter().enumerate() {
            for t in 0..dim {
                du[t] += u[v] * g[a][t];
            }
        }
        let grad = (du[0] * du[0] + du[1] * du[1] + du[2] * du[2]).sqrt();
        let mut abs_int = 0.0;
        if dim == 2 {
            for (b, w) in &rule {
                abs_int += w * (b[0] * u[cell[0]] + b[1] * u[cell[1]] + b[2] * u[cell[2]]).abs();
            }
        } else {
            for &(x, wx) in &line {
                for (b, w) in &rule {
                    // collapsed tetrahedron: bary = ((1−x)b, x)
                    let val = (1.0 - x) * (b[0] * u[cell[0]] + b[1] * u[cell[1]] + b[2] * u[cell[2]]) + x * u[cell[3]];
                    abs_int += 3.0 * wx * w * (1.0 - x).powi(2) * val.abs();
                }
            }
        }
        interior += vol * (grad + abs_int);
    }
    (boundary, interior)
}

/// ∫₀¹ |a(1−t) + bt| dt.
fn segment_abs(a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs())
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs())
    }
}

/// K(λ, Ω) = max{1, C_Tr^{n/(p−1)}, (λ/λ₁)^{1/p}} (λ^{1/p} + |Ω|^{1/(np)})^{(n−1)/(p−1)}.
pub fn k_of_lambda(lam: f64, dc: &DomainConstants, p: f64) -> f64 {
    let n = dc.n as f64;
    let first = 1f64.max(dc.c_tr.powf(n / (p - 1.0))).max((lam / dc.lam1_ref).powf(1.0 / p));
    first * (lam.powf(1.0 / p) + dc.vol.powf(1.0 / (n * p))).powf((n - 1.0) / (p - 1.0))
}

/// (K₁, K₂) of the first and second eigenfunction bounds.
pub fn k1_k2(dc: &DomainConstants, p: f64) -> (f64, f64) {
    let n = dc.n as f64;
    let ct = dc.c_tr.powf(n);
    let pm = dc.perim;
    let k1 = ct.max(pm.powf(-1.0 / p)).max(pm.powf(1.0 / p)).powf(1.0 / (p - 1.0));
    let k2 = ct.max(pm.powf(-(p - 1.0) / p)).max(pm.powf(1.0 / p)).powf(1.0 / (p - 1.0));
    (k1, k2)
}

/// C(Ω) of the general-p rate with C₁ = 1.
pub fn rate_constant_main(dc: &DomainConstants, p: f64) -> f64 {
    let n = dc.n as f64;
    let pm = dc.perim;
    let m = [dc.c_tr.powf(n), pm.powf(1.0 / p), pm.powf(-1.0 / p), pm.powf(-1.0 / (n - 1.0)), pm.powf(-(p - 1.0) / p)]
        .into_iter()
        .fold(f64::MIN, f64::max);
    pm.powf(2.0 * (p - 1.0) / (n - 1.0)) * m
}

/// C(Ω) of the p = 2 rate with C₁ = 1.
pub fn rate_constant_p2(dc: &DomainConstants) -> f64 {
    let n = dc.n as f64;
    let pm = dc.perim;
    1f64.max(dc.c_tr.powf(n)) * pm.max(1.0 / pm).powf(1.0 / (2.0 * (n - 1.0)))
}

/// sup|u| / (K(λ)·‖u‖_{W^{1,p}}).
pub fn linf_ratio(pair: &EigenPair, dc: &DomainConstants, p: f64) -> f64 {
    pair.sup_norm / (k_of_lambda(pair.lambda, dc, p) * pair.w1p_norm)
}

/// All constants of a (mesh, p) pair, as printed by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub domain: DomainConstants,
    pub moser: MoserExponents,
    pub k_lam1: f64,
    pub k1: f64,
    pub k2: f64,
    pub rate_constant_main: f64,
    pub rate_constant_p2: f64,
    pub isoperimetric_ok: bool,
}

pub fn report(dc: &DomainConstants) -> Result<BoundsReport> {
    let p = dc.p;
    let (k1, k2) = k1_k2(dc, p);
    Ok(BoundsReport {
        domain: dc.clone(),
        moser: moser_exponents(dc.n, p)?,
        k_lam1: k_of_lambda(dc.lam1_ref, dc, p),
        k1,
        k2,
        rate_constant_main: rate_constant_main(dc, p),
        rate_constant_p2: rate_constant_p2(dc),
        isoperimetric_ok: dc.isoperimetric_ok(),
    })
}
