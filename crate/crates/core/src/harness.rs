//! ε-sweeps with two-mesh error control, log-log rate fits and verdicts.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bounds::{self, DomainConstants};
use crate::config::Config;
use crate::eigen_linear::LinearSolver;
use crate::eigen_plap::{self, PSolver};
use crate::fucik::FucikOptions;
use crate::mesh::Mesh;
use crate::par::{self, Exec};
use crate::quadrature::QuadOptions;
use crate::space::FeSpace;
use crate::weights::{Profile, WeightSpec};
use crate::{Error, Result};

/// Records count as resolved when the gap exceeds this multiple of the
/// discretisation error estimate.
pub const RESOLUTION_FACTOR: f64 = 5.0;

/// Default slack of the rate verdicts.
pub const DEFAULT_TAU: f64 = 0.05;

/// One (ε, k) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub k: usize,
    pub p: f64,
    pub lambda_eps: f64,
    pub lambda_0: f64,
    pub gap: f64,
    /// Boundary mesh size of the fine mesh.
    pub h: f64,
    /// |gap_h − gap_2h| / 3.
    pub disc_err_est: f64,
    pub resolved: bool,
    /// sup|u| of the fine-mesh eigenfunction.
    pub sup_norm: f64,
    /// ‖u‖_{W^{1,p}} of the fine-mesh eigenfunction.
    pub w1p_norm: f64,
}

/// Least-squares line through (log ε, log gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub eps_range: (f64, f64),
}

impl RateFit {
    /// Fitted value at ε.
    pub fn predict(&self, eps: f64) -> f64 {
        (self.intercept + self.slope * eps.ln()).exp()
    }
}

/// Outcome of comparing a fitted slope with (p−1)/p − τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub slope: f64,
    pub threshold: f64,
    pub pass: bool,
    pub r_squared: f64,
    pub conjecture_note: String,
}

/// Eigen-data of one mesh: λ₀ and, per ε, (λ, sup|u|, ‖u‖) for k = 1..K.
struct MeshRun {
    h: f64,
    lambda_0: Vec<f64>,
    per_eps: Vec<Vec<(f64, f64, f64)>>,
}

fn run_mesh(mesh: &Mesh, base: &WeightSpec, eps_list: &[f64], cfg: &Config) -> Result<MeshRun> {
    let homog = base.homogenized();
    let specs = eps_list.iter().map(|&e| base.with_epsilon(e)).collect::<Result<Vec<_>>>()?;
    let space = FeSpace::full(mesh);
    let k = cfg.k;
    let p = cfg.p;
    let h = mesh.boundary_h_max();
    if p == 2.0 {
        let solver = LinearSolver::new(&space, cfg.linear_options())?;
        let lambda_0 = solver.solve(&homog, k)?.iter().map(|e| e.lambda).collect();
        let per_eps = par::map_tasks(Exec::Parallel, &specs, |spec| -> Result<Vec<(f64, f64, f64)>> {
            Ok(solver.solve(spec, k)?.iter().map(|e| (e.lambda, e.sup_norm, e.w1p_norm)).collect())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        return Ok(MeshRun { h, lambda_0, per_eps });
    }
    if k > 2 {
        return Err(Error::InvalidArgument("for p ≠ 2 only k = 1, 2 are available".into()));
    }
    let solver = PSolver::new(&space, cfg.linear_options())?;
    let first0 = solver.first(&homog, p, &cfg.solver, None)?;
    let fopts = cfg.fucik_options();
    let second0 = if k == 2 { Some(eigen_plap::second_eigen_p_from(mesh, &homog, p, &fopts, None)?) } else { None };
    let mut lambda_0 = vec![first0.pair.lambda];
    if let Some((pair, _)) = &second0 {
        lambda_0.push(pair.lambda);
    }
    let per_eps = par::map_tasks(Exec::Parallel, &specs, |spec| -> Result<Vec<(f64, f64, f64)>> {
        let r = solver.first(spec, p, &cfg.solver, Some(&first0.pair.u))?;
        let mut out = vec![(r.pair.lambda, r.pair.sup_norm, r.pair.w1p_norm)];
        if let Some((_, part)) = &second0 {
            let fo = FucikOptions { exec: Exec::Sequential, ..fopts };
            let (pair, _) = eigen_plap::second_eigen_p_from(mesh, spec, p, &fo, Some(part))?;
            out.push((pair.lambda, pair.sup_norm, pair.w1p_norm));
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(MeshRun { h, lambda_0, per_eps })
}

/// Runs the sweep described by `cfg`: the fine mesh of `cfg.size` and its
/// half-resolution companion, one record per (ε, k).
pub fn epsilon_sweep(cfg: &Config) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let (fine, coarse) = cfg.mesh_pair()?;
    let base = WeightSpec::new(cfg.weight_profile()?, 1.0)?;
    let eps_list = cfg.eps.values(cfg.eps_min);
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("the ε sequence is empty".into()));
    }
    sweep_on_meshes(&fine, &coarse, &base, &eps_list, cfg)
}

/// Sweep on an explicit mesh pair.
pub fn sweep_on_meshes(fine: &Mesh, coarse: &Mesh, base: &WeightSpec, eps_list: &[f64], cfg: &Config) -> Result<Vec<SweepRecord>> {
    let f = run_mesh(fine, base, eps_list, cfg)?;
    let c = run_mesh(coarse, base, eps_list, cfg)?;
    let mut out = Vec::new();
    for (i, &eps) in eps_list.iter().enumerate() {
        for k in 0..f.lambda_0.len() {
            let (lambda_eps, sup_norm, w1p_norm) = f.per_eps[i][k];
            let gap = (lambda_eps - f.lambda_0[k]).abs();
            let gap_coarse = (c.per_eps[i][k].0 - c.lambda_0[k]).abs();
            let disc_err_est = (gap - gap_coarse).abs() / 3.0;
            out.push(SweepRecord {
                eps,
                k: k + 1,
                p: cfg.p,
                lambda_eps,
                lambda_0: f.lambda_0[k],
                gap,
                h: f.h,
                disc_err_est,
                resolved: gap > RESOLUTION_FACTOR * disc_err_est,
                sup_norm,
                w1p_norm,
            });
        }
    }
    Ok(out)
}

/// Rate fit over the resolved records with positive gap.
pub fn fit_rate(records: &[SweepRecord]) -> Result<RateFit> {
    fit_rate_with_factor(records, RESOLUTION_FACTOR)
}

/// Rate fit with a custom resolution factor.
pub fn fit_rate_with_factor(records: &[SweepRecord], factor: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = records.iter().filter(|r| r.gap > factor * r.disc_err_est && r.gap > 0.0).map(|r| (r.eps, r.gap)).collect();
    fit_points(&pts).map_err(|e| match e {
        Error::FitRefused(m) => Error::FitRefused(format!("{m} ({} records in total)", records.len())),
        other => other,
    })
}

/// Least squares of log y against log x over points with y > 0.
pub fn fit_points(points: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite()).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::FitRefused(format!("{} usable points, at least 3 are required", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitRefused("all points share one ε".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let xs = pts.iter().map(|p| p.0.exp());
    let eps_range = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    Ok(RateFit { slope, intercept, r_squared, n_points: pts.len(), eps_range })
}

/// PASS iff slope ≥ (p−1)/p − τ.
pub fn verdict(fit: &RateFit, p: f64, tau: f64) -> Verdict {
    let proven = (p - 1.0) / p;
    let threshold = proven - tau;
    let pass = fit.slope >= threshold;
    let conjecture_note = if fit.slope >= 0.5 - tau {
        format!("measured slope {:.3} is consistent with the conjectured ε^(1/2) rate", fit.slope)
    } else {
        format!("measured slope {:.3} is below the conjectured ε^(1/2) rate", fit.slope)
    };
    Verdict { slope: fit.slope, threshold, pass, r_squared: fit.r_squared, conjecture_note }
}

/// Growth of the gap with k compared with C·kᵉ envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEnvelope {
    /// 2 + n/(2(n−1)) + 2/(n−1).
    pub proven_exponent: f64,
    /// 2/(n−1).
    pub conjectured_exponent: f64,
    /// max over records of gap(k)/envelope(k) − 1 (negative when inside).
    pub max_violation: f64,
    pub worst_eps: f64,
    pub worst_k: usize,
    /// Squared log-residuals of both envelope shapes over k > 1.
    pub proven_sse: f64,
    pub conjectured_sse: f64,
    pub conjecture_fits_better: bool,
}

/// Envelope check with C(ε) taken from the k = 1 rate fit (or the raw k = 1
/// gap when that fit is refused).
pub fn k_envelope(records: &[SweepRecord], n: usize) -> Result<KEnvelope> {
    let nf = n as f64;
    let proven_exponent = 2.0 + nf / (2.0 * (nf - 1.0)) + 2.0 / (nf - 1.0);
    let conjectured_exponent = 2.0 / (nf - 1.0);
    let first: Vec<&SweepRecord> = records.iter().filter(|r| r.k == 1).collect();
    if first.is_empty() {
        return Err(Error::InvalidArgument("envelope needs k = 1 records".into()));
    }
    let fit = fit_rate(&first.iter().map(|r| (*r).clone()).collect::<Vec<_>>()).ok();
    let c_at = |eps: f64| -> f64 {
        match &fit {
            Some(f) => f.predict(eps),
            None => first.iter().find(|r| r.eps == eps).map(|r| r.gap).unwrap_or(0.0),
        }
    };
    let mut max_violation = f64::NEG_INFINITY;
    let (mut worst_eps, mut worst_k) = (0.0, 1);
    let (mut proven_sse, mut conjectured_sse) = (0.0, 0.0);
    for r in records.iter().filter(|r| r.k > 1) {
        let c = c_at(r.eps);
        if !(c > 0.0) {
            continue;
        }
        let kf = r.k as f64;
        let v = r.gap / (c * kf.powf(proven_exponent)) - 1.0;
        if v > max_violation {
            max_violation = v;
            worst_eps = r.eps;
            worst_k = r.k;
        }
        if r.gap > 0.0 {
            let l = (r.gap / c).ln();
            proven_sse += (l - proven_exponent * kf.ln()).powi(2);
            conjectured_sse += (l - conjectured_exponent * kf.ln()).powi(2);
        }
    }
    if max_violation == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("envelope needs records with k > 1".into()));
    }
    Ok(KEnvelope {
        proven_exponent,
        conjectured_exponent,
        max_violation,
        worst_eps,
        worst_k,
        proven_sse,
        conjectured_sse,
        conjecture_fits_better: conjectured_sse < proven_sse,
    })
}

/// Trend test of the L∞ ratios sup|u| / (K(λ)‖u‖) over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfStudy {
    pub ratios: Vec<(f64, usize, f64)>,
    /// Spearman correlation of the ratio with 1/ε.
    pub spearman: f64,
    /// One-sided p-value for a positive correlation.
    pub p_value: f64,
    pub increasing_trend: bool,
    pub max_over_min: f64,
    pub pass: bool,
}

pub const LINF_MAX_SPREAD: f64 = 3.0;
pub const LINF_SIGNIFICANCE: f64 = 0.05;

pub fn linf_study(records: &[SweepRecord], dc: &DomainConstants, p: f64) -> Result<LinfStudy> {
    if records.len() < 3 {
        return Err(Error::FitRefused("the trend test needs at least 3 records".into()));
    }
    let ratios: Vec<(f64, usize, f64)> = records
        .iter()
        .map(|r| {
            let k = bounds::k_of_lambda(r.lambda_eps, dc, p);
            (r.eps, r.k, r.sup_norm / (k * r.w1p_norm))
        })
        .collect();
    let x: Vec<f64> = ratios.iter().map(|r| 1.0 / r.0).collect();
    let y: Vec<f64> = ratios.iter().map(|r| r.2).collect();
    let spearman = spearman(&x, &y);
    let n = x.len() as f64;
    let p_value = if spearman >= 1.0 {
        0.0
    } else {
        let t = spearman * ((n - 2.0) / (1.0 - spearman * spearman)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::NumericalFailure(format!("{e}")))?;
        1.0 - dist.cdf(t)
    };
    let increasing_trend = p_value < LINF_SIGNIFICANCE;
    let max = y.iter().cloned().fold(f64::MIN, f64::max);
    let min = y.iter().cloned().fold(f64::MAX, f64::min);
    let max_over_min = max / min;
    Ok(LinfStudy { ratios, spearman, p_value, increasing_trend, max_over_min, pass: !increasing_trend && max_over_min <= LINF_MAX_SPREAD })
}

/// Average ranks (ties share their mean rank).
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = 0.5 * (i + j) as f64 + 1.0;
        for t in i..=j {
            r[idx[t]] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// ‖∇v_ε‖ of the auxiliary Neumann problem for each ε.
pub fn neumann_decay(mesh: &Mesh, profile: &Profile, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    par::map_tasks(Exec::Parallel, eps_list, |&eps| -> Result<(f64, f64)> {
        let spec = WeightSpec::new(profile.clone(), eps)?;
        let sol = eigen_plap::solve_aux_neumann_with(mesh, &spec, &QuadOptions::default())?;
        Ok((eps, sol.grad_norm))
    })
    .into_iter()
    .collect()
}

/// |∫(ρ₀ − ρ_ε)|u|ᵖ| for each ε.
pub fn oscillation_decay(mesh: &Mesh, profile: &Profile, u: &[f64], p: f64, eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    par::map_tasks(Exec::Parallel, eps_list, |&eps| -> Result<(f64, f64)> {
        let spec = WeightSpec::new(profile.clone(), eps)?;
        Ok((eps, eigen_plap::oscillation_integral(mesh, &spec, u, p)?.abs()))
    })
    .into_iter()
    .collect()
}

const CSV_HEADER: [&str; 11] = ["eps", "k", "p", "lambda_eps", "lambda_0", "gap", "h", "disc_err_est", "resolved", "sup_norm", "w1p_norm"];

/// Writes records as CSV (floats in shortest round-trip form).
pub fn write_records_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            format!("{:?}", r.eps),
            r.k.to_string(),
            format!("{:?}", r.p),
            format!("{:?}", r.lambda_eps),
            format!("{:?}", r.lambda_0),
            format!("{:?}", r.gap),
            format!("{:?}", r.h),
            format!("{:?}", r.disc_err_est),
            r.resolved.to_string(),
            format!("{:?}", r.sup_norm),
            format!("{:?}", r.w1p_norm),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let get = |i: usize| -> Result<&str> { row.get(i).ok_or_else(|| Error::Parse(format!("missing column {i}"))) };
        let f = |i: usize| -> Result<f64> { get(i)?.parse::<f64>().map_err(|e| Error::Parse(format!("column {i}: {e}"))) };
        out.push(SweepRecord {
            eps: f(0)?,
            k: get(1)?.parse().map_err(|e| Error::Parse(format!("k: {e}")))?,
            p: f(2)?,
            lambda_eps: f(3)?,
            lambda_0: f(4)?,
            gap: f(5)?,
            h: f(6)?,
            disc_err_est: f(7)?,
            resolved: get(8)?.parse().map_err(|e| Error::Parse(format!("resolved: {e}")))?,
            sup_norm: f(9).unwrap_or(f64::NAN),
            w1p_norm: f(10).unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

/// A named point series of a log-log plot, optionally with its fit.
pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
    pub fit: Option<&'a RateFit>,
}

const COLOURS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Static log-log scatter plot with fitted lines.
pub fn write_loglog_svg<W: Write>(title: &str, series: &[Series], mut w: W) -> Result<()> {
    let (width, height, margin) = (640.0, 480.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| *x > 0.0 && *y > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| if b - a < 1e-9 { (a - 0.5, b + 0.5) } else { (a - 0.05 * (b - a), b + 0.05 * (b - a)) };
    let ((x0, x1), (y0, y1)) = (pad(x0, x1), pad(y0, y1));
    let sx = |x: f64| margin + (x.log10() - x0) / (x1 - x0) * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y.log10() - y0) / (y1 - y0) * (height - 2.0 * margin);
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#)?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(w, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title))?;
    writeln!(
        w,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        width - 2.0 * margin,
        height - 2.0 * margin
    )?;
    for d in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = sx(10f64.powi(d));
        writeln!(w, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, height - margin + 16.0)?;
    }
    for d in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = sy(10f64.powi(d));
        writeln!(w, r#"<text x="{}" y="{y}" text-anchor="end">1e{d}</text>"#, margin - 4.0)?;
    }
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">ε</text>"#, width / 2.0, height - 16.0)?;
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        for &(x, y) in s.points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0) {
            writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{colour}"/>"#, sx(x), sy(y))?;
        }
        if let Some(f) = s.fit {
            let (a, b) = f.eps_range;
            writeln!(
                w,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{colour}" stroke-width="1.5"/>"#,
                sx(a),
                sy(f.predict(a)),
                sx(b),
                sy(f.predict(b))
            )?;
        }
        let label = match s.fit {
            Some(f) => format!("{} (slope {:.3})", s.label, f.slope),
            None => s.label.clone(),
        };
        writeln!(w, r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#, margin + 10.0, margin + 16.0 * (i as f64 + 1.0), escape(&label))?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let eps = [0.5, 0.25, 0.125, 0.0625];
        let f = fit_points(&eps.map(|e| (e, e))).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        let f = fit_points(&eps.map(|e| (e, 3.0 * e.sqrt()))).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_refused() {
        assert!(matches!(fit_points(&[(0.5, 1.0), (0.25, 0.5)]), Err(Error::FitRefused(_))));
    }

    #[test]
    fn verdict_thresholds() {
        let fit = |slope| RateFit { slope, intercept: 0.0, r_squared: 1.0, n_points: 3, eps_range: (0.1, 0.5) };
        let v = verdict(&fit(0.62), 3.0, 0.05);
        assert!(v.pass && (v.threshold - (2.0 / 3.0 - 0.05)).abs() < 1e-15);
        assert!(!verdict(&fit(0.40), 2.0, 0.05).pass);
        let v = verdict(&fit(1.0), 2.0, 0.05);
        assert!(v.pass && v.conjecture_note.contains("consistent"));
    }

    #[test]
    fn spearman_with_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn csv_round_trip() {
        let r = SweepRecord {
            eps: 0.1,
            k: 2,
            p: 2.0,
            lambda_eps: 1.0 / 3.0,
            lambda_0: 0.3,
            gap: 1.0 / 30.0,
            h: 0.01,
            disc_err_est: 1e-7,
            resolved: true,
            sup_norm: 1.5,
            w1p_norm: 0.7,
        };
        let mut buf = Vec::new();
        write_records_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), vec![r]);
    }
}
