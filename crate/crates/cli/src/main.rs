use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use steklov_core::bounds::{self, DomainConstants};
use steklov_core::config::Config;
use steklov_core::eigen_linear::{self, EigenPair};
use steklov_core::harness::{self, RateFit, Series, SweepRecord, Verdict};
use steklov_core::weights::{Profile, WeightSpec};
use steklov_core::{eigen_plap, fucik, par, Error};

/// Label, points and optional fitted line of one plotted series.
type PlotSeries = (String, Vec<(f64, f64)>, Option<RateFit>);

const EXIT_VERDICT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "steklov", version, about = "Steklov eigenvalues of the p-Laplacian with oscillating boundary weights")]
struct Cli {
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

/// Run settings. Each flag overrides the same key of `--config`.
#[derive(Args)]
struct Settings {
    /// INI configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// square | cube | disk.
    #[arg(long, global = true)]
    domain: Option<String>,
    /// Grid divisions (square, cube) or refinement level (disk).
    #[arg(long, global = true, visible_alias = "level")]
    size: Option<String>,
    /// Mesh file in the text format instead of a built-in domain.
    #[arg(long, global = true, value_name = "FILE")]
    mesh_file: Option<String>,
    /// Weight profile, e.g. `cosine`, `constant:1`, `checkerboard:1,3`.
    #[arg(long, global = true, visible_alias = "profile")]
    weight: Option<String>,
    /// ε of single solves.
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    p: Option<String>,
    /// Number of eigenpairs.
    #[arg(long, global = true)]
    k: Option<String>,
    /// resonant | generic | comma-separated list.
    #[arg(long, global = true)]
    eps: Option<String>,
    #[arg(long, global = true)]
    eps_min: Option<String>,
    #[arg(long, global = true)]
    tau: Option<String>,
    /// auto | dense | krylov.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Comma-separated slopes of the Fučík curve.
    #[arg(long, global = true)]
    s_grid: Option<String>,
    #[arg(long, global = true)]
    probes: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    threads: Option<String>,
    /// Output directory (default `out`, or STEKLOV_OUT_DIR).
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// Any other configuration key, e.g. `--set tol_rel=1e-12`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenpairs for one weight and ε.
    Solve,
    /// ε-sweep with rate fits and verdicts.
    Sweep,
    /// Fučík curve over the s-grid, optionally its ε-convergence.
    Fucik {
        /// Weight of the positive part (defaults to `--weight`).
        #[arg(long)]
        weight_b: Option<String>,
        /// Also run the curve-convergence study over the ε sequence.
        #[arg(long)]
        convergence: bool,
    },
    /// Moser exponents and, with `--fit`, the domain constants.
    Bounds {
        /// Space dimension (defaults to that of the domain).
        #[arg(long)]
        n: Option<usize>,
        /// Estimate the domain constants on the configured mesh.
        #[arg(long)]
        fit: bool,
    },
    /// Decay of the auxiliary Neumann solution over the ε sequence.
    Neumann,
    /// Aggregates sweep CSV files into one JSON and SVG bundle.
    Report {
        #[arg(required = true, value_name = "CSV")]
        inputs: Vec<PathBuf>,
    },
}

fn resolve(settings: &Settings) -> steklov_core::Result<Config> {
    let mut cfg = match &settings.config {
        Some(path) => Config::read(path)?,
        None => Config::default(),
    };
    if let Ok(dir) = std::env::var("STEKLOV_OUT_DIR") {
        cfg.set("out_dir", &dir)?;
    }
    let flags = [
        ("domain", &settings.domain),
        ("size", &settings.size),
        ("mesh_file", &settings.mesh_file),
        ("profile", &settings.weight),
        ("epsilon", &settings.epsilon),
        ("p", &settings.p),
        ("k", &settings.k),
        ("eps", &settings.eps),
        ("eps_min", &settings.eps_min),
        ("tau", &settings.tau),
        ("method", &settings.method),
        ("s_grid", &settings.s_grid),
        ("probes", &settings.probes),
        ("seed", &settings.seed),
        ("threads", &settings.threads),
        ("out_dir", &settings.out_dir),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &settings.extra {
        let (key, value) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("`--set {kv}` is not KEY=VALUE")))?;
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> steklov_core::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> steklov_core::Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn fit_json(k: usize, p: f64, fit: &Result<RateFit, Error>, verdict: Option<&Verdict>) -> serde_json::Value {
    match (fit, verdict) {
        (Ok(f), Some(v)) => json!({
            "k": k,
            "p": p,
            "slope": v.slope,
            "threshold": v.threshold,
            "pass": v.pass,
            "r_squared": v.r_squared,
            "conjecture_note": v.conjecture_note,
            "intercept": f.intercept,
            "n_points": f.n_points,
            "eps_range": [f.eps_range.0, f.eps_range.1],
        }),
        (Err(e), _) => json!({ "k": k, "p": p, "pass": false, "error": e.to_string() }),
        (Ok(_), None) => json!({ "k": k, "p": p, "pass": false }),
    }
}

fn print_pairs(pairs: &[EigenPair]) {
    println!("{:>3} {:>22} {:>10} {:>8} {:>12} {:>12}", "k", "lambda", "residual", "cluster", "sup_norm", "w1p_norm");
    for e in pairs {
        println!("{:>3} {:>22.15e} {:>10.2e} {:>8} {:>12.6e} {:>12.6e}", e.k, e.lambda, e.residual, e.cluster, e.sup_norm, e.w1p_norm);
    }
}

fn solve(cfg: &Config) -> steklov_core::Result<u8> {
    let mesh = cfg.mesh()?;
    let spec = WeightSpec::new(cfg.weight_profile()?, cfg.epsilon)?;
    let pairs = if cfg.p == 2.0 {
        eigen_linear::solve_linear_steklov_with(&mesh, &spec, cfg.k, cfg.linear_options())?
    } else {
        if cfg.k > 2 {
            return Err(Error::InvalidArgument("for p ≠ 2 only k = 1, 2 are available".into()));
        }
        let mut pairs = vec![eigen_plap::first_eigen_p(&mesh, &spec, cfg.p, &cfg.solver)?];
        if cfg.k == 2 {
            pairs.push(eigen_plap::second_eigen_p_with(&mesh, &spec, cfg.p, &cfg.fucik_options())?);
        }
        pairs
    };
    print_pairs(&pairs);
    let summary: Vec<_> = pairs.iter().map(|e| e.summary()).collect();
    write_json(&cfg.out_dir, "solve.json", &serde_json::to_value(summary)?)?;
    Ok(0)
}

/// Fits and verdicts per (p, k) group of records.
fn judge(records: &[SweepRecord], tau: f64) -> (Vec<serde_json::Value>, bool, Vec<PlotSeries>) {
    let mut groups: Vec<(f64, usize)> = records.iter().map(|r| (r.p, r.k)).collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    groups.dedup();
    let mut out = Vec::new();
    let mut all_pass = true;
    let mut series = Vec::new();
    for (p, k) in groups {
        let rk: Vec<SweepRecord> = records.iter().filter(|r| r.p == p && r.k == k).cloned().collect();
        let fit = harness::fit_rate(&rk);
        let verdict = fit.as_ref().ok().map(|f| harness::verdict(f, p, tau));
        let stable = fit.as_ref().ok().and_then(|f| harness::fit_rate_with_factor(&rk, 10.0).ok().map(|g| (g.slope - f.slope).abs()));
        match (&fit, &verdict) {
            (Ok(f), Some(v)) => println!(
                "p={p} k={k}: slope {:.4} (threshold {:.4}) r2 {:.4} over {} records: {}",
                f.slope,
                v.threshold,
                f.r_squared,
                f.n_points,
                if v.pass { "PASS" } else { "FAIL" }
            ),
            _ => println!("p={p} k={k}: {}: FAIL", fit.as_ref().err().map(|e| e.to_string()).unwrap_or_default()),
        }
        all_pass &= verdict.as_ref().is_some_and(|v| v.pass);
        let mut entry = fit_json(k, p, &fit, verdict.as_ref());
        if let Some(d) = stable {
            entry["slope_change_factor_10"] = json!(d);
        }
        out.push(entry);
        let pts: Vec<(f64, f64)> = rk.iter().filter(|r| r.gap > 0.0).map(|r| (r.eps, r.gap)).collect();
        series.push((format!("p={p} k={k}"), pts, fit.ok()));
    }
    (out, all_pass, series)
}

fn write_svg(dir: &Path, name: &str, title: &str, series: &[PlotSeries]) -> steklov_core::Result<()> {
    let s: Vec<Series> = series.iter().map(|(label, pts, fit)| Series { label: label.clone(), points: pts, fit: fit.as_ref() }).collect();
    harness::write_loglog_svg(title, &s, create(dir, name)?)
}

fn sweep(cfg: &Config) -> steklov_core::Result<u8> {
    let records = harness::epsilon_sweep(cfg)?;
    harness::write_records_csv(&records, create(&cfg.out_dir, "sweep.csv")?)?;
    let (verdicts, pass, series) = judge(&records, cfg.tau);
    write_json(&cfg.out_dir, "verdict.json", &json!(verdicts))?;
    write_svg(&cfg.out_dir, "sweep.svg", "gap |λ_ε − λ_0| against ε", &series)?;
    Ok(if pass { 0 } else { EXIT_VERDICT_FAIL })
}

fn fucik_cmd(cfg: &Config, weight_b: Option<&str>, convergence: bool) -> steklov_core::Result<u8> {
    let mesh = cfg.mesh()?;
    let domain = mesh.domain().unwrap_or(cfg.domain);
    let a = WeightSpec::new(cfg.weight_profile()?, cfg.epsilon)?;
    let b = match weight_b {
        Some(text) => WeightSpec::new(Profile::parse(text, domain)?, cfg.epsilon)?,
        None => a.clone(),
    };
    let opts = cfg.fucik_options();
    let curve = fucik::curve_points_with(&mesh, &a, &b, &cfg.s_grid, cfg.p, &opts, None)?;
    println!("{:>8} {:>14} {:>14} {:>14} {:>6}", "s", "alpha", "beta", "c", "moves");
    for q in &curve.points {
        println!("{:>8} {:>14.8} {:>14.8} {:>14.8} {:>6}", q.s, q.alpha, q.beta, q.c, q.iterations);
    }
    println!("monotone: {} (alpha violation {:.4}, beta violation {:.4})", curve.monotone, curve.alpha_violation, curve.beta_violation);
    fucik::write_curve_csv(&curve.points, create(&cfg.out_dir, "fucik.csv")?)?;
    let mut pass = curve.monotone;
    let mut summary = json!({
        "monotone": curve.monotone,
        "alpha_violation": curve.alpha_violation,
        "beta_violation": curve.beta_violation,
    });
    if convergence {
        let eps_list = cfg.eps.values(cfg.eps_min);
        let conv = fucik::curve_convergence(&mesh, &a, &b, &eps_list, &cfg.s_grid, cfg.p, &opts)?;
        let mut w = csv_writer(&cfg.out_dir, "convergence.csv")?;
        w.write_record(["eps", "s", "alpha_eps", "beta_eps", "alpha_0", "beta_0", "d_alpha", "d_beta"]).map_err(Error::from)?;
        for r in &conv.rows {
            w.write_record([r.eps, r.s, r.alpha_eps, r.beta_eps, r.alpha_0, r.beta_0, r.d_alpha, r.d_beta].map(|x| format!("{x:?}")))
                .map_err(Error::from)?;
        }
        w.flush()?;
        let mut rates = Vec::new();
        let mut series = Vec::new();
        for (s, fit) in &conv.beta_rates {
            match fit {
                Some(f) => {
                    let v = harness::verdict(f, cfg.p, cfg.tau);
                    println!("s={s}: |β_ε − β_0| slope {:.4} r2 {:.4}: {}", f.slope, f.r_squared, if v.pass { "PASS" } else { "FAIL" });
                    pass &= v.pass;
                    rates.push(json!({ "s": s, "slope": f.slope, "r_squared": f.r_squared, "threshold": v.threshold, "pass": v.pass }));
                }
                None => {
                    println!("s={s}: convergence fit refused: FAIL");
                    pass = false;
                    rates.push(json!({ "s": s, "pass": false }));
                }
            }
            let pts: Vec<(f64, f64)> = conv.rows.iter().filter(|r| r.s == *s && r.d_beta > 0.0).map(|r| (r.eps, r.d_beta)).collect();
            series.push((format!("s={s}"), pts, fit.clone()));
        }
        write_svg(&cfg.out_dir, "convergence.svg", "|β_ε − β_0| against ε", &series)?;
        summary["beta_rates"] = json!(rates);
    }
    write_json(&cfg.out_dir, "fucik.json", &summary)?;
    Ok(if pass { 0 } else { EXIT_VERDICT_FAIL })
}

fn csv_writer(dir: &Path, name: &str) -> steklov_core::Result<csv::Writer<File>> {
    csv::Writer::from_path(dir.join(name)).map_err(Error::from)
}

fn bounds_cmd(cfg: &Config, n: Option<usize>, fit: bool) -> steklov_core::Result<u8> {
    let mesh = if fit || n.is_none() { Some(cfg.mesh()?) } else { None };
    let dim = mesh.as_ref().map(|m| m.dim());
    let n = match (n, dim) {
        (Some(n), Some(d)) if fit && n != d => {
            return Err(Error::InvalidArgument(format!("--n {n} differs from the mesh dimension {d}")));
        }
        (Some(n), _) => n,
        (None, Some(d)) => d,
        (None, None) => unreachable!("the mesh is built when n is absent"),
    };
    let m = bounds::moser_exponents(n, cfg.p)?;
    println!("chi={} gamma={} beta={}", m.chi, m.gamma, m.beta);
    let mut out = json!({ "n": n, "p": cfg.p, "moser": m });
    if fit {
        let mesh = mesh.expect("built above");
        let dc = DomainConstants::fit(&mesh, cfg.p, cfg.probes, cfg.seed)?;
        let report = bounds::report(&dc)?;
        println!("vol={} perim={} c_tr={} c_tr_p={} lam1={}", dc.vol, dc.perim, dc.c_tr, dc.c_tr_p, dc.lam1_ref);
        println!(
            "K(lam1)={} K1={} K2={} rate_constant_main={} rate_constant_p2={} isoperimetric_ok={}",
            report.k_lam1, report.k1, report.k2, report.rate_constant_main, report.rate_constant_p2, report.isoperimetric_ok
        );
        out["report"] = serde_json::to_value(&report)?;
    }
    write_json(&cfg.out_dir, "bounds.json", &out)?;
    Ok(0)
}

fn neumann(cfg: &Config) -> steklov_core::Result<u8> {
    let mesh = cfg.mesh()?;
    let profile = cfg.weight_profile()?;
    let eps_list = cfg.eps.values(cfg.eps_min);
    let pts = harness::neumann_decay(&mesh, &profile, &eps_list)?;
    let mut w = csv_writer(&cfg.out_dir, "neumann.csv")?;
    w.write_record(["eps", "grad_norm"])?;
    for (e, g) in &pts {
        println!("eps={e:.6} grad_norm={g:.6e}");
        w.write_record([format!("{e:?}"), format!("{g:?}")])?;
    }
    w.flush()?;
    let fit = harness::fit_points(&pts);
    let (pass, entry) = match &fit {
        Ok(f) => {
            let threshold = 0.5 - cfg.tau;
            let pass = f.slope >= threshold;
            println!("slope {:.4} (threshold {threshold:.4}) r2 {:.4}: {}", f.slope, f.r_squared, if pass { "PASS" } else { "FAIL" });
            (pass, json!({ "slope": f.slope, "threshold": threshold, "pass": pass, "r_squared": f.r_squared }))
        }
        Err(e) => {
            println!("{e}: FAIL");
            (false, json!({ "pass": false, "error": e.to_string() }))
        }
    };
    write_json(&cfg.out_dir, "neumann.json", &entry)?;
    write_svg(&cfg.out_dir, "neumann.svg", "‖∇v_ε‖ against ε", &[("grad".into(), pts, fit.ok())])?;
    Ok(if pass { 0 } else { EXIT_VERDICT_FAIL })
}

fn report(cfg: &Config, inputs: &[PathBuf]) -> steklov_core::Result<u8> {
    let mut records = Vec::new();
    let mut sources = Vec::new();
    for path in inputs {
        let rs = harness::read_records_csv(File::open(path)?)?;
        sources.push(json!({ "file": path.display().to_string(), "records": rs.len() }));
        records.extend(rs);
    }
    let (verdicts, pass, series) = judge(&records, cfg.tau);
    write_json(&cfg.out_dir, "report.json", &json!({ "sources": sources, "verdicts": verdicts, "pass": pass }))?;
    write_svg(&cfg.out_dir, "report.svg", "gap |λ_ε − λ_0| against ε", &series)?;
    Ok(if pass { 0 } else { EXIT_VERDICT_FAIL })
}

fn run(cli: &Cli) -> steklov_core::Result<u8> {
    let cfg = resolve(&cli.settings)?;
    if cfg.threads > 0 {
        par::configure_threads(cfg.threads)?;
    }
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.ini"), cfg.to_ini_string())?;
    match &cli.command {
        Command::Solve => solve(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Fucik { weight_b, convergence } => fucik_cmd(&cfg, weight_b.as_deref(), *convergence),
        Command::Bounds { n, fit } => bounds_cmd(&cfg, *n, *fit),
        Command::Neumann => neumann(&cfg),
        Command::Report { inputs } => report(&cfg, inputs),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::InvalidWeight(_) | Error::Parse(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
