//! Periodic boundary weight profiles ρ and their rescalings ρ_ε(x) = ρ(x/ε).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::{DomainKind, Mesh};
use crate::par::{self, Exec};
use crate::quadrature::{self, QuadOptions};
use crate::{Error, Result};

/// A unit-periodic weight profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + amplitude·cos(2π wave·y)`.
    Cosine {
        amplitude: f64,
        base: f64,
        wave: [i32; 3],
    },
    /// `low` where `Σ floor(2 y_i)` is even, `high` elsewhere.
    Checkerboard {
        low: f64,
        high: f64,
    },
    /// Uniform samples of one period along `wave·y`, linearly interpolated.
    Table {
        samples: Vec<f64>,
        wave: [i32; 3],
        source: String,
    },
}

/// Default cosine wave vector per domain: the diagonal (1, 1) in the plane of
/// the first two axes on the square and cube, axis-aligned on the disk.
pub fn default_wave(domain: DomainKind) -> [i32; 3] {
    match domain {
        DomainKind::Square => [1, 1, 0],
        DomainKind::Cube => [1, 1, 0],
        DomainKind::Disk => [1, 0, 0],
    }
}

impl Profile {
    pub fn constant(value: f64) -> Profile {
        Profile::Constant { value }
    }

    pub fn cosine(amplitude: f64, base: f64, wave: [i32; 3]) -> Profile {
        Profile::Cosine { amplitude, base, wave }
    }

    pub fn checkerboard(low: f64, high: f64) -> Profile {
        Profile::Checkerboard { low, high }
    }

    /// Parses `constant:c`, `cosine[:a,c[,w1,w2[,w3]]]`,
    /// `checkerboard[:low,high]` or `table:path[@w1,w2[,w3]]`.
    pub fn parse(text: &str, domain: DomainKind) -> Result<Profile> {
        let text = text.trim();
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k.trim().to_ascii_lowercase(), a.trim()),
            None => (text.to_ascii_lowercase(), ""),
        };
        let nums = |s: &str| -> Result<Vec<f64>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{t}`: {e}")))).collect()
        };
        let wave_of = |v: &[f64]| -> Result<[i32; 3]> {
            let mut w = [0i32; 3];
            for (i, x) in v.iter().enumerate().take(3) {
                if x.fract() != 0.0 {
                    return Err(Error::Parse(format!("wave component {x} is not an integer")));
                }
                w[i] = *x as i32;
            }
            Ok(w)
        };
        match kind.as_str() {
            "constant" => {
                let v = nums(args)?;
                Ok(Profile::constant(*v.first().unwrap_or(&1.0)))
            }
            "cosine" => {
                let v = nums(args)?;
                let (a, c) = match v.len() {
                    0 => (1.0, 2.0),
                    1 => return Err(Error::Parse("cosine needs amplitude and base".into())),
                    _ => (v[0], v[1]),
                };
                let wave = if v.len() > 2 { wave_of(&v[2..])? } else { default_wave(domain) };
                Ok(Profile::cosine(a, c, wave))
            }
            "checkerboard" => {
                let v = nums(args)?;
                match v.len() {
                    0 => Ok(Profile::checkerboard(1.0, 3.0)),
                    2 => Ok(Profile::checkerboard(v[0], v[1])),
                    _ => Err(Error::Parse("checkerboard needs two values".into())),
                }
            }
            "table" => {
                let (path, wave) = match args.split_once('@') {
                    Some((p, w)) => (p.trim(), wave_of(&nums(w)?)?),
                    None => (args, default_wave(domain)),
                };
                if path.is_empty() {
                    return Err(Error::Parse("table profile needs a file path".into()));
                }
                let samples = read_table(Path::new(path))?;
                Ok(Profile::Table { samples, wave, source: path.to_string() })
            }
            other => Err(Error::Parse(format!("unknown weight profile `{other}`"))),
        }
    }

    /// Inverse of [`Profile::parse`].
    pub fn to_spec_string(&self) -> String {
        let w = |w: &[i32; 3]| format!("{},{},{}", w[0], w[1], w[2]);
        match self {
            Profile::Constant { value } => format!("constant:{value:?}"),
            Profile::Cosine { amplitude, base, wave } => format!("cosine:{amplitude:?},{base:?},{}", w(wave)),
            Profile::Checkerboard { low, high } => format!("checkerboard:{low:?},{high:?}"),
            Profile::Table { wave, source, .. } => format!("table:{source}@{}", w(wave)),
        }
    }

    /// Profile multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Profile {
        match self {
            Profile::Constant { value } => Profile::constant(c * value),
            Profile::Cosine { amplitude, base, wave } => Profile::cosine(c * amplitude, c * base, *wave),
            Profile::Checkerboard { low, high } => Profile::checkerboard(c * low, c * high),
            Profile::Table { samples, wave, source } => {
                Profile::Table { samples: samples.iter().map(|s| c * s).collect(), wave: *wave, source: source.clone() }
            }
        }
    }

    /// ρ(y) at a point of the unit cell (any real y; the profile is periodic).
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Cosine { amplitude, base, wave } => base + amplitude * (2.0 * PI * phase(wave, y)).cos(),
            Profile::Checkerboard { low, high } => {
                let s: i64 = y.iter().map(|v| (2.0 * v).floor() as i64).sum();
                if s.rem_euclid(2) == 0 {
                    *low
                } else {
                    *high
                }
            }
            Profile::Table { samples, wave, .. } => {
                let t = phase(wave, y).rem_euclid(1.0);
                let n = samples.len() - 1;
                let pos = t * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let frac = pos - i as f64;
                samples[i] + frac * (samples[i + 1] - samples[i])
            }
        }
    }

    /// Analytic bounds (min, max) of the profile.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Profile::Constant { value } => (*value, *value),
            Profile::Cosine { amplitude, base, wave } => {
                if wave.iter().all(|&w| w == 0) {
                    (base + amplitude, base + amplitude)
                } else {
                    (base - amplitude.abs(), base + amplitude.abs())
                }
            }
            Profile::Checkerboard { low, high } => (low.min(*high), low.max(*high)),
            Profile::Table { samples, .. } => {
                samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)))
            }
        }
    }

    /// Torus average of the profile.
    pub fn mean(&self) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Cosine { amplitude, base, wave } => {
                if wave.iter().all(|&w| w == 0) {
                    base + amplitude
                } else {
                    *base
                }
            }
            Profile::Checkerboard { low, high } => 0.5 * (low + high),
            Profile::Table { samples, wave, .. } => {
                if wave.iter().all(|&w| w == 0) {
                    return samples[0];
                }
                // exact for the piecewise-linear interpolant
                let n = samples.len() - 1;
                samples.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / n as f64
            }
        }
    }
}

fn phase(wave: &[i32; 3], y: &[f64]) -> f64 {
    y.iter().zip(wave.iter()).map(|(yi, &wi)| yi * wi as f64).sum()
}

/// Reads a custom profile table: a `samples d` header (only `d = 1` is
/// supported) followed by one sample per line. The first and last samples
/// must coincide.
pub fn read_table(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty profile table".into()))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("samples") {
        return Err(Error::Parse(format!("expected `samples d` header, found `{header}`")));
    }
    let d: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse("bad `samples` header".into()))?;
    if d != 1 {
        return Err(Error::InvalidWeight(format!("only one tensor direction is supported, got {d}")));
    }
    let samples: Vec<f64> = lines.map(|l| l.parse::<f64>().map_err(|e| Error::Parse(format!("`{l}`: {e}")))).collect::<Result<_>>()?;
    if samples.len() < 2 {
        return Err(Error::InvalidWeight("a profile table needs at least two samples".into()));
    }
    if samples[0] != samples[samples.len() - 1] {
        return Err(Error::InvalidWeight(format!(
            "table is not periodic: first sample {} differs from last {}",
            samples[0],
            samples[samples.len() - 1]
        )));
    }
    Ok(samples)
}

/// A validated weight: profile, scale ε, bounds ρ± and mean ρ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    profile: Profile,
    epsilon: f64,
    rho_minus: f64,
    rho_plus: f64,
    rho0: f64,
}

impl WeightSpec {
    pub fn new(profile: Profile, epsilon: f64) -> Result<WeightSpec> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside (0, 1]")));
        }
        let (lo, hi) = profile.bounds();
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::InvalidWeight(format!("profile bounds [{lo}, {hi}] are not positive and finite")));
        }
        let rho0 = profile.mean();
        Ok(WeightSpec { profile, epsilon, rho_minus: lo, rho_plus: hi, rho0 })
    }

    /// Constant weight `c` (ε is irrelevant and set to 1).
    pub fn constant(c: f64) -> Result<WeightSpec> {
        WeightSpec::new(Profile::constant(c), 1.0)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rho_minus(&self) -> f64 {
        self.rho_minus
    }

    pub fn rho_plus(&self) -> f64 {
        self.rho_plus
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<WeightSpec> {
        WeightSpec::new(self.profile.clone(), epsilon)
    }

    pub fn scaled(&self, c: f64) -> Result<WeightSpec> {
        WeightSpec::new(self.profile.scaled(c), self.epsilon)
    }

    /// The constant weight ρ₀.
    pub fn homogenized(&self) -> WeightSpec {
        WeightSpec {
            profile: Profile::constant(self.rho0),
            epsilon: self.epsilon,
            rho_minus: self.rho0,
            rho_plus: self.rho0,
            rho0: self.rho0,
        }
    }

    /// ρ_ε(x) = ρ(x/ε).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.profile {
            Profile::Constant { value } => *value,
            p => {
                let mut y = [0.0; 3];
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi / self.epsilon;
                }
                p.eval(&y[..x.len()])
            }
        }
    }

    pub fn is_oscillating(&self) -> bool {
        self.rho_minus != self.rho_plus
    }

    /// True for smooth profiles that must be resolved by sub-segmentation.
    pub fn needs_subdivision(&self) -> bool {
        matches!(self.profile, Profile::Cosine { .. }) && self.is_oscillating()
    }

    /// Plane families `n·x = j·spacing` on which the weight is not smooth.
    pub fn jump_planes(&self, dim: usize) -> Vec<([f64; 3], f64)> {
        match &self.profile {
            Profile::Checkerboard { low, high } if low != high => (0..dim)
                .map(|i| {
                    let mut n = [0.0; 3];
                    n[i] = 1.0;
                    (n, 0.5 * self.epsilon)
                })
                .collect(),
            Profile::Table { samples, wave, .. } if self.is_oscillating() => {
                let n = [wave[0] as f64, wave[1] as f64, if dim == 3 { wave[2] as f64 } else { 0.0 }];
                vec![(n, self.epsilon / (samples.len() - 1) as f64)]
            }
            _ => Vec::new(),
        }
    }

    /// Smallest distance between neighbouring jump planes.
    pub fn jump_spacing(&self) -> f64 {
        self.jump_planes(3)
            .iter()
            .map(|(n, s)| s / (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt().max(1e-300))
            .fold(f64::INFINITY, f64::min)
    }
}

/// ρ_ε(x).
pub fn eval_weight(spec: &WeightSpec, x: &[f64]) -> f64 {
    spec.eval(x)
}

/// Torus average ρ₀ of the profile.
pub fn homogenized_mean(spec: &WeightSpec) -> f64 {
    spec.profile.mean()
}

/// M_ε = |∂Ω|⁻¹ ∫_{∂Ω} (ρ₀ − ρ_ε) dH with the ε-resolving boundary rule.
pub fn boundary_mean_deviation(mesh: &Mesh, spec: &WeightSpec) -> Result<f64> {
    boundary_mean_deviation_with(mesh, spec, &QuadOptions::default())
}

pub fn boundary_mean_deviation_with(mesh: &Mesh, spec: &WeightSpec, opts: &QuadOptions) -> Result<f64> {
    if !spec.is_oscillating() {
        return Ok(0.0);
    }
    quadrature::check_resolution(mesh, spec, opts)?;
    let rho0 = spec.rho0();
    let per_facet = par::map_range(Exec::Parallel, mesh.n_boundary_facets(), |f| {
        let mut pts = Vec::new();
        quadrature::facet_points(mesh, f, spec, opts, &mut pts);
        pts.iter().map(|q| q.w * (rho0 - q.rho)).sum::<f64>()
    });
    Ok(per_facet.iter().sum::<f64>() / mesh.boundary_measure())
}
