//! Experiment configuration: a flat `key = value` file with sections.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use serde::{Deserialize, Serialize};

use crate::eigen_linear::{EigenMethod, LinearOptions};
use crate::eigen_plap::SolverOptions;
use crate::fucik::FucikOptions;
use crate::mesh::{self, DomainKind, Mesh};
use crate::weights::{Profile, WeightSpec};
use crate::{Error, Result};

/// Denominators m of the ε sequences.
pub const EPS_DENOMINATORS: [usize; 7] = [8, 12, 16, 24, 32, 48, 64];

/// The golden ratio φ.
pub const GOLDEN: f64 = 1.618_033_988_749_895;

/// Which ε values a sweep visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpsChoice {
    /// ε = 1/m.
    Resonant,
    /// ε = 1/(m + φ − 1).
    Generic,
    List(Vec<f64>),
}

impl EpsChoice {
    /// Decreasing values down to `eps_min`. For the lattice sequences the
    /// cut is applied to the denominator: m ≤ 1/eps_min.
    pub fn values(&self, eps_min: f64) -> Vec<f64> {
        let m_max = 1.0 / eps_min * (1.0 + 1e-12);
        let mut v: Vec<f64> = match self {
            EpsChoice::Resonant => EPS_DENOMINATORS.iter().filter(|&&m| m as f64 <= m_max).map(|&m| 1.0 / m as f64).collect(),
            EpsChoice::Generic => {
                EPS_DENOMINATORS.iter().filter(|&&m| m as f64 <= m_max).map(|&m| 1.0 / (m as f64 + GOLDEN - 1.0)).collect()
            }
            EpsChoice::List(l) => l.iter().cloned().filter(|&e| e >= eps_min * (1.0 - 1e-12)).collect(),
        };
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

impl FromStr for EpsChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resonant" => Ok(EpsChoice::Resonant),
            "generic" => Ok(EpsChoice::Generic),
            other => {
                let l = other
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("ε value `{t}`: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                if l.is_empty() || l.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                    return Err(Error::InvalidArgument("ε values must lie in (0, 1]".into()));
                }
                Ok(EpsChoice::List(l))
            }
        }
    }
}

impl fmt::Display for EpsChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsChoice::Resonant => write!(f, "resonant"),
            EpsChoice::Generic => write!(f, "generic"),
            EpsChoice::List(l) => write!(f, "{}", join(l)),
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

/// Every setting of a run. Missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub domain: DomainKind,
    /// Grid divisions (square, cube) or refinement level (disk) of the fine mesh.
    pub size: usize,
    /// Optional mesh file replacing the built-in generator.
    pub mesh_file: Option<PathBuf>,
    /// Weight profile in the `--weight` syntax.
    pub profile: String,
    /// ε of single solves.
    pub epsilon: f64,
    pub p: f64,
    pub k: usize,
    pub eps: EpsChoice,
    pub eps_min: f64,
    pub tau: f64,
    pub method: EigenMethod,
    pub solver: SolverOptions,
    pub s_grid: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
    /// Worker threads; 0 keeps the default pool.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            domain: DomainKind::Square,
            size: 64,
            mesh_file: None,
            profile: "cosine".into(),
            epsilon: 1.0,
            p: 2.0,
            k: 1,
            eps: EpsChoice::Generic,
            eps_min: 1.0 / 64.0,
            tau: 0.05,
            method: EigenMethod::Auto,
            solver: SolverOptions::default(),
            s_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            probes: 100,
            seed: 42,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| Error::Parse(format!("`{key}` = `{v}`: {e}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse::<f64>(key, t)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("`{key}` = `{v}` is not a boolean"))),
    }
}

impl Config {
    /// Applies one `section.key = value` setting (the section may be omitted).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let bare = key.rsplit('.').next().unwrap_or(key);
        let v = value.trim();
        match bare {
            "domain" => self.domain = v.parse()?,
            "size" => self.size = parse(bare, v)?,
            "mesh_file" => self.mesh_file = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "profile" | "weight" => self.profile = v.to_string(),
            "epsilon" => self.epsilon = parse(bare, v)?,
            "p" => self.p = parse(bare, v)?,
            "k" => self.k = parse(bare, v)?,
            "eps" => self.eps = v.parse()?,
            "eps_min" => self.eps_min = parse(bare, v)?,
            "tau" => self.tau = parse(bare, v)?,
            "method" => self.method = v.parse()?,
            "max_iters" => self.solver.max_iters = parse(bare, v)?,
            "tol_rel" => self.solver.tol_rel = parse(bare, v)?,
            "tol_grad" => self.solver.tol_grad = parse(bare, v)?,
            "armijo_c" => self.solver.armijo_c = parse(bare, v)?,
            "backtrack_factor" => self.solver.backtrack_factor = parse(bare, v)?,
            "window" => self.solver.window = parse(bare, v)?,
            "conjugate" => self.solver.conjugate = parse_bool(bare, v)?,
            "s_grid" => self.s_grid = parse_list(bare, v)?,
            "probes" => self.probes = parse(bare, v)?,
            "seed" => self.seed = parse(bare, v)?,
            "threads" => self.threads = parse(bare, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Parse(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    pub fn from_ini_str(text: &str) -> Result<Config> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Parse(format!("configuration: {e}")))?;
        let mut cfg = Config::default();
        for (_, props) in ini.iter() {
            for (k, v) in props.iter() {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Config> {
        Config::from_ini_str(&std::fs::read_to_string(path)?)
    }

    /// Fully resolved configuration text; reading it back gives `self`.
    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        ini.with_section(Some("problem"))
            .set("domain", self.domain.name())
            .set("size", self.size.to_string())
            .set("mesh_file", self.mesh_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default())
            .set("profile", &self.profile)
            .set("epsilon", format!("{:?}", self.epsilon))
            .set("p", format!("{:?}", self.p))
            .set("k", self.k.to_string());
        ini.with_section(Some("sweep"))
            .set("eps", self.eps.to_string())
            .set("eps_min", format!("{:?}", self.eps_min))
            .set("tau", format!("{:?}", self.tau));
        ini.with_section(Some("solver"))
            .set("method", method_name(self.method))
            .set("max_iters", self.solver.max_iters.to_string())
            .set("tol_rel", format!("{:?}", self.solver.tol_rel))
            .set("tol_grad", format!("{:?}", self.solver.tol_grad))
            .set("armijo_c", format!("{:?}", self.solver.armijo_c))
            .set("backtrack_factor", format!("{:?}", self.solver.backtrack_factor))
            .set("window", self.solver.window.to_string())
            .set("conjugate", self.solver.conjugate.to_string());
        ini.with_section(Some("fucik")).set("s_grid", join(&self.s_grid));
        ini.with_section(Some("run"))
            .set("probes", self.probes.to_string())
            .set("seed", self.seed.to_string())
            .set("threads", self.threads.to_string())
            .set("out_dir", self.out_dir.display().to_string());
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("configuration text is UTF-8")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::InvalidArgument(format!("exponent p = {} must exceed 1", self.p)));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) || !(self.eps_min > 0.0) {
            return Err(Error::InvalidArgument("ε values must lie in (0, 1]".into()));
        }
        let max_tau = (self.p - 1.0) / self.p;
        if !(self.tau > 0.0 && self.tau < max_tau) {
            return Err(Error::InvalidArgument(format!("tau must lie in (0, {max_tau})")));
        }
        if self.s_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("s-grid values must be positive".into()));
        }
        self.solver.validate()
    }

    pub fn weight_profile(&self) -> Result<Profile> {
        Profile::parse(&self.profile, self.domain)
    }

    /// The weight at the single-solve scale `epsilon`.
    pub fn weight(&self) -> Result<WeightSpec> {
        WeightSpec::new(self.weight_profile()?, self.epsilon)
    }

    /// Linear eigensolver options implied by `method`.
    pub fn linear_options(&self) -> LinearOptions {
        LinearOptions { method: self.method, ..LinearOptions::default() }
    }

    /// Fučík options implied by `method` and the descent settings.
    pub fn fucik_options(&self) -> FucikOptions {
        let mut opts = FucikOptions { plap: self.solver, ..FucikOptions::default() };
        opts.linear.method = self.method;
        opts
    }

    /// The fine mesh.
    pub fn mesh(&self) -> Result<Mesh> {
        if let Some(path) = &self.mesh_file {
            return Mesh::read_text(path);
        }
        build_mesh(self.domain, self.size)
    }

    /// The fine mesh and the mesh of half its resolution.
    pub fn mesh_pair(&self) -> Result<(Mesh, Mesh)> {
        if self.mesh_file.is_some() {
            return Err(Error::InvalidArgument("mesh pairs need a built-in domain".into()));
        }
        let coarse = match self.domain {
            DomainKind::Disk => self.size.checked_sub(1),
            _ => (self.size.is_multiple_of(2) && self.size >= 2).then_some(self.size / 2),
        }
        .ok_or_else(|| Error::InvalidArgument(format!("size {} has no coarser companion mesh", self.size)))?;
        Ok((build_mesh(self.domain, self.size)?, build_mesh(self.domain, coarse)?))
    }
}

fn method_name(m: EigenMethod) -> &'static str {
    match m {
        EigenMethod::Auto => "auto",
        EigenMethod::Dense => "dense",
        EigenMethod::Krylov => "krylov",
    }
}

/// Built-in mesh of `domain` with `size` divisions or refinement levels.
pub fn build_mesh(domain: DomainKind, size: usize) -> Result<Mesh> {
    match domain {
        DomainKind::Square => mesh::build_square_mesh(size),
        DomainKind::Cube => mesh::build_cube_mesh(size),
        DomainKind::Disk => mesh::build_disk_mesh(size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = Config::default();
        cfg.set("problem.domain", "cube").unwrap();
        cfg.set("p", "3").unwrap();
        cfg.set("eps", "0.125,0.0625").unwrap();
        cfg.set("tol_grad", "1e-9").unwrap();
        let text = cfg.to_ini_string();
        assert_eq!(Config::from_ini_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Config::from_ini_str("[problem]\nshape = round\n").is_err());
    }

    #[test]
    fn generic_sequence() {
        let v = EpsChoice::Generic.values(1.0 / 24.0);
        assert_eq!(v.len(), 4);
        assert!((v[0] - 1.0 / (8.0 + GOLDEN - 1.0)).abs() < 1e-15);
        let r = EpsChoice::Resonant.values(1.0 / 64.0);
        assert_eq!(r.len(), 7);
    }
}
