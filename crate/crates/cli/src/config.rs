//! TOML run configuration.
//!
//! Schema (all sections except `[problem]` optional):
//!
//! ```toml
//! [problem]
//! family = "heat-bdf"        # heat-bdf | heat-cn | heat-var-cn | frac-l1
//! m_plus_1 = 32              # grid parameter, h = (hi-lo)/(m+1); or `m = 31`
//! n = 32                     # time steps
//! t_final = 1.0
//! domain = [0.0, 1.0]
//! gamma = 0.5                # frac-l1 only
//! coefficient = "constant"   # "constant" | "example2" | "example4" | a number
//! dims = 2
//!
//! [solver]
//! tol = 1e-6
//! max_iter = 1000
//! residual_convention = "preconditioned-relative"   # | "preconditioned-absolute" | "true-relative"
//! record_history = true
//!
//! [preconditioner]
//! kind = "abac"              # abac | block-circulant | none
//! alpha = 1e-8
//!
//! [outputs]
//! table = "report.csv"
//! residual_history = "history.csv"
//! solution = "solution.csv"
//!
//! [bench]
//! grid = [[32, 32], [64, 32]]   # [N, m_plus_1] pairs
//! solvers = ["abac", "block-circulant", "none"]
//! iter_cap = 1000
//!
//! [spectrum]
//! alpha = 1e-4
//! delta = 0.5
//!
//! [oracle]
//! sizes = [[4, 1, 8], [3, 2, 8]]   # (m, dims, n) triples
//! ```

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use bltt_core::driver::PreconditionerChoice;
use bltt_core::minres::{MinresConfig, ResidualConvention};
use bltt_core::problems::{Coefficient, Family, ProblemSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub preconditioner: PrecSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub bench: Option<BenchSection>,
    #[serde(default)]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub family: String,
    pub m_plus_1: Option<usize>,
    pub m: Option<usize>,
    pub n: usize,
    #[serde(default = "default_t")]
    pub t_final: f64,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    pub gamma: Option<f64>,
    #[serde(default)]
    pub coefficient: Option<CoeffConfig>,
    #[serde(default = "default_dims")]
    pub dims: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CoeffConfig {
    Named(String),
    Value(f64),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_convention")]
    pub residual_convention: String,
    #[serde(default = "default_true")]
    pub record_history: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            residual_convention: default_convention(),
            record_history: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl Default for PrecSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            alpha: default_alpha(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub table: Option<String>,
    pub residual_history: Option<String>,
    pub solution: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub grid: Vec<[usize; 2]>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<String>,
    #[serde(default = "default_max_iter")]
    pub iter_cap: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub alpha: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub sizes: Vec<[usize; 3]>,
}

fn default_t() -> f64 {
    1.0
}
fn default_domain() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_dims() -> usize {
    2
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    1000
}
fn default_convention() -> String {
    "preconditioned-relative".into()
}
fn default_true() -> bool {
    true
}
fn default_kind() -> String {
    "abac".into()
}
fn default_alpha() -> f64 {
    1e-8
}
fn default_delta() -> f64 {
    0.5
}
fn default_solvers() -> Vec<String> {
    vec!["abac".into(), "block-circulant".into(), "none".into()]
}

pub fn load(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text)
        .with_context(|| format!("cannot parse config {}", path.display()))?;
    Ok(cfg)
}

impl ProblemSection {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        let family: Family = self
            .family
            .parse()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let m = match (self.m, self.m_plus_1) {
            (Some(m), None) => m,
            (None, Some(mp1)) if mp1 >= 2 => mp1 - 1,
            (None, Some(_)) => bail!("m_plus_1 must be at least 2"),
            (Some(_), Some(_)) => bail!("give either m or m_plus_1, not both"),
            (None, None) => bail!("problem needs m or m_plus_1"),
        };
        let coefficient = match &self.coefficient {
            None | Some(CoeffConfig::Named(_)) => match self.coefficient.as_ref() {
                Some(CoeffConfig::Named(name)) => match name.as_str() {
                    "constant" => Coefficient::Constant(1.0),
                    "example2" => Coefficient::Example2,
                    "example4" => Coefficient::Example4,
                    other => bail!("unknown coefficient '{other}'"),
                },
                _ => Coefficient::Constant(1.0),
            },
            Some(CoeffConfig::Value(v)) => Coefficient::Constant(*v),
        };
        Ok(ProblemSpec {
            family,
            m,
            num_steps: self.n,
            t_final: self.t_final,
            domain: (self.domain[0], self.domain[1]),
            gamma: self.gamma,
            coefficient,
            dims: self.dims,
        })
    }

    pub fn with_size(&self, n: usize, m_plus_1: usize) -> Self {
        Self {
            family: self.family.clone(),
            m_plus_1: Some(m_plus_1),
            m: None,
            n,
            t_final: self.t_final,
            domain: self.domain,
            gamma: self.gamma,
            coefficient: match &self.coefficient {
                None => None,
                Some(CoeffConfig::Named(s)) => Some(CoeffConfig::Named(s.clone())),
                Some(CoeffConfig::Value(v)) => Some(CoeffConfig::Value(*v)),
            },
            dims: self.dims,
        }
    }
}

impl SolverSection {
    pub fn to_minres(&self) -> Result<MinresConfig> {
        let convention = match self.residual_convention.as_str() {
            "preconditioned-relative" => ResidualConvention::PreconditionedRelative,
            "preconditioned-absolute" => ResidualConvention::PreconditionedAbsolute,
            "true-relative" => ResidualConvention::TrueRelative,
            other => bail!("unknown residual convention '{other}'"),
        };
        Ok(MinresConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            convention,
            record_history: self.record_history,
        })
    }
}

pub fn parse_choice(kind: &str, alpha: f64) -> Result<PreconditionerChoice> {
    match kind {
        "abac" => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                bail!("alpha must lie in (0, 1], got {alpha}");
            }
            Ok(PreconditionerChoice::Abac { alpha })
        }
        "block-circulant" => Ok(PreconditionerChoice::BlockCirculant),
        "none" => Ok(PreconditionerChoice::None),
        other => bail!("unknown preconditioner '{other}'"),
    }
}
