//! Scenario configuration files.
//!
//! TOML with one section per concern; dotted top-level keys such as
//! `problem.nu = 0.1` are equivalent to a `[problem]` table.
//!
//! Field values are a number, an expression string in `x`, `y`, `t`, or
//! `{ csv = "path", column = "rho" }`. Per-axis fields (`c`, `b`) and
//! per-component values (`gamma`, `beta`, bounds, `u0`) also accept an array
//! with one entry per axis.

use std::path::{Path, PathBuf};

use fpctrl::{
    ControlTrajectory, Discretization, Field, FluxScheme, Method, OptimizerConfig, Problem,
    ProblemSpec,
};
use serde::Deserialize;

use crate::error::CliError;
use crate::export;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Number(f64),
    Expr(String),
    Csv {
        csv: PathBuf,
        #[serde(default)]
        column: Option<String>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<V> {
    One(V),
    Each(Vec<V>),
}

impl<V: Clone> PerAxis<V> {
    fn expand(&self, d: usize, what: &str) -> Result<Vec<V>, CliError> {
        match self {
            PerAxis::One(v) => Ok(vec![v.clone(); d]),
            PerAxis::Each(vs) if vs.len() == d => Ok(vs.clone()),
            PerAxis::Each(vs) => Err(CliError::Config(format!(
                "{what}: expected {d} entries, got {}",
                vs.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub extent: Vec<f64>,
    pub nu: f64,
    pub final_time: f64,
    #[serde(default)]
    pub alpha_q: f64,
    #[serde(default)]
    pub alpha_omega: f64,
    #[serde(default = "one")]
    pub gamma: PerAxis<f64>,
    #[serde(default = "zero")]
    pub beta: PerAxis<f64>,
}

fn one() -> PerAxis<f64> {
    PerAxis::One(1.0)
}
fn zero() -> PerAxis<f64> {
    PerAxis::One(0.0)
}
fn zero_field() -> FieldValue {
    FieldValue::Number(0.0)
}
fn zero_axes() -> PerAxis<FieldValue> {
    PerAxis::One(zero_field())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    #[serde(default = "zero_axes")]
    pub c: PerAxis<FieldValue>,
    #[serde(default = "zero_axes")]
    pub b: PerAxis<FieldValue>,
    /// Defaults to the uniform density `1/|Ω|`.
    #[serde(default)]
    pub rho0: Option<FieldValue>,
    #[serde(default = "zero_field")]
    pub rho_q: FieldValue,
    #[serde(default = "zero_field")]
    pub rho_omega: FieldValue,
}

impl Default for FieldsSection {
    fn default() -> Self {
        Self {
            c: zero_axes(),
            b: zero_axes(),
            rho0: None,
            rho_q: zero_field(),
            rho_omega: zero_field(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub u_min: PerAxis<FieldValue>,
    pub u_max: PerAxis<FieldValue>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            u_min: PerAxis::One(FieldValue::Number(-1.0)),
            u_max: PerAxis::One(FieldValue::Number(1.0)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub cells: Vec<usize>,
    pub nt: usize,
    #[serde(default = "theta_default")]
    pub theta: f64,
    #[serde(default = "scheme_default")]
    pub flux_scheme: String,
}

fn theta_default() -> f64 {
    1.0
}
fn scheme_default() -> String {
    "central".into()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub method: Option<String>,
    pub max_iters: Option<usize>,
    pub tol_pg: Option<f64>,
    pub armijo_c: Option<f64>,
    pub backtrack: Option<f64>,
    pub step0: Option<f64>,
    pub spectral_step: Option<bool>,
    pub max_backtracks: Option<usize>,
    pub active_tol: Option<f64>,
    pub critical_tol: Option<f64>,
    pub cg_max: Option<usize>,
    pub cg_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Starting or evaluation control (default zero).
    pub u0: Option<PerAxis<FieldValue>>,
    /// When set, the tracking targets are replaced by the state of this
    /// control: `ρ_Q = G(u)` at every level and `ρ_Ω = G(u)(T)`.
    pub target: Option<PerAxis<FieldValue>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "eps_default")]
    pub eps: Vec<f64>,
    /// Step size at which the headline relative error is reported.
    #[serde(default = "reference_eps")]
    pub reference_eps: f64,
    #[serde(default = "hessian_eps")]
    pub hessian_eps: Vec<f64>,
    #[serde(default = "ten")]
    pub directions: usize,
}

fn eps_default() -> Vec<f64> {
    fpctrl::check::default_eps()
}
fn reference_eps() -> f64 {
    1e-5
}
fn hessian_eps() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4]
}
fn ten() -> usize {
    10
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            eps: eps_default(),
            reference_eps: reference_eps(),
            hessian_eps: hessian_eps(),
            directions: ten(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoncSection {
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default = "growth_samples")]
    pub growth_samples: usize,
    #[serde(default = "growth_eps")]
    pub growth_eps: f64,
}

fn samples() -> usize {
    200
}
fn growth_samples() -> usize {
    100
}
fn growth_eps() -> f64 {
    1e-2
}

impl Default for SoncSection {
    fn default() -> Self {
        Self {
            samples: samples(),
            growth_samples: growth_samples(),
            growth_eps: growth_eps(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub fields: FieldsSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    pub grid: GridSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub sonc: SoncSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub rng_seed: u64,
    /// Directory of the config file; relative CSV paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Where a tabulated field is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    Initial,
    Terminal,
    SpaceTime,
    Faces(usize),
    Steps,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::Config(format!("file not found: {}", path.display()))
            }
            _ => CliError::Config(format!("cannot read {}: {e}", path.display())),
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("parse error: {}", one_line(&e.to_string()))))?;
        cfg.check_finite()?;
        Ok(cfg)
    }

    fn check_finite(&self) -> Result<(), CliError> {
        let p = &self.problem;
        let mut nums = vec![
            p.nu,
            p.final_time,
            p.alpha_q,
            p.alpha_omega,
            self.grid.theta,
        ];
        nums.extend(&p.extent);
        for v in [&p.gamma, &p.beta] {
            match v {
                PerAxis::One(x) => nums.push(*x),
                PerAxis::Each(xs) => nums.extend(xs),
            }
        }
        if nums.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("numeric fields must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.problem.extent.len()
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn field(&self, v: &FieldValue, what: &str, place: Placement) -> Result<Field, CliError> {
        match v {
            FieldValue::Number(x) => Ok(Field::constant(*x)),
            FieldValue::Expr(s) => {
                Field::parse(s).map_err(|e| CliError::Config(format!("{what}: {e}")))
            }
            FieldValue::Csv { csv, column } => {
                let path = self.resolve(csv);
                let col = column
                    .clone()
                    .unwrap_or_else(|| default_column(place).into());
                let values = export::read_column(&path, &col)?;
                Ok(Field::Table(self.select_block(values, place, what)?))
            }
        }
    }

    /// Picks the rows that belong to `place` out of a possibly longer table
    /// (e.g. the first or last level of a density trajectory file).
    fn select_block(
        &self,
        v: Vec<f64>,
        place: Placement,
        what: &str,
    ) -> Result<Vec<f64>, CliError> {
        let n: usize = self.grid.cells.iter().product();
        let levels = self.grid.nt + 1;
        let expected = match place {
            Placement::Initial | Placement::Terminal => n,
            Placement::SpaceTime => n * levels,
            Placement::Steps => self.grid.nt,
            Placement::Faces(axis) => {
                let mut m = self.grid.cells.clone();
                m[axis] += 1;
                m.iter().product()
            }
        };
        match place {
            Placement::Initial if v.len() > n && v.len().is_multiple_of(n) => Ok(v[..n].to_vec()),
            Placement::Terminal if v.len() > n && v.len().is_multiple_of(n) => {
                Ok(v[v.len() - n..].to_vec())
            }
            _ if v.len() == expected => Ok(v),
            _ => Err(CliError::Config(format!(
                "{what}: table has {} rows, expected {expected}",
                v.len()
            ))),
        }
    }

    fn axis_fields(
        &self,
        v: &PerAxis<FieldValue>,
        what: &str,
        place: impl Fn(usize) -> Placement,
    ) -> Result<Vec<Field>, CliError> {
        v.expand(self.dim(), what)?
            .iter()
            .enumerate()
            .map(|(i, f)| self.field(f, &format!("{what}[{}]", i + 1), place(i)))
            .collect()
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let d = self.dim();
        let p = &self.problem;
        let mut spec = ProblemSpec::diffusion(p.nu, &p.extent, p.final_time);
        let f = &self.fields;
        spec.drift = self.axis_fields(&f.c, "fields.c", Placement::Faces)?;
        spec.control_field = self.axis_fields(&f.b, "fields.b", Placement::Faces)?;
        if let Some(r) = &f.rho0 {
            spec.rho0 = self.field(r, "fields.rho0", Placement::Initial)?;
        }
        spec.rho_q = self.field(&f.rho_q, "fields.rho_q", Placement::SpaceTime)?;
        spec.rho_omega = self.field(&f.rho_omega, "fields.rho_omega", Placement::Terminal)?;
        spec.alpha_q = p.alpha_q;
        spec.alpha_omega = p.alpha_omega;
        spec.gamma = p.gamma.expand(d, "problem.gamma")?;
        spec.beta = p.beta.expand(d, "problem.beta")?;
        spec.u_min = self.axis_fields(&self.bounds.u_min, "bounds.u_min", |_| Placement::Steps)?;
        spec.u_max = self.axis_fields(&self.bounds.u_max, "bounds.u_max", |_| Placement::Steps)?;
        Ok(spec)
    }

    pub fn discretization(&self, second_order: bool) -> Result<Discretization, CliError> {
        let scheme: FluxScheme = self
            .grid
            .flux_scheme
            .parse()
            .map_err(|e: fpctrl::Error| CliError::Config(e.to_string()))?;
        Ok(Discretization {
            cells: self.grid.cells.clone(),
            nt: self.grid.nt,
            theta: self.grid.theta,
            scheme,
            second_order,
        })
    }

    /// Builds the discrete problem, including generated targets.
    pub fn problem(&self, second_order: bool) -> Result<Problem, CliError> {
        let spec = self.spec()?;
        let disc = self.discretization(second_order)?;
        let mut problem = Problem::new(&spec, &disc)?;
        if let Some(target) = &self.control.target {
            let u = self.control_from(&problem, target, "control.target")?;
            problem = problem.with_targets_from(&u)?;
        }
        Ok(problem)
    }

    fn control_from(
        &self,
        problem: &Problem,
        v: &PerAxis<FieldValue>,
        what: &str,
    ) -> Result<ControlTrajectory, CliError> {
        let d = problem.n_controls();
        // a control CSV holds every component in one file
        if let PerAxis::One(FieldValue::Csv { csv, column: None }) = v {
            let path = self.resolve(csv);
            let comps = (1..=d)
                .map(|i| export::read_column(&path, &format!("u_{i}")))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(ControlTrajectory::from_components(&comps, problem.dt())?);
        }
        let fields = self.axis_fields(v, what, |_| Placement::Steps)?;
        let comps = fields
            .iter()
            .map(|f| f.sample_steps(problem.nt(), problem.dt()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ControlTrajectory::from_components(&comps, problem.dt())?)
    }

    /// Configured `u0`, or zero.
    pub fn initial_control(&self, problem: &Problem) -> Result<ControlTrajectory, CliError> {
        match &self.control.u0 {
            Some(v) => self.control_from(problem, v, "control.u0"),
            None => Ok(problem.zero_control()),
        }
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig, CliError> {
        let o = &self.optimizer;
        let mut c = OptimizerConfig::default();
        if let Some(m) = &o.method {
            c.method = m
                .parse::<Method>()
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { c.$f = v; } )* };
        }
        set!(
            max_iters,
            tol_pg,
            armijo_c,
            backtrack,
            step0,
            spectral_step,
            max_backtracks,
            active_tol,
            critical_tol,
            cg_max,
            cg_tol
        );
        c.validate()?;
        Ok(c)
    }
}

fn default_column(place: Placement) -> &'static str {
    match place {
        Placement::Steps => "u_1",
        _ => "rho",
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
problem.extent = [1.0]
problem.nu = 0.1
problem.final_time = 1.0
grid.cells = [8]
grid.nt = 4
"#;

    #[test]
    fn dotted_and_table_forms_agree() {
        let a = ScenarioConfig::parse(BASE).unwrap();
        let b = ScenarioConfig::parse(
            "[problem]\nextent = [1.0]\nnu = 0.1\nfinal_time = 1.0\n[grid]\ncells = [8]\nnt = 4\n",
        )
        .unwrap();
        assert_eq!(a.problem.nu, b.problem.nu);
        assert_eq!(a.grid.cells, b.grid.cells);
    }

    #[test]
    fn field_forms() {
        let cfg = ScenarioConfig::parse(&format!(
            "{BASE}fields.b = \"x*(1-x)\"\nfields.rho_q = 2.5\nbounds.u_min = \"-1 - t\"\nbounds.u_max = [3]\n"
        ))
        .unwrap();
        let p = cfg.problem(false).unwrap();
        assert_eq!(p.u_min.get(0, 3), -2.0);
        assert_eq!(p.u_max.get(0, 0), 3.0);
        assert!(p.rho_q.as_slice().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ScenarioConfig::parse(&format!("{BASE}problem.nuu = 1\n")).unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
    }

    #[test]
    fn wrong_axis_count_is_reported() {
        let cfg = ScenarioConfig::parse(&format!("{BASE}problem.gamma = [1, 2]\n")).unwrap();
        assert!(cfg.spec().is_err());
    }

    #[test]
    fn bad_method_and_scheme() {
        let cfg = ScenarioConfig::parse(&format!("{BASE}optimizer.method = \"lbfgs\"\n")).unwrap();
        assert!(cfg.optimizer().is_err());
        let cfg = ScenarioConfig::parse(
            &BASE.replace("grid.nt = 4", "grid.nt = 4\ngrid.flux_scheme = \"weno\""),
        )
        .unwrap();
        assert!(cfg.discretization(false).is_err());
    }
}
