//! JSON run configuration: `{instance, solver, run, checks}`, unknown keys rejected.

use std::path::Path;
use std::sync::Arc;

use moprox::linalg::Matrix;
use moprox::problem::{LogSumExpReg, Quadratic};
use moprox::zoo::{generate, random_start};
use moprox::{
    InstanceSpec, NonsmoothTerm, ProblemF64, ProblemInstance, SmoothObjective, SolverConfigF64,
    Variant,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSection {
    Generate(InstanceSpec),
    Inline(InlineProblem),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    pub mu: f64,
    pub objectives: Vec<InlineObjective>,
    #[serde(default)]
    pub nonsmooth: InlineNonsmooth,
    pub lip_grad: Option<f64>,
    pub lip_hess: Option<f64>,
}

/// `f(x) = ½ xᵀA x − bᵀx + c` or regularized log-sum-exp.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineObjective {
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    LogSumExp {
        rows: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        mu: f64,
        center: Vec<f64>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InlineNonsmooth {
    #[default]
    Zero,
    L1(f64),
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    #[default]
    Npgmo,
    Pgmo,
}

/// Every field defaults to the library default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub max_outer: Option<usize>,
    pub tol_gap: Option<f64>,
    pub max_dual_iters: Option<usize>,
    pub max_inner_iters: Option<usize>,
    pub max_halvings: Option<usize>,
    #[serde(default)]
    pub variant: VariantName,
    /// PGMO metric `ℓ I`; defaults to the instance's gradient Lipschitz bound.
    pub ell: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Point(Vec<f64>),
    Random {
        seed: Option<u64>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Explicit point, or `{seed, scale}` for a seeded normal start.
    pub x0: Option<StartSpec>,
    /// Instance seeds for `bench` and `check`; defaults to the instance seed.
    pub seeds: Option<Vec<u64>>,
    /// Condition-number sweep for `bench`; defaults to the instance `cond`.
    pub conds: Option<Vec<f64>>,
    /// Random starts per instance for `quadratic_termination`.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Probe points per iteration for `fundamental_ineq_quadratic`.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Stopping tolerance of the runs behind the rate checks.
    #[serde(default = "default_rate_eps")]
    pub rate_eps: f64,
    #[serde(default = "default_trace")]
    pub trace_csv: String,
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_bench")]
    pub bench_csv: String,
}

fn default_starts() -> usize {
    1
}

fn default_probes() -> usize {
    20
}

fn default_rate_eps() -> f64 {
    1e-12
}

fn default_trace() -> String {
    "trace.csv".into()
}

fn default_report() -> String {
    "report.json".into()
}

fn default_bench() -> String {
    "bench.csv".into()
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            x0: None,
            seeds: None,
            conds: None,
            starts: default_starts(),
            probes: default_probes(),
            rate_eps: default_rate_eps(),
            trace_csv: default_trace(),
            report: default_report(),
            bench_csv: default_bench(),
        }
    }
}

pub const CHECKS: [&str; 5] = [
    "quadratic_termination",
    "tau_bracket",
    "order_fit",
    "fundamental_ineq_quadratic",
    "lemma32_bound",
];

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn field(section: &str, e: moprox::Error) -> CliError {
    match e {
        moprox::Error::Config(msg) => CliError::Config(format!("{section}.{msg}")),
        other => CliError::Config(format!("{section}: {other}")),
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if let InstanceSection::Generate(spec) = &self.instance {
            spec.validate().map_err(|e| field("instance.generate", e))?;
        }
        self.solver
            .base()
            .validate()
            .map_err(|e| field("solver", e))?;
        if let Some(ell) = self.solver.ell {
            if !(ell > 0.0 && ell.is_finite()) {
                return Err(CliError::Config(format!(
                    "solver.ell: must be > 0, got {ell}"
                )));
            }
        }
        if let Some(name) = self.checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
            return Err(CliError::Config(format!(
                "checks: unknown check {name:?}, expected one of {}",
                CHECKS.join(", ")
            )));
        }
        let run = &self.run;
        if run.seeds.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::Config("run.seeds: sweep list is empty".into()));
        }
        if let Some(conds) = &run.conds {
            if conds.is_empty() {
                return Err(CliError::Config("run.conds: sweep list is empty".into()));
            }
            if let Some(c) = conds.iter().find(|c| !(**c >= 1.0 && c.is_finite())) {
                return Err(CliError::Config(format!("run.conds: must be ≥ 1, got {c}")));
            }
        }
        if run.starts == 0 {
            return Err(CliError::Config("run.starts: must be ≥ 1".into()));
        }
        if run.rate_eps.is_nan() || run.rate_eps <= 0.0 {
            return Err(CliError::Config(format!(
                "run.rate_eps: must be > 0, got {}",
                run.rate_eps
            )));
        }
        if let Some(StartSpec::Random { scale, .. }) = &run.x0 {
            if !(*scale >= 0.0 && scale.is_finite()) {
                return Err(CliError::Config(format!(
                    "run.x0.scale: must be ≥ 0, got {scale}"
                )));
            }
        }
        Ok(())
    }

    /// Applies `--seed-override` to the instance, the seeded start and the seed list.
    pub fn override_seed(&mut self, seed: u64) {
        if let InstanceSection::Generate(spec) = &mut self.instance {
            spec.seed = seed;
        }
        if let Some(StartSpec::Random { seed: s, .. }) = &mut self.run.x0 {
            *s = Some(seed);
        }
        if self.run.seeds.is_some() {
            self.run.seeds = Some(vec![seed]);
        }
    }

    pub fn instance_seed(&self) -> u64 {
        match &self.instance {
            InstanceSection::Generate(spec) => spec.seed,
            InstanceSection::Inline(_) => 0,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.run
            .seeds
            .clone()
            .unwrap_or_else(|| vec![self.instance_seed()])
    }

    /// Builds the instance, replacing seed and condition number when given.
    pub fn problem(&self, seed: Option<u64>, cond: Option<f64>) -> Result<ProblemF64, CliError> {
        match &self.instance {
            InstanceSection::Generate(spec) => {
                let mut spec = spec.clone();
                if let Some(s) = seed {
                    spec.seed = s;
                }
                if let Some(c) = cond {
                    spec.cond = c;
                }
                generate(&spec).map_err(|e| field("instance.generate", e))
            }
            InstanceSection::Inline(p) => p.build().map_err(|e| field("instance.inline", e)),
        }
    }

    /// Start for `seed`: the explicit point, or a seeded normal draw.
    pub fn start(&self, n: usize, seed: u64) -> Result<Vec<f64>, CliError> {
        match &self.run.x0 {
            Some(StartSpec::Point(x)) if x.len() == n => Ok(x.clone()),
            Some(StartSpec::Point(x)) => Err(CliError::Config(format!(
                "run.x0: expected {n} coordinates, got {}",
                x.len()
            ))),
            Some(StartSpec::Random { seed: s, scale }) => {
                Ok(random_start(n, s.unwrap_or(seed), *scale))
            }
            None => Ok(random_start(n, seed, 1.0)),
        }
    }

    pub fn solver_config(&self, problem: &ProblemF64) -> Result<SolverConfigF64, CliError> {
        let mut cfg = self.solver.base();
        if self.solver.variant == VariantName::Pgmo {
            let ell = self.solver.ell.or(problem.lip_grad()).ok_or_else(|| {
                CliError::Config("solver.ell: required for pgmo when the instance has no gradient Lipschitz bound".into())
            })?;
            cfg.variant = Variant::Pgmo { ell };
        }
        Ok(cfg)
    }
}

impl SolverSection {
    pub fn base(&self) -> SolverConfigF64 {
        let d = SolverConfigF64::default();
        SolverConfigF64 {
            eps: self.eps.unwrap_or(d.eps),
            sigma: self.sigma.unwrap_or(d.sigma),
            gamma: self.gamma.unwrap_or(d.gamma),
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            tol_gap: self.tol_gap.unwrap_or(d.tol_gap),
            max_dual_iters: self.max_dual_iters.unwrap_or(d.max_dual_iters),
            max_inner_iters: self.max_inner_iters.unwrap_or(d.max_inner_iters),
            max_halvings: self.max_halvings.unwrap_or(d.max_halvings),
            variant: Variant::Npgmo,
        }
    }
}

impl InlineProblem {
    fn build(&self) -> moprox::Result<ProblemF64> {
        let smooth = self
            .objectives
            .iter()
            .map(|o| -> moprox::Result<Arc<dyn SmoothObjective<f64>>> {
                Ok(match o {
                    InlineObjective::Quadratic { a, b, c } => {
                        Arc::new(Quadratic::new(matrix(a)?, b.clone(), *c)?)
                    }
                    InlineObjective::LogSumExp {
                        rows,
                        offsets,
                        mu,
                        center,
                    } => Arc::new(LogSumExpReg::new(
                        matrix(rows)?,
                        offsets.clone(),
                        *mu,
                        center.clone(),
                    )?),
                })
            })
            .collect::<moprox::Result<Vec<_>>>()?;
        let term = match &self.nonsmooth {
            InlineNonsmooth::Zero => NonsmoothTerm::Zero,
            InlineNonsmooth::L1(rho) => NonsmoothTerm::ScaledL1(*rho),
            InlineNonsmooth::Box { lo, hi } => NonsmoothTerm::BoxIndicator {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        };
        let mut p = ProblemInstance::with_shared_nonsmooth(smooth, term, self.mu)?;
        if let Some(l1) = self.lip_grad {
            p = p.with_lip_grad(l1);
        }
        if let Some(l2) = self.lip_hess {
            p = p.with_lip_hess(l2);
        }
        Ok(p)
    }
}

fn matrix(rows: &[Vec<f64>]) -> moprox::Result<Matrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != cols) {
        return Err(moprox::Error::InvalidInput(
            "objectives: matrix rows must be nonempty and equally long".into(),
        ));
    }
    Ok(Matrix::from_rows(rows))
}
