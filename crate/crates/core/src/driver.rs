//! Outer descent loop: direction subproblem, stop on `‖d‖ < ε`, otherwise an
//! Armijo backtracking step `x ← x + t d`.
//!
//! The first-order baseline shares the loop and only swaps every Hessian for
//! `ℓ I` before the direction solve.

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;
use crate::subproblem::{solve_direction_with_eval, DirectionOptions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant<T> {
    /// Newton-type metric `∇²f_i(x)`.
    Npgmo,
    /// First-order metric `ℓ I`.
    Pgmo { ell: T },
}

impl<T> Variant<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Npgmo => "npgmo",
            Self::Pgmo { .. } => "pgmo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Stop once `‖d‖ < eps`.
    pub eps: T,
    /// Armijo sufficient-decrease constant.
    pub sigma: T,
    /// Backtracking factor.
    pub gamma: T,
    pub max_outer: usize,
    pub tol_gap: T,
    pub max_dual_iters: usize,
    pub max_inner_iters: usize,
    pub max_halvings: usize,
    pub variant: Variant<T>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        let direction = DirectionOptions::<T>::default();
        Self {
            eps: T::lit(1e-8).max(T::lit(1e3) * T::epsilon()),
            sigma: T::lit(0.1),
            gamma: T::lit(0.5),
            max_outer: 1000,
            tol_gap: direction.tol_gap,
            max_dual_iters: direction.max_dual_iters,
            max_inner_iters: direction.max_inner_iters,
            max_halvings: 60,
            variant: Variant::Npgmo,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad =
            |field: &str, why: &str, v: T| Err(Error::Config(format!("{field}: {why}, got {v}")));
        if !(self.eps > T::zero()) {
            return bad("eps", "must be > 0", self.eps);
        }
        if !(self.sigma > T::zero() && self.sigma < T::one()) {
            return bad("sigma", "must lie in (0, 1)", self.sigma);
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return bad("gamma", "must lie in (0, 1)", self.gamma);
        }
        if !(self.tol_gap > T::zero()) {
            return bad("tol_gap", "must be > 0", self.tol_gap);
        }
        if let Variant::Pgmo { ell } = self.variant {
            if !(ell > T::zero()) || !ell.is_finite() {
                return bad("variant.ell", "must be > 0", ell);
            }
        }
        Ok(())
    }

    pub fn direction_options(&self) -> DirectionOptions<T> {
        DirectionOptions {
            tol_gap: self.tol_gap,
            inner_tol: self.tol_gap / T::lit(10.0),
            max_dual_iters: self.max_dual_iters,
            max_inner_iters: self.max_inner_iters,
        }
    }
}

/// One outer iteration. `t` is `None` on the terminal record, where no step
/// was taken.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub k: usize,
    pub x: Vec<T>,
    pub f: Vec<T>,
    pub d: Vec<T>,
    pub dnorm: T,
    pub theta: T,
    pub t: Option<T>,
    pub lambda: Vec<T>,
    pub gap: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TerminalStatus {
    CriticalReached,
    MaxIters,
    /// The line search failed while the required decrease `σ|θ|` was below
    /// the rounding resolution of `F(x)`: no step can be certified in this
    /// precision, though `‖d‖` is still above `eps`.
    PrecisionLimit {
        iteration: usize,
    },
    SubproblemFailure {
        iteration: usize,
        message: String,
    },
    LineSearchFailure {
        iteration: usize,
        message: String,
    },
}

impl TerminalStatus {
    pub fn is_failure(&self) -> bool {
        matches!(
            self,
            Self::SubproblemFailure { .. } | Self::LineSearchFailure { .. }
        )
    }
}

#[derive(Clone, Debug)]
pub struct SolveTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub status: TerminalStatus,
    pub variant: Variant<T>,
    pub sigma: T,
}

impl<T: Scalar> SolveTrace<T> {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.t.is_some()).count()
    }

    pub fn final_x(&self) -> Option<&[T]> {
        self.records.last().map(|r| r.x.as_slice())
    }

    pub fn final_dnorm(&self) -> Option<T> {
        self.records.last().map(|r| r.dnorm)
    }

    /// Pairs `(record k, x^{k+1})` for every step taken.
    pub fn steps(&self) -> impl Iterator<Item = (&IterationRecord<T>, &[T])> {
        self.records
            .windows(2)
            .filter(|w| w[0].t.is_some())
            .map(|w| (&w[0], w[1].x.as_slice()))
    }
}

/// Largest `t = γ^j`, `j = 0, 1, …, max_halvings`, with
/// `F_i(x + t d) − F_i(x) ≤ t σ θ` for every objective.
pub fn armijo_backtrack<T: Scalar>(
    problem: &ProblemInstance<T>,
    x: &[T],
    d: &[T],
    theta: T,
    sigma: T,
    gamma: T,
    max_halvings: usize,
) -> Result<T> {
    let fx = problem.eval_full(x)?;
    armijo_from(problem, x, &fx, d, theta, sigma, gamma, max_halvings)
}

#[allow(clippy::too_many_arguments)]
fn armijo_from<T: Scalar>(
    problem: &ProblemInstance<T>,
    x: &[T],
    fx: &[T],
    d: &[T],
    theta: T,
    sigma: T,
    gamma: T,
    max_halvings: usize,
) -> Result<T> {
    if d.iter().all(|&v| v == T::zero()) {
        return Err(Error::InvalidInput(
            "line search needs a nonzero direction".into(),
        ));
    }
    if !(theta < T::zero()) {
        return Err(Error::InvalidInput(format!(
            "line search needs theta < 0, got {theta}"
        )));
    }
    let mut t = T::one();
    for _ in 0..=max_halvings {
        let trial: Vec<T> = x.iter().zip(d).map(|(&xi, &di)| xi + t * di).collect();
        let ft = problem.eval_full_unchecked(&trial);
        let bound = t * sigma * theta;
        // NaN and +∞ both fail the comparison.
        if ft.iter().zip(fx).all(|(&a, &b)| a - b <= bound) {
            return Ok(t);
        }
        t = t * gamma;
    }
    Err(Error::LineSearchFailure {
        halvings: max_halvings,
    })
}

fn below_resolution<T: Scalar>(fx: &[T], theta: T, sigma: T) -> bool {
    let scale = fx
        .iter()
        .map(|v| v.abs())
        .fold(T::min_positive_value(), T::max);
    sigma * theta.abs() <= T::lit(8.0) * T::epsilon() * scale
}

/// Runs the loop with the metric named by `config.variant`.
pub fn solve<T: Scalar>(
    problem: &ProblemInstance<T>,
    config: &SolverConfig<T>,
    x0: &[T],
) -> Result<SolveTrace<T>> {
    config.validate()?;
    let f0 = problem.eval_full(x0)?;
    if f0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "starting point lies outside the domain of g".into(),
        ));
    }
    let opts = config.direction_options();
    let g = problem.shared_nonsmooth();
    let mut x = x0.to_vec();
    let mut fx = f0;
    let mut records = Vec::new();
    let status = 'outer: loop {
        let k = records.len();
        let eval = match problem.eval_smooth(&x) {
            Ok(e) => e,
            Err(e) => {
                break TerminalStatus::SubproblemFailure {
                    iteration: k,
                    message: e.to_string(),
                }
            }
        };
        let eval = match config.variant {
            Variant::Npgmo => eval,
            Variant::Pgmo { ell } => eval.with_scaled_identity_hessians(ell),
        };
        let dir = match solve_direction_with_eval(&x, &eval, g, &opts) {
            Ok(r) => r,
            Err(e) => {
                break TerminalStatus::SubproblemFailure {
                    iteration: k,
                    message: e.to_string(),
                }
            }
        };
        let dnorm = dir.dnorm();
        let mut record = IterationRecord {
            k,
            x: x.clone(),
            f: fx.clone(),
            d: dir.d.clone(),
            dnorm,
            theta: dir.theta,
            t: None,
            lambda: dir.lambda.as_slice().to_vec(),
            gap: dir.gap,
        };
        if dnorm < config.eps {
            records.push(record);
            break TerminalStatus::CriticalReached;
        }
        if k >= config.max_outer {
            records.push(record);
            break TerminalStatus::MaxIters;
        }
        // Once σ|θ| is below the resolution of F, shorter trial steps are
        // told apart only by rounding, so only the unit step is tried.
        let unresolved = below_resolution(&fx, dir.theta, config.sigma);
        let halvings = if unresolved { 0 } else { config.max_halvings };
        let t = match armijo_from(
            problem,
            &x,
            &fx,
            &dir.d,
            dir.theta,
            config.sigma,
            config.gamma,
            halvings,
        ) {
            Ok(t) => t,
            Err(_) if unresolved => {
                records.push(record);
                break 'outer TerminalStatus::PrecisionLimit { iteration: k };
            }
            Err(e) => {
                records.push(record);
                break 'outer TerminalStatus::LineSearchFailure {
                    iteration: k,
                    message: e.to_string(),
                };
            }
        };
        record.t = Some(t);
        records.push(record);
        linalg::axpy(t, &dir.d, &mut x);
        fx = problem.eval_full_unchecked(&x);
    };
    Ok(SolveTrace {
        records,
        status,
        variant: config.variant,
        sigma: config.sigma,
    })
}

/// Newton-type metric regardless of `config.variant`.
pub fn npgmo_solve<T: Scalar>(
    problem: &ProblemInstance<T>,
    config: &SolverConfig<T>,
    x0: &[T],
) -> Result<SolveTrace<T>> {
    let config = SolverConfig {
        variant: Variant::Npgmo,
        ..*config
    };
    solve(problem, &config, x0)
}

/// First-order baseline; `config.variant` must carry `ℓ`.
pub fn pgmo_solve<T: Scalar>(
    problem: &ProblemInstance<T>,
    config: &SolverConfig<T>,
    x0: &[T],
) -> Result<SolveTrace<T>> {
    match config.variant {
        Variant::Pgmo { .. } => solve(problem, config, x0),
        Variant::Npgmo => Err(Error::Config(
            "variant: the first-order baseline needs variant pgmo with ell".into(),
        )),
    }
}
