//! Verdicts over solve traces: criticality, convergence order, the `τ_k`
//! bracket, quadratic termination and the quadratic-case fundamental
//! inequality.

use serde::Serialize;

use crate::driver::{self, SolveTrace, SolverConfig, TerminalStatus, Variant};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::problem::ProblemInstance;
use crate::scalar::Scalar;
use crate::subproblem::{solve_direction, DirectionOptions};

/// Named pass/fail outcome. `margin` is positive on a pass and measures the
/// distance to the threshold; soft verdicts are reported but do not gate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub soft: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, margin: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            margin,
            soft: false,
            detail,
        }
    }

    pub fn soft(mut self) -> Self {
        self.soft = true;
        self
    }

    pub fn not_applicable(name: &str, detail: impl Into<String>) -> Self {
        Self::new(name, false, f64::NAN, detail.into())
    }

    /// Failing hard verdicts are the only ones that count against a run.
    pub fn gates(&self) -> bool {
        !self.soft
    }
}

/// `‖d(x)‖` from a fresh solve at gap tolerance `tol_gap`.
pub fn criticality_measure<T: Scalar>(
    problem: &ProblemInstance<T>,
    x: &[T],
    tol_gap: T,
) -> Result<T> {
    let r = solve_direction(x, problem, &DirectionOptions::with_tol_gap(tol_gap))
        .map_err(Error::from)?;
    Ok(r.dnorm())
}

/// Noise floor `10⁻¹³ (1 + ‖x*‖)` below which errors are not fitted.
pub fn noise_floor(x_star: &[f64]) -> f64 {
    1e-13 * (1.0 + linalg::norm(x_star))
}

/// Indices of the fit window: the last `max(4, 40%)` entries of the strictly
/// decreasing run of errors above `floor` that ends at the last such error.
pub fn fit_window(errors: &[f64], floor: f64) -> Result<std::ops::Range<usize>> {
    let Some(end) = errors.iter().rposition(|&e| e > floor && e.is_finite()) else {
        return Err(Error::InsufficientData(
            "no error above the noise floor".into(),
        ));
    };
    let mut start = end;
    while start > 0 && errors[start - 1] > errors[start] && errors[start - 1].is_finite() {
        start -= 1;
    }
    let run = end + 1 - start;
    if run < 4 {
        return Err(Error::InsufficientData(format!(
            "{run} decreasing errors above the noise floor, need 4"
        )));
    }
    let take = 4.max((0.4 * run as f64).ceil() as usize).min(run);
    Ok(end + 1 - take..end + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub q: f64,
    pub c: f64,
    pub points: usize,
}

/// Least-squares fit of `log e_{k+1} = log C + q log e_k` over the fit window.
pub fn estimate_order(errors: &[f64], floor: f64) -> Result<OrderEstimate> {
    let w = fit_window(errors, floor)?;
    let pts: Vec<(f64, f64)> = errors[w.clone()]
        .windows(2)
        .map(|p| (p[0].ln(), p[1].ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("degenerate error sequence".into()));
    }
    let q = sxy / sxx;
    Ok(OrderEstimate {
        q,
        c: (my - q * mx).exp(),
        points: w.len(),
    })
}

/// `[(μ − √(2με − ε²)) / (μ − ε), (μ + √(2με − ε²)) / (μ − ε)]` for
/// `0 < ε ≤ (1 − σ) μ`.
pub fn tau_bracket(mu: f64, sigma: f64, eps: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) || !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidInput(
            "need mu > 0 and sigma in (0, 1)".into(),
        ));
    }
    if !(eps > 0.0 && eps <= (1.0 - sigma) * mu) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in (0, (1 - sigma) mu] = (0, {}], got {eps}",
            (1.0 - sigma) * mu
        )));
    }
    let root = (2.0 * mu * eps - eps * eps).sqrt();
    Ok(((mu - root) / (mu - eps), (mu + root) / (mu - eps)))
}

/// Distances `‖x^k − x*‖` along the trace.
pub fn errors<T: Scalar>(trace: &SolveTrace<T>, x_star: &[f64]) -> Vec<f64> {
    trace
        .records
        .iter()
        .map(|r| {
            r.x.iter()
                .zip(x_star)
                .map(|(&a, &b)| (a.as_f64() - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Step indices forming the trailing run of unit steps.
pub fn unit_step_tail<T: Scalar>(trace: &SolveTrace<T>) -> std::ops::Range<usize> {
    let steps: Vec<Option<T>> = trace
        .records
        .iter()
        .map(|r| r.t)
        .filter(Option::is_some)
        .collect();
    let end = steps.len();
    let start = steps
        .iter()
        .rposition(|t| *t != Some(T::one()))
        .map_or(0, |i| i + 1);
    start..end
}

/// High-accuracy reference point: the same trajectory continued to
/// `‖d‖ ≤ tol`, then moved by its final direction. The last Newton step is
/// accurate to `O(‖d‖²)`, which keeps the final recorded error measurable
/// when the run ends at the rounding limit of the line search.
pub fn reference_solution<T: Scalar>(
    problem: &ProblemInstance<T>,
    config: &SolverConfig<T>,
    x0: &[T],
    tol: T,
) -> Result<Vec<T>> {
    let cfg = SolverConfig {
        eps: tol,
        max_outer: config.max_outer.max(200),
        ..*config
    };
    let trace = driver::solve(problem, &cfg, x0)?;
    reference_from_trace(&trace)
}

/// `x_K + d_K` from a trace that reached criticality or the precision limit.
pub fn reference_from_trace<T: Scalar>(trace: &SolveTrace<T>) -> Result<Vec<T>> {
    match (&trace.status, trace.records.last()) {
        (TerminalStatus::CriticalReached | TerminalStatus::PrecisionLimit { .. }, Some(r)) => {
            Ok(linalg::add(&r.x, &r.d))
        }
        (s, _) => Err(Error::InsufficientData(format!(
            "reference solve ended with {s:?}"
        ))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauBracketResult {
    pub eps: f64,
    pub lo: f64,
    pub hi: f64,
    /// First step index after which every measured `τ_k` lies in the bracket.
    pub enters_at: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauReport {
    /// `τ_k` per step; `None` where `e_k` is too small to measure.
    pub tau: Vec<Option<f64>>,
    pub tail: std::ops::Range<usize>,
    pub brackets: Vec<TauBracketResult>,
    /// Last `τ_k` measured above the noise floor.
    pub final_tau: Option<f64>,
    /// `log10(e_0 / e_last)` over the measured errors.
    pub decades: f64,
    pub verdicts: Vec<Verdict>,
}

/// `τ_k = ‖x^{k+1} − x^k‖ / ‖x^k − x*‖` and bracket membership over the
/// unit-step tail for every `ε` in `eps_list`.
pub fn tau_check<T: Scalar>(
    trace: &SolveTrace<T>,
    x_star: &[f64],
    mu: f64,
    eps_list: &[f64],
) -> Result<TauReport> {
    let sigma = trace.sigma.as_f64();
    let e = errors(trace, x_star);
    let floor = noise_floor(x_star);
    let defined = 10.0 * f64::EPSILON * linalg::norm(x_star);
    let mut tau = Vec::new();
    let mut measured = Vec::new();
    for (k, w) in trace.records.windows(2).enumerate() {
        if w[0].t.is_none() {
            break;
        }
        if e[k] > defined && e[k] > 0.0 {
            let step = linalg::dist(&w[1].x, &w[0].x).as_f64();
            tau.push(Some(step / e[k]));
            if e[k] > floor {
                measured.push(k);
            }
        } else {
            tau.push(None);
        }
    }
    let tail = unit_step_tail(trace);
    let mut brackets = Vec::new();
    let mut verdicts = Vec::new();
    for &eps in eps_list {
        let (lo, hi) = tau_bracket(mu, sigma, eps)?;
        let inside =
            |k: usize| tau[k].is_none_or(|t| (lo..=hi).contains(&t)) || !measured.contains(&k);
        let mut enters_at = None;
        for k in (0..tau.len()).rev() {
            if !inside(k) {
                break;
            }
            enters_at = Some(k);
        }
        let tail_in = tail.clone().all(inside);
        let worst = tail
            .clone()
            .filter(|&k| measured.contains(&k))
            .filter_map(|k| tau[k])
            .map(|t| (t - lo).min(hi - t))
            .fold(f64::INFINITY, f64::min);
        if tail.is_empty() {
            verdicts.push(Verdict::not_applicable(
                &format!("tau_bracket(eps={:.3e})", eps),
                "no unit-step tail",
            ));
        } else {
            verdicts.push(Verdict::new(
                &format!("tau_bracket(eps={:.3e})", eps),
                tail_in,
                worst,
                format!("bracket [{lo:.6}, {hi:.6}], tail steps {tail:?}"),
            ));
        }
        brackets.push(TauBracketResult {
            eps,
            lo,
            hi,
            enters_at,
        });
    }

    let final_tau = measured.last().and_then(|&k| tau[k]);
    let first = e.first().copied().unwrap_or(0.0);
    let last = measured.last().map_or(first, |&k| e[k]);
    let decades = if last > 0.0 {
        (first / last).log10()
    } else {
        0.0
    };
    if decades >= 4.0 {
        let ft = final_tau.unwrap_or(f64::NAN);
        verdicts.push(Verdict::new(
            "tau_to_one",
            (ft - 1.0).abs() <= 0.05,
            0.05 - (ft - 1.0).abs(),
            format!("final tau {ft:.6} over {decades:.1} decades"),
        ));
    }
    Ok(TauReport {
        tau,
        tail,
        brackets,
        final_tau,
        decades,
        verdicts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub errors: Vec<f64>,
    pub noise_floor: f64,
    pub order: Option<OrderEstimate>,
    /// `e_{k+1} / e_k` over the fit window.
    pub linear_ratios: Vec<f64>,
    /// `e_{k+1} / e_k²` over the fit window.
    pub quadratic_ratios: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

/// Superlinear and quadratic rate verdicts against a reference point.
/// `lip_hess` enables the quadratic-constant checks against `L₂ / μ`.
pub fn rate_report<T: Scalar>(
    trace: &SolveTrace<T>,
    x_star: &[f64],
    mu: f64,
    lip_hess: Option<f64>,
    min_order: f64,
) -> RateReport {
    let e = errors(trace, x_star);
    let floor = noise_floor(x_star);
    let mut report = RateReport {
        errors: e.clone(),
        noise_floor: floor,
        order: None,
        linear_ratios: Vec::new(),
        quadratic_ratios: Vec::new(),
        verdicts: Vec::new(),
    };
    let w = match fit_window(&e, floor) {
        Ok(w) => w,
        Err(err) => {
            report
                .verdicts
                .push(Verdict::not_applicable("order_fit", err.to_string()));
            return report;
        }
    };
    let start = w.start;
    let tail = &e[w];
    report.linear_ratios = tail.windows(2).map(|p| p[1] / p[0]).collect();
    report.quadratic_ratios = tail.windows(2).map(|p| p[1] / (p[0] * p[0])).collect();

    let decreasing = report.linear_ratios.windows(2).all(|r| r[1] < r[0]);
    let worst = report
        .linear_ratios
        .windows(2)
        .map(|r| r[0] - r[1])
        .fold(f64::INFINITY, f64::min);
    report.verdicts.push(Verdict::new(
        "ratios_decreasing",
        decreasing,
        worst,
        format!("e_(k+1)/e_k = {:?}", report.linear_ratios),
    ));

    match estimate_order(&e, floor) {
        Ok(o) => {
            report.verdicts.push(Verdict::new(
                "order_fit",
                o.q >= min_order,
                o.q - min_order,
                format!("q = {:.4}, C = {:.4e} over {} points", o.q, o.c, o.points),
            ));
            report.order = Some(o);
        }
        Err(err) => report
            .verdicts
            .push(Verdict::not_applicable("order_fit", err.to_string())),
    }

    if let Some(l2) = lip_hess {
        let limit = l2 / mu;
        let cmax = report.quadratic_ratios.iter().copied().fold(0.0, f64::max);
        report.verdicts.push(Verdict::new(
            "quadratic_constant_bound",
            cmax <= 10.0 * limit,
            10.0 * limit - cmax,
            format!(
                "max e_(k+1)/e_k^2 = {cmax:.4e}, 10 L2/mu = {:.4e}",
                10.0 * limit
            ),
        ));
        // Per-step form with τ_k = ‖x^{k+1} − x^k‖ / e_k; only meaningful once
        // the denominator is positive.
        let mut step_margin = f64::INFINITY;
        let mut checked = 0;
        for (j, pair) in tail.windows(2).enumerate() {
            let k = start + j;
            let step: Vec<f64> = trace.records[k + 1]
                .x
                .iter()
                .zip(&trace.records[k].x)
                .map(|(a, b)| a.as_f64() - b.as_f64())
                .collect();
            let tau = linalg::norm(&step) / pair[0];
            let denom = 3.0 * mu - tau * l2 * pair[0];
            if denom <= 0.0 {
                continue;
            }
            let bound = (2.0 * tau + 1.0) * l2 / denom * pair[0] * pair[0];
            step_margin = step_margin.min((bound - pair[1]) / bound);
            checked += 1;
        }
        report.verdicts.push(if checked == 0 {
            // Nothing to test, not a violation.
            Verdict::not_applicable(
                "quadratic_step_bound",
                "3μ − τ_k L2 e_k ≤ 0 on every tail step",
            )
            .soft()
        } else {
            Verdict::new(
                "quadratic_step_bound",
                step_margin >= 0.0,
                step_margin,
                format!("e_(k+1) ≤ (2τ_k+1) L2 e_k^2 / (3μ − τ_k L2 e_k) on {checked} steps"),
            )
        });
        let last = report.quadratic_ratios.last().copied().unwrap_or(f64::NAN);
        let within = last >= limit / 10.0 && last <= limit * 10.0;
        let margin = (last / (limit / 10.0))
            .log10()
            .min((10.0 * limit / last).log10());
        report.verdicts.push(
            Verdict::new(
                "quadratic_constant_limit",
                within,
                margin,
                format!("last e_(k+1)/e_k^2 = {last:.4e}, L2/mu = {limit:.4e}"),
            )
            .soft(),
        );
    }
    report
}

/// `θ^k ≤ −(μ/2)‖d^k‖² + tol` on every record.
pub fn descent_bound_check<T: Scalar>(trace: &SolveTrace<T>, mu: f64, tol: f64) -> Verdict {
    let margin = trace
        .records
        .iter()
        .map(|r| -0.5 * mu * r.dnorm.as_f64().powi(2) + tol - r.theta.as_f64())
        .fold(f64::INFINITY, f64::min);
    Verdict::new(
        "lemma32_bound",
        margin >= 0.0,
        margin,
        format!("{} records", trace.records.len()),
    )
}

/// `F_i(x^{k+1}) − F_i(x^k) ≤ t_k σ θ^k` for every step and objective.
pub fn sufficient_decrease_check<T: Scalar>(trace: &SolveTrace<T>) -> Verdict {
    let sigma = trace.sigma;
    let mut margin = f64::INFINITY;
    for w in trace.records.windows(2) {
        let Some(t) = w[0].t else { continue };
        let bound = t * sigma * w[0].theta;
        for (a, b) in w[1].f.iter().zip(&w[0].f) {
            margin = margin.min((bound - (*a - *b)).as_f64());
        }
    }
    Verdict::new(
        "sufficient_decrease",
        margin >= 0.0,
        margin,
        format!("{} steps", trace.iterations()),
    )
}

/// Every step after the first `skip_fraction` of steps has `t = 1`.
pub fn unit_steps_check<T: Scalar>(trace: &SolveTrace<T>, skip_fraction: f64) -> Verdict {
    let steps: Vec<T> = trace.records.iter().filter_map(|r| r.t).collect();
    let skip = (skip_fraction * steps.len() as f64).floor() as usize;
    let bad = steps[skip..].iter().filter(|&&t| t != T::one()).count();
    Verdict::new(
        "eventual_unit_steps",
        bad == 0,
        -(bad as f64),
        format!(
            "steps t = {:?}, checked from index {skip}",
            steps.iter().map(|t| t.as_f64()).collect::<Vec<_>>()
        ),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct TerminationRun {
    pub t0: Option<f64>,
    pub criticality: f64,
    pub iterations_to_stop: usize,
    pub failure: Option<String>,
}

/// One outer step from each start on a strongly convex quadratic: requires
/// `t_0 = 1` and `‖d(x¹)‖ ≤ 10 √tol_gap`.
pub fn check_quadratic_termination<T: Scalar>(
    problem: &ProblemInstance<T>,
    config: &SolverConfig<T>,
    x0_batch: &[Vec<T>],
) -> Result<(Verdict, Vec<TerminationRun>)> {
    if problem.quadratic_hessians().is_none() {
        return Err(Error::InvalidInput(
            "quadratic termination needs quadratic objectives".into(),
        ));
    }
    let cfg = SolverConfig {
        max_outer: 1,
        variant: Variant::Npgmo,
        ..*config
    };
    let threshold = 10.0 * config.tol_gap.as_f64().sqrt();
    let mut runs = Vec::new();
    let mut margin = f64::INFINITY;
    let mut passed = true;
    for x0 in x0_batch {
        let trace = driver::solve(problem, &cfg, x0)?;
        let t0 = trace.records.first().and_then(|r| r.t.map(Scalar::as_f64));
        let crit = match trace.records.get(1) {
            Some(r) => criticality_measure(problem, &r.x, config.tol_gap).map(Scalar::as_f64),
            None => match trace.records.first() {
                Some(r) if !trace.status.is_failure() => Ok(r.dnorm.as_f64()),
                _ => Err(Error::InvalidInput(format!("{:?}", trace.status))),
            },
        };
        let (crit, failure) = match crit {
            Ok(c) => (c, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        let unit = t0.is_none_or(|t| t == 1.0);
        passed &= unit && crit <= threshold && failure.is_none();
        margin = margin.min(threshold - crit);
        runs.push(TerminationRun {
            t0,
            criticality: crit,
            iterations_to_stop: trace.iterations(),
            failure,
        });
    }
    let verdict = Verdict::new(
        "quadratic_termination",
        passed,
        margin,
        format!("{} starts, threshold {threshold:.3e}", x0_batch.len()),
    );
    Ok((verdict, runs))
}

/// `F_λ(x^{k+1}) − F_λ(x) ≤ −½‖x^{k+1} − x‖²_{A_λ} + 10⁻⁸` at every unit step,
/// with `λ = λ^k` from the trace and each probe `x`.
pub fn check_fundamental_inequality_quadratic<T: Scalar>(
    trace: &SolveTrace<T>,
    problem: &ProblemInstance<T>,
    probes: &dyn Fn(usize) -> Vec<Vec<T>>,
) -> Result<Verdict> {
    let Some(mats) = problem.quadratic_hessians() else {
        return Err(Error::InvalidInput(
            "fundamental inequality check needs quadratic objectives".into(),
        ));
    };
    let n = problem.n();
    let mut margin = f64::INFINITY;
    let mut checked = 0usize;
    for (rec, next) in trace.steps() {
        if rec.t != Some(T::one()) {
            continue;
        }
        let mut a_lam = Matrix::<f64>::zeros(n, n);
        for (l, a) in rec.lambda.iter().zip(&mats) {
            a_lam.add_scaled(l.as_f64(), &a.cast::<f64>());
        }
        let f_next = problem.eval_full(next)?;
        let weighted = |f: &[T]| -> f64 {
            rec.lambda
                .iter()
                .zip(f)
                .map(|(l, v)| l.as_f64() * v.as_f64())
                .sum()
        };
        let lhs_next = weighted(&f_next);
        for x in probes(rec.k) {
            let fx = problem.eval_full(&x)?;
            if fx.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let diff: Vec<f64> = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a.as_f64() - b.as_f64())
                .collect();
            let lhs = lhs_next - weighted(&fx);
            let rhs = -0.5 * a_lam.quad_form(&diff);
            margin = margin.min(rhs - lhs);
            checked += 1;
        }
    }
    Ok(Verdict::new(
        "fundamental_ineq_quadratic",
        margin >= -1e-8,
        margin + 1e-8,
        format!("{checked} probe evaluations"),
    ))
}
