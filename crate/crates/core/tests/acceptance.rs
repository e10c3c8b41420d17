//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if a gating
//! criterion fails; soft criteria are reported but never gate.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use moprox::analysis::{
    check_fundamental_inequality_quadratic, check_quadratic_termination, criticality_measure,
    descent_bound_check, rate_report, reference_from_trace, tau_check, unit_steps_check, Verdict,
};
use moprox::linalg::{self, Cholesky, Matrix};
use moprox::problem::SmoothEval;
use moprox::subproblem::{project_simplex, solve_direction, DirectionOptions};
use moprox::trace_io::{check_sufficient_decrease_rows, read_trace_csv, write_trace_csv};
use moprox::zoo::{attach_nonsmooth, generate, random_probes, random_start};
use moprox::{
    npgmo_solve, pgmo_solve, Family, InstanceSpec, NonsmoothTerm, ProblemF64, SolverConfigF64,
    TerminalStatus, TraceF64, Variant,
};

struct Line {
    id: &'static str,
    passed: bool,
    soft: bool,
    elapsed: Duration,
    detail: String,
}

/// Every trace produced along the way, for the whole-suite criteria.
struct Run {
    label: String,
    trace: TraceF64,
    mu: f64,
    tol_gap: f64,
}

#[derive(Default)]
struct Suite {
    lines: Vec<Line>,
    runs: Vec<Run>,
}

impl Suite {
    fn record(&mut self, id: &'static str, passed: bool, start: Instant, detail: String) {
        self.lines.push(Line {
            id,
            passed,
            soft: false,
            elapsed: start.elapsed(),
            detail,
        });
    }

    fn keep(&mut self, label: String, trace: &TraceF64, mu: f64, tol_gap: f64) {
        self.runs.push(Run {
            label,
            trace: trace.clone(),
            mu,
            tol_gap,
        });
    }
}

fn cfg(tol_gap: f64) -> SolverConfigF64 {
    SolverConfigF64 {
        tol_gap,
        ..Default::default()
    }
}

fn worst<'a>(vs: impl IntoIterator<Item = &'a Verdict>) -> Option<&'a Verdict> {
    vs.into_iter().min_by(|a, b| {
        a.margin
            .partial_cmp(&b.margin)
            .unwrap_or(std::cmp::Ordering::Less)
    })
}

fn ac1(s: &mut Suite) {
    let start = Instant::now();
    let (ns, ms, conds) = ([2, 10, 50], [2, 3], [1.0, 1e2, 1e4]);
    let mut failures = Vec::new();
    let mut worst_crit = 0.0f64;
    for i in 0..20u64 {
        let (n, m, cond) = (
            ns[i as usize % 3],
            ms[i as usize % 2],
            conds[(i as usize / 2) % 3],
        );
        let family = if i % 4 >= 2 {
            Family::QuadraticL1
        } else {
            Family::Quadratic
        };
        let p: ProblemF64 =
            generate(&InstanceSpec::new(family, n, m).cond(cond).rho(0.1).seed(i)).unwrap();
        let c = cfg(1e-12);
        let x0 = random_start::<f64>(n, i, 3.0);
        let (_, runs) = check_quadratic_termination(&p, &c, std::slice::from_ref(&x0)).unwrap();
        let r = &runs[0];
        worst_crit = worst_crit.max(r.criticality);
        if r.t0.is_some_and(|t| t != 1.0)
            || r.criticality.is_nan()
            || r.criticality > 1e-5
            || r.failure.is_some()
        {
            failures.push(format!(
                "#{i}: t0 {:?} crit {:.2e} {:?}",
                r.t0, r.criticality, r.failure
            ));
        }
        s.keep(
            format!("ac1 #{i}"),
            &npgmo_solve(&p, &c, &x0).unwrap(),
            p.mu(),
            1e-12,
        );
    }
    let elapsed = start.elapsed();
    let passed = failures.is_empty() && elapsed < Duration::from_secs(10);
    s.record(
        "AC1 quadratic termination",
        passed,
        start,
        format!("20 instances, max criticality(x¹) = {worst_crit:.2e} (≤ 1e-5), {elapsed:.2?} (< 10 s) {failures:?}"),
    );
}

fn lse(seed: u64) -> ProblemF64 {
    generate(
        &InstanceSpec::new(Family::LogSumExpReg, 10, 2)
            .mu(1.0)
            .seed(seed),
    )
    .unwrap()
}

fn ac4(s: &mut Suite) {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut damped = 0;
    let mut total = 0;
    for seed in 0..10 {
        for scale in [1.0, 3.0, 10.0, 30.0, 100.0] {
            let p = lse(seed);
            let trace = npgmo_solve(&p, &cfg(1e-12), &random_start(10, seed, scale)).unwrap();
            let v = unit_steps_check(&trace, 0.2);
            damped += trace
                .records
                .iter()
                .filter(|r| r.t.is_some_and(|t| t < 1.0))
                .count();
            total += 1;
            if !v.passed || trace.status.is_failure() {
                bad.push(format!(
                    "seed {seed} scale {scale}: {} {:?}",
                    v.detail, trace.status
                ));
            }
            s.keep(format!("ac4 seed {seed} scale {scale}"), &trace, 1.0, 1e-12);
        }
    }
    s.record(
        "AC4 eventual unit steps",
        bad.is_empty(),
        start,
        format!("{total} runs, {damped} damped steps in total, all within the first 20% {bad:?}"),
    );

    // Rows scaled by 10 make the objectives far from quadratic, so the
    // damped phase is long relative to the short Newton tail. The 20% window
    // is then not met; the unit-step tail still is.
    let start = Instant::now();
    let (mut within, mut short_tail, mut worst_frac, mut runs) = (0, 0, 0.0f64, 0);
    for seed in 0..10 {
        for scale in [1.0, 10.0, 100.0] {
            let mut spec = InstanceSpec::new(Family::LogSumExpReg, 10, 2)
                .mu(1.0)
                .seed(seed);
            spec.row_scale = Some(10.0);
            let p: ProblemF64 = generate(&spec).unwrap();
            let trace = npgmo_solve(&p, &cfg(1e-12), &random_start(10, seed, scale)).unwrap();
            let steps: Vec<f64> = trace.records.iter().filter_map(|r| r.t).collect();
            let last_damped = steps.iter().rposition(|&t| t < 1.0).map_or(0, |i| i + 1);
            worst_frac = worst_frac.max(last_damped as f64 / steps.len() as f64);
            within += usize::from(unit_steps_check(&trace, 0.2).passed);
            short_tail += usize::from(steps.len() - last_damped < 3);
            runs += 1;
            s.keep(
                format!("ac4 stressed seed {seed} scale {scale}"),
                &trace,
                1.0,
                1e-12,
            );
        }
    }
    s.lines.push(Line {
        id: "AC4 eventual unit steps, rows scaled by 10 (soft)",
        passed: within == runs,
        soft: true,
        elapsed: start.elapsed(),
        detail: format!(
            "{within}/{runs} runs damp only in the first 20%; damping ends by {:.0}% of the steps at worst; \
             {short_tail} runs end with fewer than 3 unit steps",
            100.0 * worst_frac
        ),
    });
}

/// AC5, AC6 and AC7 share the high-accuracy log-sum-exp runs.
fn ac5_to_7(s: &mut Suite) {
    let start = Instant::now();
    let (mut r5, mut r6, mut r6_soft, mut r7) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut summary = Vec::new();
    let mut long_runs = 0;
    for seed in 0..10 {
        let p = lse(seed);
        let c = SolverConfigF64 {
            eps: 1e-12,
            ..cfg(1e-14)
        };
        let trace = npgmo_solve(&p, &c, &random_start(10, seed, 3.0)).unwrap();
        let x_star = reference_from_trace(&trace).unwrap();
        let rates = rate_report(&trace, &x_star, p.mu(), p.lip_hess(), 1.5);
        let sigma = c.sigma;
        let tau = tau_check(&trace, &x_star, p.mu(), &[(1.0 - sigma) * p.mu()]).unwrap();
        if tau.decades >= 4.0 {
            long_runs += 1;
        }
        summary.push(format!(
            "q{seed}={:.2}",
            rates.order.as_ref().map_or(f64::NAN, |o| o.q)
        ));
        for v in rates.verdicts {
            match v.name.as_str() {
                "ratios_decreasing" | "order_fit" => r5.push((seed, v)),
                "quadratic_constant_bound" | "quadratic_step_bound" => r6.push((seed, v)),
                "quadratic_constant_limit" => r6_soft.push((seed, v)),
                _ => {}
            }
        }
        r7.extend(tau.verdicts.into_iter().map(|v| (seed, v)));
        s.keep(format!("ac5 seed {seed}"), &trace, p.mu(), 1e-14);
    }
    let describe = |vs: &[(u64, Verdict)]| -> (bool, String) {
        let passed = vs.iter().all(|(_, v)| v.passed || !v.gates());
        let fails: Vec<String> = vs
            .iter()
            .filter(|(_, v)| !v.passed && v.gates())
            .map(|(seed, v)| format!("seed {seed} {}: {}", v.name, v.detail))
            .collect();
        let vacuous = vs.iter().filter(|(_, v)| v.margin.is_nan()).count();
        let w = worst(vs.iter().map(|(_, v)| v)).map_or(String::new(), |v| {
            format!("worst {} margin {:.3e}", v.name, v.margin)
        });
        (
            passed,
            format!(
                "{} verdicts ({vacuous} not applicable), {w} {fails:?}",
                vs.len()
            ),
        )
    };
    let (p5, d5) = describe(&r5);
    s.record(
        "AC5 superlinear rate",
        p5,
        start,
        format!("{d5}; {}", summary.join(" ")),
    );
    let (p6, d6) = describe(&r6);
    s.record("AC6 quadratic rate constant", p6, start, d6);
    let ratios: Vec<String> = r6_soft
        .iter()
        .map(|(seed, v)| format!("seed {seed}: {}", v.detail))
        .collect();
    s.lines.push(Line {
        id: "AC6 limit ratio within 10x of L2/mu (soft)",
        passed: r6_soft.iter().all(|(_, v)| v.passed),
        soft: true,
        elapsed: start.elapsed(),
        detail: ratios.join("; "),
    });
    let (mut p7, d7) = describe(&r7);
    // Without a run spanning four decades the τ → 1 part would be vacuous.
    p7 &= long_runs > 0 && r7.iter().any(|(_, v)| v.name == "tau_to_one");
    s.record(
        "AC7 tau behaviour",
        p7,
        start,
        format!("{long_runs} runs span ≥ 4 decades; {d7}"),
    );
}

/// `ψ_i(d)` from the definition, independent of the solver's own model code.
fn psi_max(p: &ProblemF64, ev: &SmoothEval<f64>, x: &[f64], d: &[f64]) -> f64 {
    let g = p.shared_nonsmooth();
    let xd = linalg::add(x, d);
    let dg = g.value(&xd) - g.value(x);
    ev.gradients
        .iter()
        .zip(&ev.hessians)
        .map(|(grad, h)| linalg::dot(grad, d) + dg + 0.5 * h.quad_form(d))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Grid search of the convex min-max model, refined around the incumbent.
fn brute_force_theta(p: &ProblemF64, x: &[f64], radius: f64) -> f64 {
    let n = x.len();
    let ev = p.eval_smooth(x).unwrap();
    let mut center = vec![0.0; n];
    let mut radius = radius;
    let mut best = f64::INFINITY;
    let steps: usize = if n == 1 { 4000 } else { 400 };
    for _ in 0..12 {
        let h = 2.0 * radius / steps as f64;
        let mut incumbent = center.clone();
        let mut idx = vec![0usize; n];
        'grid: loop {
            let d: Vec<f64> = idx
                .iter()
                .zip(&center)
                .map(|(&i, c)| c - radius + h * i as f64)
                .collect();
            let v = psi_max(p, &ev, x, &d);
            if v < best {
                best = v;
                incumbent = d;
            }
            for i in idx.iter_mut() {
                *i += 1;
                if *i <= steps {
                    continue 'grid;
                }
                *i = 0;
            }
            break;
        }
        center = incumbent;
        radius = 4.0 * h;
    }
    best
}

fn ac8(s: &mut Suite) {
    let start = Instant::now();
    let mut worst_diff = 0.0f64;
    let mut bad = Vec::new();
    for i in 0..25u64 {
        let n = 1 + (i as usize % 2);
        let m = 1 + (i as usize % 3);
        let family = if i % 5 < 3 {
            Family::Quadratic
        } else {
            Family::LogSumExpReg
        };
        let base: ProblemF64 =
            generate(&InstanceSpec::new(family, n, m).cond(20.0).seed(100 + i)).unwrap();
        let term = match i % 3 {
            0 => NonsmoothTerm::Zero,
            1 => NonsmoothTerm::ScaledL1(0.3),
            _ => NonsmoothTerm::BoxIndicator {
                lo: vec![-1.0; n],
                hi: vec![1.0; n],
            },
        };
        let boxed = matches!(term, NonsmoothTerm::BoxIndicator { .. });
        let p = attach_nonsmooth(&base, vec![term; m]).unwrap();
        let mut x = random_start::<f64>(n, i, 1.5);
        if boxed {
            x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        }
        let r = solve_direction(&x, &p, &DirectionOptions::with_tol_gap(1e-12)).unwrap();
        let grid = brute_force_theta(&p, &x, r.dnorm() + 1.0);
        let diff = (grid - r.theta).abs();
        worst_diff = worst_diff.max(diff);
        if diff > 1e-4 || r.gap > 1e-12 {
            bad.push(format!(
                "state {i}: θ {} grid {grid} gap {:e}",
                r.theta, r.gap
            ));
        }
    }
    let mut solves = 0;
    let mut over = Vec::new();
    for run in &s.runs {
        for rec in &run.trace.records {
            solves += 1;
            if rec.gap.is_nan() || rec.gap > run.tol_gap {
                over.push(format!("{} k={} gap {:e}", run.label, rec.k, rec.gap));
            }
        }
    }
    s.record(
        "AC8 subproblem correctness",
        bad.is_empty() && over.is_empty(),
        start,
        format!(
            "25 states, max |θ − grid| = {worst_diff:.2e} (≤ 1e-4); gap ≤ tol_gap on {}/{solves} traced solves {bad:?} {over:?}",
            solves - over.len()
        ),
    );
}

fn ac9(s: &mut Suite) {
    let start = Instant::now();
    let mut max_critical = 0.0f64;
    let mut min_noncritical = f64::INFINITY;
    for i in 0..10u64 {
        let (n, m) = ([2, 5, 10][i as usize % 3], 2 + i as usize % 2);
        let p: ProblemF64 = generate(
            &InstanceSpec::new(Family::Quadratic, n, m)
                .cond(100.0)
                .seed(200 + i),
        )
        .unwrap();
        // Minimizer of Σ λ_i f_i: Pareto optimal for λ in the simplex.
        let lam = project_simplex(&random_start::<f64>(m, i, 1.0));
        let mut a = Matrix::zeros(n, n);
        let mut b = vec![0.0; n];
        let zero = vec![0.0; n];
        for ((l, ai), f) in lam
            .as_slice()
            .iter()
            .zip(p.quadratic_hessians().unwrap())
            .zip(p.smooth())
        {
            a.add_scaled(*l, ai);
            linalg::axpy(-*l, &f.gradient(&zero), &mut b);
        }
        let x = Cholesky::new(&a).unwrap().solve(&b);
        max_critical = max_critical.max(criticality_measure(&p, &x, 1e-12).unwrap());

        let far: Vec<f64> = linalg::add(&x, &random_start::<f64>(n, 300 + i, 5.0));
        min_noncritical = min_noncritical.min(criticality_measure(&p, &far, 1e-12).unwrap());
    }
    s.record(
        "AC9 criticality characterization",
        max_critical <= 1e-8 && min_noncritical >= 1e-3,
        start,
        format!("critical max ‖d‖ = {max_critical:.2e} (≤ 1e-8), noncritical min ‖d‖ = {min_noncritical:.2e} (≥ 1e-3)"),
    );
}

fn ac10(s: &mut Suite) {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut rows = Vec::new();
    for (n, seed) in [(10, 0u64), (10, 1), (20, 2)] {
        let p: ProblemF64 = generate(
            &InstanceSpec::new(Family::Quadratic, n, 2)
                .cond(1e4)
                .seed(seed),
        )
        .unwrap();
        let x0 = random_start::<f64>(n, seed, 3.0);
        let c = SolverConfigF64 {
            eps: 1e-8,
            max_outer: 5_000_000,
            ..Default::default()
        };
        let newton = npgmo_solve(&p, &c, &x0).unwrap();
        let first = pgmo_solve(
            &p,
            &SolverConfigF64 {
                variant: Variant::Pgmo {
                    ell: p.lip_grad().unwrap(),
                },
                ..c
            },
            &x0,
        )
        .unwrap();
        let k_newton = newton.iterations();
        let newton_ok = newton.status == TerminalStatus::CriticalReached
            && newton.final_dnorm().unwrap() < 1e-8
            && k_newton <= 2;
        // PGMO may stop at the working-precision limit before ‖d‖ < 1e-8; its
        // count is then a lower bound on what it would need.
        let reached = first.final_dnorm().unwrap() < 1e-8;
        if !newton_ok || first.status.is_failure() || first.iterations() < 50 * k_newton.max(1) {
            bad.push(format!(
                "seed {seed}: {:?} {:?}",
                newton.status, first.status
            ));
        }
        rows.push(format!(
            "n={n} seed={seed}: NPGMO {k_newton}, PGMO {}{} (final ‖d‖ {:.1e})",
            if reached { "" } else { "≥" },
            first.iterations(),
            first.final_dnorm().unwrap()
        ));
        s.keep(format!("ac10 seed {seed}"), &newton, p.mu(), c.tol_gap);
    }
    let elapsed = start.elapsed();
    s.record(
        "AC10 baseline contrast",
        bad.is_empty() && elapsed < Duration::from_secs(30),
        start,
        format!("{}; {elapsed:.2?} (< 30 s) {bad:?}", rows.join("; ")),
    );
}

fn ac11(s: &mut Suite) {
    let start = Instant::now();
    let mut verdicts = Vec::new();
    for seed in 0..10u64 {
        let (n, m) = (6, 2 + seed as usize % 2);
        let base: ProblemF64 = generate(
            &InstanceSpec::new(Family::Quadratic, n, m)
                .cond(100.0)
                .seed(400 + seed),
        )
        .unwrap();
        for term in [
            NonsmoothTerm::Zero,
            NonsmoothTerm::ScaledL1(0.1),
            NonsmoothTerm::BoxIndicator {
                lo: vec![-1.0; n],
                hi: vec![1.0; n],
            },
        ] {
            let boxed = matches!(term, NonsmoothTerm::BoxIndicator { .. });
            let p = attach_nonsmooth(&base, vec![term; m]).unwrap();
            let clamp = |x: Vec<f64>| -> Vec<f64> {
                if boxed {
                    x.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect()
                } else {
                    x
                }
            };
            let x0 = clamp(random_start(n, seed, 2.0));
            let trace = npgmo_solve(&p, &cfg(1e-12), &x0).unwrap();
            let probes = |k: usize| -> Vec<Vec<f64>> {
                let center = &trace.records[k].x;
                random_probes(
                    center,
                    1.0 + linalg::norm(center),
                    20,
                    1000 * seed + k as u64,
                )
                .into_iter()
                .map(clamp)
                .collect()
            };
            verdicts.push(check_fundamental_inequality_quadratic(&trace, &p, &probes).unwrap());
            s.keep(
                format!("ac11 seed {seed} box {boxed}"),
                &trace,
                p.mu(),
                1e-12,
            );
        }
    }
    let passed = verdicts.iter().all(|v| v.passed);
    let w = worst(&verdicts).unwrap();
    s.record(
        "AC11 quadratic fundamental inequality",
        passed,
        start,
        format!(
            "{} traces, 20 probes per unit step, min (rhs − lhs) = {:.3e} (≥ −1e-8)",
            verdicts.len(),
            w.margin - 1e-8
        ),
    );
}

fn ac2(s: &mut Suite) {
    let start = Instant::now();
    let verdicts: Vec<(String, Verdict)> = s
        .runs
        .iter()
        .map(|r| (r.label.clone(), descent_bound_check(&r.trace, r.mu, 1e-8)))
        .collect();
    let records: usize = s.runs.iter().map(|r| r.trace.records.len()).sum();
    let fails: Vec<&String> = verdicts
        .iter()
        .filter(|(_, v)| !v.passed)
        .map(|(l, _)| l)
        .collect();
    let w = worst(verdicts.iter().map(|(_, v)| v)).unwrap();
    s.record(
        "AC2 descent bound",
        fails.is_empty(),
        start,
        format!(
            "{} traces, {records} iterations, min margin {:.3e} {fails:?}",
            verdicts.len(),
            w.margin
        ),
    );
}

fn ac3(s: &mut Suite) {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut steps = 0;
    let mut margin = f64::INFINITY;
    for r in &s.runs {
        let mut buf = Vec::new();
        write_trace_csv(&r.trace, &mut buf).unwrap();
        let rows = read_trace_csv(buf.as_slice()).unwrap();
        let v = check_sufficient_decrease_rows(&rows, r.trace.sigma);
        steps += r.trace.iterations();
        margin = margin.min(v.margin);
        if !v.passed || rows.len() != r.trace.records.len() {
            fails.push(format!("{}: {}", r.label, v.detail));
        }
    }
    s.record(
        "AC3 sufficient decrease from CSV",
        fails.is_empty(),
        start,
        format!(
            "{} traces, {steps} steps, min margin {margin:.3e} {fails:?}",
            s.runs.len()
        ),
    );
}

fn main() -> ExitCode {
    let mut s = Suite::default();
    ac1(&mut s);
    ac4(&mut s);
    ac5_to_7(&mut s);
    ac9(&mut s);
    ac10(&mut s);
    ac11(&mut s);
    // Whole-suite criteria run over every trace collected above.
    ac8(&mut s);
    ac2(&mut s);
    ac3(&mut s);

    s.lines.sort_by_key(|l| {
        let digits: String = l.id[2..].chars().take_while(char::is_ascii_digit).collect();
        (digits.parse::<u32>().unwrap(), l.soft)
    });
    let mut gating_failed = false;
    for l in &s.lines {
        let tag = match (l.passed, l.soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft, non-gating)",
            (false, false) => "FAIL",
        };
        gating_failed |= !l.passed && !l.soft;
        println!("{tag}  {}  [{:.2?}]  {}", l.id, l.elapsed, l.detail);
    }
    if gating_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
