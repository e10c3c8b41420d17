use std::sync::Arc;

use moprox::analysis::{
    check_fundamental_inequality_quadratic, check_quadratic_termination, criticality_measure,
    estimate_order, tau_bracket, tau_check,
};
use moprox::linalg::Matrix;
use moprox::problem::Quadratic;
use moprox::zoo::{attach_nonsmooth, generate, random_probes, random_start};
use moprox::{
    npgmo_solve, Family, InstanceSpec, NonsmoothTerm, ProblemF64, ProblemInstance, SmoothObjective,
    SolverConfigF64,
};

fn symmetric_pair() -> ProblemF64 {
    let f = |c: f64| -> Arc<dyn SmoothObjective<f64>> {
        Arc::new(Quadratic::centered(Matrix::identity(1), &[c]).unwrap())
    };
    ProblemInstance::with_shared_nonsmooth(vec![f(1.0), f(-1.0)], NonsmoothTerm::Zero, 1.0).unwrap()
}

fn l1_example() -> ProblemF64 {
    let f: Arc<dyn SmoothObjective<f64>> =
        Arc::new(Quadratic::centered(Matrix::identity(1), &[0.0]).unwrap());
    ProblemInstance::with_shared_nonsmooth(vec![f], NonsmoothTerm::ScaledL1(1.0), 1.0).unwrap()
}

#[test]
fn order_of_linear_sequence_is_one() {
    let e: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
    let o = estimate_order(&e, 0.0).unwrap();
    assert!((o.q - 1.0).abs() <= 0.05, "q = {}", o.q);
}

#[test]
fn order_of_doubly_exponential_sequence_is_two() {
    let e: Vec<f64> = (0..9).map(|k| 2f64.powf(-(2f64.powi(k)))).collect();
    let o = estimate_order(&e, 0.0).unwrap();
    assert!((o.q - 2.0).abs() <= 0.05, "q = {}", o.q);
}

#[test]
fn order_of_superlinear_sequence_exceeds_linear() {
    // Local log-log slope is (2k + 3) / (2k + 1): above 1.2 only through k = 4,
    // so the fitted order depends on where the window sits.
    let seq = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|k| 0.5f64.powf((k * (k + 1)) as f64 / 2.0))
            .collect()
    };
    let short = estimate_order(&seq(6), 0.0).unwrap();
    assert!(short.q > 1.2, "q = {}", short.q);
    let long = estimate_order(&seq(20), 0.0).unwrap();
    assert!(long.q > 1.0 && long.q < short.q, "q = {}", long.q);
}

#[test]
fn bracket_matches_formula() {
    // μ = 1, ε = 0.1: (1 ± √0.19) / 0.9
    let (lo, hi) = tau_bracket(1.0, 0.5, 0.1).unwrap();
    let r = 0.19f64.sqrt();
    assert!((lo - (1.0 - r) / 0.9).abs() < 1e-15 && (hi - (1.0 + r) / 0.9).abs() < 1e-15);
    assert!((lo - 0.6268).abs() < 5e-5 && (hi - 1.5954).abs() < 5e-5);
    // symmetric about μ / (μ − ε)
    assert!(((lo + hi) / 2.0 - 1.0 / 0.9).abs() < 1e-15);
}

#[test]
fn criticality_examples() {
    let p = symmetric_pair();
    assert!(criticality_measure(&p, &[0.0], 1e-12).unwrap() <= 1e-12);
    assert!((criticality_measure(&p, &[2.0], 1e-12).unwrap() - 1.0).abs() <= 1e-9);
    assert!(criticality_measure(&l1_example(), &[0.0], 1e-12).unwrap() <= 1e-12);
}

#[test]
fn one_step_quadratic_has_unit_tau() {
    let p = symmetric_pair();
    let trace = npgmo_solve(&p, &SolverConfigF64::default(), &[2.0]).unwrap();
    // x* = 1, so τ_0 = |1 − 2| / |2 − 1|
    let report = tau_check(&trace, &[1.0], 1.0, &[0.5]).unwrap();
    assert_eq!(report.tau[0], Some(1.0));
}

#[test]
fn termination_on_hand_instance_and_known_pareto_point() {
    let p = symmetric_pair();
    let cfg = SolverConfigF64 {
        tol_gap: 1e-12,
        ..Default::default()
    };
    let (v, runs) = check_quadratic_termination(&p, &cfg, &[vec![2.0], vec![0.5]]).unwrap();
    assert!(v.passed, "{v:?}");
    assert_eq!(runs[0].t0, Some(1.0));
    assert_eq!(runs[0].criticality, 0.0);
    // 0.5 already lies in the Pareto set [−1, 1]: nothing to do.
    assert_eq!(runs[1].t0, None);
    assert_eq!(runs[1].iterations_to_stop, 0);
}

#[test]
fn termination_on_random_spd_instances() {
    let cfg = SolverConfigF64 {
        tol_gap: 1e-12,
        ..Default::default()
    };
    for seed in 0..10 {
        let p: ProblemF64 = generate(
            &InstanceSpec::new(Family::Quadratic, 20, 3)
                .cond(100.0)
                .seed(seed),
        )
        .unwrap();
        let starts: Vec<Vec<f64>> = (0..3)
            .map(|s| random_start(20, 10 * seed + s, 3.0))
            .collect();
        let (v, runs) = check_quadratic_termination(&p, &cfg, &starts).unwrap();
        assert!(v.passed, "seed {seed}: {v:?} {runs:?}");
        assert!(runs.iter().all(|r| r.criticality <= 1e-5));
    }
}

#[test]
fn termination_rejects_non_quadratic_problem() {
    let p: ProblemF64 = generate(&InstanceSpec::new(Family::LogSumExpReg, 3, 2)).unwrap();
    assert!(check_quadratic_termination(&p, &SolverConfigF64::default(), &[vec![0.0; 3]]).is_err());
}

#[test]
fn fundamental_inequality_examples() {
    let p = symmetric_pair();
    let trace = npgmo_solve(&p, &SolverConfigF64::default(), &[2.0]).unwrap();
    let next = trace.records[1].x.clone();

    // Probe at x^{k+1}: both sides vanish.
    let at_next =
        check_fundamental_inequality_quadratic(&trace, &p, &|_| vec![next.clone()]).unwrap();
    assert!(at_next.passed);
    assert!(at_next.margin.abs() <= 1e-8 + 1e-15);

    // Probe at x* = 1 (= x¹ here) and at random points.
    let star = check_fundamental_inequality_quadratic(&trace, &p, &|_| vec![vec![1.0]]).unwrap();
    assert!(star.passed);
    let random = check_fundamental_inequality_quadratic(&trace, &p, &|k| {
        random_probes(&[2.0], 3.0, 20, k as u64)
    })
    .unwrap();
    assert!(random.passed, "{random:?}");
}

#[test]
fn fundamental_inequality_on_l1_and_box_quadratics() {
    let cfg = SolverConfigF64 {
        tol_gap: 1e-12,
        ..Default::default()
    };
    for seed in 0..5 {
        let base: ProblemF64 = generate(
            &InstanceSpec::new(Family::Quadratic, 6, 3)
                .cond(100.0)
                .seed(seed),
        )
        .unwrap();
        for term in [
            NonsmoothTerm::ScaledL1(0.1),
            NonsmoothTerm::BoxIndicator {
                lo: vec![-1.0; 6],
                hi: vec![1.0; 6],
            },
        ] {
            let p = attach_nonsmooth(&base, vec![term; 3]).unwrap();
            let x0: Vec<f64> = random_start::<f64>(6, seed, 1.0)
                .iter()
                .map(|v| v.clamp(-1.0, 1.0))
                .collect();
            let trace = npgmo_solve(&p, &cfg, &x0).unwrap();
            let probes = |k: usize| -> Vec<Vec<f64>> {
                random_probes(&x0, 0.5, 20, 1000 * seed + k as u64)
                    .into_iter()
                    .map(|x| x.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
                    .collect()
            };
            let v = check_fundamental_inequality_quadratic(&trace, &p, &probes).unwrap();
            assert!(v.passed, "seed {seed}: {v:?}");
        }
    }
}
