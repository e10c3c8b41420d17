//! The Newton-type proximal direction subproblem
//!
//! ```text
//! θ(x) = min_d max_i ψ_i(d),   ψ_i(d) = ⟨∇f_i(x), d⟩ + g(x+d) − g(x) + ½⟨d, ∇²f_i(x) d⟩
//! ```
//!
//! is solved through its minimax dual `max_{λ ∈ Δ_m} φ(λ)`, `φ(λ) = min_d Σ λ_i ψ_i(d)`.
//! For fixed weights the inner problem is a strongly convex quadratic plus the
//! shared nonsmooth term; its minimizer `d(λ)` is unique and `ψ(d(λ))` is a
//! supergradient of `φ` at `λ`. The weights are improved by monotone ascent:
//! each round first tries a projected Newton step on a local quadratic model of
//! `φ`, and falls back to a backtracked projected supergradient step.
//!
//! The duality gap `max_i ψ_i(d) − Σ λ_i ψ_i(d)` certifies how far `(d, λ)` is
//! from the saddle point.

use thiserror::Error;

use crate::error::Error;
use crate::linalg::{self, Cholesky, Matrix};
use crate::problem::{NonsmoothTerm, ProblemInstance, SmoothEval};
use crate::scalar::Scalar;

/// A point of the unit simplex `Δ_m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexWeights<T>(Vec<T>);

impl<T: Scalar> SimplexWeights<T> {
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0);
        Self(vec![T::one() / T::lit(m as f64); m])
    }

    /// Projects onto the simplex; identical to [`project_simplex`].
    pub fn project(v: &[T]) -> Self {
        project_simplex(v)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Clamps negatives and rescales to unit sum.
    fn renormalized(mut v: Vec<T>) -> Self {
        v.iter_mut().for_each(|x| *x = x.max(T::zero()));
        let s: T = v.iter().copied().sum();
        if s > T::zero() {
            v.iter_mut().for_each(|x| *x = *x / s);
            Self(v)
        } else {
            Self::uniform(v.len())
        }
    }
}

/// Euclidean projection onto `Δ_m` by sorting and thresholding.
pub fn project_simplex<T: Scalar>(v: &[T]) -> SimplexWeights<T> {
    assert!(
        !v.is_empty(),
        "cannot project an empty vector onto the simplex"
    );
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum = cumsum + uj;
        let t = (cumsum - T::one()) / T::lit((j + 1) as f64);
        if uj - t > T::zero() {
            tau = t;
        }
    }
    SimplexWeights::renormalized(v.iter().map(|&x| (x - tau).max(T::zero())).collect())
}

/// Tolerances and caps for the direction solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionOptions<T> {
    /// Stop the dual ascent once the duality gap is at most this.
    pub tol_gap: T,
    /// Fixed-point residual tolerance of the inner proximal-gradient solve.
    pub inner_tol: T,
    pub max_dual_iters: usize,
    pub max_inner_iters: usize,
}

impl<T: Scalar> DirectionOptions<T> {
    /// Inner tolerance defaults to `tol_gap / 10`.
    pub fn with_tol_gap(tol_gap: T) -> Self {
        Self {
            tol_gap,
            inner_tol: tol_gap / T::lit(10.0),
            ..Self::default()
        }
    }
}

impl<T: Scalar> Default for DirectionOptions<T> {
    fn default() -> Self {
        let tol_gap = T::lit(1e-10).max(T::lit(100.0) * T::epsilon());
        Self {
            tol_gap,
            inner_tol: tol_gap / T::lit(10.0),
            max_dual_iters: 500,
            max_inner_iters: 10_000,
        }
    }
}

/// Outcome of a direction solve.
#[derive(Clone, Debug)]
pub struct DirectionResult<T> {
    pub d: Vec<T>,
    /// `max_i ψ_i(d)`
    pub theta: T,
    pub lambda: SimplexWeights<T>,
    pub gap: T,
    /// Per-objective model values `ψ_i(d)`.
    pub model_values: Vec<T>,
    pub inner_iters: usize,
    pub dual_iters: usize,
    /// The ascent stalled with `gap` above `tol_gap` but under the
    /// rounding-error bound of its own evaluation.
    pub precision_limited: bool,
    /// `(φ, rounding noise of φ)` at the start and after every accepted
    /// ascent step.
    pub phi_history: Vec<(T, T)>,
}

impl<T: Scalar> DirectionResult<T> {
    pub fn dnorm(&self) -> T {
        linalg::norm(&self.d)
    }
}

#[derive(Debug, Error)]
pub enum SubproblemError<T: Scalar> {
    #[error(transparent)]
    Solver(#[from] Error),

    #[error("dual ascent stopped after {} iterations with gap {:e} above tolerance {:e}", .best.dual_iters, .best.gap, .tol)]
    DualNonConvergence {
        best: Box<DirectionResult<T>>,
        tol: T,
    },
}

impl<T: Scalar> From<SubproblemError<T>> for Error {
    fn from(e: SubproblemError<T>) -> Self {
        match e {
            SubproblemError::Solver(e) => e,
            SubproblemError::DualNonConvergence { best, tol } => Error::DualNonConvergence {
                iterations: best.dual_iters,
                gap: best.gap.as_f64(),
                tol: tol.as_f64(),
            },
        }
    }
}

/// `ψ_i(d) = ⟨∇f_i, d⟩ + g(x+d) − g(x) + ½⟨d, ∇²f_i d⟩` for every objective.
pub fn model_values<T: Scalar>(
    d: &[T],
    eval: &SmoothEval<T>,
    g: &NonsmoothTerm<T>,
    x: &[T],
) -> Vec<T> {
    let xd = linalg::add(x, d);
    let gx = g.value(x);
    let dg = if gx == g.value(&xd) {
        T::zero()
    } else {
        g.value(&xd) - gx
    };
    let half = T::lit(0.5);
    eval.gradients
        .iter()
        .zip(&eval.hessians)
        .map(|(grad, h)| linalg::dot(grad, d) + dg + half * h.quad_form(d))
        .collect()
}

/// `max_i ψ_i − Σ λ_i ψ_i`, clamped at zero against rounding.
pub fn duality_gap<T: Scalar>(lambda: &SimplexWeights<T>, model_vals: &[T]) -> T {
    let max = model_vals.iter().copied().fold(T::neg_infinity(), T::max);
    let avg = linalg::dot(lambda.as_slice(), model_vals);
    (max - avg).max(T::zero())
}

/// Minimizer of `⟨∇f_λ, d⟩ + g(x+d) + ½ dᵀH_λ d` for fixed weights.
pub fn inner_minimize<T: Scalar>(
    lambda: &SimplexWeights<T>,
    eval: &SmoothEval<T>,
    g: &NonsmoothTerm<T>,
    x: &[T],
    tol: T,
    max_iters: usize,
) -> Result<Vec<T>, Error> {
    let (grad, h) = eval.weighted(lambda.as_slice());
    InnerProblem {
        grad: &grad,
        h: &h,
        g,
        x,
    }
    .solve(None, tol, max_iters)
    .map(|(d, _)| d)
}

struct InnerProblem<'a, T> {
    grad: &'a [T],
    h: &'a Matrix<T>,
    g: &'a NonsmoothTerm<T>,
    x: &'a [T],
}

impl<T: Scalar> InnerProblem<'_, T> {
    /// Returns `(d, iterations)`.
    fn solve(
        &self,
        warm: Option<&[T]>,
        tol: T,
        max_iters: usize,
    ) -> Result<(Vec<T>, usize), Error> {
        let chol = Cholesky::new(self.h).ok_or(Error::SingularMetric)?;
        if self.g.is_zero() {
            let rhs: Vec<T> = self.grad.iter().map(|&v| -v).collect();
            return Ok((chol.solve(&rhs), 1));
        }
        let (mut d, iters) = self.accelerated_prox_gradient(warm, tol, max_iters)?;
        self.g.snap_into_domain(self.x, &mut d);
        Ok((d, iters))
    }

    /// `∇q(d) = ∇f_λ + H d`
    fn smooth_gradient(&self, d: &[T]) -> Vec<T> {
        linalg::add(self.grad, &self.h.matvec(d))
    }

    /// Forward-backward map `T(d) = prox_{s g}(x + d − s ∇q(d)) − x`.
    fn forward_backward(&self, d: &[T], step: T) -> Vec<T> {
        let gq = self.smooth_gradient(d);
        let v: Vec<T> = (0..d.len())
            .map(|j| self.x[j] + d[j] - step * gq[j])
            .collect();
        linalg::sub(&self.g.prox_unchecked(&v, step), self.x)
    }

    fn accelerated_prox_gradient(
        &self,
        warm: Option<&[T]>,
        tol: T,
        max_iters: usize,
    ) -> Result<(Vec<T>, usize), Error> {
        const POLISH_EVERY: usize = 10;
        let n = self.x.len();
        let lmax = linalg::power_iteration(self.h, 30) * T::lit(1.1);
        let step = T::one() / lmax;
        // Start from a feasible point so g(x + d) stays finite.
        let start = warm.map_or_else(|| vec![T::zero(); n], <[T]>::to_vec);
        let mut d = linalg::sub(
            &self.g.prox_unchecked(&linalg::add(self.x, &start), step),
            self.x,
        );
        let mut y = d.clone();
        let mut t = T::one();
        let mut residual = T::infinity();
        for it in 0..max_iters {
            if it % POLISH_EVERY == 0 {
                if let Some(p) = self.polish(&d) {
                    let r = linalg::dist(&p, &self.forward_backward(&p, step));
                    if r <= tol {
                        return Ok((p, it + 1));
                    }
                }
            }
            let d_next = self.forward_backward(&y, step);
            residual = linalg::dist(&d_next, &y);
            if residual <= tol {
                return Ok((d_next, it + 1));
            }
            // gradient-based adaptive restart
            let restart =
                linalg::dot(&linalg::sub(&y, &d_next), &linalg::sub(&d_next, &d)) > T::zero();
            let t_next = if restart {
                T::one()
            } else {
                (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0)
            };
            let beta = if restart {
                T::zero()
            } else {
                (t - T::one()) / t_next
            };
            y = (0..n)
                .map(|j| d_next[j] + beta * (d_next[j] - d[j]))
                .collect();
            d = d_next;
            t = t_next;
        }
        Err(Error::InnerNonConvergence {
            iterations: max_iters,
            residual: residual.as_f64(),
        })
    }

    /// Exact solve on the active set suggested by `d`: coordinates where `g` is
    /// nonsmooth at `x + d` are pinned there, the rest solve the reduced
    /// Newton system. The caller verifies the candidate.
    fn polish(&self, d: &[T]) -> Option<Vec<T>> {
        let n = d.len();
        let u = linalg::add(self.x, d);
        let free = self.g.free_coordinates(&u);
        let mut out = vec![T::zero(); n];
        let mut is_free = vec![false; n];
        for &j in &free {
            is_free[j] = true;
        }
        for j in (0..n).filter(|&j| !is_free[j]) {
            out[j] = u[j] - self.x[j];
        }
        if free.is_empty() {
            return Some(out);
        }
        // rhs_F = −∇f_F − H_{F,A} d_A − (∇g)_F
        let mut rhs: Vec<T> = free.iter().map(|&j| -self.grad[j]).collect();
        for (a, &j) in free.iter().enumerate() {
            for k in (0..n).filter(|&k| !is_free[k]) {
                rhs[a] = rhs[a] - self.h[(j, k)] * out[k];
            }
            if let NonsmoothTerm::ScaledL1(rho) = self.g {
                rhs[a] = rhs[a] - *rho * u[j].signum();
            }
        }
        let sol = Cholesky::new(&self.h.submatrix(&free))?.solve(&rhs);
        for (a, &j) in free.iter().enumerate() {
            out[j] = sol[a];
        }
        Some(out)
    }

    /// Coordinates where `g` is smooth at `x + d`.
    fn free_set(&self, d: &[T]) -> Vec<usize> {
        self.g.free_coordinates(&linalg::add(self.x, d))
    }
}

/// Solves the direction subproblem at `x` with a fresh oracle evaluation.
pub fn solve_direction<T: Scalar>(
    x: &[T],
    problem: &ProblemInstance<T>,
    opts: &DirectionOptions<T>,
) -> Result<DirectionResult<T>, SubproblemError<T>> {
    let eval = problem.eval_smooth(x)?;
    solve_direction_with_eval(x, &eval, problem.shared_nonsmooth(), opts)
}

/// Solves the direction subproblem for an already evaluated point. The
/// Hessians in `eval` define the metric, so substituted Hessians give the
/// first-order variant.
pub fn solve_direction_with_eval<T: Scalar>(
    x: &[T],
    eval: &SmoothEval<T>,
    g: &NonsmoothTerm<T>,
    opts: &DirectionOptions<T>,
) -> Result<DirectionResult<T>, SubproblemError<T>> {
    DualAscent {
        x,
        eval,
        g,
        opts,
        inner_iters: 0,
        history: Vec::new(),
    }
    .run()
}

#[derive(Clone, Debug)]
struct DualState<T> {
    lambda: SimplexWeights<T>,
    d: Vec<T>,
    psi: Vec<T>,
    phi: T,
    gap: T,
    /// Rounding-level uncertainty of each `ψ_i`, hence of `φ` and the gap.
    noise: T,
}

impl<T: Scalar> DualState<T> {
    /// Clear ascent, or a roundoff-level change in `φ` that shrinks the gap.
    fn improved_by(&self, cs: &Self) -> bool {
        let tol = self.noise.max(cs.noise);
        cs.phi > self.phi + tol || (cs.phi >= self.phi - tol && cs.gap < self.gap)
    }
}

const REFINE_STEPS: usize = 3;
const STALL_ITERS: usize = 25;

struct DualAscent<'a, T> {
    x: &'a [T],
    eval: &'a SmoothEval<T>,
    g: &'a NonsmoothTerm<T>,
    opts: &'a DirectionOptions<T>,
    inner_iters: usize,
    history: Vec<(T, T)>,
}

impl<T: Scalar> DualAscent<'_, T> {
    fn evaluate(
        &mut self,
        lambda: SimplexWeights<T>,
        warm: Option<&[T]>,
    ) -> Result<DualState<T>, Error> {
        let (grad, h) = self.eval.weighted(lambda.as_slice());
        let inner = InnerProblem {
            grad: &grad,
            h: &h,
            g: self.g,
            x: self.x,
        };
        let (d, iters) = inner.solve(warm, self.opts.inner_tol, self.opts.max_inner_iters)?;
        self.inner_iters += iters;
        let psi = model_values(&d, self.eval, self.g, self.x);
        let phi = linalg::dot(lambda.as_slice(), &psi);
        let gap = duality_gap(&lambda, &psi);
        let noise = self.psi_noise(&d);
        Ok(DualState {
            lambda,
            d,
            psi,
            phi,
            gap,
            noise,
        })
    }

    /// `4 n ε` times the magnitudes summed into the largest `ψ_i`.
    fn psi_noise(&self, d: &[T]) -> T {
        let xd = linalg::add(self.x, d);
        let gsum = self.g.value(self.x).abs() + self.g.value(&xd).abs();
        let terms = (0..self.eval.m())
            .map(|i| {
                let lin: T = self.eval.gradients[i]
                    .iter()
                    .zip(d)
                    .map(|(a, b)| (*a * *b).abs())
                    .sum();
                lin + self.eval.hessians[i].quad_form(d).abs()
            })
            .fold(T::zero(), T::max);
        T::lit(4.0 * self.x.len() as f64) * T::epsilon() * (gsum + terms)
    }

    /// `d = 0` has `max ψ = 0`, so a roundoff-positive `θ` is replaced by it;
    /// the gap is then `0 − φ(λ)`.
    fn finish(&self, s: DualState<T>, dual_iters: usize) -> DirectionResult<T> {
        let theta = s.psi.iter().copied().fold(T::neg_infinity(), T::max);
        let (d, theta, gap, psi) = if theta > T::zero() {
            let n = s.d.len();
            (
                vec![T::zero(); n],
                T::zero(),
                (-s.phi).max(T::zero()),
                vec![T::zero(); s.psi.len()],
            )
        } else {
            (s.d, theta, s.gap, s.psi)
        };
        DirectionResult {
            d,
            theta,
            lambda: s.lambda,
            gap,
            model_values: psi,
            inner_iters: self.inner_iters,
            dual_iters,
            precision_limited: false,
            phi_history: self.history.clone(),
        }
    }

    fn run(mut self) -> Result<DirectionResult<T>, SubproblemError<T>> {
        let m = self.eval.m();
        let mut state = self.evaluate(SimplexWeights::uniform(m), None)?;
        self.history.push((state.phi, state.noise));
        if m == 1 {
            return Ok(self.finish(state, 0));
        }
        let mut best = state.clone();
        let mut step = T::one();
        let mut iters = 0;
        let mut since_best = 0;
        while iters < self.opts.max_dual_iters {
            if state.gap <= self.opts.tol_gap {
                return Ok(self.refine(state, iters)?);
            }
            iters += 1;
            let next = match self.newton_step(&state)? {
                Some(s) => Some(s),
                None => self.supergradient_step(&state, &mut step)?,
            };
            match next {
                Some(s) => state = s,
                None => break,
            }
            self.history.push((state.phi, state.noise));
            if state.gap < best.gap {
                best = state.clone();
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL_ITERS {
                    break;
                }
            }
        }
        if best.gap <= self.opts.tol_gap {
            return Ok(self.refine(best, iters)?);
        }
        if best.gap <= self.rounding_floor(&best) {
            let mut r = self.finish(best, iters);
            r.precision_limited = true;
            return Ok(r);
        }
        Err(SubproblemError::DualNonConvergence {
            best: Box::new(self.finish(best, iters)),
            tol: self.opts.tol_gap,
        })
    }

    /// Rounding-error bound on the gap evaluated at `s`: `ψ` values carry
    /// `n ε Σ|ψ_i|` from summation, `κ(H_λ) n ε ‖d‖ max_i ‖∇f_i + ∇²f_i d‖`
    /// from the forward error of the inner solve, and `m ε ‖J‖² / λ_min(H_λ)`
    /// because `λ` itself is only resolved to `ε`.
    fn rounding_floor(&self, s: &DualState<T>) -> T {
        let n = T::lit(self.x.len() as f64);
        let eps = T::epsilon();
        let (_, h) = self.eval.weighted(s.lambda.as_slice());
        let Some(chol) = Cholesky::new(&h) else {
            return T::zero();
        };
        let lmin = linalg::inverse_power_iteration(&h, &chol, 30);
        let kappa = linalg::power_iteration(&h, 30) / lmin;
        let m = T::lit(self.eval.m() as f64);
        let jmax = (0..self.eval.m())
            .map(|i| {
                let hd = self.eval.hessians[i].matvec(&s.d);
                linalg::norm(&linalg::add(&self.eval.gradients[i], &hd))
            })
            .fold(T::zero(), T::max);
        let lambda_res = m * eps * jmax * jmax / lmin;
        T::lit(8.0) * (s.noise + n * eps * kappa * jmax * linalg::norm(&s.d) + lambda_res)
    }

    /// A converged gap only bounds `‖d − d*‖` by `√(2 gap / μ)`. A few more
    /// Newton steps, kept only while they shrink the gap, usually land on the
    /// exact dual face and pin `d` down to roundoff, which the outer
    /// `‖d‖ < ε` test needs near critical points.
    fn refine(
        &mut self,
        mut state: DualState<T>,
        mut iters: usize,
    ) -> Result<DirectionResult<T>, Error> {
        for _ in 0..REFINE_STEPS {
            if state.gap == T::zero() {
                break;
            }
            match self.newton_step(&state)? {
                Some(s) if s.gap < state.gap => {
                    self.history.push((s.phi, s.noise));
                    state = s;
                    iters += 1;
                }
                _ => break,
            }
        }
        Ok(self.finish(state, iters))
    }

    /// Projected supergradient ascent step `λ ← P_Δ(λ + s ψ)`; the step
    /// starts at twice the last accepted one and is halved until `φ` does not
    /// decrease.
    fn supergradient_step(
        &mut self,
        state: &DualState<T>,
        step: &mut T,
    ) -> Result<Option<DualState<T>>, Error> {
        let mut s = *step * T::lit(2.0);
        for _ in 0..60 {
            let trial: Vec<T> = state
                .lambda
                .as_slice()
                .iter()
                .zip(&state.psi)
                .map(|(&l, &p)| l + s * p)
                .collect();
            let cand = project_simplex(&trial);
            if cand == state.lambda {
                return Ok(None);
            }
            let cs = self.evaluate(cand, Some(&state.d))?;
            if cs.phi >= state.phi - state.noise.max(cs.noise) {
                *step = s;
                return Ok(Some(cs));
            }
            s = s / T::lit(2.0);
        }
        Ok(None)
    }

    /// Newton step on the local quadratic model of `φ`. With `F` the
    /// coordinates where `g` is smooth at `x + d(λ)` and `J_j = (∇f_j + ∇²f_j d)_F`,
    /// the model Hessian on the simplex is `−Jᵀ (H_λ)_{FF}⁻¹ J`. The simplex QP
    /// for the model maximizer is solved by accelerated projected gradient; the
    /// step is then backtracked on the true `φ`.
    fn newton_step(&mut self, state: &DualState<T>) -> Result<Option<DualState<T>>, Error> {
        let m = self.eval.m();
        let lambda = state.lambda.as_slice();
        let (_, h) = self.eval.weighted(lambda);
        let inner = InnerProblem {
            grad: &[],
            h: &h,
            g: self.g,
            x: self.x,
        };
        let free = inner.free_set(&state.d);
        let mut p = Matrix::zeros(m, m);
        if !free.is_empty() {
            let Some(chol) = Cholesky::new(&h.submatrix(&free)) else {
                return Ok(None);
            };
            let w: Vec<Vec<T>> = (0..m)
                .map(|j| {
                    let hd = self.eval.hessians[j].matvec(&state.d);
                    let col: Vec<T> = free
                        .iter()
                        .map(|&k| self.eval.gradients[j][k] + hd[k])
                        .collect();
                    chol.forward(&col)
                })
                .collect();
            for i in 0..m {
                for j in 0..=i {
                    let v = linalg::dot(&w[i], &w[j]);
                    p[(i, j)] = v;
                    p[(j, i)] = v;
                }
            }
        }
        let target = simplex_qp(&p, &state.psi, lambda);
        let mut frac = T::one();
        for _ in 0..8 {
            let cand = SimplexWeights::renormalized(
                lambda
                    .iter()
                    .zip(&target)
                    .map(|(&l, &y)| l + frac * (y - l))
                    .collect(),
            );
            if cand == state.lambda {
                return Ok(None);
            }
            let cs = self.evaluate(cand, Some(&state.d))?;
            if state.improved_by(&cs) {
                return Ok(Some(cs));
            }
            frac = frac / T::lit(2.0);
        }
        Ok(None)
    }
}

/// Maximizes `ψᵀ(y − λ) − ½ (y − λ)ᵀ P (y − λ)` over the simplex.
fn simplex_qp<T: Scalar>(p: &Matrix<T>, psi: &[T], lambda: &[T]) -> Vec<T> {
    let m = lambda.len();
    let scale = (0..m).map(|i| p[(i, i)]).sum::<T>() / T::lit(m as f64);
    let psi_scale = linalg::max_abs(psi);
    // Regularization keeps flat directions from sending the step to an
    // arbitrary vertex.
    let reg = (scale * T::lit(1e-10))
        .max(psi_scale * T::lit(1e-6))
        .max(T::min_positive_value());
    let mut pr = p.clone();
    for i in 0..m {
        pr[(i, i)] = pr[(i, i)] + reg;
    }
    let lip = linalg::power_iteration(&pr, 50) * T::lit(1.05);
    let step = T::one() / lip;
    let grad = |y: &[T]| -> Vec<T> {
        let diff = linalg::sub(y, lambda);
        let pd = pr.matvec(&diff);
        (0..m).map(|i| psi[i] - pd[i]).collect()
    };
    let mut y = lambda.to_vec();
    let mut z = y.clone();
    let mut t = T::one();
    for _ in 0..2000 {
        let gz = grad(&z);
        let trial: Vec<T> = (0..m).map(|i| z[i] + step * gz[i]).collect();
        let y_next = project_simplex(&trial).into_vec();
        let moved = linalg::dist(&y_next, &y);
        let restart = linalg::dot(&linalg::sub(&y_next, &z), &linalg::sub(&y, &y_next)) > T::zero();
        let t_next = if restart {
            T::one()
        } else {
            (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0)
        };
        let beta = if restart {
            T::zero()
        } else {
            (t - T::one()) / t_next
        };
        z = (0..m)
            .map(|i| y_next[i] + beta * (y_next[i] - y[i]))
            .collect();
        y = y_next;
        t = t_next;
        if moved <= T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    y
}
