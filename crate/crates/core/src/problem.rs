//! Multiobjective composite problems `min F(x)`, `F_i = f_i + g_i`.
//!
//! Each `f_i` is a twice differentiable [`SmoothObjective`]; each `g_i` is one of
//! the closed-form [`NonsmoothTerm`] kinds. All objectives of a problem share the
//! same nonsmooth term, which is what makes the weighted prox `g_λ = Σ λ_i g_i = g`
//! available in closed form.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// A twice continuously differentiable objective `f_i : ℝⁿ → ℝ`.
///
/// Implementations must be deterministic pure functions of `x`.
pub trait SmoothObjective<T: Scalar>: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> T;

    fn gradient(&self, x: &[T]) -> Vec<T>;

    /// Need not be exactly symmetric; callers symmetrize.
    fn hessian(&self, x: &[T]) -> Matrix<T>;

    /// The constant Hessian, if this objective is quadratic.
    fn quadratic_hessian(&self) -> Option<&Matrix<T>> {
        None
    }
}

/// `f(x) = ½ xᵀA x − bᵀx + c`
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic<T> {
    a: Matrix<T>,
    b: Vec<T>,
    c: T,
}

impl<T: Scalar> Quadratic<T> {
    pub fn new(mut a: Matrix<T>, b: Vec<T>, c: T) -> Result<Self> {
        if !a.is_square() || a.rows() != b.len() {
            return Err(Error::InvalidInput(format!(
                "quadratic needs a square matrix matching b (got {}x{}, len {})",
                a.rows(),
                a.cols(),
                b.len()
            )));
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidInput("quadratic data must be finite".into()));
        }
        a.symmetrize();
        Ok(Self { a, b, c })
    }

    /// `f(x) = ½ (x − z)ᵀ A (x − z)`
    pub fn centered(a: Matrix<T>, center: &[T]) -> Result<Self> {
        let mut sym = a.clone();
        sym.symmetrize();
        let b = sym.matvec(center);
        let c = T::lit(0.5) * linalg::dot(center, &b);
        Self::new(a, b, c)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn linear(&self) -> &[T] {
        &self.b
    }

    pub fn constant(&self) -> T {
        self.c
    }
}

impl<T: Scalar> SmoothObjective<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[T]) -> T {
        T::lit(0.5) * self.a.quad_form(x) - linalg::dot(&self.b, x) + self.c
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        linalg::sub(&self.a.matvec(x), &self.b)
    }

    fn hessian(&self, _x: &[T]) -> Matrix<T> {
        self.a.clone()
    }

    fn quadratic_hessian(&self) -> Option<&Matrix<T>> {
        Some(&self.a)
    }
}

/// Regularized log-sum-exp:
/// `f(x) = log Σ_j exp(a_jᵀx + c_j) + (μ/2)‖x − z‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogSumExpReg<T> {
    rows: Matrix<T>,
    offsets: Vec<T>,
    mu: T,
    center: Vec<T>,
}

impl<T: Scalar> LogSumExpReg<T> {
    pub fn new(rows: Matrix<T>, offsets: Vec<T>, mu: T, center: Vec<T>) -> Result<Self> {
        if rows.rows() == 0 || rows.rows() != offsets.len() || rows.cols() != center.len() {
            return Err(Error::InvalidInput(
                "log-sum-exp needs r×n rows, r offsets and an n-vector center".into(),
            ));
        }
        if !(mu >= T::zero()) || !rows.is_finite() {
            return Err(Error::InvalidInput(
                "log-sum-exp data must be finite with mu ≥ 0".into(),
            ));
        }
        Ok(Self {
            rows,
            offsets,
            mu,
            center,
        })
    }

    pub fn rows(&self) -> &Matrix<T> {
        &self.rows
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    fn max_row_norm(&self) -> T {
        (0..self.rows.rows())
            .map(|j| linalg::norm(self.rows.row(j)))
            .fold(T::zero(), T::max)
    }

    /// Conservative Hessian Lipschitz constant `2 · max_j ‖a_j‖³ · r`.
    pub fn lipschitz_hessian_bound(&self) -> T {
        let a = self.max_row_norm();
        T::lit(2.0) * a * a * a * T::lit(self.rows.rows() as f64)
    }

    /// Gradient Lipschitz constant `μ + max_j ‖a_j‖²`.
    pub fn lipschitz_gradient_bound(&self) -> T {
        let a = self.max_row_norm();
        self.mu + a * a
    }

    /// Softmax weights and the log-sum-exp value, evaluated with max-subtraction.
    fn softmax(&self, x: &[T]) -> (Vec<T>, T) {
        let z: Vec<T> = self
            .rows
            .matvec(x)
            .into_iter()
            .zip(&self.offsets)
            .map(|(v, &c)| v + c)
            .collect();
        let zmax = z.iter().copied().fold(T::neg_infinity(), T::max);
        let mut p: Vec<T> = z.iter().map(|&v| (v - zmax).exp()).collect();
        let s: T = p.iter().copied().sum();
        p.iter_mut().for_each(|v| *v = *v / s);
        (p, zmax + s.ln())
    }
}

impl<T: Scalar> SmoothObjective<T> for LogSumExpReg<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[T]) -> T {
        let (_, lse) = self.softmax(x);
        let r = linalg::dist(x, &self.center);
        lse + T::lit(0.5) * self.mu * r * r
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        let (p, _) = self.softmax(x);
        let mut g = self.rows.tr_matvec(&p);
        for (gi, (&xi, &zi)) in g.iter_mut().zip(x.iter().zip(&self.center)) {
            *gi = *gi + self.mu * (xi - zi);
        }
        g
    }

    fn hessian(&self, x: &[T]) -> Matrix<T> {
        let (p, _) = self.softmax(x);
        let n = self.dim();
        let mean = self.rows.tr_matvec(&p);
        let mut h = Matrix::scaled_identity(n, self.mu);
        for (j, &pj) in p.iter().enumerate() {
            let a = self.rows.row(j);
            for r in 0..n {
                let s = pj * a[r];
                for c in 0..n {
                    h[(r, c)] = h[(r, c)] + s * a[c];
                }
            }
        }
        for r in 0..n {
            for c in 0..n {
                h[(r, c)] = h[(r, c)] - mean[r] * mean[c];
            }
        }
        h
    }
}

/// The convex, lower semicontinuous term `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum NonsmoothTerm<T> {
    Zero,
    /// `g(x) = ρ ‖x‖₁`
    ScaledL1(T),
    /// Indicator of `{x : lo ≤ x ≤ hi}`.
    BoxIndicator {
        lo: Vec<T>,
        hi: Vec<T>,
    },
}

impl<T: Scalar> NonsmoothTerm<T> {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::ScaledL1(rho) => {
                if rho.is_finite() && *rho >= T::zero() {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "l1 weight must be ≥ 0, got {rho}"
                    )))
                }
            }
            Self::BoxIndicator { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "box bounds must have length {n}"
                    )));
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(l, h)| !(l <= h) || l.is_nan() || h.is_nan())
                {
                    return Err(Error::InvalidInput(
                        "box needs lo ≤ hi componentwise".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// `g(x)`; `+∞` outside the box for the indicator.
    pub fn value(&self, x: &[T]) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::ScaledL1(rho) => *rho * x.iter().map(|v| v.abs()).sum::<T>(),
            Self::BoxIndicator { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&v, (&l, &h))| l <= v && v <= h);
                if inside {
                    T::zero()
                } else {
                    T::infinity()
                }
            }
        }
    }

    /// `argmin_u { c·g(u) + ½‖u − v‖² }`
    pub fn prox(&self, v: &[T], c: T) -> Result<Vec<T>> {
        if !(c > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "prox scale must be > 0, got {c}"
            )));
        }
        Ok(self.prox_unchecked(v, c))
    }

    pub(crate) fn prox_unchecked(&self, v: &[T], c: T) -> Vec<T> {
        match self {
            Self::Zero => v.to_vec(),
            Self::ScaledL1(rho) => {
                let thr = c * *rho;
                v.iter()
                    .map(|&x| {
                        if x > thr {
                            x - thr
                        } else if x < -thr {
                            x + thr
                        } else {
                            T::zero()
                        }
                    })
                    .collect()
            }
            Self::BoxIndicator { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&x, (&l, &h))| x.max(l).min(h))
                .collect(),
        }
    }

    /// Euclidean distance from `w` to the subdifferential `∂g(u)`; `+∞` when `u ∉ dom g`.
    pub fn subgradient_distance(&self, u: &[T], w: &[T]) -> T {
        match self {
            Self::Zero => linalg::norm(w),
            Self::ScaledL1(rho) => u
                .iter()
                .zip(w)
                .map(|(&uj, &wj)| {
                    let e = if uj > T::zero() {
                        wj - *rho
                    } else if uj < T::zero() {
                        wj + *rho
                    } else {
                        (wj.abs() - *rho).max(T::zero())
                    };
                    e * e
                })
                .sum::<T>()
                .sqrt(),
            Self::BoxIndicator { lo, hi } => {
                let mut acc = T::zero();
                for (j, (&uj, &wj)) in u.iter().zip(w).enumerate() {
                    let (l, h) = (lo[j], hi[j]);
                    if uj < l || uj > h {
                        return T::infinity();
                    }
                    let e = if l == h {
                        T::zero()
                    } else if uj == l {
                        wj.max(T::zero())
                    } else if uj == h {
                        (-wj).max(T::zero())
                    } else {
                        wj.abs()
                    };
                    acc = acc + e * e;
                }
                acc.sqrt()
            }
        }
    }

    /// Coordinates where `g` is locally smooth (affine) around `u`.
    pub(crate) fn free_coordinates(&self, u: &[T]) -> Vec<usize> {
        match self {
            Self::Zero => (0..u.len()).collect(),
            Self::ScaledL1(rho) => {
                if *rho == T::zero() {
                    (0..u.len()).collect()
                } else {
                    (0..u.len()).filter(|&j| u[j] != T::zero()).collect()
                }
            }
            Self::BoxIndicator { lo, hi } => (0..u.len())
                .filter(|&j| lo[j] < u[j] && u[j] < hi[j])
                .collect(),
        }
    }

    /// Shortens `d` coordinatewise by rounding units until `x + d` evaluates
    /// inside the box; `prox` lands on a bound exactly, but `x + (u − x)` need not.
    pub(crate) fn snap_into_domain(&self, x: &[T], d: &mut [T]) {
        let Self::BoxIndicator { lo, hi } = self else {
            return;
        };
        for j in 0..d.len() {
            let unit = T::epsilon() * x[j].abs().max(hi[j].abs()).max(lo[j].abs()).max(T::one());
            for _ in 0..8 {
                if x[j] + d[j] > hi[j] {
                    d[j] = d[j] - unit;
                } else if x[j] + d[j] < lo[j] {
                    d[j] = d[j] + unit;
                } else {
                    break;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::ScaledL1(rho) => *rho == T::zero(),
            Self::BoxIndicator { .. } => false,
        }
    }
}

/// Free-function form of [`NonsmoothTerm::prox`].
pub fn prox_nonsmooth<T: Scalar>(term: &NonsmoothTerm<T>, v: &[T], c: T) -> Result<Vec<T>> {
    term.prox(v, c)
}

/// Values, gradients and (symmetrized) Hessians of all smooth parts at one point.
#[derive(Clone, Debug)]
pub struct SmoothEval<T> {
    pub values: Vec<T>,
    pub gradients: Vec<Vec<T>>,
    pub hessians: Vec<Matrix<T>>,
}

impl<T: Scalar> SmoothEval<T> {
    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.gradients.first().map_or(0, Vec::len)
    }

    /// `(∇f_λ, ∇²f_λ)`
    pub fn weighted(&self, lambda: &[T]) -> (Vec<T>, Matrix<T>) {
        let n = self.n();
        let mut g = vec![T::zero(); n];
        let mut h = Matrix::zeros(n, n);
        for (i, &li) in lambda.iter().enumerate() {
            if li == T::zero() {
                continue;
            }
            linalg::axpy(li, &self.gradients[i], &mut g);
            h.add_scaled(li, &self.hessians[i]);
        }
        (g, h)
    }

    /// Copy with every Hessian replaced by `ℓ I` (first-order metric).
    pub fn with_scaled_identity_hessians(&self, ell: T) -> Self {
        let n = self.n();
        Self {
            values: self.values.clone(),
            gradients: self.gradients.clone(),
            hessians: vec![Matrix::scaled_identity(n, ell); self.m()],
        }
    }
}

/// A multiobjective composite problem together with the metadata the
/// convergence diagnostics use.
#[derive(Clone, Debug)]
pub struct ProblemInstance<T: Scalar> {
    n: usize,
    smooth: Vec<Arc<dyn SmoothObjective<T>>>,
    nonsmooth: Vec<NonsmoothTerm<T>>,
    mu: T,
    lip_grad: Option<T>,
    lip_hess: Option<T>,
    reference_solution: Option<Vec<T>>,
}

impl<T: Scalar> ProblemInstance<T> {
    /// `nonsmooth` holds one term per objective; all must coincide.
    pub fn new(
        smooth: Vec<Arc<dyn SmoothObjective<T>>>,
        nonsmooth: Vec<NonsmoothTerm<T>>,
        mu: T,
    ) -> Result<Self> {
        let m = smooth.len();
        if m == 0 {
            return Err(Error::InvalidInput("need at least one objective".into()));
        }
        let n = smooth[0].dim();
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be ≥ 1".into()));
        }
        if let Some(i) = smooth.iter().position(|f| f.dim() != n) {
            return Err(Error::InvalidInput(format!(
                "objective {i} has dimension {} but objective 0 has {n}",
                smooth[i].dim()
            )));
        }
        if nonsmooth.len() != m {
            return Err(Error::InvalidInput(format!(
                "expected {m} nonsmooth terms, got {}",
                nonsmooth.len()
            )));
        }
        if nonsmooth.iter().any(|g| g != &nonsmooth[0]) {
            return Err(Error::InvalidInput(
                "all objectives must share the same nonsmooth term".into(),
            ));
        }
        nonsmooth[0].validate(n)?;
        if !(mu > T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!("mu must be > 0, got {mu}")));
        }
        Ok(Self {
            n,
            smooth,
            nonsmooth,
            mu,
            lip_grad: None,
            lip_hess: None,
            reference_solution: None,
        })
    }

    pub fn with_shared_nonsmooth(
        smooth: Vec<Arc<dyn SmoothObjective<T>>>,
        term: NonsmoothTerm<T>,
        mu: T,
    ) -> Result<Self> {
        let m = smooth.len();
        Self::new(smooth, vec![term; m], mu)
    }

    pub fn with_lip_grad(mut self, l1: T) -> Self {
        self.lip_grad = Some(l1);
        self
    }

    pub fn with_lip_hess(mut self, l2: T) -> Self {
        self.lip_hess = Some(l2);
        self
    }

    pub fn with_reference_solution(mut self, x: Vec<T>) -> Self {
        self.reference_solution = Some(x);
        self
    }

    pub(crate) fn set_nonsmooth(&mut self, terms: Vec<NonsmoothTerm<T>>) {
        self.nonsmooth = terms;
    }

    pub(crate) fn clear_reference_solution(&mut self) {
        self.reference_solution = None;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.smooth.len()
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn lip_grad(&self) -> Option<T> {
        self.lip_grad
    }

    pub fn lip_hess(&self) -> Option<T> {
        self.lip_hess
    }

    pub fn reference_solution(&self) -> Option<&[T]> {
        self.reference_solution.as_deref()
    }

    pub fn smooth(&self) -> &[Arc<dyn SmoothObjective<T>>] {
        &self.smooth
    }

    pub fn nonsmooth(&self) -> &[NonsmoothTerm<T>] {
        &self.nonsmooth
    }

    /// The term shared by every objective.
    pub fn shared_nonsmooth(&self) -> &NonsmoothTerm<T> {
        &self.nonsmooth[0]
    }

    /// Constant Hessians `A_i` when every smooth part is quadratic.
    pub fn quadratic_hessians(&self) -> Option<Vec<&Matrix<T>>> {
        self.smooth.iter().map(|f| f.quadratic_hessian()).collect()
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "point has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point has non-finite entries".into()));
        }
        Ok(())
    }

    /// `F(x)`; components may be `+∞` when `x` leaves the box.
    pub fn eval_full(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_point(x)?;
        Ok(self.eval_full_unchecked(x))
    }

    pub(crate) fn eval_full_unchecked(&self, x: &[T]) -> Vec<T> {
        self.smooth
            .iter()
            .zip(&self.nonsmooth)
            .map(|(f, g)| f.value(x) + g.value(x))
            .collect()
    }

    pub fn eval_smooth(&self, x: &[T]) -> Result<SmoothEval<T>> {
        self.check_point(x)?;
        let m = self.m();
        let mut values = Vec::with_capacity(m);
        let mut gradients = Vec::with_capacity(m);
        let mut hessians = Vec::with_capacity(m);
        for (i, f) in self.smooth.iter().enumerate() {
            let v = f.value(x);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    objective: i,
                    what: "value",
                });
            }
            let g = f.gradient(x);
            if g.len() != self.n || g.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation {
                    objective: i,
                    what: "gradient",
                });
            }
            let mut h = f.hessian(x);
            if h.rows() != self.n || h.cols() != self.n || !h.is_finite() {
                return Err(Error::Evaluation {
                    objective: i,
                    what: "hessian",
                });
            }
            h.symmetrize();
            values.push(v);
            gradients.push(g);
            hessians.push(h);
        }
        Ok(SmoothEval {
            values,
            gradients,
            hessians,
        })
    }
}

/// Free-function form of [`ProblemInstance::eval_full`].
pub fn eval_full<T: Scalar>(problem: &ProblemInstance<T>, x: &[T]) -> Result<Vec<T>> {
    problem.eval_full(x)
}

/// Free-function form of [`ProblemInstance::eval_smooth`].
pub fn eval_smooth<T: Scalar>(problem: &ProblemInstance<T>, x: &[T]) -> Result<SmoothEval<T>> {
    problem.eval_smooth(x)
}
