//! Seeded instance generators.
//!
//! All randomness comes from `Xoshiro256PlusPlus` seeded through SplitMix64
//! (`seed_from_u64`), so a spec reproduces the same instance bit for bit on
//! every platform. Data is generated in `f64` and cast to the target scalar.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, Matrix};
use crate::problem::{LogSumExpReg, NonsmoothTerm, ProblemInstance, Quadratic, SmoothObjective};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Quadratic,
    LogSumExpReg,
    QuadraticL1,
    QuadraticBox,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::LogSumExpReg => "log_sum_exp_reg",
            Self::QuadraticL1 => "quadratic_l1",
            Self::QuadraticBox => "quadratic_box",
        }
    }

    pub fn is_quadratic(self) -> bool {
        !matches!(self, Self::LogSumExpReg)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    /// Target condition number of each quadratic Hessian.
    #[serde(default = "one")]
    pub cond: f64,
    #[serde(default = "one")]
    pub mu: f64,
    /// ℓ1 weight for `quadratic_l1`.
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    /// Explicit linear terms `b_i` for quadratics, replacing the random ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shifts: Option<Vec<Vec<f64>>>,
    /// Box bounds for `quadratic_box`; default `[-1, 1]ⁿ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_hi: Option<Vec<f64>>,
    /// Number of log-sum-exp rows per objective; default `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    /// Typical row norm of the log-sum-exp data; default 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_scale: Option<f64>,
}

impl InstanceSpec {
    pub fn new(family: Family, n: usize, m: usize) -> Self {
        Self {
            family,
            n,
            m,
            cond: 1.0,
            mu: 1.0,
            rho: 0.0,
            seed: 0,
            shifts: None,
            box_lo: None,
            box_hi: None,
            rows: None,
            row_scale: None,
        }
    }

    pub fn cond(mut self, cond: f64) -> Self {
        self.cond = cond;
        self
    }

    pub fn mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn shifts(mut self, shifts: Vec<Vec<f64>>) -> Self {
        self.shifts = Some(shifts);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n: must be ≥ 1".into());
        }
        if self.m == 0 {
            return bad("m: must be ≥ 1".into());
        }
        if !(self.cond >= 1.0) || !self.cond.is_finite() {
            return bad(format!("cond: must be ≥ 1, got {}", self.cond));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad(format!("mu: must be > 0, got {}", self.mu));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return bad(format!("rho: must be ≥ 0, got {}", self.rho));
        }
        if let Some(shifts) = &self.shifts {
            if shifts.len() != self.m || shifts.iter().any(|b| b.len() != self.n) {
                return bad(format!(
                    "shifts: expected {} vectors of length {}",
                    self.m, self.n
                ));
            }
            if shifts.iter().flatten().any(|v| !v.is_finite()) {
                return bad("shifts: entries must be finite".into());
            }
        }
        for (name, b) in [("box_lo", &self.box_lo), ("box_hi", &self.box_hi)] {
            if let Some(b) = b {
                if b.len() != self.n {
                    return bad(format!("{name}: expected length {}", self.n));
                }
            }
        }
        if self.rows == Some(0) {
            return bad("rows: must be ≥ 1".into());
        }
        if let Some(s) = self.row_scale {
            if !(s > 0.0) || !s.is_finite() {
                return bad(format!("row_scale: must be > 0, got {s}"));
            }
        }
        Ok(())
    }

    fn box_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.box_lo.clone().unwrap_or_else(|| vec![-1.0; self.n]),
            self.box_hi.clone().unwrap_or_else(|| vec![1.0; self.n]),
        )
    }
}

fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn normals(rng: &mut Xoshiro256PlusPlus, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn cast_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Spectrum with endpoints exactly `μ` and `μ·cond`, log-uniform in between.
fn spectrum(rng: &mut Xoshiro256PlusPlus, n: usize, mu: f64, cond: f64) -> Vec<f64> {
    let mut d = vec![mu; n];
    if n >= 2 {
        d[n - 1] = mu * cond;
        let span = cond.ln();
        for v in d.iter_mut().take(n - 1).skip(1) {
            let u: f64 = rng.random();
            *v = (mu.ln() + u * span).exp().clamp(mu, mu * cond);
        }
    }
    d
}

/// `Q D Qᵀ` with `Q` orthonormalized from a standard-normal matrix.
fn rotated(rng: &mut Xoshiro256PlusPlus, diag: &[f64]) -> Matrix<f64> {
    let n = diag.len();
    let g = Matrix::from_rows(
        &normals(rng, n * n)
            .chunks(n)
            .map(<[f64]>::to_vec)
            .collect::<Vec<_>>(),
    );
    let q = linalg::orthonormal_columns(&g);
    let qd = Matrix::from_rows(
        &(0..n)
            .map(|i| (0..n).map(|j| q[(i, j)] * diag[j]).collect())
            .collect::<Vec<_>>(),
    );
    let mut a = qd.matmul(&q.transpose());
    a.symmetrize();
    a
}

/// `f_i(x) = ½xᵀA_i x − b_iᵀx`, `A_i = Q_i D_i Q_iᵀ`, `g_i = 0`.
///
/// Random linear terms are `b_i = A_i z_i` with `z_i` standard normal, so the
/// individual minimizers stay `O(1)` at any condition number.
pub fn gen_quadratic<T: Scalar>(spec: &InstanceSpec) -> Result<ProblemInstance<T>> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = rng(spec.seed);
    let mut mats = Vec::with_capacity(m);
    let mut lins = Vec::with_capacity(m);
    for i in 0..m {
        let a = if spec.cond == 1.0 {
            Matrix::scaled_identity(n, spec.mu)
        } else {
            let d = spectrum(&mut rng, n, spec.mu, spec.cond);
            rotated(&mut rng, &d)
        };
        let b = match &spec.shifts {
            Some(s) => s[i].clone(),
            None => a.matvec(&normals(&mut rng, n)),
        };
        mats.push(a);
        lins.push(b);
    }

    // Uniform-weight Pareto point (Σ A_i)⁻¹ Σ b_i.
    let mut sum_a = Matrix::zeros(n, n);
    let mut sum_b = vec![0.0; n];
    for (a, b) in mats.iter().zip(&lins) {
        sum_a.add_scaled(1.0, a);
        linalg::axpy(1.0, b, &mut sum_b);
    }
    let reference = Cholesky::new(&sum_a)
        .ok_or(Error::SingularMetric)?
        .solve(&sum_b);

    let smooth = mats
        .iter()
        .zip(&lins)
        .map(|(a, b)| {
            Quadratic::new(a.cast::<T>(), cast_vec(b), T::zero())
                .map(|q| Arc::new(q) as Arc<dyn SmoothObjective<T>>)
        })
        .collect::<Result<Vec<_>>>()?;
    let top = if n >= 2 { spec.mu * spec.cond } else { spec.mu };
    Ok(
        ProblemInstance::with_shared_nonsmooth(smooth, NonsmoothTerm::Zero, T::lit(spec.mu))?
            .with_lip_grad(T::lit(top))
            .with_lip_hess(T::zero())
            .with_reference_solution(cast_vec(&reference)),
    )
}

/// `f_i(x) = log Σ_j exp(a_{ij}ᵀx + c_{ij}) + (μ/2)‖x − z_i‖²`, `g_i = 0`.
///
/// Rows have entries `N(0, s²/n)`, so `‖a_{ij}‖ ≈ s`; offsets and centers are
/// standard normal. The recorded `L₂` is the conservative `2 · max ‖a‖³ · r`.
pub fn gen_logsumexp_reg<T: Scalar>(spec: &InstanceSpec) -> Result<ProblemInstance<T>> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let r = spec.rows.unwrap_or(n);
    let scale = spec.row_scale.unwrap_or(1.0) / (n as f64).sqrt();
    let mut rng = rng(spec.seed);
    let mut smooth: Vec<Arc<dyn SmoothObjective<T>>> = Vec::with_capacity(m);
    let mut l1 = 0.0_f64;
    let mut l2 = 0.0_f64;
    for _ in 0..m {
        let data: Vec<Vec<f64>> = (0..r)
            .map(|_| {
                normals(&mut rng, n)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect()
            })
            .collect();
        let offsets = normals(&mut rng, r);
        let center = normals(&mut rng, n);
        let f = LogSumExpReg::new(
            Matrix::from_rows(&data).cast::<T>(),
            cast_vec(&offsets),
            T::lit(spec.mu),
            cast_vec(&center),
        )?;
        l1 = l1.max(f.lipschitz_gradient_bound().as_f64());
        l2 = l2.max(f.lipschitz_hessian_bound().as_f64());
        smooth.push(Arc::new(f));
    }
    Ok(
        ProblemInstance::with_shared_nonsmooth(smooth, NonsmoothTerm::Zero, T::lit(spec.mu))?
            .with_lip_grad(T::lit(l1))
            .with_lip_hess(T::lit(l2)),
    )
}

/// Replaces every `g_i` by `term` and drops the reference solution.
pub fn attach_nonsmooth<T: Scalar>(
    instance: &ProblemInstance<T>,
    terms: Vec<NonsmoothTerm<T>>,
) -> Result<ProblemInstance<T>> {
    if terms.len() != instance.m() {
        return Err(Error::InvalidInput(format!(
            "expected {} nonsmooth terms, got {}",
            instance.m(),
            terms.len()
        )));
    }
    if terms.iter().any(|t| t != &terms[0]) {
        return Err(Error::InvalidInput(
            "all objectives must share the same nonsmooth term".into(),
        ));
    }
    terms[0].validate(instance.n())?;
    let mut out = instance.clone();
    if !terms[0].is_zero() {
        out.clear_reference_solution();
    }
    out.set_nonsmooth(terms);
    Ok(out)
}

/// Builds the instance named by `spec.family`.
pub fn generate<T: Scalar>(spec: &InstanceSpec) -> Result<ProblemInstance<T>> {
    match spec.family {
        Family::Quadratic => gen_quadratic(spec),
        Family::LogSumExpReg => gen_logsumexp_reg(spec),
        Family::QuadraticL1 => {
            let base = gen_quadratic::<T>(spec)?;
            attach_nonsmooth(
                &base,
                vec![NonsmoothTerm::ScaledL1(T::lit(spec.rho)); spec.m],
            )
        }
        Family::QuadraticBox => {
            let base = gen_quadratic::<T>(spec)?;
            let (lo, hi) = spec.box_bounds();
            let term = NonsmoothTerm::BoxIndicator {
                lo: cast_vec(&lo),
                hi: cast_vec(&hi),
            };
            attach_nonsmooth(&base, vec![term; spec.m])
        }
    }
}

/// Standard-normal point scaled by `scale`, from a stream independent of the
/// instance stream with the same seed.
pub fn random_start<T: Scalar>(n: usize, seed: u64, scale: f64) -> Vec<T> {
    let mut rng = rng(seed ^ 0x5851_f42d_4c95_7f2d);
    normals(&mut rng, n)
        .into_iter()
        .map(|v| T::lit(v * scale))
        .collect()
}

/// `count` points `center + scale·N(0, I)`.
pub fn random_probes<T: Scalar>(center: &[T], scale: f64, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = rng(seed ^ 0x2545_f491_4f6c_dd1d);
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|&c| c + T::lit(scale * rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect()
}
