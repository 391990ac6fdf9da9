//! Plant, control Lyapunov function, cost and barrier, assembled into the
//! barrier-relaxed objective
//!
//! ```text
//! φ(u, x)    = ∇V(x)ᵀ[f(x) + g(x)u] + w(x)
//! J̃(u, x, t) = J(u, x) + μ(t)·B(φ(u, x) − γ)
//! ```
//!
//! together with every partial derivative of `J̃` the tracking laws consume.
//! Model functions are written once, generically over [`Real`], so the same
//! definition feeds both the analytic assembly here and the hyper-dual
//! engine in [`crate::autodiff`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autodiff;
use crate::dual::{HyperDual, Real};
use crate::error::{ensure_len, Error, Result};

/// Input-affine dynamics `ẋ = f(x) + g(x)u`.
pub trait Plant {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    fn drift<S: Real>(&self, x: &[S]) -> Vec<S>;

    /// `g(x)` in row-major order: `n` rows of `m` entries.
    fn input_matrix<S: Real>(&self, x: &[S]) -> Vec<S>;

    /// `∂f/∂x`, `n × n`.
    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian(x, |p| DVector::from_vec(self.drift(p.as_slice())))
    }

    /// `∂(g(x)·e_j)/∂x`, `n × n`.
    fn input_column_jacobian(&self, x: &DVector<f64>, j: usize) -> DMatrix<f64> {
        let m = self.input_dim();
        fd_jacobian(x, |p| {
            let g = self.input_matrix(p.as_slice());
            DVector::from_iterator(self.state_dim(), (0..self.state_dim()).map(|r| g[r * m + j]))
        })
    }
}

/// Lyapunov function `V`, decay rate `w` and a known stabilizing feedback `κ`
/// with `∇V(x)ᵀ[f(x) + g(x)κ(x)] ≤ −w(x)`.
pub trait ControlLyapunov {
    fn lyapunov<S: Real>(&self, x: &[S]) -> S;
    fn lyapunov_gradient<S: Real>(&self, x: &[S]) -> Vec<S>;

    fn lyapunov_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let h = fd_jacobian(x, |p| DVector::from_vec(self.lyapunov_gradient(p.as_slice())));
        (&h + h.transpose()) * 0.5
    }

    fn decay_rate<S: Real>(&self, x: &[S]) -> S;

    fn decay_rate_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let jac = fd_jacobian(x, |p| DVector::from_element(1, self.decay_rate(p.as_slice())));
        jac.row(0).transpose()
    }

    fn feedback(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// Strongly convex stage cost `J(u, x)`.
pub trait Cost {
    fn cost<S: Real>(&self, u: &[S], x: &[S]) -> S;

    /// Lower bound on the smallest eigenvalue of `∇ᵤᵤJ`.
    fn strong_convexity(&self) -> f64;

    fn cost_gradient(&self, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let (g, _, _) = cost_partials(self, u, x);
        g
    }

    fn cost_hessian(&self, u: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let (_, h, _) = cost_partials(self, u, x);
        h
    }

    /// `∂²J/∂u∂x`, `m × n`.
    fn cost_mixed(&self, u: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let (_, _, mx) = cost_partials(self, u, x);
        mx
    }
}

/// Everything a relaxed problem needs from a scenario.
pub trait Model: Plant + ControlLyapunov + Cost + Send + Sync {}

impl<T: Plant + ControlLyapunov + Cost + Send + Sync> Model for T {}

/// Convex barrier on `z < 0` that diverges as `z → 0⁻`.
pub trait Barrier: Send + Sync {
    fn value<S: Real>(&self, z: S) -> S;
    fn first(&self, z: f64) -> f64;
    fn second(&self, z: f64) -> f64;
}

/// `B(z) = −1/z`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InverseBarrier;

impl Barrier for InverseBarrier {
    fn value<S: Real>(&self, z: S) -> S {
        -z.recip()
    }
    fn first(&self, z: f64) -> f64 {
        1.0 / (z * z)
    }
    fn second(&self, z: f64) -> f64 {
        -2.0 / (z * z * z)
    }
}

/// Positive, strictly decreasing barrier weight `μ(t)`.
pub trait BarrierWeight: Send + Sync {
    fn value<S: Real>(&self, t: S) -> S;
    fn rate(&self, t: f64) -> f64;
}

/// `μ(t) = exp(−rate·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialWeight {
    rate: f64,
}

impl ExponentialWeight {
    pub fn new(rate: f64) -> Result<Self> {
        if rate.is_finite() && rate > 0.0 {
            Ok(Self { rate })
        } else {
            Err(Error::validation("mu_rate", format!("must be finite and > 0, got {rate}")))
        }
    }

    pub fn decay(&self) -> f64 {
        self.rate
    }
}

impl BarrierWeight for ExponentialWeight {
    fn value<S: Real>(&self, t: S) -> S {
        (t * -self.rate).exp()
    }
    fn rate(&self, t: f64) -> f64 {
        -self.rate * (-self.rate * t).exp()
    }
}

/// Which route [`RelaxedProblem::partials`] takes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeSource {
    /// Closed-form assembly from the model's own derivative methods.
    Analytic,
    /// Hyper-dual evaluation of `J̃` itself.
    #[default]
    Dual,
}

/// The partials of `J̃` at one point. `mixed_ux` is `m × n` with entry
/// `(i, j) = ∂²J̃/∂u_i∂x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub phi_minus_gamma: f64,
    pub cost: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub mixed_ux: DMatrix<f64>,
    pub mixed_ut: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct RelaxedProblem<M, B = InverseBarrier, W = ExponentialWeight> {
    model: M,
    barrier: B,
    weight: W,
    gamma: f64,
    derivatives: DerivativeSource,
}

impl<M: Model> RelaxedProblem<M, InverseBarrier, ExponentialWeight> {
    /// Inverse barrier with `μ(t) = exp(−mu_rate·t)`.
    pub fn with_defaults(model: M, gamma: f64, mu_rate: f64) -> Result<Self> {
        Self::new(model, InverseBarrier, ExponentialWeight::new(mu_rate)?, gamma)
    }
}

impl<M: Model, B: Barrier, W: BarrierWeight> RelaxedProblem<M, B, W> {
    pub fn new(model: M, barrier: B, weight: W, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::validation("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        Ok(Self {
            model,
            barrier,
            weight,
            gamma,
            derivatives: DerivativeSource::default(),
        })
    }

    pub fn with_derivatives(mut self, source: DerivativeSource) -> Self {
        self.derivatives = source;
        self
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn barrier(&self) -> &B {
        &self.barrier
    }

    pub fn weight(&self) -> &W {
        &self.weight
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn derivatives(&self) -> DerivativeSource {
        self.derivatives
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn strong_convexity(&self) -> f64 {
        self.model.strong_convexity()
    }

    pub fn mu(&self, t: f64) -> f64 {
        self.weight.value(t)
    }

    pub fn mu_dot(&self, t: f64) -> f64 {
        self.weight.rate(t)
    }

    fn check_dims(&self, u: &DVector<f64>, x: &DVector<f64>) -> Result<()> {
        ensure_len("u", self.input_dim(), u.len())?;
        ensure_len("x", self.state_dim(), x.len())
    }

    pub fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            self.state_dim(),
            self.input_dim(),
            &self.model.input_matrix(x.as_slice()),
        )
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.model.drift(x.as_slice()))
    }

    /// `f(x) + g(x)u`.
    pub fn state_rate(&self, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.input_matrix(x) * u
    }

    pub fn feedback(&self, x: &DVector<f64>) -> DVector<f64> {
        self.model.feedback(x)
    }

    pub fn lyapunov(&self, x: &DVector<f64>) -> f64 {
        self.model.lyapunov(x.as_slice())
    }

    fn lyapunov_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.model.lyapunov_gradient(x.as_slice()))
    }

    /// `V̇ = ∇V(x)ᵀ[f(x) + g(x)u]`.
    pub fn lyapunov_rate(&self, u: &DVector<f64>, x: &DVector<f64>) -> f64 {
        self.lyapunov_gradient(x).dot(&self.state_rate(u, x))
    }

    pub fn phi(&self, u: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        self.check_dims(u, x)?;
        Ok(self.lyapunov_rate(u, x) + self.model.decay_rate(x.as_slice()))
    }

    pub fn phi_minus_gamma(&self, u: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        Ok(self.phi(u, x)? - self.gamma)
    }

    /// `∇ᵤφ = g(x)ᵀ∇V(x)`; `φ` is affine in `u`.
    pub fn phi_input_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.input_matrix(x).transpose() * self.lyapunov_gradient(x)
    }

    /// `J̃(u, x, t)`, or `+∞` outside the barrier domain.
    pub fn relaxed_cost(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<f64> {
        let z = self.phi_minus_gamma(u, x)?;
        if !(z < 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(self.model.cost(u.as_slice(), x.as_slice()) + self.mu(t) * self.barrier.value(z))
    }

    /// `J̃` over any scalar type, without the feasibility check.
    pub fn relaxed_cost_generic<S: Real>(&self, u: &[S], x: &[S], t: S) -> S {
        let n = self.state_dim();
        let m = self.input_dim();
        let f = self.model.drift(x);
        let g = self.model.input_matrix(x);
        let dv = self.model.lyapunov_gradient(x);
        let mut phi = self.model.decay_rate(x);
        for r in 0..n {
            let mut xdot = f[r];
            for c in 0..m {
                xdot += g[r * m + c] * u[c];
            }
            phi += dv[r] * xdot;
        }
        self.model.cost(u, x) + self.weight.value(t) * self.barrier.value(phi - self.gamma)
    }

    /// `φ − γ`, failing outside the barrier domain.
    fn feasible_margin(&self, u: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        let z = self.phi_minus_gamma(u, x)?;
        if z < 0.0 {
            Ok(z)
        } else {
            Err(Error::Infeasible { phi_minus_gamma: z })
        }
    }

    pub fn grad_u_relaxed(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let z = self.feasible_margin(u, x)?;
        let a = self.phi_input_gradient(x);
        Ok(self.model.cost_gradient(u, x) + a * (self.mu(t) * self.barrier.first(z)))
    }

    pub fn hess_uu_relaxed(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>> {
        let z = self.feasible_margin(u, x)?;
        let a = self.phi_input_gradient(x);
        Ok(self.model.cost_hessian(u, x) + (&a * a.transpose()) * (self.mu(t) * self.barrier.second(z)))
    }

    /// `∂/∂t ∇ᵤJ̃ = μ̇(t)·B′(φ − γ)·∇ᵤφ`.
    pub fn mixed_ut_relaxed(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let z = self.feasible_margin(u, x)?;
        Ok(self.phi_input_gradient(x) * (self.mu_dot(t) * self.barrier.first(z)))
    }

    /// `∂²J̃/∂u∂x`, `m × n`.
    pub fn mixed_ux_relaxed(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>> {
        let z = self.feasible_margin(u, x)?;
        let n = self.state_dim();
        let m = self.input_dim();
        let g = self.input_matrix(x);
        let dv = self.lyapunov_gradient(x);
        let hv = self.model.lyapunov_hessian(x);
        let a = g.transpose() * &dv;

        // ∇ₓφ = H_V (f + g u) + (∂f/∂x + Σ_j u_j ∂g_j/∂x)ᵀ ∇V + ∇w
        let mut jac = self.model.drift_jacobian(x);
        let col_jacs: Vec<DMatrix<f64>> = (0..m).map(|j| self.model.input_column_jacobian(x, j)).collect();
        for (j, cj) in col_jacs.iter().enumerate() {
            jac += cj * u[j];
        }
        let grad_x_phi = &hv * self.state_rate(u, x) + jac.transpose() * &dv + self.model.decay_rate_gradient(x);

        // row i of Dₓ(gᵀ∇V) = (∂g_i/∂x)ᵀ∇V + H_V g_i, transposed
        let mut d_a = DMatrix::zeros(m, n);
        for (i, ci) in col_jacs.iter().enumerate() {
            let row = ci.transpose() * &dv + &hv * g.column(i);
            d_a.set_row(i, &row.transpose());
        }

        let mu = self.mu(t);
        Ok(self.model.cost_mixed(u, x)
            + (&a * grad_x_phi.transpose()) * (mu * self.barrier.second(z))
            + d_a * (mu * self.barrier.first(z)))
    }

    pub fn analytic_partials(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<Partials> {
        let z = self.feasible_margin(u, x)?;
        Ok(Partials {
            phi_minus_gamma: z,
            cost: self.relaxed_cost(u, x, t)?,
            grad: self.grad_u_relaxed(u, x, t)?,
            hess: self.hess_uu_relaxed(u, x, t)?,
            mixed_ux: self.mixed_ux_relaxed(u, x, t)?,
            mixed_ut: self.mixed_ut_relaxed(u, x, t)?,
        })
    }

    /// All partials via the configured [`DerivativeSource`].
    pub fn partials(&self, u: &DVector<f64>, x: &DVector<f64>, t: f64) -> Result<Partials> {
        match self.derivatives {
            DerivativeSource::Analytic => self.analytic_partials(u, x, t),
            DerivativeSource::Dual => autodiff::dual_derivative_engine(self, u, x, t),
        }
    }

    /// Gradient and Hessian in `u` only, via the configured source.
    pub fn grad_hess(
        &self,
        u: &DVector<f64>,
        x: &DVector<f64>,
        t: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match self.derivatives {
            DerivativeSource::Analytic => Ok((self.grad_u_relaxed(u, x, t)?, self.hess_uu_relaxed(u, x, t)?)),
            DerivativeSource::Dual => autodiff::dual_grad_hess(self, u, x, t),
        }
    }
}

/// Central-difference Jacobian with step `1e-6·(1 + ‖x‖)`.
pub fn fd_jacobian<F>(x: &DVector<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h = 1e-6 * (1.0 + x.norm());
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut p = x.clone();
    for j in 0..x.len() {
        p[j] = x[j] + h;
        let fp = f(&p);
        p[j] = x[j] - h;
        let fm = f(&p);
        p[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Gradient, Hessian and mixed partials of `J` through hyper-dual evaluation.
fn cost_partials<C: Cost + ?Sized>(
    c: &C,
    u: &DVector<f64>,
    x: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let m = u.len();
    let n = x.len();
    let point: Vec<f64> = u.iter().chain(x.iter()).copied().collect();
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    let mut mixed = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in i..m + n {
            let r = crate::dual::second_partial(&point, i, j, |v: &[HyperDual]| c.cost(&v[..m], &v[m..]));
            grad[i] = r.d1;
            if j < m {
                hess[(i, j)] = r.d12;
                hess[(j, i)] = r.d12;
            } else {
                mixed[(i, j - m)] = r.d12;
            }
        }
    }
    (grad, hess, mixed)
}
