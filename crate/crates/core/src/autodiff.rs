//! Partials of `J̃` by hyper-dual evaluation of the scalar `J̃(u, x, t)`.
//!
//! Variables are laid out as `[u₁..u_m, x₁..x_n, t]`. Each evaluation seeds
//! one input `u_i` along `ε₁` and one variable `v_j` along `ε₂`, giving
//! `∂J̃/∂u_i` and `∂²J̃/∂u_i∂v_j`; `m·(m+n+1) − m(m−1)/2` evaluations cover
//! the gradient, the symmetric Hessian and both mixed blocks.

use nalgebra::{DMatrix, DVector};

use crate::dual::{second_partial, HyperDual};
use crate::error::{Error, Result};
use crate::problem::{Barrier, BarrierWeight, Model, Partials, RelaxedProblem};

fn point<M: Model, B: Barrier, W: BarrierWeight>(
    p: &RelaxedProblem<M, B, W>,
    u: &DVector<f64>,
    x: &DVector<f64>,
    t: f64,
) -> Result<(Vec<f64>, f64)> {
    let z = p.phi_minus_gamma(u, x)?;
    if !(z < 0.0) {
        return Err(Error::Infeasible { phi_minus_gamma: z });
    }
    let mut v: Vec<f64> = u.iter().chain(x.iter()).copied().collect();
    v.push(t);
    Ok((v, z))
}

fn eval<M: Model, B: Barrier, W: BarrierWeight>(
    p: &RelaxedProblem<M, B, W>,
    v: &[HyperDual],
) -> HyperDual {
    let m = p.input_dim();
    let n = p.state_dim();
    p.relaxed_cost_generic(&v[..m], &v[m..m + n], v[m + n])
}

pub fn dual_derivative_engine<M: Model, B: Barrier, W: BarrierWeight>(
    p: &RelaxedProblem<M, B, W>,
    u: &DVector<f64>,
    x: &DVector<f64>,
    t: f64,
) -> Result<Partials> {
    let (v, z) = point(p, u, x, t)?;
    let m = p.input_dim();
    let n = p.state_dim();
    let mut out = Partials {
        phi_minus_gamma: z,
        cost: 0.0,
        grad: DVector::zeros(m),
        hess: DMatrix::zeros(m, m),
        mixed_ux: DMatrix::zeros(m, n),
        mixed_ut: DVector::zeros(m),
    };
    for i in 0..m {
        for j in i..m + n + 1 {
            let r = second_partial(&v, i, j, |hv| eval(p, hv));
            out.cost = r.value;
            out.grad[i] = r.d1;
            if j < m {
                out.hess[(i, j)] = r.d12;
                out.hess[(j, i)] = r.d12;
            } else if j < m + n {
                out.mixed_ux[(i, j - m)] = r.d12;
            } else {
                out.mixed_ut[i] = r.d12;
            }
        }
    }
    if m == 0 {
        out.cost = p.relaxed_cost(u, x, t)?;
    }
    Ok(out)
}

/// Only the `u`-block: gradient and Hessian.
pub fn dual_grad_hess<M: Model, B: Barrier, W: BarrierWeight>(
    p: &RelaxedProblem<M, B, W>,
    u: &DVector<f64>,
    x: &DVector<f64>,
    t: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (v, _) = point(p, u, x, t)?;
    let m = p.input_dim();
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let r = second_partial(&v, i, j, |hv| eval(p, hv));
            grad[i] = r.d1;
            hess[(i, j)] = r.d12;
            hess[(j, i)] = r.d12;
        }
    }
    Ok((grad, hess))
}
