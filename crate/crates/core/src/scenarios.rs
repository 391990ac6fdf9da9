//! Registered plants.
//!
//! `case_study` is the three-state, two-input benchmark
//!
//! ```text
//! ẋ = (−x₁ − x₂², x₁x₂ + x₂x₃, −x₂² − x₃) + [0 0; 1 0; 0 1]·u
//! J = ½(u₁² + 3u₂²),  V = ½‖x‖²,  w = 0.1‖x‖²
//! ```
//!
//! with the stabilizing feedbacks `κ₁(x) = (−(x₁+x₂), −x₂)` and
//! `κ₂(x) = (−(x₁+x₂+x₃), 0)`, both giving `V̇ = −xᵀPx`.
//!
//! `scalar_fixed_time` embeds `u̇ = −ψ(u)` as a one-state problem so the
//! closed form of the fixed-time law can be checked through the full stack.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::dual::Real;
use crate::error::Error;
use crate::problem::{ControlLyapunov, Cost, Plant};

/// `V̇ = −xᵀPx` under either case-study feedback.
pub fn case_study_p() -> Matrix3<f64> {
    Matrix3::new(1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseStudyFeedback {
    #[default]
    Kappa1,
    Kappa2,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaseStudy {
    pub feedback: CaseStudyFeedback,
}

impl CaseStudy {
    pub const DECAY_WEIGHT: f64 = 0.1;

    pub fn kappa1(x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-(x[0] + x[1]), -x[1]])
    }

    pub fn kappa2(x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![-(x[0] + x[1] + x[2]), 0.0])
    }
}

impl Plant for CaseStudy {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn drift<S: Real>(&self, x: &[S]) -> Vec<S> {
        let sq = x[1] * x[1];
        vec![-x[0] - sq, x[0] * x[1] + x[1] * x[2], -sq - x[2]]
    }

    fn input_matrix<S: Real>(&self, _x: &[S]) -> Vec<S> {
        let (o, l) = (S::zero(), S::one());
        vec![o, o, l, o, o, l]
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[-1.0, -2.0 * x[1], 0.0, x[1], x[0] + x[2], x[1], 0.0, -2.0 * x[1], -1.0],
        )
    }

    fn input_column_jacobian(&self, _x: &DVector<f64>, _j: usize) -> DMatrix<f64> {
        DMatrix::zeros(3, 3)
    }
}

impl ControlLyapunov for CaseStudy {
    fn lyapunov<S: Real>(&self, x: &[S]) -> S {
        half_norm_sq(x)
    }

    fn lyapunov_gradient<S: Real>(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }

    fn lyapunov_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(3, 3)
    }

    fn decay_rate<S: Real>(&self, x: &[S]) -> S {
        half_norm_sq(x) * (2.0 * Self::DECAY_WEIGHT)
    }

    fn decay_rate_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * (2.0 * Self::DECAY_WEIGHT)
    }

    fn feedback(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.feedback {
            CaseStudyFeedback::Kappa1 => Self::kappa1(x),
            CaseStudyFeedback::Kappa2 => Self::kappa2(x),
        }
    }
}

impl Cost for CaseStudy {
    fn cost<S: Real>(&self, u: &[S], _x: &[S]) -> S {
        (u[0] * u[0] + u[1] * u[1] * 3.0) * 0.5
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn cost_gradient(&self, u: &DVector<f64>, _x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![u[0], 3.0 * u[1]])
    }

    fn cost_hessian(&self, _u: &DVector<f64>, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]))
    }

    fn cost_mixed(&self, _u: &DVector<f64>, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(2, 3)
    }
}

fn half_norm_sq<S: Real>(x: &[S]) -> S {
    let mut acc = S::zero();
    for &v in x {
        acc += v * v;
    }
    acc * 0.5
}

/// One state with `ẋ = −x` and no input coupling; `J = ½u²`, so `∇ᵤJ̃ = u`
/// and the FC law reduces to `u̇ = −ψ(u)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScalarFixedTime;

impl Plant for ScalarFixedTime {
    fn state_dim(&self) -> usize {
        1
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn drift<S: Real>(&self, x: &[S]) -> Vec<S> {
        vec![-x[0]]
    }

    fn input_matrix<S: Real>(&self, _x: &[S]) -> Vec<S> {
        vec![S::zero()]
    }

    fn drift_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, -1.0)
    }

    fn input_column_jacobian(&self, _x: &DVector<f64>, _j: usize) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
}

impl ControlLyapunov for ScalarFixedTime {
    fn lyapunov<S: Real>(&self, x: &[S]) -> S {
        half_norm_sq(x)
    }

    fn lyapunov_gradient<S: Real>(&self, x: &[S]) -> Vec<S> {
        x.to_vec()
    }

    fn lyapunov_hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn decay_rate<S: Real>(&self, x: &[S]) -> S {
        half_norm_sq(x) * 0.2
    }

    fn decay_rate_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * 0.2
    }

    fn feedback(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(1)
    }
}

impl Cost for ScalarFixedTime {
    fn cost<S: Real>(&self, u: &[S], _x: &[S]) -> S {
        u[0] * u[0] * 0.5
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn cost_gradient(&self, u: &DVector<f64>, _x: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn cost_hessian(&self, _u: &DVector<f64>, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn cost_mixed(&self, _u: &DVector<f64>, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }
}

/// Registry keys accepted in scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKey {
    CaseStudy,
    CaseStudyKappa2,
    ScalarFixedTime,
}

impl ScenarioKey {
    pub const ALL: [ScenarioKey; 3] = [
        ScenarioKey::CaseStudy,
        ScenarioKey::CaseStudyKappa2,
        ScenarioKey::ScalarFixedTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKey::CaseStudy => "case_study",
            ScenarioKey::CaseStudyKappa2 => "case_study_kappa2",
            ScenarioKey::ScalarFixedTime => "scalar_fixed_time",
        }
    }

    pub fn model(self) -> ScenarioModel {
        match self {
            ScenarioKey::CaseStudy => ScenarioModel::CaseStudy(CaseStudy::default()),
            ScenarioKey::CaseStudyKappa2 => ScenarioModel::CaseStudy(CaseStudy {
                feedback: CaseStudyFeedback::Kappa2,
            }),
            ScenarioKey::ScalarFixedTime => ScenarioModel::ScalarFixedTime(ScalarFixedTime),
        }
    }

    /// Initial state used when a config gives none.
    pub fn default_x0(self) -> DVector<f64> {
        match self {
            ScenarioKey::CaseStudy | ScenarioKey::CaseStudyKappa2 => {
                DVector::from_vec(vec![-9.0, -7.0, -5.0])
            }
            ScenarioKey::ScalarFixedTime => DVector::from_element(1, 1.0),
        }
    }
}

impl fmt::Display for ScenarioKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|k| k.as_str()).collect();
            Error::validation("scenario", format!("unknown key {s:?}; known: {}", known.join(", ")))
        })
    }
}

/// Static dispatch over the registered models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioModel {
    CaseStudy(CaseStudy),
    ScalarFixedTime(ScalarFixedTime),
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $body:expr) => {
        match $self {
            ScenarioModel::CaseStudy($m) => $body,
            ScenarioModel::ScalarFixedTime($m) => $body,
        }
    };
}

impl Plant for ScenarioModel {
    fn state_dim(&self) -> usize {
        dispatch!(self, m => m.state_dim())
    }
    fn input_dim(&self) -> usize {
        dispatch!(self, m => m.input_dim())
    }
    fn drift<S: Real>(&self, x: &[S]) -> Vec<S> {
        dispatch!(self, m => m.drift(x))
    }
    fn input_matrix<S: Real>(&self, x: &[S]) -> Vec<S> {
        dispatch!(self, m => m.input_matrix(x))
    }
    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        dispatch!(self, m => m.drift_jacobian(x))
    }
    fn input_column_jacobian(&self, x: &DVector<f64>, j: usize) -> DMatrix<f64> {
        dispatch!(self, m => m.input_column_jacobian(x, j))
    }
}

impl ControlLyapunov for ScenarioModel {
    fn lyapunov<S: Real>(&self, x: &[S]) -> S {
        dispatch!(self, m => m.lyapunov(x))
    }
    fn lyapunov_gradient<S: Real>(&self, x: &[S]) -> Vec<S> {
        dispatch!(self, m => m.lyapunov_gradient(x))
    }
    fn lyapunov_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        dispatch!(self, m => m.lyapunov_hessian(x))
    }
    fn decay_rate<S: Real>(&self, x: &[S]) -> S {
        dispatch!(self, m => m.decay_rate(x))
    }
    fn decay_rate_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        dispatch!(self, m => m.decay_rate_gradient(x))
    }
    fn feedback(&self, x: &DVector<f64>) -> DVector<f64> {
        dispatch!(self, m => m.feedback(x))
    }
}

impl Cost for ScenarioModel {
    fn cost<S: Real>(&self, u: &[S], x: &[S]) -> S {
        dispatch!(self, m => m.cost(u, x))
    }
    fn strong_convexity(&self) -> f64 {
        dispatch!(self, m => m.strong_convexity())
    }
    fn cost_gradient(&self, u: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        dispatch!(self, m => m.cost_gradient(u, x))
    }
    fn cost_hessian(&self, u: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        dispatch!(self, m => m.cost_hessian(u, x))
    }
    fn cost_mixed(&self, u: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        dispatch!(self, m => m.cost_mixed(u, x))
    }
}
