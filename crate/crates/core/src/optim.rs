//! Plain SGD and RMSprop, one state slot per parameter matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const RMSPROP_RHO: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Sgd {
        learning_rate: f64,
    },
    #[serde(rename = "rmsprop")]
    RmsProp {
        learning_rate: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_eps")]
        epsilon: f64,
    },
}

fn default_rho() -> f64 {
    RMSPROP_RHO
}

fn default_eps() -> f64 {
    RMSPROP_EPS
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig::Sgd { learning_rate }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        OptimizerConfig::RmsProp {
            learning_rate,
            rho: RMSPROP_RHO,
            epsilon: RMSPROP_EPS,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { learning_rate } => learning_rate,
            OptimizerConfig::RmsProp { learning_rate, .. } => learning_rate,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd { .. } => "sgd",
            OptimizerConfig::RmsProp { .. } => "rmsprop",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if let OptimizerConfig::RmsProp { rho, epsilon, .. } = *self {
            if !(0.0..1.0).contains(&rho) || epsilon < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "rmsprop needs 0 <= rho < 1 and epsilon >= 0, got rho={rho} epsilon={epsilon}"
                )));
            }
        }
        Ok(())
    }
}

fn check_same<T: Scalar>(op: &'static str, a: &Matrix<T>, b: &Matrix<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `param - lr·grad`.
pub fn sgd_step<T: Scalar>(param: &Matrix<T>, grad: &Matrix<T>, lr: T) -> Result<Matrix<T>> {
    param.zip_map("sgd_step", grad, |p, g| p - lr * g)
}

/// RMSprop second-moment accumulator for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState<T> {
    pub learning_rate: T,
    pub rho: T,
    pub epsilon: T,
    pub v: Matrix<T>,
}

impl<T: Scalar> RmsPropState<T> {
    pub fn new(shape: (usize, usize), learning_rate: f64, rho: f64, epsilon: f64) -> Self {
        RmsPropState {
            learning_rate: T::lit(learning_rate),
            rho: T::lit(rho),
            epsilon: T::lit(epsilon),
            v: Matrix::zeros(shape.0, shape.1),
        }
    }

    /// `v ← ρ·v + (1-ρ)·g²`, then `param ← param - lr·g / (√v + ε)`, in place.
    pub fn apply(&mut self, param: &mut Matrix<T>, grad: &Matrix<T>) -> Result<()> {
        check_same("rmsprop_step", param, grad)?;
        check_same("rmsprop_step(state)", param, &self.v)?;
        let (lr, rho, eps) = (self.learning_rate, self.rho, self.epsilon);
        let one_minus = T::one() - rho;
        for ((p, &g), v) in param
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(self.v.as_mut_slice())
        {
            *v = rho * *v + one_minus * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`RmsPropState::apply`].
pub fn rmsprop_step<T: Scalar>(
    param: &Matrix<T>,
    grad: &Matrix<T>,
    state: &RmsPropState<T>,
) -> Result<(Matrix<T>, RmsPropState<T>)> {
    let mut p = param.clone();
    let mut s = state.clone();
    s.apply(&mut p, grad)?;
    Ok((p, s))
}

/// Optimizer state for a whole network: one slot per parameter matrix, in
/// the network's parameter order.
#[derive(Debug, Clone)]
pub enum OptState<T> {
    Sgd { learning_rate: T },
    RmsProp(Vec<RmsPropState<T>>),
}

impl<T: Scalar> OptState<T> {
    pub fn new(config: &OptimizerConfig, shapes: &[(usize, usize)]) -> Self {
        match *config {
            OptimizerConfig::Sgd { learning_rate } => OptState::Sgd {
                learning_rate: T::lit(learning_rate),
            },
            OptimizerConfig::RmsProp {
                learning_rate,
                rho,
                epsilon,
            } => OptState::RmsProp(
                shapes
                    .iter()
                    .map(|&s| RmsPropState::new(s, learning_rate, rho, epsilon))
                    .collect(),
            ),
        }
    }

    /// Updates parameter slot `slot` in place.
    pub fn step(&mut self, slot: usize, param: &mut Matrix<T>, grad: &Matrix<T>) -> Result<()> {
        match self {
            OptState::Sgd { learning_rate } => {
                check_same("sgd_step", param, grad)?;
                let lr = *learning_rate;
                for (p, &g) in param.as_mut_slice().iter_mut().zip(grad.as_slice()) {
                    *p -= lr * g;
                }
                Ok(())
            }
            OptState::RmsProp(slots) => {
                let n = slots.len();
                let state = slots.get_mut(slot).ok_or_else(|| {
                    Error::InvalidArgument(format!("optimizer slot {slot} out of {n}"))
                })?;
                state.apply(param, grad)
            }
        }
    }
}
