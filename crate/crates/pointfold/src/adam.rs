//! Bias-corrected Adam with decoupled multiplicative weight decay.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Optimizer hyperparameters. Defaults follow the training protocol:
/// learning rate 1e-4, betas 0.9/0.999, weight decay 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled decay coefficient; weights shrink by `(1 - lr * decay)`
    /// per step, biases are exempt.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-6,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{name} = {b} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Bias-correction scales of one step.
#[derive(Debug, Clone, Copy)]
pub struct AdamScales {
    pub correction1: f64,
    pub correction2: f64,
}

/// First/second moment buffers mirroring the parameter list, plus the step
/// counter and running beta powers for bias correction.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    moments: Vec<(Matrix, Matrix)>,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState {
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            moments: Vec::new(),
        }
    }

    pub fn is_initialised(&self) -> bool {
        !self.moments.is_empty()
    }

    /// Allocates zero moment buffers shaped like `shapes`.
    pub fn init_like(&mut self, shapes: &[(usize, usize)]) {
        self.moments = shapes
            .iter()
            .map(|&(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .collect();
        self.step = 0;
        self.beta1_pow = 1.0;
        self.beta2_pow = 1.0;
    }

    /// Advances the step counter and returns this step's bias corrections.
    pub fn begin_step(&mut self, config: &AdamConfig) -> Result<AdamScales> {
        config.validate()?;
        self.step += 1;
        self.beta1_pow *= config.beta1;
        self.beta2_pow *= config.beta2;
        Ok(AdamScales {
            correction1: 1.0 - self.beta1_pow,
            correction2: 1.0 - self.beta2_pow,
        })
    }

    pub fn moments_mut(&mut self) -> &mut [(Matrix, Matrix)] {
        &mut self.moments
    }
}

/// Updates one parameter matrix in place. Weight decay multiplies weights
/// (not biases) by `(1 - lr * decay)` before the Adam step.
pub fn adam_update(
    config: &AdamConfig,
    scales: &AdamScales,
    m: &mut Matrix,
    v: &mut Matrix,
    param: &mut Matrix,
    grad: &Matrix,
    is_bias: bool,
) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != m.shape() {
        return Err(Error::ShapeMismatch {
            op: "adam_update",
            lhs_rows: param.rows(),
            lhs_cols: param.cols(),
            rhs_rows: grad.rows(),
            rhs_cols: grad.cols(),
        });
    }
    let shrink = 1.0 - config.lr * config.weight_decay;
    let pd = param.data_mut();
    let md = m.data_mut();
    let vd = v.data_mut();
    for i in 0..pd.len() {
        let g = grad.data()[i];
        md[i] = config.beta1 * md[i] + (1.0 - config.beta1) * g;
        vd[i] = config.beta2 * vd[i] + (1.0 - config.beta2) * g * g;
        let m_hat = md[i] / scales.correction1;
        let v_hat = vd[i] / scales.correction2;
        if !is_bias && config.weight_decay != 0.0 {
            pd[i] *= shrink;
        }
        pd[i] -= config.lr * m_hat / (math::sqrt(v_hat) + config.epsilon);
    }
    Ok(())
}

/// One optimizer step over parallel parameter/gradient lists. `params`
/// pairs each matrix with its bias flag (biases skip weight decay).
pub fn adam_step(
    config: &AdamConfig,
    state: &mut AdamState,
    params: &mut [(&mut Matrix, bool)],
    grads: &[Matrix],
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::DataLength {
            rows: params.len(),
            cols: 1,
            got: grads.len(),
        });
    }
    if !state.is_initialised() {
        let shapes: Vec<(usize, usize)> = params.iter().map(|(p, _)| p.shape()).collect();
        state.init_like(&shapes);
    }
    if state.moments.len() != params.len() {
        return Err(Error::DataLength {
            rows: state.moments.len(),
            cols: 1,
            got: params.len(),
        });
    }
    let scales = state.begin_step(config)?;
    for (((param, is_bias), grad), (m, v)) in
        params.iter_mut().zip(grads).zip(&mut state.moments)
    {
        adam_update(config, &scales, m, v, param, grad, *is_bias)?;
    }
    Ok(())
}
