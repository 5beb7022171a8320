//! Adam with bias-corrected first and second moments.

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NnError::BadConfig {
                detail: format!("betas ({}, {}) must lie in [0, 1)", self.beta1, self.beta2),
            });
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(NnError::BadConfig {
                detail: format!("learning rate {} invalid", self.learning_rate),
            });
        }
        if self.epsilon <= 0.0 {
            return Err(NnError::BadConfig {
                detail: format!("epsilon {} must be positive", self.epsilon),
            });
        }
        Ok(())
    }
}

/// Per-tensor moment estimates plus the shared timestep.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// One moment slot per parameter tensor, in the model's slot order.
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// Apply one update to every parameter tensor.
    pub fn step(
        &mut self,
        params_grads: &mut [(&mut Vec<f64>, &Vec<f64>)],
        config: &AdamConfig,
    ) -> Result<(), NnError> {
        if params_grads.len() != self.m.len() {
            return Err(NnError::AdamShape {
                state: self.m.len(),
                params: params_grads.len(),
            });
        }
        self.t += 1;
        for (slot, (params, grads)) in params_grads.iter_mut().enumerate() {
            adam_step(params, grads, &mut self.m[slot], &mut self.v[slot], self.t, config)
                .map_err(|e| match e {
                    NnError::AdamGradShape { params, grads, .. } => {
                        NnError::AdamGradShape { slot, params, grads }
                    }
                    other => other,
                })?;
        }
        Ok(())
    }
}

/// One Adam update on a single parameter tensor:
/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// p <- p - lr * mhat / (sqrt(vhat) + eps) with bias-corrected moments.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    config: &AdamConfig,
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != m.len() || params.len() != v.len() {
        return Err(NnError::AdamGradShape {
            slot: 0,
            params: params.len(),
            grads: grads.len(),
        });
    }
    debug_assert!(t >= 1);
    let bc1 = 1.0 - config.beta1.powi(t as i32);
    let bc2 = 1.0 - config.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}
