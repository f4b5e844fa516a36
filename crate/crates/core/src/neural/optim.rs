//! Adam optimizer over a parameter store.

use super::{NeuralError, ParamStore};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates aligned with the store's parameter order.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let m = store.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        let v = store.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Self {
            learning_rate,
            step: 0,
            m,
            v,
        }
    }
}

/// One Adam update from the gradients accumulated in `store`.
///
/// Deterministic: parameters are visited in insertion order. Fails if any
/// parameter has no populated gradient or the moment shapes disagree.
pub fn adam_step(store: &mut ParamStore, state: &mut OptimizerState) -> Result<(), NeuralError> {
    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    if state.m.len() != names.len() {
        return Err(NeuralError::InvalidConfig(format!(
            "optimizer tracks {} parameters, store has {}",
            state.m.len(),
            names.len()
        )));
    }
    for (idx, name) in names.iter().enumerate() {
        let numel = store.get(name).expect("listed name").numel();
        if state.m[idx].len() != numel {
            return Err(NeuralError::ShapeMismatch {
                op: "adam_step".into(),
                detail: format!("moment for `{name}` has wrong length"),
            });
        }
        if store.get(name).expect("listed name").grad.is_none() {
            return Err(NeuralError::MissingGrad(name.clone()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let lr = state.learning_rate;

    for (idx, name) in names.iter().enumerate() {
        let id = store.id(name).expect("listed name");
        let grad = store.tensor(id).grad.clone().expect("checked above");
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let values = store.values_mut(id);
        for i in 0..values.len() {
            let g = grad[i];
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}
