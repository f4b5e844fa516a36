//! Finite-difference gradient verification.
//!
//! Relative error per coordinate is
//! `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`, with numeric
//! gradients from central differences.

use super::graph::{Graph, NodeId};
use super::{NeuralError, ParamStore, Tensor};

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Max relative error between the analytic gradient of `f` at `x` and
/// central finite differences. `f` must build a scalar-valued graph.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, NeuralError>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId, NeuralError>,
{
    let mut g = Graph::new();
    let xid = g.input(x);
    let y = f(&mut g, xid)?;
    let (r, c) = g.dims(y);
    if r * c != 1 {
        return Err(NeuralError::ShapeMismatch {
            op: "grad_check".into(),
            detail: format!("function output is {r}x{c}, expected a scalar"),
        });
    }
    if !g.value_scalar(y).is_finite() {
        return Err(NeuralError::NonFinite("grad_check forward value".into()));
    }
    g.backward(y);
    let analytic = g
        .grad(xid)
        .map(|s| s.to_vec())
        .unwrap_or_else(|| vec![0.0; x.numel()]);

    let eval = |values: &[f64]| -> Result<f64, NeuralError> {
        let t = Tensor {
            shape: x.shape.clone(),
            values: values.to_vec(),
            grad: None,
        };
        let mut g = Graph::new();
        let xid = g.input(&t);
        let y = f(&mut g, xid)?;
        let v = g.value_scalar(y);
        if !v.is_finite() {
            return Err(NeuralError::NonFinite("grad_check probe value".into()));
        }
        Ok(v)
    };

    let mut max_err: f64 = 0.0;
    let mut probe = x.values.clone();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = eval(&probe)?;
        probe[i] = orig - eps;
        let minus = eval(&probe)?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        max_err = max_err.max(rel_err(analytic[i], numeric));
    }
    Ok(max_err)
}

/// Like [`grad_check`] but differentiates with respect to every coordinate
/// of every parameter in the store. `build` constructs the scalar loss graph
/// from the current parameter values.
pub fn grad_check_params<F>(
    store: &mut ParamStore,
    build: F,
    eps: f64,
) -> Result<f64, NeuralError>
where
    F: Fn(&ParamStore) -> Result<(Graph, NodeId), NeuralError>,
{
    let (mut g, loss) = build(store)?;
    g.backward(loss);
    let analytic = g.param_grads();

    let names: Vec<String> = store.iter().map(|(n, _)| n.to_string()).collect();
    let mut max_err: f64 = 0.0;
    for name in names {
        let pid = store.id(&name).expect("listed name");
        let grad = analytic
            .iter()
            .find(|(p, _)| *p == pid)
            .map(|(_, g)| g.clone())
            .unwrap_or_else(|| vec![0.0; store.tensor(pid).numel()]);
        for i in 0..grad.len() {
            let orig = store.tensor(pid).values[i];
            store.values_mut(pid)[i] = orig + eps;
            let (gp, lp) = build(store)?;
            let plus = gp.value_scalar(lp);
            store.values_mut(pid)[i] = orig - eps;
            let (gm, lm) = build(store)?;
            let minus = gm.value_scalar(lm);
            store.values_mut(pid)[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NeuralError::NonFinite(format!("probe of `{name}`[{i}]")));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            max_err = max_err.max(rel_err(grad[i], numeric));
        }
    }
    Ok(max_err)
}
