//! Shared helpers for integration tests: a central finite-difference oracle
//! over both parameter and input coordinates, independent of the analytic
//! backward path it is used to check.

use mair::nn::{ModelParams, ParamGrads};

/// Flattens parameter gradients in layer order (weights then bias per layer).
pub fn flatten_grads(grads: &ParamGrads) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &grads.layers {
        out.extend_from_slice(&layer.weights.data);
        out.extend_from_slice(&layer.bias);
    }
    out
}

pub fn param_coord_count(params: &ModelParams) -> usize {
    params
        .layers
        .iter()
        .map(|l| l.weights.data.len() + l.bias.len())
        .sum()
}

/// Returns a copy of `params` with flat coordinate `k` shifted by `dv`.
pub fn bump_param(params: &ModelParams, k: usize, dv: f64) -> ModelParams {
    let mut out = params.clone();
    let mut offset = 0;
    for layer in &mut out.layers {
        let nw = layer.weights.data.len();
        if k < offset + nw {
            layer.weights.data[k - offset] += dv;
            return out;
        }
        offset += nw;
        let nb = layer.bias.len();
        if k < offset + nb {
            layer.bias[k - offset] += dv;
            return out;
        }
        offset += nb;
    }
    panic!("parameter coordinate {k} out of range");
}

/// Central finite differences of `f` over every parameter coordinate.
pub fn fd_param_grads(
    f: &mut dyn FnMut(&ModelParams, &[f64]) -> f64,
    params: &ModelParams,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    (0..param_coord_count(params))
        .map(|k| {
            let up = f(&bump_param(params, k, h), x);
            let down = f(&bump_param(params, k, -h), x);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central finite differences of `f` over every input coordinate.
pub fn fd_input_grads(
    f: &mut dyn FnMut(&ModelParams, &[f64]) -> f64,
    params: &ModelParams,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut xv = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xv[i];
            xv[i] = orig + h;
            let up = f(params, &xv);
            xv[i] = orig - h;
            let down = f(params, &xv);
            xv[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative-error comparison with a small floor so that near-zero
/// coordinates (below finite-difference resolution) compare absolutely.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-2))
        .fold(0.0, f64::max)
}
