//! Epsilon-rule layerwise relevance propagation.

use super::{Attribution, Diagnostics, ExplainError, Method};
use crate::model::{forward_trace, Model};

/// sign with sign(0) = +1, so the stabilized denominator is never zero.
fn stab_sign(z: f64) -> f64 {
    if z < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Propagates the target logit back to the input through every affine layer:
///
/// `R_i = sum_j (a_i * w_ij / (z_j + eps * sign(z_j))) * R_j`
///
/// Relevance starts as the target's final pre-activation and ends as one
/// value per input feature. The conservation leak `|sum(R) - F(x)|` (bias and
/// stabilizer absorption) is reported in the diagnostics.
pub fn explain_epsilon_lrp(
    model: &Model,
    x: &[f64],
    target: usize,
    eps: f64,
) -> Result<Attribution, ExplainError> {
    if !(eps > 0.0) {
        return Err(ExplainError::InvalidConfig(format!(
            "lrp stabilizer must be > 0, got {}",
            eps
        )));
    }
    let mlp = model.as_mlp().ok_or(ExplainError::UnsupportedMethod {
        method: Method::EpsilonLrp.name(),
        model: model.kind_name(),
    })?;
    let trace = forward_trace(mlp, x)?;
    let outputs = mlp.output_dim();
    if target >= outputs {
        return Err(ExplainError::Model(
            crate::model::ModelError::TargetOutOfRange { target, outputs },
        ));
    }

    let logit = trace.pre_activations.last().unwrap()[target];
    let mut relevance = vec![0.0; outputs];
    relevance[target] = logit;

    for l in (0..mlp.layers.len()).rev() {
        let layer = &mlp.layers[l];
        let input: &[f64] = if l == 0 {
            x
        } else {
            &trace.activations[l - 1]
        };
        let z = &trace.pre_activations[l];
        let mut prev = vec![0.0; layer.in_dim()];
        for j in 0..layer.out_dim() {
            if relevance[j] == 0.0 {
                continue;
            }
            let denom = z[j] + eps * stab_sign(z[j]);
            let factor = relevance[j] / denom;
            let row = &layer.weight[j * layer.in_dim()..(j + 1) * layer.in_dim()];
            for (i, (&w, &a)) in row.iter().zip(input).enumerate() {
                prev[i] += a * w * factor;
            }
        }
        relevance = prev;
    }

    let leak = (relevance.iter().sum::<f64>() - logit).abs();
    let diagnostics = Diagnostics {
        conservation_leak: Some(leak),
        ..Diagnostics::default()
    };
    Attribution::checked(Method::EpsilonLrp, target, x, relevance, diagnostics)
}
