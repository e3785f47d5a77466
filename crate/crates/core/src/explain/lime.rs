//! Local linear surrogates fit to model probes around one input.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{score, Attribution, Diagnostics, ExplainError, ExplainerConfig, Method};
use crate::model::Model;
use crate::vecmath::l2_dist;

/// Fits a ridge-regularized weighted linear surrogate to the model's outputs
/// at perturbations of `x` and returns the surrogate's coefficients.
///
/// Tabular inputs get Gaussian jitter (`lime_sigma`); grid inputs with
/// `lime_image_patches` set get binary patch masking toward the baseline
/// instead. Sample weights are `exp(-dist^2 / kernel_width^2)` with the
/// distance taken to `x` (tabular) or to the all-ones mask (image mode).
/// Deterministic given the seed. A degenerate normal system falls back to a
/// pseudo-inverse solve and is flagged in the diagnostics.
pub fn explain_lime(
    model: &Model,
    x: &[f64],
    target: usize,
    cfg: &ExplainerConfig,
) -> Result<Attribution, ExplainError> {
    if cfg.lime_samples < 1 {
        return Err(ExplainError::InvalidConfig(
            "lime needs at least one sample".into(),
        ));
    }
    if !(cfg.lime_ridge >= 0.0) {
        return Err(ExplainError::InvalidConfig(
            "lime ridge penalty must be >= 0".into(),
        ));
    }
    match cfg.lime_image_patches {
        None => lime_tabular(model, x, target, cfg),
        Some((patch, (rows, cols))) => lime_image(model, x, target, cfg, patch, rows, cols),
    }
}

fn lime_tabular(
    model: &Model,
    x: &[f64],
    target: usize,
    cfg: &ExplainerConfig,
) -> Result<Attribution, ExplainError> {
    let d = x.len();
    if !(cfg.lime_sigma > 0.0) {
        return Err(ExplainError::InvalidConfig(
            "lime sampling sigma must be > 0".into(),
        ));
    }
    let kernel_width = cfg
        .lime_kernel_width
        .unwrap_or_else(|| 0.75 * (d as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut offsets: Vec<Vec<f64>> = Vec::with_capacity(cfg.lime_samples);
    let mut ys = Vec::with_capacity(cfg.lime_samples);
    let mut weights = Vec::with_capacity(cfg.lime_samples);
    let mut probe = vec![0.0; d];
    for _ in 0..cfg.lime_samples {
        let offset: Vec<f64> = (0..d)
            .map(|_| cfg.lime_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for j in 0..d {
            probe[j] = x[j] + offset[j];
        }
        ys.push(score(model, &probe, target)?);
        let dist = l2_dist(&probe, x);
        weights.push((-dist * dist / (kernel_width * kernel_width)).exp());
        offsets.push(offset);
    }

    let (coeffs, r2, pseudo) = weighted_ridge(&offsets, &ys, &weights, cfg.lime_ridge)?;
    let diagnostics = Diagnostics {
        surrogate_r2: Some(r2),
        pseudo_inverse: if pseudo { Some(true) } else { None },
        ..Diagnostics::default()
    };
    Attribution::checked(Method::Lime, target, x, coeffs, diagnostics)
}

fn lime_image(
    model: &Model,
    x: &[f64],
    target: usize,
    cfg: &ExplainerConfig,
    patch: usize,
    rows: usize,
    cols: usize,
) -> Result<Attribution, ExplainError> {
    let d = x.len();
    if rows * cols != d {
        return Err(ExplainError::InvalidConfig(format!(
            "{}x{} grid does not match {} features",
            rows, cols, d
        )));
    }
    if patch == 0 || patch > rows || patch > cols {
        return Err(ExplainError::PatchTooLarge {
            patch,
            rows,
            cols,
        });
    }
    let baseline = match &cfg.baseline {
        Some(b) if b.len() == d => b.clone(),
        Some(b) => {
            return Err(ExplainError::BaselineMismatch {
                expected: d,
                got: b.len(),
            })
        }
        None => vec![0.0; d],
    };

    // Patch j covers a k x k tile (clipped at the borders).
    let tiles_per_row = (cols + patch - 1) / patch;
    let tiles_per_col = (rows + patch - 1) / patch;
    let n_patches = tiles_per_row * tiles_per_col;
    let patch_of = |feature: usize| -> usize {
        let (r, c) = (feature / cols, feature % cols);
        (r / patch) * tiles_per_row + c / patch
    };
    let kernel_width = cfg
        .lime_kernel_width
        .unwrap_or_else(|| 0.75 * (n_patches as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut masks: Vec<Vec<f64>> = Vec::with_capacity(cfg.lime_samples);
    let mut ys = Vec::with_capacity(cfg.lime_samples);
    let mut weights = Vec::with_capacity(cfg.lime_samples);
    let mut probe = vec![0.0; d];
    for _ in 0..cfg.lime_samples {
        let mask: Vec<f64> = (0..n_patches)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            .collect();
        for j in 0..d {
            probe[j] = if mask[patch_of(j)] == 1.0 {
                x[j]
            } else {
                baseline[j]
            };
        }
        ys.push(score(model, &probe, target)?);
        let off: f64 = mask.iter().map(|&m| (1.0 - m) * (1.0 - m)).sum();
        weights.push((-off / (kernel_width * kernel_width)).exp());
        // Center on the all-ones mask so the intercept matches the unmasked
        // prediction, mirroring the tabular parameterization.
        masks.push(mask.iter().map(|&m| m - 1.0).collect());
    }

    let (patch_coeffs, r2, pseudo) = weighted_ridge(&masks, &ys, &weights, cfg.lime_ridge)?;
    let values: Vec<f64> = (0..d).map(|j| patch_coeffs[patch_of(j)]).collect();
    let diagnostics = Diagnostics {
        surrogate_r2: Some(r2),
        pseudo_inverse: if pseudo { Some(true) } else { None },
        ..Diagnostics::default()
    };
    Attribution::checked(Method::Lime, target, x, values, diagnostics)
}

/// Solves `min sum_i w_i (y_i - b0 - b.u_i)^2 + ridge * |b|^2` and returns
/// `(b, weighted R^2, used_pseudo_inverse)`. The intercept is not penalized.
fn weighted_ridge(
    features: &[Vec<f64>],
    ys: &[f64],
    weights: &[f64],
    ridge: f64,
) -> Result<(Vec<f64>, f64, bool), ExplainError> {
    let n = features.len();
    let d = features[0].len();
    let p = d + 1;
    let mut xtwx = DMatrix::<f64>::zeros(p, p);
    let mut xtwy = DVector::<f64>::zeros(p);
    let mut v = vec![0.0; p];
    for i in 0..n {
        v[0] = 1.0;
        v[1..].copy_from_slice(&features[i]);
        let w = weights[i];
        for a in 0..p {
            xtwy[a] += w * ys[i] * v[a];
            for b in a..p {
                xtwx[(a, b)] += w * v[a] * v[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    for j in 1..p {
        xtwx[(j, j)] += ridge;
    }

    let (beta, pseudo) = match Cholesky::new(xtwx.clone()) {
        Some(chol) => (chol.solve(&xtwy), false),
        None => {
            let svd = xtwx.svd(true, true);
            let solved = svd
                .solve(&xtwy, 1e-12)
                .map_err(|e| ExplainError::InvalidConfig(format!("ridge solve failed: {}", e)))?;
            (solved, true)
        }
    };

    let mut ss_res = 0.0;
    let mut sw = 0.0;
    let mut sy = 0.0;
    for i in 0..n {
        let mut pred = beta[0];
        for j in 0..d {
            pred += beta[j + 1] * features[i][j];
        }
        ss_res += weights[i] * (ys[i] - pred) * (ys[i] - pred);
        sw += weights[i];
        sy += weights[i] * ys[i];
    }
    let mean = if sw > 0.0 { sy / sw } else { 0.0 };
    let ss_tot: f64 = (0..n)
        .map(|i| weights[i] * (ys[i] - mean) * (ys[i] - mean))
        .sum();
    // A response that is constant up to rounding has no variance to explain.
    let tot_floor = f64::EPSILON * sw * (mean * mean + 1.0);
    let r2 = if ss_tot > tot_floor {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };

    Ok((beta.as_slice()[1..].to_vec(), r2, pseudo))
}
