//! Kernel SHAP: Shapley values of the background-masking game, estimated by
//! weighted least squares over coalitions, plus a brute-force oracle.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{score, Attribution, Diagnostics, ExplainError, ExplainerConfig, Method};
use crate::model::Model;

/// How the coalition space is covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoalitionSpec {
    /// Full enumeration up to 12 features, sampling with a 2048 budget above.
    Auto,
    /// All 2^d - 2 proper coalitions; capped at 16 features.
    Full,
    /// Sampled coalitions (at least 2).
    Budget(usize),
}

const FULL_ENUM_CAP: usize = 16;
const AUTO_FULL_LIMIT: usize = 12;
const AUTO_BUDGET: usize = 2048;

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Shapley kernel weight for a coalition of size `s` out of `m` features.
fn shapley_kernel(m: usize, s: usize) -> f64 {
    (m as f64 - 1.0) / (binom(m, s) * s as f64 * (m - s) as f64)
}

/// Mean model score over the background set with unmasked features taken
/// from `x` and masked ones from each background row.
fn coalition_value(
    model: &Model,
    x: &[f64],
    target: usize,
    background: &[Vec<f64>],
    mask: &[bool],
) -> Result<f64, ExplainError> {
    let mut total = 0.0;
    let mut composite = vec![0.0; x.len()];
    for b in background {
        for j in 0..x.len() {
            composite[j] = if mask[j] { x[j] } else { b[j] };
        }
        total += score(model, &composite, target)?;
    }
    Ok(total / background.len() as f64)
}

/// Solves the Shapley-kernel weighted least-squares problem over coalitions,
/// with masked features drawn from the background set. The efficiency
/// constraint `sum(phi) = F(x) - mean_background(F)` holds exactly: the last
/// feature is eliminated from the regression and recovered from the
/// constraint. Deterministic given the seed (sampled mode).
pub fn explain_kernel_shap(
    model: &Model,
    x: &[f64],
    target: usize,
    cfg: &ExplainerConfig,
) -> Result<Attribution, ExplainError> {
    let d = x.len();
    let background: Vec<Vec<f64>> = match &cfg.shap_background {
        Some(b) => b.clone(),
        None => vec![vec![0.0; d]],
    };
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if let Some(bad) = background.iter().find(|b| b.len() != d) {
        return Err(ExplainError::BaselineMismatch {
            expected: d,
            got: bad.len(),
        });
    }

    let v0 = coalition_value(model, x, target, &background, &vec![false; d])?;
    let v1 = coalition_value(model, x, target, &background, &vec![true; d])?;
    let delta = v1 - v0;

    if d == 1 {
        return Attribution::checked(
            Method::KernelShap,
            target,
            x,
            vec![delta],
            Diagnostics::default(),
        );
    }

    // (mask, weight) pairs covering sizes 1..=d-1.
    let coalitions: Vec<(Vec<bool>, f64)> = match cfg.shap_coalitions {
        CoalitionSpec::Auto if d <= AUTO_FULL_LIMIT => enumerate_coalitions(d)?,
        CoalitionSpec::Auto => sample_coalitions(d, AUTO_BUDGET, cfg.seed),
        CoalitionSpec::Full => enumerate_coalitions(d)?,
        CoalitionSpec::Budget(k) => {
            if k < 2 {
                return Err(ExplainError::InvalidConfig(format!(
                    "coalition budget must be >= 2, got {}",
                    k
                )));
            }
            sample_coalitions(d, k, cfg.seed)
        }
    };

    // Eliminate the last feature: regress r = v(S) - v0 - z_last * delta on
    // z'_j = z_j - z_last for j < d-1, then recover the last value from the
    // efficiency constraint.
    let m1 = d - 1;
    let mut a = DMatrix::<f64>::zeros(m1, m1);
    let mut rhs = DVector::<f64>::zeros(m1);
    let mut z_prime = vec![0.0; m1];
    for (mask, weight) in &coalitions {
        let v = coalition_value(model, x, target, &background, mask)?;
        let z_last = if mask[d - 1] { 1.0 } else { 0.0 };
        for j in 0..m1 {
            z_prime[j] = (if mask[j] { 1.0 } else { 0.0 }) - z_last;
        }
        let r = v - v0 - z_last * delta;
        for i in 0..m1 {
            rhs[i] += weight * r * z_prime[i];
            for j in i..m1 {
                a[(i, j)] += weight * z_prime[i] * z_prime[j];
            }
        }
    }
    for i in 0..m1 {
        for j in 0..i {
            a[(i, j)] = a[(j, i)];
        }
    }

    let head = match Cholesky::new(a.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => a
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| ExplainError::InvalidConfig(format!("shap solve failed: {}", e)))?,
    };

    let mut values: Vec<f64> = head.as_slice().to_vec();
    let last = delta - values.iter().sum::<f64>();
    values.push(last);
    Attribution::checked(Method::KernelShap, target, x, values, Diagnostics::default())
}

fn enumerate_coalitions(d: usize) -> Result<Vec<(Vec<bool>, f64)>, ExplainError> {
    if d > FULL_ENUM_CAP {
        return Err(ExplainError::InvalidConfig(format!(
            "full coalition enumeration supports at most {} features, got {}",
            FULL_ENUM_CAP, d
        )));
    }
    let mut out = Vec::with_capacity((1usize << d) - 2);
    for bits in 1..(1u32 << d) - 1 {
        let mask: Vec<bool> = (0..d).map(|j| bits >> j & 1 == 1).collect();
        let s = bits.count_ones() as usize;
        out.push((mask, shapley_kernel(d, s)));
    }
    Ok(out)
}

/// Samples coalition sizes proportionally to their total kernel mass
/// `(d-1)/(s(d-s))`, then a uniform subset of that size. Sampled coalitions
/// carry uniform weight, since the size distribution already reflects the
/// kernel.
fn sample_coalitions(d: usize, budget: usize, seed: u64) -> Vec<(Vec<bool>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass: Vec<f64> = (1..d)
        .map(|s| (d as f64 - 1.0) / (s as f64 * (d - s) as f64))
        .collect();
    let total: f64 = mass.iter().sum();
    let mut out = Vec::with_capacity(budget);
    let mut indices: Vec<usize> = (0..d).collect();
    for _ in 0..budget {
        let mut u = rng.gen_range(0.0..total);
        let mut size = 1;
        for (i, &m) in mass.iter().enumerate() {
            if u < m {
                size = i + 1;
                break;
            }
            u -= m;
            size = i + 1;
        }
        for i in 0..size {
            let j = rng.gen_range(i..d);
            indices.swap(i, j);
        }
        let mut mask = vec![false; d];
        for &i in &indices[..size] {
            mask[i] = true;
        }
        out.push((mask, 1.0));
    }
    out
}

/// Exact Shapley values by brute force over all 2^d coalitions:
///
/// `phi_j = sum_{S not containing j} |S|! (d-|S|-1)! / d! * (v(S+j) - v(S))`
///
/// Practical up to d = 16. `value` maps a membership mask to the coalition's
/// worth.
pub fn exact_shapley_oracle(
    value: &dyn Fn(&[bool]) -> f64,
    d: usize,
) -> Result<Vec<f64>, ExplainError> {
    if d == 0 || d > FULL_ENUM_CAP {
        return Err(ExplainError::InvalidConfig(format!(
            "oracle supports 1..={} features, got {}",
            FULL_ENUM_CAP, d
        )));
    }
    let mut factorial = vec![1.0f64; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let n_masks = 1usize << d;
    let mut cache = Vec::with_capacity(n_masks);
    let mut mask = vec![false; d];
    for bits in 0..n_masks {
        for (j, m) in mask.iter_mut().enumerate() {
            *m = bits >> j & 1 == 1;
        }
        cache.push(value(&mask));
    }
    let mut phi = vec![0.0; d];
    for bits in 0..n_masks {
        let s = (bits as u32).count_ones() as usize;
        if s == d {
            continue;
        }
        let weight = factorial[s] * factorial[d - s - 1] / factorial[d];
        for j in 0..d {
            if bits >> j & 1 == 0 {
                let with_j = bits | (1 << j);
                phi[j] += weight * (cache[with_j] - cache[bits]);
            }
        }
    }
    Ok(phi)
}
