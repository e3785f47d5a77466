//! Local robustness metrics for explanation maps.
//!
//! An explanation map sends an input to its attribution vector, with the
//! explained class frozen to the model's prediction at the anchor. Around an
//! anchor x we measure the largest observed ratio
//! `||f(x) - f(x')||_2 / ||x - x'||_2`, either over a continuous max-norm box
//! (budgeted black-box search) or over the dataset neighbors within epsilon
//! (exact scan). Both estimators return the maximizing point so the worst
//! pair can be dumped side by side.

use crate::explain::{self, Attribution, ExplainError, ExplainerConfig, Method};
use crate::model::{Model, ModelError};
use crate::optim::{maximize_in_box, BoxRegion, OptimError, ProbeBudget};
use crate::vecmath::{l2_dist, linf_dist, quantile_sorted};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probes closer than this to the anchor are skipped: the ratio is 0/0 at
/// the anchor itself and numerically explosive just off it.
pub const MIN_PROBE_DISTANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error("anchor index {index} out of bounds for {len} rows")]
    AnchorOutOfBounds { index: usize, len: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("continuous estimation needs a budget of at least two probes")]
    BudgetTooSmall,
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("noise probe needs at least one perturbation")]
    ZeroPerturbations,
    #[error("sample size must be at least one")]
    ZeroSampleSize,
    #[error("sample size {requested} exceeds the {available} available rows")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("estimate for anchor {0} is undefined, no worst pair exists")]
    UndefinedEstimate(usize),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Norm used for the dataset-neighborhood membership test. The ratio itself
/// is always measured in l2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MembershipNorm {
    #[default]
    L2,
    Linf,
}

impl MembershipNorm {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            MembershipNorm::L2 => l2_dist(a, b),
            MembershipNorm::Linf => linf_dist(a, b),
        }
    }
}

/// Radius (in normalized feature units) and membership norm for local
/// neighborhoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub epsilon: f64,
    #[serde(default)]
    pub membership_norm: MembershipNorm,
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        NeighborhoodSpec {
            epsilon: crate::defaults::EPSILON,
            membership_norm: MembershipNorm::L2,
        }
    }
}

impl NeighborhoodSpec {
    pub fn new(epsilon: f64) -> Result<Self, RobustnessError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(RobustnessError::InvalidEpsilon(epsilon));
        }
        Ok(NeighborhoodSpec {
            epsilon,
            membership_norm: MembershipNorm::L2,
        })
    }

    pub fn with_norm(mut self, norm: MembershipNorm) -> Self {
        self.membership_norm = norm;
        self
    }

    fn validate(&self) -> Result<(), RobustnessError> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(RobustnessError::InvalidEpsilon(self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Continuous,
    Discrete,
}

/// One anchor's local Lipschitz estimate.
///
/// `value` is `None` when the estimate is undefined: every probe was skipped
/// in continuous mode, or the dataset neighborhood was empty (or collapsed
/// entirely onto the anchor) in discrete mode. Undefined estimates are
/// carried through so summaries can count them instead of dropping them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub anchor_index: usize,
    pub mode: EstimateMode,
    pub value: Option<f64>,
    pub witness: Option<Vec<f64>>,
    /// Row index of the witness, discrete mode only.
    pub witness_index: Option<usize>,
    pub probes_used: usize,
}

impl LipschitzEstimate {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }

    fn undefined(anchor_index: usize, mode: EstimateMode, probes_used: usize) -> Self {
        LipschitzEstimate {
            anchor_index,
            mode,
            value: None,
            witness: None,
            witness_index: None,
            probes_used,
        }
    }
}

/// Gaussian perturbation ratios around one anchor, with the matching drift
/// of the model's score for the anchor's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProbeResult {
    pub sigma: f64,
    pub deltas: Vec<f64>,
    pub prediction_drifts: Vec<f64>,
}

/// Order statistics over the defined per-anchor estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub median: f64,
    pub lower_quartile: f64,
    pub upper_quartile: f64,
    pub mean: f64,
    pub max: f64,
}

/// Quartile statistics of a value list; `None` for an empty list.
pub fn summary_stats(values: &[f64]) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("estimates are finite"));
    Some(SummaryStats {
        median: quantile_sorted(&sorted, 0.5),
        lower_quartile: quantile_sorted(&sorted, 0.25),
        upper_quartile: quantile_sorted(&sorted, 0.75),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        max: *sorted.last().expect("non-empty"),
    })
}

/// Everything needed to rerun a summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummarySettings {
    pub epsilon: f64,
    pub membership_norm: MembershipNorm,
    pub strategy: Option<crate::optim::Strategy>,
    pub max_calls: Option<usize>,
    pub sample_size: usize,
    pub seed: u64,
}

/// Dataset-level robustness survey for one method: per-anchor estimates over
/// a seeded sample plus boxplot statistics of the defined values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub method: Method,
    pub mode: EstimateMode,
    pub estimates: Vec<LipschitzEstimate>,
    pub stats: Option<SummaryStats>,
    pub undefined_count: usize,
    pub settings: SummarySettings,
}

/// A model plus the attribution method under audit: the map x -> f(x).
#[derive(Clone, Copy)]
pub struct ExplanationMap<'a> {
    pub model: &'a Model,
    pub method: Method,
    pub config: &'a ExplainerConfig,
}

impl<'a> ExplanationMap<'a> {
    pub fn new(model: &'a Model, method: Method, config: &'a ExplainerConfig) -> Self {
        ExplanationMap {
            model,
            method,
            config,
        }
    }

    /// Class whose explanation is tracked: the model's prediction at the
    /// anchor. Held fixed across every probe of one estimate.
    pub fn target_for(&self, anchor: &[f64]) -> Result<usize, RobustnessError> {
        Ok(self.model.predicted_class(anchor)?)
    }

    pub fn attribution_at(
        &self,
        x: &[f64],
        target: usize,
    ) -> Result<Attribution, ExplainError> {
        explain::explain(self.model, x, target, self.method, self.config)
    }

    fn values_at(&self, x: &[f64], target: usize) -> Result<Vec<f64>, ExplainError> {
        Ok(self.attribution_at(x, target)?.values)
    }
}

/// The audited quantity, shared by every estimator so recomputation is
/// bit-identical: l2 distance of attributions over l2 distance of inputs.
fn attribution_ratio(f_anchor: &[f64], f_probe: &[f64], anchor: &[f64], probe: &[f64]) -> f64 {
    l2_dist(f_anchor, f_probe) / l2_dist(anchor, probe)
}

/// Budgeted maximization of the attribution ratio over the max-norm box of
/// radius epsilon around the anchor.
///
/// Probes that land within `MIN_PROBE_DISTANCE` of the anchor, or where the
/// explainer fails, are skipped but still consume budget. If every probe is
/// skipped the estimate comes back undefined rather than as an error.
pub fn lipschitz_continuous(
    map: &ExplanationMap,
    anchor: &[f64],
    anchor_index: usize,
    spec: &NeighborhoodSpec,
    budget: &ProbeBudget,
) -> Result<LipschitzEstimate, RobustnessError> {
    spec.validate()?;
    if budget.max_calls < 2 {
        return Err(RobustnessError::BudgetTooSmall);
    }
    let target = map.target_for(anchor)?;
    let f_anchor = map.values_at(anchor, target)?;
    let region = BoxRegion::new(anchor.to_vec(), spec.epsilon)?;
    let objective = |x: &[f64]| {
        if l2_dist(anchor, x) < MIN_PROBE_DISTANCE {
            return f64::NAN;
        }
        match map.values_at(x, target) {
            Ok(f_x) => attribution_ratio(&f_anchor, &f_x, anchor, x),
            Err(_) => f64::NAN,
        }
    };
    match maximize_in_box(objective, &region, budget) {
        Ok(res) => Ok(LipschitzEstimate {
            anchor_index,
            mode: EstimateMode::Continuous,
            value: Some(res.best_value),
            witness: Some(res.best_point),
            witness_index: None,
            probes_used: res.probes_used,
        }),
        Err(OptimError::NoFiniteProbe(n)) => Ok(LipschitzEstimate::undefined(
            anchor_index,
            EstimateMode::Continuous,
            n,
        )),
        Err(e) => Err(e.into()),
    }
}

/// Indices j != i with distance(rows[i], rows[j]) <= epsilon under the
/// membership norm, in ascending order.
pub fn build_neighborhood(
    rows: &[Vec<f64>],
    i: usize,
    spec: &NeighborhoodSpec,
) -> Result<Vec<usize>, RobustnessError> {
    spec.validate()?;
    if i >= rows.len() {
        return Err(RobustnessError::AnchorOutOfBounds {
            index: i,
            len: rows.len(),
        });
    }
    Ok((0..rows.len())
        .filter(|&j| j != i && spec.membership_norm.distance(&rows[i], &rows[j]) <= spec.epsilon)
        .collect())
}

/// Exact maximum of the attribution ratio over the anchor's dataset
/// neighborhood. Undefined when the neighborhood is empty or every neighbor
/// sits within the degeneracy guard of the anchor.
pub fn lipschitz_discrete(
    map: &ExplanationMap,
    rows: &[Vec<f64>],
    i: usize,
    spec: &NeighborhoodSpec,
) -> Result<LipschitzEstimate, RobustnessError> {
    let neighborhood = build_neighborhood(rows, i, spec)?;
    if neighborhood.is_empty() {
        return Ok(LipschitzEstimate::undefined(i, EstimateMode::Discrete, 0));
    }
    let anchor = &rows[i];
    let target = map.target_for(anchor)?;
    let f_anchor = map.values_at(anchor, target)?;
    let mut best: Option<(f64, usize)> = None;
    for &j in &neighborhood {
        if l2_dist(anchor, &rows[j]) < MIN_PROBE_DISTANCE {
            continue;
        }
        let f_j = match map.values_at(&rows[j], target) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let ratio = attribution_ratio(&f_anchor, &f_j, anchor, &rows[j]);
        if best.map_or(true, |(bv, _)| ratio > bv) {
            best = Some((ratio, j));
        }
    }
    match best {
        Some((value, j)) => Ok(LipschitzEstimate {
            anchor_index: i,
            mode: EstimateMode::Discrete,
            value: Some(value),
            witness: Some(rows[j].clone()),
            witness_index: Some(j),
            probes_used: neighborhood.len(),
        }),
        None => Ok(LipschitzEstimate::undefined(
            i,
            EstimateMode::Discrete,
            neighborhood.len(),
        )),
    }
}

/// Gaussian perturbation probe: n draws of x' = x + sigma * N(0, I), each
/// recording the attribution ratio and the drift of the model's score for
/// the anchor's class.
pub fn noise_probe(
    map: &ExplanationMap,
    x: &[f64],
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<NoiseProbeResult, RobustnessError> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(RobustnessError::InvalidSigma(sigma));
    }
    if n == 0 {
        return Err(RobustnessError::ZeroPerturbations);
    }
    let target = map.target_for(x)?;
    let f_x = map.values_at(x, target)?;
    let score_x = map.model.predict(x)?[target];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deltas = Vec::with_capacity(n);
    let mut drifts = Vec::with_capacity(n);
    for _ in 0..n {
        let probe: Vec<f64> = x
            .iter()
            .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if l2_dist(x, &probe) < MIN_PROBE_DISTANCE {
            continue;
        }
        let f_probe = match map.values_at(&probe, target) {
            Ok(v) => v,
            Err(_) => continue,
        };
        deltas.push(attribution_ratio(&f_x, &f_probe, x, &probe));
        drifts.push((score_x - map.model.predict(&probe)?[target]).abs());
    }
    Ok(NoiseProbeResult {
        sigma,
        deltas,
        prediction_drifts: drifts,
    })
}

/// Per-anchor estimates over a seeded sample of the rows, plus boxplot
/// statistics of the defined values.
///
/// Anchors are drawn without replacement with the given seed. In continuous
/// mode each anchor's optimizer runs with `budget.seed + row index`, so the
/// parallel and serial schedules produce identical output.
pub fn dataset_robustness_summary(
    map: &ExplanationMap,
    rows: &[Vec<f64>],
    sample_size: usize,
    mode: EstimateMode,
    spec: &NeighborhoodSpec,
    budget: &ProbeBudget,
    seed: u64,
) -> Result<RobustnessSummary, RobustnessError> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(RobustnessError::EmptyTestSet);
    }
    if sample_size == 0 {
        return Err(RobustnessError::ZeroSampleSize);
    }
    if sample_size > rows.len() {
        return Err(RobustnessError::SampleTooLarge {
            requested: sample_size,
            available: rows.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = rand::seq::index::sample(&mut rng, rows.len(), sample_size).into_vec();
    anchors.sort_unstable();

    let estimates: Vec<LipschitzEstimate> = anchors
        .par_iter()
        .map(|&i| match mode {
            EstimateMode::Continuous => {
                let per_anchor = ProbeBudget {
                    seed: budget.seed.wrapping_add(i as u64),
                    ..*budget
                };
                lipschitz_continuous(map, &rows[i], i, spec, &per_anchor)
            }
            EstimateMode::Discrete => lipschitz_discrete(map, rows, i, spec),
        })
        .collect::<Result<_, _>>()?;

    let defined: Vec<f64> = estimates.iter().filter_map(|e| e.value).collect();
    let undefined_count = estimates.len() - defined.len();
    Ok(RobustnessSummary {
        method: map.method,
        mode,
        stats: summary_stats(&defined),
        undefined_count,
        settings: SummarySettings {
            epsilon: spec.epsilon,
            membership_norm: spec.membership_norm,
            strategy: match mode {
                EstimateMode::Continuous => Some(budget.strategy),
                EstimateMode::Discrete => None,
            },
            max_calls: match mode {
                EstimateMode::Continuous => Some(budget.max_calls),
                EstimateMode::Discrete => None,
            },
            sample_size,
            seed,
        },
        estimates,
    })
}

/// Side-by-side dump for the pair attaining an estimate: both attribution
/// vectors, both model outputs, and the recomputed ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub anchor_index: usize,
    pub witness_index: Option<usize>,
    pub mode: EstimateMode,
    pub anchor: Vec<f64>,
    pub witness: Vec<f64>,
    pub anchor_attribution: Attribution,
    pub witness_attribution: Attribution,
    pub anchor_prediction: Vec<f64>,
    pub witness_prediction: Vec<f64>,
    pub ratio: f64,
}

/// Expands a defined estimate into its worst pair. The ratio is recomputed
/// from fresh attributions and matches the estimate bit for bit because the
/// whole pipeline is deterministic.
pub fn worst_pair(
    map: &ExplanationMap,
    anchor: &[f64],
    estimate: &LipschitzEstimate,
) -> Result<WorstPair, RobustnessError> {
    let witness = match (&estimate.value, &estimate.witness) {
        (Some(_), Some(w)) => w.clone(),
        _ => return Err(RobustnessError::UndefinedEstimate(estimate.anchor_index)),
    };
    let target = map.target_for(anchor)?;
    let anchor_attribution = map.attribution_at(anchor, target)?;
    let witness_attribution = map.attribution_at(&witness, target)?;
    let ratio = attribution_ratio(
        &anchor_attribution.values,
        &witness_attribution.values,
        anchor,
        &witness,
    );
    Ok(WorstPair {
        anchor_index: estimate.anchor_index,
        witness_index: estimate.witness_index,
        mode: estimate.mode,
        anchor: anchor.to_vec(),
        anchor_prediction: map.model.predict(anchor)?,
        witness_prediction: map.model.predict(&witness)?,
        witness,
        anchor_attribution,
        witness_attribution,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, LayerSpec, MlpModel, Task};
    use crate::optim::Strategy;

    /// Regression net computing w . x, so grad*input is the linear map
    /// x -> w (elementwise) x and saliency is the constant map x -> w.
    fn linear_model(w: &[f64]) -> Model {
        let layer =
            LayerSpec::new(w.len(), 1, w.to_vec(), vec![0.0], Activation::Identity).unwrap();
        Model::Mlp(MlpModel::new(vec![layer], Task::Regression, w.len()).unwrap())
    }

    fn grad_input_map<'a>(model: &'a Model, cfg: &'a ExplainerConfig) -> ExplanationMap<'a> {
        ExplanationMap::new(model, Method::GradInput, cfg)
    }

    fn spec(epsilon: f64) -> NeighborhoodSpec {
        NeighborhoodSpec::new(epsilon).unwrap()
    }

    #[test]
    fn continuous_estimate_recovers_linear_slope() {
        // f(x) = 3x in one dimension: the ratio is exactly 3 everywhere.
        let model = linear_model(&[3.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let budget = ProbeBudget::new(200, Strategy::RandomSearch, 0);
        let est = lipschitz_continuous(&map, &[0.5], 0, &spec(0.1), &budget).unwrap();
        let value = est.value.unwrap();
        assert!(value >= 2.9 && value <= 3.0 + 1e-9, "estimate {}", value);
        let witness = est.witness.unwrap();
        assert!((witness[0] - 0.5).abs() <= 0.1);
        assert!(est.probes_used <= 200);
    }

    #[test]
    fn constant_explainer_has_zero_estimate() {
        // Saliency of a linear model is constant, so the numerator vanishes.
        let model = linear_model(&[3.0, -1.0]);
        let cfg = ExplainerConfig::default();
        let map = ExplanationMap::new(&model, Method::Saliency, &cfg);
        let budget = ProbeBudget::new(50, Strategy::RandomSearch, 1);
        let est = lipschitz_continuous(&map, &[0.2, 0.4], 0, &spec(0.1), &budget).unwrap();
        assert_eq!(est.value.unwrap(), 0.0);

        let rows = vec![vec![0.2, 0.4], vec![0.25, 0.38], vec![0.18, 0.44]];
        let est = lipschitz_discrete(&map, &rows, 0, &spec(0.1)).unwrap();
        assert_eq!(est.value.unwrap(), 0.0);
    }

    /// Two-region piecewise-linear map via a pair of relu units.
    fn kinked_model() -> Model {
        let hidden = LayerSpec::new(
            2,
            2,
            vec![1.0, -2.0, 0.5, 1.5],
            vec![0.1, -0.2],
            Activation::Relu,
        )
        .unwrap();
        let out = LayerSpec::new(2, 1, vec![1.0, 1.0], vec![0.0], Activation::Identity).unwrap();
        Model::Mlp(MlpModel::new(vec![hidden, out], Task::Regression, 2).unwrap())
    }

    #[test]
    fn continuous_estimate_tracks_grid_oracle_on_kinked_map() {
        // Occlusion of a relu net is continuous piecewise-linear in the
        // input, so the ratio field is bounded and the grid scan converges;
        // grad*input would jump across the kink and put a spike next to the
        // anchor that no finite scan pins down.
        let model = kinked_model();
        let cfg = ExplainerConfig::default();
        let map = ExplanationMap::new(&model, Method::Occlusion, &cfg);
        let anchor = [0.15, 0.1];
        let eps = 0.1;
        let target = map.target_for(&anchor).unwrap();
        let f_anchor = map.values_at(&anchor, target).unwrap();

        // Dense grid scan of the same box as an independent oracle.
        let n = 200;
        let mut oracle = 0.0f64;
        for gi in 0..n {
            for gj in 0..n {
                let x = [
                    anchor[0] - eps + 2.0 * eps * gi as f64 / (n - 1) as f64,
                    anchor[1] - eps + 2.0 * eps * gj as f64 / (n - 1) as f64,
                ];
                let den = l2_dist(&anchor, &x);
                if den < MIN_PROBE_DISTANCE {
                    continue;
                }
                let f_x = map.values_at(&x, target).unwrap();
                oracle = oracle.max(l2_dist(&f_anchor, &f_x) / den);
            }
        }
        assert!(oracle > 0.0, "oracle field is degenerate");

        let budget = ProbeBudget::new(200, Strategy::SurrogateBo, 0);
        let est = lipschitz_continuous(&map, &anchor, 0, &spec(eps), &budget).unwrap();
        let value = est.value.unwrap();
        assert!(
            value >= 0.9 * oracle,
            "estimate {} below 90% of grid oracle {}",
            value,
            oracle
        );
        assert!(value <= oracle * 1.0 + 1e-9, "estimate above exhaustive scan");
    }

    #[test]
    fn undefined_when_every_probe_is_skipped() {
        // A box so small that every probe trips the degeneracy guard.
        let model = linear_model(&[1.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let tiny = NeighborhoodSpec::new(MIN_PROBE_DISTANCE / 100.0).unwrap();
        let budget = ProbeBudget::new(10, Strategy::RandomSearch, 0);
        let est = lipschitz_continuous(&map, &[0.0], 3, &tiny, &budget).unwrap();
        assert!(!est.is_defined());
        assert_eq!(est.anchor_index, 3);
        assert_eq!(est.probes_used, 10);
        assert!(est.witness.is_none());
    }

    #[test]
    fn neighborhood_matches_hand_example() {
        let rows = vec![vec![0.0], vec![0.05], vec![0.5]];
        let s = spec(0.1);
        assert_eq!(build_neighborhood(&rows, 0, &s).unwrap(), vec![1]);
        assert_eq!(build_neighborhood(&rows, 2, &s).unwrap(), Vec::<usize>::new());
        let wide = spec(1.0);
        assert_eq!(build_neighborhood(&rows, 0, &wide).unwrap(), vec![1, 2]);
    }

    #[test]
    fn neighborhood_matches_naive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        for norm in [MembershipNorm::L2, MembershipNorm::Linf] {
            let s = spec(0.25).with_norm(norm);
            for i in 0..rows.len() {
                let naive: Vec<usize> = (0..rows.len())
                    .filter(|&j| j != i)
                    .filter(|&j| match norm {
                        MembershipNorm::L2 => {
                            rows[i]
                                .iter()
                                .zip(&rows[j])
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt()
                                <= 0.25
                        }
                        MembershipNorm::Linf => rows[i]
                            .iter()
                            .zip(&rows[j])
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0f64, f64::max)
                            <= 0.25,
                    })
                    .collect();
                assert_eq!(build_neighborhood(&rows, i, &s).unwrap(), naive);
            }
        }
    }

    #[test]
    fn discrete_estimate_matches_hand_example() {
        // f(x) = 2x: the only neighbor of 0.0 within 0.1 is 0.05, ratio 2.
        let model = linear_model(&[2.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let rows = vec![vec![0.0], vec![0.05], vec![0.5]];
        let est = lipschitz_discrete(&map, &rows, 0, &spec(0.1)).unwrap();
        assert_eq!(est.value.unwrap(), 2.0);
        assert_eq!(est.witness_index, Some(1));
        assert_eq!(est.witness.as_deref(), Some(&[0.05][..]));
        assert_eq!(est.probes_used, 1);

        let empty = lipschitz_discrete(&map, &rows, 2, &spec(0.1)).unwrap();
        assert!(!empty.is_defined());
        assert_eq!(empty.probes_used, 0);
    }

    /// Forest on one-hot rows, plus the occlusion explainer: exercises the
    /// gradient-free path on categorical data.
    fn categorical_fixture() -> (Vec<Vec<f64>>, Model) {
        use crate::data::Dataset;
        use crate::model::{fit_random_forest, ForestConfig};
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 600;
        let mut rows = Vec::with_capacity(n);
        let mut flat = Vec::with_capacity(n * 5);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.gen_range(0..3usize);
            let b = rng.gen_range(0..2usize);
            let mut row = vec![0.0; 5];
            row[a] = 1.0;
            row[3 + b] = 1.0;
            labels.push(((a == 1) ^ (b == 1)) as usize);
            flat.extend_from_slice(&row);
            rows.push(row);
        }
        let ds = Dataset::from_parts_classification(flat, 5, labels, 2).unwrap();
        let cfg = ForestConfig {
            n_trees: 10,
            seed: 5,
            ..ForestConfig::default()
        };
        let model = fit_random_forest(&ds, &cfg).unwrap();
        (rows, Model::Forest(model))
    }

    #[test]
    fn discrete_estimate_equals_naive_pair_scan_on_categorical_rows() {
        let (rows, model) = categorical_fixture();
        let cfg = ExplainerConfig::default();
        let map = ExplanationMap::new(&model, Method::Occlusion, &cfg);
        // Distinct one-hot rows differ by sqrt(2) or 2; epsilon 1.5 keeps
        // single-column changes in and double-column changes out.
        let s = spec(1.5);
        for i in [0usize, 17, 333, 599] {
            let est = lipschitz_discrete(&map, &rows, i, &s).unwrap();
            let target = map.target_for(&rows[i]).unwrap();
            let f_i = map.values_at(&rows[i], target).unwrap();
            let mut oracle: Option<(f64, usize)> = None;
            for j in 0..rows.len() {
                if j == i {
                    continue;
                }
                let dist = l2_dist(&rows[i], &rows[j]);
                if dist > 1.5 || dist < MIN_PROBE_DISTANCE {
                    continue;
                }
                let f_j = map.values_at(&rows[j], target).unwrap();
                let ratio = l2_dist(&f_i, &f_j) / dist;
                if oracle.map_or(true, |(bv, _)| ratio > bv) {
                    oracle = Some((ratio, j));
                }
            }
            let (oracle_value, oracle_witness) = oracle.unwrap();
            assert_eq!(est.value.unwrap(), oracle_value, "anchor {}", i);
            assert_eq!(est.witness_index, Some(oracle_witness), "anchor {}", i);
        }
    }

    #[test]
    fn discrete_ratio_is_symmetric_for_mutual_neighbors() {
        let model = kinked_model();
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let rows = vec![vec![0.12, 0.08], vec![0.18, 0.13]];
        let s = spec(0.1);
        let a = lipschitz_discrete(&map, &rows, 0, &s).unwrap();
        let b = lipschitz_discrete(&map, &rows, 1, &s).unwrap();
        assert_eq!(a.value.unwrap(), b.value.unwrap());
    }

    #[test]
    fn noise_probe_is_zero_for_constant_explainer() {
        let model = linear_model(&[1.0, 2.0]);
        let cfg = ExplainerConfig::default();
        let map = ExplanationMap::new(&model, Method::Saliency, &cfg);
        let res = noise_probe(&map, &[0.3, 0.7], 0.05, 20, 9).unwrap();
        assert_eq!(res.deltas.len(), 20);
        assert_eq!(res.prediction_drifts.len(), 20);
        assert!(res.deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn noise_probe_respects_operator_norm_of_linear_map() {
        // grad*input for w = (3, -2, 0.5) is x -> diag(w) x, whose largest
        // singular value is 3; SVD oracle cross-checks the bound.
        let w = [3.0, -2.0, 0.5];
        let model = linear_model(&w);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let a = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&w));
        let sigma_max = a.svd(false, false).singular_values[0];
        assert!((sigma_max - 3.0).abs() < 1e-12);

        let res = noise_probe(&map, &[0.5, -0.2, 0.9], 0.1, 50, 4).unwrap();
        assert_eq!(res.deltas.len(), 50);
        for &d in &res.deltas {
            assert!(d >= 0.0 && d <= sigma_max + 1e-9, "delta {}", d);
        }
        // Drift of the raw score w.(x - x') is also bounded by sigma_max
        // times the step, but here just check it is finite and nonnegative.
        assert!(res.prediction_drifts.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn noise_probe_is_deterministic() {
        let model = linear_model(&[1.5, -0.5]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let a = noise_probe(&map, &[0.1, 0.2], 0.2, 30, 11).unwrap();
        let b = noise_probe(&map, &[0.1, 0.2], 0.2, 30, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_probe_rejects_bad_arguments() {
        let model = linear_model(&[1.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        assert!(matches!(
            noise_probe(&map, &[0.0], 0.0, 5, 0),
            Err(RobustnessError::InvalidSigma(_))
        ));
        assert!(matches!(
            noise_probe(&map, &[0.0], 0.1, 0, 0),
            Err(RobustnessError::ZeroPerturbations)
        ));
    }

    #[test]
    fn summary_stats_match_hand_computed_quartiles() {
        let stats = summary_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(stats.median, 3.0);
        assert_eq!(stats.lower_quartile, 2.0);
        assert_eq!(stats.upper_quartile, 4.0);
        assert_eq!(stats.mean, 3.0);
        assert_eq!(stats.max, 5.0);
        assert!(summary_stats(&[]).is_none());
    }

    fn grid_rows(n_side: usize, step: f64) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                rows.push(vec![i as f64 * step, j as f64 * step]);
            }
        }
        rows
    }

    #[test]
    fn summary_of_constant_explainer_is_all_zero() {
        let model = linear_model(&[2.0, -1.0]);
        let cfg = ExplainerConfig::default();
        let map = ExplanationMap::new(&model, Method::Saliency, &cfg);
        let rows = grid_rows(5, 0.05);
        let budget = ProbeBudget::new(10, Strategy::RandomSearch, 0);
        let summary = dataset_robustness_summary(
            &map,
            &rows,
            10,
            EstimateMode::Discrete,
            &spec(0.1),
            &budget,
            3,
        )
        .unwrap();
        let stats = summary.stats.unwrap();
        assert_eq!(stats.median, 0.0);
        assert_eq!(stats.max, 0.0);
        assert_eq!(summary.undefined_count, 0);
        assert_eq!(summary.estimates.len(), 10);
    }

    #[test]
    fn summary_is_deterministic_across_runs() {
        let model = kinked_model();
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let rows = grid_rows(6, 0.04);
        let budget = ProbeBudget::new(20, Strategy::RandomSearch, 17);
        for mode in [EstimateMode::Continuous, EstimateMode::Discrete] {
            let run = || {
                dataset_robustness_summary(&map, &rows, 12, mode, &spec(0.1), &budget, 42)
                    .unwrap()
            };
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn summary_counts_undefined_estimates() {
        // Far-apart rows with a tiny epsilon: every neighborhood is empty.
        let model = linear_model(&[1.0, 1.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let rows = grid_rows(4, 10.0);
        let budget = ProbeBudget::new(10, Strategy::RandomSearch, 0);
        let summary = dataset_robustness_summary(
            &map,
            &rows,
            16,
            EstimateMode::Discrete,
            &spec(0.5),
            &budget,
            1,
        )
        .unwrap();
        assert_eq!(summary.undefined_count, 16);
        assert!(summary.stats.is_none());
        assert!(summary.estimates.iter().all(|e| !e.is_defined()));
    }

    #[test]
    fn summary_rejects_bad_sampling_arguments() {
        let model = linear_model(&[1.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let budget = ProbeBudget::new(10, Strategy::RandomSearch, 0);
        let s = spec(0.1);
        let err = dataset_robustness_summary(
            &map,
            &[],
            1,
            EstimateMode::Discrete,
            &s,
            &budget,
            0,
        );
        assert!(matches!(err, Err(RobustnessError::EmptyTestSet)));
        let rows = vec![vec![0.0], vec![1.0]];
        let err = dataset_robustness_summary(
            &map,
            &rows,
            3,
            EstimateMode::Discrete,
            &s,
            &budget,
            0,
        );
        assert!(matches!(
            err,
            Err(RobustnessError::SampleTooLarge {
                requested: 3,
                available: 2
            })
        ));
        let err = dataset_robustness_summary(
            &map,
            &rows,
            0,
            EstimateMode::Discrete,
            &s,
            &budget,
            0,
        );
        assert!(matches!(err, Err(RobustnessError::ZeroSampleSize)));
    }

    #[test]
    fn continuous_estimate_is_prefix_monotone_in_budget() {
        let model = kinked_model();
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let anchor = [0.1, 0.05];
        let s = spec(0.1);
        let small = ProbeBudget::new(50, Strategy::RandomSearch, 21);
        let large = ProbeBudget::new(100, Strategy::RandomSearch, 21);
        let a = lipschitz_continuous(&map, &anchor, 0, &s, &small).unwrap();
        let b = lipschitz_continuous(&map, &anchor, 0, &s, &large).unwrap();
        assert!(b.value.unwrap() >= a.value.unwrap());
    }

    #[test]
    fn worst_pair_recomputes_the_ratio_bit_for_bit() {
        let model = kinked_model();
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let anchor = [0.15, 0.1];
        let budget = ProbeBudget::new(80, Strategy::RandomSearch, 2);
        let est = lipschitz_continuous(&map, &anchor, 0, &spec(0.1), &budget).unwrap();
        let pair = worst_pair(&map, &anchor, &est).unwrap();
        assert_eq!(pair.ratio, est.value.unwrap());
        assert_eq!(&pair.witness, est.witness.as_ref().unwrap());
        assert_ne!(pair.anchor, pair.witness);
        assert_eq!(pair.anchor_prediction.len(), 1);
        assert_eq!(pair.anchor_attribution.values.len(), 2);

        let rows = vec![vec![0.12, 0.08], vec![0.18, 0.13], vec![0.1, 0.14]];
        let est = lipschitz_discrete(&map, &rows, 0, &spec(0.2)).unwrap();
        let pair = worst_pair(&map, &rows[0], &est).unwrap();
        assert_eq!(pair.ratio, est.value.unwrap());
        assert_eq!(pair.witness_index, est.witness_index);
    }

    #[test]
    fn worst_pair_of_undefined_estimate_is_an_error() {
        let model = linear_model(&[1.0]);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let est = LipschitzEstimate::undefined(5, EstimateMode::Discrete, 0);
        assert!(matches!(
            worst_pair(&map, &[0.0], &est),
            Err(RobustnessError::UndefinedEstimate(5))
        ));
    }

    #[test]
    fn linear_map_ratios_stay_under_operator_norm_everywhere() {
        let w = [3.0, -2.0, 0.5];
        let model = linear_model(&w);
        let cfg = ExplainerConfig::default();
        let map = grad_input_map(&model, &cfg);
        let bound = 3.0 + 1e-9;
        let budget = ProbeBudget::new(60, Strategy::PatternSearch, 0);
        let est =
            lipschitz_continuous(&map, &[0.4, 0.1, -0.3], 0, &spec(0.1), &budget).unwrap();
        assert!(est.value.unwrap() <= bound);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        for i in 0..rows.len() {
            let est = lipschitz_discrete(&map, &rows, i, &spec(0.5)).unwrap();
            if let Some(v) = est.value {
                assert!(v >= 0.0 && v <= bound, "ratio {}", v);
            }
        }
    }
}
