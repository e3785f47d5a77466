//! Budgeted black-box maximization over an axis-aligned box.
//!
//! Every strategy spends at most `max_calls` objective evaluations and only
//! proposes points inside the box. Probes where the objective returns a
//! non-finite value are discarded from the history but still consume budget;
//! the count of such probes is reported so callers can surface it.

mod gp;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("box region must have at least one dimension")]
    EmptyRegion,
    #[error("box radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("box center must be finite")]
    NonFiniteCenter,
    #[error("probe budget must allow at least one call")]
    ZeroBudget,
    #[error("all {0} probes returned non-finite values")]
    NoFiniteProbe(usize),
}

/// Axis-aligned max-norm ball: all x with |x_j - center_j| <= radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BoxRegion {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self, OptimError> {
        if center.is_empty() {
            return Err(OptimError::EmptyRegion);
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(OptimError::NonFiniteCenter);
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(OptimError::InvalidRadius(radius));
        }
        Ok(BoxRegion { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.center.len()
            && x.iter()
                .zip(&self.center)
                .all(|(v, c)| (v - c).abs() <= self.radius)
    }

    /// Projects x onto the box coordinate-wise.
    ///
    /// The rounded bounds c +- r can sit one ulp outside the exact
    /// membership test |x_j - c_j| <= r, so clamped coordinates are nudged
    /// inward until `contains` accepts them.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, c) in x.iter_mut().zip(&self.center) {
            *v = v.clamp(c - self.radius, c + self.radius);
            while (*v - c).abs() > self.radius {
                *v = if *v > *c { v.next_down() } else { v.next_up() };
            }
        }
    }

    fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .center
            .iter()
            .map(|c| rng.gen_range(c - self.radius..=c + self.radius))
            .collect();
        self.clamp(&mut x);
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RandomSearch,
    PatternSearch,
    SurrogateBo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBudget {
    pub max_calls: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl ProbeBudget {
    pub fn new(max_calls: usize, strategy: Strategy, seed: u64) -> Self {
        ProbeBudget {
            max_calls,
            strategy,
            seed,
        }
    }
}

/// Outcome of one maximization run.
///
/// `history` holds the successful probes in evaluation order; `best_value`
/// is always the max over the history and `best_point` its argmax (first
/// occurrence on exact ties).
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<(Vec<f64>, f64)>,
    pub probes_used: usize,
    pub discarded: usize,
}

struct Run<'a, F> {
    objective: F,
    region: &'a BoxRegion,
    max_calls: usize,
    history: Vec<(Vec<f64>, f64)>,
    probes_used: usize,
    discarded: usize,
}

impl<'a, F: FnMut(&[f64]) -> f64> Run<'a, F> {
    fn new(objective: F, region: &'a BoxRegion, max_calls: usize) -> Self {
        Run {
            objective,
            region,
            max_calls,
            history: Vec::new(),
            probes_used: 0,
            discarded: 0,
        }
    }

    fn exhausted(&self) -> bool {
        self.probes_used >= self.max_calls
    }

    /// Evaluates one in-box point; returns the value if it was finite.
    fn probe(&mut self, point: Vec<f64>) -> Option<f64> {
        debug_assert!(self.region.contains(&point));
        debug_assert!(!self.exhausted());
        self.probes_used += 1;
        let value = (self.objective)(&point);
        if value.is_finite() {
            self.history.push((point, value));
            Some(value)
        } else {
            self.discarded += 1;
            None
        }
    }

    fn finish(self) -> Result<OptResult, OptimError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, v)) in self.history.iter().enumerate() {
            if best.map_or(true, |(_, bv)| *v > bv) {
                best = Some((i, *v));
            }
        }
        let (idx, best_value) = best.ok_or(OptimError::NoFiniteProbe(self.probes_used))?;
        Ok(OptResult {
            best_point: self.history[idx].0.clone(),
            best_value,
            history: self.history,
            probes_used: self.probes_used,
            discarded: self.discarded,
        })
    }
}

/// Maximizes `objective` over the box with the configured strategy.
///
/// The objective may signal "skip this point" by returning NaN (or any
/// non-finite value); such probes count against the budget. The run fails
/// only when every probe was skipped.
pub fn maximize_in_box<F>(
    objective: F,
    region: &BoxRegion,
    budget: &ProbeBudget,
) -> Result<OptResult, OptimError>
where
    F: FnMut(&[f64]) -> f64,
{
    if region.center.is_empty() {
        return Err(OptimError::EmptyRegion);
    }
    if !(region.radius.is_finite() && region.radius > 0.0) {
        return Err(OptimError::InvalidRadius(region.radius));
    }
    if budget.max_calls == 0 {
        return Err(OptimError::ZeroBudget);
    }
    let mut run = Run::new(objective, region, budget.max_calls);
    match budget.strategy {
        Strategy::RandomSearch => random_search(&mut run, budget.seed),
        Strategy::PatternSearch => pattern_search(&mut run),
        Strategy::SurrogateBo => surrogate_bo(&mut run, budget.seed),
    }
    run.finish()
}

/// Uniform i.i.d. probes. Draws per probe are a fixed function of the seed
/// and probe index, so a larger budget extends a smaller run's history.
fn random_search<F: FnMut(&[f64]) -> f64>(run: &mut Run<F>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while !run.exhausted() {
        let x = run.region.sample_uniform(&mut rng);
        run.probe(x);
    }
}

/// Deterministic compass search from the box center with halving steps.
fn pattern_search<F: FnMut(&[f64]) -> f64>(run: &mut Run<F>) {
    let d = run.region.dim();
    let mut current = run.region.center.clone();
    // A skipped center leaves the incumbent value at -inf so any finite
    // poll point is accepted as an improvement.
    let mut current_value = match run.probe(current.clone()) {
        Some(v) => v,
        None => f64::NEG_INFINITY,
    };
    let mut step = run.region.radius / 2.0;
    while !run.exhausted() && step >= 1e-12 {
        let mut best_move: Option<(Vec<f64>, f64)> = None;
        'poll: for j in 0..d {
            for dir in [1.0, -1.0] {
                if run.exhausted() {
                    break 'poll;
                }
                let mut cand = current.clone();
                cand[j] += dir * step;
                run.region.clamp(&mut cand);
                if cand == current {
                    // Clamping collapsed the move; nothing new to evaluate.
                    continue;
                }
                if let Some(v) = run.probe(cand.clone()) {
                    if v > current_value && best_move.as_ref().map_or(true, |(_, bv)| v > *bv) {
                        best_move = Some((cand, v));
                    }
                }
            }
        }
        match best_move {
            Some((point, value)) => {
                current = point;
                current_value = value;
            }
            None => step /= 2.0,
        }
    }
}

const BO_CANDIDATES: usize = 1000;
const BO_JITTER: f64 = 1e-8;

/// Gaussian-process surrogate with expected-improvement acquisition.
///
/// A quarter of the budget seeds the model with uniform probes; each
/// remaining call evaluates the EI argmax over a fresh batch of uniform
/// candidates. Kernel length scale is half the box radius, matching the
/// scale on which the objective can vary inside the region.
fn surrogate_bo<F: FnMut(&[f64]) -> f64>(run: &mut Run<F>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_init = (run.max_calls / 4).max(1);
    let mut gp = gp::Surrogate::new(run.region.radius / 2.0, BO_JITTER);
    let mut ys: Vec<f64> = Vec::new();
    for _ in 0..n_init {
        if run.exhausted() {
            return;
        }
        let x = run.region.sample_uniform(&mut rng);
        if let Some(v) = run.probe(x.clone()) {
            gp.push(x);
            ys.push(v);
        }
    }
    while !run.exhausted() {
        if ys.is_empty() {
            // Nothing finite observed yet; keep exploring uniformly.
            let x = run.region.sample_uniform(&mut rng);
            if let Some(v) = run.probe(x.clone()) {
                gp.push(x);
                ys.push(v);
            }
            continue;
        }
        // Standardize targets so the unit-variance prior fits them.
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let std_y: Vec<f64> = ys.iter().map(|y| (y - mean) / scale).collect();
        let alpha = gp.fit_targets(&std_y);
        let best_std = std_y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut best_cand: Option<(Vec<f64>, f64)> = None;
        for _ in 0..BO_CANDIDATES {
            let cand = run.region.sample_uniform(&mut rng);
            let (mu, var) = gp.posterior(&cand, &alpha);
            let ei = gp::expected_improvement(mu, var, best_std);
            if best_cand.as_ref().map_or(true, |(_, b)| ei > *b) {
                best_cand = Some((cand, ei));
            }
        }
        let (x, _) = best_cand.expect("candidate batch is non-empty");
        if let Some(v) = run.probe(x.clone()) {
            gp.push(x);
            ys.push(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRATEGIES: [Strategy; 3] = [
        Strategy::RandomSearch,
        Strategy::PatternSearch,
        Strategy::SurrogateBo,
    ];

    fn unit_box(d: usize, radius: f64) -> BoxRegion {
        BoxRegion::new(vec![0.0; d], radius).unwrap()
    }

    #[test]
    fn box_membership_and_clamping() {
        let region = BoxRegion::new(vec![1.0, -1.0], 0.5).unwrap();
        assert!(region.contains(&[1.5, -0.5]));
        assert!(!region.contains(&[1.5001, -0.5]));
        assert!(!region.contains(&[1.0]));
        let mut x = vec![9.0, -9.0];
        region.clamp(&mut x);
        assert_eq!(x, vec![1.5, -1.5]);
    }

    #[test]
    fn invalid_regions_and_budgets_are_rejected() {
        assert!(matches!(
            BoxRegion::new(vec![], 0.1),
            Err(OptimError::EmptyRegion)
        ));
        assert!(matches!(
            BoxRegion::new(vec![0.0], 0.0),
            Err(OptimError::InvalidRadius(_))
        ));
        assert!(matches!(
            BoxRegion::new(vec![f64::NAN], 0.1),
            Err(OptimError::NonFiniteCenter)
        ));
        let region = unit_box(1, 0.1);
        let budget = ProbeBudget::new(0, Strategy::RandomSearch, 0);
        assert!(matches!(
            maximize_in_box(|_| 0.0, &region, &budget),
            Err(OptimError::ZeroBudget)
        ));
    }

    #[test]
    fn constant_objective_is_solved_by_every_strategy() {
        let region = unit_box(3, 0.2);
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(20, strategy, 7);
            let res = maximize_in_box(|_| 4.25, &region, &budget).unwrap();
            assert_eq!(res.best_value, 4.25);
            assert!(region.contains(&res.best_point));
        }
    }

    #[test]
    fn pattern_search_reaches_linear_corner() {
        // Sum objective on a 2-D box of radius 0.1: true max 0.2 at (0.1, 0.1).
        let region = unit_box(2, 0.1);
        let budget = ProbeBudget::new(200, Strategy::PatternSearch, 0);
        let res = maximize_in_box(|x| x.iter().sum(), &region, &budget).unwrap();
        assert!(
            res.best_value >= 0.19,
            "pattern search stalled at {}",
            res.best_value
        );
        assert!(res.best_value <= 0.2 + 1e-12);
    }

    #[test]
    fn surrogate_bo_beats_its_own_init_phase_on_linear_objective() {
        let region = unit_box(2, 0.1);
        let budget = ProbeBudget::new(60, Strategy::SurrogateBo, 3);
        let res = maximize_in_box(|x| x.iter().sum(), &region, &budget).unwrap();
        let init_best = res.history[..15]
            .iter()
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(res.best_value >= init_best);
        assert!(
            res.best_value >= 0.15,
            "surrogate search stalled at {}",
            res.best_value
        );
    }

    #[test]
    fn same_seed_gives_bitwise_identical_results() {
        let region = BoxRegion::new(vec![0.3, -0.7, 0.1], 0.25).unwrap();
        let obj = |x: &[f64]| (x[0] * 3.1).sin() + x[1] * x[1] - x[2];
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(40, strategy, 99);
            let a = maximize_in_box(obj, &region, &budget).unwrap();
            let b = maximize_in_box(obj, &region, &budget).unwrap();
            assert_eq!(a, b, "strategy {:?} not deterministic", strategy);
        }
    }

    #[test]
    fn every_probe_stays_inside_the_box() {
        let region = BoxRegion::new(vec![5.0, -2.0], 0.01).unwrap();
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(50, strategy, 11);
            let res = maximize_in_box(|x| x[0] - x[1], &region, &budget).unwrap();
            for (p, _) in &res.history {
                assert!(region.contains(p), "{:?} escaped with {:?}", strategy, p);
            }
        }
    }

    #[test]
    fn budget_is_never_exceeded() {
        for strategy in STRATEGIES {
            for max_calls in [1, 2, 7, 33] {
                let region = unit_box(2, 0.5);
                let mut calls = 0usize;
                let budget = ProbeBudget::new(max_calls, strategy, 5);
                let res = maximize_in_box(
                    |x| {
                        calls += 1;
                        x[0] + x[1]
                    },
                    &region,
                    &budget,
                )
                .unwrap();
                assert!(calls <= max_calls, "{:?} made {} calls", strategy, calls);
                assert_eq!(res.probes_used, calls);
                assert!(res.history.len() <= calls);
            }
        }
    }

    #[test]
    fn random_search_prefix_is_stable_under_larger_budget() {
        let region = unit_box(3, 0.4);
        let obj = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let small = maximize_in_box(
            obj,
            &region,
            &ProbeBudget::new(30, Strategy::RandomSearch, 42),
        )
        .unwrap();
        let large = maximize_in_box(
            obj,
            &region,
            &ProbeBudget::new(60, Strategy::RandomSearch, 42),
        )
        .unwrap();
        assert_eq!(&large.history[..30], &small.history[..]);
        assert!(large.best_value >= small.best_value);
    }

    #[test]
    fn nan_probes_consume_budget_but_never_win() {
        // Objective is NaN on the left half of the box.
        let region = unit_box(1, 1.0);
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(30, strategy, 2);
            let res = maximize_in_box(
                |x| if x[0] < 0.0 { f64::NAN } else { x[0] },
                &region,
                &budget,
            )
            .unwrap();
            assert_eq!(res.probes_used, 30.min(res.probes_used));
            assert!(res.history.iter().all(|(_, v)| v.is_finite()));
            assert!(res.best_value >= 0.0);
            if strategy != Strategy::PatternSearch {
                assert!(res.discarded > 0, "{:?} saw no NaN probes", strategy);
            }
            assert_eq!(res.probes_used, res.history.len() + res.discarded);
        }
    }

    #[test]
    fn all_nan_objective_is_an_error() {
        let region = unit_box(2, 0.3);
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(10, strategy, 1);
            match maximize_in_box(|_| f64::NAN, &region, &budget) {
                Err(OptimError::NoFiniteProbe(n)) => assert_eq!(n, 10),
                other => panic!("expected NoFiniteProbe, got {:?}", other),
            }
        }
    }

    #[test]
    fn best_value_matches_history_maximum() {
        let region = unit_box(2, 0.2);
        for strategy in STRATEGIES {
            let budget = ProbeBudget::new(25, strategy, 8);
            let res =
                maximize_in_box(|x| (7.0 * x[0]).cos() + x[1], &region, &budget).unwrap();
            let max = res
                .history
                .iter()
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(res.best_value, max);
            let found = res
                .history
                .iter()
                .find(|(_, v)| *v == res.best_value)
                .unwrap();
            assert_eq!(found.0, res.best_point);
        }
    }

    #[test]
    fn strategy_names_round_trip_through_serde() {
        for (s, name) in [
            (Strategy::RandomSearch, "\"random_search\""),
            (Strategy::PatternSearch, "\"pattern_search\""),
            (Strategy::SurrogateBo, "\"surrogate_bo\""),
        ] {
            assert_eq!(serde_json::to_string(&s).unwrap(), name);
            assert_eq!(serde_json::from_str::<Strategy>(name).unwrap(), s);
        }
    }
}
