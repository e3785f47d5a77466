//! CART random forests for gradient-free prediction.
//!
//! Classification trees split on gini impurity and each tree votes for one
//! class; forest probabilities are vote fractions. Regression trees split on
//! variance and the forest averages leaf means. Split ties are broken by
//! lowest feature index, then lowest threshold, so training is deterministic
//! given the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelError, Task};
use crate::data::Dataset;
use crate::vecmath::argmax;

/// One node in a tree arena. Children are arena indices.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class histogram (counts summing to the leaf sample count) or the mean
    /// target value, depending on the task.
    Leaf { value: LeafValue },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LeafValue {
    ClassCounts(Vec<f64>),
    Mean(f64),
}

/// A single fitted tree; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> &LeafValue {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    /// Voted class (classification) with histogram ties going to the lowest
    /// class index.
    pub fn vote(&self, x: &[f64]) -> usize {
        match self.leaf(x) {
            LeafValue::ClassCounts(counts) => argmax(counts),
            LeafValue::Mean(_) => panic!("vote called on a regression tree"),
        }
    }

    pub fn predict_value(&self, x: &[f64]) -> f64 {
        match self.leaf(x) {
            LeafValue::Mean(m) => *m,
            LeafValue::ClassCounts(_) => panic!("predict_value called on a classification tree"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub seed: u64,
    pub task: Task,
    pub input_dim: usize,
    pub n_classes: usize,
}

/// Forest training hyperparameters; deterministic given `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Minimum samples in each child of a split.
    pub min_leaf: usize,
    /// Train each tree on a bootstrap resample (the usual forest setting);
    /// disable to fit plain CART trees on the full data.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    weighted_impurity: f64,
}

/// Node impurity: gini for classification, variance for regression.
fn impurity(data: &Dataset, indices: &[usize]) -> f64 {
    let n = indices.len() as f64;
    match data.task() {
        Task::Classification => {
            let mut counts = vec![0.0f64; data.n_classes()];
            for &i in indices {
                counts[data.label(i)] += 1.0;
            }
            1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
        }
        Task::Regression => {
            let mean = indices.iter().map(|&i| data.value(i)).sum::<f64>() / n;
            indices
                .iter()
                .map(|&i| {
                    let d = data.value(i) - mean;
                    d * d
                })
                .sum::<f64>()
                / n
        }
    }
}

/// Best split over the given candidate features, minimizing the
/// sample-weighted child impurity. Candidates are midpoints between
/// consecutive distinct values; each child must hold at least `min_leaf`
/// samples. Scanning features in ascending order and thresholds in ascending
/// value, with strict improvement, breaks ties toward the lowest feature
/// index and then the lowest threshold.
fn best_split(
    data: &Dataset,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = indices.len();
    let mut best: Option<SplitChoice> = None;
    let mut sorted: Vec<usize> = Vec::with_capacity(n);

    for &f in features {
        sorted.clear();
        sorted.extend_from_slice(indices);
        sorted.sort_by(|&a, &b| data.row(a)[f].partial_cmp(&data.row(b)[f]).unwrap());

        match data.task() {
            Task::Classification => {
                let k = data.n_classes();
                let mut total = vec![0.0f64; k];
                for &i in &sorted {
                    total[data.label(i)] += 1.0;
                }
                let mut left = vec![0.0f64; k];
                for pos in 1..n {
                    left[data.label(sorted[pos - 1])] += 1.0;
                    let lo = data.row(sorted[pos - 1])[f];
                    let hi = data.row(sorted[pos])[f];
                    if lo == hi || pos < min_leaf || n - pos < min_leaf {
                        continue;
                    }
                    let nl = pos as f64;
                    let nr = (n - pos) as f64;
                    let gini_of = |counts: &[f64], m: f64| {
                        1.0 - counts.iter().map(|c| (c / m) * (c / m)).sum::<f64>()
                    };
                    let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                    let weighted =
                        (nl * gini_of(&left, nl) + nr * gini_of(&right, nr)) / n as f64;
                    if best
                        .as_ref()
                        .map_or(true, |b| weighted < b.weighted_impurity)
                    {
                        best = Some(SplitChoice {
                            feature: f,
                            threshold: (lo + hi) / 2.0,
                            weighted_impurity: weighted,
                        });
                    }
                }
            }
            Task::Regression => {
                let total_sum: f64 = sorted.iter().map(|&i| data.value(i)).sum();
                let total_sq: f64 = sorted.iter().map(|&i| data.value(i) * data.value(i)).sum();
                let mut left_sum = 0.0;
                let mut left_sq = 0.0;
                for pos in 1..n {
                    let v = data.value(sorted[pos - 1]);
                    left_sum += v;
                    left_sq += v * v;
                    let lo = data.row(sorted[pos - 1])[f];
                    let hi = data.row(sorted[pos])[f];
                    if lo == hi || pos < min_leaf || n - pos < min_leaf {
                        continue;
                    }
                    let nl = pos as f64;
                    let nr = (n - pos) as f64;
                    let var_l = left_sq / nl - (left_sum / nl) * (left_sum / nl);
                    let rs = total_sum - left_sum;
                    let rq = total_sq - left_sq;
                    let var_r = rq / nr - (rs / nr) * (rs / nr);
                    let weighted = (nl * var_l + nr * var_r) / n as f64;
                    if best
                        .as_ref()
                        .map_or(true, |b| weighted < b.weighted_impurity)
                    {
                        best = Some(SplitChoice {
                            feature: f,
                            threshold: (lo + hi) / 2.0,
                            weighted_impurity: weighted,
                        });
                    }
                }
            }
        }
    }
    best
}

fn make_leaf(data: &Dataset, indices: &[usize]) -> TreeNode {
    let value = match data.task() {
        Task::Classification => {
            let mut counts = vec![0.0f64; data.n_classes()];
            for &i in indices {
                counts[data.label(i)] += 1.0;
            }
            LeafValue::ClassCounts(counts)
        }
        Task::Regression => {
            let mean = indices.iter().map(|&i| data.value(i)).sum::<f64>() / indices.len() as f64;
            LeafValue::Mean(mean)
        }
    };
    TreeNode::Leaf { value }
}

/// Random subset of `k` feature indices, drawn without replacement.
fn feature_subset(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.gen_range(i..d);
        all.swap(i, j);
    }
    let mut subset = all[..k].to_vec();
    subset.sort_unstable();
    subset
}

fn grow(
    data: &Dataset,
    indices: Vec<usize>,
    depth: usize,
    cfg: &ForestConfig,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let node_impurity = impurity(data, &indices);
    let depth_capped = cfg.max_depth.map_or(false, |m| depth >= m);
    if node_impurity <= 0.0 || depth_capped || indices.len() < 2 * cfg.min_leaf {
        let idx = nodes.len();
        nodes.push(make_leaf(data, &indices));
        return idx;
    }

    let d = data.n_features();
    let k = ((d as f64).sqrt().floor() as usize).max(1);
    let subset = feature_subset(d, k, rng);
    // No usable split in the random subset (all its features constant on this
    // node): fall back to every feature before giving up on the node.
    let all: Vec<usize> = (0..d).collect();
    let choice = best_split(data, &indices, &subset, cfg.min_leaf)
        .or_else(|| best_split(data, &indices, &all, cfg.min_leaf));
    let choice = match choice {
        Some(c) if c.weighted_impurity < node_impurity => c,
        _ => {
            let idx = nodes.len();
            nodes.push(make_leaf(data, &indices));
            return idx;
        }
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| data.row(i)[choice.feature] <= choice.threshold);
    let idx = nodes.len();
    nodes.push(TreeNode::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(data, left_idx, depth + 1, cfg, rng, nodes);
    let right = grow(data, right_idx, depth + 1, cfg, rng, nodes);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[idx]
    {
        *l = left;
        *r = right;
    }
    idx
}

pub fn fit_random_forest(data: &Dataset, cfg: &ForestConfig) -> Result<RandomForest, ModelError> {
    if data.n_rows() == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.n_trees == 0 {
        return Err(ModelError::InvalidConfig("forest needs at least one tree".into()));
    }
    if cfg.min_leaf == 0 {
        return Err(ModelError::InvalidConfig("min leaf size must be >= 1".into()));
    }
    let n = data.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let indices: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        grow(data, indices, 0, cfg, &mut rng, &mut nodes);
        trees.push(Tree { nodes });
    }
    Ok(RandomForest {
        trees,
        seed: cfg.seed,
        task: data.task(),
        input_dim: data.n_features(),
        n_classes: data.n_classes(),
    })
}

/// Forest output: class vote fractions for classification, the mean of tree
/// outputs (as a one-element vector) for regression.
pub fn predict_forest(forest: &RandomForest, x: &[f64]) -> Result<Vec<f64>, ModelError> {
    if x.len() != forest.input_dim {
        return Err(ModelError::DimensionMismatch {
            expected: forest.input_dim,
            got: x.len(),
        });
    }
    match forest.task {
        Task::Classification => {
            let mut votes = vec![0.0f64; forest.n_classes];
            for tree in &forest.trees {
                votes[tree.vote(x)] += 1.0;
            }
            let total = forest.trees.len() as f64;
            for v in votes.iter_mut() {
                *v /= total;
            }
            Ok(votes)
        }
        Task::Regression => {
            let mean = forest
                .trees
                .iter()
                .map(|t| t.predict_value(x))
                .sum::<f64>()
                / forest.trees.len() as f64;
            Ok(vec![mean])
        }
    }
}
