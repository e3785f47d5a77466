//! Occlusion sensitivity: score drop when features are replaced by a baseline.

use super::{score, Attribution, Diagnostics, ExplainError, Method};
use crate::model::Model;

/// What gets occluded per probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Patch {
    /// One feature at a time.
    SingleFeature,
    /// A `height` x `width` window slid (stride 1) over an input laid out as
    /// a `rows` x `cols` grid; each feature gets the mean drop over every
    /// window covering it. Square windows are the common case.
    Window {
        height: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
}

impl Patch {
    pub fn square(size: usize, rows: usize, cols: usize) -> Patch {
        Patch::Window {
            height: size,
            width: size,
            rows,
            cols,
        }
    }
}

/// `value_j = F(x) - F(x with feature j's patch replaced by the baseline)`.
pub fn explain_occlusion(
    model: &Model,
    x: &[f64],
    target: usize,
    baseline: &[f64],
    patch: &Patch,
) -> Result<Attribution, ExplainError> {
    if baseline.len() != x.len() {
        return Err(ExplainError::BaselineMismatch {
            expected: x.len(),
            got: baseline.len(),
        });
    }
    let f_x = score(model, x, target)?;
    let values = match patch {
        Patch::SingleFeature => {
            let mut values = Vec::with_capacity(x.len());
            let mut probe = x.to_vec();
            for j in 0..x.len() {
                let orig = probe[j];
                probe[j] = baseline[j];
                values.push(f_x - score(model, &probe, target)?);
                probe[j] = orig;
            }
            values
        }
        Patch::Window {
            height,
            width,
            rows,
            cols,
        } => {
            let (h, w, rows, cols) = (*height, *width, *rows, *cols);
            if rows * cols != x.len() {
                return Err(ExplainError::InvalidConfig(format!(
                    "{}x{} grid does not match {} features",
                    rows,
                    cols,
                    x.len()
                )));
            }
            if h == 0 || w == 0 || h > rows || w > cols {
                return Err(ExplainError::PatchTooLarge {
                    patch: h.max(w),
                    rows,
                    cols,
                });
            }
            let mut sums = vec![0.0; x.len()];
            let mut counts = vec![0usize; x.len()];
            let mut probe = x.to_vec();
            for top in 0..=(rows - h) {
                for left in 0..=(cols - w) {
                    for r in top..top + h {
                        for c in left..left + w {
                            probe[r * cols + c] = baseline[r * cols + c];
                        }
                    }
                    let drop = f_x - score(model, &probe, target)?;
                    for r in top..top + h {
                        for c in left..left + w {
                            let j = r * cols + c;
                            sums[j] += drop;
                            counts[j] += 1;
                            probe[j] = x[j];
                        }
                    }
                }
            }
            sums.iter()
                .zip(&counts)
                .map(|(&s, &n)| s / n as f64)
                .collect()
        }
    };
    Attribution::checked(Method::Occlusion, target, x, values, Diagnostics::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, LayerSpec, MlpModel, Task};

    fn linear_model(w: &[f64]) -> Model {
        let layer =
            LayerSpec::new(w.len(), 1, w.to_vec(), vec![0.0], Activation::Identity).unwrap();
        Model::Mlp(MlpModel::new(vec![layer], Task::Regression, w.len()).unwrap())
    }

    #[test]
    fn linear_model_per_feature_occlusion_is_w_times_x() {
        let model = linear_model(&[2.0, -1.0, 0.5]);
        let x = [3.0, 1.0, -4.0];
        let a = explain_occlusion(&model, &x, 0, &[0.0; 3], &Patch::SingleFeature).unwrap();
        assert_eq!(a.values, vec![6.0, -1.0, -2.0]);
    }

    #[test]
    fn occluding_with_the_input_itself_changes_nothing() {
        let model = linear_model(&[1.0, 2.0]);
        let x = [0.7, -0.3];
        let a = explain_occlusion(&model, &x, 0, &x, &Patch::SingleFeature).unwrap();
        assert_eq!(a.values, vec![0.0, 0.0]);
    }

    #[test]
    fn one_by_two_window_on_a_square_grid_matches_hand_enumeration() {
        // Grid layout (weights):  [1 2]
        //                         [3 4]
        // A 1x2 window fits at two positions, one per row. Occluding row 0
        // drops w0*x0 + w1*x1 = 3; occluding row 1 drops w2*x2 + w3*x3 = 7.
        // Each pixel is covered by exactly one window.
        let model = linear_model(&[1.0, 2.0, 3.0, 4.0]);
        let x = [1.0; 4];
        let a = explain_occlusion(
            &model,
            &x,
            0,
            &[0.0; 4],
            &Patch::Window {
                height: 1,
                width: 2,
                rows: 2,
                cols: 2,
            },
        )
        .unwrap();
        assert_eq!(a.values, vec![3.0, 3.0, 7.0, 7.0]);
    }

    #[test]
    fn overlapping_windows_average_their_drops() {
        // 2x3 grid, 2x2 windows: the middle column sits in both windows.
        let model = linear_model(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = [1.0; 6];
        let a = explain_occlusion(&model, &x, 0, &[0.0; 6], &Patch::square(2, 2, 3)).unwrap();
        // Left window drop = 1+2+4+5 = 12; right window drop = 2+3+5+6 = 16.
        assert_eq!(a.values[0], 12.0);
        assert_eq!(a.values[3], 12.0);
        assert_eq!(a.values[2], 16.0);
        assert_eq!(a.values[5], 16.0);
        assert_eq!(a.values[1], 14.0);
        assert_eq!(a.values[4], 14.0);
    }

    #[test]
    fn window_size_one_equals_single_feature_mode() {
        let model = linear_model(&[1.0, -2.0, 3.0, 0.5]);
        let x = [0.25, 0.5, 0.75, 1.0];
        let single = explain_occlusion(&model, &x, 0, &[0.0; 4], &Patch::SingleFeature).unwrap();
        let window =
            explain_occlusion(&model, &x, 0, &[0.0; 4], &Patch::square(1, 2, 2)).unwrap();
        assert_eq!(single.values, window.values);
    }

    #[test]
    fn oversized_patch_is_rejected() {
        let model = linear_model(&[1.0, 2.0, 3.0, 4.0]);
        let err = explain_occlusion(&model, &[0.0; 4], 0, &[0.0; 4], &Patch::square(3, 2, 2))
            .unwrap_err();
        assert!(matches!(err, ExplainError::PatchTooLarge { patch: 3, .. }));
    }

    #[test]
    fn grid_shape_must_match_feature_count() {
        let model = linear_model(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            explain_occlusion(&model, &[0.0; 3], 0, &[0.0; 3], &Patch::square(1, 2, 2)),
            Err(ExplainError::InvalidConfig(_))
        ));
    }

    #[test]
    fn occlusion_works_on_forests() {
        let data = crate::data::synth_2d(crate::data::SynthKind::Blobs, 30, 0.1, 2).unwrap();
        let forest = crate::model::fit_random_forest(
            &data,
            &crate::model::ForestConfig {
                n_trees: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let model = Model::Forest(forest);
        let a =
            explain_occlusion(&model, data.row(0), 0, &[0.0; 2], &Patch::SingleFeature).unwrap();
        assert_eq!(a.values.len(), 2);
        assert!(a.values.iter().all(|v| v.is_finite()));
    }
}
