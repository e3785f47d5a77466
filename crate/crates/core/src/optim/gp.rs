//! Minimal Gaussian process surrogate for the box optimizer.
//!
//! Squared-exponential kernel with fixed hyperparameters; the Cholesky factor
//! grows one row per observation, so refitting after each probe costs O(n^2)
//! instead of O(n^3). Targets are standardized by the caller, which keeps the
//! unit signal variance honest.

/// Lower-triangular Cholesky factor stored as ragged rows.
pub(crate) struct Surrogate {
    points: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
    length_scale: f64,
    jitter: f64,
}

impl Surrogate {
    pub fn new(length_scale: f64, jitter: f64) -> Self {
        assert!(length_scale > 0.0 && jitter >= 0.0);
        Surrogate {
            points: Vec::new(),
            chol: Vec::new(),
            length_scale,
            jitter,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            sq += d * d;
        }
        (-sq / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Appends one observation, extending the Cholesky factor by a row.
    pub fn push(&mut self, x: Vec<f64>) {
        let n = self.points.len();
        let mut row = vec![0.0; n + 1];
        for j in 0..n {
            let mut v = self.kernel(&x, &self.points[j]);
            for t in 0..j {
                v -= row[t] * self.chol[j][t];
            }
            row[j] = v / self.chol[j][j];
        }
        let diag = self.kernel(&x, &x) + self.jitter - row[..n].iter().map(|v| v * v).sum::<f64>();
        // The jitter keeps this positive for distinct points; duplicated
        // probes can still drive it to ~0, so clamp defensively.
        row[n] = diag.max(self.jitter.max(1e-12)).sqrt();
        self.points.push(x);
        self.chol.push(row);
    }

    /// Solves L w = rhs.
    fn forward_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut v = rhs[i];
            for j in 0..i {
                v -= self.chol[i][j] * w[j];
            }
            w[i] = v / self.chol[i][i];
        }
        w
    }

    /// Solves L^T a = w.
    fn backward_solve(&self, w: &[f64]) -> Vec<f64> {
        let n = w.len();
        let mut a = vec![0.0; n];
        for i in (0..n).rev() {
            let mut v = w[i];
            for j in i + 1..n {
                v -= self.chol[j][i] * a[j];
            }
            a[i] = v / self.chol[i][i];
        }
        a
    }

    /// Weights alpha = K^{-1} y for the current observations.
    pub fn fit_targets(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.len());
        let w = self.forward_solve(y);
        self.backward_solve(&w)
    }

    /// Posterior mean and variance at `x` given precomputed alpha.
    pub fn posterior(&self, x: &[f64], alpha: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self.points.iter().map(|p| self.kernel(x, p)).collect();
        let mean: f64 = k.iter().zip(alpha).map(|(a, b)| a * b).sum();
        let v = self.forward_solve(&k);
        let var = self.kernel(x, x) + self.jitter - v.iter().map(|t| t * t).sum::<f64>();
        (mean, var.max(0.0))
    }
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 polynomial
/// (absolute error < 1.5e-7, plenty for an acquisition function).
pub(crate) fn normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-x * x).exp();
    let erf = if x < 0.0 { -erf } else { erf };
    0.5 * (1.0 + erf)
}

pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement of mean/variance over the incumbent.
pub(crate) fn expected_improvement(mean: f64, var: f64, best: f64) -> f64 {
    let sigma = var.sqrt();
    let gap = mean - best;
    if sigma < 1e-12 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    gap * normal_cdf(z) + sigma * normal_pdf(z)
}
