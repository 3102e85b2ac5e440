//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The actor network emits `2·A` values per sample: the first `A` are
//! means, the last `A` are log standard deviations. Sampling uses the
//! reparameterization `u = μ + σ·ε` with externally supplied noise `ε`, so
//! every operation here is a deterministic function of its inputs.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Guards `log(1 − tanh²u)` when the squashed action saturates.
pub const SQUASH_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianHead {
    pub action_dim: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// Batched sample with everything the backward pass needs.
#[derive(Clone, Debug)]
pub struct SquashedSample {
    pub actions: Matrix,
    pub log_prob: Vec<f64>,
    noise: Matrix,
    std: Matrix,
    /// Whether the raw log-std was inside the clamp range.
    log_std_free: Vec<bool>,
}

impl GaussianHead {
    pub fn new(action_dim: usize) -> Self {
        Self {
            action_dim,
            log_std_min: -20.0,
            log_std_max: 2.0,
        }
    }

    /// Number of raw network outputs the head consumes.
    pub fn input_dim(&self) -> usize {
        2 * self.action_dim
    }

    /// Deterministic action `tanh(μ)`.
    pub fn mode(&self, raw: &[f64]) -> Vec<f64> {
        raw[..self.action_dim].iter().map(|m| m.tanh()).collect()
    }

    /// Single-sample squashed draw: returns the action and its log density.
    pub fn sample_squashed(&self, raw: &[f64], noise: &[f64]) -> (Vec<f64>, f64) {
        let s = self.sample_batch(
            &Matrix::from_vec(1, raw.len(), raw.to_vec()),
            &Matrix::from_vec(1, noise.len(), noise.to_vec()),
        );
        (s.actions.row(0).to_vec(), s.log_prob[0])
    }

    pub fn sample_batch(&self, raw: &Matrix, noise: &Matrix) -> SquashedSample {
        let a_dim = self.action_dim;
        assert_eq!(raw.cols(), 2 * a_dim, "raw head width");
        assert_eq!(noise.cols(), a_dim, "noise width");
        assert_eq!(raw.rows(), noise.rows(), "batch mismatch");
        let batch = raw.rows();
        let mut actions = Matrix::zeros(batch, a_dim);
        let mut std = Matrix::zeros(batch, a_dim);
        let mut log_prob = vec![0.0; batch];
        let mut log_std_free = vec![false; batch * a_dim];
        for r in 0..batch {
            let row = raw.row(r);
            let mut lp = 0.0;
            for j in 0..a_dim {
                let mean = row[j];
                let raw_ls = row[a_dim + j];
                let ls = raw_ls.clamp(self.log_std_min, self.log_std_max);
                log_std_free[r * a_dim + j] = raw_ls > self.log_std_min && raw_ls < self.log_std_max;
                let sigma = ls.exp();
                let eps = noise.get(r, j);
                let a = (mean + sigma * eps).tanh();
                lp += -0.5 * eps * eps - ls - LOG_SQRT_2PI - (1.0 - a * a + SQUASH_EPS).ln();
                actions.set(r, j, a);
                std.set(r, j, sigma);
            }
            log_prob[r] = lp;
        }
        SquashedSample {
            actions,
            log_prob,
            noise: noise.clone(),
            std,
            log_std_free,
        }
    }

    /// Chains dL/d(action) and dL/d(log_prob) back to dL/d(raw outputs).
    pub fn backward(&self, sample: &SquashedSample, d_action: &Matrix, d_log_prob: &[f64]) -> Matrix {
        let a_dim = self.action_dim;
        let batch = sample.actions.rows();
        assert_eq!(d_action.rows(), batch);
        assert_eq!(d_log_prob.len(), batch);
        let mut d_raw = Matrix::zeros(batch, 2 * a_dim);
        for (r, &dlp) in d_log_prob.iter().enumerate() {
            for j in 0..a_dim {
                let a = sample.actions.get(r, j);
                let one_m_a2 = 1.0 - a * a;
                // d log_prob / du via the squash correction term
                let dlp_du = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS);
                let d_u = d_action.get(r, j) * one_m_a2 + dlp * dlp_du;
                let sigma_eps = sample.std.get(r, j) * sample.noise.get(r, j);
                d_raw.set(r, j, d_u);
                if sample.log_std_free[r * a_dim + j] {
                    d_raw.set(r, a_dim + j, d_u * sigma_eps - dlp);
                }
            }
        }
        d_raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_sample_has_standard_normal_density() {
        let head = GaussianHead::new(4);
        let (a, lp) = head.sample_squashed(&[0.0; 8], &[0.0; 4]);
        assert_eq!(a, vec![0.0; 4]);
        // 4·log(1/√(2π)) minus the (vanishing) squash correction log(1 + 1e-6)
        let expected = 4.0 * (1.0 / (2.0 * std::f64::consts::PI).sqrt()).ln() - 4.0 * (1.0 + SQUASH_EPS).ln();
        assert!((lp - expected).abs() < 1e-12);
        assert!((lp + 3.6758).abs() < 1e-4);
    }

    #[test]
    fn zero_noise_gives_tanh_of_mean() {
        let head = GaussianHead::new(2);
        let (a, _) = head.sample_squashed(&[0.4, -1.3, 0.2, -0.7], &[0.0, 0.0]);
        assert_eq!(a, vec![0.4f64.tanh(), (-1.3f64).tanh()]);
        assert_eq!(head.mode(&[0.4, -1.3, 0.2, -0.7]), a);
    }

    #[test]
    fn log_std_is_clamped() {
        let head = GaussianHead::new(1);
        let (_, lp_hi) = head.sample_squashed(&[0.0, 50.0], &[0.0]);
        let (_, lp_cap) = head.sample_squashed(&[0.0, 2.0], &[0.0]);
        assert_eq!(lp_hi, lp_cap);
        let s = head.sample_batch(&Matrix::from_vec(1, 2, vec![0.0, 50.0]), &Matrix::from_vec(1, 1, vec![0.3]));
        let d = head.backward(&s, &Matrix::from_vec(1, 1, vec![1.0]), &[1.0]);
        assert_eq!(d.get(0, 1), 0.0);
    }
}
