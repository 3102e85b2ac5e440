//! Finite-difference gradient checker shared by the gradient and
//! acceptance tests.
//!
//! The reference forward pass below is written with plain loops and
//! reports the ReLU activation pattern, so probes whose ±h perturbation
//! crosses a kink (where no derivative exists) are skipped rather than
//! miscounted.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rotorfall::env::{ACTION_DIM, OBS_DIM};
use rotorfall::nn::{GaussianHead, Matrix, MlpParams, SQUASH_EPS};

const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn naive_forward(sizes: &[usize], params: &[f64], input: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let mut x = input.to_vec();
    let mut pattern = Vec::new();
    let mut off = 0;
    for l in 0..sizes.len() - 1 {
        let (ni, no) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + ni * no];
        let b = &params[off + ni * no..off + ni * no + no];
        off += ni * no + no;
        let mut y: Vec<f64> = (0..no).map(|j| b[j] + (0..ni).map(|i| x[i] * w[i * no + j]).sum::<f64>()).collect();
        if l + 2 < sizes.len() {
            for v in &mut y {
                pattern.push(*v > 0.0);
                *v = v.max(0.0);
            }
        }
        x = y;
    }
    (x, pattern)
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Central difference of `f` along one coordinate of `base`, or `None` if
/// the probe changes the activation pattern.
fn central<F>(base: &[f64], k: usize, f: F) -> Option<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<bool>),
{
    let mut p = base.to_vec();
    let (_, pat0) = f(&p);
    p[k] = base[k] + H;
    let (fp, pat_p) = f(&p);
    p[k] = base[k] - H;
    let (fm, pat_m) = f(&p);
    (pat0 == pat_p && pat0 == pat_m).then(|| (fp - fm) / (2.0 * H))
}

#[derive(Default)]
pub struct Report {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

pub fn check_critic(width: usize, rng: &mut ChaCha8Rng, report: &mut Report) {
    let sizes = [OBS_DIM + ACTION_DIM, width, width, width, 1];
    let net = MlpParams::new(&sizes, rng).unwrap();
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
    let upstream: f64 = rng.random_range(-2.0..2.0);
    let tape = net.forward_batch(&Matrix::from_vec(1, x.len(), x.clone())).unwrap();
    let (grads, dx) = net.backward(&tape, &Matrix::from_vec(1, 1, vec![upstream])).unwrap();

    let by_params = |p: &[f64]| {
        let (y, pat) = naive_forward(&sizes, p, &x);
        (upstream * y[0], pat)
    };
    for _ in 0..40 {
        let k = rng.random_range(0..net.num_params());
        match central(net.params(), k, by_params) {
            Some(n) => {
                report.worst = report.worst.max(rel_err(grads[k], n));
                report.checked += 1;
            }
            None => report.skipped += 1,
        }
    }
    let by_input = |xi: &[f64]| {
        let (y, pat) = naive_forward(&sizes, net.params(), xi);
        (upstream * y[0], pat)
    };
    for k in 0..x.len() {
        match central(&x, k, by_input) {
            Some(n) => {
                report.worst = report.worst.max(rel_err(dx.get(0, k), n));
                report.checked += 1;
            }
            None => report.skipped += 1,
        }
    }
}

/// Independent evaluation of `Σ c·tanh(u) + α·log π` for the squashed head.
fn head_objective(raw: &[f64], noise: &[f64], c: &[f64], alpha: f64) -> f64 {
    let a_dim = noise.len();
    let mut total = 0.0;
    for j in 0..a_dim {
        let ls = raw[a_dim + j].clamp(-20.0, 2.0);
        let sigma = ls.exp();
        let u = raw[j] + sigma * noise[j];
        let a = u.tanh();
        let density = (-(u - raw[j]).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        total += c[j] * a + alpha * (density.ln() - (1.0 - a * a + SQUASH_EPS).ln());
    }
    total
}

pub fn check_actor(width: usize, rng: &mut ChaCha8Rng, report: &mut Report) {
    let head = GaussianHead::new(ACTION_DIM);
    let sizes = [OBS_DIM, width, width, head.input_dim()];
    let net = MlpParams::new(&sizes, rng).unwrap();
    let x: Vec<f64> = (0..OBS_DIM).map(|_| rng.random_range(-1.5..1.5)).collect();
    let noise: Vec<f64> = (0..ACTION_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: Vec<f64> = (0..ACTION_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
    let alpha = rng.random_range(0.05..1.0);

    let tape = net.forward_batch(&Matrix::from_vec(1, OBS_DIM, x.clone())).unwrap();
    let sample = head.sample_batch(tape.output(), &Matrix::from_vec(1, ACTION_DIM, noise.clone()));
    let d_raw = head.backward(&sample, &Matrix::from_vec(1, ACTION_DIM, c.clone()), &[alpha]);
    let (grads, dx) = net.backward(&tape, &d_raw).unwrap();

    let by_params = |p: &[f64]| {
        let (raw, pat) = naive_forward(&sizes, p, &x);
        (head_objective(&raw, &noise, &c, alpha), pat)
    };
    for _ in 0..40 {
        let k = rng.random_range(0..net.num_params());
        match central(net.params(), k, by_params) {
            Some(n) => {
                report.worst = report.worst.max(rel_err(grads[k], n));
                report.checked += 1;
            }
            None => report.skipped += 1,
        }
    }
    let by_input = |xi: &[f64]| {
        let (raw, pat) = naive_forward(&sizes, net.params(), xi);
        (head_objective(&raw, &noise, &c, alpha), pat)
    };
    for k in 0..OBS_DIM {
        match central(&x, k, by_input) {
            Some(n) => {
                report.worst = report.worst.max(rel_err(dx.get(0, k), n));
                report.checked += 1;
            }
            None => report.skipped += 1,
        }
    }
}
