//! Fully connected ReLU network with a flat parameter vector.
//!
//! Parameters of layer `l` are stored contiguously as the `in × out`
//! row-major weight block followed by the `out` bias entries. Keeping
//! everything in one `Vec<f64>` lets the optimizer, target averaging and
//! checkpointing treat a network as a plain slice.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix};
use super::NnError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations cached by [`MlpParams::forward_batch`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// `inputs[l]` is the input of layer `l`; the final entry is the output.
    inputs: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        self.inputs.last().expect("tape always holds the network input")
    }

    pub fn input(&self) -> &Matrix {
        &self.inputs[0]
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(layer_sizes)?;
        for l in 0..net.num_layers() {
            let bound = 1.0 / (net.layer_sizes[l] as f64).sqrt();
            let range = net.layer_range(l);
            for p in &mut net.params[range] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NnError::BadArchitecture(layer_sizes.to_vec()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; param_count(layer_sizes)],
        })
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_flat(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let net = Self::zeros(layer_sizes)?;
        if params.len() != net.params.len() {
            return Err(NnError::Dimension {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(NnError::NonFinite);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start = param_count(&self.layer_sizes[..=layer]);
        let (i, o) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
        start..start + i * o + o
    }

    /// Weight block (`in × out`, row-major) and bias of a layer.
    pub fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let range = self.layer_range(layer);
        let o = self.layer_sizes[layer + 1];
        self.params[range].split_at(self.layer_sizes[layer] * o)
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let range = self.layer_range(layer);
        let o = self.layer_sizes[layer + 1];
        let split = self.layer_sizes[layer] * o;
        self.params[range].split_at_mut(split)
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let x = Matrix::from_vec(1, input.len(), input.to_vec());
        Ok(self.forward_batch(&x)?.output().as_slice().to_vec())
    }

    /// Batched forward pass; rows are samples.
    pub fn forward_batch(&self, input: &Matrix) -> Result<Tape, NnError> {
        if input.cols() != self.input_dim() {
            return Err(NnError::Dimension {
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        let batch = input.rows();
        let mut inputs = Vec::with_capacity(self.layer_sizes.len());
        inputs.push(input.clone());
        for l in 0..self.num_layers() {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w, b) = self.layer(l);
            let mut y = Matrix::zeros(batch, o);
            for r in 0..batch {
                y.row_mut(r).copy_from_slice(b);
            }
            let x = inputs.last().unwrap();
            gemm(batch, i, o, x.as_slice(), (i, 1), w, (o, 1), 1.0, y.as_mut_slice());
            if l + 1 < self.num_layers() {
                for v in y.as_mut_slice() {
                    *v = v.max(0.0);
                }
            }
            inputs.push(y);
        }
        Ok(Tape { inputs })
    }

    /// Reverse-mode pass. `upstream` is dL/d(output) per sample.
    ///
    /// Returns the flat parameter gradient (summed over the batch) and
    /// dL/d(input).
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<(Vec<f64>, Matrix), NnError> {
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backprop(tape, upstream, Some(&mut grads))?;
        Ok((grads, dx))
    }

    /// Like [`backward`](Self::backward) but only propagates to the input.
    pub fn backward_input(&self, tape: &Tape, upstream: &Matrix) -> Result<Matrix, NnError> {
        self.backprop(tape, upstream, None)
    }

    fn backprop(
        &self,
        tape: &Tape,
        upstream: &Matrix,
        mut grads: Option<&mut Vec<f64>>,
    ) -> Result<Matrix, NnError> {
        let batch = tape.input().rows();
        if upstream.cols() != self.output_dim() || upstream.rows() != batch {
            return Err(NnError::Dimension {
                expected: batch * self.output_dim(),
                got: upstream.rows() * upstream.cols(),
            });
        }
        let mut delta = upstream.clone();
        for l in (0..self.num_layers()).rev() {
            let (i, o) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let x = &tape.inputs[l];
            if let Some(g) = grads.as_deref_mut() {
                let range = self.layer_range(l);
                let (gw, gb) = g[range].split_at_mut(i * o);
                // dW = xᵀ·δ
                gemm(i, batch, o, x.as_slice(), (1, i), delta.as_slice(), (o, 1), 0.0, gw);
                for r in 0..batch {
                    for (acc, d) in gb.iter_mut().zip(delta.row(r)) {
                        *acc += d;
                    }
                }
            }
            let (w, _) = self.layer(l);
            let mut dx = Matrix::zeros(batch, i);
            // dx = δ·Wᵀ
            gemm(batch, o, i, delta.as_slice(), (o, 1), w, (1, o), 0.0, dx.as_mut_slice());
            if l > 0 {
                // x is the ReLU output of the previous layer: x > 0 ⇔ pre-activation > 0.
                for (d, &xv) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    if xv <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// `self ← rho·source + (1 − rho)·self`, elementwise.
    pub fn polyak_from(&mut self, source: &MlpParams, rho: f64) {
        assert_eq!(self.layer_sizes, source.layer_sizes, "polyak shape mismatch");
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = rho * s + (1.0 - rho) * *t;
        }
    }
}
