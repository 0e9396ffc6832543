//! Feed-forward softmax classifier over flat parameter vectors.
//!
//! The network is `input -> (affine -> tanh)* -> affine -> log_softmax`.
//! All parameters live in one contiguous `Vec<f64>` so that particles can be
//! added, averaged and compared coordinate by coordinate.
//!
//! Parameter layout is layer-major. For each affine layer with `fan_in`
//! inputs and `fan_out` outputs the block is
//!
//! ```text
//! [ W[0][0] .. W[0][fan_in-1], W[1][0] .. W[fan_out-1][fan_in-1], b[0] .. b[fan_out-1] ]
//! ```
//!
//! i.e. a row-major `fan_out x fan_in` weight matrix followed by the bias.
//! Layers appear in input-to-output order.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Architecture of the classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    num_classes: usize,
}

/// One affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Index of `W[0][0]` in the flat vector.
    pub offset: usize,
}

impl LayerSpan {
    pub fn weights_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weights_len()
    }

    pub fn len(&self) -> usize {
        self.weights_len() + self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NetShape {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::input("input_dim must be positive"));
        }
        if hidden_dims.contains(&0) {
            return Err(Error::input("hidden layer widths must be positive"));
        }
        if num_classes < 2 {
            return Err(Error::input("a classifier needs at least 2 classes"));
        }
        Ok(Self {
            input_dim,
            hidden_dims,
            num_classes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.hidden_dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Affine layers in input-to-output order.
    pub fn layers(&self) -> Vec<LayerSpan> {
        let mut spans = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        let mut offset = 0;
        for &fan_out in self
            .hidden_dims
            .iter()
            .chain(core::iter::once(&self.num_classes))
        {
            let span = LayerSpan {
                fan_in,
                fan_out,
                offset,
            };
            offset += span.len();
            fan_in = fan_out;
            spans.push(span);
        }
        spans
    }

    /// Total parameter count `P`.
    pub fn num_params(&self) -> usize {
        self.layers().iter().map(LayerSpan::len).sum()
    }
}

/// Flat parameter vector of one network (one particle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Wraps `values`, checking the length against `shape` and that every
    /// entry is finite.
    pub fn from_vec(shape: &NetShape, values: Vec<f64>) -> Result<Self> {
        check_dim("parameter vector", shape.num_params(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(alloc::format!("parameter {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(shape: &NetShape) -> Self {
        Self(vec![0.0; shape.num_params()])
    }

    /// Per-layer uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// for both weights and biases.
    pub fn random<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(shape.num_params());
        for layer in shape.layers() {
            let bound = 1.0 / libm::sqrt(layer.fan_in as f64);
            for _ in 0..layer.len() {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Mutable access for optimizers and finite-difference probes. Callers
    /// are responsible for keeping entries finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input, `activations[l]` the output of hidden
    /// layer `l` (after tanh).
    activations: Vec<Vec<f64>>,
    logprobs: Vec<f64>,
}

impl Trace {
    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn into_logprobs(self) -> Vec<f64> {
        self.logprobs
    }
}

fn affine(params: &[f64], layer: &LayerSpan, input: &[f64]) -> Vec<f64> {
    let weights = &params[layer.offset..layer.bias_offset()];
    let bias = &params[layer.bias_offset()..layer.offset + layer.len()];
    weights
        .chunks_exact(layer.fan_in)
        .zip(bias)
        .map(|(row, b)| b + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>())
        .collect()
}

/// Numerically stable `log_softmax`, in place.
pub fn log_softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| libm::exp(z - max)).sum();
    let lse = max + libm::log(sum);
    for z in logits.iter_mut() {
        *z -= lse;
    }
}

fn check_inputs(shape: &NetShape, params: &ParamVector, x: &[f64]) -> Result<()> {
    check_dim("parameter vector", shape.num_params(), params.len())?;
    check_dim("feature vector", shape.input_dim, x.len())
}

/// Forward pass keeping every activation.
pub fn forward_trace(shape: &NetShape, params: &ParamVector, x: &[f64]) -> Result<Trace> {
    check_inputs(shape, params, x)?;
    Ok(forward_unchecked(shape, params.as_slice(), x))
}

pub(crate) fn forward_unchecked(shape: &NetShape, params: &[f64], x: &[f64]) -> Trace {
    let layers = shape.layers();
    let (output, hidden) = layers.split_last().expect("at least one layer");
    let mut activations = Vec::with_capacity(layers.len());
    activations.push(x.to_vec());
    for layer in hidden {
        let mut z = affine(params, layer, activations.last().unwrap());
        for v in z.iter_mut() {
            *v = libm::tanh(*v);
        }
        activations.push(z);
    }
    let mut logprobs = affine(params, output, activations.last().unwrap());
    log_softmax(&mut logprobs);
    Trace {
        activations,
        logprobs,
    }
}

/// Log-probabilities `log p(y | x, params)` for every class.
pub fn forward_logprobs(shape: &NetShape, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    forward_trace(shape, params, x).map(Trace::into_logprobs)
}

/// Gradient of `cotangent . forward_logprobs(x)` with respect to the
/// parameters.
pub fn backward(
    shape: &NetShape,
    params: &ParamVector,
    x: &[f64],
    cotangent: &[f64],
) -> Result<ParamVector> {
    check_inputs(shape, params, x)?;
    check_dim("cotangent", shape.num_classes, cotangent.len())?;
    let trace = forward_unchecked(shape, params.as_slice(), x);
    let mut grad = vec![0.0; params.len()];
    backward_accumulate(shape, params.as_slice(), &trace, cotangent, &mut grad);
    Ok(ParamVector(grad))
}

/// Adds the gradient of `cotangent . logprobs` to `grad`. Inputs are assumed
/// to be dimension-checked.
pub(crate) fn backward_accumulate(
    shape: &NetShape,
    params: &[f64],
    trace: &Trace,
    cotangent: &[f64],
    grad: &mut [f64],
) {
    // d/dz of sum_k g_k (z_k - lse(z)) = g - softmax(z) * sum(g)
    let total: f64 = cotangent.iter().sum();
    let mut delta: Vec<f64> = cotangent
        .iter()
        .zip(&trace.logprobs)
        .map(|(g, lp)| g - libm::exp(*lp) * total)
        .collect();

    let layers = shape.layers();
    for (l, layer) in layers.iter().enumerate().rev() {
        let input = &trace.activations[l];
        let (wgrad, bgrad) =
            grad[layer.offset..layer.offset + layer.len()].split_at_mut(layer.weights_len());
        for ((row, d), b) in wgrad.chunks_exact_mut(layer.fan_in).zip(&delta).zip(bgrad) {
            *b += d;
            for (g, a) in row.iter_mut().zip(input) {
                *g += d * a;
            }
        }
        if l == 0 {
            break;
        }
        let weights = &params[layer.offset..layer.bias_offset()];
        let mut prev = vec![0.0; layer.fan_in];
        for (row, d) in weights.chunks_exact(layer.fan_in).zip(&delta) {
            for (p, w) in prev.iter_mut().zip(row) {
                *p += w * d;
            }
        }
        for (p, a) in prev.iter_mut().zip(input) {
            *p *= 1.0 - a * a;
        }
        delta = prev;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn shape_283() -> NetShape {
        NetShape::new(2, vec![8], 3).unwrap()
    }

    #[test]
    fn param_count_and_layout() {
        let s = shape_283();
        assert_eq!(s.num_params(), 2 * 8 + 8 + 8 * 3 + 3);
        let layers = s.layers();
        assert_eq!(layers[1].offset, 24);
        assert_eq!(layers[1].bias_offset(), 48);
        let deep = NetShape::new(4, vec![5, 6], 2).unwrap();
        assert_eq!(deep.num_params(), (4 * 5 + 5) + (5 * 6 + 6) + (6 * 2 + 2));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NetShape::new(0, vec![], 2).is_err());
        assert!(NetShape::new(2, vec![0], 2).is_err());
        assert!(NetShape::new(2, vec![], 1).is_err());
    }

    #[test]
    fn zero_network_is_uniform() {
        let s = NetShape::new(3, vec![4], 5).unwrap();
        let lp = forward_logprobs(&s, &ParamVector::zeros(&s), &[0.3, -1.0, 2.0]).unwrap();
        for v in lp {
            assert!((v - libm::log(1.0 / 5.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_class_zero_logits() {
        let mut z = [0.0, 0.0];
        log_softmax(&mut z);
        assert_eq!(z, [libm::log(0.5), libm::log(0.5)]);
    }

    #[test]
    fn log_softmax_handles_large_logits() {
        let mut z = [1000.0, 999.0, -1000.0];
        log_softmax(&mut z);
        let sum: f64 = z.iter().map(|v| libm::exp(*v)).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_errors() {
        let s = shape_283();
        let p = ParamVector::zeros(&s);
        assert!(matches!(
            forward_logprobs(&s, &p, &[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(backward(&s, &p, &[1.0, 2.0], &[1.0]).is_err());
        assert!(ParamVector::from_vec(&s, vec![0.0; 3]).is_err());
        let mut bad = vec![0.0; s.num_params()];
        bad[4] = f64::NAN;
        assert!(ParamVector::from_vec(&s, bad).is_err());
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let s = shape_283();
        let p = ParamVector::random(&s, &mut rng::stream(0, 0, 0));
        let g = backward(&s, &p, &[0.4, -0.2], &[0.0; 3]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let s = NetShape::new(16, vec![4], 3).unwrap();
        let p = ParamVector::random(&s, &mut rng::stream(1, 0, 0));
        for layer in s.layers() {
            let bound = 1.0 / libm::sqrt(layer.fan_in as f64);
            let block = &p.as_slice()[layer.offset..layer.offset + layer.len()];
            assert!(block.iter().all(|v| v.abs() <= bound));
        }
    }
}
