//! Fully connected feedforward networks with explicit forward traces.
//!
//! A layer maps a batch `X` (rows are points) to `act(X W + b)` with `W`
//! stored as `in_dim x out_dim`. Under this convention the Jacobian of a
//! single linear layer, laid out as `in_dim x out_dim`, is `W` itself.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::activation::Activation;
use crate::nn::random;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            in_dim,
            out_dim,
            activation,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config(format!(
                "layer {index} has a zero dimension ({} -> {})",
                self.in_dim, self.out_dim
            )));
        }
        self.activation.validate()
    }
}

/// Check that a list of specs is nonempty, well formed and dimensionally chained.
pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("network needs at least one layer".into()));
    }
    for (k, spec) in specs.iter().enumerate() {
        spec.validate(k)?;
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Config(format!(
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                k + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

/// Hidden layers of `width` with `hidden` activation, then `out_act` on the last.
pub fn mlp_specs(
    in_dim: usize,
    widths: &[usize],
    out_dim: usize,
    hidden: Activation,
    out_act: Activation,
) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(widths.len() + 1);
    let mut prev = in_dim;
    for &w in widths {
        specs.push(LayerSpec::new(prev, w, hidden));
        prev = w;
    }
    specs.push(LayerSpec::new(prev, out_dim, out_act));
    specs
}

#[derive(Clone, Debug)]
pub struct Layer {
    spec: LayerSpec,
    weights: Matrix,
    biases: Vec<f64>,
}

impl Layer {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

#[derive(Clone, Debug)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
    /// Changes whenever parameters may have changed; traces record it.
    generation: u64,
}

/// Bitwise parameter equality; the trace generation is ignored.
impl PartialEq for MlpNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.spec == b.spec
                    && a.weights.shape() == b.weights.shape()
                    && bits_eq(a.weights.as_slice(), b.weights.as_slice())
                    && bits_eq(&a.biases, &b.biases)
            })
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    generation: u64,
    /// Input to each layer; `inputs[0]` is the batch.
    inputs: Vec<Matrix>,
    pre_activations: Vec<Matrix>,
}

impl Trace {
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }

    /// Post-activation of layer `k` (the input of layer `k + 1`).
    pub fn layer_input(&self, k: usize) -> &Matrix {
        &self.inputs[k]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.spec.in_dim, l.spec.out_dim),
                    biases: vec![0.0; l.spec.out_dim],
                })
                .collect(),
        }
    }

    /// Index of the first layer holding a non-finite gradient.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|g| !g.weights.is_finite() || g.biases.iter().any(|v| !v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend_from_slice(g.weights.as_slice());
            out.extend_from_slice(&g.biases);
        }
        out
    }
}

impl MlpNetwork {
    /// Random initialisation: zero-mean Gaussian weights with standard deviation
    /// `sqrt(2 / in_dim)` for rectifier layers and `sqrt(1 / in_dim)` otherwise,
    /// zero biases.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = random::rng(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let gain = if spec.activation.is_rectifier() {
                    2.0
                } else {
                    1.0
                };
                let std = (gain / spec.in_dim as f64).sqrt();
                Layer {
                    spec,
                    weights: random::gaussian_fill(&mut rng, spec.in_dim, spec.out_dim, 0.0, std),
                    biases: vec![0.0; spec.out_dim],
                }
            })
            .collect();
        Ok(MlpNetwork {
            layers,
            generation: next_generation(),
        })
    }

    /// Assemble from explicit parameters.
    pub fn from_parameters(specs: &[LayerSpec], params: Vec<(Matrix, Vec<f64>)>) -> Result<Self> {
        validate_specs(specs)?;
        if params.len() != specs.len() {
            return Err(Error::Config(format!(
                "{} layer specs but {} parameter sets",
                specs.len(),
                params.len()
            )));
        }
        let mut layers = Vec::with_capacity(specs.len());
        for (k, (&spec, (weights, biases))) in specs.iter().zip(params).enumerate() {
            if weights.shape() != (spec.in_dim, spec.out_dim) || biases.len() != spec.out_dim {
                return Err(Error::Shape(format!(
                    "layer {k}: expected {}x{} weights and {} biases, got {}x{} and {}",
                    spec.in_dim,
                    spec.out_dim,
                    spec.out_dim,
                    weights.rows(),
                    weights.cols(),
                    biases.len()
                )));
            }
            layers.push(Layer {
                spec,
                weights,
                biases,
            });
        }
        Ok(MlpNetwork {
            layers,
            generation: next_generation(),
        })
    }

    /// Single identity-activation layer `x ↦ x W + b`.
    pub fn linear(weights: Matrix, biases: Vec<f64>) -> Result<Self> {
        let spec = LayerSpec::new(weights.rows(), weights.cols(), Activation::Identity);
        MlpNetwork::from_parameters(&[spec], vec![(weights, biases)])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spec.in_dim * l.spec.out_dim + l.spec.out_dim)
            .sum()
    }

    /// Mutable access to every layer's `(weights, biases)`. Invalidates traces.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = (&mut [f64], &mut [f64])> {
        self.generation = next_generation();
        self.layers
            .iter_mut()
            .map(|l| (l.weights.as_mut_slice(), l.biases.as_mut_slice()))
    }

    pub fn flatten_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.biases);
        }
        out
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "network expects {} input columns, batch has {}",
                self.in_dim(),
                batch.cols()
            )));
        }
        Ok(())
    }

    fn affine(layer: &Layer, input: &Matrix) -> Result<Matrix> {
        let mut pre = input.matmul(&layer.weights)?;
        pre.add_row_broadcast(&layer.biases)?;
        Ok(pre)
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            let act = layer.spec.activation;
            x = Self::affine(layer, &x)?.map(|v| act.apply(v));
        }
        Ok(x)
    }

    /// Forward pass recording what the backward pass needs.
    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Trace)> {
        self.check_input(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let act = layer.spec.activation;
            let pre = Self::affine(layer, &x)?;
            let post = pre.map(|v| act.apply(v));
            inputs.push(x);
            pre_activations.push(pre);
            x = post;
        }
        Ok((
            x,
            Trace {
                generation: self.generation,
                inputs,
                pre_activations,
            },
        ))
    }

    fn check_trace(&self, trace: &Trace, output_grad: &Matrix) -> Result<()> {
        if trace.generation != self.generation {
            return Err(Error::Contract(
                "trace was produced before the network's parameters changed".into(),
            ));
        }
        let batch = trace.inputs[0].rows();
        if output_grad.shape() != (batch, self.out_dim()) {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                batch,
                self.out_dim()
            )));
        }
        Ok(())
    }

    /// Gradients of a scalar loss with respect to all parameters and the input
    /// batch, given `output_grad = ∂loss/∂output`.
    pub fn backward(&self, trace: &Trace, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        self.check_trace(trace, output_grad)?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.spec.activation;
            let delta =
                upstream.zip_map(&trace.pre_activations[k], |g, z| g * act.derivative(z))?;
            let weights = trace.inputs[k].t_matmul(&delta)?;
            let biases = delta.column_sums();
            upstream = delta.matmul_t(&layer.weights)?;
            grads.push(LayerGrads { weights, biases });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Input gradient only; skips the parameter-gradient products.
    pub fn backward_input(&self, trace: &Trace, output_grad: &Matrix) -> Result<Matrix> {
        self.check_trace(trace, output_grad)?;
        let mut upstream = output_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.spec.activation;
            let delta =
                upstream.zip_map(&trace.pre_activations[k], |g, z| g * act.derivative(z))?;
            upstream = delta.matmul_t(&layer.weights)?;
        }
        Ok(upstream)
    }
}

/// Free-function form of [`MlpNetwork::init`].
pub fn init_network(specs: &[LayerSpec], seed: u64) -> Result<MlpNetwork> {
    MlpNetwork::init(specs, seed)
}

pub fn network_forward(net: &MlpNetwork, batch: &Matrix) -> Result<(Matrix, Trace)> {
    net.forward(batch)
}

pub fn network_backward(
    net: &MlpNetwork,
    trace: &Trace,
    output_grad: &Matrix,
) -> Result<(Gradients, Matrix)> {
    net.backward(trace, output_grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net() -> MlpNetwork {
        MlpNetwork::linear(Matrix::identity(2), vec![0.0; 2]).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let specs = [LayerSpec::new(2, 2, Activation::Identity)];
        let a = MlpNetwork::init(&specs, 7).unwrap();
        let b = MlpNetwork::init(&specs, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[0].biases().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn he_variance_for_relu_layers() {
        let specs = [LayerSpec::new(1000, 1000, Activation::Relu)];
        let net = MlpNetwork::init(&specs, 3).unwrap();
        let w = net.layers()[0].weights().as_slice();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = 2.0 / 1000.0;
        assert!((var - target).abs() < 0.1 * target, "variance {var}");
    }

    #[test]
    fn rejects_unchained_specs() {
        let specs = [
            LayerSpec::new(2, 3, Activation::Relu),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        assert!(matches!(MlpNetwork::init(&specs, 0), Err(Error::Config(_))));
        assert!(matches!(MlpNetwork::init(&[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn identity_layer_forward() {
        let (out, _) = identity_net()
            .forward(&Matrix::row_vector(&[3.0, -1.0]))
            .unwrap();
        assert_eq!(out.as_slice(), &[3.0, -1.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        assert!(matches!(
            identity_net().forward(&Matrix::zeros(1, 3)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let specs = mlp_specs(3, &[5, 4], 2, Activation::Tanh, Activation::Sigmoid);
        let net = MlpNetwork::init(&specs, 11).unwrap();
        let batch = random::gaussian_sample(4, 3, 0.0, 1.0, 1);
        let (_, trace) = net.forward(&batch).unwrap();
        let (g, dx) = net.backward(&trace, &Matrix::zeros(4, 2)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_loss_input_grad_is_weight_row_sums() {
        let w = Matrix::from_rows(&[[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]]).unwrap();
        let net = MlpNetwork::linear(w.clone(), vec![0.1, 0.2, 0.3]).unwrap();
        let batch = Matrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5]]).unwrap();
        let (_, trace) = net.forward(&batch).unwrap();
        let (_, dx) = net.backward(&trace, &Matrix::filled(2, 3, 1.0)).unwrap();
        for r in 0..2 {
            assert_eq!(dx.row(r), &[2.0, 3.5]);
        }
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut net = identity_net();
        let (_, trace) = net.forward(&Matrix::row_vector(&[1.0, 1.0])).unwrap();
        for (w, _) in net.parameters_mut() {
            w[0] += 1.0;
        }
        assert!(matches!(
            net.backward(&trace, &Matrix::zeros(1, 2)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn backward_input_matches_full_backward() {
        let specs = mlp_specs(4, &[6], 3, Activation::LeakyRelu(0.2), Activation::Tanh);
        let net = MlpNetwork::init(&specs, 5).unwrap();
        let batch = random::gaussian_sample(3, 4, 0.0, 1.0, 9);
        let (_, trace) = net.forward(&batch).unwrap();
        let g = random::gaussian_sample(3, 3, 0.0, 1.0, 10);
        let (_, full) = net.backward(&trace, &g).unwrap();
        assert_eq!(full, net.backward_input(&trace, &g).unwrap());
    }
}
