//! RMSProp: `r ← ρ r + (1 − ρ) g²`, `θ ← θ − η g / (√r + ε)`.

use crate::error::{Error, Result};
use crate::nn::network::{Gradients, MlpNetwork};

pub const DEFAULT_STEP_SIZE: f64 = 0.0003;
pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct RmsPropState {
    /// Per layer `(weight accumulators, bias accumulators)`.
    pub accumulators: Vec<(Vec<f64>, Vec<f64>)>,
    pub decay: f64,
    pub epsilon: f64,
    pub step_size: f64,
}

impl RmsPropState {
    pub fn new(net: &MlpNetwork, step_size: f64) -> Result<Self> {
        RmsPropState::with_hyperparameters(net, step_size, DEFAULT_DECAY, DEFAULT_EPSILON)
    }

    pub fn with_hyperparameters(
        net: &MlpNetwork,
        step_size: f64,
        decay: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(step_size > 0.0) || !(decay > 0.0 && decay < 1.0) || !(epsilon > 0.0) {
            return Err(Error::Config(format!(
                "invalid RMSProp hyperparameters: step {step_size}, decay {decay}, epsilon {epsilon}"
            )));
        }
        Ok(RmsPropState {
            accumulators: net
                .layers()
                .iter()
                .map(|l| {
                    (
                        vec![0.0; l.weights().as_slice().len()],
                        vec![0.0; l.biases().len()],
                    )
                })
                .collect(),
            decay,
            epsilon,
            step_size,
        })
    }

    fn matches(&self, net: &MlpNetwork) -> bool {
        self.accumulators.len() == net.layers().len()
            && self
                .accumulators
                .iter()
                .zip(net.layers())
                .all(|((w, b), l)| {
                    w.len() == l.weights().as_slice().len() && b.len() == l.biases().len()
                })
    }

    /// Update a flat parameter slice in place.
    fn update(&self, params: &mut [f64], grads: &[f64], acc: &mut [f64]) {
        let (rho, eta, eps) = (self.decay, self.step_size, self.epsilon);
        for ((p, &g), r) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
            *r = rho * *r + (1.0 - rho) * g * g;
            *p -= eta * g / (r.sqrt() + eps);
        }
    }
}

/// Apply one RMSProp update to `net`. Nothing is modified when a gradient is non-finite.
pub fn rmsprop_step(
    net: &mut MlpNetwork,
    grads: &Gradients,
    state: &mut RmsPropState,
) -> Result<()> {
    if grads.layers.len() != net.layers().len() || !state.matches(net) {
        return Err(Error::Shape(
            "gradients or optimizer state do not match the network".into(),
        ));
    }
    for (g, l) in grads.layers.iter().zip(net.layers()) {
        if g.weights.shape() != l.weights().shape() || g.biases.len() != l.biases().len() {
            return Err(Error::Shape("gradient shape does not match layer".into()));
        }
    }
    if let Some(layer) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient { layer });
    }
    let mut accs = std::mem::take(&mut state.accumulators);
    let st = &*state;
    for (((w, b), g), (aw, ab)) in net.parameters_mut().zip(&grads.layers).zip(accs.iter_mut()) {
        st.update(w, g.weights.as_slice(), aw);
        st.update(b, &g.biases, ab);
    }
    state.accumulators = accs;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::nn::network::LayerGrads;

    fn scalar_net(w: f64) -> MlpNetwork {
        MlpNetwork::linear(Matrix::row_vector(&[w]), vec![0.0]).unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            layers: vec![LayerGrads {
                weights: Matrix::row_vector(&[g]),
                biases: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_decays_accumulators_only() {
        let mut net = scalar_net(1.5);
        let mut st = RmsPropState::new(&net, DEFAULT_STEP_SIZE).unwrap();
        st.accumulators[0].0[0] = 0.5;
        rmsprop_step(&mut net, &scalar_grad(0.0), &mut st).unwrap();
        assert_eq!(net.layers()[0].weights().get(0, 0), 1.5);
        assert_eq!(st.accumulators[0].0[0], 0.45);
    }

    #[test]
    fn scalar_hand_computation() {
        let mut net = scalar_net(0.0);
        let mut st = RmsPropState::new(&net, 0.0003).unwrap();
        rmsprop_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        let r = st.accumulators[0].0[0];
        assert!((r - 0.1).abs() < 1e-15);
        let delta = net.layers()[0].weights().get(0, 0);
        assert!((delta - (-9.4868e-4)).abs() < 1e-7, "{delta}");
    }

    #[test]
    fn repeated_steps_shrink() {
        let mut net = scalar_net(0.0);
        let mut st = RmsPropState::new(&net, 0.0003).unwrap();
        rmsprop_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        let first = net.layers()[0].weights().get(0, 0);
        rmsprop_step(&mut net, &scalar_grad(1.0), &mut st).unwrap();
        let second = net.layers()[0].weights().get(0, 0) - first;
        assert!(second.abs() < first.abs());
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = scalar_net(2.0);
        let before = net.clone();
        let mut st = RmsPropState::new(&net, 0.0003).unwrap();
        let mut g = scalar_grad(0.0);
        g.layers[0].biases[0] = f64::INFINITY;
        assert!(matches!(
            rmsprop_step(&mut net, &g, &mut st),
            Err(Error::NonFiniteGradient { layer: 0 })
        ));
        assert_eq!(net, before);
    }
}
