//! Dense MLP building blocks: activations, networks, optimizer, sampling.

pub mod activation;
pub mod network;
pub mod random;
pub mod rmsprop;

pub use activation::{apply_activation_grad, Activation, DEFAULT_LEAK};
pub use network::{
    init_network, mlp_specs, network_backward, network_forward, Gradients, LayerGrads, LayerSpec,
    MlpNetwork, Trace,
};
pub use random::gaussian_sample;
pub use rmsprop::{rmsprop_step, RmsPropState};
