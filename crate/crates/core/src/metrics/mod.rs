//! Scores computed on latent code sets.

pub mod cluster;
pub mod codes;
pub mod kl;
pub mod modes;
pub mod pag;

pub use cluster::cluster_ratio;
pub use codes::{LatentCodeSet, RowStatus};
pub use kl::{
    diag_gaussian_log_density, kl_decomposition_check, kl_diag_gaussian, kl_gaussian,
    kl_mc_estimate, random_linear_gaussian, Gaussian, JointModel, KlDecomposition,
    LinearGaussianModel, McEstimate,
};
pub use modes::{assign_modes, mode_coverage};
pub use pag::{pag_from_codes, pag_score, singular_values, PagReport};
