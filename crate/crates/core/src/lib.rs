//! Mutual information of noncoherent block Rayleigh-fading MIMO channels with
//! IID Gaussian inputs.
//!
//! `Ī = (h(Y) − h(Y|X))/n_b`: the conditional entropy comes in closed form
//! from Wishart log-determinant moments, the output entropy from Monte Carlo
//! over an exact output density. Pilot-based rates and the perfect-CSI
//! capacity are provided for comparison.
//!
//! The numeric kernels (special functions, matrices, quadrature, moments)
//! are generic over [`Real`]; the aliases below fix them to `f64`.

pub(crate) mod dd;
pub mod error;
pub mod scalar;
pub mod specfun;
pub mod matops;
pub mod model;
pub mod closed_forms;
pub mod quadrature;
pub mod stats;
pub mod density;
pub mod engine;
pub mod pilot;

pub use closed_forms::{
    cond_entropy, high_snr_slope_capacity, high_snr_slope_pilot, log2_pi_e, mi_lower_bound,
    perfect_csi_capacity, perfect_csi_capacity_at, wishart_logdet_mean,
};
pub use density::{DensityEvaluator, LogDensity, NormalizationEstimate};
pub use engine::{estimate_output_entropy, mutual_information, mutual_information_with, MIEstimate, OutputEntropy};
pub use error::{Error, Result};
pub use model::{
    coherence_blocklength, derive_seed, doppler_frequency, linear_to_db, sample_block, snr_db_to_linear,
    substream, BlockSample, ChannelConfig, Substream,
};
pub use pilot::{min_energy_per_bit, pilot_se_boosted, pilot_se_uniform, PilotResult};
pub use scalar::Real;
pub use stats::StoppingRule;

pub type ComplexMatrix = matops::ComplexMatrix<f64>;
pub type RealMatrix = matops::RealMatrix<f64>;
pub type GramSpectrum = matops::GramSpectrum<f64>;
pub type SignedLogValue = specfun::SignedLogValue<f64>;
pub type QuadSettings = quadrature::QuadSettings<f64>;
pub type StreamingMoments = stats::StreamingMoments<f64>;
