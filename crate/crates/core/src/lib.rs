//! Soft-output symbol detection for MIMO channels by expectation
//! consistency (EC).
//!
//! The crate provides
//!
//! * the system model: QAM constellations with Gray labels, Rayleigh
//!   channels and their real-valued representation ([`model`]);
//! * exponential-family building blocks: the Gaussian likelihood site, the
//!   discrete prior site and the averaging Gaussian, with their moments,
//!   log-partitions and the EC energy ([`expfam`]);
//! * detectors: single- and double-loop EC, linear MMSE and exact
//!   enumeration ([`detect`]);
//! * evaluation: capacity, Monte Carlo mutual information, moment-mismatch
//!   traces and error counting ([`metrics`]);
//! * a regular LDPC coding chain to measure coded bit error rates ([`ldpc`]).
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.
//!
//! ```
//! use ecmimo::{ec_single_loop, sample_channel, rng_from_seed, snr_to_sigma_w2, Constellation, EcConfig};
//!
//! let cst = Constellation::<f64>::new(4, 1.0)?;
//! let sigma_w2 = snr_to_sigma_w2(6.0, 4, 4, 1.0)?;
//! let mut ch = sample_channel::<f64>(4, 4, sigma_w2, 1)?.to_real();
//! ch.transmit_and_store(&cst.real_vector(&[0, 1, 2, 3]), cst.real_alphabet(), &mut rng_from_seed(2))?;
//! let out = ec_single_loop(&ch, &cst, &EcConfig::recommended())?;
//! assert_eq!(out.bit_llrs.len(), 8);
//! # Ok::<(), ecmimo::Error>(())
//! ```

pub mod detect;
pub mod error;
pub mod expfam;
pub mod ldpc;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;

pub use detect::{
    ec_double_loop, ec_single_loop, exact_detector, exact_real_marginals, mmse_detector, soft_output_from_site, CavityReading, DeltaPoint,
    Detector, Diagnostics, EcConfig, EcDoubleLoop, EcSingleLoop, EnergyPoint, ExactDetector, ExactMarginals, MmseDetector, SoftOutput,
    DEFAULT_ENUMERATION_BUDGET, DEFAULT_LLR_CLAMP,
};
pub use error::{Error, Result};
pub use expfam::{
    ec_evaluate, ec_free_energy, ec_gradient, log_zr, log_zs, q_moments, r_moments, s_moments, s_params_from_mean_var, s_params_from_moments,
    DiscreteSite, EcEvaluation, EcGradient, GaussianLikelihood, GaussianPosterior, MomentSet, NaturalParams, Normalization, QMarginals,
};
pub use ldpc::{build_regular_ldpc, coded_ber_run, decode_bp, CodedBerResult, CodedBerRun, DecodeResult, LdpcCode};
pub use linalg::{Cholesky, Matrix};
pub use metrics::{capacity_per_antenna, count_errors, delta_metrics, estimate_mi, wilson_interval, DeltaTrace, MiEstimate};
pub use model::{
    coded_snr_correction, sample_channel, snr_to_sigma_w2, to_real_model, BitSplit, ComplexChannel, Constellation, RealChannel,
};
pub use rng::{child_rng, derive_seed, rng_from_seed, SimRng};
pub use scalar::Real;

pub type Constellation64 = Constellation<f64>;
pub type ComplexChannel64 = ComplexChannel<f64>;
pub type RealChannel64 = RealChannel<f64>;
pub type Matrix64 = Matrix<f64>;
pub type NaturalParams64 = NaturalParams<f64>;
pub type MomentSet64 = MomentSet<f64>;
pub type SoftOutput64 = SoftOutput<f64>;
pub type EcConfig64 = EcConfig<f64>;
pub type EcSingleLoop64 = EcSingleLoop<f64>;
pub type EcDoubleLoop64 = EcDoubleLoop<f64>;
