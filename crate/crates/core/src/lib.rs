//! Quasi-stationary distributions of continuous-time Markov chains absorbed
//! at a cemetery point: spectral characterization, certificates for the
//! exponential-convergence criteria, and birth-death model builders.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! unsuffixed aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod criteria;
pub mod error;
pub mod linalg;
pub mod models;
pub mod rates;
pub mod scalar;
pub mod spectral;

pub use chain::{tv_distance, AbsorbedGenerator, DistributionVector, SurvivalCurve, ValidationReport};
pub use criteria::{
    c2_alpha_lower_bound, c2_of_mu, certify, certify_a1, certify_a2, explicit_bound, infimum_measure, s_series,
    CertifyOptions, CriteriaCertificate, SeriesReport, SeriesVerdict,
};
pub use error::{QsdError, Result};
pub use linalg::Matrix;
pub use models::{
    build_bd, build_multibd_cooperative, build_multibd_mutation, check_weak_cooperation, domination_rates, BDSpec,
    MultiBDSpec, MultiMode,
};
pub use rates::RateSeq;
pub use scalar::Real;
pub use spectral::{
    eta_limit_profile, qprocess_generator, qprocess_transition, solve_spectral, solve_spectral_with, spectrum_report,
    SpectralOptions, SpectralTriple, SpectrumReport,
};

pub type Generator = AbsorbedGenerator<f64>;
pub type Distribution = DistributionVector<f64>;
pub type Triple = SpectralTriple<f64>;
pub type Certificate = CriteriaCertificate<f64>;
pub type Generator32 = AbsorbedGenerator<f32>;
pub type Distribution32 = DistributionVector<f32>;
pub type Triple32 = SpectralTriple<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
