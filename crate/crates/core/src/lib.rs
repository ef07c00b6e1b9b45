//! Unitary differential space-time modulation built from orthogonal and
//! quasi-orthogonal space-time block codes with jointly modulated symbol
//! groups.
//!
//! The numeric core is generic over the real scalar ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to one precision.
//! Simulation and the analysis batteries run in `f64`.
//!
//! ```
//! use dstm_core::{coding_gain, Scheme};
//!
//! let scheme = Scheme::named("qo4").unwrap();
//! let cb = scheme.build::<f64>().unwrap();
//! assert_eq!(cb.len(), 256);
//! assert!((coding_gain(&cb).unwrap() - 1.1716).abs() < 1e-3);
//! ```

pub mod channel;
pub mod codebook;
pub mod constellation;
pub mod error;
pub mod link;
pub mod matrix;
pub mod montecarlo;
pub mod scalar;
pub mod scheme;
pub mod stbc;
pub mod tables;
pub mod verify;

pub use channel::{sample_rayleigh, snr_db_to_sigma2, transmit, ChannelRealization, NoiseParams};
pub use codebook::{
    assemble, coding_gain, coding_gain_fast_ostbc, coding_gain_fast_qo, detmin_fast_qo, diversity_rank, pair_stats,
    spectral_efficiency, Codebook, CodebookExport, DecodingGroup, PairStats,
};
pub use constellation::{
    builtin_sphere, load_sphere, optimize_sphere, psk, qo_pairwise, rotation_sweep, sphere_to_joint, theorem1_theta,
    JointGroupSet, OptimizerConfig, PairwiseSet, SphericalCode,
};
pub use error::{DstmError, Result};
pub use link::{
    differential_encode, full_ml_decode, groupwise_decode, groupwise_decode_counted, trace_metric, DecoderChoice,
    DifferentialEncoder,
};
pub use matrix::ComplexMatrix;
pub use montecarlo::{required_snr, run_bler, run_frame, write_csv, BlerPoint, SimConfig};
pub use scalar::Real;
pub use scheme::{Scheme, SchemeSpec, ThetaSpec};
pub use stbc::{LinearDispersion, StbcKind};

pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
pub type Matrix = ComplexMatrix<f64>;
pub type Matrix32 = ComplexMatrix<f32>;
pub type Codebook64 = Codebook<f64>;
pub type Codebook32 = Codebook<f32>;
pub type Dispersion = LinearDispersion<f64>;
