//! Label-conditioned generators, transport maps and the guarantees relating
//! them to conditional geodesics.

mod affine;
pub mod divergence;
mod fit;
mod pipeline;
mod sampling;
mod theorems;
mod transport;

pub use affine::{d_enc, AffineBijectionPair, AffineMap, DET_TOL};
pub use divergence::DivergenceKind;
pub use fit::{fit_autoencoder, fit_transport_map, FitConfig, FitTrace};
pub use pipeline::{num, Pipeline, PIPELINE_SCHEMA};
pub use sampling::{algorithm1_generate, draw_samples, generated_curve, geodesic_generate, GenerationMode, Generated};
pub use theorems::{
    check_conditions, objective6, sampling_tolerance, theorem4_bound, theorem5_check, theorem6_gap, ConditionDiagnostics,
    Objective6, SyntheticA5, Theorem4Report,
};
pub use transport::{
    discrete_family, gaussian_family, latent_ot_transport, latent_ot_transport_gaussian, oracle_transport_map,
    oracle_transport_map_gaussian, PointMap, Provenance, SourceLaw, TransportEntry, TransportMap,
};
