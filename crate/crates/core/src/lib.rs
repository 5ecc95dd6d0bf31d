//! Discrete-time single-slit scattering.
//!
//! Particles leave a source, cross a force region near a slit and land on a
//! detector screen. Time advances in fixed quanta `tau`; the resulting
//! detector histogram shows interference-like maxima and minima that fade as
//! `tau` shrinks. Alongside the simulator the crate offers closed-form
//! predictions of where the minima sit and a continuous-time reference.

pub mod analytics;
pub mod cli;
pub mod dynamics;
pub mod emission;
pub mod fields;
pub mod histogram;
pub mod model;
pub mod sweep;

pub use analytics::{
    classical_reference, compute_n0, deviation_origins, is_black_region, predict_minima,
    DeviationOrigins,
};
pub use dynamics::{propagate_to_detector, record_trajectory, step, ImpactRecord, Trajectory};
pub use emission::EmissionStream;
pub use fields::eval_field;
pub use histogram::{accumulate, contrast, convolve_gaussian, density_grid, Contrast, Histogram};
pub use model::{
    validate_config, EmissionSpec, FieldSpec, Geometry, ParticleState, SimConfig, ValidConfig, Vec2,
};
pub use sweep::{convergence_study, run_batch, run_sweep, SweepAxis, SweepParameter};
