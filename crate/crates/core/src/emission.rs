//! Initial particle states for every source model.
//!
//! Emission is random access: `emit(i)` depends only on the spec, the seed and
//! `i`. Random variants draw from a ChaCha8 stream selected by the particle
//! index, so no generator state is shared between particles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::model::{AngleSampling, EmissionSpec, Geometry, ParticleState, ValidConfig, Vec2};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EmissionError {
    #[error("emission index {index} out of range (total {total})")]
    IndexOutOfRange { index: u64, total: u64 },
}

/// Number of points in a grid from `min` to `max` with spacing `step`,
/// tolerant to the rounding of degree-to-radian conversion.
pub fn grid_len(min: f64, max: f64, step: f64) -> u64 {
    let ratio = (max - min) / step;
    (ratio * (1.0 + 1e-12) + 1e-9).floor() as u64 + 1
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionStream {
    spec: EmissionSpec,
    v0: f64,
    geometry: Geometry,
    total: u64,
    // Grid layout: angle(k) = center + (2k - (total - 1)) / (total - 1) * half_span.
    center: f64,
    half_span: f64,
}

impl EmissionStream {
    pub fn new(cfg: &ValidConfig) -> Self {
        let spec = cfg.emission;
        let (total, center, half_span) = match spec.angles() {
            AngleSampling::Grid {
                alpha_min,
                alpha_max,
                alpha_step,
            } => {
                let n = grid_len(alpha_min, alpha_max, alpha_step);
                let mut last = alpha_min + (n - 1) as f64 * alpha_step;
                if (last - alpha_max).abs() <= 1e-9 * alpha_step {
                    last = alpha_max;
                }
                (n, 0.5 * (alpha_min + last), 0.5 * (last - alpha_min))
            }
            AngleSampling::Random { count, .. } => (count, 0.0, 0.0),
        };
        EmissionStream {
            spec,
            v0: cfg.v0,
            geometry: cfg.geometry,
            total,
            center,
            half_span,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn spec(&self) -> &EmissionSpec {
        &self.spec
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed().unwrap_or(0));
        rng.set_stream(index);
        rng
    }

    fn grid_angle(&self, index: u64) -> f64 {
        if self.total == 1 {
            return self.center - self.half_span;
        }
        // Symmetric in k <-> total-1-k, so a grid centred on zero mirrors exactly.
        let num = 2.0 * index as f64 - (self.total - 1) as f64;
        self.center + num / (self.total - 1) as f64 * self.half_span
    }

    fn check(&self, index: u64) -> Result<(), EmissionError> {
        if index >= self.total {
            Err(EmissionError::IndexOutOfRange {
                index,
                total: self.total,
            })
        } else {
            Ok(())
        }
    }

    /// Emission angle of particle `index`, in radians.
    pub fn angle(&self, index: u64) -> Result<f64, EmissionError> {
        self.check(index)?;
        Ok(self.sample(index).0)
    }

    fn sample(&self, index: u64) -> (f64, f64) {
        let angles = self.spec.angles();
        let mut rng = None;
        let alpha = match angles {
            AngleSampling::Grid { .. } => self.grid_angle(index),
            AngleSampling::Random {
                alpha_min,
                alpha_max,
                ..
            } => {
                let r = rng.get_or_insert_with(|| self.rng(index));
                let u: f64 = r.random();
                alpha_min + u * (alpha_max - alpha_min)
            }
        };
        let y_src = match self.spec {
            EmissionSpec::GaussianLine { sigma_src, .. } => {
                let r = rng.get_or_insert_with(|| self.rng(index));
                let z: f64 = r.sample(StandardNormal);
                sigma_src * z
            }
            _ => 0.0,
        };
        (alpha, y_src)
    }

    /// Initial state of particle `index`.
    pub fn emit(&self, index: u64) -> Result<ParticleState, EmissionError> {
        self.check(index)?;
        let (alpha, y_src) = self.sample(index);
        Ok(ParticleState::new(
            Vec2::new(-self.geometry.d, y_src),
            Vec2::from_polar(self.v0, alpha),
        ))
    }
}
