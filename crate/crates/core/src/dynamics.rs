//! Discrete-time integrator.
//!
//! One step of length `tau` evaluates the force at the current position, moves
//! the particle with its current velocity and only then updates the velocity:
//!
//! ```text
//! F      = F(r(t))
//! r(t+τ) = r(t) + v(t) τ
//! v(t+τ) = v(t) + F τ / m
//! ```
//!
//! Particles are propagated until they pass the detector plane `x = l`, and
//! the last segment is linearly interpolated onto that plane.

use thiserror::Error;

use crate::fields::eval_field;
use crate::model::{FieldSpec, ParticleState, ValidConfig, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum DynamicsError {
    #[error("particle state became non-finite after step {step}")]
    NonFiniteState { step: u64 },
    #[error("particle did not reach the detector within {steps} steps")]
    MaxStepsExceeded { steps: u64 },
    #[error("particle hit the slit screen at y = {y}")]
    Absorbed { y: f64 },
}

/// Where and when a particle crossed the detector plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpactRecord {
    pub y_impact: f64,
    pub emission_index: u64,
    pub steps_taken: u64,
}

impl ImpactRecord {
    pub fn with_index(self, emission_index: u64) -> Self {
        ImpactRecord {
            emission_index,
            ..self
        }
    }
}

/// Every position visited, from emission to the first point past the
/// detector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<Vec2>,
}

/// Advances `state` by one time quant.
pub fn step(
    state: &ParticleState,
    field: &FieldSpec,
    tau: f64,
    mass: f64,
) -> Result<ParticleState, DynamicsError> {
    let force = eval_field(field, state.pos);
    let next = ParticleState {
        pos: state.pos + state.vel * tau,
        vel: state.vel + force * (tau / mass),
        step: state.step + 1,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(DynamicsError::NonFiniteState { step: next.step })
    }
}

fn propagate_with(
    initial: &ParticleState,
    cfg: &ValidConfig,
    mut visit: impl FnMut(Vec2),
) -> Result<ImpactRecord, DynamicsError> {
    let l = cfg.geometry.l;
    let budget = cfg.resolved_max_steps();
    let mut state = *initial;
    let mut prev = state;
    visit(state.pos);
    while state.pos.x <= l {
        if state.step - initial.step >= budget {
            return Err(DynamicsError::MaxStepsExceeded { steps: budget });
        }
        prev = state;
        state = step(&state, &cfg.field, cfg.tau, cfg.mass)?;
        visit(state.pos);
        if let Some(half_width) = cfg.slit_half_width {
            if prev.pos.x < 0.0 && state.pos.x >= 0.0 {
                let y0 = prev.pos.y
                    + (state.pos.y - prev.pos.y) * (0.0 - prev.pos.x) / (state.pos.x - prev.pos.x);
                if y0.abs() > half_width {
                    return Err(DynamicsError::Absorbed { y: y0 });
                }
            }
        }
    }
    let (x, y) = (state.pos.x, state.pos.y);
    let (x_prev, y_prev) = (prev.pos.x, prev.pos.y);
    // The loop only exits after x moved past l, so the segment has extent.
    debug_assert!(x > x_prev, "degenerate exit segment");
    Ok(ImpactRecord {
        y_impact: (y - y_prev) * (l - x_prev) / (x - x_prev) + y_prev,
        emission_index: 0,
        steps_taken: state.step - initial.step,
    })
}

/// Runs `initial` to the detector and returns the interpolated impact.
/// The record's `emission_index` is 0; batch code sets it.
pub fn propagate_to_detector(
    initial: &ParticleState,
    cfg: &ValidConfig,
) -> Result<ImpactRecord, DynamicsError> {
    propagate_with(initial, cfg, |_| {})
}

/// Like [`propagate_to_detector`] but keeps every visited position.
pub fn record_trajectory(
    initial: &ParticleState,
    cfg: &ValidConfig,
) -> Result<Trajectory, DynamicsError> {
    trace(initial, cfg).map(|(t, _)| t)
}

/// Trajectory and impact in one pass.
pub fn trace(
    initial: &ParticleState,
    cfg: &ValidConfig,
) -> Result<(Trajectory, ImpactRecord), DynamicsError> {
    let mut points = Vec::new();
    let impact = propagate_with(initial, cfg, |p| points.push(p))?;
    Ok((Trajectory { points }, impact))
}
