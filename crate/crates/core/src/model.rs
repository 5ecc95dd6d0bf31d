//! Shared domain types: vectors, particle state, experiment geometry and the
//! simulation configuration together with its validation.
//!
//! The simulator entry points only accept a [`ValidConfig`], and the only way
//! to obtain one is [`validate_config`].

use std::fmt;
use std::ops::{Add, AddAssign, Deref, Mul, Neg, Sub};

use thiserror::Error;

/// Two-component real vector. Depending on context it holds a position,
/// a velocity or a force.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `alpha` from the +x axis, scaled by `len`.
    pub fn from_polar(len: f64, alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Vec2::new(len * c, len * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position, velocity and the number of time quanta elapsed since emission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleState {
    pub pos: Vec2,
    pub vel: Vec2,
    pub step: u64,
}

impl ParticleState {
    pub fn new(pos: Vec2, vel: Vec2) -> Self {
        ParticleState { pos, vel, step: 0 }
    }

    /// Elapsed physical time. Time only exists on the lattice `step * tau`.
    pub fn time(&self, tau: f64) -> f64 {
        self.step as f64 * tau
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.vel.is_finite()
    }
}

/// Source at `(-d, 0)`, slit screen at `x = 0`, detector at `x = l`.
/// `r` is the vertical half-extent of the imaging frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub d: f64,
    pub l: f64,
    pub r: f64,
}

impl Geometry {
    pub fn source(&self) -> Vec2 {
        Vec2::new(-self.d, 0.0)
    }

    /// Horizontal distance from the source to the detector.
    pub fn span(&self) -> f64 {
        self.d + self.l
    }
}

/// Force-field models. Every variant pushes along x only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// `(f0, 0)` for `x >= 0`.
    HalfPlaneConstant {
        f0: f64,
    },
    /// `(f0, 0)` for `|x| <= delta`.
    BandConstant {
        f0: f64,
        delta: f64,
    },
    /// `(f0 * exp(-sigma x^2), 0)` everywhere.
    GaussianBand {
        f0: f64,
        sigma: f64,
    },
}

/// How emission angles are chosen. Angles are in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleSampling {
    Grid {
        alpha_min: f64,
        alpha_max: f64,
        alpha_step: f64,
    },
    Random {
        alpha_min: f64,
        alpha_max: f64,
        count: u64,
    },
}

impl AngleSampling {
    pub fn range(&self) -> (f64, f64) {
        match *self {
            AngleSampling::Grid {
                alpha_min,
                alpha_max,
                ..
            }
            | AngleSampling::Random {
                alpha_min,
                alpha_max,
                ..
            } => (alpha_min, alpha_max),
        }
    }
}

/// Particle source models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EmissionSpec {
    /// Point source swept over a regular angle grid.
    AngleGrid {
        alpha_min: f64,
        alpha_max: f64,
        alpha_step: f64,
    },
    /// Point source with uniformly distributed random angles.
    AngleRandom {
        alpha_min: f64,
        alpha_max: f64,
        count: u64,
        seed: u64,
    },
    /// Source smeared along the vertical line `x = -d` with a centered
    /// normal distribution of width `sigma_src`.
    GaussianLine {
        sigma_src: f64,
        seed: u64,
        angles: AngleSampling,
    },
}

impl EmissionSpec {
    pub fn angles(&self) -> AngleSampling {
        match *self {
            EmissionSpec::AngleGrid {
                alpha_min,
                alpha_max,
                alpha_step,
            } => AngleSampling::Grid {
                alpha_min,
                alpha_max,
                alpha_step,
            },
            EmissionSpec::AngleRandom {
                alpha_min,
                alpha_max,
                count,
                ..
            } => AngleSampling::Random {
                alpha_min,
                alpha_max,
                count,
            },
            EmissionSpec::GaussianLine { angles, .. } => angles,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            EmissionSpec::AngleGrid { .. } => None,
            EmissionSpec::AngleRandom { seed, .. } | EmissionSpec::GaussianLine { seed, .. } => {
                Some(seed)
            }
        }
    }

    /// Replaces the seed of the random variants; grids are left untouched.
    pub fn with_seed(self, new_seed: u64) -> Self {
        match self {
            EmissionSpec::AngleRandom {
                alpha_min,
                alpha_max,
                count,
                ..
            } => EmissionSpec::AngleRandom {
                alpha_min,
                alpha_max,
                count,
                seed: new_seed,
            },
            EmissionSpec::GaussianLine {
                sigma_src, angles, ..
            } => EmissionSpec::GaussianLine {
                sigma_src,
                seed: new_seed,
                angles,
            },
            grid => grid,
        }
    }

    pub fn is_point_source(&self) -> bool {
        !matches!(self, EmissionSpec::GaussianLine { .. })
    }
}

/// Full description of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub geometry: Geometry,
    pub field: FieldSpec,
    pub emission: EmissionSpec,
    /// Time quant.
    pub tau: f64,
    /// Emission speed.
    pub v0: f64,
    pub mass: f64,
    /// Step budget per particle; `None` derives it from the geometry.
    pub max_steps: Option<u64>,
    /// Half-width of an absorbing slit in `x = 0`; `None` disables it.
    pub slit_half_width: Option<f64>,
}

impl SimConfig {
    /// The reference parameter set: `d = 5`, `l = 10`, `R = 5`, band field
    /// of half-width 0.5 with `F0 = 2*pi*q`, `q = -1`, `tau = 0.025`,
    /// `v0 = 12`, angles -49..49 degrees in steps of 0.01 degrees.
    pub fn appendix() -> Self {
        SimConfig {
            geometry: Geometry {
                d: 5.0,
                l: 10.0,
                r: 5.0,
            },
            field: FieldSpec::BandConstant {
                f0: -2.0 * std::f64::consts::PI,
                delta: 0.5,
            },
            emission: EmissionSpec::AngleGrid {
                alpha_min: (-49.0f64).to_radians(),
                alpha_max: 49.0f64.to_radians(),
                alpha_step: 0.01f64.to_radians(),
            },
            tau: 0.025,
            v0: 12.0,
            mass: 1.0,
            max_steps: None,
            slit_half_width: None,
        }
    }

    /// Explicit step budget, or `ceil(4 (d + l) / (v0 tau))`.
    pub fn resolved_max_steps(&self) -> u64 {
        self.max_steps
            .unwrap_or_else(|| default_max_steps(&self.geometry, self.v0, self.tau))
    }
}

pub fn default_max_steps(geometry: &Geometry, v0: f64, tau: f64) -> u64 {
    let n = (4.0 * geometry.span() / (v0 * tau)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as u64
    } else {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("parameter `{0}` must be positive")]
    NonPositiveParameter(&'static str),
    #[error("parameter `{0}` must be finite")]
    NonFiniteParameter(&'static str),
    #[error("empty angle range: alpha_min ({min}) must be below alpha_max ({max})")]
    EmptyAngleRange { min: f64, max: f64 },
    #[error("a single step v0*tau = {step} covers the whole apparatus d + l = {span}")]
    StepOvershoot { step: f64, span: f64 },
}

/// Every violation found in one config.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// A [`SimConfig`] that passed [`validate_config`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidConfig(SimConfig);

impl ValidConfig {
    pub fn into_inner(self) -> SimConfig {
        self.0
    }

    pub fn config(&self) -> &SimConfig {
        &self.0
    }

    /// Applies `edit` to a copy and validates the result.
    pub fn modify(&self, edit: impl FnOnce(&mut SimConfig)) -> Result<ValidConfig, ConfigErrors> {
        let mut cfg = self.0;
        edit(&mut cfg);
        validate_config(cfg)
    }
}

impl Deref for ValidConfig {
    type Target = SimConfig;
    fn deref(&self) -> &SimConfig {
        &self.0
    }
}

fn check_positive(errors: &mut Vec<ConfigError>, name: &'static str, value: f64) {
    if value.is_nan() || value.is_infinite() {
        errors.push(ConfigError::NonFiniteParameter(name));
    } else if value <= 0.0 {
        errors.push(ConfigError::NonPositiveParameter(name));
    }
}

fn check_finite(errors: &mut Vec<ConfigError>, name: &'static str, value: f64) {
    if !value.is_finite() {
        errors.push(ConfigError::NonFiniteParameter(name));
    }
}

fn check_angles(errors: &mut Vec<ConfigError>, angles: AngleSampling) {
    let (min, max) = angles.range();
    check_finite(errors, "emission.alpha_min", min);
    check_finite(errors, "emission.alpha_max", max);
    if min.is_finite() && max.is_finite() && min >= max {
        errors.push(ConfigError::EmptyAngleRange { min, max });
    }
    match angles {
        AngleSampling::Grid { alpha_step, .. } => {
            check_positive(errors, "emission.alpha_step", alpha_step)
        }
        AngleSampling::Random { count, .. } => {
            if count == 0 {
                errors.push(ConfigError::NonPositiveParameter("emission.count"));
            }
        }
    }
}

/// Checks every invariant of `cfg` and reports all violations at once.
pub fn validate_config(cfg: SimConfig) -> Result<ValidConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let g = &cfg.geometry;
    check_positive(&mut errors, "geometry.d", g.d);
    check_positive(&mut errors, "geometry.l", g.l);
    check_positive(&mut errors, "geometry.r", g.r);
    check_positive(&mut errors, "tau", cfg.tau);
    check_positive(&mut errors, "v0", cfg.v0);
    check_positive(&mut errors, "mass", cfg.mass);

    match cfg.field {
        FieldSpec::Zero => {}
        FieldSpec::HalfPlaneConstant { f0 } => check_finite(&mut errors, "field.f0", f0),
        FieldSpec::BandConstant { f0, delta } => {
            check_finite(&mut errors, "field.f0", f0);
            check_positive(&mut errors, "field.delta", delta);
        }
        FieldSpec::GaussianBand { f0, sigma } => {
            check_finite(&mut errors, "field.f0", f0);
            check_positive(&mut errors, "field.sigma", sigma);
        }
    }

    check_angles(&mut errors, cfg.emission.angles());
    if let EmissionSpec::GaussianLine { sigma_src, .. } = cfg.emission {
        check_positive(&mut errors, "emission.sigma_src", sigma_src);
    }

    if cfg.max_steps == Some(0) {
        errors.push(ConfigError::NonPositiveParameter("max_steps"));
    }
    if let Some(w) = cfg.slit_half_width {
        check_positive(&mut errors, "slit.half_width", w);
    }

    let step = cfg.v0 * cfg.tau;
    let span = g.span();
    if step.is_finite() && span.is_finite() && step > 0.0 && step >= span {
        errors.push(ConfigError::StepOvershoot { step, span });
    }

    if errors.is_empty() {
        Ok(ValidConfig(cfg))
    } else {
        Err(ConfigErrors(errors))
    }
}
