//! Closed-form structure of the pattern and the continuous-time reference.
//!
//! In free flight the discrete positions reachable after `n` steps lie on
//! circles of radius `v0 tau n` around the source. A circle meets the force
//! boundary (at distance `b` from the source) at height
//!
//! ```text
//! a_i = sign(i) sqrt(v0² tau² (n0 + |i|)² - b²),   n0 = floor(b / (v0 tau))
//! ```
//!
//! and particles launched just below or just above the angle
//! `phi_i = atan(a_i / b)` enter the force region one step apart. For a
//! field that starts at the slit screen `b = d`; for a band of half-width
//! `delta` it is `d - delta`.

use thiserror::Error;

use crate::dynamics::{propagate_to_detector, DynamicsError};
use crate::model::{ParticleState, ValidConfig, Vec2};

/// Relative tolerance used to decide that `d / (v0 tau)` is an integer.
pub const DEFAULT_BLACK_REGION_TOL: f64 = 1e-9;

/// Reference step for fields without a closed-form classical solution, as a
/// fraction of the configured time quant.
pub const NUMERIC_REFERENCE_REFINEMENT: f64 = 1024.0;

#[derive(Clone, Copy, Debug, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("classical trajectory turns back before reaching the detector")]
    NeverReachesDetector,
    #[error("field has no sharp force boundary")]
    NoForceBoundary,
    #[error("minima prediction needs a point source")]
    NotPointSource,
    #[error("time quant {0} is not valid for this config")]
    InvalidTau(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn nearest_integer(ratio: f64, rel_tol: f64) -> Option<f64> {
    let k = ratio.round();
    ((ratio - k).abs() <= rel_tol * ratio).then_some(k)
}

/// Number of whole steps that fit into `d`: `floor(d / (v0 tau))`.
///
/// Ratios within [`DEFAULT_BLACK_REGION_TOL`] of an integer snap to it, so
/// `d = v0 tau k` gives `k` even when the floating-point quotient lands a few
/// ulps below.
pub fn compute_n0(d: f64, v0: f64, tau: f64) -> u64 {
    let ratio = d / (v0 * tau);
    match nearest_integer(ratio, DEFAULT_BLACK_REGION_TOL) {
        Some(k) => k as u64,
        None => ratio.floor() as u64,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationOrigins {
    pub n0: u64,
    /// Distance from the source to the force boundary.
    pub boundary: f64,
    /// `i = -i_max..=-1, 1..=i_max`.
    pub indices: Vec<i64>,
    pub a: Vec<f64>,
    /// Fork angles in radians, signed like `a`.
    pub phi: Vec<f64>,
}

impl DeviationOrigins {
    fn position(&self, i: i64) -> Option<usize> {
        self.indices.iter().position(|&k| k == i)
    }

    pub fn a_at(&self, i: i64) -> Option<f64> {
        self.position(i).map(|p| self.a[p])
    }

    pub fn phi_at(&self, i: i64) -> Option<f64> {
        self.position(i).map(|p| self.phi[p])
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Origins for a force boundary at the slit screen (`b = d`).
pub fn deviation_origins(d: f64, v0: f64, tau: f64, i_max: u32) -> DeviationOrigins {
    deviation_origins_from(d, v0, tau, i_max)
}

/// Origins for a force boundary at distance `boundary` from the source.
pub fn deviation_origins_from(boundary: f64, v0: f64, tau: f64, i_max: u32) -> DeviationOrigins {
    let n0 = compute_n0(boundary, v0, tau);
    let step = v0 * tau;
    let positive: Vec<f64> = (1..=i_max as u64)
        .map(|i| {
            let r = step * (n0 + i) as f64;
            (r * r - boundary * boundary).max(0.0).sqrt()
        })
        .collect();
    let i_max = i_max as i64;
    let indices: Vec<i64> = (-i_max..=-1).chain(1..=i_max).collect();
    let a: Vec<f64> = positive
        .iter()
        .rev()
        .map(|a| -a)
        .chain(positive.iter().copied())
        .collect();
    let phi = a.iter().map(|a| (a / boundary).atan()).collect();
    DeviationOrigins {
        n0,
        boundary,
        indices,
        a,
        phi,
    }
}

/// True when `d / (v0 tau)` is an integer to within `rel_tol` (relative).
pub fn is_black_region(d: f64, v0: f64, tau: f64, rel_tol: f64) -> bool {
    let ratio = d / (v0 * tau);
    ratio >= 0.5 && nearest_integer(ratio, rel_tol).is_some()
}

/// Distance from the source to the force boundary of `cfg`'s field.
pub fn boundary_distance(cfg: &ValidConfig) -> Result<f64, AnalyticsError> {
    cfg.field
        .force_onset()
        .map(|x| x + cfg.geometry.d)
        .ok_or(AnalyticsError::NoForceBoundary)
}

/// Continuous-time impact ordinate for a particle starting at `initial`.
///
/// Piecewise-constant fields are solved exactly: straight segments joined by
/// constant-acceleration arcs. For the Gaussian field there is no closed
/// form and the discrete integrator is run with `tau / 1024` instead.
pub fn classical_reference(
    initial: &ParticleState,
    cfg: &ValidConfig,
) -> Result<f64, AnalyticsError> {
    let l = cfg.geometry.l;
    let Some(pieces) = cfg.field.constant_pieces(initial.pos.x, l) else {
        return numeric_reference(initial, cfg);
    };
    let mut vx = initial.vel.x;
    let mut t = 0.0;
    for (x0, x1, force) in pieces {
        if vx <= 0.0 {
            return Err(AnalyticsError::NeverReachesDetector);
        }
        let width = x1 - x0;
        let acc = force / cfg.mass;
        if acc == 0.0 {
            t += width / vx;
            continue;
        }
        let disc = vx * vx + 2.0 * acc * width;
        if disc < 0.0 {
            return Err(AnalyticsError::NeverReachesDetector);
        }
        let v_exit = disc.sqrt();
        // Root of width = vx t + acc t²/2, written without cancellation.
        t += 2.0 * width / (vx + v_exit);
        vx = v_exit;
    }
    Ok(initial.pos.y + initial.vel.y * t)
}

fn numeric_reference(initial: &ParticleState, cfg: &ValidConfig) -> Result<f64, AnalyticsError> {
    let fine = cfg
        .modify(|c| {
            c.tau /= NUMERIC_REFERENCE_REFINEMENT;
            c.max_steps = c
                .max_steps
                .map(|n| n.saturating_mul(NUMERIC_REFERENCE_REFINEMENT as u64));
        })
        .expect("a finer time quant keeps a valid config valid");
    Ok(propagate_to_detector(initial, &fine)?.y_impact)
}

/// Detector ordinate of the discrete trajectory launched exactly at each
/// fork angle `phi_i`, in the order of [`DeviationOrigins::indices`].
pub fn fork_impacts(cfg: &ValidConfig, i_max: u32) -> Result<Vec<(i64, f64)>, AnalyticsError> {
    if !cfg.emission.is_point_source() {
        return Err(AnalyticsError::NotPointSource);
    }
    let b = boundary_distance(cfg)?;
    let origins = deviation_origins_from(b, cfg.v0, cfg.tau, i_max);
    let source = cfg.geometry.source();
    origins
        .indices
        .iter()
        .zip(&origins.phi)
        .map(|(&i, &phi)| {
            let start = ParticleState::new(source, Vec2::from_polar(cfg.v0, phi));
            Ok((i, propagate_to_detector(&start, cfg)?.y_impact))
        })
        .collect()
}

/// [`fork_impacts`] ordinates, sorted ascending.
pub fn predict_minima(cfg: &ValidConfig, i_max: u32) -> Result<Vec<f64>, AnalyticsError> {
    let mut ys: Vec<f64> = fork_impacts(cfg, i_max)?
        .into_iter()
        .map(|(_, y)| y)
        .collect();
    ys.sort_by(f64::total_cmp);
    Ok(ys)
}

/// Black-region predicate on the configured source distance `d`.
pub fn black_region_for(cfg: &ValidConfig) -> bool {
    is_black_region(cfg.geometry.d, cfg.v0, cfg.tau, DEFAULT_BLACK_REGION_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate_to_detector;
    use crate::model::{validate_config, FieldSpec, SimConfig};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn n0_for_reference_parameters() {
        assert_eq!(compute_n0(5.0, 12.0, 0.025), 16);
        assert_eq!(compute_n0(0.3, 12.0, 0.025), 1);
        assert_eq!(compute_n0(0.2, 12.0, 0.025), 0);
        // 4.8 / (12 * 0.025) evaluates to 15.999999999999996.
        assert_eq!(compute_n0(4.8, 12.0, 0.025), 16);
    }

    #[test]
    fn origins_for_reference_parameters() {
        let o = deviation_origins(5.0, 12.0, 0.025, 3);
        assert_eq!(o.n0, 16);
        assert_eq!(o.indices, vec![-3, -2, -1, 1, 2, 3]);
        assert!((o.a_at(1).unwrap() - 1.01f64.sqrt()).abs() < 1e-12);
        assert!((o.a_at(2).unwrap() - 4.16f64.sqrt()).abs() < 1e-12);
        assert_eq!(o.a_at(-1).unwrap(), -o.a_at(1).unwrap());
        // atan(sqrt(1.01) / 5)
        assert!((o.phi_at(1).unwrap() - 0.198_354_522_158_804_73).abs() < 1e-12);
        assert!(o.a_at(0).is_none());
    }

    #[test]
    fn empty_origins() {
        let o = deviation_origins(5.0, 12.0, 0.025, 0);
        assert!(o.is_empty());
    }

    #[test]
    fn black_region_predicate() {
        assert!(is_black_region(4.8, 12.0, 0.025, DEFAULT_BLACK_REGION_TOL));
        assert!(!is_black_region(5.0, 12.0, 0.025, DEFAULT_BLACK_REGION_TOL));
        assert!(is_black_region(0.3, 12.0, 0.025, DEFAULT_BLACK_REGION_TOL));
        assert!(!is_black_region(0.1, 12.0, 0.025, DEFAULT_BLACK_REGION_TOL));
    }

    fn with(field: FieldSpec) -> ValidConfig {
        let mut cfg = SimConfig::appendix();
        cfg.field = field;
        validate_config(cfg).unwrap()
    }

    fn launch(alpha: f64) -> ParticleState {
        ParticleState::new(Vec2::new(-5.0, 0.0), Vec2::from_polar(12.0, alpha))
    }

    #[test]
    fn classical_free_flight() {
        let cfg = with(FieldSpec::Zero);
        let alpha = 10f64.to_radians();
        let y = classical_reference(&launch(alpha), &cfg).unwrap();
        assert!((y - 15.0 * alpha.tan()).abs() < 1e-12);
        assert_eq!(classical_reference(&launch(0.0), &cfg).unwrap(), 0.0);
    }

    #[test]
    fn classical_band_closed_form() {
        let cfg = with(FieldSpec::BandConstant {
            f0: -2.0 * PI,
            delta: 0.5,
        });
        let y = classical_reference(&launch(10f64.to_radians()), &cfg).unwrap();
        // Piecewise solution evaluated with 40-digit arithmetic.
        assert!((y - 2.729_922_968_022_718_4).abs() < 1e-12, "{y}");
    }

    #[test]
    fn classical_band_matches_fine_discrete_run() {
        let cfg = with(FieldSpec::BandConstant {
            f0: -2.0 * PI,
            delta: 0.5,
        });
        let fine = cfg
            .modify(|c| {
                c.tau = 1e-6;
                c.max_steps = None;
            })
            .unwrap();
        let start = launch(10f64.to_radians());
        let exact = classical_reference(&start, &cfg).unwrap();
        let discrete = propagate_to_detector(&start, &fine).unwrap().y_impact;
        assert!((exact - discrete).abs() < 1e-4, "{exact} vs {discrete}");
    }

    #[test]
    fn classical_turnaround() {
        let cfg = with(FieldSpec::HalfPlaneConstant { f0: -50.0 });
        assert_eq!(
            classical_reference(&launch(0.0), &cfg),
            Err(AnalyticsError::NeverReachesDetector)
        );
    }

    #[test]
    fn classical_is_tau_free() {
        let cfg = with(FieldSpec::HalfPlaneConstant { f0: -3.0 });
        let other = cfg.modify(|c| c.tau = 0.001).unwrap();
        let s = launch(0.2);
        assert_eq!(
            classical_reference(&s, &cfg).unwrap(),
            classical_reference(&s, &other).unwrap()
        );
    }

    #[test]
    fn gaussian_reference_uses_fine_integration() {
        let cfg = with(FieldSpec::GaussianBand {
            f0: -2.0 * PI,
            sigma: 4.0,
        });
        let s = launch(0.15);
        let reference = classical_reference(&s, &cfg).unwrap();
        let coarse = propagate_to_detector(&s, &cfg).unwrap().y_impact;
        assert!((reference - coarse).abs() < 0.05);
        assert_ne!(reference, coarse);
    }

    #[test]
    fn minima_are_odd_symmetric() {
        let cfg = validate_config(SimConfig::appendix()).unwrap();
        let ys = predict_minima(&cfg, 3).unwrap();
        assert_eq!(ys.len(), 6);
        for k in 0..3 {
            assert_eq!(ys[k], -ys[5 - k]);
        }
        assert!(predict_minima(&cfg, 0).unwrap().is_empty());
    }

    #[test]
    fn minima_need_a_boundary() {
        let cfg = with(FieldSpec::Zero);
        assert_eq!(
            predict_minima(&cfg, 2),
            Err(AnalyticsError::NoForceBoundary)
        );
    }

    proptest! {
        #[test]
        fn circle_identity(d in 0.1..50.0f64, v0 in 0.1..50.0f64, tau in 1e-4..0.5f64, i in 1i64..20) {
            let o = deviation_origins(d, v0, tau, 20);
            let a = o.a_at(i).unwrap();
            let r = v0 * tau * (o.n0 as f64 + i as f64);
            prop_assert!(((a * a + d * d) - r * r).abs() <= 1e-12 * r * r);
            prop_assert_eq!(o.a_at(-i).unwrap(), -a);
            let phi = o.phi_at(i).unwrap();
            prop_assert!(phi > 0.0 && phi < PI / 2.0);
        }

        #[test]
        fn n0_brackets_distance(d in 0.01..100.0f64, v0 in 0.1..50.0f64, tau in 1e-4..0.5f64) {
            let n0 = compute_n0(d, v0, tau) as f64;
            let step = v0 * tau;
            prop_assert!(step * n0 <= d * (1.0 + 1e-9));
            prop_assert!(d < step * (n0 + 1.0));
        }

        #[test]
        fn origins_increase(d in 0.1..50.0f64, v0 in 0.1..50.0f64, tau in 1e-4..0.5f64) {
            let o = deviation_origins(d, v0, tau, 10);
            let pos: Vec<f64> = (1..=10).map(|i| o.a_at(i).unwrap()).collect();
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
