//! Parallel trajectory batches and parameter sweeps.
//!
//! Work is split into contiguous index chunks. Each chunk is processed on the
//! rayon pool and the results are collected in index order, so every output
//! is identical for any worker count.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::{black_region_for, classical_reference, AnalyticsError};
use crate::dynamics::{propagate_to_detector, trace, DynamicsError, ImpactRecord};
use crate::emission::EmissionStream;
use crate::histogram::{accumulate, contrast, Contrast, DensityGrid, Histogram};
use crate::model::{ConfigErrors, FieldSpec, ParticleState, ValidConfig, Vec2};

const CHUNK: u64 = 1024;

/// Particles that never produced an impact, by cause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FailureTally {
    pub max_steps: u64,
    pub absorbed: u64,
    pub non_finite: u64,
}

impl FailureTally {
    pub fn total(&self) -> u64 {
        self.max_steps + self.absorbed + self.non_finite
    }

    fn record(&mut self, err: &DynamicsError) {
        match err {
            DynamicsError::MaxStepsExceeded { .. } => self.max_steps += 1,
            DynamicsError::Absorbed { .. } => self.absorbed += 1,
            DynamicsError::NonFiniteState { .. } => self.non_finite += 1,
        }
    }

    fn merge(&mut self, other: &FailureTally) {
        self.max_steps += other.max_steps;
        self.absorbed += other.absorbed;
        self.non_finite += other.non_finite;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchResult {
    /// One record per successful particle, ordered by emission index.
    pub impacts: Vec<ImpactRecord>,
    pub failures: FailureTally,
}

/// Builds a pool with `workers` threads (0 means rayon's default).
fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to start worker pool")
}

fn chunks(total: u64) -> Vec<(u64, u64)> {
    (0..total.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(total)))
        .collect()
}

/// Propagates every emitted particle to the detector.
pub fn run_batch(cfg: &ValidConfig, workers: usize) -> BatchResult {
    let stream = EmissionStream::new(cfg);
    let parts: Vec<BatchResult> = pool(workers).install(|| {
        chunks(stream.total())
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut part = BatchResult::default();
                for i in lo..hi {
                    let start = stream.emit(i).expect("index within stream");
                    match propagate_to_detector(&start, cfg) {
                        Ok(hit) => part.impacts.push(hit.with_index(i)),
                        Err(e) => part.failures.record(&e),
                    }
                }
                part
            })
            .collect()
    });
    let mut out = BatchResult::default();
    for p in parts {
        out.impacts.extend(p.impacts);
        out.failures.merge(&p.failures);
    }
    out
}

/// Rasterizes the trajectories of every successful particle.
pub fn run_density(cfg: &ValidConfig, workers: usize, width: usize, height: usize) -> DensityGrid {
    let stream = EmissionStream::new(cfg);
    let parts: Vec<DensityGrid> = pool(workers).install(|| {
        chunks(stream.total())
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut grid = DensityGrid::new(&cfg.geometry, width, height);
                for i in lo..hi {
                    let start = stream.emit(i).expect("index within stream");
                    if let Ok((t, _)) = trace(&start, cfg) {
                        grid.add_trajectory(&t);
                    }
                }
                grid
            })
            .collect()
    });
    let mut grid = DensityGrid::new(&cfg.geometry, width, height);
    for p in &parts {
        grid.merge(p);
    }
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    Tau,
    D,
    F0,
    Sigma,
    V0,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [
        SweepParameter::Tau,
        SweepParameter::D,
        SweepParameter::F0,
        SweepParameter::Sigma,
        SweepParameter::V0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Tau => "tau",
            SweepParameter::D => "d",
            SweepParameter::F0 => "F0",
            SweepParameter::Sigma => "sigma",
            SweepParameter::V0 => "v0",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = SweepError;
    fn from_str(s: &str) -> Result<Self, SweepError> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SweepError::UnknownParameter(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SweepError {
    #[error("unknown sweep parameter `{0}` (valid: {names})", names = SweepParameter::valid_names())]
    UnknownParameter(String),
    #[error("sweep values must be strictly monotone and finite")]
    NotMonotone,
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("parameter `{0}` does not apply to the configured field")]
    NotApplicable(SweepParameter),
    #[error("invalid config: {0}")]
    Config(ConfigErrors),
    #[error("contrast undefined: no particle reached the detector")]
    NoImpacts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    parameter: SweepParameter,
    values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::NoValues);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SweepError::NotMonotone);
        }
        let up = values.windows(2).all(|w| w[0] < w[1]);
        let down = values.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(SweepError::NotMonotone);
        }
        Ok(SweepAxis { parameter, values })
    }

    pub fn parameter(&self) -> SweepParameter {
        self.parameter
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `base` with `parameter` set to `value`.
pub fn substitute(
    base: &ValidConfig,
    parameter: SweepParameter,
    value: f64,
) -> Result<ValidConfig, SweepError> {
    let mut cfg = *base.config();
    match parameter {
        SweepParameter::Tau => cfg.tau = value,
        SweepParameter::D => cfg.geometry.d = value,
        SweepParameter::V0 => cfg.v0 = value,
        SweepParameter::F0 => {
            cfg.field = match cfg.field {
                FieldSpec::Zero => return Err(SweepError::NotApplicable(parameter)),
                FieldSpec::HalfPlaneConstant { .. } => FieldSpec::HalfPlaneConstant { f0: value },
                FieldSpec::BandConstant { delta, .. } => {
                    FieldSpec::BandConstant { f0: value, delta }
                }
                FieldSpec::GaussianBand { sigma, .. } => {
                    FieldSpec::GaussianBand { f0: value, sigma }
                }
            }
        }
        SweepParameter::Sigma => match &mut cfg.field {
            FieldSpec::GaussianBand { sigma, .. } => *sigma = value,
            _ => return Err(SweepError::NotApplicable(parameter)),
        },
    }
    crate::model::validate_config(cfg).map_err(SweepError::Config)
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub bin_width: f64,
    pub origin: f64,
    pub smoothing_bins: f64,
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            bin_width: 0.025,
            origin: 0.0,
            smoothing_bins: 1.0,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub config: ValidConfig,
    pub histogram: Histogram,
    pub contrast: Contrast,
    pub failures: FailureTally,
    pub black_region: bool,
    pub wall_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepEntry {
    pub value: f64,
    pub outcome: Result<SweepPoint, SweepError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub entries: Vec<SweepEntry>,
}

/// Batch, histogram and contrast for one config.
pub fn run_point(cfg: &ValidConfig, opts: &SweepOptions) -> Result<SweepPoint, SweepError> {
    let started = Instant::now();
    let batch = run_batch(cfg, opts.workers);
    let histogram = accumulate(&batch.impacts, opts.bin_width, opts.origin);
    let contrast = contrast(&histogram, opts.smoothing_bins).map_err(|_| SweepError::NoImpacts)?;
    Ok(SweepPoint {
        config: *cfg,
        histogram,
        contrast,
        failures: batch.failures,
        black_region: black_region_for(cfg),
        wall_time: started.elapsed(),
    })
}

/// Runs one batch per axis value. A failing value is recorded and the sweep
/// moves on.
pub fn run_sweep(base: &ValidConfig, axis: &SweepAxis, opts: &SweepOptions) -> SweepResult {
    let entries = axis
        .values()
        .iter()
        .map(|&value| SweepEntry {
            value,
            outcome: substitute(base, axis.parameter(), value)
                .and_then(|cfg| run_point(&cfg, opts)),
        })
        .collect();
    SweepResult {
        parameter: axis.parameter(),
        entries,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub tau: f64,
    pub y_discrete: f64,
    pub y_classical: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln tau`, per angle. `None`
    /// when fewer than two errors are nonzero.
    pub orders: Vec<(f64, Option<f64>)>,
}

impl ConvergenceStudy {
    /// `error(tau_k) / error(tau_{k+1})` along the tau list for one angle.
    pub fn error_ratios(&self, alpha: f64) -> Vec<f64> {
        let errs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.alpha == alpha)
            .map(|r| r.error)
            .collect();
        errs.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|&(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Discrete impact error against the continuous-time reference for each
/// `(alpha, tau)` pair, launched from the point source.
pub fn convergence_study(
    base: &ValidConfig,
    alphas: &[f64],
    tau_values: &[f64],
) -> Result<ConvergenceStudy, AnalyticsError> {
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for &alpha in alphas {
        let start = ParticleState::new(base.geometry.source(), Vec2::from_polar(base.v0, alpha));
        let y_classical = classical_reference(&start, base)?;
        let mut points = Vec::new();
        for &tau in tau_values {
            let cfg = base
                .modify(|c| {
                    c.tau = tau;
                    c.max_steps = None;
                })
                .map_err(|_| AnalyticsError::InvalidTau(tau))?;
            let y_discrete = propagate_to_detector(&start, &cfg)?.y_impact;
            let error = (y_discrete - y_classical).abs();
            points.push((tau, error));
            rows.push(ConvergenceRow {
                alpha,
                tau,
                y_discrete,
                y_classical,
                error,
            });
        }
        orders.push((alpha, log_log_slope(&points)));
    }
    Ok(ConvergenceStudy { rows, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_config, EmissionSpec, SimConfig};
    use std::f64::consts::PI;

    fn small_cfg() -> ValidConfig {
        let mut cfg = SimConfig::appendix();
        cfg.emission = EmissionSpec::AngleGrid {
            alpha_min: (-30f64).to_radians(),
            alpha_max: 30f64.to_radians(),
            alpha_step: 0.05f64.to_radians(),
        };
        validate_config(cfg).unwrap()
    }

    #[test]
    fn batch_is_index_ordered() {
        let b = run_batch(&small_cfg(), 3);
        assert!(b
            .impacts
            .windows(2)
            .all(|w| w[0].emission_index < w[1].emission_index));
        assert_eq!(b.impacts.len() as u64 + b.failures.total(), 1201);
    }

    #[test]
    fn single_particle_batch() {
        let mut cfg = SimConfig::appendix();
        cfg.emission = EmissionSpec::AngleGrid {
            alpha_min: 0.1,
            alpha_max: 0.2,
            alpha_step: 1.0,
        };
        let cfg = validate_config(cfg).unwrap();
        let b = run_batch(&cfg, 1);
        let start = EmissionStream::new(&cfg).emit(0).unwrap();
        assert_eq!(
            b.impacts,
            vec![propagate_to_detector(&start, &cfg).unwrap()]
        );
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cfg = small_cfg();
        let one = run_batch(&cfg, 1);
        for w in [2, 5] {
            assert_eq!(run_batch(&cfg, w), one);
        }
        assert_eq!(run_density(&cfg, 1, 40, 20), run_density(&cfg, 4, 40, 20));
    }

    #[test]
    fn axis_parsing_and_checks() {
        assert_eq!(
            "tau".parse::<SweepParameter>().unwrap(),
            SweepParameter::Tau
        );
        assert_eq!("f0".parse::<SweepParameter>().unwrap(), SweepParameter::F0);
        let err = "omega".parse::<SweepParameter>().unwrap_err();
        assert!(err.to_string().contains("tau, d, F0, sigma, v0"));
        assert_eq!(
            SweepAxis::new(SweepParameter::Tau, vec![0.1, 0.3, 0.2]),
            Err(SweepError::NotMonotone)
        );
        assert!(SweepAxis::new(SweepParameter::Tau, vec![0.1, 0.05]).is_ok());
        assert_eq!(
            SweepAxis::new(SweepParameter::D, vec![]),
            Err(SweepError::NoValues)
        );
    }

    #[test]
    fn single_value_sweep_equals_batch() {
        let cfg = small_cfg();
        let axis = SweepAxis::new(SweepParameter::Tau, vec![0.025]).unwrap();
        let opts = SweepOptions {
            workers: 2,
            ..SweepOptions::default()
        };
        let res = run_sweep(&cfg, &axis, &opts);
        let point = res.entries[0].outcome.as_ref().unwrap();
        let batch = run_batch(&cfg, 1);
        assert_eq!(point.histogram, accumulate(&batch.impacts, 0.025, 0.0));
        assert_eq!(point.failures, batch.failures);
    }

    #[test]
    fn invalid_values_do_not_stop_the_sweep() {
        let cfg = small_cfg();
        let axis = SweepAxis::new(SweepParameter::Sigma, vec![1.0]).unwrap();
        let res = run_sweep(&cfg, &axis, &SweepOptions::default());
        assert_eq!(
            res.entries[0].outcome,
            Err(SweepError::NotApplicable(SweepParameter::Sigma))
        );
        let axis = SweepAxis::new(SweepParameter::Tau, vec![-0.1, 0.025]).unwrap();
        let res = run_sweep(&cfg, &axis, &SweepOptions::default());
        assert!(matches!(res.entries[0].outcome, Err(SweepError::Config(_))));
        assert!(res.entries[1].outcome.is_ok());
    }

    #[test]
    fn d_axis_flags_black_regions() {
        let mut cfg = *small_cfg().config();
        cfg.field = FieldSpec::HalfPlaneConstant { f0: -2.0 * PI };
        let cfg = validate_config(cfg).unwrap();
        let axis = SweepAxis::new(SweepParameter::D, vec![4.5, 4.6, 4.8, 5.0, 5.1]).unwrap();
        let res = run_sweep(&cfg, &axis, &SweepOptions::default());
        let flags: Vec<bool> = res
            .entries
            .iter()
            .map(|e| e.outcome.as_ref().unwrap().black_region)
            .collect();
        assert_eq!(flags, vec![true, false, true, false, true]);
    }

    #[test]
    fn zero_field_converges_exactly() {
        let mut cfg = SimConfig::appendix();
        cfg.field = FieldSpec::Zero;
        let cfg = validate_config(cfg).unwrap();
        let alphas = [0.0, 5f64.to_radians(), 20f64.to_radians()];
        let study = convergence_study(&cfg, &alphas, &[0.025, 0.0125, 0.00625]).unwrap();
        assert!(study.rows.iter().all(|r| r.error < 1e-9));
        assert!(study
            .rows
            .iter()
            .filter(|r| r.alpha == 0.0)
            .all(|r| r.error == 0.0));
    }

    #[test]
    fn band_error_halves_with_tau() {
        let cfg = validate_config(SimConfig::appendix()).unwrap();
        let alpha = 10f64.to_radians();
        let taus: Vec<f64> = (0..4).map(|k| 0.025 / f64::powi(2.0, k)).collect();
        let study = convergence_study(&cfg, &[alpha], &taus).unwrap();
        let slope = study.orders[0].1.unwrap();
        assert!((0.5..1.5).contains(&slope), "slope {slope}");
        assert_eq!(study.error_ratios(alpha).len(), 3);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&t| (t, 3.0 * t * t))
            .collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
    }
}
