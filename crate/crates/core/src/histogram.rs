//! Detector histograms, Gaussian smoothing, interference contrast and the 2D
//! trajectory-density raster.
//!
//! Binning is by direct index, `floor((y - origin) / bin_width)`, so results
//! never depend on the order impacts arrive in. Partial histograms and grids
//! merge by element-wise addition.

use thiserror::Error;

use crate::dynamics::{ImpactRecord, Trajectory};
use crate::model::Geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum HistogramError {
    #[error("histogram has no counts")]
    EmptyHistogram,
}

/// Fixed-width bins. Bin `k` (absolute) covers
/// `[anchor + k w, anchor + (k + 1) w)`; `counts[0]` is bin `offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    anchor: f64,
    bin_width: f64,
    offset: i64,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(origin: f64, bin_width: f64) -> Self {
        assert!(bin_width > 0.0, "bin width must be positive");
        Histogram {
            anchor: origin,
            bin_width,
            offset: 0,
            counts: Vec::new(),
        }
    }

    /// Left edge of the first bin.
    pub fn origin(&self) -> f64 {
        self.anchor + self.offset as f64 * self.bin_width
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Absolute index of the first stored bin.
    pub fn first_bin(&self) -> i64 {
        self.offset
    }

    /// Absolute bin index of `y`.
    pub fn bin_of(&self, y: f64) -> i64 {
        ((y - self.anchor) / self.bin_width).floor() as i64
    }

    /// Count in absolute bin `k`, zero outside the stored range.
    pub fn count_at(&self, k: i64) -> u64 {
        let i = k - self.offset;
        if i < 0 {
            return 0;
        }
        self.counts.get(i as usize).copied().unwrap_or(0)
    }

    /// `(left edge, right edge)` of stored bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let k = self.offset + i as i64;
        (
            self.anchor + k as f64 * self.bin_width,
            self.anchor + (k + 1) as f64 * self.bin_width,
        )
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.anchor + (self.offset + i as i64) as f64 * self.bin_width + 0.5 * self.bin_width
    }

    fn ensure_range(&mut self, lo: i64, hi: i64) {
        if self.counts.is_empty() {
            self.offset = lo;
            self.counts = vec![0; (hi - lo + 1) as usize];
            return;
        }
        let cur_hi = self.offset + self.counts.len() as i64 - 1;
        if lo < self.offset {
            let mut grown = vec![0; (self.offset - lo) as usize];
            grown.extend_from_slice(&self.counts);
            self.counts = grown;
            self.offset = lo;
        }
        if hi > cur_hi {
            self.counts
                .resize(self.counts.len() + (hi - cur_hi) as usize, 0);
        }
    }

    pub fn add(&mut self, y: f64) {
        let k = self.bin_of(y);
        self.ensure_range(k, k);
        self.counts[(k - self.offset) as usize] += 1;
    }

    /// Adds the counts of `other`, which must share anchor and bin width.
    pub fn merge(&mut self, other: &Histogram) {
        assert!(
            self.anchor == other.anchor && self.bin_width == other.bin_width,
            "merging histograms with different binning"
        );
        if other.counts.is_empty() {
            return;
        }
        let hi = other.offset + other.counts.len() as i64 - 1;
        self.ensure_range(other.offset, hi);
        let shift = (other.offset - self.offset) as usize;
        for (dst, src) in self.counts[shift..].iter_mut().zip(&other.counts) {
            *dst += src;
        }
    }

    pub fn as_values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Bins `values` starting at `origin`; the range grows to hold every value.
pub fn accumulate_values(values: &[f64], bin_width: f64, origin: f64) -> Histogram {
    let mut h = Histogram::new(origin, bin_width);
    if values.is_empty() {
        return h;
    }
    let (mut lo, mut hi) = (0i64, i64::MIN);
    let bins: Vec<i64> = values.iter().map(|&y| h.bin_of(y)).collect();
    for &k in &bins {
        lo = lo.min(k);
        hi = hi.max(k);
    }
    h.ensure_range(lo, hi);
    for k in bins {
        h.counts[(k - h.offset) as usize] += 1;
    }
    h
}

pub fn accumulate(impacts: &[ImpactRecord], bin_width: f64, origin: f64) -> Histogram {
    let ys: Vec<f64> = impacts.iter().map(|r| r.y_impact).collect();
    accumulate_values(&ys, bin_width, origin)
}

/// Real-valued histogram, produced by smoothing.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedHistogram {
    pub origin: f64,
    pub bin_width: f64,
    pub values: Vec<f64>,
}

impl SmoothedHistogram {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn gaussian_kernel(sigma_bins: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_bins).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|j| {
            let t = j as f64 / sigma_bins;
            (-0.5 * t * t).exp()
        })
        .collect();
    let norm: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= norm);
    k
}

fn convolve_values(values: &[f64], sigma_bins: f64) -> (Vec<f64>, usize) {
    let kernel = gaussian_kernel(sigma_bins);
    let radius = kernel.len() / 2;
    let mut out = vec![0.0; values.len() + 2 * radius];
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (j, w) in kernel.iter().enumerate() {
            out[i + j] += v * w;
        }
    }
    (out, radius)
}

/// Convolution with a normalized Gaussian of width `sigma_bins` (in bins),
/// truncated at 4 sigma. The output is padded by the kernel radius on both
/// sides so no mass leaves the range.
pub fn convolve_gaussian(h: &Histogram, sigma_bins: f64) -> SmoothedHistogram {
    assert!(sigma_bins > 0.0, "sigma must be positive");
    let (values, radius) = convolve_values(&h.as_values(), sigma_bins);
    SmoothedHistogram {
        origin: h.origin() - radius as f64 * h.bin_width,
        bin_width: h.bin_width,
        values,
    }
}

/// Runs of equal values as `(start, end_inclusive, value)`.
fn plateaus(values: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut runs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match runs.last_mut() {
            Some(run) if run.2 == v => run.1 = i,
            _ => runs.push((i, i, v)),
        }
    }
    runs
}

/// Local maxima of `values`, bins outside the range counting as zero.
/// A plateau is one maximum located at its left edge.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let runs = plateaus(values);
    (0..runs.len())
        .filter(|&j| {
            let left = if j == 0 { 0.0 } else { runs[j - 1].2 };
            let right = runs.get(j + 1).map_or(0.0, |r| r.2);
            runs[j].2 > left && runs[j].2 > right
        })
        .map(|j| runs[j].0)
        .collect()
}

/// Interior local minima (never the first or last bin). Plateaus report
/// their left edge.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let runs = plateaus(values);
    (1..runs.len().saturating_sub(1))
        .filter(|&j| runs[j].2 < runs[j - 1].2 && runs[j].2 < runs[j + 1].2)
        .map(|j| runs[j].0)
        .collect()
}

/// Fraction of the global maximum a peak must exceed to be counted.
pub const PEAK_FLOOR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contrast {
    pub n_maxima: usize,
    /// Largest counted maximum over the deepest minimum between counted
    /// maxima. `f64::INFINITY` when that minimum is zero, 1 with fewer than
    /// two maxima.
    pub peak_to_valley: f64,
}

/// Contrast of a real-valued profile.
pub fn contrast_of(values: &[f64]) -> Result<Contrast, HistogramError> {
    let global = values.iter().copied().fold(0.0f64, f64::max);
    if global <= 0.0 {
        return Err(HistogramError::EmptyHistogram);
    }
    let floor = PEAK_FLOOR * global;
    let peaks: Vec<usize> = local_maxima(values)
        .into_iter()
        .filter(|&i| values[i] > floor)
        .collect();
    let n_maxima = peaks.len();
    if n_maxima < 2 {
        return Ok(Contrast {
            n_maxima,
            peak_to_valley: 1.0,
        });
    }
    let top = peaks.iter().map(|&i| values[i]).fold(0.0f64, f64::max);
    let valley = peaks
        .windows(2)
        .map(|w| {
            values[w[0]..=w[1]]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);
    let peak_to_valley = if valley <= 0.0 {
        f64::INFINITY
    } else {
        top / valley
    };
    Ok(Contrast {
        n_maxima,
        peak_to_valley,
    })
}

/// Counts maxima after smoothing with a Gaussian of `smoothing_bins`
/// (0 disables smoothing).
pub fn contrast(h: &Histogram, smoothing_bins: f64) -> Result<Contrast, HistogramError> {
    if h.total() == 0 {
        return Err(HistogramError::EmptyHistogram);
    }
    if smoothing_bins > 0.0 {
        contrast_of(&convolve_gaussian(h, smoothing_bins).values)
    } else {
        contrast_of(&h.as_values())
    }
}

/// Row-major counts of trajectory points over `[-d, l] x [-R, R]`.
/// Row 0 is the top of the frame (`y = R`).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub width: usize,
    pub height: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub cells: Vec<u64>,
    /// Points that fell outside the frame.
    pub dropped: u64,
}

impl DensityGrid {
    pub fn new(geometry: &Geometry, width: usize, height: usize) -> Self {
        assert!(
            width >= 2 && height >= 2,
            "density grid must be at least 2x2"
        );
        DensityGrid {
            width,
            height,
            x_range: (-geometry.d, geometry.l),
            y_range: (-geometry.r, geometry.r),
            cells: vec![0; width * height],
            dropped: 0,
        }
    }

    fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        if !(x >= x0 && x <= x1 && y >= y0 && y <= y1) {
            return None;
        }
        let col = (((x - x0) / (x1 - x0)) * self.width as f64).floor() as usize;
        let row = (((y1 - y) / (y1 - y0)) * self.height as f64).floor() as usize;
        Some(row.min(self.height - 1) * self.width + col.min(self.width - 1))
    }

    pub fn add_trajectory(&mut self, t: &Trajectory) {
        for p in &t.points {
            match self.cell_of(p.x, p.y) {
                Some(c) => self.cells[c] += 1,
                None => self.dropped += 1,
            }
        }
    }

    pub fn merge(&mut self, other: &DensityGrid) {
        assert!(
            self.width == other.width
                && self.height == other.height
                && self.x_range == other.x_range
                && self.y_range == other.y_range,
            "merging density grids with different frames"
        );
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        self.dropped += other.dropped;
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.cells[r * self.width..(r + 1) * self.width]
    }
}

pub fn density_grid(
    trajectories: &[Trajectory],
    geometry: &Geometry,
    width: usize,
    height: usize,
) -> DensityGrid {
    let mut g = DensityGrid::new(geometry, width, height);
    for t in trajectories {
        g.add_trajectory(t);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vec2;
    use proptest::prelude::*;

    fn impacts(ys: &[f64]) -> Vec<ImpactRecord> {
        ys.iter()
            .enumerate()
            .map(|(i, &y)| ImpactRecord {
                y_impact: y,
                emission_index: i as u64,
                steps_taken: 1,
            })
            .collect()
    }

    #[test]
    fn empty_input() {
        let h = accumulate(&[], 0.025, 0.0);
        assert!(h.counts().iter().all(|&c| c == 0));
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn small_example() {
        let h = accumulate(&impacts(&[0.0, 0.01, 0.03]), 0.025, 0.0);
        assert_eq!(h.counts(), &[2, 1]);
        assert_eq!(h.origin(), 0.0);
    }

    #[test]
    fn range_extends_below_origin() {
        let h = accumulate(&impacts(&[-0.06, 0.01]), 0.025, 0.0);
        assert_eq!(h.first_bin(), -3);
        assert_eq!(h.counts(), &[1, 0, 0, 1]);
        assert!((h.origin() + 0.075).abs() < 1e-15);
        assert_eq!(h.total(), 2);
    }

    #[test]
    fn zero_origin_bins_mirror() {
        let ys = [0.31, 0.0125, 1.71, 2.23];
        let mirrored: Vec<f64> = ys.iter().map(|y| -y).collect();
        let h = accumulate_values(&ys, 0.025, 0.0);
        let m = accumulate_values(&mirrored, 0.025, 0.0);
        for k in -100..100 {
            assert_eq!(h.count_at(k), m.count_at(-1 - k), "k={k}");
        }
    }

    #[test]
    fn merge_matches_single_pass() {
        let ys: Vec<f64> = (0..500)
            .map(|i| ((i * 37) % 101) as f64 * 0.013 - 0.6)
            .collect();
        let whole = accumulate_values(&ys, 0.05, 0.0);
        let mut parts = accumulate_values(&ys[300..], 0.05, 0.0);
        parts.merge(&accumulate_values(&ys[..120], 0.05, 0.0));
        parts.merge(&accumulate_values(&ys[120..300], 0.05, 0.0));
        assert_eq!(whole, parts);
    }

    #[test]
    fn tiny_sigma_is_identity() {
        let h = accumulate_values(&[0.0, 0.1, 0.1, 0.3, 0.31], 0.05, 0.0);
        let s = convolve_gaussian(&h, 0.05);
        let pad = ((h.origin() - s.origin) / h.bin_width()).round() as usize;
        for (i, &c) in h.counts().iter().enumerate() {
            assert!((s.values[i + pad] - c as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn unit_impulse_gives_gaussian() {
        let h = accumulate_values(&[0.01], 1.0, 0.0);
        let sigma = 2.0;
        let s = convolve_gaussian(&h, sigma);
        assert_eq!(s.values.len(), 17);
        let norm: f64 = (-8..=8)
            .map(|j: i32| (-0.5 * (j as f64 / sigma).powi(2)).exp())
            .sum();
        for (i, v) in s.values.iter().enumerate() {
            let j = i as f64 - 8.0;
            let expected = (-0.5 * (j / sigma).powi(2)).exp() / norm;
            assert!((v - expected).abs() < 1e-15);
        }
        // Centre sample of a unit-area Gaussian with sigma 2 is about 1/(2 sqrt(2 pi)).
        assert!((s.values[8] - 0.199_471_140_2).abs() < 1e-4);
    }

    #[test]
    fn single_peak() {
        let c = contrast_of(&[1.0, 3.0, 7.0, 4.0, 2.0]).unwrap();
        assert_eq!(c.n_maxima, 1);
        assert_eq!(c.peak_to_valley, 1.0);
    }

    #[test]
    fn two_peaks() {
        let c = contrast_of(&[0.0, 10.0, 2.0, 10.0, 0.0]).unwrap();
        assert_eq!(c.n_maxima, 2);
        assert_eq!(c.peak_to_valley, 5.0);
    }

    #[test]
    fn zero_valley_is_infinite() {
        let c = contrast_of(&[5.0, 0.0, 4.0]).unwrap();
        assert_eq!(c.n_maxima, 2);
        assert!(c.peak_to_valley.is_infinite());
    }

    #[test]
    fn flat_profile_is_one_plateau() {
        let c = contrast_of(&[3.0; 6]).unwrap();
        assert_eq!(c.n_maxima, 1);
        assert_eq!(local_maxima(&[3.0; 6]), vec![0]);
        assert_eq!(local_maxima(&[1.0, 4.0, 4.0, 4.0, 1.0]), vec![1]);
    }

    #[test]
    fn small_bumps_below_floor_are_ignored() {
        let c = contrast_of(&[100.0, 1.0, 2.0, 1.0, 0.0]).unwrap();
        assert_eq!(c.n_maxima, 1);
    }

    #[test]
    fn minima_skip_edges() {
        assert_eq!(local_minima(&[0.0, 5.0, 1.0, 1.0, 4.0, 0.0]), vec![2]);
    }

    #[test]
    fn empty_contrast() {
        let h = Histogram::new(0.0, 0.1);
        assert_eq!(contrast(&h, 1.0), Err(HistogramError::EmptyHistogram));
    }

    #[test]
    fn axial_trajectory_fills_middle_row() {
        let geometry = Geometry {
            d: 5.0,
            l: 10.0,
            r: 5.0,
        };
        let t = Trajectory {
            points: (0..60)
                .map(|k| Vec2::new(-5.0 + 0.3 * k as f64, 0.0))
                .collect(),
        };
        let g = density_grid(&[t], &geometry, 30, 11);
        for r in 0..11 {
            let sum: u64 = g.row(r).iter().sum();
            if r == 5 {
                assert!(sum > 0);
            } else {
                assert_eq!(sum, 0, "row {r}");
            }
        }
        assert_eq!(g.total() + g.dropped, 60);
        assert_eq!(g.dropped, 9);
    }

    #[test]
    fn empty_grid() {
        let geometry = Geometry {
            d: 1.0,
            l: 1.0,
            r: 1.0,
        };
        let g = density_grid(&[], &geometry, 4, 4);
        assert!(g.cells.iter().all(|&c| c == 0));
    }

    #[test]
    fn grid_corners() {
        let geometry = Geometry {
            d: 1.0,
            l: 1.0,
            r: 1.0,
        };
        let t = Trajectory {
            points: vec![
                Vec2::new(-1.0, 1.0),
                Vec2::new(1.0, -1.0),
                Vec2::new(1.0001, 0.0),
            ],
        };
        let g = density_grid(&[t], &geometry, 4, 4);
        assert_eq!(g.cells[0], 1);
        assert_eq!(g.cells[15], 1);
        assert_eq!(g.dropped, 1);
    }

    proptest! {
        #[test]
        fn order_free(mut ys in proptest::collection::vec(-3.0..3.0f64, 0..200), seed in any::<u64>()) {
            let a = accumulate_values(&ys, 0.1, 0.0);
            // Deterministic shuffle.
            let n = ys.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ys.swap(i, (s >> 33) as usize % (i + 1));
            }
            let b = accumulate_values(&ys, 0.1, 0.0);
            prop_assert_eq!(a.total(), n as u64);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn smoothing_keeps_mass(ys in proptest::collection::vec(-3.0..3.0f64, 1..200), sigma in 0.05..6.0f64) {
            let h = accumulate_values(&ys, 0.1, 0.0);
            let s = convolve_gaussian(&h, sigma);
            let total = h.total() as f64;
            prop_assert!((s.total() - total).abs() <= 1e-6 * total);
        }
    }
}
