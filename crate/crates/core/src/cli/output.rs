//! Text renderings of run results: CSV tables and plain (P2) PGM images.

use std::fmt::Write as _;
use std::path::Path;

use crate::dynamics::ImpactRecord;
use crate::histogram::{DensityGrid, Histogram};

const PGM_MAXVAL: u64 = 255;
const PGM_LINE: usize = 70;

pub fn impacts_csv(impacts: &[ImpactRecord]) -> String {
    let mut out = String::from("emission_index,y_impact,steps_taken\n");
    for r in impacts {
        let _ = writeln!(out, "{},{},{}", r.emission_index, r.y_impact, r.steps_taken);
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in h.counts().iter().enumerate() {
        let (a, b) = h.bin_edges(i);
        let _ = writeln!(out, "{a},{b},{c}");
    }
    out
}

fn scale(v: u64, max: u64) -> u64 {
    if max == 0 {
        0
    } else {
        ((v as u128 * PGM_MAXVAL as u128) / max as u128) as u64
    }
}

/// Plain PGM with every sample scaled so that `max` maps to 255.
fn pgm(width: usize, height: usize, samples: impl Iterator<Item = u64>, max: u64) -> String {
    let mut out = format!("P2\n{width} {height}\n{PGM_MAXVAL}\n");
    let mut line = String::new();
    for (k, v) in samples.enumerate() {
        let tok = scale(v, max).to_string();
        let row_start = k % width == 0;
        if !line.is_empty() && (row_start || line.len() + 1 + tok.len() > PGM_LINE) {
            out.push_str(&line);
            out.push('\n');
            line.clear();
        }
        if !line.is_empty() {
            line.push(' ');
        }
        line.push_str(&tok);
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Detector histogram as an image: one column per bin, `height` identical rows.
pub fn histogram_pgm(h: &Histogram, height: usize) -> String {
    let counts = h.counts();
    let max = counts.iter().copied().max().unwrap_or(0);
    let width = counts.len().max(1);
    let row: Vec<u64> = if counts.is_empty() {
        vec![0]
    } else {
        counts.to_vec()
    };
    pgm(
        width,
        height,
        (0..height).flat_map(|_| row.iter().copied()),
        max,
    )
}

/// Trajectory density, top row at `y = R`.
pub fn density_pgm(g: &DensityGrid) -> String {
    let max = g.cells.iter().copied().max().unwrap_or(0);
    pgm(g.width, g.height, g.cells.iter().copied(), max)
}

/// Writes `files` into `dir`, creating it first.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
