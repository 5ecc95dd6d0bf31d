//! Flat `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Keys not given fall back to
//! the reference parameter set. Angles are read in degrees (`*_deg`) or
//! radians (`*_rad`); emitted configs always use radians so they re-parse to
//! the identical [`SimConfig`]. Keys under `tool.`, `run.`, `failures.` and
//! `output.` belong to run manifests and are ignored when loading.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{
    validate_config, AngleSampling, ConfigErrors, EmissionSpec, FieldSpec, SimConfig, ValidConfig,
};

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("keys `{0}` and `{1}` are mutually exclusive")]
    Conflict(String, String),
    #[error("invalid configuration: {0}")]
    Invalid(#[from] ConfigErrors),
}

/// Histogram and image settings that sit next to the simulation config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutputSettings {
    pub bin_width: f64,
    pub origin: f64,
    pub smoothing_bins: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub histogram_image_height: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            bin_width: 0.1,
            origin: 0.0,
            smoothing_bins: 1.0,
            image_width: 600,
            image_height: 400,
            histogram_image_height: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub sim: ValidConfig,
    pub output: OutputSettings,
    pub threads: Option<usize>,
}

/// Bundled reference configuration.
pub const APPENDIX_CFG: &str = include_str!("../../../../configs/appendix.cfg");

const SIM_KEYS: &[&str] = &[
    "geometry.d",
    "geometry.l",
    "geometry.r",
    "field.kind",
    "field.f0",
    "field.q",
    "field.delta",
    "field.sigma",
    "emission.kind",
    "emission.angles",
    "emission.alpha_min_deg",
    "emission.alpha_max_deg",
    "emission.alpha_step_deg",
    "emission.alpha_min_rad",
    "emission.alpha_max_rad",
    "emission.alpha_step_rad",
    "emission.count",
    "emission.seed",
    "emission.sigma_src",
    "tau",
    "v0",
    "mass",
    "max_steps",
    "slit.half_width",
    "histogram.bin_width",
    "histogram.origin",
    "histogram.smoothing_bins",
    "image.width",
    "image.height",
    "image.histogram_height",
    "threads",
];

const MANIFEST_PREFIXES: &[&str] = &["tool.", "run.", "failures.", "output."];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigFileError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigFileError::Syntax { line });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigFileError::Syntax { line });
            }
            if MANIFEST_PREFIXES.iter().any(|p| key.starts_with(p)) {
                continue;
            }
            if !SIM_KEYS.contains(&key) {
                return Err(ConfigFileError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if map
                .insert(key.to_string(), (line, value.to_string()))
                .is_some()
            {
                return Err(ConfigFileError::Duplicate {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(Entries { map })
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigFileError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((line, value)) => value
                .parse()
                .map(Some)
                .map_err(|_| ConfigFileError::BadValue {
                    line: *line,
                    key: key.to_string(),
                    value: value.clone(),
                }),
        }
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, ConfigFileError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn required(&self, key: &'static str) -> Result<f64, ConfigFileError> {
        self.get(key)?.ok_or(ConfigFileError::Missing(key))
    }

    fn word(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn bad(&self, key: &str) -> ConfigFileError {
        let (line, value) = self.map[key].clone();
        ConfigFileError::BadValue {
            line,
            key: key.to_string(),
            value,
        }
    }

    /// Angle from `<stem>_rad` or `<stem>_deg`.
    fn angle(&self, stem: &str, default: f64) -> Result<f64, ConfigFileError> {
        let rad = format!("{stem}_rad");
        let deg = format!("{stem}_deg");
        match (self.has(&rad), self.has(&deg)) {
            (true, true) => Err(ConfigFileError::Conflict(rad, deg)),
            (true, false) => Ok(self.get(&rad)?.unwrap()),
            (false, true) => Ok(self.get::<f64>(&deg)?.unwrap().to_radians()),
            (false, false) => Ok(default),
        }
    }
}

fn field_from(e: &Entries, base: FieldSpec) -> Result<FieldSpec, ConfigFileError> {
    let default_f0 = match base {
        FieldSpec::Zero => 0.0,
        FieldSpec::HalfPlaneConstant { f0 }
        | FieldSpec::BandConstant { f0, .. }
        | FieldSpec::GaussianBand { f0, .. } => f0,
    };
    let f0 = match (e.has("field.f0"), e.has("field.q")) {
        (true, true) => {
            return Err(ConfigFileError::Conflict(
                "field.f0".into(),
                "field.q".into(),
            ))
        }
        (false, true) => 2.0 * PI * e.required("field.q")?,
        _ => e.num("field.f0", default_f0)?,
    };
    let kind = match e.word("field.kind") {
        None => "band",
        Some((_, k)) => k,
    };
    Ok(match kind {
        "zero" => FieldSpec::Zero,
        "half_plane" => FieldSpec::HalfPlaneConstant { f0 },
        "band" => FieldSpec::BandConstant {
            f0,
            delta: e.num("field.delta", 0.5)?,
        },
        "gaussian" => FieldSpec::GaussianBand {
            f0,
            sigma: e.required("field.sigma")?,
        },
        _ => return Err(e.bad("field.kind")),
    })
}

fn emission_from(e: &Entries, base: &SimConfig) -> Result<EmissionSpec, ConfigFileError> {
    let (dmin, dmax) = base.emission.angles().range();
    let alpha_min = e.angle("emission.alpha_min", dmin)?;
    let alpha_max = e.angle("emission.alpha_max", dmax)?;
    let grid = |e: &Entries| -> Result<AngleSampling, ConfigFileError> {
        Ok(AngleSampling::Grid {
            alpha_min,
            alpha_max,
            alpha_step: e.angle("emission.alpha_step", 0.01f64.to_radians())?,
        })
    };
    let random = |e: &Entries| -> Result<AngleSampling, ConfigFileError> {
        Ok(AngleSampling::Random {
            alpha_min,
            alpha_max,
            count: e
                .get("emission.count")?
                .ok_or(ConfigFileError::Missing("emission.count"))?,
        })
    };
    let seed: u64 = e.get("emission.seed")?.unwrap_or(0);
    let kind = e.word("emission.kind").map_or("grid", |(_, k)| k);
    Ok(match kind {
        "grid" => match grid(e)? {
            AngleSampling::Grid {
                alpha_min,
                alpha_max,
                alpha_step,
            } => EmissionSpec::AngleGrid {
                alpha_min,
                alpha_max,
                alpha_step,
            },
            AngleSampling::Random { .. } => unreachable!(),
        },
        "random" => match random(e)? {
            AngleSampling::Random {
                alpha_min,
                alpha_max,
                count,
            } => EmissionSpec::AngleRandom {
                alpha_min,
                alpha_max,
                count,
                seed,
            },
            AngleSampling::Grid { .. } => unreachable!(),
        },
        "gaussian_line" => {
            let angles = match e.word("emission.angles").map_or("grid", |(_, a)| a) {
                "grid" => grid(e)?,
                "random" => random(e)?,
                _ => return Err(e.bad("emission.angles")),
            };
            EmissionSpec::GaussianLine {
                sigma_src: e.required("emission.sigma_src")?,
                seed,
                angles,
            }
        }
        _ => return Err(e.bad("emission.kind")),
    })
}

/// Parses config text. Missing keys take the reference values.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigFileError> {
    let e = Entries::parse(text)?;
    let base = SimConfig::appendix();
    let mut sim = base;
    sim.geometry.d = e.num("geometry.d", base.geometry.d)?;
    sim.geometry.l = e.num("geometry.l", base.geometry.l)?;
    sim.geometry.r = e.num("geometry.r", base.geometry.r)?;
    sim.field = field_from(&e, base.field)?;
    sim.emission = emission_from(&e, &base)?;
    sim.tau = e.num("tau", base.tau)?;
    sim.v0 = e.num("v0", base.v0)?;
    sim.mass = e.num("mass", base.mass)?;
    sim.max_steps = e.get("max_steps")?;
    sim.slit_half_width = e.get("slit.half_width")?;

    let d = OutputSettings::default();
    let output = OutputSettings {
        bin_width: e.num("histogram.bin_width", d.bin_width)?,
        origin: e.num("histogram.origin", d.origin)?,
        smoothing_bins: e.num("histogram.smoothing_bins", d.smoothing_bins)?,
        image_width: e.get("image.width")?.unwrap_or(d.image_width),
        image_height: e.get("image.height")?.unwrap_or(d.image_height),
        histogram_image_height: e
            .get("image.histogram_height")?
            .unwrap_or(d.histogram_image_height),
    };
    check_output(&e, &output)?;
    let threads = e.get("threads")?;
    if threads == Some(0) {
        return Err(e.bad("threads"));
    }
    Ok(RunConfig {
        sim: validate_config(sim)?,
        output,
        threads,
    })
}

fn check_output(e: &Entries, o: &OutputSettings) -> Result<(), ConfigFileError> {
    let bad = |key: &str, ok: bool| {
        if ok || !e.has(key) {
            Ok(())
        } else {
            Err(e.bad(key))
        }
    };
    bad(
        "histogram.bin_width",
        o.bin_width > 0.0 && o.bin_width.is_finite(),
    )?;
    bad("histogram.origin", o.origin.is_finite())?;
    bad(
        "histogram.smoothing_bins",
        o.smoothing_bins >= 0.0 && o.smoothing_bins.is_finite(),
    )?;
    bad("image.width", o.image_width >= 2)?;
    bad("image.height", o.image_height >= 2)?;
    bad("image.histogram_height", o.histogram_image_height >= 1)?;
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn angle_keys(out: &mut String, a: AngleSampling) {
    let (min, max) = a.range();
    let _ = writeln!(out, "emission.alpha_min_rad = {min}");
    let _ = writeln!(out, "emission.alpha_max_rad = {max}");
    match a {
        AngleSampling::Grid { alpha_step, .. } => {
            let _ = writeln!(out, "emission.alpha_step_rad = {alpha_step}");
        }
        AngleSampling::Random { count, .. } => {
            let _ = writeln!(out, "emission.count = {count}");
        }
    }
}

/// Serializes `cfg` so that [`parse_config`] returns it unchanged.
pub fn config_to_text(cfg: &RunConfig) -> String {
    let s = cfg.sim.config();
    let mut out = String::new();
    let _ = writeln!(out, "geometry.d = {}", s.geometry.d);
    let _ = writeln!(out, "geometry.l = {}", s.geometry.l);
    let _ = writeln!(out, "geometry.r = {}", s.geometry.r);
    match s.field {
        FieldSpec::Zero => {
            let _ = writeln!(out, "field.kind = zero");
        }
        FieldSpec::HalfPlaneConstant { f0 } => {
            let _ = writeln!(out, "field.kind = half_plane\nfield.f0 = {f0}");
        }
        FieldSpec::BandConstant { f0, delta } => {
            let _ = writeln!(
                out,
                "field.kind = band\nfield.f0 = {f0}\nfield.delta = {delta}"
            );
        }
        FieldSpec::GaussianBand { f0, sigma } => {
            let _ = writeln!(
                out,
                "field.kind = gaussian\nfield.f0 = {f0}\nfield.sigma = {sigma}"
            );
        }
    }
    match s.emission {
        EmissionSpec::AngleGrid { .. } => {
            let _ = writeln!(out, "emission.kind = grid");
        }
        EmissionSpec::AngleRandom { seed, .. } => {
            let _ = writeln!(out, "emission.kind = random\nemission.seed = {seed}");
        }
        EmissionSpec::GaussianLine {
            sigma_src,
            seed,
            angles,
        } => {
            let kind = match angles {
                AngleSampling::Grid { .. } => "grid",
                AngleSampling::Random { .. } => "random",
            };
            let _ = writeln!(
                out,
                "emission.kind = gaussian_line\nemission.angles = {kind}\nemission.sigma_src = {sigma_src}\nemission.seed = {seed}"
            );
        }
    }
    angle_keys(&mut out, s.emission.angles());
    let _ = writeln!(out, "tau = {}", s.tau);
    let _ = writeln!(out, "v0 = {}", s.v0);
    let _ = writeln!(out, "mass = {}", s.mass);
    if let Some(n) = s.max_steps {
        let _ = writeln!(out, "max_steps = {n}");
    }
    if let Some(w) = s.slit_half_width {
        let _ = writeln!(out, "slit.half_width = {w}");
    }
    let o = &cfg.output;
    let _ = writeln!(out, "histogram.bin_width = {}", o.bin_width);
    let _ = writeln!(out, "histogram.origin = {}", o.origin);
    let _ = writeln!(out, "histogram.smoothing_bins = {}", o.smoothing_bins);
    let _ = writeln!(out, "image.width = {}", o.image_width);
    let _ = writeln!(out, "image.height = {}", o.image_height);
    let _ = writeln!(out, "image.histogram_height = {}", o.histogram_image_height);
    if let Some(t) = cfg.threads {
        let _ = writeln!(out, "threads = {t}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConfigError;
    use proptest::prelude::*;

    #[test]
    fn bundled_config_is_the_reference_set() {
        let cfg = parse_config(APPENDIX_CFG).unwrap();
        assert_eq!(cfg.sim.geometry, SimConfig::appendix().geometry);
        assert_eq!(cfg.sim.field, SimConfig::appendix().field);
        assert_eq!(cfg.sim.tau, 0.025);
        assert_eq!(cfg.sim.v0, 12.0);
        assert_eq!(cfg.output.bin_width, 0.025);
        assert_eq!(cfg.sim.emission, SimConfig::appendix().emission);
    }

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("# nothing\n\n").unwrap();
        assert_eq!(*cfg.sim.config(), SimConfig::appendix());
        assert_eq!(cfg.output.bin_width, 0.1);
    }

    #[test]
    fn charge_sets_force() {
        let cfg = parse_config("field.kind = half_plane\nfield.q = 0.5\n").unwrap();
        assert_eq!(cfg.sim.field, FieldSpec::HalfPlaneConstant { f0: PI });
        assert!(matches!(
            parse_config("field.q = 1\nfield.f0 = 2\n"),
            Err(ConfigFileError::Conflict(..))
        ));
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_config("tau = 0.1\n\nbogus\n") {
            Err(ConfigFileError::Syntax { line: 3 }) => {}
            other => panic!("{other:?}"),
        }
        match parse_config("# c\nv0 = fast\n") {
            Err(ConfigFileError::BadValue { line: 2, key, .. }) => assert_eq!(key, "v0"),
            other => panic!("{other:?}"),
        }
        match parse_config("colour = red\n") {
            Err(ConfigFileError::UnknownKey { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_config("tau = 1\ntau = 2\n") {
            Err(ConfigFileError::Duplicate { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_reported() {
        match parse_config("tau = 0\nmass = -1\n") {
            Err(ConfigFileError::Invalid(e)) => {
                assert!(e.0.contains(&ConfigError::NonPositiveParameter("tau")));
                assert!(e.0.contains(&ConfigError::NonPositiveParameter("mass")));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("field.kind = gaussian\n").is_err());
        assert!(parse_config("emission.kind = random\n").is_err());
        assert!(parse_config("image.width = 1\n").is_err());
    }

    #[test]
    fn manifest_keys_are_skipped() {
        let cfg =
            parse_config("run.wall_time_s = 0.3\noutput.impacts = x.csv\ntau = 0.01\n").unwrap();
        assert_eq!(cfg.sim.tau, 0.01);
    }

    fn reparse(cfg: &RunConfig) -> RunConfig {
        parse_config(&config_to_text(cfg)).unwrap()
    }

    #[test]
    fn every_variant_round_trips() {
        let texts = [
            APPENDIX_CFG,
            "field.kind = zero\nemission.kind = random\nemission.count = 10\nemission.seed = 99\n",
            "field.kind = gaussian\nfield.sigma = 4\nfield.f0 = 1.5\nmax_steps = 77\nthreads = 3\n",
            "field.kind = half_plane\nemission.kind = gaussian_line\nemission.sigma_src = 0.1\nemission.angles = random\nemission.count = 5\nslit.half_width = 0.7\n",
            "emission.kind = gaussian_line\nemission.sigma_src = 0.2\nemission.alpha_step_deg = 0.5\n",
        ];
        for t in texts {
            let cfg = parse_config(t).unwrap();
            assert_eq!(reparse(&cfg), cfg, "{t}");
        }
    }

    proptest! {
        #[test]
        fn degree_inputs_round_trip(min in -80.0..-1.0f64, max in 1.0..80.0f64, step in 0.001..1.0f64,
                                     tau in 0.001..0.1f64, d in 0.5..20.0f64, bw in 0.001..1.0f64) {
            let text = format!(
                "emission.alpha_min_deg = {min}\nemission.alpha_max_deg = {max}\nemission.alpha_step_deg = {step}\ntau = {tau}\ngeometry.d = {d}\nhistogram.bin_width = {bw}\n"
            );
            let cfg = parse_config(&text).unwrap();
            prop_assert_eq!(reparse(&cfg), cfg);
        }
    }
}
