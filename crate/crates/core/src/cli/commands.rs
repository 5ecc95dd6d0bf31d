use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use super::config::{
    config_to_text, load_config, parse_config, ConfigFileError, RunConfig, APPENDIX_CFG,
};
use super::output::{density_pgm, histogram_csv, histogram_pgm, impacts_csv, write_files};
use crate::analytics::{
    black_region_for, boundary_distance, compute_n0, deviation_origins, deviation_origins_from,
    fork_impacts,
};
use crate::histogram::{accumulate, contrast, Contrast};
use crate::sweep::{run_batch, run_density, run_sweep, SweepAxis, SweepOptions, SweepParameter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Environment variable that overrides every other thread setting.
pub const THREADS_ENV: &str = "TQS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "tqs", version, about = "Discrete-time single-slit scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file; the bundled reference config when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for random emission modes.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one batch and write impacts, histogram and images.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        bin_width: Option<f64>,
    },
    /// Print n0, the fork heights a_i and angles phi_i.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        i_max: u32,
        /// Also trace the fork angles to the detector.
        #[arg(long)]
        with_minima: bool,
        /// Also write the table to DIR/analysis.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the batch over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly monotone.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(ConfigFileError),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
            Failure::Config(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigFileError> for Failure {
    fn from(e: ConfigFileError) -> Self {
        Failure::Config(e)
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Runtime(format!("writing outputs: {e}"))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let threads_env = std::env::var(THREADS_ENV).ok();
    match dispatch(cli.command, threads_env.as_deref(), out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "tqs: {f}");
            f.code()
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => parse_config(APPENDIX_CFG)?,
    };
    if let Some(seed) = common.seed {
        cfg.sim = cfg
            .sim
            .modify(|c| c.emission = c.emission.with_seed(seed))
            .map_err(ConfigFileError::from)?;
    }
    Ok(cfg)
}

fn workers(common: &Common, cfg: &RunConfig, env: Option<&str>) -> Result<usize, Failure> {
    if let Some(v) = env {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        };
    }
    match common.threads.or(cfg.threads) {
        Some(0) => Err(Failure::Usage("--threads must be positive".into())),
        Some(n) => Ok(n),
        None => Ok(0),
    }
}

fn apply_bin_width(cfg: &mut RunConfig, bin_width: Option<f64>) -> Result<(), Failure> {
    if let Some(bw) = bin_width {
        if !(bw > 0.0 && bw.is_finite()) {
            return Err(Failure::Usage(format!(
                "--bin-width must be positive, got {bw}"
            )));
        }
        cfg.output.bin_width = bw;
    }
    Ok(())
}

fn resolved_threads(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        workers
    }
}

fn fmt_contrast(c: &Contrast) -> String {
    format!("{},{}", c.n_maxima, c.peak_to_valley)
}

fn manifest(command: &str, cfg: &RunConfig, threads: usize, body: &str) -> String {
    let mut m = String::from("# tqs run manifest\n");
    let _ = writeln!(m, "tool.version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "run.command = {command}");
    let _ = writeln!(m, "run.threads = {threads}");
    m.push_str(body);
    m.push_str(&config_to_text(cfg));
    m
}

fn dispatch(cmd: Command, env: Option<&str>, out: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Simulate {
            common,
            out: dir,
            bin_width,
        } => {
            let mut cfg = load(&common)?;
            apply_bin_width(&mut cfg, bin_width)?;
            let w = workers(&common, &cfg, env)?;
            simulate(&cfg, w, &dir, out)
        }
        Command::Analyze {
            common,
            i_max,
            with_minima,
            out: dir,
        } => {
            let cfg = load(&common)?;
            let text = analyze(&cfg, i_max, with_minima)?;
            if let Some(dir) = dir {
                write_files(&dir, &[("analysis.csv".into(), text.clone())]).map_err(io_failure)?;
            }
            out.write_all(text.as_bytes()).map_err(io_failure)
        }
        Command::Sweep {
            common,
            out: dir,
            bin_width,
            axis,
            values,
        } => {
            let parameter: SweepParameter =
                axis.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
            let values = parse_values(&values)?;
            let axis =
                SweepAxis::new(parameter, values).map_err(|e| Failure::Usage(e.to_string()))?;
            let mut cfg = load(&common)?;
            apply_bin_width(&mut cfg, bin_width)?;
            let w = workers(&common, &cfg, env)?;
            sweep(&cfg, &axis, w, &dir, out)
        }
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad sweep value `{}`", v.trim())))
        })
        .collect()
}

fn simulate(
    cfg: &RunConfig,
    workers: usize,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let started = Instant::now();
    let batch = run_batch(&cfg.sim, workers);
    if batch.impacts.is_empty() {
        return Err(Failure::Runtime("no particle reached the detector".into()));
    }
    let hist = accumulate(&batch.impacts, cfg.output.bin_width, cfg.output.origin);
    let c =
        contrast(&hist, cfg.output.smoothing_bins).map_err(|e| Failure::Runtime(e.to_string()))?;
    let grid = run_density(
        &cfg.sim,
        workers,
        cfg.output.image_width,
        cfg.output.image_height,
    );
    let elapsed = started.elapsed().as_secs_f64();

    let f = batch.failures;
    let mut body = String::new();
    let _ = writeln!(
        body,
        "run.particles = {}",
        batch.impacts.len() as u64 + f.total()
    );
    let _ = writeln!(body, "run.impacts = {}", batch.impacts.len());
    let _ = writeln!(body, "run.n_maxima = {}", c.n_maxima);
    let _ = writeln!(body, "run.peak_to_valley = {}", c.peak_to_valley);
    let _ = writeln!(body, "run.black_region = {}", black_region_for(&cfg.sim));
    let _ = writeln!(body, "run.wall_time_s = {elapsed}");
    let _ = writeln!(body, "failures.max_steps = {}", f.max_steps);
    let _ = writeln!(body, "failures.absorbed = {}", f.absorbed);
    let _ = writeln!(body, "failures.non_finite = {}", f.non_finite);
    let _ = writeln!(body, "output.impacts = impacts.csv");
    let _ = writeln!(body, "output.histogram = histogram.csv");
    let _ = writeln!(body, "output.histogram_image = histogram.pgm");
    let _ = writeln!(body, "output.density_image = density.pgm");

    let files = vec![
        ("impacts.csv".to_string(), impacts_csv(&batch.impacts)),
        ("histogram.csv".to_string(), histogram_csv(&hist)),
        (
            "histogram.pgm".to_string(),
            histogram_pgm(&hist, cfg.output.histogram_image_height),
        ),
        ("density.pgm".to_string(), density_pgm(&grid)),
        (
            "manifest.cfg".to_string(),
            manifest("simulate", cfg, resolved_threads(workers), &body),
        ),
    ];
    write_files(dir, &files).map_err(io_failure)?;
    writeln!(
        out,
        "{} impacts, {} failed, {} maxima, peak/valley {} -> {}",
        batch.impacts.len(),
        f.total(),
        c.n_maxima,
        c.peak_to_valley,
        dir.display()
    )
    .map_err(io_failure)
}

fn analyze(cfg: &RunConfig, i_max: u32, with_minima: bool) -> Result<String, Failure> {
    let s = cfg.sim.config();
    let (d, v0, tau) = (s.geometry.d, s.v0, s.tau);
    let origins = deviation_origins(d, v0, tau, i_max);
    let boundary = boundary_distance(&cfg.sim).ok();
    let field_origins = boundary.map(|b| deviation_origins_from(b, v0, tau, i_max));
    let minima = if with_minima {
        Some(fork_impacts(&cfg.sim, i_max).map_err(|e| Failure::Runtime(e.to_string()))?)
    } else {
        None
    };

    let mut t = String::new();
    let _ = writeln!(t, "# n0 = {}", compute_n0(d, v0, tau));
    let _ = writeln!(t, "# black_region = {}", black_region_for(&cfg.sim));
    match (boundary, &field_origins) {
        (Some(b), Some(fo)) => {
            let _ = writeln!(t, "# boundary = {b}");
            let _ = writeln!(t, "# n0_boundary = {}", fo.n0);
        }
        _ => {
            let _ = writeln!(t, "# boundary = none");
        }
    }
    t.push_str("i,a_i,phi_i_rad,phi_i_deg,a_i_boundary,phi_i_boundary_deg,predicted_minimum\n");
    for (k, &i) in origins.indices.iter().enumerate() {
        let (a, phi) = (origins.a[k], origins.phi[k]);
        let _ = write!(t, "{i},{a},{phi},{}", phi.to_degrees());
        match &field_origins {
            Some(fo) => {
                let _ = write!(t, ",{},{}", fo.a[k], fo.phi[k].to_degrees());
            }
            None => t.push_str(",,"),
        }
        match &minima {
            Some(m) => {
                let _ = writeln!(t, ",{}", m[k].1);
            }
            None => t.push_str(",\n"),
        }
    }
    Ok(t)
}

/// Filename stem for one sweep value.
pub fn sweep_stem(parameter: SweepParameter, value: f64) -> String {
    format!("{parameter}_{value}")
}

fn sweep(
    cfg: &RunConfig,
    axis: &SweepAxis,
    workers: usize,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let started = Instant::now();
    let opts = SweepOptions {
        bin_width: cfg.output.bin_width,
        origin: cfg.output.origin,
        smoothing_bins: cfg.output.smoothing_bins,
        workers,
    };
    let result = run_sweep(&cfg.sim, axis, &opts);
    let mut files = Vec::new();
    let mut summary = String::from("value,n_maxima,peak_to_valley,failures\n");
    let mut notes = Vec::new();
    for e in &result.entries {
        match &e.outcome {
            Ok(p) => {
                let stem = sweep_stem(result.parameter, e.value);
                files.push((format!("histogram_{stem}.csv"), histogram_csv(&p.histogram)));
                files.push((
                    format!("histogram_{stem}.pgm"),
                    histogram_pgm(&p.histogram, cfg.output.histogram_image_height),
                ));
                let _ = writeln!(
                    summary,
                    "{},{},{}",
                    e.value,
                    fmt_contrast(&p.contrast),
                    p.failures.total()
                );
            }
            Err(err) => {
                let _ = writeln!(summary, "{},NA,NA,NA", e.value);
                notes.push(format!("{} = {}: {err}", result.parameter, e.value));
            }
        }
    }
    if notes.len() == result.entries.len() {
        return Err(Failure::Runtime(format!(
            "every sweep value failed: {}",
            notes.join("; ")
        )));
    }
    let mut body = String::new();
    let _ = writeln!(body, "run.axis = {}", result.parameter);
    let _ = writeln!(
        body,
        "run.values = {}",
        axis.values()
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    );
    let _ = writeln!(
        body,
        "run.wall_time_s = {}",
        started.elapsed().as_secs_f64()
    );
    let _ = writeln!(body, "output.summary = summary.csv");
    files.push(("summary.csv".into(), summary));
    files.push((
        "manifest.cfg".into(),
        manifest("sweep", cfg, resolved_threads(workers), &body),
    ));
    write_files(dir, &files).map_err(io_failure)?;
    for n in &notes {
        let _ = writeln!(out, "skipped {n}");
    }
    writeln!(
        out,
        "{} of {} values -> {}",
        result.entries.len() - notes.len(),
        result.entries.len(),
        dir.display()
    )
    .map_err(io_failure)
}
