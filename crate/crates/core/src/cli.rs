//! The `rootlevel` batch driver.
//!
//! Settings come from an optional `key = value` file (`--config`) and from
//! flags; a flag overrides the same setting in the file. Relative paths in
//! the file are resolved against the file's directory.
//!
//! | key          | flag            | meaning                                   |
//! |--------------|-----------------|-------------------------------------------|
//! | `b`          |                 | band half-width                           |
//! | `nu`         |                 | curvature weight                          |
//! | `s`          |                 | occupancy cube edge                       |
//! | `t`          |                 | active count threshold                    |
//! | `k`          |                 | stop when fewer contour voxels are active |
//! | `dt`         |                 | time step                                 |
//! | `g_min`      |                 | minimum greylevel                         |
//! | `root_band`  |                 | `lo,hi` greylevels allowed to join        |
//! | `explore`    |                 | incremental background exploration        |
//! | `max_iters`  |                 | iteration cap                             |
//! | `volume_dir` | `--volume-dir`  | slice stack directory                     |
//! | `raw`        | `--raw`         | raw volume file                           |
//! | `dims`       | `--dims`        | `X,Y,Z` of the raw volume                 |
//! | `depth`      | `--depth`       | 8 or 16 bits per voxel                    |
//! | `phantom`    | `--phantom`     | phantom spec file                         |
//! | `init_dir`   | `--init-dir`    | marked slices                             |
//! | `out`        | `--out`         | output directory                          |
//! | `workers`    | `--workers`     | worker threads                            |
//! | `strict`     | `--strict`      | reaching `max_iters` is an error          |
//! | `checkpoint` | `--checkpoint`  | dump labels every N iterations            |
//! | `log_level`  | `-v`, `-q`      | `error`, `warn`, `info`, `debug`, `trace` |
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 iteration
//! cap reached under `--strict`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{ArgAction, Parser};
use log::{info, warn, LevelFilter};

use crate::engine::{Engine, EngineConfig, IterationMetrics, Label};
use crate::error::{Error, Result};
use crate::init::{embed_marks, load_init_dir, SeedGate};
use crate::kv;
use crate::phantom::{dice, generate, sample_seeds, PhantomSpec};
use crate::postproc::filter_components;
use crate::volume::{load_raw, load_slice_stack, write_mask_stack, BitDepth, Dims, Mask, Volume};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MAX_ITERS: i32 = 4;

#[derive(Parser, Debug, Default)]
#[command(name = "rootlevel", version, about = "Narrow-band level-set root segmentation")]
pub struct Args {
    /// `key = value` run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of 2D slices (PNG or TIFF, sorted by name).
    #[arg(long)]
    pub volume_dir: Option<PathBuf>,
    /// Raw volume, x fastest, little-endian for 16 bits.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    /// Raw volume dimensions `X,Y,Z`.
    #[arg(long, value_name = "X,Y,Z")]
    pub dims: Option<String>,
    /// Raw volume bit depth.
    #[arg(long, value_parser = ["8", "16"])]
    pub depth: Option<String>,
    /// Directory of `init_<axis>_<index>.png` marked slices.
    #[arg(long)]
    pub init_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Run on a synthetic phantom described by SPEC.
    #[arg(long, value_name = "SPEC")]
    pub phantom: Option<PathBuf>,
    /// Exit with status 4 if `max_iters` is reached.
    #[arg(long)]
    pub strict: bool,
    /// Write the label volume every N iterations.
    #[arg(long, value_name = "N")]
    pub checkpoint: Option<usize>,
    /// More log output; repeat for more.
    #[arg(short, long, action = ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, conflicts_with = "verbose")]
    pub quiet: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Stack(PathBuf),
    Raw {
        path: PathBuf,
        dims: Dims,
        depth: BitDepth,
    },
    Phantom(PathBuf),
}

/// Everything a run needs, after merging file and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub input: Input,
    pub init_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    pub strict: bool,
    pub checkpoint: Option<usize>,
    pub log_level: LevelFilter,
}

/// Settings before validation; `None` means "not given".
#[derive(Default)]
struct Partial {
    volume_dir: Option<PathBuf>,
    raw: Option<PathBuf>,
    dims: Option<Dims>,
    depth: Option<BitDepth>,
    phantom: Option<PathBuf>,
    init_dir: Option<PathBuf>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    strict: bool,
    checkpoint: Option<usize>,
    log_level: Option<LevelFilter>,
}

fn parse_dims(s: &str) -> std::result::Result<Dims, String> {
    let v: Vec<usize> = kv::parse_list(s, 3)?;
    Ok(Dims::new(v[0], v[1], v[2]))
}

fn parse_depth(s: &str) -> Result<BitDepth> {
    BitDepth::from_bits(kv::parse_value(s).map_err(|e| Error::Config(format!("depth: {e}")))?)
}

impl RunConfig {
    /// Merges a config file's text (with its directory as path base) and the
    /// flags.
    pub fn resolve(args: &Args, file: Option<(&str, &Path)>) -> Result<RunConfig> {
        let mut engine = EngineConfig::default();
        let mut p = Partial::default();
        if let Some((text, base)) = file {
            let path = |v: &str| base.join(v);
            for e in kv::parse(text)? {
                let v = e.value.as_str();
                match e.key.as_str() {
                    "b" => engine.band = e.parse()?,
                    "nu" => engine.nu = e.parse()?,
                    "s" => engine.cube = e.parse()?,
                    "t" => engine.max_count = e.parse()?,
                    "k" => engine.min_active = e.parse()?,
                    "dt" => engine.dt_step = e.parse()?,
                    "g_min" => engine.min_grey = e.parse()?,
                    "root_band" => {
                        let r: Vec<u16> = e.list(2)?;
                        engine.root_band = (r[0], r[1]);
                    }
                    "explore" => engine.explore = kv::parse_bool(v).map_err(|x| e.err(x))?,
                    "max_iters" => engine.max_iters = e.parse()?,
                    "volume_dir" => p.volume_dir = Some(path(v)),
                    "raw" => p.raw = Some(path(v)),
                    "dims" => p.dims = Some(parse_dims(v).map_err(|x| e.err(x))?),
                    "depth" => p.depth = Some(parse_depth(v).map_err(|x| e.err(x))?),
                    "phantom" => p.phantom = Some(path(v)),
                    "init_dir" => p.init_dir = Some(path(v)),
                    "out" => p.out = Some(path(v)),
                    "workers" => p.workers = Some(e.parse()?),
                    "strict" => p.strict = kv::parse_bool(v).map_err(|x| e.err(x))?,
                    "checkpoint" => p.checkpoint = Some(e.parse()?),
                    "log_level" => p.log_level = Some(e.parse()?),
                    _ => return Err(e.err("unknown configuration key")),
                }
            }
        }

        // Flags win.
        if args.volume_dir.is_some() {
            p.volume_dir = args.volume_dir.clone();
        }
        if args.raw.is_some() {
            p.raw = args.raw.clone();
        }
        if let Some(d) = &args.dims {
            p.dims = Some(parse_dims(d).map_err(|e| Error::Config(format!("--dims: {e}")))?);
        }
        if let Some(d) = &args.depth {
            p.depth = Some(parse_depth(d)?);
        }
        if args.phantom.is_some() {
            p.phantom = args.phantom.clone();
        }
        if args.init_dir.is_some() {
            p.init_dir = args.init_dir.clone();
        }
        if args.out.is_some() {
            p.out = args.out.clone();
        }
        if args.workers.is_some() {
            p.workers = args.workers;
        }
        p.strict |= args.strict;
        if args.checkpoint.is_some() {
            p.checkpoint = args.checkpoint;
        }
        if args.quiet {
            p.log_level = Some(LevelFilter::Error);
        } else if args.verbose > 0 {
            p.log_level = Some(match args.verbose {
                1 => LevelFilter::Info,
                2 => LevelFilter::Debug,
                _ => LevelFilter::Trace,
            });
        }

        engine.validate()?;
        let input = match (p.volume_dir, p.raw, p.phantom) {
            (Some(d), None, None) => Input::Stack(d),
            (None, Some(path), None) => Input::Raw {
                path,
                dims: p
                    .dims
                    .ok_or_else(|| Error::Config("dims required for a raw volume".into()))?,
                depth: p.depth.unwrap_or(BitDepth::Eight),
            },
            (None, None, Some(spec)) => Input::Phantom(spec),
            _ => {
                return Err(Error::Config(
                    "exactly one of volume-dir, raw or phantom is required".into(),
                ))
            }
        };
        if p.init_dir.is_none() && !matches!(input, Input::Phantom(_)) {
            return Err(Error::Config("init-dir required".into()));
        }
        let workers = match p.workers {
            Some(0) => return Err(Error::Config("workers must be at least 1".into())),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        if p.checkpoint == Some(0) {
            return Err(Error::Config("checkpoint interval must be at least 1".into()));
        }
        Ok(RunConfig {
            engine,
            input,
            init_dir: p.init_dir,
            out: p.out.ok_or_else(|| Error::Config("out required".into()))?,
            workers,
            strict: p.strict,
            checkpoint: p.checkpoint,
            log_level: p.log_level.unwrap_or(LevelFilter::Warn),
        })
    }

    /// Reads `--config` if given and merges it with the flags.
    pub fn from_args(args: &Args) -> Result<RunConfig> {
        match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                let base = path.parent().unwrap_or(Path::new("."));
                RunConfig::resolve(args, Some((&text, base)))
            }
            None => RunConfig::resolve(args, None),
        }
    }
}

/// What a finished run reports.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub iterations: usize,
    pub converged: bool,
    pub foreground: usize,
    pub components: usize,
    pub components_removed: usize,
    pub voxels_removed: usize,
    pub wall_time: Duration,
    pub dice: Option<f64>,
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "foreground_voxels = {}", self.foreground);
        let _ = writeln!(s, "components = {}", self.components);
        let _ = writeln!(s, "components_removed = {}", self.components_removed);
        let _ = writeln!(s, "voxels_removed = {}", self.voxels_removed);
        let _ = writeln!(s, "wall_time_s = {:.3}", self.wall_time.as_secs_f64());
        if let Some(d) = self.dice {
            let _ = writeln!(s, "dice = {d:.6}");
        }
        s
    }
}

/// `metrics.csv` contents.
pub fn metrics_csv(metrics: &[IterationMetrics]) -> String {
    let mut s = String::from(IterationMetrics::CSV_HEADER);
    s.push('\n');
    for m in metrics {
        s.push_str(&m.csv_row());
        s.push('\n');
    }
    s
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn label_bytes(labels: &[Label]) -> Vec<u8> {
    labels
        .iter()
        .map(|l| match l {
            Label::Unlabeled => 0,
            Label::Background => 1,
            Label::Foreground => 2,
        })
        .collect()
}

/// Runs the whole pipeline on the current rayon pool and writes the outputs.
pub fn execute(cfg: &RunConfig) -> Result<Summary> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.out).map_err(|e| {
        Error::Config(format!("output directory {} is not writable: {e}", cfg.out.display()))
    })?;

    let mut truth: Option<Mask> = None;
    let mut phantom_seeds = None;
    let vol: Volume = match &cfg.input {
        Input::Stack(dir) => load_slice_stack(dir)?,
        Input::Raw { path, dims, depth } => load_raw(path, *dims, *depth)?,
        Input::Phantom(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read phantom spec {}: {e}", path.display()))
            })?;
            let spec = PhantomSpec::parse(&text)?;
            let p = generate(&spec)?;
            let t = p.truth();
            if !spec.seed_slices.is_empty() {
                phantom_seeds = Some(sample_seeds(&t, &spec.seed_slices, spec.seed_stride));
            }
            truth = Some(t);
            p.volume
        }
    };
    info!("volume {} at {} bits", vol.dims(), vol.depth().bits());

    let gate = SeedGate {
        min_grey: cfg.engine.min_grey,
        root_band: cfg.engine.root_band,
    };
    let seeds = match (&cfg.init_dir, phantom_seeds) {
        (Some(dir), _) => embed_marks(&load_init_dir(dir, &vol)?, &vol, gate)?.voxels,
        (None, Some(s)) => {
            let kept: Vec<usize> = s.into_iter().filter(|&i| gate.accepts(vol.at(i))).collect();
            if kept.is_empty() {
                return Err(Error::NoInitVoxels);
            }
            kept
        }
        (None, None) => {
            return Err(Error::Config(
                "init-dir required (the phantom spec has no seed_slices)".into(),
            ))
        }
    };
    info!("{} seed voxels", seeds.len());

    let mut checkpoint_err = None;
    let engine = Engine::new(&vol, &seeds, cfg.engine.clone())?;
    let mut outcome = engine.run_with(|e, m| {
        log::debug!("iteration {}: {}", m.iteration, m.csv_row());
        if let Some(n) = cfg.checkpoint {
            if m.iteration % n == 0 && checkpoint_err.is_none() {
                let path = cfg.out.join(format!("checkpoint_{:05}.labels", m.iteration));
                checkpoint_err = write_file(path, &label_bytes(e.labels())).err();
            }
        }
    })?;
    if let Some(e) = checkpoint_err {
        return Err(e);
    }
    if !outcome.converged {
        warn!("stopped at max_iters = {} before convergence", cfg.engine.max_iters);
    }

    let dims = vol.dims();
    let report = filter_components(&mut outcome.labels, dims, &outcome.seeds);
    let mask = outcome.foreground_mask();
    write_mask_stack(&mask, &cfg.out)?;
    write_file(cfg.out.join("metrics.csv"), metrics_csv(&outcome.metrics).as_bytes())?;

    let summary = Summary {
        iterations: outcome.iterations(),
        converged: outcome.converged,
        foreground: mask.count(),
        components: report.components,
        components_removed: report.removed.len(),
        voxels_removed: report.removed.iter().map(|r| r.1).sum(),
        wall_time: start.elapsed(),
        dice: truth.as_ref().map(|t| dice(&mask, t)).transpose()?,
    };
    write_file(cfg.out.join("summary.txt"), summary.to_text().as_bytes())?;
    Ok(summary)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match RunConfig::from_args(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("rootlevel: {e}");
            return exit_code(&e);
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cfg.log_level)
        .format_timestamp(None)
        .try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("rootlevel: cannot start {} workers: {e}", cfg.workers);
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cfg)) {
        Ok(s) => {
            print!("{}", s.to_text());
            if cfg.strict && !s.converged {
                eprintln!("rootlevel: max_iters = {} reached", cfg.engine.max_iters);
                EXIT_MAX_ITERS
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("rootlevel: {e}");
            exit_code(&e)
        }
    }
}
