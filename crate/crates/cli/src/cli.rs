//! Argument handling and the five subcommands.
//!
//! Every setting can come from the command line, from a `--config` file, or
//! (for the seed only) from `UNA_SEED`, in that order of precedence. All
//! settings are checked before any input file is opened.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use una_core::noise::{self, NoiseConfig};
use una_core::tide::{DEFAULT_BACKGROUND_IOU, DEFAULT_FOREGROUND_IOU};
use una_core::{BogusSizePolicy, Dataset, NoiseKind, NoiseType};

use crate::coco;
use crate::config::ConfigFile;
use crate::diff;
use crate::error::{Error, Result};
use crate::log_file;
use crate::report::{self, Format};
use crate::stats;

/// Environment variable that supplies a default `--seed`.
pub const SEED_ENV: &str = "UNA_SEED";

#[derive(Debug, Parser)]
#[command(name = "una", version, about = "Inject annotation noise into COCO datasets and evaluate detectors")]
pub struct Cli {
    /// Worker threads for parallel stages (default: one per core)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<String>,

    /// File of `key = value` settings; command-line flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a noisy copy of a dataset plus its injection log
    Inject(InjectArgs),
    /// COCO-style AP, AP50 and AP75 of a results file
    Eval(EvalArgs),
    /// Break detection errors down into Cls, Loc, Both, Dupe, Bkg and Miss
    Tide(TideArgs),
    /// Counts and box size distribution of a dataset
    Stats(StatsArgs),
    /// Annotation-level differences between two datasets
    Diff(DiffArgs),
}

#[derive(Debug, Args)]
struct InjectArgs {
    /// Clean annotation file
    #[arg(long, value_name = "FILE")]
    ann: Option<PathBuf>,
    /// Noisy annotation file to write; the log goes next to it
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// categorization, localization, missing, bogus or una
    #[arg(long = "type", value_name = "TYPE")]
    noise_type: Option<String>,
    /// Fraction of non-crowd annotations to corrupt, in [0, 1]
    #[arg(long)]
    ratio: Option<String>,
    /// 64-bit seed [default: $UNA_SEED or 0]
    #[arg(long)]
    seed: Option<String>,
    /// Localization magnitude, in (0, 1) [default: 0.4]
    #[arg(long)]
    loc_delta: Option<String>,
    /// sample_existing or uniform_fraction [default: sample_existing]
    #[arg(long, value_name = "POLICY")]
    bogus_size_policy: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth annotation file
    #[arg(long, value_name = "FILE")]
    gt: Option<PathBuf>,
    /// Detection results file
    #[arg(long, value_name = "FILE")]
    dt: Option<PathBuf>,
    /// text, csv or json [default: text]
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct TideArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Foreground IoU threshold [default: 0.5]
    #[arg(long)]
    tf: Option<String>,
    /// Background IoU threshold, below --tf [default: 0.1]
    #[arg(long)]
    tb: Option<String>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Annotation file
    #[arg(long, value_name = "FILE")]
    ann: Option<PathBuf>,
    /// text, csv or json [default: text]
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct DiffArgs {
    /// Original annotation file
    a: PathBuf,
    /// Modified annotation file
    b: PathBuf,
    /// Injection log to reconcile the differences against
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// text, csv or json [default: text]
    #[arg(long)]
    format: Option<String>,
}

/// Merges command-line values with the config file.
struct Settings {
    file: ConfigFile,
}

impl Settings {
    /// The command-line value if given, else the config file's.
    fn raw(&self, cli: &Option<String>, key: &str) -> Option<String> {
        cli.clone().or_else(|| self.file.get(key).map(str::to_string))
    }

    fn path(&self, cli: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        cli.clone().or_else(|| self.file.get(key).map(PathBuf::from))
    }

    fn required_path(&self, cli: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(cli, key).ok_or_else(|| Error::usage(format!("--{key} is required")))
    }

    fn parsed<T: std::str::FromStr>(&self, cli: &Option<String>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(cli, key)
            .map(|v| v.parse::<T>().map_err(|e| Error::usage(format!("--{key}: invalid value `{v}`: {e}"))))
            .transpose()
    }

    fn format(&self, cli: &Option<String>) -> Result<Format> {
        Ok(self.parsed(cli, "format")?.unwrap_or_default())
    }
}

fn check_range(key: &str, v: f64, ok: bool, range: &str) -> Result<f64> {
    if ok {
        Ok(v)
    } else {
        Err(Error::usage(format!("--{key} must be in {range}, got {v}")))
    }
}

struct InjectPlan {
    ann: PathBuf,
    out: PathBuf,
    log: PathBuf,
    config: NoiseConfig,
}

fn plan_inject(args: &InjectArgs, s: &Settings) -> Result<InjectPlan> {
    let noise_type: NoiseType =
        s.parsed(&args.noise_type, "type")?.ok_or_else(|| Error::usage("--type is required"))?;
    let ratio: f64 = s.parsed(&args.ratio, "ratio")?.ok_or_else(|| Error::usage("--ratio is required"))?;
    check_range("ratio", ratio, (0.0..=1.0).contains(&ratio), "[0, 1]")?;

    let seed = match s.parsed::<u64>(&args.seed, "seed")? {
        Some(seed) => seed,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => {
                v.trim().parse().map_err(|e| Error::usage(format!("{SEED_ENV}: invalid value `{v}`: {e}")))?
            }
            Err(_) => 0,
        },
    };

    let mut config = NoiseConfig::new(noise_type, ratio, seed);
    if let Some(delta) = s.parsed::<f64>(&args.loc_delta, "loc-delta")? {
        if !noise_type.uses_loc_delta() {
            return Err(Error::usage(format!("--loc-delta has no effect with --type {noise_type}")));
        }
        check_range("loc-delta", delta, delta > 0.0 && delta < 1.0, "(0, 1)")?;
        config = config.with_loc_delta(delta);
    }
    if let Some(policy) = s.parsed::<BogusSizePolicy>(&args.bogus_size_policy, "bogus-size-policy")? {
        if !noise_type.uses_bogus_policy() {
            return Err(Error::usage(format!("--bogus-size-policy has no effect with --type {noise_type}")));
        }
        config = config.with_bogus_size_policy(policy);
    }
    config.validate()?;

    let ann = s.required_path(&args.ann, "ann")?;
    let out = s.required_path(&args.out, "out")?;
    let log = log_file::log_path(&out);
    if out == ann || log == ann {
        return Err(Error::usage("--out would overwrite --ann"));
    }
    Ok(InjectPlan { ann, out, log, config })
}

fn thresholds(args: &TideArgs, s: &Settings) -> Result<(f64, f64)> {
    let tf = s.parsed(&args.tf, "tf")?.unwrap_or(DEFAULT_FOREGROUND_IOU);
    let tb = s.parsed(&args.tb, "tb")?.unwrap_or(DEFAULT_BACKGROUND_IOU);
    check_range("tf", tf, (0.0..=1.0).contains(&tf), "[0, 1]")?;
    check_range("tb", tb, (0.0..=1.0).contains(&tb), "[0, 1]")?;
    if tb >= tf {
        return Err(Error::usage(format!("--tb must be smaller than --tf (got tb = {tb}, tf = {tf})")));
    }
    Ok((tf, tb))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn load_dataset(path: &Path, warn: &mut dyn Write) -> Result<Dataset> {
    let ds = coco::parse_dataset(&read(path)?).map_err(|e| Error::input(path, e))?;
    let outside = ds.out_of_bounds();
    if !outside.is_empty() {
        let shown: Vec<String> = outside.iter().take(10).map(|id| id.to_string()).collect();
        let more = if outside.len() > 10 { ", ..." } else { "" };
        let _ = writeln!(
            warn,
            "warning: {}: {} annotation box(es) extend past their image (ids {}{more}); kept as-is",
            path.display(),
            outside.len(),
            shown.join(", ")
        );
    }
    Ok(ds)
}

fn load_detections(path: &Path, gt: &Dataset) -> Result<Vec<una_core::Detection>> {
    coco::parse_detections(&read(path)?, gt).map_err(|e| Error::input(path, e))
}

/// Writes every file or none: each goes to a temporary sibling first and is
/// renamed into place once all writes succeeded.
fn write_all(files: &[(&Path, &[u8])]) -> Result<()> {
    let mut staged: Vec<(PathBuf, &Path)> = Vec::new();
    let cleanup = |staged: &[(PathBuf, &Path)]| {
        for (tmp, _) in staged {
            let _ = fs::remove_file(tmp);
        }
    };
    for (path, bytes) in files {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".una-tmp");
        let tmp = PathBuf::from(tmp);
        if let Err(e) = fs::write(&tmp, bytes) {
            let _ = fs::remove_file(&tmp);
            cleanup(&staged);
            return Err(Error::io(path, e));
        }
        staged.push((tmp, path));
    }
    for (i, (tmp, path)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&staged[i..]);
            return Err(Error::io(path, e));
        }
    }
    Ok(())
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn run_inject(plan: &InjectPlan, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let clean = load_dataset(&plan.ann, err)?;
    let (noisy, log) = noise::inject(&clean, &plan.config)?;
    let (images, annotations, categories) = noisy.clone().into_parts();
    Dataset::new(images, annotations, categories)?;

    let data = coco::serialize_dataset(&noisy);
    let log_bytes = log_file::serialize_log(&log);
    write_all(&[(&plan.out, &data), (&plan.log, &log_bytes)])?;

    let c = &plan.config;
    let mut summary = format!("{} noise, ratio {}, seed {}", c.noise_type, c.ratio, c.seed);
    if c.noise_type.uses_loc_delta() {
        summary += &format!(", loc-delta {}", c.loc_delta);
    }
    if c.noise_type.uses_bogus_policy() {
        summary += &format!(", bogus sizes {}", c.bogus_size_policy);
    }
    summary += &format!("\n{} non-crowd annotations, {} per noise kind\n", log.pool_size, log.target_count);
    for kind in NoiseKind::ALL {
        summary += &format!("  {:<15} {}\n", kind.as_str(), log.count(kind));
    }
    summary += &format!(
        "annotations {} -> {}\nwrote {}\nwrote {}\n",
        clean.annotations().len(),
        noisy.annotations().len(),
        plan.out.display(),
        plan.log.display()
    );
    emit(out, &summary)
}

fn run(cli: &Cli, s: &Settings, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::Inject(args) => {
            let plan = plan_inject(args, s)?;
            run_inject(&plan, out, err)
        }
        Command::Eval(args) => {
            let format = s.format(&args.format)?;
            let gt_path = s.required_path(&args.gt, "gt")?;
            let dt_path = s.required_path(&args.dt, "dt")?;
            let gt = load_dataset(&gt_path, err)?;
            let dets = load_detections(&dt_path, &gt)?;
            let summary = una_core::evaluate(&gt, &dets)?;
            emit(out, &report::render_eval(&gt, &summary, format))
        }
        Command::Tide(args) => {
            let format = s.format(&args.eval.format)?;
            let (tf, tb) = thresholds(args, s)?;
            let gt_path = s.required_path(&args.eval.gt, "gt")?;
            let dt_path = s.required_path(&args.eval.dt, "dt")?;
            let gt = load_dataset(&gt_path, err)?;
            let dets = load_detections(&dt_path, &gt)?;
            let r = una_core::tide_report(&gt, &dets, tf, tb)?;
            emit(out, &report::render_tide(&r, format))
        }
        Command::Stats(args) => {
            let format = s.format(&args.format)?;
            let path = s.required_path(&args.ann, "ann")?;
            let ds = load_dataset(&path, err)?;
            emit(out, &report::render_stats(&stats::dataset_stats(&ds), format))
        }
        Command::Diff(args) => {
            let format = s.format(&args.format)?;
            let log_path = s.path(&args.log, "log");
            let a = load_dataset(&args.a, err)?;
            let b = load_dataset(&args.b, err)?;
            let log = match &log_path {
                Some(p) => Some(
                    log_file::parse_log(&read(p)?)
                        .map_err(|e| Error::usage(format!("{}: {e}", p.display())))?,
                ),
                None => None,
            };
            let d = diff::diff(&a, &b);
            emit(out, &report::render_diff(&d, format))?;
            if let Some(log) = log {
                let problems = diff::reconcile(&d, &log);
                if !problems.is_empty() {
                    return Err(Error::Reconcile(problems));
                }
                let _ = writeln!(err, "diff reconciles with {}", log_path.unwrap().display());
            }
            Ok(())
        }
    }
}

fn settings_for(cli: &Cli) -> Result<Settings> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ConfigFile::parse(&text).map_err(|e| Error::usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    Ok(Settings { file })
}

fn run_with_threads(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<()> {
    let settings = settings_for(cli)?;
    let threads: Option<usize> = settings.parsed(&cli.threads, "threads")?;
    match threads {
        Some(0) => Err(Error::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::usage(format!("--threads: {e}")))?;
            pool.install(|| run(cli, &settings, out, err))
        }
        None => run(cli, &settings, out, err),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// status: 0 on success, 1 for invalid input, 2 for I/O failures.
pub fn main_with_args<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run_with_threads(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
