//! Command-line front end. All work happens in library calls; this module only
//! parses flags, reads and writes files, and maps errors to exit codes.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datasets::{
    gen_gaussian_majority, gen_manifold_samples, read_cloud, write_cloud, ManifoldKind, Preset,
};
use crate::detector::{determine_threshold, format_outcomes, kappa_detect, DetectionConfig, RECOMMENDED_R};
use crate::error::{Error, Result};
use crate::eval::{dims_for, export_histogram, preset_experiment, run_experiment, ExperimentSpec, ThresholdRule};
use crate::geometry::{PointCloud, SecantFilterPolicy};
use crate::profile::{compute_kappa_profile, DimensionRange, ProfileConfig, DEFAULT_TRIALS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kappa-detect", version, about = "Rare-category detection with κ-profiles")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic point cloud.
    Gen(GenArgs),
    /// Print the κ-profile of a point cloud.
    Profile(ProfileArgs),
    /// Estimate a detection threshold from labeled rare points.
    Threshold(ThresholdArgs),
    /// Score unlabeled points against labeled rare points.
    Detect(DetectArgs),
    /// Repeat randomized detection experiments on a labeled dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    #[value(name = "trig_curve_6d")]
    TrigCurve6d,
    #[value(name = "torus_10d")]
    Torus10d,
    #[value(name = "rp2_10d")]
    Rp2_10d,
    #[value(name = "s3_10d")]
    S3_10d,
    #[value(name = "gaussian")]
    Gaussian,
    /// Six-cluster Gaussian mixture in ℝ⁶; count is per cluster.
    #[value(name = "majority_6d")]
    Majority6d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterMode {
    None,
    Absolute,
    Fraction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Ecoli,
    Pageblocks,
    Shuttle,
    Glass,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Ecoli => Preset::Ecoli,
            PresetArg::Pageblocks => Preset::PageBlocks,
            PresetArg::Shuttle => Preset::Shuttle,
            PresetArg::Glass => Preset::Glass,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub kind: GenKind,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

/// Flags shared by every command that computes profiles.
#[derive(Debug, Args)]
pub struct ProfileFlags {
    /// Target dimensions as `A..B` (inclusive) or a single `A`.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<DimensionRange>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: Option<u32>,
    #[arg(long, value_enum)]
    pub filter_mode: Option<FilterMode>,
    /// Minimum length (absolute) or dropped fraction (fraction).
    #[arg(long)]
    pub filter_value: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub profile: ProfileFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Labeled rare points.
    #[arg(long)]
    pub rare: PathBuf,
    #[arg(long, default_value_t = crate::detector::DEFAULT_R)]
    pub r: f64,
    #[command(flatten)]
    pub profile: ProfileFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub rare: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long, conflicts_with = "auto_threshold_r", required_unless_present = "auto_threshold_r")]
    pub threshold: Option<f64>,
    /// Derive the threshold from the rare points with this multiplier.
    #[arg(long)]
    pub auto_threshold_r: Option<f64>,
    #[command(flatten)]
    pub profile: ProfileFlags,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset file: a preset's UCI layout, or the point-cloud format with labels.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub rare_label: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_labeled: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: Option<u32>,
    #[arg(long, conflicts_with = "auto_threshold_r")]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub auto_threshold_r: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub majority_subsample: Option<u64>,
    /// Keep the preset's suggested outliers out of the labeled sample.
    #[arg(long)]
    pub exclude_outliers: bool,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub bins: u32,
    #[command(flatten)]
    pub profile: ProfileFlags,
    /// Directory for `report.txt`, `outcomes.csv` and `histogram.txt`;
    /// the report goes to standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_dims(s: &str) -> std::result::Result<DimensionRange, String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("'{v}' is not a dimension"));
    let range = match s.split_once("..") {
        Some((a, b)) => DimensionRange::consecutive(parse(a)?, parse(b.trim_start_matches('='))?),
        None => DimensionRange::new(vec![parse(s)?]),
    };
    range.map_err(|e| e.to_string())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Dimension(_) | Error::Incompatible(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors and warnings go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Error::Config(format!("cannot start {jobs} workers: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Profile(a) => cmd_profile(&a),
        Command::Threshold(a) => cmd_threshold(&a),
        Command::Detect(a) => cmd_detect(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(Path::new("<stdout>"), e))
        }
    }
}

fn warn_r(r: f64) {
    if !RECOMMENDED_R.contains(&r) {
        eprintln!(
            "warning: r = {r} is outside the recommended range [{}, {}]",
            RECOMMENDED_R.start(),
            RECOMMENDED_R.end()
        );
    }
}

/// Builds a profile configuration; unset flags fall back to the given defaults.
fn profile_config(
    flags: &ProfileFlags,
    default_dims: DimensionRange,
    default_policy: SecantFilterPolicy,
) -> Result<ProfileConfig> {
    let mut cfg = ProfileConfig::new(flags.dims.clone().unwrap_or(default_dims));
    cfg.trials = flags.trials.map_or(DEFAULT_TRIALS, |t| t as usize);
    cfg.policy = match (flags.filter_mode, flags.filter_value) {
        (None, None) => default_policy,
        (None, Some(_)) => return Err(Error::Config("--filter-value needs --filter-mode".into())),
        (Some(FilterMode::None), _) => SecantFilterPolicy::None,
        (Some(FilterMode::Absolute), Some(v)) => SecantFilterPolicy::AbsoluteMinLength(v),
        (Some(FilterMode::Fraction), Some(v)) => SecantFilterPolicy::DropShortestFraction(v),
        (Some(_), None) => return Err(Error::Config("--filter-mode needs --filter-value".into())),
    };
    cfg = cfg.with_seed(flags.seed);
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let count = a.count as usize;
    let manifold = |kind| gen_manifold_samples(kind, count, a.seed);
    let cloud = match a.kind {
        GenKind::TrigCurve6d => manifold(ManifoldKind::TrigCurve6d)?,
        GenKind::Torus10d => manifold(ManifoldKind::Torus10d)?,
        GenKind::Rp2_10d => manifold(ManifoldKind::Rp2_10d)?,
        GenKind::S3_10d => manifold(ManifoldKind::S3_10d)?,
        GenKind::Gaussian => manifold(ManifoldKind::Gaussian)?,
        GenKind::Majority6d => gen_gaussian_majority(count, a.seed)?,
    };
    write_cloud(&cloud, &a.output)
}

pub fn cmd_profile(a: &ProfileArgs) -> Result<()> {
    let cloud = read_cloud(&a.input)?;
    let cfg = profile_config(&a.profile, DimensionRange::default_for(cloud.dim())?, SecantFilterPolicy::None)?;
    let profile = compute_kappa_profile(&cloud, &cfg)?;
    emit(&profile.to_record(), a.output.as_deref())
}

/// Default dims for a rare sample: `1..=min(n, 10)` capped so every profile the
/// command needs stays solvable.
fn rare_dims(rare: &PointCloud, spare: usize) -> Result<DimensionRange> {
    let cap = rare.dim().min(crate::profile::DEFAULT_MAX_DIM).min(rare.len().saturating_sub(spare));
    DimensionRange::consecutive(1, cap.max(1))
}

pub fn cmd_threshold(a: &ThresholdArgs) -> Result<()> {
    let rare = read_cloud(&a.rare)?;
    warn_r(a.r);
    let cfg = profile_config(&a.profile, rare_dims(&rare, 2)?, SecantFilterPolicy::None)?;
    let report = determine_threshold(&rare, a.r, &cfg)?;
    emit(&report.to_record(), a.output.as_deref())
}

pub fn cmd_detect(a: &DetectArgs) -> Result<()> {
    let rare = read_cloud(&a.rare)?;
    let unlabeled = read_cloud(&a.unlabeled)?;
    if rare.dim() != unlabeled.dim() {
        return Err(Error::Incompatible(format!(
            "rare points have dimension {}, unlabeled points {}",
            rare.dim(),
            unlabeled.dim()
        )));
    }
    let spare = if a.auto_threshold_r.is_some() { 2 } else { 1 };
    let cfg = profile_config(&a.profile, rare_dims(&rare, spare)?, SecantFilterPolicy::None)?;
    let threshold = match (a.threshold, a.auto_threshold_r) {
        (Some(t), _) => t,
        (None, Some(r)) => {
            warn_r(r);
            determine_threshold(&rare, r, &cfg)?.threshold
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let detection = DetectionConfig {
        threshold,
        profile: cfg,
    };
    let outcomes = kappa_detect(&rare, &unlabeled, &detection)?;
    emit(&format_outcomes(&outcomes, unlabeled.labels()), a.output.as_deref())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let seed = a.profile.seed;
    let (cloud, mut spec, outliers) = match a.preset {
        Some(p) => {
            let preset = Preset::from(p);
            let raw = preset.load(&a.data)?;
            let pe = preset_experiment(preset, &raw, seed)?;
            (pe.cloud, pe.spec, pe.suggested_outliers)
        }
        None => {
            let cloud = read_cloud(&a.data)?;
            let rare_label = a
                .rare_label
                .clone()
                .ok_or_else(|| Error::Config("--rare-label is required without --preset".into()))?;
            let n_labeled = a
                .n_labeled
                .ok_or_else(|| Error::Config("--n-labeled is required without --preset".into()))?;
            let threshold = ThresholdRule::LeaveOneOut { r: crate::detector::DEFAULT_R };
            let dims = dims_for(cloud.dim(), n_labeled as usize, &threshold)?;
            let spec = ExperimentSpec {
                rare_label,
                n_labeled_rare: n_labeled as usize,
                runs: 10,
                majority_subsample: None,
                threshold,
                profile: ProfileConfig::new(dims),
                master_seed: seed,
                excluded_from_labeled: Vec::new(),
            };
            (cloud, spec, Vec::new())
        }
    };
    if let Some(label) = &a.rare_label {
        spec.rare_label = label.clone();
    }
    if let Some(n) = a.n_labeled {
        spec.n_labeled_rare = n as usize;
    }
    if let Some(runs) = a.runs {
        spec.runs = runs as usize;
    }
    if let Some(m) = a.majority_subsample {
        spec.majority_subsample = Some(m as usize);
    }
    if let Some(t) = a.threshold {
        spec.threshold = ThresholdRule::Fixed(t);
    }
    if let Some(r) = a.auto_threshold_r {
        warn_r(r);
        spec.threshold = ThresholdRule::LeaveOneOut { r };
    }
    if a.exclude_outliers {
        if outliers.is_empty() {
            eprintln!("warning: no outliers are known for this dataset");
        }
        spec.excluded_from_labeled = outliers;
    }
    let default_dims = match &a.profile.dims {
        Some(_) => spec.profile.dims.clone(),
        None => dims_for(cloud.dim(), spec.n_labeled_rare, &spec.threshold)?,
    };
    spec.profile = profile_config(&a.profile, default_dims, spec.profile.policy)?;

    let report = run_experiment(&cloud, &spec)?;
    let record = report.to_record();
    match &a.output {
        None => emit(&record, None),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let histogram = export_histogram(&report.all_outcomes(), a.bins as usize)?;
            emit(&record, Some(&dir.join("report.txt")))?;
            emit(&report.outcomes_record(), Some(&dir.join("outcomes.csv")))?;
            emit(&histogram.to_record(), Some(&dir.join("histogram.txt")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_flag() {
        assert_eq!(parse_dims("1..6").unwrap().dims(), &[1, 2, 3, 4, 5, 6]);
        assert_eq!(parse_dims("3").unwrap().dims(), &[3]);
        assert_eq!(parse_dims("2..=4").unwrap().dims(), &[2, 3, 4]);
        assert!(parse_dims("4..2").is_err());
        assert!(parse_dims("0..2").is_err());
        assert!(parse_dims("a..b").is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["kappa-detect", "gen", "klein", "--count", "3", "--output", "x"]), EXIT_USAGE);
        assert_eq!(run(["kappa-detect", "gen", "gaussian", "--count", "0", "--output", "x"]), EXIT_USAGE);
        assert_eq!(run(["kappa-detect"]), EXIT_USAGE);
        assert_eq!(run(["kappa-detect", "--help"]), EXIT_OK);
    }

    #[test]
    fn filter_flags() {
        let flags = |mode, value| ProfileFlags {
            dims: None,
            trials: None,
            filter_mode: mode,
            filter_value: value,
            seed: 0,
        };
        let dims = DimensionRange::consecutive(1, 2).unwrap();
        let base = SecantFilterPolicy::DropShortestFraction(0.05);
        let cfg = profile_config(&flags(None, None), dims.clone(), base).unwrap();
        assert_eq!(cfg.policy, base);
        let cfg = profile_config(&flags(Some(FilterMode::Absolute), Some(0.5)), dims.clone(), base).unwrap();
        assert_eq!(cfg.policy, SecantFilterPolicy::AbsoluteMinLength(0.5));
        let cfg = profile_config(&flags(Some(FilterMode::None), None), dims.clone(), base).unwrap();
        assert_eq!(cfg.policy, SecantFilterPolicy::None);
        assert!(profile_config(&flags(Some(FilterMode::Fraction), None), dims.clone(), base).is_err());
        assert!(profile_config(&flags(None, Some(0.1)), dims.clone(), base).is_err());
        assert!(profile_config(&flags(Some(FilterMode::Fraction), Some(1.5)), dims, base).is_err());
    }
}
