//! Repeated randomized experiments on labeled data: per-run splits into a
//! labeled rare sample and an unlabeled pool, detection, and the two headline
//! percentages. Also histograms of `d_y` and singular-value spectra.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::datasets::{standardize, Preset};
use crate::detector::{determine_threshold, Detector, Prediction, DEFAULT_R};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SecantFilterPolicy};
use crate::profile::{DimensionRange, ProfileConfig, DEFAULT_MAX_DIM};
use crate::seed::{derive_seed, rng_from, tag};

/// How each run picks its threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Fixed(f64),
    /// Leave-one-out estimate over the labeled rare sample, scaled by `r`.
    LeaveOneOut { r: f64 },
}

impl ThresholdRule {
    fn describe(&self) -> (&'static str, f64) {
        match *self {
            ThresholdRule::Fixed(t) => ("fixed", t),
            ThresholdRule::LeaveOneOut { r } => ("leave_one_out", r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub rare_label: String,
    pub n_labeled_rare: usize,
    pub runs: usize,
    /// Majority points kept in each run's unlabeled pool; all when `None`.
    pub majority_subsample: Option<usize>,
    pub threshold: ThresholdRule,
    pub profile: ProfileConfig,
    pub master_seed: u64,
    /// Cloud indices of rare points never drawn into the labeled sample. They
    /// stay in the unlabeled pool.
    pub excluded_from_labeled: Vec<usize>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.n_labeled_rare == 0 {
            return Err(Error::Config("n_labeled_rare must be >= 1".into()));
        }
        if self.majority_subsample == Some(0) {
            return Err(Error::Config("majority_subsample must be >= 1".into()));
        }
        match self.threshold {
            ThresholdRule::Fixed(t) if !(t.is_finite() && t >= 0.0) => {
                return Err(Error::Config(format!("threshold must be non-negative, got {t}")))
            }
            ThresholdRule::LeaveOneOut { r } if !(r.is_finite() && r > 0.0) => {
                return Err(Error::Config(format!("r must be positive, got {r}")))
            }
            _ => {}
        }
        self.profile.validate()
    }
}

/// One scored unlabeled point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledOutcome {
    /// Index into the evaluated cloud.
    pub index: usize,
    pub d_y: f64,
    pub predicted: Prediction,
    pub is_rare: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub run: usize,
    pub threshold: f64,
    /// Cloud indices of the labeled rare sample.
    pub labeled: Vec<usize>,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub outcomes: Vec<LabeledOutcome>,
}

impl RunMetrics {
    pub fn pct_rare_identified(&self) -> f64 {
        percent(self.tp, self.tp + self.fn_)
    }

    pub fn pct_majority_misidentified(&self) -> f64 {
        percent(self.fp, self.fp + self.tn)
    }
}

fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rare_label: String,
    pub n_labeled_rare: usize,
    pub pct_rare_identified: f64,
    pub pct_majority_misidentified: f64,
    pub per_run: Vec<RunMetrics>,
    pub spec: ExperimentSpec,
}

impl MetricsReport {
    /// `d_y` of every scored point of one class, pooled over runs.
    pub fn pooled_distances(&self, rare: bool) -> Vec<f64> {
        self.per_run
            .iter()
            .flat_map(|r| r.outcomes.iter())
            .filter(|o| o.is_rare == rare)
            .map(|o| o.d_y)
            .collect()
    }

    pub fn median_d_rare(&self) -> Option<f64> {
        median(self.pooled_distances(true))
    }

    pub fn median_d_majority(&self) -> Option<f64> {
        median(self.pooled_distances(false))
    }

    /// Every outcome of every run, in run order.
    pub fn all_outcomes(&self) -> Vec<LabeledOutcome> {
        self.per_run.iter().flat_map(|r| r.outcomes.iter().copied()).collect()
    }

    /// `key=value` header, then one row per run.
    pub fn to_record(&self) -> String {
        let s = &self.spec;
        let dims: Vec<String> = s.profile.dims.dims().iter().map(usize::to_string).collect();
        let (rule, param) = s.threshold.describe();
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        let _ = writeln!(out, "rare_label={}", self.rare_label);
        let _ = writeln!(out, "n_labeled_rare={}", self.n_labeled_rare);
        let _ = writeln!(out, "runs={}", self.per_run.len());
        let _ = writeln!(out, "master_seed={}", s.master_seed);
        let _ = writeln!(out, "dims={}", dims.join(","));
        let _ = writeln!(out, "trials={}", s.profile.trials);
        let _ = writeln!(out, "filter_mode={}", s.profile.policy.mode_name());
        let _ = writeln!(out, "filter_value={:.6}", s.profile.policy.value());
        let _ = writeln!(out, "threshold_rule={rule}");
        let _ = writeln!(out, "threshold_param={param:.6}");
        let _ = writeln!(
            out,
            "majority_subsample={}",
            s.majority_subsample.map_or_else(|| "none".to_string(), |m| m.to_string())
        );
        let excluded: Vec<String> = s.excluded_from_labeled.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "excluded_from_labeled={}", excluded.join(","));
        let _ = writeln!(out, "pct_rare_identified={:.6}", self.pct_rare_identified);
        let _ = writeln!(out, "pct_majority_misidentified={:.6}", self.pct_majority_misidentified);
        let _ = writeln!(out, "median_d_rare={}", fmt_opt(self.median_d_rare()));
        let _ = writeln!(out, "median_d_majority={}", fmt_opt(self.median_d_majority()));
        out.push_str("run,threshold,tp,fn,fp,tn,pct_rare_identified,pct_majority_misidentified\n");
        for r in &self.per_run {
            let _ = writeln!(
                out,
                "{},{:.6},{},{},{},{},{:.6},{:.6}",
                r.run,
                r.threshold,
                r.tp,
                r.fn_,
                r.fp,
                r.tn,
                r.pct_rare_identified(),
                r.pct_majority_misidentified()
            );
        }
        out
    }

    /// One row per scored point: `run,index,d_y,predicted,true_class`.
    pub fn outcomes_record(&self) -> String {
        let mut out = String::from("run,index,d_y,predicted,true_class\n");
        for r in &self.per_run {
            for o in &r.outcomes {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{},{}",
                    r.run,
                    o.index,
                    o.d_y,
                    o.predicted.as_str(),
                    if o.is_rare { "rare" } else { "majority" }
                );
            }
        }
        out
    }
}

/// Median of a sample; `None` when empty.
pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Runs `spec.runs` independent splits of `cloud` and averages the metrics.
///
/// Run `i` draws its split and solver streams from `(master_seed, i)`, so the
/// report does not depend on scheduling.
pub fn run_experiment(cloud: &PointCloud, spec: &ExperimentSpec) -> Result<MetricsReport> {
    spec.validate()?;
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::Config("experiments need a labeled cloud".into()))?;
    let rare: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] == spec.rare_label).collect();
    let majority: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] != spec.rare_label).collect();
    if let Some(&bad) = spec.excluded_from_labeled.iter().find(|i| !rare.contains(i)) {
        return Err(Error::Config(format!(
            "excluded index {bad} is not a '{}' point",
            spec.rare_label
        )));
    }
    let eligible: Vec<usize> = rare
        .iter()
        .copied()
        .filter(|i| !spec.excluded_from_labeled.contains(i))
        .collect();
    if rare.len() <= spec.n_labeled_rare || eligible.len() < spec.n_labeled_rare {
        return Err(Error::Config(format!(
            "class '{}' has {} points ({} eligible for labeling); need more than {}",
            spec.rare_label,
            rare.len(),
            eligible.len(),
            spec.n_labeled_rare
        )));
    }
    if majority.is_empty() {
        return Err(Error::Config("no majority-class points".into()));
    }

    let per_run: Vec<RunMetrics> = (0..spec.runs)
        .into_par_iter()
        .map(|run| one_run(cloud, spec, run, &rare, &eligible, &majority))
        .collect::<Result<_>>()?;
    let runs = per_run.len() as f64;
    Ok(MetricsReport {
        rare_label: spec.rare_label.clone(),
        n_labeled_rare: spec.n_labeled_rare,
        pct_rare_identified: per_run.iter().map(RunMetrics::pct_rare_identified).sum::<f64>() / runs,
        pct_majority_misidentified: per_run
            .iter()
            .map(RunMetrics::pct_majority_misidentified)
            .sum::<f64>()
            / runs,
        per_run,
        spec: spec.clone(),
    })
}

fn one_run(
    cloud: &PointCloud,
    spec: &ExperimentSpec,
    run: usize,
    rare: &[usize],
    eligible: &[usize],
    majority: &[usize],
) -> Result<RunMetrics> {
    let run_seed = derive_seed(spec.master_seed, &[tag::RUN, run as u64]);
    let mut rng = rng_from(derive_seed(run_seed, &[tag::RUN_SPLIT]));

    let mut labeled: Vec<usize> = sample(&mut rng, eligible.len(), spec.n_labeled_rare)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    labeled.sort_unstable();
    let mut pool: Vec<usize> = rare.iter().copied().filter(|i| !labeled.contains(i)).collect();
    match spec.majority_subsample {
        Some(m) if m < majority.len() => {
            pool.extend(sample(&mut rng, majority.len(), m).into_iter().map(|i| majority[i]));
        }
        _ => pool.extend_from_slice(majority),
    }
    pool.sort_unstable();

    let cfg = spec
        .profile
        .with_seed(derive_seed(run_seed, &[tag::RUN_SOLVER]));
    let rare_cloud = cloud.select(&labeled)?.unlabeled();
    let threshold = match spec.threshold {
        ThresholdRule::Fixed(t) => t,
        ThresholdRule::LeaveOneOut { r } => determine_threshold(&rare_cloud, r, &cfg)?.threshold,
    };
    let detector = Detector::fit(&rare_cloud, &cfg)?;
    let unlabeled = cloud.select(&pool)?.unlabeled();
    let scored = detector.detect(&unlabeled, threshold)?;

    let labels = cloud.labels().expect("checked by caller");
    let mut m = RunMetrics {
        run,
        threshold,
        labeled,
        tp: 0,
        fn_: 0,
        fp: 0,
        tn: 0,
        outcomes: Vec::with_capacity(scored.len()),
    };
    for o in scored {
        let index = pool[o.point_index];
        let is_rare = labels[index] == spec.rare_label;
        match (is_rare, o.predicted) {
            (true, Prediction::Rare) => m.tp += 1,
            (true, Prediction::Majority) => m.fn_ += 1,
            (false, Prediction::Rare) => m.fp += 1,
            (false, Prediction::Majority) => m.tn += 1,
        }
        m.outcomes.push(LabeledOutcome {
            index,
            d_y: o.d_y,
            predicted: o.predicted,
            is_rare,
        });
    }
    Ok(m)
}

/// Per-class counts over equal-width bins spanning `[0, max d_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` bin edges.
    pub edges: Vec<f64>,
    pub rare: Vec<usize>,
    pub majority: Vec<usize>,
}

impl Histogram {
    pub fn to_record(&self) -> String {
        let mut out = format!(
            "bins={}\nmax_d_y={:.6}\nlower,upper,rare,majority\n",
            self.rare.len(),
            self.edges.last().copied().unwrap_or(0.0)
        );
        for i in 0..self.rare.len() {
            let _ = writeln!(
                out,
                "{:.6},{:.6},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.rare[i],
                self.majority[i]
            );
        }
        out
    }
}

/// Bins `d_y` by true class. The last bin is closed on the right; when every
/// `d_y` is zero all points land in the first bin.
pub fn export_histogram(outcomes: &[LabeledOutcome], bins: usize) -> Result<Histogram> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("no outcomes to bin".into()));
    }
    if bins == 0 {
        return Err(Error::Config("bins must be >= 1".into()));
    }
    let max = outcomes.iter().map(|o| o.d_y).fold(0.0, f64::max);
    let width = max / bins as f64;
    let mut rare = vec![0; bins];
    let mut majority = vec![0; bins];
    for o in outcomes {
        let b = if max > 0.0 {
            ((o.d_y / width) as usize).min(bins - 1)
        } else {
            0
        };
        if o.is_rare {
            rare[b] += 1;
        } else {
            majority[b] += 1;
        }
    }
    let edges = (0..=bins)
        .map(|i| if i == bins { max } else { i as f64 * width })
        .collect();
    Ok(Histogram {
        edges,
        rare,
        majority,
    })
}

/// Singular values of the mean-centered data, largest first and scaled so the
/// largest is 1. Always `dim` values long; missing ones are zero.
pub fn singular_value_profile(cloud: &PointCloud) -> Result<Vec<f64>> {
    if cloud.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "need at least 2 points, got {}",
            cloud.len()
        )));
    }
    let n = cloud.dim();
    let count = cloud.len();
    let mut mean = vec![0.0; n];
    for p in cloud.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let centered = DMatrix::from_fn(count, n, |i, j| cloud.point(i)[j] - mean[j]);
    let mut values: Vec<f64> = centered.singular_values().iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let top = values[0];
    if top <= 0.0 {
        return Err(Error::DegenerateSecants("all points coincide".into()));
    }
    values.resize(n, 0.0);
    Ok(values.into_iter().map(|v| v / top).collect())
}

/// Fraction of secants dropped by the experiment presets.
pub const DEFAULT_FILTER_FRACTION: f64 = 0.05;
/// Rare points kept from the page-blocks table.
pub const PAGE_BLOCKS_RARE_COUNT: usize = 31;
/// Majority points scored per page-blocks run.
pub const PAGE_BLOCKS_MAJORITY_SUBSAMPLE: usize = 1000;
/// Fixed threshold of the shuttle experiment.
pub const SHUTTLE_THRESHOLD: f64 = 0.05;
/// Majority points per shuttle run.
pub const SHUTTLE_MAJORITY_SUBSAMPLE: usize = 500;

/// The largest usable dimension range: `1..=min(n, 10, n_labeled − 2)` for
/// leave-one-out thresholds (each reduced sample needs `k + 1` points) and
/// `1..=min(n, 10, n_labeled − 1)` otherwise.
pub fn dims_for(n: usize, n_labeled: usize, rule: &ThresholdRule) -> Result<DimensionRange> {
    let spare = match rule {
        ThresholdRule::LeaveOneOut { .. } => 2,
        ThresholdRule::Fixed(_) => 1,
    };
    let cap = n.min(DEFAULT_MAX_DIM).min(n_labeled.saturating_sub(spare));
    if cap == 0 {
        return Err(Error::Config(format!(
            "{n_labeled} labeled points leave no usable dimension"
        )));
    }
    DimensionRange::consecutive(1, cap)
}

/// Data preparation and default experiment for one of the presets.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetExperiment {
    pub cloud: PointCloud,
    pub spec: ExperimentSpec,
    /// Rare points that sit far from the rest of the rare class (page blocks
    /// only). They are not excluded by default.
    pub suggested_outliers: Vec<usize>,
}

/// Prepares `raw` (parsed with the preset schema) and builds the default
/// experiment.
///
/// Features are standardized. For page blocks the rare class is subsampled to
/// 31 points with a fixed seed, and its two points farthest from the principal
/// line of the remaining rare points are reported as outliers.
pub fn preset_experiment(preset: Preset, raw: &PointCloud, master_seed: u64) -> Result<PresetExperiment> {
    let rare_label = preset.rare_label().to_string();
    let mut cloud = standardize(raw)?;
    let (n_labeled, threshold, majority_subsample) = match preset {
        Preset::Ecoli => (9, ThresholdRule::LeaveOneOut { r: DEFAULT_R }, None),
        Preset::PageBlocks => (
            8,
            ThresholdRule::LeaveOneOut { r: DEFAULT_R },
            Some(PAGE_BLOCKS_MAJORITY_SUBSAMPLE),
        ),
        Preset::Shuttle => (
            10,
            ThresholdRule::Fixed(SHUTTLE_THRESHOLD),
            Some(SHUTTLE_MAJORITY_SUBSAMPLE),
        ),
        Preset::Glass => (9, ThresholdRule::LeaveOneOut { r: DEFAULT_R }, None),
    };
    let mut suggested_outliers = Vec::new();
    if preset == Preset::PageBlocks {
        cloud = keep_rare_subset(&cloud, &rare_label, PAGE_BLOCKS_RARE_COUNT)?;
        suggested_outliers = line_outliers(&cloud, &rare_label, 2)?;
    }
    let mut profile = ProfileConfig::new(dims_for(cloud.dim(), n_labeled, &threshold)?);
    profile.policy = SecantFilterPolicy::DropShortestFraction(DEFAULT_FILTER_FRACTION);
    let spec = ExperimentSpec {
        rare_label,
        n_labeled_rare: n_labeled,
        runs: 10,
        majority_subsample,
        threshold,
        profile,
        master_seed,
        excluded_from_labeled: Vec::new(),
    };
    Ok(PresetExperiment {
        cloud,
        spec,
        suggested_outliers,
    })
}

/// Keeps `count` randomly chosen points of `label` (fixed seed) and every
/// other point, in row order.
fn keep_rare_subset(cloud: &PointCloud, label: &str, count: usize) -> Result<PointCloud> {
    let labels = cloud.labels().expect("preset clouds are labeled");
    let members: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] == label).collect();
    if members.len() <= count {
        return Ok(cloud.clone());
    }
    let mut rng = rng_from(derive_seed(0, &[tag::PRESET_SAMPLE]));
    let chosen = sample(&mut rng, members.len(), count).into_vec();
    let mut keep: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] != label).collect();
    keep.extend(chosen.into_iter().map(|i| members[i]));
    keep.sort_unstable();
    cloud.select(&keep)
}

/// Indices of the `count` points of `label` with the largest residual from
/// the least-squares line through that class.
fn line_outliers(cloud: &PointCloud, label: &str, count: usize) -> Result<Vec<usize>> {
    let labels = cloud.labels().expect("preset clouds are labeled");
    let members: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] == label).collect();
    let sub = cloud.select(&members)?;
    let n = sub.dim();
    let mean: Vec<f64> = (0..n)
        .map(|j| sub.points().map(|p| p[j]).sum::<f64>() / sub.len() as f64)
        .collect();
    let centered = DMatrix::from_fn(sub.len(), n, |i, j| sub.point(i)[j] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (top, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    let axis = v_t.row(top).transpose();
    let mut residuals: Vec<(f64, usize)> = (0..sub.len())
        .map(|i| {
            let row = centered.row(i).transpose();
            let along = row.dot(&axis);
            ((row.norm_squared() - along * along).max(0.0), members[i])
        })
        .collect();
    residuals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = residuals.into_iter().take(count).map(|(_, i)| i).collect();
    out.sort_unstable();
    Ok(out)
}
