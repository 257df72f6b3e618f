//! κ-detection: classify an unlabeled point as rare when adding it to the
//! labeled rare sample barely moves the sample's κ-profile.
//!
//! Every profile computed for one detector (the baseline, each `rare ∪ {y}`,
//! and each leave-one-out `rare ∖ {x}`) uses the same solver seeds. With the
//! default [`Seeding::Baseline`], each perturbed profile also starts every
//! trial and dimension from the baseline's solution, so `d_y` measures how far
//! the new point moves those local optima rather than which optimum a fresh
//! start happens to find. A point that adds no secants, such as a duplicate of
//! a labeled point, leaves the profile unchanged and scores exactly zero.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{compute_normalized_secants, PointCloud, SecantSet};
use crate::profile::{
    profile_distance, profile_of_secants, profile_with_solutions, refine_profile, KappaProfile, ProfileConfig,
    ProfileSolutions, Seeding,
};

/// Default multiplier applied to the mean leave-one-out distance.
pub const DEFAULT_R: f64 = 1.3;
/// Multipliers that usually give a sensible starting threshold.
pub const RECOMMENDED_R: RangeInclusive<f64> = 1.1..=1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Rare,
    Majority,
}

impl Prediction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Prediction::Rare => "rare",
            Prediction::Majority => "majority",
        }
    }
}

/// Rare iff `d_y < threshold`; a tie goes to the majority class.
pub fn classify(d_y: f64, threshold: f64) -> Prediction {
    if d_y < threshold {
        Prediction::Rare
    } else {
        Prediction::Majority
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    pub threshold: f64,
    pub profile: ProfileConfig,
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err(Error::Config(format!(
                "threshold must be finite and non-negative, got {}",
                self.threshold
            )));
        }
        self.profile.validate()
    }
}

#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    /// Index into the unlabeled cloud.
    pub point_index: usize,
    pub d_y: f64,
    pub predicted: Prediction,
    /// Trial-averaged profile of `rare ∪ {y}`.
    pub profile: KappaProfile,
}

/// A rare-class sample with its baseline profile.
#[derive(Debug, Clone)]
pub struct Detector {
    rare: PointCloud,
    cfg: ProfileConfig,
    secants: SecantSet,
    baseline: KappaProfile,
    solutions: ProfileSolutions,
}

impl Detector {
    /// Computes the baseline profile of `rare`. Needs at least `max(dims) + 1`
    /// points.
    pub fn fit(rare: &PointCloud, cfg: &ProfileConfig) -> Result<Self> {
        cfg.validate()?;
        let need = cfg.dims.max() + 1;
        if rare.len() < need {
            return Err(Error::InsufficientRare {
                have: rare.len(),
                need,
            });
        }
        cfg.dims.check_ambient(rare.dim())?;
        let rare = rare.unlabeled();
        let secants = compute_normalized_secants(&rare, cfg.policy)?;
        let (baseline, solutions) = profile_with_solutions(&secants, cfg)?;
        Ok(Self {
            rare,
            cfg: cfg.clone(),
            secants,
            baseline,
            solutions,
        })
    }

    /// Profile of a perturbation of the rare sample, started as `cfg.seeding`
    /// says.
    fn perturbed_profile(&self, cloud: &PointCloud) -> Result<KappaProfile> {
        let secants = compute_normalized_secants(cloud, self.cfg.policy)?;
        if secants.matrix() == self.secants.matrix() {
            return Ok(self.baseline.clone());
        }
        match self.cfg.seeding {
            Seeding::Baseline => refine_profile(&secants, &self.cfg, &self.solutions),
            Seeding::Independent => profile_of_secants(&secants, &self.cfg),
        }
    }

    pub fn baseline(&self) -> &KappaProfile {
        &self.baseline
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.cfg
    }

    /// `d_y` and the profile of `rare ∪ {y}`.
    pub fn score(&self, y: &[f64]) -> Result<(f64, KappaProfile)> {
        let augmented = self.rare.with_point(y)?;
        let profile = self.perturbed_profile(&augmented)?;
        let d = profile_distance(&self.baseline, &profile)?;
        Ok((d, profile))
    }

    /// Scores every point of `unlabeled`, preserving order.
    pub fn detect(&self, unlabeled: &PointCloud, threshold: f64) -> Result<Vec<DetectionOutcome>> {
        if unlabeled.dim() != self.rare.dim() {
            return Err(Error::Incompatible(format!(
                "unlabeled points have dimension {}, rare points {}",
                unlabeled.dim(),
                self.rare.dim()
            )));
        }
        (0..unlabeled.len())
            .into_par_iter()
            .map(|i| {
                let (d_y, profile) = self.score(unlabeled.point(i))?;
                Ok(DetectionOutcome {
                    point_index: i,
                    d_y,
                    predicted: classify(d_y, threshold),
                    profile,
                })
            })
            .collect()
    }
}

/// Classifies every point of `unlabeled` against the rare sample.
pub fn kappa_detect(
    rare: &PointCloud,
    unlabeled: &PointCloud,
    cfg: &DetectionConfig,
) -> Result<Vec<DetectionOutcome>> {
    cfg.validate()?;
    if unlabeled.dim() != rare.dim() {
        return Err(Error::Incompatible(format!(
            "unlabeled points have dimension {}, rare points {}",
            unlabeled.dim(),
            rare.dim()
        )));
    }
    Detector::fit(rare, &cfg.profile)?.detect(unlabeled, cfg.threshold)
}

/// Leave-one-out threshold estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// `d_x` for each labeled rare point, in input order.
    pub per_point_distances: Vec<f64>,
    pub d_avg: f64,
    pub r: f64,
    pub threshold: f64,
}

impl ThresholdReport {
    /// `key=value` header followed by `index,d_x` rows.
    pub fn to_record(&self) -> String {
        let mut out = format!(
            "d_avg={:.6}\nr={:.6}\nthreshold={:.6}\nindex,d_x\n",
            self.d_avg, self.r, self.threshold
        );
        for (i, d) in self.per_point_distances.iter().enumerate() {
            let _ = writeln!(out, "{i},{d:.6}");
        }
        out
    }
}

/// `threshold = r · mean(distances)`.
pub fn threshold_from_distances(distances: Vec<f64>, r: f64) -> Result<ThresholdReport> {
    if distances.is_empty() {
        return Err(Error::EmptyInput("no leave-one-out distances".into()));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Config(format!("r must be positive, got {r}")));
    }
    let d_avg = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(ThresholdReport {
        per_point_distances: distances,
        d_avg,
        r,
        threshold: r * d_avg,
    })
}

/// For each labeled rare point `x`, the distance between the profile of the
/// whole sample and the profile of the sample without `x`; the threshold is
/// `r` times their mean. Needs at least `max(dims) + 2` points.
pub fn determine_threshold(rare: &PointCloud, r: f64, cfg: &ProfileConfig) -> Result<ThresholdReport> {
    cfg.validate()?;
    let need = cfg.dims.max() + 2;
    if rare.len() < need {
        return Err(Error::InsufficientRare {
            have: rare.len(),
            need,
        });
    }
    let detector = Detector::fit(rare, cfg)?;
    let distances: Vec<f64> = (0..rare.len())
        .into_par_iter()
        .map(|i| {
            let reduced = detector.rare.without_point(i)?;
            profile_distance(&detector.baseline, &detector.perturbed_profile(&reduced)?)
        })
        .collect::<Result<_>>()?;
    threshold_from_distances(distances, r)
}

/// Delimited outcome rows: `point_index,d_y,predicted,true_label`. The label
/// column is empty when labels are unknown.
pub fn format_outcomes(outcomes: &[DetectionOutcome], true_labels: Option<&[String]>) -> String {
    let mut out = String::from("point_index,d_y,predicted,true_label\n");
    for o in outcomes {
        let label = true_labels
            .and_then(|l| l.get(o.point_index))
            .map(String::as_str)
            .unwrap_or("");
        let _ = writeln!(
            out,
            "{},{:.6},{},{}",
            o.point_index,
            o.d_y,
            o.predicted.as_str(),
            label
        );
    }
    out
}
