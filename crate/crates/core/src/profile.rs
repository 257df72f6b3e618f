//! κ-profiles: κ-values over a range of target dimensions, averaged over
//! independently initialized trials.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{compute_normalized_secants, PointCloud, SecantFilterPolicy, SecantSet};
use crate::seed::{derive_seed, rng_from, tag};
use crate::solver::{self, Projection, SolverConfig};

/// Largest dimension included by [`DimensionRange::default_for`].
pub const DEFAULT_MAX_DIM: usize = 10;
/// Default number of averaged trials.
pub const DEFAULT_TRIALS: usize = 5;

/// Strictly increasing sequence of target dimensions `k₁ < … < k_m`, all ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionRange(Vec<usize>);

impl DimensionRange {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("dimension range is empty".into()));
        }
        if dims[0] == 0 {
            return Err(Error::Config("dimensions must be >= 1".into()));
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "dimensions must be strictly increasing, got {dims:?}"
            )));
        }
        Ok(Self(dims))
    }

    /// `first, first+1, …, last`.
    pub fn consecutive(first: usize, last: usize) -> Result<Self> {
        if first > last {
            return Err(Error::Config(format!("empty dimension range {first}..{last}")));
        }
        Self::new((first..=last).collect())
    }

    /// `1, …, min(n, 10)`.
    pub fn default_for(n: usize) -> Result<Self> {
        Self::consecutive(1, n.min(DEFAULT_MAX_DIM))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false: a range holds at least one dimension.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> usize {
        *self.0.last().expect("nonempty")
    }

    /// Checks that every dimension is at most the ambient dimension `n`.
    pub fn check_ambient(&self, n: usize) -> Result<()> {
        if self.max() > n {
            return Err(Error::Dimension(format!(
                "dimension {} exceeds ambient dimension {n}",
                self.max()
            )));
        }
        Ok(())
    }
}

/// Everything needed to compute a profile of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub dims: DimensionRange,
    pub trials: usize,
    pub policy: SecantFilterPolicy,
    pub solver: SolverConfig,
    /// Initialize dimension `k_{i+1}` from the `k_i` solution plus one random column.
    pub warm_start: bool,
    /// How detection and threshold estimation start the profiles of a sample
    /// with one point added or removed.
    pub seeding: Seeding,
}

/// Starting points for the profile of a perturbed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Seeding {
    /// Each trial and dimension starts from the unperturbed sample's solution
    /// for the same trial and dimension.
    #[default]
    Baseline,
    /// Same initialization as any other profile, with the same seeds.
    Independent,
}

impl ProfileConfig {
    pub fn new(dims: DimensionRange) -> Self {
        Self {
            dims,
            trials: DEFAULT_TRIALS,
            policy: SecantFilterPolicy::None,
            solver: SolverConfig::default(),
            warm_start: true,
            seeding: Seeding::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            solver: self.solver.with_seed(seed),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        self.policy.validate()?;
        self.solver.validate()
    }
}

/// κ-values paired with their dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaProfile {
    pub dims: DimensionRange,
    pub values: Vec<f64>,
    pub trials_averaged: usize,
    /// Per-trial values, `trial_values[j][i]` for trial `j` and `dims[i]`.
    pub trial_values: Vec<Vec<f64>>,
}

impl KappaProfile {
    /// A profile from explicit values, e.g. one read back from a report.
    pub fn from_values(dims: DimensionRange, values: Vec<f64>) -> Result<Self> {
        if dims.len() != values.len() {
            return Err(Error::Incompatible(format!(
                "{} dimensions but {} values",
                dims.len(),
                values.len()
            )));
        }
        Ok(Self {
            dims,
            trial_values: vec![values.clone()],
            values,
            trials_averaged: 1,
        })
    }

    /// Flat text record: `dims=…`, `values=…`, `trials_averaged=…`, one per line.
    pub fn to_record(&self) -> String {
        let dims: Vec<String> = self.dims.dims().iter().map(|d| d.to_string()).collect();
        let values: Vec<String> = self.values.iter().map(|v| format!("{v:.6}")).collect();
        format!(
            "dims={}\nvalues={}\ntrials_averaged={}\n",
            dims.join(","),
            values.join(","),
            self.trials_averaged
        )
    }
}

/// ℓ₂ distance between two profiles over the same dimensions.
pub fn profile_distance(a: &KappaProfile, b: &KappaProfile) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Incompatible(format!(
            "profiles use different dimensions: {:?} vs {:?}",
            a.dims.dims(),
            b.dims.dims()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Profile of `cloud` under `cfg`.
pub fn compute_kappa_profile(cloud: &PointCloud, cfg: &ProfileConfig) -> Result<KappaProfile> {
    cfg.validate()?;
    cfg.dims.check_ambient(cloud.dim())?;
    let secants = compute_normalized_secants(cloud, cfg.policy)?;
    profile_of_secants(&secants, cfg)
}

/// Profile of an already computed secant set.
///
/// Trial `j` solves every dimension with streams derived from
/// `(cfg.solver.seed, j, k)`, so results do not depend on evaluation order.
pub fn profile_of_secants(secants: &SecantSet, cfg: &ProfileConfig) -> Result<KappaProfile> {
    Ok(solve_profile(secants, cfg, None)?.0)
}

/// The projections behind a profile, `[trial][dimension index]`.
#[derive(Debug, Clone)]
pub struct ProfileSolutions {
    projections: Vec<Vec<Projection>>,
}

impl ProfileSolutions {
    pub fn trials(&self) -> usize {
        self.projections.len()
    }

    pub fn get(&self, trial: usize, dim_index: usize) -> Option<&Projection> {
        self.projections.get(trial)?.get(dim_index)
    }
}

/// [`profile_of_secants`] together with the projection found for every trial
/// and dimension.
pub fn profile_with_solutions(secants: &SecantSet, cfg: &ProfileConfig) -> Result<(KappaProfile, ProfileSolutions)> {
    solve_profile(secants, cfg, None)
}

/// Profile whose trial `j` at dimension `dims[i]` starts from
/// `starts.get(j, i)` instead of a fresh initialization.
pub fn refine_profile(secants: &SecantSet, cfg: &ProfileConfig, starts: &ProfileSolutions) -> Result<KappaProfile> {
    if starts.trials() != cfg.trials || starts.projections.iter().any(|t| t.len() != cfg.dims.len()) {
        return Err(Error::Incompatible(format!(
            "starting solutions cover {} trials, the configuration asks for {} trials over {} dimensions",
            starts.trials(),
            cfg.trials,
            cfg.dims.len()
        )));
    }
    if let Some(p) = starts.projections.iter().flatten().find(|p| p.n() != secants.dim()) {
        return Err(Error::Incompatible(format!(
            "starting solutions live in dimension {}, secants in {}",
            p.n(),
            secants.dim()
        )));
    }
    Ok(solve_profile(secants, cfg, Some(starts))?.0)
}

fn solve_profile(
    secants: &SecantSet,
    cfg: &ProfileConfig,
    starts: Option<&ProfileSolutions>,
) -> Result<(KappaProfile, ProfileSolutions)> {
    cfg.validate()?;
    cfg.dims.check_ambient(secants.dim())?;
    if secants.is_empty() {
        return Err(Error::DegenerateSecants("secant set is empty".into()));
    }
    let trials: Vec<Vec<(f64, Projection)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|j| trial_profile(secants, cfg, j, starts.map(|s| s.projections[j].as_slice())))
        .collect::<Result<_>>()?;

    let m = cfg.dims.len();
    let mut values = vec![0.0; m];
    let mut trial_values = Vec::with_capacity(cfg.trials);
    let mut projections = Vec::with_capacity(cfg.trials);
    for trial in trials {
        let (kappas, ps): (Vec<f64>, Vec<Projection>) = trial.into_iter().unzip();
        for (acc, v) in values.iter_mut().zip(&kappas) {
            *acc += v;
        }
        trial_values.push(kappas);
        projections.push(ps);
    }
    for v in &mut values {
        *v /= cfg.trials as f64;
    }
    let profile = KappaProfile {
        dims: cfg.dims.clone(),
        values,
        trials_averaged: cfg.trials,
        trial_values,
    };
    Ok((profile, ProfileSolutions { projections }))
}

fn trial_profile(
    secants: &SecantSet,
    cfg: &ProfileConfig,
    trial: usize,
    starts: Option<&[Projection]>,
) -> Result<Vec<(f64, Projection)>> {
    let n = secants.dim();
    let mut out: Vec<(f64, Projection)> = Vec::with_capacity(cfg.dims.len());
    for (i, &k) in cfg.dims.dims().iter().enumerate() {
        let seed = derive_seed(cfg.solver.seed, &[tag::PROFILE_TRIAL, trial as u64, k as u64]);
        let solver_cfg = cfg.solver.with_seed(seed);
        if k == n {
            out.push((1.0, Projection::identity(n)));
            continue;
        }
        let mut rng = rng_from(seed);
        let start = match (starts, out.last()) {
            (Some(starts), _) => starts[i].clone(),
            (None, Some((_, prev))) if cfg.warm_start => {
                let mut p = prev.clone();
                while p.k() < k {
                    p = solver::screened_augment(&p, secants, &solver_cfg, &mut rng)?;
                }
                p
            }
            _ => solver::screened_projection(secants, k, &solver_cfg, &mut rng)?,
        };
        let solution = solver::iterate(secants, start, &solver_cfg, &mut rng, None);
        out.push((solution.kappa, solution.projection));
    }
    Ok(out)
}
