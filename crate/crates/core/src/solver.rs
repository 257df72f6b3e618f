//! Iterative solver for the max-min secant projection problem
//!
//! ```text
//! argmax_{P ∈ Proj(n,k)} min_{s ∈ S} ‖Pᵀs‖
//! ```
//!
//! Each iteration locates the worst-preserved secant `s*` and nudges the
//! column space of `P` toward it, `P ← orth(P + α s* (s*ᵀP))`, with a
//! diminishing step `α = step_size / (1 + iter/100)`. The best iterate seen
//! is returned, so the result is never worse than the starting projection.
//!
//! These iterations zigzag between nearly tied secants, stop some way short of
//! the local optimum, and amplify rounding differences: rotating the input by a
//! few ulps can land a run in a different local optimum. The default
//! [`Method::Ascent`] instead follows steepest ascent over the set of nearly
//! worst secants, which converges to the local optimum and depends continuously
//! on the start. [`Method::SapThenAscent`] runs both in sequence.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::SecantSet;
use crate::seed::{derive_seed, rng_from, tag};

/// Relative residual below which a column is treated as linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Secants with `f_i ≤ f + ASCENT_WINDOW·(1 − f)` enter each ascent
/// direction, at most `ASCENT_MAX_ACTIVE` of them.
const ASCENT_WINDOW: f64 = 0.25;
const ASCENT_MAX_ACTIVE: usize = 64;
/// Predicted gain below which an ascent iterate counts as stationary.
const ASCENT_STATIONARY: f64 = 1e-9;
/// Ascent also stops once this many steps together gain less than a tenth of `convergence_tol`.
const ASCENT_STALL_STEPS: usize = 10;
const ASCENT_MIN_STEP: f64 = 1e-12;

/// An `n × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    matrix: DMatrix<f64>,
}

impl Projection {
    /// The `n × n` identity, the canonical element of Proj(n, n).
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Target dimension.
    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    /// Largest deviation of `PᵀP` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.matrix.tr_mul(&self.matrix);
        let k = self.k();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// How the solver draws its starting projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Initialization {
    /// Orthonormalized `n × k` standard normal matrix: a uniformly random subspace.
    Isotropic,
    /// Orthonormalized `S·G` for a standard normal `m × k` matrix `G`: a random
    /// subspace of the secant span. Rotating the data rotates this draw with it.
    #[default]
    SecantSpan,
}

/// Iteration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Worst-secant updates only.
    Sap,
    /// Active-set steepest ascent only.
    #[default]
    Ascent,
    /// Worst-secant updates, then steepest ascent from the best iterate.
    SapThenAscent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub patience: usize,
    pub seed: u64,
    pub init: Initialization,
    pub method: Method,
    /// Random starts drawn per solve; only the one with the largest κ is iterated.
    pub screen: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_iters: 2000,
            convergence_tol: 1e-5,
            patience: 100,
            seed: 0,
            init: Initialization::default(),
            method: Method::default(),
            screen: 16,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::Config(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::Config(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be positive".into()));
        }
        if self.screen == 0 {
            return Err(Error::Config("screen must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub projection: Projection,
    pub kappa: f64,
    /// Iterations actually performed (0 for the analytic `k = n` case).
    pub iterations: usize,
}

/// Per-iteration record handed to trace hooks.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    /// κ of the current iterate.
    pub kappa: f64,
    /// Best κ seen so far, including the current iterate.
    pub best_kappa: f64,
    /// Step size used for the update that follows.
    pub step: f64,
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::Dimension(format!(
            "target dimension k = {k} must satisfy 1 <= k <= n = {n}"
        )));
    }
    Ok(())
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal basis of a uniformly random k-dimensional subspace of ℝⁿ.
pub fn random_projection(n: usize, k: usize, seed: u64) -> Result<Projection> {
    check_dims(n, k)?;
    let mut rng = rng_from(seed);
    isotropic_projection(n, k, &mut rng)
}

fn isotropic_projection(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Projection> {
    // a Gaussian matrix is rank deficient with probability zero; redraw if it happens
    loop {
        match orthonormalize(&gaussian_matrix(n, k, rng)) {
            Ok(p) => return Ok(p),
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Subtracts the projection of `v` onto the orthonormal columns `basis[..cols]`,
/// twice for numerical safety, and returns the residual norm.
fn orthogonalize_against(v: &mut DVector<f64>, basis: &DMatrix<f64>, cols: usize) -> f64 {
    for _ in 0..2 {
        for c in 0..cols {
            let q = basis.column(c);
            let dot = q.dot(v);
            v.axpy(-dot, &q, 1.0);
        }
    }
    v.norm()
}

/// Modified Gram–Schmidt with re-orthogonalization.
///
/// Output column `j` spans the same flag as the first `j` input columns and
/// has a positive dot product with input column `j`.
pub fn orthonormalize(matrix: &DMatrix<f64>) -> Result<Projection> {
    let (n, k) = matrix.shape();
    check_dims(n, k)?;
    let mut q = DMatrix::zeros(n, k);
    for j in 0..k {
        let mut v: DVector<f64> = matrix.column(j).into_owned();
        let scale = v.norm();
        if !scale.is_finite() {
            return Err(Error::Dimension(format!("column {j} is not finite")));
        }
        let residual = orthogonalize_against(&mut v, &q, j);
        if scale == 0.0 || residual <= RANK_TOL * scale {
            return Err(Error::RankDeficient {
                column: j,
                residual,
            });
        }
        v /= residual;
        q.set_column(j, &v);
    }
    Ok(Projection { matrix: q })
}

/// `min_s ‖Pᵀs‖` together with the index of the first minimizing secant.
fn worst_secant(p: &DMatrix<f64>, secants: &DMatrix<f64>) -> (f64, usize) {
    let projected = p.tr_mul(secants);
    let mut best = (f64::INFINITY, 0usize);
    for (j, col) in projected.column_iter().enumerate() {
        let sq = col.norm_squared();
        if sq < best.0 {
            best = (sq, j);
        }
    }
    (best.0.sqrt(), best.1)
}

/// Minimizes `½ λᵀQλ + cᵀλ` over the probability simplex by a primal
/// active-set method. `Q` must be positive semidefinite; a ridge of relative
/// size 1e-10 keeps every equality subproblem well posed.
fn simplex_qp(q: &DMatrix<f64>, c: &[f64]) -> Vec<f64> {
    let m = c.len();
    let scale = (0..m).map(|i| q[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut q = q.clone();
    for i in 0..m {
        q[(i, i)] += 1e-10 * scale;
    }
    let tol = 1e-13 * (scale + c.iter().fold(0.0f64, |acc, x| acc.max(x.abs())));
    let grad = |w: &[f64], j: usize| c[j] + (0..m).map(|i| w[i] * q[(i, j)]).sum::<f64>();

    let start = (0..m)
        .min_by(|&i, &j| (0.5 * q[(i, i)] + c[i]).total_cmp(&(0.5 * q[(j, j)] + c[j])))
        .expect("at least one term");
    let mut weights = vec![0.0; m];
    weights[start] = 1.0;
    let mut support = vec![start];

    for _ in 0..(10 * m + 10) {
        let g: Vec<f64> = (0..m).map(|j| grad(&weights, j)).collect();
        let level = (0..m).map(|j| weights[j] * g[j]).sum::<f64>();
        let (j, gj) = (0..m)
            .map(|j| (j, g[j]))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty");
        if level - gj <= tol || support.contains(&j) {
            break;
        }
        support.push(j);
        loop {
            let Some(mu) = face_minimizer(&q, c, &support) else {
                return weights;
            };
            if mu.iter().all(|&x| x > 0.0) {
                weights.iter_mut().for_each(|w| *w = 0.0);
                for (&i, &x) in support.iter().zip(&mu) {
                    weights[i] = x;
                }
                break;
            }
            // walk toward the face minimizer until a weight hits zero
            let mut theta = 1.0f64;
            for (&i, &x) in support.iter().zip(&mu) {
                if x <= 0.0 {
                    let denom = weights[i] - x;
                    if denom > 0.0 {
                        theta = theta.min(weights[i] / denom);
                    }
                }
            }
            for (&i, &x) in support.iter().zip(&mu) {
                weights[i] += theta * (x - weights[i]);
            }
            support.retain(|&i| weights[i] > 1e-14);
            for (i, w) in weights.iter_mut().enumerate() {
                if !support.contains(&i) {
                    *w = 0.0;
                }
            }
            if support.is_empty() {
                weights[start] = 1.0;
                return weights;
            }
        }
    }
    weights
}

/// Minimizer of `½ λᵀQλ + cᵀλ` over the affine hull `Σ λ_i = 1` of `support`.
fn face_minimizer(q: &DMatrix<f64>, c: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let m = support.len();
    let mut system = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for (r, &i) in support.iter().enumerate() {
        for (col, &j) in support.iter().enumerate() {
            system[(r, col)] = q[(i, j)];
        }
        system[(r, m)] = 1.0;
        system[(m, r)] = 1.0;
        rhs[r] = -c[i];
    }
    rhs[m] = 1.0;
    let solution = system.lu().solve(&rhs)?;
    let mu: Vec<f64> = solution.iter().take(m).copied().collect();
    mu.iter().all(|x| x.is_finite()).then_some(mu)
}

/// κ-value of a fixed projection: the length of the worst-preserved secant.
pub fn kappa_of(p: &Projection, secants: &SecantSet) -> Result<f64> {
    if secants.is_empty() {
        return Err(Error::DegenerateSecants("secant set is empty".into()));
    }
    if secants.dim() != p.n() {
        return Err(Error::Incompatible(format!(
            "secants live in dimension {}, projection in {}",
            secants.dim(),
            p.n()
        )));
    }
    Ok(worst_secant(p.matrix(), secants.matrix()).0)
}

/// Draws a starting projection according to `init`.
pub fn initial_projection(
    secants: &SecantSet,
    k: usize,
    init: Initialization,
    rng: &mut ChaCha8Rng,
) -> Result<Projection> {
    let n = secants.dim();
    check_dims(n, k)?;
    match init {
        Initialization::Isotropic => isotropic_projection(n, k, rng),
        Initialization::SecantSpan => {
            let mixed = secants.matrix() * gaussian_matrix(secants.len(), k, rng);
            let mut q = DMatrix::zeros(n, k);
            for j in 0..k {
                let v = mixed.column(j).into_owned();
                let col = complete_column(v, &q, j, rng);
                q.set_column(j, &col);
            }
            Ok(Projection { matrix: q })
        }
    }
}

/// Orthonormalizes `v` against the first `cols` columns of `basis`. Falls back to
/// Gaussian draws, then coordinate axes, when `v` is (nearly) in their span.
fn complete_column(
    mut v: DVector<f64>,
    basis: &DMatrix<f64>,
    cols: usize,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let n = basis.nrows();
    let scale = v.norm();
    let residual = orthogonalize_against(&mut v, basis, cols);
    if scale > 0.0 && residual > RANK_TOL * scale {
        return v / residual;
    }
    for _ in 0..8 {
        let mut g = gaussian_vector(n, rng);
        let scale = g.norm();
        let residual = orthogonalize_against(&mut g, basis, cols);
        if residual > RANK_TOL * scale {
            return g / residual;
        }
    }
    // cols < n, so some axis has a component outside the span
    (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            let r = orthogonalize_against(&mut e, basis, cols);
            (r, e)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(r, e)| e / r)
        .expect("n >= 1")
}

/// Appends one random orthonormal column to `p` (warm start for dimension k+1).
///
/// The existing columns are copied bit-for-bit, so `‖P'ᵀs‖ ≥ ‖Pᵀs‖` holds
/// exactly for every secant.
pub fn augment_projection(
    p: &Projection,
    secants: &SecantSet,
    init: Initialization,
    rng: &mut ChaCha8Rng,
) -> Result<Projection> {
    let (n, k) = p.matrix.shape();
    check_dims(n, k + 1)?;
    let candidate = match init {
        Initialization::Isotropic => gaussian_vector(n, rng),
        Initialization::SecantSpan => secants.matrix() * gaussian_vector(secants.len(), rng),
    };
    let mut matrix = p.matrix.clone().insert_column(k, 0.0);
    let col = complete_column(candidate, &matrix, k, rng);
    matrix.set_column(k, &col);
    Ok(Projection { matrix })
}

/// Best of `cfg.screen` draws of [`initial_projection`] by κ; ties keep the
/// earliest draw.
pub fn screened_projection(
    secants: &SecantSet,
    k: usize,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Projection> {
    best_draw(secants, cfg.screen, || initial_projection(secants, k, cfg.init, rng))
}

/// Best by κ of `cfg.screen` draws of [`augment_projection`] and `cfg.screen`
/// fresh draws of [`initial_projection`] at dimension `k + 1`. Its κ is never
/// below that of `p`.
pub fn screened_augment(
    p: &Projection,
    secants: &SecantSet,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Projection> {
    let k = p.k() + 1;
    let mut draws = 0;
    best_draw(secants, 2 * cfg.screen, || {
        draws += 1;
        if draws % 2 == 1 {
            augment_projection(p, secants, cfg.init, rng)
        } else {
            initial_projection(secants, k, cfg.init, rng)
        }
    })
}

fn best_draw(
    secants: &SecantSet,
    draws: usize,
    mut draw: impl FnMut() -> Result<Projection>,
) -> Result<Projection> {
    let mut best = draw()?;
    let mut best_kappa = kappa_of(&best, secants)?;
    for _ in 1..draws {
        let p = draw()?;
        let kappa = kappa_of(&p, secants)?;
        if kappa > best_kappa {
            best = p;
            best_kappa = kappa;
        }
    }
    Ok(best)
}

fn validate_problem(secants: &SecantSet, k: usize, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    if secants.is_empty() {
        return Err(Error::DegenerateSecants("secant set is empty".into()));
    }
    check_dims(secants.dim(), k)
}

/// Solves the max-min problem at target dimension `k` from a screened random
/// start seeded by `cfg.seed`.
pub fn solve_min_secant_projection(
    secants: &SecantSet,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Solution> {
    validate_problem(secants, k, cfg)?;
    if k == secants.dim() {
        return Ok(full_rank_solution(k));
    }
    let mut rng = rng_from(cfg.seed);
    let start = screened_projection(secants, k, cfg, &mut rng)?;
    Ok(iterate(secants, start, cfg, &mut rng, None))
}

/// Runs the solver from a caller-supplied starting projection.
///
/// `trace`, when given, is called once per iteration before the update.
pub fn solve_from(
    secants: &SecantSet,
    start: Projection,
    cfg: &SolverConfig,
    trace: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Result<Solution> {
    validate_problem(secants, start.k(), cfg)?;
    if start.n() != secants.dim() {
        return Err(Error::Incompatible(format!(
            "secants live in dimension {}, projection in {}",
            secants.dim(),
            start.n()
        )));
    }
    if start.k() == start.n() {
        return Ok(full_rank_solution(start.k()));
    }
    let mut rng = rng_from(cfg.seed);
    Ok(iterate(secants, start, cfg, &mut rng, trace))
}

/// Best of `restarts` independent solves; ties go to the lowest restart index.
///
/// Restart `r` draws from the stream `derive_seed(cfg.seed, [RESTART, r])`.
pub fn solve_best_of(
    secants: &SecantSet,
    k: usize,
    cfg: &SolverConfig,
    restarts: usize,
) -> Result<Solution> {
    if restarts == 0 {
        return Err(Error::Config("restarts must be positive".into()));
    }
    let solutions: Vec<Solution> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, &[tag::RESTART, r as u64]);
            solve_min_secant_projection(secants, k, &cfg.with_seed(seed))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, s) in solutions.iter().enumerate() {
        if s.kappa > solutions[best].kappa {
            best = i;
        }
    }
    Ok(solutions.into_iter().nth(best).expect("restarts > 0"))
}

pub(crate) fn full_rank_solution(n: usize) -> Solution {
    Solution {
        projection: Projection::identity(n),
        kappa: 1.0,
        iterations: 0,
    }
}

/// Core loop. `start` must be feasible and `k < n`.
pub(crate) fn iterate(
    secants: &SecantSet,
    start: Projection,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut dyn FnMut(&IterationRecord)>,
) -> Solution {
    let s = secants.matrix();
    let (mut p, mut kappa, mut iterations) = match cfg.method {
        Method::Ascent => {
            let kappa = worst_secant(start.matrix(), s).0;
            (start.matrix, kappa, 0)
        }
        Method::Sap | Method::SapThenAscent => sap(s, start.matrix, cfg, rng, trace.as_deref_mut()),
    };
    if cfg.method != Method::Sap {
        let (q, f, steps) = ascend(s, p, cfg, iterations, trace.as_deref_mut());
        p = q;
        kappa = f;
        iterations += steps;
    }
    Solution {
        projection: Projection { matrix: p },
        kappa,
        iterations,
    }
}

/// Worst-secant updates; returns the best iterate, its κ and the update count.
fn sap<'t>(
    s: &DMatrix<f64>,
    start: DMatrix<f64>,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut (dyn FnMut(&IterationRecord) + 't)>,
) -> (DMatrix<f64>, f64, usize) {
    let k = start.ncols();
    let mut p = start;
    let (mut best_kappa, _) = worst_secant(&p, s);
    let mut best_p = p.clone();
    let mut anchor = best_kappa;
    let mut stall = 0usize;
    let mut iterations = 0usize;

    for iter in 0..cfg.max_iters {
        let (kappa, worst) = worst_secant(&p, s);
        if kappa > best_kappa {
            best_kappa = kappa;
            best_p.copy_from(&p);
        }
        let step = cfg.step_size / (1.0 + iter as f64 / 100.0);
        if let Some(hook) = trace.as_mut() {
            hook(&IterationRecord {
                iteration: iter,
                kappa,
                best_kappa,
                step,
            });
        }
        if best_kappa - anchor >= cfg.convergence_tol {
            anchor = best_kappa;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }

        let secant = s.column(worst);
        let mut coeffs: DVector<f64> = p.tr_mul(&secant);
        if coeffs.norm() == 0.0 {
            let r = gaussian_vector(k, rng);
            coeffs = &r / r.norm();
        }
        let candidate = &p + (secant * coeffs.transpose()) * step;
        iterations = iter + 1;
        match orthonormalize(&candidate) {
            Ok(next) => p = next.matrix,
            // a step of size < 1 toward one vector cannot collapse k >= 2 columns
            // in exact arithmetic; stop on the best iterate if rounding says otherwise
            Err(_) => break,
        }
    }
    let (kappa, _) = worst_secant(&p, s);
    if kappa > best_kappa {
        best_kappa = kappa;
        best_p = p;
    }
    (best_p, best_kappa, iterations)
}

fn column_norms(p: &DMatrix<f64>, secants: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let projected = p.tr_mul(secants);
    let norms = projected.column_iter().map(|c| c.norm()).collect();
    (projected, norms)
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Ascent from `start`; returns the final projection, its κ (never below the
/// start's) and the number of accepted steps.
///
/// With `f_i = ‖Pᵀs_i‖`, `f = min f_i` and Grassmannian gradients
/// `g_i = (s_i − P v_i) v_iᵀ / ‖v_i‖` (`v_i = Pᵀs_i`), each step solves
///
/// ```text
/// max_d  min_i (f_i − f + ⟨g_i, d⟩) − ½ dᵀBd
/// ```
///
/// over the secants close to the minimum, through its dual, a small
/// quadratic program on the simplex. `B⁻¹` is a BFGS estimate built from the
/// gradients of `Σ λ_i f_i` with the dual weights `λ`; it starts as the
/// identity and is reset to it whenever a line search fails. The dual value
/// `V ≥ 0` is zero exactly at stationary points. The update is
/// `P ← orth(P + t d)` with backtracking on `f(P') ≥ f + 1e-4 t V`. It stops
/// when `V` is negligible or when progress over recent steps stalls.
fn ascend<'t>(
    s: &DMatrix<f64>,
    start: DMatrix<f64>,
    cfg: &SolverConfig,
    first_iteration: usize,
    mut trace: Option<&mut (dyn FnMut(&IterationRecord) + 't)>,
) -> (DMatrix<f64>, f64, usize) {
    let (n, k) = start.shape();
    let mut p = start;
    let (mut projected, mut lens) = column_norms(&p, s);
    let mut f = min_of(&lens);
    // inverse metric; `None` is the identity
    let mut inverse: Option<DMatrix<f64>> = None;
    let mut last_step = 1.0;
    let mut steps = 0;
    let mut order: Vec<usize> = (0..lens.len()).collect();
    let mut history = vec![f];
    while steps < cfg.max_iters {
        if steps >= ASCENT_STALL_STEPS && f - history[steps - ASCENT_STALL_STEPS] < 0.1 * cfg.convergence_tol {
            break;
        }
        if let Some(hook) = trace.as_mut() {
            hook(&IterationRecord {
                iteration: first_iteration + steps,
                kappa: f,
                best_kappa: f,
                step: last_step,
            });
        }
        order.sort_by(|&a, &b| lens[a].total_cmp(&lens[b]).then(a.cmp(&b)));
        let within = order.partition_point(|&i| lens[i] <= f + ASCENT_WINDOW * (1.0 - f));
        let active = order[..within.clamp(1, ASCENT_MAX_ACTIVE)].to_vec();
        let grads = stacked_gradients(s, &p, &projected, &lens, &active);
        let scaled = match &inverse {
            Some(h) => h * &grads,
            None => grads.clone(),
        };
        let mut gram = grads.tr_mul(&scaled);
        gram = (&gram + gram.transpose()) * 0.5;
        let offsets: Vec<f64> = active.iter().map(|&i| lens[i] - f).collect();
        let weights = DVector::from_vec(simplex_qp(&gram, &offsets));
        let value = offsets.iter().zip(weights.iter()).map(|(a, w)| a * w).sum::<f64>()
            + 0.5 * weights.dot(&(&gram * &weights));
        if value <= ASCENT_STATIONARY {
            break;
        }
        let mut d = DMatrix::from_column_slice(n, k, (&scaled * &weights).as_slice());
        d -= &p * p.tr_mul(&d);

        let mut trial = 1.0f64;
        let mut accepted = None;
        while trial >= ASCENT_MIN_STEP {
            if let Ok(next) = orthonormalize(&(&p + &d * trial)) {
                let (next_proj, next_lens) = column_norms(next.matrix(), s);
                let next_f = min_of(&next_lens);
                if next_f > f && next_f >= f + 1e-4 * trial * value {
                    accepted = Some((next.matrix, next_proj, next_lens, next_f));
                    break;
                }
            }
            trial /= 2.0;
        }
        let Some((next, next_proj, next_lens, next_f)) = accepted else {
            if inverse.take().is_some() {
                continue;
            }
            break;
        };

        let old_lagrangian = &grads * &weights;
        let new_grads = stacked_gradients(s, &next, &next_proj, &next_lens, &active);
        // curvature pair for B ≈ −∇²(Σ λ_i f_i)
        let y = old_lagrangian - &new_grads * &weights;
        let step = DVector::from_column_slice((&d * trial).as_slice());
        let sy = step.dot(&y);
        if sy > 1e-12 * step.norm() * y.norm() {
            let h = inverse.get_or_insert_with(|| DMatrix::identity(n * k, n * k) * (sy / y.norm_squared()));
            let rho = 1.0 / sy;
            let hy = &*h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            *h += (&step * step.transpose()) * (rho * rho * yhy + rho)
                - (&hy * step.transpose() + &step * hy.transpose()) * rho;
        }

        p = next;
        projected = next_proj;
        lens = next_lens;
        f = next_f;
        last_step = trial;
        steps += 1;
        history.push(f);
    }
    (p, f, steps)
}

/// Columns are the vectorized gradients of `‖Pᵀs_i‖` for `i` in `active`.
fn stacked_gradients(
    s: &DMatrix<f64>,
    p: &DMatrix<f64>,
    projected: &DMatrix<f64>,
    lens: &[f64],
    active: &[usize],
) -> DMatrix<f64> {
    let (n, k) = p.shape();
    let mut out = DMatrix::zeros(n * k, active.len());
    let mut residual = vec![0.0; n];
    for (c, &i) in active.iter().enumerate() {
        let col = out.column_mut(c);
        let slot = col.data.into_slice_mut();
        if lens[i] == 0.0 {
            // ‖Pᵀs‖ grows along any rotation of a column toward s
            for a in 0..n {
                slot[a] = s[(a, i)];
            }
            continue;
        }
        let v = projected.column(i);
        for (a, r) in residual.iter_mut().enumerate() {
            *r = s[(a, i)] - (0..k).map(|b| p[(a, b)] * v[b]).sum::<f64>();
        }
        for b in 0..k {
            let scale = v[b] / lens[i];
            for a in 0..n {
                slot[a + b * n] = residual[a] * scale;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dirs_deg(angles: &[f64]) -> SecantSet {
        SecantSet::from_directions(
            &angles
                .iter()
                .map(|a| vec![a.to_radians().cos(), a.to_radians().sin()])
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn full_rank_random_projection_is_orthogonal() {
        let p = random_projection(5, 5, 123).unwrap();
        assert!(p.orthonormality_error() < 1e-12);
        let s = SecantSet::from_directions(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.0, 0.0, 1.0, 0.0, -1.0]])
            .unwrap();
        assert_abs_diff_eq!(kappa_of(&p, &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_projection_is_deterministic() {
        let a = random_projection(4, 2, 7).unwrap();
        let b = random_projection(4, 2, 7).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert_ne!(a, random_projection(4, 2, 8).unwrap());
    }

    #[test]
    fn random_directions_have_zero_mean() {
        let mut sum = [0.0; 3];
        for seed in 0..1000 {
            let p = random_projection(3, 1, seed).unwrap();
            for (i, s) in sum.iter_mut().enumerate() {
                *s += p.matrix()[(i, 0)];
            }
        }
        for s in sum {
            assert!((s / 1000.0).abs() < 0.1, "mean coordinate {}", s / 1000.0);
        }
    }

    #[test]
    fn random_projection_rejects_bad_dims() {
        assert!(matches!(random_projection(3, 4, 0), Err(Error::Dimension(_))));
        assert!(matches!(random_projection(3, 0, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn orthonormalize_preserves_span_and_sign() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        let p = orthonormalize(&m).unwrap();
        assert!(p.orthonormality_error() < 1e-14);
        for j in 0..2 {
            assert!(p.matrix().column(j).dot(&m.column(j)) > 0.0);
        }
        // span preserved: residual of each input column after projecting is zero
        for j in 0..2 {
            let c = m.column(j);
            let r = c - p.matrix() * p.matrix().tr_mul(&c);
            assert!(r.norm() < 1e-14);
        }
    }

    #[test]
    fn orthonormalize_detects_rank_deficiency() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(orthonormalize(&m), Err(Error::RankDeficient { column: 1, .. })));
        let z = DMatrix::zeros(3, 1);
        assert!(matches!(orthonormalize(&z), Err(Error::RankDeficient { column: 0, .. })));
    }

    #[test]
    fn kappa_of_examples() {
        let e1 = orthonormalize(&DMatrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        let s = SecantSet::from_directions(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(kappa_of(&e1, &s).unwrap(), 0.0);

        let t = 22.5f64.to_radians();
        let p = orthonormalize(&DMatrix::from_row_slice(2, 1, &[t.cos(), t.sin()])).unwrap();
        let s = dirs_deg(&[0.0, 45.0, 90.0, 135.0]);
        // |cos(22.5° - φ)| over φ ∈ {0, 45, 90, 135}: the smallest is at 135°
        let expected = [0.0f64, 45.0, 90.0, 135.0]
            .iter()
            .map(|phi| (22.5 - phi).to_radians().cos().abs())
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(expected, 67.5f64.to_radians().cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(kappa_of(&p, &s).unwrap(), expected, epsilon = 1e-12);

        let q = random_projection(2, 2, 3).unwrap();
        assert_abs_diff_eq!(kappa_of(&q, &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_of_rejects_mismatch() {
        let p = random_projection(3, 1, 0).unwrap();
        let s = dirs_deg(&[10.0]);
        assert!(matches!(kappa_of(&p, &s), Err(Error::Incompatible(_))));
    }

    #[test]
    fn collinear_secants_are_recovered() {
        let u = [0.3, -0.5, 0.2, 0.9];
        let neg: Vec<f64> = u.iter().map(|x| -2.0 * x).collect();
        let s = SecantSet::from_directions(&[u.to_vec(), neg, u.to_vec()]).unwrap();
        let sol = solve_min_secant_projection(&s, 1, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.kappa, 1.0, epsilon = 1e-6);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let col = sol.projection.matrix().column(0);
        let sign = col.dot(&DVector::from_column_slice(&u)).signum();
        for i in 0..4 {
            assert_abs_diff_eq!(sign * col[i], u[i] / norm, epsilon = 1e-4);
        }
    }

    #[test]
    fn four_directions_match_grid_search() {
        // oracle: θ over [0°, 180°) at 0.01°, maximize min |cos(θ - φ)|
        let phis = [0.0f64, 45.0, 90.0, 135.0];
        let grid_best = (0..18_000)
            .map(|i| {
                let th = i as f64 * 0.01;
                phis.iter()
                    .map(|p| (th - p).to_radians().cos().abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(grid_best, 0.382_683, epsilon = 1e-5);
        let s = dirs_deg(&phis);
        for method in [Method::Sap, Method::Ascent, Method::SapThenAscent] {
            let cfg = SolverConfig {
                method,
                ..SolverConfig::default().with_seed(11)
            };
            let sol = solve_best_of(&s, 1, &cfg, 20).unwrap();
            assert_abs_diff_eq!(sol.kappa, grid_best, epsilon = 5e-3);
        }
    }

    #[test]
    fn full_dimension_is_exact() {
        let s = dirs_deg(&[3.0, 77.0]);
        let sol = solve_min_secant_projection(&s, 2, &SolverConfig::default()).unwrap();
        assert_eq!(sol.kappa, 1.0);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn best_so_far_is_monotone_and_iterates_feasible() {
        let s = SecantSet::from_directions(
            &(0..30)
                .map(|i| {
                    let t = i as f64 * 0.7;
                    vec![t.cos(), t.sin(), (2.0 * t).cos(), (1.3 * t).sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        for method in [Method::Sap, Method::Ascent, Method::SapThenAscent] {
            let cfg = SolverConfig {
                method,
                ..SolverConfig::default().with_seed(5)
            };
            let mut rng = rng_from(99);
            let start = initial_projection(&s, 2, Initialization::Isotropic, &mut rng).unwrap();
            let start_kappa = kappa_of(&start, &s).unwrap();
            let mut last = f64::NEG_INFINITY;
            let mut count = 0;
            let mut hook = |r: &IterationRecord| {
                assert!(r.best_kappa >= last);
                assert!(r.best_kappa >= r.kappa);
                last = r.best_kappa;
                count += 1;
            };
            let sol = solve_from(&s, start, &cfg, Some(&mut hook)).unwrap();
            assert!(count > 0, "{method:?}");
            assert!(sol.kappa >= start_kappa);
            assert!(sol.kappa >= last);
            assert!(sol.kappa <= 1.0 + 1e-9);
            assert!(sol.projection.orthonormality_error() < 1e-8);
        }
    }

    #[test]
    fn ascent_ends_at_a_local_maximum() {
        let s = SecantSet::from_directions(
            &(0..25)
                .map(|i| {
                    let t = i as f64 * 1.1;
                    vec![t.cos(), (0.5 * t).sin(), (2.0 * t).cos(), (1.7 * t).sin(), 0.3 * t.cos()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let sol = solve_min_secant_projection(&s, 2, &SolverConfig::default().with_seed(8)).unwrap();
        let mut rng = rng_from(21);
        for _ in 0..200 {
            let nudge = gaussian_matrix(5, 2, &mut rng) * 1e-4;
            let q = orthonormalize(&(sol.projection.matrix() + nudge)).unwrap();
            assert!(kappa_of(&q, &s).unwrap() <= sol.kappa + 1e-7);
        }
    }

    #[test]
    fn screening_keeps_the_best_draw() {
        let s = dirs_deg(&[0.0, 35.0, 80.0, 130.0]);
        let cfg = SolverConfig { screen: 12, ..SolverConfig::default() };
        let mut rng = rng_from(5);
        let best = screened_projection(&s, 1, &cfg, &mut rng).unwrap();
        let mut rng = rng_from(5);
        let draws: Vec<f64> = (0..12)
            .map(|_| kappa_of(&initial_projection(&s, 1, cfg.init, &mut rng).unwrap(), &s).unwrap())
            .collect();
        assert_eq!(kappa_of(&best, &s).unwrap(), draws.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn screened_augment_never_loses_kappa() {
        let s = SecantSet::from_directions(
            &(0..12)
                .map(|i| {
                    let t = i as f64 * 0.9;
                    vec![t.cos(), t.sin(), (2.0 * t).cos(), (3.0 * t).sin()]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        for seed in 0..20 {
            let p = random_projection(4, 2, seed).unwrap();
            let q = screened_augment(&p, &s, &SolverConfig::default(), &mut rng_from(seed)).unwrap();
            assert_eq!(q.k(), 3);
            assert!(kappa_of(&q, &s).unwrap() >= kappa_of(&p, &s).unwrap());
        }
    }

    #[test]
    fn zero_screen_is_rejected() {
        let cfg = SolverConfig { screen: 0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn augment_keeps_existing_columns() {
        let s = dirs_deg(&[0.0, 60.0, 120.0]);
        let mut rng = rng_from(1);
        let p = random_projection(2, 1, 4).unwrap();
        let q = augment_projection(&p, &s, Initialization::SecantSpan, &mut rng).unwrap();
        assert_eq!(q.k(), 2);
        assert_eq!(q.matrix().column(0), p.matrix().column(0));
        assert!(q.orthonormality_error() < 1e-12);
    }

    #[test]
    fn secant_span_init_completes_low_rank_spans() {
        // secants span one dimension, but k = 3 is requested
        let s = SecantSet::from_directions(&[vec![1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0]]).unwrap();
        let mut rng = rng_from(3);
        let p = initial_projection(&s, 3, Initialization::SecantSpan, &mut rng).unwrap();
        assert!(p.orthonormality_error() < 1e-12);
        assert_abs_diff_eq!(kappa_of(&p, &s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            step_size: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let s = dirs_deg(&[0.0]);
        assert!(solve_min_secant_projection(&s, 1, &bad).is_err());
        assert!(solve_min_secant_projection(&s, 3, &SolverConfig::default()).is_err());
    }
}
