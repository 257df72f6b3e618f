//! Point clouds and normalized secant sets.

use std::cmp::Ordering;
use std::collections::HashSet;

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

/// A finite set of points in ℝⁿ, optionally carrying one class label per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    /// Builds an unlabeled cloud from row vectors.
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(points, None)
    }

    /// Builds a labeled cloud; `labels` must have one entry per point.
    pub fn with_labels(points: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        Self::build(points, Some(labels))
    }

    fn build(points: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::EmptyInput("point cloud has no points".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Dimension("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Dimension(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, labels)
    }

    /// Builds a cloud from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("points must have dimension >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput("point cloud has no points".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Dimension(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        let count = coords.len() / dim;
        if let Some(l) = &labels {
            if l.len() != count {
                return Err(Error::Incompatible(format!(
                    "{} labels for {count} points",
                    l.len()
                )));
            }
        }
        Ok(Self {
            dim,
            coords,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false: a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Ambient dimension n.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[i].as_str())
    }

    /// Drops the labels, keeping the geometry.
    pub fn unlabeled(&self) -> PointCloud {
        PointCloud {
            dim: self.dim,
            coords: self.coords.clone(),
            labels: None,
        }
    }

    /// Sub-cloud of the given indices, in the given order. Labels carry over.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Dimension(format!(
                    "index {i} out of range for cloud of {} points",
                    self.len()
                )));
            }
            coords.extend_from_slice(self.point(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        PointCloud::from_flat(self.dim, coords, labels)
    }

    /// Unlabeled copy of this cloud with `point` appended as the last point.
    pub fn with_point(&self, point: &[f64]) -> Result<PointCloud> {
        if point.len() != self.dim {
            return Err(Error::Incompatible(format!(
                "point has dimension {}, cloud has dimension {}",
                point.len(),
                self.dim
            )));
        }
        let mut coords = Vec::with_capacity(self.coords.len() + self.dim);
        coords.extend_from_slice(&self.coords);
        coords.extend_from_slice(point);
        PointCloud::from_flat(self.dim, coords, None)
    }

    /// Unlabeled copy of this cloud with point `index` removed.
    pub fn without_point(&self, index: usize) -> Result<PointCloud> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != index).collect();
        Ok(self.select(&keep)?.unlabeled())
    }

    /// Applies `f` to every point. `f` must preserve the dimension it is given
    /// or consistently map to a new one.
    pub fn map_points<F>(&self, mut f: F) -> Result<PointCloud>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mapped: Vec<Vec<f64>> = self.points().map(|p| f(p)).collect();
        match &self.labels {
            Some(l) => PointCloud::with_labels(mapped, l.clone()),
            None => PointCloud::new(mapped),
        }
    }
}

/// Which short secants to discard before normalizing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SecantFilterPolicy {
    #[default]
    None,
    /// Discard secants whose raw length is below the given value.
    AbsoluteMinLength(f64),
    /// Discard the `floor(fraction * pairs)` shortest secants.
    DropShortestFraction(f64),
}

impl SecantFilterPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SecantFilterPolicy::None => Ok(()),
            SecantFilterPolicy::AbsoluteMinLength(v) if v.is_finite() && v >= 0.0 => Ok(()),
            SecantFilterPolicy::DropShortestFraction(f) if (0.0..1.0).contains(&f) => Ok(()),
            SecantFilterPolicy::AbsoluteMinLength(v) => Err(Error::Config(format!(
                "absolute minimum secant length must be finite and >= 0, got {v}"
            ))),
            SecantFilterPolicy::DropShortestFraction(f) => Err(Error::Config(format!(
                "drop fraction must lie in [0, 1), got {f}"
            ))),
        }
    }

    /// Short name used in reports and on the command line.
    pub fn mode_name(&self) -> &'static str {
        match self {
            SecantFilterPolicy::None => "none",
            SecantFilterPolicy::AbsoluteMinLength(_) => "absolute",
            SecantFilterPolicy::DropShortestFraction(_) => "fraction",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            SecantFilterPolicy::None => 0.0,
            SecantFilterPolicy::AbsoluteMinLength(v) | SecantFilterPolicy::DropShortestFraction(v) => v,
        }
    }
}

/// Unit-normalized secants stored column-wise in an `n × m` matrix.
#[derive(Debug, Clone)]
pub struct SecantSet {
    matrix: DMatrix<f64>,
    lengths: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    source_count: usize,
    discarded_count: usize,
    duplicate_count: usize,
}

impl SecantSet {
    /// Normalizes arbitrary nonzero direction vectors into a secant set.
    ///
    /// Useful for working with prescribed secant directions; the pair metadata
    /// is filled with `(i, i)` placeholders and `source_count` is zero.
    pub fn from_directions(directions: &[Vec<f64>]) -> Result<Self> {
        let dim = directions
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::DegenerateSecants("no directions given".into()))?;
        if dim == 0 {
            return Err(Error::Dimension("directions must have dimension >= 1".into()));
        }
        let mut matrix = DMatrix::zeros(dim, directions.len());
        let mut lengths = Vec::with_capacity(directions.len());
        for (j, d) in directions.iter().enumerate() {
            if d.len() != dim {
                return Err(Error::Dimension(format!(
                    "direction {j} has dimension {}, expected {dim}",
                    d.len()
                )));
            }
            let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::DegenerateSecants(format!(
                    "direction {j} cannot be normalized"
                )));
            }
            for (i, x) in d.iter().enumerate() {
                matrix[(i, j)] = x / norm;
            }
            lengths.push(norm);
        }
        Ok(Self {
            matrix,
            lengths,
            pairs: (0..directions.len()).map(|i| (i, i)).collect(),
            source_count: 0,
            discarded_count: 0,
            duplicate_count: 0,
        })
    }

    /// Number of kept secants.
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    /// Ambient dimension of the secants.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Secants as columns.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn secant(&self, j: usize) -> DVectorView<'_, f64> {
        self.matrix.column(j)
    }

    /// Raw (pre-normalization) length of each kept secant.
    pub fn raw_lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Source point indices `(earlier, later)` of each kept secant.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Pairs removed, including zero-length pairs from duplicate points.
    pub fn discarded_count(&self) -> usize {
        self.discarded_count
    }

    /// Pairs discarded because one of their points repeats an earlier point.
    pub fn duplicate_count(&self) -> usize {
        self.duplicate_count
    }
}

/// Computes one unit secant `(x_i - x_j)/‖x_i - x_j‖` per pair `i < j`, then
/// applies `policy`.
///
/// A point equal to an earlier point contributes nothing: its zero-length pair
/// and its copies of the earlier point's secants are all dropped and counted as
/// discarded. Appending a copy of an existing point therefore leaves the secant
/// set unchanged. The fraction policy operates on the remaining pairs and
/// breaks length ties by pair order.
pub fn compute_normalized_secants(
    cloud: &PointCloud,
    policy: SecantFilterPolicy,
) -> Result<SecantSet> {
    policy.validate()?;
    let count = cloud.len();
    if count < 2 {
        return Err(Error::EmptyInput(format!(
            "need at least 2 points for secants, got {count}"
        )));
    }
    let dim = cloud.dim();
    let total_pairs = count * (count - 1) / 2;

    let mut diffs: Vec<f64> = Vec::with_capacity(total_pairs * dim);
    let mut lengths = Vec::with_capacity(total_pairs);
    let mut pairs = Vec::with_capacity(total_pairs);
    let mut seen = HashSet::with_capacity(count);
    // +0.0 folds -0.0 into 0.0
    let repeated: Vec<bool> = cloud
        .points()
        .map(|p| !seen.insert(p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>()))
        .collect();
    let mut duplicates = 0usize;
    for i in 0..count {
        let a = cloud.point(i);
        for j in (i + 1)..count {
            if repeated[i] || repeated[j] {
                duplicates += 1;
                continue;
            }
            let b = cloud.point(j);
            let start = diffs.len();
            diffs.extend(a.iter().zip(b).map(|(x, y)| x - y));
            let len = diffs[start..].iter().map(|d| d * d).sum::<f64>().sqrt();
            lengths.push(len);
            pairs.push((i, j));
        }
    }

    let nonzero = lengths.len();
    let mut keep = vec![true; nonzero];
    match policy {
        SecantFilterPolicy::None => {}
        SecantFilterPolicy::AbsoluteMinLength(min) => {
            for (k, len) in keep.iter_mut().zip(&lengths) {
                *k = *len >= min;
            }
        }
        SecantFilterPolicy::DropShortestFraction(fraction) => {
            let drop = (fraction * nonzero as f64).floor() as usize;
            let mut order: Vec<usize> = (0..nonzero).collect();
            order.sort_by(|&a, &b| {
                lengths[a]
                    .partial_cmp(&lengths[b])
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            for &idx in &order[..drop.min(nonzero)] {
                keep[idx] = false;
            }
        }
    }

    let kept: Vec<usize> = (0..nonzero).filter(|&k| keep[k]).collect();
    if kept.is_empty() {
        return Err(Error::DegenerateSecants(format!(
            "all {total_pairs} pairs were discarded ({duplicates} duplicates)"
        )));
    }

    let mut matrix = DMatrix::zeros(dim, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let len = lengths[k];
        let src = &diffs[k * dim..(k + 1) * dim];
        for (row, d) in src.iter().enumerate() {
            matrix[(row, col)] = d / len;
        }
    }
    Ok(SecantSet {
        matrix,
        lengths: kept.iter().map(|&k| lengths[k]).collect(),
        pairs: kept.iter().map(|&k| pairs[k]).collect(),
        source_count: count,
        discarded_count: total_pairs - kept.len(),
        duplicate_count: duplicates,
    })
}
