//! Synthetic point clouds: the trigonometric moment curve, the six-cluster
//! Gaussian majority, and samples from low-dimensional manifolds mapped into ℝ¹⁰.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::seed::{derive_seed, rng_from, tag};
use crate::solver::{random_projection, Projection};

/// Ambient dimension of the manifold samples.
pub const MANIFOLD_AMBIENT_DIM: usize = 10;
/// Seed of the fixed rotation applied to every manifold embedding.
const ROTATION_SEED: u64 = 0x5eed_0f_5ca1e;

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::Config("count must be >= 1".into()));
    }
    Ok(())
}

/// `t ↦ (cos t, sin t, cos 2t, sin 2t, cos 3t, sin 3t)`.
pub fn trig_moment_point(t: f64) -> Vec<f64> {
    (1..=3)
        .flat_map(|m| {
            let a = m as f64 * t;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// `count` points on the trigonometric moment curve in ℝ⁶ at parameters drawn
/// uniformly from `[0, 2π)`.
pub fn gen_trig_moment_curve(count: usize, seed: u64) -> Result<PointCloud> {
    check_count(count)?;
    let mut rng = rng_from(seed);
    let points = (0..count)
        .map(|_| trig_moment_point(rng.random_range(0.0..TAU)))
        .collect();
    PointCloud::new(points)
}

/// Six clusters in ℝ⁶, each centered at the origin with diagonal covariance
/// 0.2 except for variance 1 along axis `i` in cluster `i`. Labels are the
/// cluster numbers `"1"` to `"6"`.
pub fn gen_gaussian_majority(count_per_cluster: usize, seed: u64) -> Result<PointCloud> {
    check_count(count_per_cluster)?;
    let mut rng = rng_from(seed);
    let dim = 6;
    let mut points = Vec::with_capacity(dim * count_per_cluster);
    let mut labels = Vec::with_capacity(dim * count_per_cluster);
    for cluster in 0..dim {
        for _ in 0..count_per_cluster {
            let p: Vec<f64> = (0..dim)
                .map(|axis| {
                    let sd = if axis == cluster { 1.0 } else { 0.2f64.sqrt() };
                    sd * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            points.push(p);
            labels.push((cluster + 1).to_string());
        }
    }
    PointCloud::with_labels(points, labels)
}

/// Manifolds available to [`gen_manifold_samples`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    TrigCurve6d,
    Torus10d,
    Rp2_10d,
    S3_10d,
    Gaussian,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 5] = [
        ManifoldKind::TrigCurve6d,
        ManifoldKind::Torus10d,
        ManifoldKind::Rp2_10d,
        ManifoldKind::S3_10d,
        ManifoldKind::Gaussian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldKind::TrigCurve6d => "trig_curve_6d",
            ManifoldKind::Torus10d => "torus_10d",
            ManifoldKind::Rp2_10d => "rp2_10d",
            ManifoldKind::S3_10d => "s3_10d",
            ManifoldKind::Gaussian => "gaussian",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldKind::TrigCurve6d => 6,
            _ => MANIFOLD_AMBIENT_DIM,
        }
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManifoldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ManifoldKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ManifoldKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown manifold kind '{s}', expected one of {names:?}"))
            })
    }
}

/// The fixed orthogonal map of ℝ¹⁰ applied after zero-padding each manifold
/// embedding.
pub fn manifold_rotation() -> Projection {
    random_projection(
        MANIFOLD_AMBIENT_DIM,
        MANIFOLD_AMBIENT_DIM,
        derive_seed(ROTATION_SEED, &[tag::MANIFOLD_ROTATION]),
    )
    .expect("10 <= 10")
}

/// Coordinates of a point on the manifold before padding and rotation.
fn intrinsic_sample(kind: ManifoldKind, rng: &mut impl Rng) -> Vec<f64> {
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    match kind {
        ManifoldKind::TrigCurve6d | ManifoldKind::Gaussian => unreachable!("handled by caller"),
        ManifoldKind::Torus10d => {
            let u = normal_angle(&mut normal);
            let v = normal_angle(&mut normal);
            vec![u.cos(), u.sin(), v.cos(), v.sin()]
        }
        ManifoldKind::S3_10d => unit(&[normal(), normal(), normal(), normal()]),
        ManifoldKind::Rp2_10d => {
            let p = unit(&[normal(), normal(), normal()]);
            rp2_embed(p[0], p[1], p[2])
        }
    }
}

/// Embedding of ℝP² in ℝ⁴; `p` and `-p` share an image and no other pair does.
fn rp2_embed(x: f64, y: f64, z: f64) -> Vec<f64> {
    vec![x * x - y * y, 2.0 * x * y, 2.0 * x * z, 2.0 * y * z]
}

/// Uniform angle on `[0, 2π)` from two standard normals (the argument of a
/// rotation-invariant planar Gaussian).
fn normal_angle(normal: &mut impl FnMut() -> f64) -> f64 {
    let (a, b) = (normal(), normal());
    b.atan2(a).rem_euclid(TAU)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// `count` random points from `kind`.
///
/// The torus is `(cos u, sin u, cos v, sin v)`, the 3-sphere is the unit sphere
/// of ℝ⁴, and ℝP² is `(x² − y², 2xy, 2xz, 2yz)` for unit `(x, y, z)`. Each is
/// zero-padded to ℝ¹⁰ and rotated by [`manifold_rotation`]. `gaussian` is
/// standard normal in ℝ¹⁰ and `trig_curve_6d` is the moment curve in ℝ⁶.
pub fn gen_manifold_samples(kind: ManifoldKind, count: usize, seed: u64) -> Result<PointCloud> {
    check_count(count)?;
    match kind {
        ManifoldKind::TrigCurve6d => gen_trig_moment_curve(count, seed),
        ManifoldKind::Gaussian => {
            let mut rng = rng_from(seed);
            let points = (0..count)
                .map(|_| {
                    (0..MANIFOLD_AMBIENT_DIM)
                        .map(|_| rng.sample(StandardNormal))
                        .collect()
                })
                .collect();
            PointCloud::new(points)
        }
        _ => {
            let rotation = manifold_rotation();
            let q = rotation.matrix();
            let mut rng = rng_from(seed);
            let points = (0..count)
                .map(|_| {
                    let mut padded = DVector::zeros(MANIFOLD_AMBIENT_DIM);
                    for (i, x) in intrinsic_sample(kind, &mut rng).into_iter().enumerate() {
                        padded[i] = x;
                    }
                    (q * padded).iter().copied().collect()
                })
                .collect();
            PointCloud::new(points)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn curve_at_zero() {
        assert_eq!(trig_moment_point(0.0), vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn curve_points_have_norm_sqrt3_and_lie_on_curve() {
        let c = gen_trig_moment_curve(200, 4).unwrap();
        assert_eq!(c.dim(), 6);
        for p in c.points() {
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 3f64.sqrt(), epsilon = 1e-12);
            let t = p[1].atan2(p[0]);
            let rebuilt = trig_moment_point(t);
            for (a, b) in p.iter().zip(&rebuilt) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_trig_moment_curve(10, 1).unwrap(), gen_trig_moment_curve(10, 1).unwrap());
        assert_ne!(gen_trig_moment_curve(10, 1).unwrap(), gen_trig_moment_curve(10, 2).unwrap());
        for kind in ManifoldKind::ALL {
            assert_eq!(
                gen_manifold_samples(kind, 5, 3).unwrap(),
                gen_manifold_samples(kind, 5, 3).unwrap()
            );
        }
    }

    #[test]
    fn majority_counts_and_labels() {
        let c = gen_gaussian_majority(7, 0).unwrap();
        assert_eq!(c.len(), 42);
        assert_eq!(c.dim(), 6);
        assert_eq!(c.label(0), Some("1"));
        assert_eq!(c.label(41), Some("6"));
        assert!(gen_gaussian_majority(0, 0).is_err());
    }

    #[test]
    fn majority_cluster_moments() {
        let n = 100_000;
        let c = gen_gaussian_majority(n, 17).unwrap();
        // cluster 3 occupies rows 2n..3n
        let rows: Vec<&[f64]> = (2 * n..3 * n).map(|i| c.point(i)).collect();
        for axis in 0..6 {
            let mean = rows.iter().map(|p| p[axis]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let expected = if axis == 2 { 1.0 } else { 0.2 };
            assert!(mean.abs() < 0.02, "axis {axis} mean {mean}");
            assert!((var - expected).abs() < 0.02, "axis {axis} var {var}");
        }
    }

    #[test]
    fn manifold_embeddings_satisfy_their_identities() {
        let q = manifold_rotation();
        assert!(q.orthonormality_error() < 1e-12);
        let unrotate = |p: &[f64]| -> Vec<f64> {
            q.matrix().tr_mul(&DVector::from_column_slice(p)).iter().copied().collect()
        };

        let torus = gen_manifold_samples(ManifoldKind::Torus10d, 50, 1).unwrap();
        for p in torus.points() {
            let x = unrotate(p);
            assert_abs_diff_eq!(x[0] * x[0] + x[1] * x[1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(x[2] * x[2] + x[3] * x[3], 1.0, epsilon = 1e-12);
            assert!(x[4..].iter().all(|v| v.abs() < 1e-12));
        }

        let s3 = gen_manifold_samples(ManifoldKind::S3_10d, 50, 1).unwrap();
        for p in s3.points() {
            let x = unrotate(p);
            assert_abs_diff_eq!(x[..4].iter().map(|v| v * v).sum::<f64>(), 1.0, epsilon = 1e-12);
        }

        let rp2 = gen_manifold_samples(ManifoldKind::Rp2_10d, 50, 1).unwrap();
        for p in rp2.points() {
            let x = unrotate(p);
            // with r = x² + y²: the first block has norm r, the second 2·sqrt(r(1 − r))
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert_abs_diff_eq!(x[2] * x[2] + x[3] * x[3], 4.0 * r * (1.0 - r), epsilon = 1e-12);
            assert!(x[4..].iter().all(|v| v.abs() < 1e-12));
        }
        // no coordinate is identically zero after rotation
        for axis in 0..10 {
            assert!(torus.points().any(|p| p[axis].abs() > 1e-3));
        }
    }

    #[test]
    fn gaussian_is_ambient_ten() {
        let g = gen_manifold_samples(ManifoldKind::Gaussian, 100, 0).unwrap();
        assert_eq!(g.dim(), 10);
        assert_eq!(g.len(), 100);
    }

    #[test]
    fn rp2_embedding_separates_lines() {
        let mut rng = rng_from(9);
        let mut draw = || unit(&[0, 1, 2].map(|_| rng.sample::<f64, _>(StandardNormal)));
        for _ in 0..2000 {
            let (p, q) = (draw(), draw());
            let a = rp2_embed(p[0], p[1], p[2]);
            assert_eq!(a, rp2_embed(-p[0], -p[1], -p[2]));
            let cos = p.iter().zip(&q).map(|(u, v)| u * v).sum::<f64>().abs();
            if cos < 0.99 {
                let b = rp2_embed(q[0], q[1], q[2]);
                let gap = a.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                assert!(gap > 0.01, "{p:?} and {q:?} collide");
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ManifoldKind::ALL {
            assert_eq!(kind.name().parse::<ManifoldKind>().unwrap(), kind);
        }
        assert!("klein_bottle".parse::<ManifoldKind>().is_err());
    }
}
