use kappa_detect::detector::{classify, kappa_detect, DetectionConfig, Prediction};
use kappa_detect::geometry::{compute_normalized_secants, PointCloud, SecantFilterPolicy};
use kappa_detect::profile::{compute_kappa_profile, profile_distance, DimensionRange, KappaProfile, ProfileConfig};
use kappa_detect::solver::{kappa_of, random_projection, solve_min_secant_projection, SolverConfig};
use nalgebra::DVector;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 100,
        ..ProptestConfig::default()
    }
}

/// Clouds of 4 to 9 distinct-ish points in ℝ² to ℝ⁴.
fn clouds() -> impl Strategy<Value = PointCloud> {
    (2usize..=4, 4usize..=9).prop_flat_map(|(dim, count)| {
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), count)
            .prop_filter("points must be distinct", |pts| {
                pts.iter().enumerate().all(|(i, a)| {
                    pts[i + 1..]
                        .iter()
                        .all(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() > 1e-3)
                })
            })
            .prop_map(|pts| PointCloud::new(pts).unwrap())
    })
}

fn profile_cfg(n: usize, seed: u64) -> ProfileConfig {
    let mut cfg = ProfileConfig::new(DimensionRange::consecutive(1, n).unwrap()).with_seed(seed);
    cfg.trials = 2;
    cfg
}

fn max_gap(a: &KappaProfile, b: &KappaProfile) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn kappa_lies_in_unit_interval(cloud in clouds(), k in 1usize..=4, seed in any::<u64>()) {
        let k = k.min(cloud.dim());
        let s = compute_normalized_secants(&cloud, SecantFilterPolicy::None).unwrap();
        let sol = solve_min_secant_projection(&s, k, &SolverConfig::default().with_seed(seed)).unwrap();
        prop_assert!((0.0..=1.0).contains(&sol.kappa));
        prop_assert!(sol.projection.orthonormality_error() < 1e-9);
        let p = random_projection(cloud.dim(), k, seed).unwrap();
        let kappa = kappa_of(&p, &s).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&kappa));
    }

    #[test]
    fn full_dimension_gives_one(cloud in clouds(), seed in any::<u64>()) {
        let s = compute_normalized_secants(&cloud, SecantFilterPolicy::None).unwrap();
        let sol = solve_min_secant_projection(&s, cloud.dim(), &SolverConfig::default().with_seed(seed)).unwrap();
        prop_assert_eq!(sol.kappa, 1.0);
    }

    #[test]
    fn warm_started_profiles_are_monotone(cloud in clouds(), seed in any::<u64>()) {
        let cfg = profile_cfg(cloud.dim(), seed);
        let p = compute_kappa_profile(&cloud, &cfg).unwrap();
        let tol = 2.0 * cfg.solver.convergence_tol;
        for w in p.values.windows(2) {
            prop_assert!(w[1] >= w[0] - tol, "{:?}", p.values);
        }
        prop_assert_eq!(*p.values.last().unwrap(), 1.0);
    }

    #[test]
    fn profiles_are_invariant_to_similarity_maps(
        cloud in clouds(),
        seed in any::<u64>(),
        rot_seed in any::<u64>(),
        shift in prop::collection::vec(-100.0f64..100.0, 4),
        scale in 0.01f64..100.0,
    ) {
        let n = cloud.dim();
        let cfg = profile_cfg(n, seed);
        let tol = 2.0 * cfg.solver.convergence_tol;
        let base = compute_kappa_profile(&cloud, &cfg).unwrap();

        let moved = cloud.map_points(|p| p.iter().zip(&shift).map(|(x, t)| x + t).collect()).unwrap();
        let translated = compute_kappa_profile(&moved, &cfg).unwrap();
        prop_assert!(max_gap(&base, &translated) <= tol, "{:?} vs {:?}", base.values, translated.values);

        let q = random_projection(n, n, rot_seed).unwrap();
        let rotated_cloud = cloud
            .map_points(|p| (q.matrix() * DVector::from_column_slice(p)).iter().copied().collect())
            .unwrap();
        let rotated = compute_kappa_profile(&rotated_cloud, &cfg).unwrap();
        prop_assert!(max_gap(&base, &rotated) <= tol, "{:?} vs {:?}", base.values, rotated.values);

        let scaled_cloud = cloud.map_points(|p| p.iter().map(|x| x * scale).collect()).unwrap();
        let scaled = compute_kappa_profile(&scaled_cloud, &cfg).unwrap();
        prop_assert!(max_gap(&base, &scaled) <= tol, "{:?} vs {:?}", base.values, scaled.values);
    }

    #[test]
    fn profile_distance_is_a_metric(
        a in prop::collection::vec(0.0f64..=1.0, 5),
        b in prop::collection::vec(0.0f64..=1.0, 5),
        c in prop::collection::vec(0.0f64..=1.0, 5),
    ) {
        let dims = DimensionRange::consecutive(1, 5).unwrap();
        let p = |v: &Vec<f64>| KappaProfile::from_values(dims.clone(), v.clone()).unwrap();
        let (pa, pb, pc) = (p(&a), p(&b), p(&c));
        let d = |x: &KappaProfile, y: &KappaProfile| profile_distance(x, y).unwrap();
        prop_assert_eq!(d(&pa, &pa), 0.0);
        prop_assert!(d(&pa, &pb) >= 0.0);
        prop_assert_eq!(d(&pa, &pb), d(&pb, &pa));
        prop_assert!(d(&pa, &pc) <= d(&pa, &pb) + d(&pb, &pc) + 1e-12);
        if a != b {
            prop_assert!(d(&pa, &pb) > 0.0);
        }
    }

    #[test]
    fn duplicate_points_score_zero(
        cloud in clouds(),
        pick in any::<prop::sample::Index>(),
        seed in any::<u64>(),
        fraction in prop::option::of(0.0f64..0.3),
    ) {
        let n = cloud.dim();
        let mut profile = profile_cfg(n, seed);
        profile.dims = DimensionRange::consecutive(1, n.min(cloud.len() - 1)).unwrap();
        if let Some(f) = fraction {
            profile.policy = SecantFilterPolicy::DropShortestFraction(f);
        }
        let i = pick.index(cloud.len());
        let unlabeled = cloud.select(&[i]).unwrap();
        let cfg = DetectionConfig { threshold: 1e-9, profile };
        let out = kappa_detect(&cloud, &unlabeled, &cfg).unwrap();
        prop_assert_eq!(out[0].d_y, 0.0);
        prop_assert_eq!(out[0].predicted, Prediction::Rare);
    }

    #[test]
    fn classification_is_monotone_in_threshold(d in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert_eq!(classify(d, lo) == Prediction::Rare, d < lo);
        if classify(d, lo) == Prediction::Rare {
            prop_assert_eq!(classify(d, hi), Prediction::Rare);
        }
    }
}
