use std::path::Path;

use kappa_detect::datasets::Preset;
use kappa_detect::detector::determine_threshold;
use kappa_detect::eval::{dims_for, ThresholdRule};
use kappa_detect::geometry::{compute_normalized_secants, PointCloud};
use kappa_detect::profile::{profile_with_solutions, refine_profile, ProfileConfig};

fn om_sample() -> PointCloud {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ecoli.data");
    let ecoli = Preset::Ecoli.load(path).unwrap();
    let labels = ecoli.labels().unwrap();
    let om: Vec<usize> = (0..ecoli.len()).filter(|&i| labels[i] == "om").take(9).collect();
    ecoli.select(&om).unwrap().unlabeled()
}

#[test]
fn leave_one_out_threshold_matches_a_direct_computation() {
    let rare = om_sample();
    let rule = ThresholdRule::LeaveOneOut { r: 1.3 };
    let cfg = ProfileConfig::new(dims_for(rare.dim(), rare.len(), &rule).unwrap()).with_seed(17);
    assert_eq!(cfg.trials, 5);

    let report = determine_threshold(&rare, 1.3, &cfg).unwrap();
    let again = determine_threshold(&rare, 1.3, &cfg).unwrap();
    assert_eq!(report.threshold, again.threshold);

    // written out by hand: baseline once, then each point removed in turn
    let secants = compute_normalized_secants(&rare, cfg.policy).unwrap();
    let (baseline, solutions) = profile_with_solutions(&secants, &cfg).unwrap();
    let mut total = 0.0;
    for skip in 0..rare.len() {
        let kept: Vec<Vec<f64>> = (0..rare.len())
            .filter(|&i| i != skip)
            .map(|i| rare.point(i).to_vec())
            .collect();
        let reduced = compute_normalized_secants(&PointCloud::new(kept).unwrap(), cfg.policy).unwrap();
        let profile = refine_profile(&reduced, &cfg, &solutions).unwrap();
        let d: f64 = baseline
            .values
            .iter()
            .zip(&profile.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!((d - report.per_point_distances[skip]).abs() < 1e-6);
        total += d;
    }
    let threshold = 1.3 * total / rare.len() as f64;
    assert!((threshold - report.threshold).abs() < 1e-6, "{threshold} vs {}", report.threshold);
    assert!(report.threshold > 0.0);
}
