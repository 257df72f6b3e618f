//! Synthetic generators, UCI ingestion, and the point-cloud text format.

mod synthetic;
mod uci;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;

pub use synthetic::{
    gen_gaussian_majority, gen_manifold_samples, gen_trig_moment_curve, manifold_rotation,
    trig_moment_point, ManifoldKind, MANIFOLD_AMBIENT_DIM,
};
pub use uci::{load_delimited, ColumnRef, Delimiter, IngestSchema, Preset};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::seed::rng_from;

/// Serializes a cloud: a `# n=<dim> count=<points> labels=<yes|no>` header
/// followed by one comma-separated row per point (label last when present).
/// Values use six decimals.
pub fn format_cloud(cloud: &PointCloud) -> String {
    let labeled = cloud.labels().is_some();
    let mut out = format!(
        "# n={} count={} labels={}\n",
        cloud.dim(),
        cloud.len(),
        if labeled { "yes" } else { "no" }
    );
    for (i, p) in cloud.points().enumerate() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&row.join(","));
        if let Some(label) = cloud.label(i) {
            let _ = write!(out, ",{label}");
        }
        out.push('\n');
    }
    out
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, path)
}

/// Parses the format written by [`format_cloud`].
pub fn parse_cloud(text: &str, path: &Path) -> Result<PointCloud> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{} is empty", path.display())))?;
    let fields: BTreeMap<&str, &str> = header
        .trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect();
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(1, format!("header is missing '{key}='")))
    };
    let dim: usize = get("n")?
        .parse()
        .map_err(|_| parse_err(1, "bad value for n".into()))?;
    let count: usize = get("count")?
        .parse()
        .map_err(|_| parse_err(1, "bad value for count".into()))?;
    let labeled = match get("labels")? {
        "yes" => true,
        "no" => false,
        other => return Err(parse_err(1, format!("labels must be yes or no, got '{other}'"))),
    };

    let expected = dim + usize::from(labeled);
    let mut coords = Vec::with_capacity(count * dim);
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != expected {
            return Err(Error::Schema(format!(
                "{}:{}: expected {expected} fields, found {}",
                path.display(),
                idx + 1,
                parts.len()
            )));
        }
        for p in &parts[..dim] {
            coords.push(
                p.parse::<f64>()
                    .map_err(|_| parse_err(idx + 1, format!("cannot parse '{p}' as a number")))?,
            );
        }
        if labeled {
            labels.push(parts[dim].to_string());
        }
    }
    if coords.len() != count * dim {
        return Err(Error::Schema(format!(
            "{}: header declares {count} points, found {}",
            path.display(),
            coords.len() / dim.max(1)
        )));
    }
    PointCloud::from_flat(dim, coords, labeled.then_some(labels))
}

/// Rescales every feature to zero mean and unit variance. Constant features
/// are only centered.
pub fn standardize(cloud: &PointCloud) -> Result<PointCloud> {
    let n = cloud.dim();
    let count = cloud.len() as f64;
    let mut mean = vec![0.0; n];
    for p in cloud.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / count;
        }
    }
    let mut sd = vec![0.0; n];
    for p in cloud.points() {
        for ((s, x), m) in sd.iter_mut().zip(p).zip(&mean) {
            *s += (x - m) * (x - m) / count;
        }
    }
    for s in &mut sd {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    cloud.map_points(|p| {
        p.iter()
            .zip(&mean)
            .zip(&sd)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    })
}

/// Keeps `round(fraction · size)` points of every class (at least one), drawn
/// without replacement. Row order of the kept points is preserved.
pub fn subsample_per_class(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::Config("per-class subsampling needs labels".into()))?;
    let mut classes: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.as_str()).or_default().push(i);
    }
    let mut rng = rng_from(seed);
    let mut keep = Vec::new();
    for members in classes.values() {
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        keep.extend(sample(&mut rng, members.len(), take).into_iter().map(|i| members[i]));
    }
    keep.sort_unstable();
    cloud.select(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_text_round_trip() {
        let c = PointCloud::with_labels(
            vec![vec![1.0, -2.5], vec![0.125, 3.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let text = format_cloud(&c);
        assert!(text.starts_with("# n=2 count=2 labels=yes\n1.000000,-2.500000,a\n"));
        assert_eq!(parse_cloud(&text, Path::new("mem")).unwrap(), c);

        let u = c.unlabeled();
        assert_eq!(parse_cloud(&format_cloud(&u), Path::new("mem")).unwrap(), u);
    }

    #[test]
    fn cloud_text_errors() {
        let p = Path::new("mem");
        assert!(parse_cloud("", p).is_err());
        assert!(matches!(parse_cloud("# n=2 count=1\n1,2\n", p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_cloud("# n=2 count=2 labels=no\n1,2\n", p),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_cloud("# n=2 count=1 labels=no\n1,x\n", p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn standardize_moments() {
        let c = PointCloud::new(vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]]).unwrap();
        let s = standardize(&c).unwrap();
        let col0: Vec<f64> = s.points().map(|p| p[0]).collect();
        assert!((col0.iter().sum::<f64>()).abs() < 1e-12);
        assert!((col0.iter().map(|x| x * x).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert!(s.points().all(|p| p[1] == 0.0));
    }

    #[test]
    fn per_class_subsample_counts() {
        let labels: Vec<String> = (0..100).map(|i| if i < 90 { "a" } else { "b" }.into()).collect();
        let points: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let c = PointCloud::with_labels(points, labels).unwrap();
        let s = subsample_per_class(&c, 0.2, 1).unwrap();
        let b = s.labels().unwrap().iter().filter(|l| *l == "b").count();
        assert_eq!(b, 2);
        assert_eq!(s.len(), 20);
        assert_eq!(s, subsample_per_class(&c, 0.2, 1).unwrap());
    }
}
