use std::collections::HashMap;
use std::sync::{Arc, LazyLock};

use crate::error::{Error, Result};
use crate::geodata::PointCloud;

/// Return subsets the height statistics are computed over, with name suffixes.
pub const RETURN_SETS: [&str; 3] = ["first", "first2m", "last"];

/// Height above which a first return joins the `first2m` set.
pub const FIRST_ABOVE_HEIGHT: f64 = 2.0;

pub const DENSITY_SLICES: usize = 10;

const MOMENT_PREFIXES: [&str; 5] = ["hmean", "hvar", "hcv", "hkurt", "hskew"];

/// Which percentiles and crown-cover thresholds a metric vector carries.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    percentiles: Vec<u32>,
    cc_thresholds: Vec<u32>,
    names: Vec<String>,
    index: HashMap<String, usize>,
}

static DEFAULT_SPEC: LazyLock<Arc<MetricSpec>> = LazyLock::new(|| {
    Arc::new(MetricSpec::new(vec![10, 25, 50, 75, 90, 95], vec![2, 5, 10]).expect("default metric spec"))
});

impl MetricSpec {
    pub fn new(percentiles: Vec<u32>, cc_thresholds: Vec<u32>) -> Result<Self> {
        let increasing = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
        if percentiles.is_empty() || !increasing(&percentiles) || percentiles.iter().any(|p| *p == 0 || *p > 99) {
            return Err(Error::Config(format!(
                "percentiles must be strictly increasing within 1..=99, got {percentiles:?}"
            )));
        }
        if !increasing(&cc_thresholds) {
            return Err(Error::Config(format!(
                "crown-cover thresholds must be strictly increasing, got {cc_thresholds:?}"
            )));
        }
        let mut names = Vec::new();
        for set in RETURN_SETS {
            names.extend(MOMENT_PREFIXES.iter().map(|m| format!("{m}_{set}")));
            names.extend(percentiles.iter().map(|p| format!("h{p}_{set}")));
        }
        names.extend((0..DENSITY_SLICES).map(|i| format!("d{i}")));
        names.extend(cc_thresholds.iter().map(|t| format!("cc{t}")));
        names.push("n_first".into());
        names.push("n_last".into());
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Self {
            percentiles,
            cc_thresholds,
            names,
            index,
        })
    }

    pub fn default_spec() -> Arc<MetricSpec> {
        DEFAULT_SPEC.clone()
    }

    pub fn percentiles(&self) -> &[u32] {
        &self.percentiles
    }

    pub fn cc_thresholds(&self) -> &[u32] {
        &self.cc_thresholds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn stats_per_set(&self) -> usize {
        MOMENT_PREFIXES.len() + self.percentiles.len()
    }
}

/// Named laser metrics for one plot or cell; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsVector {
    spec: Arc<MetricSpec>,
    values: Vec<Option<f64>>,
}

impl MetricsVector {
    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.spec.position(name).and_then(|i| self.values[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.spec.position(name).is_some()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Option<f64>)> {
        self.spec.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }
}

/// Linear-interpolation quantile at rank `1 + (n-1)p` over sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("percentile fraction {p} outside [0, 1]")));
    }
    Ok(percentile_unchecked(sorted, p))
}

fn percentile_unchecked(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let k = h.floor() as usize;
    if k + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let (lo, hi) = (sorted[k], sorted[k + 1]);
    (lo + (h - k as f64) * (hi - lo)).clamp(lo, hi)
}

/// Moments and percentiles of one sorted return set, written into `out`.
fn height_stats(sorted: &[f64], percentiles: &[u32], out: &mut [Option<f64>]) {
    if sorted.is_empty() {
        out.fill(None);
        return;
    }
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for z in sorted {
        let d = z - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let var = if sorted.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    out[0] = Some(mean);
    out[1] = Some(var);
    out[2] = Some(cv);
    out[3] = Some(kurt);
    out[4] = Some(skew);
    for (slot, p) in out[5..].iter_mut().zip(percentiles) {
        *slot = Some(percentile_unchecked(sorted, *p as f64 / 100.0));
    }
}

/// Full metric suite with the default percentile and crown-cover settings.
pub fn als_metrics(cloud: &PointCloud) -> Result<MetricsVector> {
    als_metrics_with(cloud, &MetricSpec::default_spec())
}

pub fn als_metrics_with(cloud: &PointCloud, spec: &Arc<MetricSpec>) -> Result<MetricsVector> {
    if !cloud.normalized {
        return Err(Error::State("metrics need a height-normalized point cloud".into()));
    }
    let mut first = Vec::with_capacity(cloud.len());
    let mut last = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        if p.return_class.is_first() {
            first.push(p.z);
        }
        if p.return_class.is_last() {
            last.push(p.z);
        }
    }
    Ok(metrics_from_heights(first, last, spec))
}

/// Metrics from unsorted first- and last-return heights.
pub(crate) fn metrics_from_heights(mut first: Vec<f64>, mut last: Vec<f64>, spec: &Arc<MetricSpec>) -> MetricsVector {
    first.sort_unstable_by(f64::total_cmp);
    last.sort_unstable_by(f64::total_cmp);
    let above = first.partition_point(|z| *z <= FIRST_ABOVE_HEIGHT);

    let per_set = spec.stats_per_set();
    let mut values = vec![None; spec.names.len()];
    for (i, set) in [&first[..], &first[above..], &last[..]].into_iter().enumerate() {
        height_stats(set, &spec.percentiles, &mut values[i * per_set..(i + 1) * per_set]);
    }

    let base = RETURN_SETS.len() * per_set;
    let nf = first.len();
    if nf > 0 {
        let max = first[nf - 1];
        let mut counts = [0usize; DENSITY_SLICES];
        if max > 0.0 {
            let width = max / DENSITY_SLICES as f64;
            for z in &first {
                let k = ((z / width).floor() as usize).min(DENSITY_SLICES - 1);
                counts[k] += 1;
            }
        } else {
            counts[0] = nf;
        }
        for (k, c) in counts.iter().enumerate() {
            values[base + k] = Some(*c as f64 / nf as f64);
        }
        for (j, t) in spec.cc_thresholds.iter().enumerate() {
            let above_t = nf - first.partition_point(|z| *z <= *t as f64);
            values[base + DENSITY_SLICES + j] = Some(above_t as f64 / nf as f64);
        }
    }
    let tail = base + DENSITY_SLICES + spec.cc_thresholds.len();
    values[tail] = Some(nf as f64);
    values[tail + 1] = Some(last.len() as f64);

    MetricsVector {
        spec: spec.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{PointRecord, ReturnClass};

    fn cloud(heights: &[f64]) -> PointCloud {
        PointCloud::new(
            heights
                .iter()
                .map(|z| PointRecord {
                    x: 0.0,
                    y: 0.0,
                    z: *z,
                    return_class: ReturnClass::Only,
                })
                .collect(),
            true,
        )
    }

    #[test]
    fn percentile_cases() {
        let v = [2.0, 4.0, 6.0, 8.0, 10.0];
        assert_eq!(percentile(&v, 0.5).unwrap(), 6.0);
        assert!((percentile(&v, 0.95).unwrap() - 9.6).abs() < 1e-12);
        assert_eq!(percentile(&v, 1.0).unwrap(), 10.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 2.0);
        for p in [0.0, 0.3, 0.95, 1.0] {
            assert_eq!(percentile(&[7.0], p).unwrap(), 7.0);
        }
        assert!(matches!(percentile(&[], 0.5), Err(Error::EmptyInput(_))));
        assert!(percentile(&v, 1.5).is_err());
    }

    #[test]
    fn default_names() {
        let spec = MetricSpec::default_spec();
        assert_eq!(spec.names().len(), 3 * 11 + 10 + 3 + 2);
        for n in ["h95_first", "hkurt_last", "h10_first2m", "d9", "cc10", "n_last"] {
            assert!(spec.position(n).is_some(), "{n}");
        }
        assert!(MetricSpec::new(vec![50, 50], vec![2]).is_err());
        assert!(MetricSpec::new(vec![0, 50], vec![2]).is_err());
    }

    #[test]
    fn crown_cover_fractions() {
        let m = als_metrics(&cloud(&[1.0, 3.0, 6.0, 12.0])).unwrap();
        assert_eq!(m.get("cc2"), Some(0.75));
        assert_eq!(m.get("cc5"), Some(0.5));
        assert_eq!(m.get("cc10"), Some(0.25));
        assert_eq!(m.get("n_first"), Some(4.0));
        // strict inequality at the threshold
        let m = als_metrics(&cloud(&[2.0, 5.0, 10.0])).unwrap();
        assert_eq!(m.get("cc2"), Some(2.0 / 3.0));
        assert_eq!(m.get("cc10"), Some(0.0));
    }

    #[test]
    fn constant_cloud() {
        let m = als_metrics(&cloud(&[5.0; 20])).unwrap();
        assert_eq!(m.get("hvar_first"), Some(0.0));
        assert_eq!(m.get("hcv_first"), Some(0.0));
        for p in [10, 25, 50, 75, 90, 95] {
            assert_eq!(m.get(&format!("h{p}_first")), Some(5.0));
        }
        assert_eq!(m.get("d9"), Some(1.0));
    }

    #[test]
    fn density_slices_top_bin_inclusive() {
        let m = als_metrics(&cloud(&[0.0, 1.0, 5.0, 10.0])).unwrap();
        assert_eq!(m.get("d0"), Some(0.25));
        assert_eq!(m.get("d1"), Some(0.25));
        assert_eq!(m.get("d5"), Some(0.25));
        assert_eq!(m.get("d9"), Some(0.25));
        let m = als_metrics(&cloud(&[0.0, 0.0])).unwrap();
        assert_eq!(m.get("d0"), Some(1.0));
    }

    #[test]
    fn empty_sets_are_missing() {
        let mut c = cloud(&[1.0, 1.5]);
        c.points[0].return_class = ReturnClass::Last;
        c.points[1].return_class = ReturnClass::Intermediate;
        let m = als_metrics(&c).unwrap();
        assert_eq!(m.get("hmean_first"), None);
        assert_eq!(m.get("cc2"), None);
        assert_eq!(m.get("d0"), None);
        assert_eq!(m.get("hmean_last"), Some(1.0));
        assert_eq!(m.get("hmean_first2m"), None);
        assert_eq!(m.get("n_first"), Some(0.0));
    }

    #[test]
    fn unnormalized_is_state_error() {
        let mut c = cloud(&[1.0]);
        c.normalized = false;
        assert!(matches!(als_metrics(&c), Err(Error::State(_))));
    }

    #[test]
    fn skewness_and_kurtosis() {
        // mean 4, central moments with denominator n
        let m = als_metrics(&cloud(&[1.0, 2.0, 3.0, 10.0])).unwrap();
        let d = [-3.0f64, -2.0, -1.0, 6.0];
        let m2 = d.iter().map(|x| x.powi(2)).sum::<f64>() / 4.0;
        let m3 = d.iter().map(|x| x.powi(3)).sum::<f64>() / 4.0;
        let m4 = d.iter().map(|x| x.powi(4)).sum::<f64>() / 4.0;
        assert_eq!(m2, 12.5);
        assert!((m.get("hskew_first").unwrap() - m3 / m2.powf(1.5)).abs() < 1e-12);
        assert!((m.get("hkurt_first").unwrap() - m4 / (m2 * m2)).abs() < 1e-12);
        assert!((m.get("hvar_first").unwrap() - 50.0 / 3.0).abs() < 1e-12);
    }
}
