//! Error statistics, per-class breakdowns and synthetic test scenes.

mod scene;

pub use scene::{synth_scene, Scene, ScenePlot, SceneSpec, DEFAULT_BASELINE};

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// One observed/predicted age pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPair {
    pub observed: f64,
    pub predicted: f64,
    pub weight: f64,
    pub class: String,
}

impl EvalPair {
    pub fn new(observed: f64, predicted: f64, class: impl Into<String>) -> Self {
        Self {
            observed,
            predicted,
            weight: 1.0,
            class: class.into(),
        }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Error statistics for one class or the pooled set. Relative forms are
/// `None` when the mean observed value is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub n: usize,
    pub rmse: f64,
    pub rmse_pct: Option<f64>,
    pub md: f64,
    pub md_pct: Option<f64>,
    pub mean_observed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub weighted: bool,
    /// Classes in site-index order, then the pooled `All` row.
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn row(&self, label: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn all(&self) -> &ReportRow {
        self.rows.last().expect("report has an All row")
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sw: f64,
    swd: f64,
    swd2: f64,
    swo: f64,
}

impl Moments {
    fn push(&mut self, p: &EvalPair, weighted: bool) {
        let w = if weighted { p.weight } else { 1.0 };
        let d = p.observed - p.predicted;
        self.n += 1;
        self.sw += w;
        self.swd += w * d;
        self.swd2 += w * d * d;
        self.swo += w * p.observed;
    }

    fn row(&self, label: &str) -> ReportRow {
        let rmse = (self.swd2 / self.sw).sqrt();
        let md = self.swd / self.sw;
        let mean_observed = self.swo / self.sw;
        let pct = |v: f64| (mean_observed != 0.0).then(|| 100.0 * v / mean_observed);
        ReportRow {
            label: label.to_string(),
            n: self.n,
            rmse,
            rmse_pct: pct(rmse),
            md,
            md_pct: pct(md),
            mean_observed,
        }
    }
}

fn check(pairs: &[EvalPair], weighted: bool) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no evaluation pairs".into()));
    }
    if let Some(p) = pairs.iter().find(|p| !p.observed.is_finite() || !p.predicted.is_finite()) {
        return Err(Error::Domain(format!("non-finite pair {} / {}", p.observed, p.predicted)));
    }
    if weighted {
        if let Some(p) = pairs.iter().find(|p| !(p.weight >= 0.0) || !p.weight.is_finite()) {
            return Err(Error::Domain(format!("weight {} is negative or not finite", p.weight)));
        }
        if pairs.iter().map(|p| p.weight).sum::<f64>() <= 0.0 {
            return Err(Error::Domain("weights sum to zero".into()));
        }
    }
    Ok(())
}

/// RMSE and MD (observed minus predicted) with their relative forms.
///
/// Unweighted mode averages over n; weighted mode normalizes the weights to sum 1.
pub fn rmse_md(pairs: &[EvalPair], weighted: bool) -> Result<ReportRow> {
    check(pairs, weighted)?;
    let mut m = Moments::default();
    for p in pairs {
        m.push(p, weighted);
    }
    Ok(m.row("All"))
}

/// Leading integer in a class label, for ordering `SI 8` before `SI 11`.
fn label_key(label: &str) -> (Option<u64>, &str) {
    let digits: String = label
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    (digits.parse().ok(), label)
}

/// One row per class label plus the pooled `All` row.
pub fn breakdown(pairs: &[EvalPair], weighted: bool) -> Result<EvaluationReport> {
    check(pairs, weighted)?;
    let mut by_class: BTreeMap<&str, Moments> = BTreeMap::new();
    let mut all = Moments::default();
    for p in pairs {
        by_class.entry(p.class.as_str()).or_default().push(p, weighted);
        all.push(p, weighted);
    }
    let mut labels: Vec<&str> = by_class.keys().copied().collect();
    labels.sort_by(|a, b| {
        let (ka, kb) = (label_key(a), label_key(b));
        match (ka.0, kb.0) {
            (Some(x), Some(y)) => x.cmp(&y).then(ka.1.cmp(kb.1)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => ka.1.cmp(kb.1),
        }
    });
    let mut rows: Vec<ReportRow> = labels
        .iter()
        .filter(|l| by_class[*l].sw > 0.0)
        .map(|l| by_class[*l].row(l))
        .collect();
    rows.push(all.row("All"));
    Ok(EvaluationReport { weighted, rows })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "NA".into())
}

/// Aligned text table: class, n, RMSE, RMSE%, MD, MD%.
pub fn format_report(report: &EvaluationReport) -> String {
    let width = report.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>6} {:>9} {:>8} {:>9} {:>8}",
        "Class", "n", "RMSE", "RMSE%", "MD", "MD%"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<width$} {:>6} {:>9.2} {:>8} {:>9.2} {:>8}",
            r.label,
            r.n,
            r.rmse,
            opt(r.rmse_pct, 2),
            r.md,
            opt(r.md_pct, 2)
        );
    }
    if report.weighted {
        out.push_str("(area-weighted)\n");
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn format_report_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("class,n,rmse,rmse_pct,md,md_pct,mean_observed,weighted\n");
    let na = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.label),
            r.n,
            r.rmse,
            na(r.rmse_pct),
            r.md,
            na(r.md_pct),
            r.mean_observed,
            report.weighted
        );
    }
    out
}

/// CSV `observed,predicted,class,weight`, one row per pair.
pub fn format_scatter_csv(pairs: &[EvalPair]) -> String {
    let mut out = String::from("observed,predicted,class,weight\n");
    for p in pairs {
        let _ = writeln!(out, "{},{},{},{}", p.observed, p.predicted, csv_field(&p.class), p.weight);
    }
    out
}

pub fn scatter_export(pairs: &[EvalPair], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_scatter_csv(pairs)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(v: &[(f64, f64, &str)]) -> Vec<EvalPair> {
        v.iter().map(|(o, p, c)| EvalPair::new(*o, *p, *c)).collect()
    }

    #[test]
    fn symmetric_deviations() {
        let r = rmse_md(&pairs(&[(100.0, 90.0, "a"), (50.0, 60.0, "a")]), false).unwrap();
        assert_eq!(r.rmse, 10.0);
        assert_eq!(r.md, 0.0);
        assert_eq!(r.rmse_pct, Some(100.0 * 10.0 / 75.0));
    }

    #[test]
    fn weighted_hand_case() {
        let p = vec![
            EvalPair::new(100.0, 90.0, "a").weighted(3.0),
            EvalPair::new(50.0, 60.0, "a").weighted(1.0),
        ];
        let r = rmse_md(&p, true).unwrap();
        assert_eq!(r.rmse, 10.0);
        assert_eq!(r.md, 5.0);
        assert!((r.md_pct.unwrap() - 5.0 / 87.5 * 100.0).abs() < 1e-12);
        assert!((r.md_pct.unwrap() - 5.714).abs() < 1e-3);
    }

    #[test]
    fn perfect_and_empty() {
        let r = rmse_md(&pairs(&[(10.0, 10.0, "a"), (20.0, 20.0, "b")]), false).unwrap();
        assert_eq!((r.rmse, r.md), (0.0, 0.0));
        assert!(matches!(rmse_md(&[], false), Err(Error::EmptyInput(_))));
        let z = rmse_md(&pairs(&[(0.0, 1.0, "a")]), false).unwrap();
        assert_eq!((z.rmse_pct, z.md_pct), (None, None));
    }

    #[test]
    fn breakdown_pools() {
        let p = pairs(&[(10.0, 10.0, "SI 11"), (20.0, 20.0, "SI 11"), (10.0, 0.0, "SI 8"), (20.0, 30.0, "SI 8")]);
        let rep = breakdown(&p, false).unwrap();
        let labels: Vec<&str> = rep.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["SI 8", "SI 11", "All"]);
        assert!((rep.all().rmse - 10.0 / 2f64.sqrt()).abs() < 1e-12);
        let single = breakdown(&p[..2], false).unwrap();
        assert_eq!(single.rows[0].rmse, single.rows[1].rmse);
        assert_eq!(single.rows[0].md, single.rows[1].md);
    }

    #[test]
    fn scatter_round_trip() {
        let p = vec![
            EvalPair::new(1.0 / 3.0, 2.5, "SI 8"),
            EvalPair::new(40.0, 41.25, "pine, mixed").weighted(0.2),
            EvalPair::new(7e-7, 1e10, "spruce"),
        ];
        let text = format_scatter_csv(&p);
        let mut rdr = text.lines().skip(1);
        assert_eq!(text.lines().count(), 4);
        let line = rdr.next().unwrap();
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert!(text.contains("\"pine, mixed\""));
        let dir = tempfile::tempdir().unwrap();
        scatter_export(&p, dir.path().join("s.csv")).unwrap();
        assert!(scatter_export(&p, dir.path().join("missing/s.csv")).is_err());
    }

    #[test]
    fn text_report_layout() {
        let rep = breakdown(&pairs(&[(100.0, 90.0, "pSI 14"), (50.0, 60.0, "pSI 14")]), false).unwrap();
        let text = format_report(&rep);
        assert!(text.starts_with("Class"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(format_report_csv(&rep).lines().count(), 3);
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<EvalPair>> {
        prop::collection::vec((1.0f64..300.0, 1.0f64..300.0, 0.01f64..5.0, 0usize..3), 1..60).prop_map(|v| {
            v.into_iter()
                .map(|(o, p, w, c)| EvalPair::new(o, p, ["SI 6", "SI 14", "SI 23"][c]).weighted(w))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn uniform_weights_match_unweighted(p in arb_pairs()) {
            let n = p.len() as f64;
            let uni: Vec<EvalPair> = p.iter().cloned().map(|x| x.weighted(1.0 / n)).collect();
            let a = rmse_md(&p, false).unwrap();
            let b = rmse_md(&uni, true).unwrap();
            prop_assert!((a.rmse - b.rmse).abs() <= 1e-12 * a.rmse.max(1.0));
            prop_assert!((a.md - b.md).abs() <= 1e-12 * a.rmse.max(1.0));
        }

        #[test]
        fn rmse_bounds_md_and_pooling_is_exact(p in arb_pairs(), weighted in any::<bool>()) {
            let rep = breakdown(&p, weighted).unwrap();
            for r in &rep.rows {
                prop_assert!(r.rmse * r.rmse >= r.md * r.md - 1e-9);
                if let Some(pct) = r.rmse_pct {
                    prop_assert!((pct - 100.0 * r.rmse / r.mean_observed).abs() < 1e-9);
                }
            }
            let pooled = rmse_md(&p, weighted).unwrap();
            prop_assert_eq!(rep.all(), &pooled);
            // MD is linear in the class weight mass
            let mass = |label: &str| p.iter().filter(|x| x.class == label).map(|x| if weighted { x.weight } else { 1.0 }).sum::<f64>();
            let total: f64 = rep.rows[..rep.rows.len() - 1].iter().map(|r| mass(&r.label)).sum();
            let mix: f64 = rep.rows[..rep.rows.len() - 1].iter().map(|r| r.md * mass(&r.label)).sum::<f64>() / total;
            prop_assert!((mix - pooled.md).abs() < 1e-9 * pooled.rmse.max(1.0));
        }

        #[test]
        fn permutation_invariant(p in arb_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut q = p.clone();
            q.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = rmse_md(&p, false).unwrap();
            let b = rmse_md(&q, false).unwrap();
            prop_assert!((a.rmse - b.rmse).abs() < 1e-12 * a.rmse.max(1.0));
        }
    }
}
