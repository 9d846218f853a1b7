use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::fitting::TrainingSet;
use crate::models::{AgeModel, Link};

pub const INTERCEPT: &str = "(Intercept)";

/// Diagonal of R below this fraction of the largest diagonal marks a
/// rank-deficient design (condition estimate above 1e12).
const RANK_TOL: f64 = 1e-12;

/// Estimate, standard error and test statistics for one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStat {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Start,
    Add,
    Drop,
    /// Removal in the p-value phase.
    Prune,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub action: StepAction,
    pub name: String,
    pub aic: f64,
}

/// A fitted model with its coefficient table and selection history.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub model: AgeModel,
    /// Intercept first, then the model terms in order.
    pub terms: Vec<TermStat>,
    pub r2_adjusted: f64,
    pub rss: f64,
    pub aic: f64,
    pub n: usize,
    pub trace: Vec<TraceStep>,
    /// Times the AIC phase would have dropped `h95_first` had it not been protected.
    pub protected_h95_blocks: usize,
}

impl FitSummary {
    pub fn term_names(&self) -> Vec<&str> {
        self.model.terms.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn stat(&self, name: &str) -> Option<&TermStat> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// Akaike information criterion `n ln(rss/n) + 2(k+1)` for `k` coefficients.
///
/// A perfect fit gives negative infinity.
pub fn aic(rss: f64, n: usize, k: usize) -> f64 {
    if rss <= 0.0 {
        log::warn!("AIC of a perfect fit (rss = {rss}) is -inf");
        return f64::NEG_INFINITY;
    }
    let n = n as f64;
    n * (rss / n).ln() + 2.0 * (k as f64 + 1.0)
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_p_value(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Least-squares solution and its inference quantities.
#[derive(Debug, Clone)]
pub(crate) struct LsFit {
    pub coef: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub rss: f64,
    pub df: usize,
}

/// Householder QR least squares on column-major `cols` (intercept included by caller).
pub(crate) fn least_squares(cols: &[&[f64]], names: &[String], y: &[f64]) -> Result<LsFit> {
    let n = y.len();
    let p = cols.len();
    if n <= p {
        return Err(Error::Argument(format!("need more than {p} observations, have {n}")));
    }
    // unit-norm column scaling so the rank test is unit-free
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(j) = norms.iter().position(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::Singular {
            column: names[j].clone(),
            with: vec![],
        });
    }
    let mut a: Vec<Vec<f64>> = cols
        .iter()
        .zip(&norms)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let mut qty = y.to_vec();

    for j in 0..p {
        let alpha = {
            let col = &a[j];
            let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if col[j] > 0.0 { -norm } else { norm }
        };
        if alpha == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= f * vi;
            }
        };
        for col in a.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
        a[j][j] = alpha;
        for x in a[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
    }

    let r = |i: usize, j: usize| a[j][i];
    let rmax = (0..p).map(|j| r(j, j).abs()).fold(0.0, f64::max);
    for j in 0..p {
        if r(j, j).abs() <= RANK_TOL * rmax {
            // express column j through the earlier columns to name the culprits
            let mut b = vec![0.0; j];
            for i in (0..j).rev() {
                let s: f64 = (i + 1..j).map(|k| r(i, k) * b[k]).sum();
                b[i] = (r(i, j) - s) / r(i, i);
            }
            let with = (0..j).filter(|i| b[*i].abs() > 1e-8).map(|i| names[i].clone()).collect();
            return Err(Error::Singular {
                column: names[j].clone(),
                with,
            });
        }
    }

    // R^{-1}, upper triangular, column by column
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r(j, j);
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|k| r(i, k) * coef[k]).sum();
        coef[i] = (qty[i] - s) / r(i, i);
    }
    for (c, s) in coef.iter_mut().zip(&norms) {
        *c /= s;
    }

    let fitted: Vec<f64> = (0..n)
        .map(|i| cols.iter().zip(&coef).map(|(c, b)| c[i] * b).sum())
        .collect();
    let rss: f64 = y.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    let df = n - p;
    let s2 = rss / df as f64;
    let std_errors = (0..p)
        .map(|j| {
            let d: f64 = (j..p).map(|k| rinv[j][k] * rinv[j][k]).sum();
            (s2 * d).sqrt() / norms[j]
        })
        .collect();
    Ok(LsFit {
        coef,
        std_errors,
        rss,
        df,
    })
}

/// Column values of `names` over the training rows.
pub(crate) fn design_columns(data: &TrainingSet, names: &[String]) -> Result<Vec<Vec<f64>>> {
    names
        .iter()
        .map(|name| {
            data.rows
                .iter()
                .map(|row| {
                    row.predictors.term(name).map_err(|_| {
                        Error::Argument(format!("training row {} lacks predictor `{name}`", row.id))
                    })
                })
                .collect()
        })
        .collect()
}

pub(crate) fn response(data: &TrainingSet, link: Link) -> Result<Vec<f64>> {
    data.rows
        .iter()
        .map(|row| {
            if link != Link::Identity && !(row.age > 0.0) {
                return Err(Error::Domain(format!("row {}: age must be > 0 for the {link} link", row.id)));
            }
            Ok(link.apply(row.age))
        })
        .collect()
}

/// Fit from pre-built predictor columns; the intercept is added here.
pub(crate) fn fit_columns(
    data: &TrainingSet,
    names: &[String],
    cols: &[&[f64]],
    y: &[f64],
    link: Link,
) -> Result<FitSummary> {
    let n = y.len();
    let ones = vec![1.0; n];
    let mut all: Vec<&[f64]> = Vec::with_capacity(cols.len() + 1);
    all.push(&ones);
    all.extend_from_slice(cols);
    let mut all_names = Vec::with_capacity(names.len() + 1);
    all_names.push(INTERCEPT.to_string());
    all_names.extend(names.iter().cloned());

    let fit = least_squares(&all, &all_names, y)?;
    let df = fit.df as f64;
    let terms: Vec<TermStat> = all_names
        .iter()
        .zip(fit.coef.iter().zip(&fit.std_errors))
        .map(|(name, (b, se))| {
            let t = if *se > 0.0 { b / se } else { f64::INFINITY.copysign(*b) };
            TermStat {
                name: name.clone(),
                estimate: *b,
                std_error: *se,
                t_value: t,
                p_value: t_p_value(t, df),
            }
        })
        .collect();

    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2_adjusted = if tss > 0.0 {
        1.0 - (fit.rss / df) / (tss / (n as f64 - 1.0))
    } else {
        f64::NAN
    };
    let sigma = (fit.rss / df).sqrt();
    let model = AgeModel::new(
        data.species,
        data.si,
        link,
        fit.coef[0],
        names.iter().cloned().zip(fit.coef[1..].iter().copied()).collect(),
        sigma,
    )?;
    Ok(FitSummary {
        model,
        terms,
        r2_adjusted,
        rss: fit.rss,
        aic: aic(fit.rss, n, all_names.len()),
        n,
        trace: Vec::new(),
        protected_h95_blocks: 0,
    })
}

/// Ordinary least squares of the link-transformed age on the named predictors.
pub fn ols_fit(data: &TrainingSet, names: &[String], link: Link) -> Result<FitSummary> {
    let k = names.len();
    if data.rows.len() <= k + 1 {
        return Err(Error::Argument(format!(
            "{} SI {}: n = {} is too small for {k} predictors",
            data.species,
            data.si,
            data.rows.len()
        )));
    }
    let cols = design_columns(data, names)?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let y = response(data, link)?;
    fit_columns(data, names, &refs, &y, link)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{TrainingRow, TrainingSet};
    use crate::models::Species;
    use crate::predictors::PredictorVector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn set(rows: Vec<(f64, Vec<(&str, f64)>)>) -> TrainingSet {
        TrainingSet::new(
            Species::Spruce,
            14,
            rows.into_iter()
                .enumerate()
                .map(|(i, (age, pairs))| TrainingRow {
                    id: i.to_string(),
                    age,
                    predictors: PredictorVector::from_pairs(pairs),
                })
                .collect(),
        )
        .unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn aic_arithmetic() {
        assert_eq!(aic(10.0, 10, 2), 6.0);
        assert_eq!(aic(10.0, 10, 3) - aic(10.0, 10, 2), 2.0);
        let d = aic(10.0, 10, 2) - aic(5.0, 10, 2);
        assert!((d - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(aic(0.0, 10, 2), f64::NEG_INFINITY);
    }

    #[test]
    fn p_values_match_reference() {
        // two-sided t tail values from standard tables
        assert!((t_p_value(2.228, 10.0) - 0.05).abs() < 5e-4);
        assert!((t_p_value(1.96, 1e6) - 0.05).abs() < 1e-3);
        assert_eq!(t_p_value(0.0, 5.0), 1.0);
        assert!((t_p_value(12.706, 1.0) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn exact_line() {
        let data = set((0..10).map(|i| (2.0 + 3.0 * i as f64, vec![("cc2", i as f64)])).collect());
        let fit = ols_fit(&data, &names(&["cc2"]), Link::Identity).unwrap();
        assert!((fit.model.intercept - 2.0).abs() < 1e-10);
        assert!((fit.model.terms[0].1 - 3.0).abs() < 1e-10);
        assert!(fit.rss < 1e-10);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let data = set(
            (0..10)
                .map(|i| (5.0 + i as f64, vec![("cc2", i as f64), ("cc5", 2.0 * i as f64)]))
                .collect(),
        );
        match ols_fit(&data, &names(&["cc2", "cc5"]), Link::Identity) {
            Err(Error::Singular { column, with }) => {
                assert_eq!(column, "cc5");
                assert!(with.contains(&"cc2".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let data = set(vec![(1.0, vec![("cc2", 0.0)]), (2.0, vec![("cc2", 1.0)])]);
        assert!(ols_fit(&data, &names(&["cc2"]), Link::Identity).is_err());
    }

    #[test]
    fn log_link_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let data = set(
            (0..500)
                .map(|_| {
                    let h: f64 = rng.random_range(2.0..30.0);
                    ((1.5 + 0.12 * h + noise.sample(&mut rng)).exp(), vec![("h95_first", h)])
                })
                .collect(),
        );
        let fit = ols_fit(&data, &names(&["h95_first"]), Link::Log).unwrap();
        let b0 = &fit.terms[0];
        let b1 = &fit.terms[1];
        assert!((b0.estimate - 1.5).abs() < 3.0 * b0.std_error, "{b0:?}");
        assert!((b1.estimate - 0.12).abs() < 3.0 * b1.std_error, "{b1:?}");
        assert!((fit.model.sigma - 0.2).abs() < 0.02);
        assert!(fit.terms.iter().all(|t| t.std_error > 0.0 && (0.0..=1.0).contains(&t.p_value)));
        assert_eq!(fit.aic, aic(fit.rss, 500, 2));
    }

    #[test]
    fn standard_errors_match_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let xs: Vec<(f64, f64)> = (0..2000).map(|_| (rng.random_range(0.0..10.0), rng.random_range(-1.0..1.0))).collect();
        let rows: Vec<(f64, Vec<(&str, f64)>)> = xs
            .iter()
            .map(|(a, b)| (5.0 + 0.3 * a - 0.7 * b + noise.sample(&mut rng), vec![("cc2", *a), ("Lat", *b)]))
            .collect();
        let data = set(rows);
        let nm = names(&["cc2", "Lat"]);
        let fit = ols_fit(&data, &nm, Link::Identity).unwrap();

        let reps = 200;
        let mut draws = vec![Vec::with_capacity(reps); 3];
        for _ in 0..reps {
            let sample: Vec<_> = (0..data.rows.len())
                .map(|_| data.rows[rng.random_range(0..data.rows.len())].clone())
                .collect();
            let boot = TrainingSet::new(data.species, data.si, sample).unwrap();
            let f = ols_fit(&boot, &nm, Link::Identity).unwrap();
            for (d, t) in draws.iter_mut().zip(&f.terms) {
                d.push(t.estimate);
            }
        }
        for (d, t) in draws.iter().zip(&fit.terms) {
            let m = d.iter().sum::<f64>() / reps as f64;
            let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            let ratio = sd / t.std_error;
            assert!((0.8..1.2).contains(&ratio), "{}: bootstrap sd {sd} vs se {}", t.name, t.std_error);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn residuals_orthogonal_to_design(seed in 0u64..1000, n in 8usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<(f64, Vec<(&str, f64)>)> = (0..n)
                .map(|_| {
                    let a: f64 = rng.random_range(0.0..30.0);
                    let b: f64 = rng.random_range(-1e5..1e5);
                    let c: f64 = rng.random_range(0.0..1.0);
                    (rng.random_range(1.0..200.0), vec![("h95_first", a), ("distC", b), ("cc2", c)])
                })
                .collect();
            let data = set(rows);
            let nm = names(&["h95_first", "distC", "cc2"]);
            let fit = ols_fit(&data, &nm, Link::Identity).unwrap();
            let cols = design_columns(&data, &nm).unwrap();
            let y: Vec<f64> = data.rows.iter().map(|r| r.age).collect();
            let resid: Vec<f64> = (0..n)
                .map(|i| {
                    y[i] - fit.model.intercept
                        - fit.model.terms.iter().zip(&cols).map(|((_, b), c)| b * c[i]).sum::<f64>()
                })
                .collect();
            let mut xnorm2 = n as f64;
            let mut worst = resid.iter().sum::<f64>().abs();
            for c in &cols {
                xnorm2 += c.iter().map(|v| v * v).sum::<f64>();
                worst = worst.max(c.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>().abs());
            }
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(worst < 1e-8 * xnorm2.sqrt() * ynorm, "{worst}");
        }
    }
}
