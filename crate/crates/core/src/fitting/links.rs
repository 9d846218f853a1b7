use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::ols::{design_columns, fit_columns, ols_fit, response, FitSummary};
use crate::fitting::TrainingSet;
use crate::models::Link;

/// Back-transformed accuracy of one link, in years. `md` is observed minus predicted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScore {
    pub rmse: f64,
    pub md: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkComparison {
    pub scores: BTreeMap<Link, LinkScore>,
    /// Lowest back-transformed RMSE.
    pub best: Link,
}

/// Fit the same predictors under every link and score the back-transformed predictions.
pub fn compare_links(data: &TrainingSet, names: &[String]) -> Result<LinkComparison> {
    let cols = design_columns(data, names)?;
    let ages = data.ages();
    let n = ages.len() as f64;
    let mut scores = BTreeMap::new();
    for link in Link::ALL {
        let fit = ols_fit(data, names, link)?;
        let m = &fit.model;
        let (mut se, mut sd) = (0.0, 0.0);
        for (i, age) in ages.iter().enumerate() {
            let eta = m.intercept + m.terms.iter().zip(&cols).map(|((_, b), c)| b * c[i]).sum::<f64>();
            let d = age - link.back_transform(eta, m.sigma);
            se += d * d;
            sd += d;
        }
        scores.insert(
            link,
            LinkScore {
                rmse: (se / n).sqrt(),
                md: sd / n,
            },
        );
    }
    let best = Link::ALL
        .into_iter()
        .min_by(|a, b| scores[a].rmse.total_cmp(&scores[b].rmse))
        .expect("three links");
    Ok(LinkComparison { scores, best })
}

/// Terms ranked by the absolute coefficient of a refit on z-scored predictors.
///
/// Zero-variance predictors are left out with a warning.
pub fn standardized_importance(fit: &FitSummary, data: &TrainingSet) -> Result<Vec<(String, f64)>> {
    let names: Vec<String> = fit.model.terms.iter().map(|(n, _)| n.clone()).collect();
    if names.is_empty() {
        return Err(Error::Argument(format!("{} has no terms to rank", fit.model.label())));
    }
    let raw = design_columns(data, &names)?;
    let n = data.rows.len() as f64;
    let mut kept = Vec::new();
    let mut cols = Vec::new();
    for (name, col) in names.iter().zip(raw) {
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            log::warn!("predictor {name} has zero variance; left out of the importance ranking");
            continue;
        }
        kept.push(name.clone());
        cols.push(col.iter().map(|v| (v - mean) / sd).collect::<Vec<f64>>());
    }
    if kept.is_empty() {
        return Err(Error::Argument("every predictor has zero variance".into()));
    }
    let y = response(data, fit.model.link)?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let z = fit_columns(data, &kept, &refs, &y, fit.model.link)?;
    let mut ranked: Vec<(String, f64)> = z.model.terms.into_iter().map(|(n, b)| (n, b.abs())).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}
