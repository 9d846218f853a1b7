//! Least-squares fitting of link-transformed age, stepwise selection and
//! link comparison.

mod links;
mod ols;
mod report;
mod stepwise;

pub use links::{compare_links, standardized_importance, LinkComparison, LinkScore};
pub use ols::{aic, ols_fit, t_p_value, FitSummary, StepAction, TermStat, TraceStep, INTERCEPT};
pub use report::{fit_report_csv, format_fit_report};
pub use stepwise::{stepwise_select, stepwise_select_with, StepwiseOptions};

use crate::error::{Error, Result};
use crate::models::Species;
use crate::predictors::PredictorVector;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub id: String,
    pub age: f64,
    pub predictors: PredictorVector,
}

/// Plots of one species and site-index stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub species: Species,
    pub si: u8,
    pub rows: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn new(species: Species, si: u8, rows: Vec<TrainingRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput(format!("training set {species} SI {si}")));
        }
        if let Some(r) = rows.iter().find(|r| !(r.age > 0.0) || !r.age.is_finite()) {
            return Err(Error::Domain(format!("plot {}: age {} is not positive", r.id, r.age)));
        }
        Ok(Self { species, si, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ages(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.age).collect()
    }
}
