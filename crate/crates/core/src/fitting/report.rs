use std::fmt::Write as _;

use crate::fitting::ols::{FitSummary, INTERCEPT};

/// `2.146e+00` style: three decimals, signed two-digit exponent.
pub(crate) fn sci3(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.3e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn p_text(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn display_name(name: &str) -> &str {
    if name == INTERCEPT {
        "Intercept"
    } else {
        name
    }
}

/// Tab-separated coefficient table with the residual standard error footer.
pub fn format_fit_report(fit: &FitSummary) -> String {
    let m = &fit.model;
    let mut out = String::new();
    let _ = writeln!(out, "Variable\tEstimate\tStd. Error\tt-Value\tp-value");
    let _ = writeln!(out, "Model for {} SI {}", m.species, m.si);
    for t in &fit.terms {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.3}\t{}",
            display_name(&t.name),
            sci3(t.estimate),
            sci3(t.std_error),
            t.t_value,
            p_text(t.p_value)
        );
    }
    let _ = writeln!(out, "Residual standard error ({} scale): {:.3}", m.link, m.sigma);
    let _ = writeln!(
        out,
        "n = {}, adjusted R2 = {:.3}, AIC = {:.3}",
        fit.n, fit.r2_adjusted, fit.aic
    );
    out
}

/// Machine-readable twin of [`format_fit_report`], full precision.
pub fn fit_report_csv(fit: &FitSummary) -> String {
    let m = &fit.model;
    let mut out = String::from("species,si,link,variable,estimate,std_error,t_value,p_value,sigma,n,r2_adjusted,aic\n");
    for t in &fit.terms {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            m.species,
            m.si,
            m.link,
            display_name(&t.name),
            t.estimate,
            t.std_error,
            t.t_value,
            t.p_value,
            m.sigma,
            fit.n,
            fit.r2_adjusted,
            fit.aic
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{ols_fit, TrainingRow, TrainingSet};
    use crate::models::{Link, Species};
    use crate::predictors::PredictorVector;

    #[test]
    fn scientific_layout() {
        assert_eq!(sci3(2.146), "2.146e+00");
        assert_eq!(sci3(-9.697e-3), "-9.697e-03");
        assert_eq!(sci3(1.661e-6), "1.661e-06");
        assert_eq!(sci3(0.0), "0.000e+00");
        assert_eq!(sci3(123456.0), "1.235e+05");
    }

    #[test]
    fn report_has_table_shape() {
        let rows = (0..30)
            .map(|i| TrainingRow {
                id: i.to_string(),
                age: (2.0 + 0.1 * i as f64 + if i % 2 == 0 { 0.05 } else { -0.05 }).exp(),
                predictors: PredictorVector::from_pairs([("h95_first", i as f64)]),
            })
            .collect();
        let data = TrainingSet::new(Species::Spruce, 6, rows).unwrap();
        let fit = ols_fit(&data, &["h95_first".to_string()], Link::Log).unwrap();
        let text = format_fit_report(&fit);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Variable\tEstimate\tStd. Error\tt-Value\tp-value");
        assert_eq!(lines[1], "Model for spruce SI 6");
        assert!(lines[2].starts_with("Intercept\t2.0"));
        assert!(lines[3].starts_with("h95_first\t"));
        assert_eq!(lines[3].split('\t').count(), 5);
        assert!(lines[3].ends_with("< 0.001"));
        assert!(lines[4].starts_with("Residual standard error (log scale): 0.05"));
        let csv = fit_report_csv(&fit);
        assert_eq!(csv.lines().count(), 3);
    }
}
