use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fitting::ols::{design_columns, fit_columns, response, FitSummary, StepAction, TraceStep};
use crate::fitting::TrainingSet;
use crate::models::Link;
use crate::predictors::{H95, H95_SQUARED};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepwiseOptions {
    /// Offer squares of selected predictors as candidates.
    pub squares: bool,
    /// Offer pairwise products of selected predictors as candidates.
    pub interactions: bool,
    pub p_threshold: f64,
    pub aic_tolerance: f64,
}

impl Default for StepwiseOptions {
    fn default() -> Self {
        Self {
            squares: false,
            interactions: false,
            p_threshold: 0.05,
            aic_tolerance: 1e-9,
        }
    }
}

const MAX_STEPS: usize = 1000;

/// Forward/backward AIC selection from `{h95_first}` followed by p-value pruning.
pub fn stepwise_select(data: &TrainingSet, candidates: &[String], link: Link) -> Result<FitSummary> {
    stepwise_select_with(data, candidates, link, &StepwiseOptions::default())
}

#[derive(Clone, Copy)]
enum Move<'a> {
    Add(&'a str),
    Drop(usize),
}

struct Columns<'d> {
    data: &'d TrainingSet,
    cache: HashMap<String, Vec<f64>>,
}

impl<'d> Columns<'d> {
    fn ensure(&mut self, name: &str) -> Result<()> {
        if !self.cache.contains_key(name) {
            let col = design_columns(self.data, &[name.to_string()])?.pop().expect("one column");
            self.cache.insert(name.to_string(), col);
        }
        Ok(())
    }

    fn refs(&self, names: &[String]) -> Vec<&[f64]> {
        names.iter().map(|n| self.cache[n].as_slice()).collect()
    }
}

fn is_plain(name: &str) -> bool {
    !name.contains(':') && !name.ends_with("^2") && name != H95_SQUARED
}

fn square_name(base: &str) -> String {
    if base == H95 {
        H95_SQUARED.to_string()
    } else {
        format!("{base}^2")
    }
}

fn pool(candidates: &[String], current: &[String], opts: &StepwiseOptions) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |name: String| {
        if !current.contains(&name) && !out.contains(&name) {
            out.push(name);
        }
    };
    for c in candidates {
        push(c.clone());
    }
    let bases: Vec<&String> = current.iter().filter(|n| is_plain(n)).collect();
    if opts.squares {
        for b in &bases {
            push(square_name(b));
        }
    }
    if opts.interactions {
        for (i, a) in bases.iter().enumerate() {
            for b in &bases[i + 1..] {
                push(format!("{a}:{b}"));
            }
        }
    }
    out
}

pub fn stepwise_select_with(
    data: &TrainingSet,
    candidates: &[String],
    link: Link,
    opts: &StepwiseOptions,
) -> Result<FitSummary> {
    if !candidates.iter().any(|c| c == H95) {
        return Err(Error::Argument(format!("stepwise candidates must include {H95}")));
    }
    let y = response(data, link)?;
    let mut cols = Columns {
        data,
        cache: HashMap::new(),
    };
    let fit = |cols: &Columns, names: &[String]| fit_columns(data, names, &cols.refs(names), &y, link);

    let mut current = vec![H95.to_string()];
    cols.ensure(H95)?;
    let mut best = fit(&cols, &current)?;
    let mut trace = vec![TraceStep {
        step: 0,
        action: StepAction::Start,
        name: H95.to_string(),
        aic: best.aic,
    }];
    let mut blocked = 0;

    for step in 1..=MAX_STEPS {
        let adds = pool(candidates, &current, opts);
        for a in &adds {
            cols.ensure(a)?;
        }
        let mut moves: Vec<Move> = adds.iter().map(|a| Move::Add(a)).collect();
        moves.extend((0..current.len()).map(Move::Drop));

        let scored: Vec<Option<FitSummary>> = moves
            .par_iter()
            .map(|m| {
                let names: Vec<String> = match *m {
                    Move::Add(a) => current.iter().cloned().chain([a.to_string()]).collect(),
                    Move::Drop(i) => current.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, n)| n.clone()).collect(),
                };
                match fit(&cols, &names) {
                    Ok(f) => Some(f),
                    Err(Error::Singular { column, .. }) => {
                        log::debug!("skipping singular move on {column}");
                        None
                    }
                    Err(e) => {
                        log::warn!("skipping move: {e}");
                        None
                    }
                }
            })
            .collect();

        // first strictly lowest wins, so ties resolve to pool order
        let mut chosen: Option<(usize, f64)> = None;
        let mut h95_drop_aic = None;
        for (i, (m, f)) in moves.iter().zip(&scored).enumerate() {
            let Some(f) = f else { continue };
            if let Move::Drop(j) = m {
                if current[*j] == H95 {
                    h95_drop_aic = Some(f.aic);
                    continue;
                }
            }
            if chosen.is_none_or(|(_, a)| f.aic < a) {
                chosen = Some((i, f.aic));
            }
        }
        let threshold = best.aic - opts.aic_tolerance;
        if let Some(a) = h95_drop_aic {
            if a < threshold && chosen.is_none_or(|(_, c)| a < c) {
                blocked += 1;
            }
        }
        let Some((i, a)) = chosen.filter(|(_, a)| *a < threshold) else {
            break;
        };
        let (action, name) = match moves[i] {
            Move::Add(n) => {
                current.push(n.to_string());
                (StepAction::Add, n.to_string())
            }
            Move::Drop(j) => (StepAction::Drop, current.remove(j)),
        };
        best = scored[i].clone().expect("chosen move was fitted");
        trace.push(TraceStep { step, action, name, aic: a });
    }

    let mut step = trace.len();
    loop {
        let worst = best
            .terms
            .iter()
            .skip(1)
            .enumerate()
            .filter(|(_, t)| t.p_value >= opts.p_threshold || t.p_value.is_nan())
            .max_by(|a, b| a.1.p_value.total_cmp(&b.1.p_value));
        let Some((j, _)) = worst else { break };
        let name = current.remove(j);
        best = fit(&cols, &current)?;
        trace.push(TraceStep {
            step,
            action: StepAction::Prune,
            name,
            aic: best.aic,
        });
        step += 1;
    }

    best.trace = trace;
    best.protected_h95_blocks = blocked;
    Ok(best)
}
