//! Comparison selectors: hold-out validation and hindsight (oracle) choice.

use alloc::vec::Vec;

use crate::basealg::{discounted_target, BaseAlgorithm, DiscountedFqi, QSequence};
use crate::dataset::{split, split_flat, OfflineDataset, Transition};
use crate::error::{Error, Result};
use crate::funcclass::{empirical_sq_loss, NestedSequence, Sample};
use crate::mdp::TabularMdp;
use crate::modbe::validation_loss;

/// Outcome of a selector that scores every class.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Zero-based index of the chosen class.
    pub selected: usize,
    pub functions: QSequence,
    /// Score per class; lower is better.
    pub scores: Vec<f64>,
}

/// Index of the smallest value, first one on ties. NaN never wins.
pub fn argmin_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn pick(fits: Vec<QSequence>, scores: Vec<f64>) -> Result<Selection> {
    let selected = argmin_first(&scores).ok_or(Error::param("classes", "no class produced a finite score"))?;
    let functions = fits.into_iter().nth(selected).expect("index from scores");
    Ok(Selection {
        selected,
        functions,
        scores,
    })
}

/// Trains on the training split for every class and picks the class with the
/// smallest summed validation loss `sum_h L(f_h, f_{h+1})`.
pub fn holdout_select(dataset: &OfflineDataset, base: &dyn BaseAlgorithm, classes: &NestedSequence, delta: f64, seed: u64) -> Result<Selection> {
    let data = split(dataset, seed)?;
    let cap = dataset.horizon() as f64;
    let mut fits = Vec::with_capacity(classes.len());
    let mut scores = Vec::with_capacity(classes.len());
    for (k, class) in classes.classes().iter().enumerate() {
        let f = base.train(&data.train, class, k, delta)?;
        let mut total = 0.0;
        for h in 0..dataset.horizon() {
            total += validation_loss(f.get(h), f.next(h), data.valid.slot(h), cap)?;
        }
        scores.push(total);
        fits.push(f);
    }
    pick(fits, scores)
}

/// Discounted hold-out: `argmin_k L(f^k, f^k)` on the validation split.
pub fn holdout_select_discounted(data: &[Transition], base: &DiscountedFqi, classes: &NestedSequence, seed: u64) -> Result<Selection> {
    let (train, valid) = split_flat(data, seed)?;
    let cap = base.value_cap();
    let mut fits = Vec::with_capacity(classes.len());
    let mut scores = Vec::with_capacity(classes.len());
    for (k, class) in classes.classes().iter().enumerate() {
        let f = base.train(&train, class)?;
        let samples: Vec<Sample> = valid
            .iter()
            .map(|t| Sample {
                state: t.state,
                action: t.action,
                target: discounted_target(t, Some(&f), base.gamma, cap),
            })
            .collect();
        scores.push(empirical_sq_loss(&f, &samples)?);
        fits.push(QSequence::new(alloc::vec![f], k, "fqi-discounted"));
    }
    pick(fits, scores)
}

/// Trains on the full dataset for every class and picks the smallest true
/// regret of the greedy policy.
pub fn oracle_select(dataset: &OfflineDataset, base: &dyn BaseAlgorithm, classes: &NestedSequence, mdp: &TabularMdp, delta: f64) -> Result<Selection> {
    let mut fits = Vec::with_capacity(classes.len());
    let mut scores = Vec::with_capacity(classes.len());
    for (k, class) in classes.classes().iter().enumerate() {
        let f = base.train(dataset, class, k, delta)?;
        scores.push(mdp.regret(&f.greedy_policy()?)?);
        fits.push(f);
    }
    pick(fits, scores)
}
