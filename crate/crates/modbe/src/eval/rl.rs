//! Tabular sweeps: every method on every `(n, seed)` cell, regret by exact DP.

use std::time::Instant;

use modbe_core::baselines::{holdout_select, oracle_select};
use modbe_core::{fqi, generate_from_mu, modbe, Fqi, OfflineDataset, QSequence};
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::instances::RlInstance;
use super::results::{sort_rows, ResultRow};
use super::{thread_pool, EvalError};

/// Runs one method on one dataset; returns the chosen class and its fit.
pub fn run_method(
    method: Method,
    data: &OfflineDataset,
    instance: &RlInstance,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(usize, QSequence), EvalError> {
    let classes = &instance.classes;
    Ok(match method {
        Method::Modbe => {
            let trace = modbe(data, &Fqi, classes, config.delta, config.schedule, seed)?;
            (trace.selected, trace.functions)
        }
        Method::Holdout => {
            let sel = holdout_select(data, &Fqi, classes, config.delta, seed)?;
            (sel.selected, sel.functions)
        }
        Method::Oracle => {
            let sel = oracle_select(data, &Fqi, classes, &instance.mdp, config.delta)?;
            (sel.selected, sel.functions)
        }
        Method::Fixed(k) => (k, fqi(data, classes.get(k))?),
    })
}

/// All rows of a tabular sweep, sorted by `(n, seed, method)`. The output does
/// not depend on `jobs` unless `config.timing` is set.
pub fn run_rl_experiment(config: &ExperimentConfig, instance: &RlInstance, jobs: usize) -> Result<Vec<ResultRow>, EvalError> {
    let methods = config.expand_methods(instance.classes.len()).map_err(EvalError::Config)?;
    let mu = match config.mu {
        Some(spec) => spec.distribution(&instance.mdp)?,
        None => instance.mu.clone(),
    };
    let max_n = config.n_list.iter().copied().max().unwrap_or(0);
    let cells: Vec<(usize, u64)> = config
        .n_list
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let pool = thread_pool(jobs)?;
    let nested: Vec<Vec<ResultRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, seed)| {
                // Sample i of a step depends only on (seed, h, i), so a prefix
                // of the largest dataset is the dataset of size n.
                let full = generate_from_mu(&instance.mdp, &mu, max_n, seed)?;
                let data = full.truncated(n)?;
                methods
                    .iter()
                    .map(|&method| {
                        let start = Instant::now();
                        let (selected, functions) = run_method(method, &data, instance, config, seed)?;
                        let regret = instance.mdp.regret(&functions.greedy_policy()?)?;
                        let runtime_ms = if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
                        Ok(ResultRow {
                            n,
                            seed,
                            method,
                            selected,
                            regret,
                            runtime_ms,
                        })
                    })
                    .collect::<Result<Vec<_>, EvalError>>()
            })
            .collect::<Result<Vec<_>, EvalError>>()
    })?;
    let mut rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}
