//! Base offline RL algorithms.
//!
//! A base algorithm maps `(training data, class, delta)` to a sequence
//! `f_1..f_H` of class members with `f_{H+1} = 0`, and publishes an
//! estimation-error function `omega_{n, delta}(F)` that is non-decreasing
//! along a nested sequence.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{OfflineDataset, Transition};
use crate::error::{Error, Result};
use crate::funcclass::{FunctionClass, QFunction, Sample};
use crate::mdp::{DataDistribution, Policy, QTable, TabularMdp};

/// `f_1, ..., f_H` with implicit `f_{H+1} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QSequence {
    functions: Vec<QFunction>,
    class_index: usize,
    algorithm: &'static str,
}

impl QSequence {
    pub fn new(functions: Vec<QFunction>, class_index: usize, algorithm: &'static str) -> Self {
        QSequence {
            functions,
            class_index,
            algorithm,
        }
    }

    pub fn horizon(&self) -> usize {
        self.functions.len()
    }

    pub fn get(&self, h: usize) -> &QFunction {
        &self.functions[h]
    }

    /// `f_{h+1}`, or `None` past the last step.
    pub fn next(&self, h: usize) -> Option<&QFunction> {
        self.functions.get(h + 1)
    }

    pub fn functions(&self) -> &[QFunction] {
        &self.functions
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn algorithm(&self) -> &'static str {
        self.algorithm
    }

    /// Clipped tables, one per step.
    pub fn to_tables(&self) -> Vec<QTable> {
        self.functions.iter().map(QFunction::to_table).collect()
    }

    /// `pi_h(x) = argmax_a f_h(x, a)`, lowest action on ties.
    pub fn greedy_policy(&self) -> Result<Policy> {
        let first = self.functions.first().ok_or(Error::EmptySamples)?;
        let (s, na) = (first.num_states(), first.num_actions());
        let mut actions = Vec::with_capacity(s * self.horizon());
        for f in &self.functions {
            actions.extend((0..s).map(|x| f.greedy_action(x)));
        }
        Policy::deterministic(s, na, self.horizon(), &actions)
    }
}

/// `max_a f(x', a)` clipped to `[0, cap]`, zero past the horizon.
#[inline]
pub(crate) fn next_value(f_next: Option<&QFunction>, x: usize, cap: f64) -> f64 {
    match f_next {
        Some(f) => f.max_value(x).clamp(0.0, cap),
        None => 0.0,
    }
}

/// Regression samples `((x, a), r + max_a' f_next(x', a'))` for one slot.
pub(crate) fn bellman_samples(slot: &[Transition], f_next: Option<&QFunction>, cap: f64) -> Vec<Sample> {
    slot.iter()
        .map(|t| Sample {
            state: t.state,
            action: t.action,
            target: t.reward + next_value(f_next, t.next_state, cap),
        })
        .collect()
}

/// The base-algorithm contract.
pub trait BaseAlgorithm {
    fn id(&self) -> &'static str;

    /// Runs on `train` with class `class` (index `class_index` in the
    /// sequence, recorded on the output).
    fn train(&self, train: &OfflineDataset, class: &FunctionClass, class_index: usize, delta: f64) -> Result<QSequence>;

    /// `omega_{n, delta}(class)` for a horizon-`horizon` problem.
    fn omega(&self, n: usize, delta: f64, class: &FunctionClass, horizon: usize) -> Result<f64>;
}

/// Fitted Q-Iteration: one backward pass of regressions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fqi;

impl BaseAlgorithm for Fqi {
    fn id(&self) -> &'static str {
        "fqi"
    }

    fn train(&self, train: &OfflineDataset, class: &FunctionClass, class_index: usize, _delta: f64) -> Result<QSequence> {
        let mut seq = fqi(train, class)?;
        seq.class_index = class_index;
        Ok(seq)
    }

    fn omega(&self, n: usize, delta: f64, class: &FunctionClass, horizon: usize) -> Result<f64> {
        omega_fqi(n, delta, horizon, class)
    }
}

/// `f_h = argmin_{f in F} (1/n) sum (f(x, a) - r - f_{h+1}(x'))^2` for
/// `h = H..1`, with `f_{h+1}` clipped to `[0, H]` inside the targets.
pub fn fqi(train: &OfflineDataset, class: &FunctionClass) -> Result<QSequence> {
    let horizon = train.horizon();
    let cap = horizon as f64;
    let mut functions: Vec<QFunction> = Vec::with_capacity(horizon);
    for h in (0..horizon).rev() {
        let samples = bellman_samples(train.slot(h), functions.last(), cap);
        functions.push(class.erm(&samples)?);
    }
    functions.reverse();
    Ok(QSequence::new(functions, 0, "fqi"))
}

/// FQI with exact expectations: at each step, minimizes
/// `||f - T*_h f_{h+1}||^2_{mu_h}` over the class.
///
/// Supported for finite and abstraction classes, and for linear classes
/// (weighted least squares with the class ridge applied at unit scale).
pub fn fqi_oracle(mdp: &TabularMdp, mu: &DataDistribution, class: &FunctionClass) -> Result<QSequence> {
    mdp.check_distribution_shape(mu)?;
    if class.num_states() != mdp.num_states() || class.num_actions() != mdp.num_actions() {
        return Err(Error::DimensionMismatch {
            what: "class domain",
            expected: mdp.num_states() * mdp.num_actions(),
            got: class.num_states() * class.num_actions(),
        });
    }
    let (s, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let cap = horizon as f64;
    let lambda = match class.kind() {
        crate::funcclass::ClassKind::Linear { ridge, .. } => ridge.lambda(1),
        _ => 0.0,
    };
    let mut functions: Vec<QFunction> = Vec::with_capacity(horizon);
    for h in (0..horizon).rev() {
        let next: Vec<f64> = (0..s).map(|x| next_value(functions.last(), x, cap)).collect();
        let target = mdp.backup_values(h, &next)?;
        let samples: Vec<Sample> = (0..s * na)
            .map(|i| Sample {
                state: i / na,
                action: i % na,
                target: target.values()[i],
            })
            .collect();
        functions.push(class.weighted_fit(&samples, mu.step(h), lambda)?);
    }
    functions.reverse();
    Ok(QSequence::new(functions, 0, "fqi-oracle"))
}

/// FQI in infinite-data mode, usable wherever a [`BaseAlgorithm`] is expected.
/// The training data is ignored.
#[derive(Debug, Clone, Copy)]
pub struct FqiOracle<'a> {
    pub mdp: &'a TabularMdp,
    pub mu: &'a DataDistribution,
}

impl BaseAlgorithm for FqiOracle<'_> {
    fn id(&self) -> &'static str {
        "fqi-oracle"
    }

    fn train(&self, _train: &OfflineDataset, class: &FunctionClass, class_index: usize, _delta: f64) -> Result<QSequence> {
        let mut seq = fqi_oracle(self.mdp, self.mu, class)?;
        seq.class_index = class_index;
        Ok(seq)
    }

    fn omega(&self, _n: usize, _delta: f64, _class: &FunctionClass, _horizon: usize) -> Result<f64> {
        Ok(0.0)
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 / core::f64::consts::E {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

/// `omega_{n, delta}(F) = 200 H^2 ln(16 H |F| / delta) / n` with `ln |F|`
/// replaced by the class complexity (the dimension for linear classes).
pub fn omega_fqi(n: usize, delta: f64, horizon: usize, class: &FunctionClass) -> Result<f64> {
    omega_from_complexity(n, delta, horizon, class.complexity())
}

pub(crate) fn omega_from_complexity(n: usize, delta: f64, horizon: usize, complexity: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let h = horizon as f64;
    Ok(200.0 * h * h * (complexity + libm::log(16.0 * h / delta)) / n as f64)
}

/// Fitted Q-iteration for the discounted setting on a flat transition list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedFqi {
    pub gamma: f64,
    pub iterations: usize,
}

impl DiscountedFqi {
    pub fn train(&self, data: &[Transition], class: &FunctionClass) -> Result<QFunction> {
        fitted_q_discounted(data, class, self.gamma, self.iterations)
    }

    /// Upper end of the value range, `1 / (1 - gamma)`.
    pub fn value_cap(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }
}

/// Iterates `f <- erm(F, r + gamma max_a' f(x', a'))` from `f = 0`, with `f`
/// clipped to `[0, 1/(1-gamma)]` inside the targets.
pub fn fitted_q_discounted(data: &[Transition], class: &FunctionClass, gamma: f64, iterations: usize) -> Result<QFunction> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param("gamma", "discount must lie in [0, 1)"));
    }
    if iterations == 0 {
        return Err(Error::param("iterations", "at least one iteration is required"));
    }
    if data.is_empty() {
        return Err(Error::EmptySamples);
    }
    let cap = 1.0 / (1.0 - gamma);
    let mut f: Option<QFunction> = None;
    let mut samples = vec![
        Sample {
            state: 0,
            action: 0,
            target: 0.0
        };
        data.len()
    ];
    for _ in 0..iterations {
        for (s, t) in samples.iter_mut().zip(data) {
            *s = Sample {
                state: t.state,
                action: t.action,
                target: discounted_target(t, f.as_ref(), gamma, cap),
            };
        }
        f = Some(class.erm(&samples)?);
    }
    Ok(f.expect("at least one iteration"))
}

/// `r + gamma * clip(max_a f(x', a))`; the bootstrap is skipped when `gamma = 0`.
#[inline]
pub(crate) fn discounted_target(t: &Transition, f: Option<&QFunction>, gamma: f64, cap: f64) -> f64 {
    if gamma == 0.0 {
        t.reward
    } else {
        t.reward + gamma * next_value(f, t.next_state, cap)
    }
}
