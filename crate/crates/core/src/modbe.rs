//! Model selection by a one-sided Bellman-error generalization test.
//!
//! The loop keeps a current class index `k`, trains the base algorithm on
//! `F_k`, and for every larger class `F_{k'}` re-fits each step's Bellman
//! targets inside `F_{k'}`. Class `k` is abandoned (and `k` increases by one)
//! as soon as some `g_h` beats `f_h` on validation data by more than
//! `Tol(k, k')`.

use alloc::vec::Vec;

use crate::basealg::{
    bellman_samples, check_delta, discounted_target, omega_from_complexity, BaseAlgorithm, DiscountedFqi,
    QSequence,
};
use crate::dataset::{split, split_flat, OfflineDataset, Transition, MIN_SPLIT_SIZE};
use crate::error::{Error, Result};
use crate::funcclass::{empirical_sq_loss, FunctionClass, NestedSequence, QFunction, Sample};
use crate::mdp::Policy;

/// How `Tol(k, k')` is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleMode {
    /// `2 alpha(k') + 2 zeta + omega(F_k)`.
    Theoretical,
    /// `complexity(F_{k'}) / n`.
    Practical,
    /// The same value for every pair.
    Constant(f64),
}

/// `96 H^2 ln(16 M^2 H / delta) / n_valid`.
pub fn zeta(horizon: usize, num_classes: usize, delta: f64, n_valid: usize) -> Result<f64> {
    check_delta(delta)?;
    if n_valid == 0 {
        return Err(Error::param("n_valid", "must be positive"));
    }
    let (h, m) = (horizon as f64, num_classes as f64);
    Ok(96.0 * h * h * libm::log(16.0 * m * m * h / delta) / n_valid as f64)
}

/// `200 H^2 ln(8 M^2 H |F| / delta) / n_train`, with `ln |F|` given as the
/// class complexity.
pub fn alpha_uniform_term(horizon: usize, num_classes: usize, delta: f64, n_train: usize, complexity: f64) -> Result<f64> {
    check_delta(delta)?;
    if n_train == 0 {
        return Err(Error::param("n_train", "must be positive"));
    }
    let (h, m) = (horizon as f64, num_classes as f64);
    Ok(200.0 * h * h * (libm::log(8.0 * m * m * h / delta) + complexity) / n_train as f64)
}

/// Tolerances for one run, precomputed per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSchedule {
    mode: ScheduleMode,
    zeta: f64,
    alpha: Vec<f64>,
    omega: Vec<f64>,
    practical: Vec<f64>,
}

impl ToleranceSchedule {
    /// `omega[k]` must be the base algorithm's `omega_{n_train, delta/4M}(F_k)`;
    /// it is only read in theoretical mode.
    pub fn new(
        mode: ScheduleMode,
        classes: &NestedSequence,
        omega: Vec<f64>,
        delta: f64,
        horizon: usize,
        n: usize,
        n_train: usize,
        n_valid: usize,
    ) -> Result<Self> {
        check_delta(delta)?;
        let m = classes.len();
        if omega.len() != m {
            return Err(Error::DimensionMismatch {
                what: "omega values",
                expected: m,
                got: omega.len(),
            });
        }
        let practical = classes.classes().iter().map(|c| c.complexity() / n as f64).collect();
        let (zeta_value, alpha) = match mode {
            ScheduleMode::Theoretical => {
                let z = zeta(horizon, m, delta, n_valid)?;
                let a = classes
                    .classes()
                    .iter()
                    .zip(&omega)
                    .map(|(c, &w)| Ok(w.max(alpha_uniform_term(horizon, m, delta, n_train, c.complexity())?)))
                    .collect::<Result<Vec<_>>>()?;
                (z, a)
            }
            ScheduleMode::Practical | ScheduleMode::Constant(_) => (0.0, alloc::vec![0.0; m]),
        };
        if let ScheduleMode::Constant(v) = mode {
            if v.is_nan() || v < 0.0 {
                return Err(Error::param("tolerance", "constant tolerance must be non-negative"));
            }
        }
        Ok(ToleranceSchedule {
            mode,
            zeta: zeta_value,
            alpha,
            omega,
            practical,
        })
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn alpha(&self, k_prime: usize) -> f64 {
        self.alpha[k_prime]
    }

    pub fn omega(&self, k: usize) -> f64 {
        self.omega[k]
    }

    pub fn tol(&self, k: usize, k_prime: usize) -> f64 {
        match self.mode {
            ScheduleMode::Theoretical => 2.0 * self.alpha[k_prime] + 2.0 * self.zeta + self.omega[k],
            ScheduleMode::Practical => self.practical[k_prime],
            ScheduleMode::Constant(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestOutcome {
    Keep,
    Reject,
}

impl TestOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            TestOutcome::Keep => "keep",
            TestOutcome::Reject => "reject",
        }
    }
}

/// Rejects iff `loss_g < loss_f - tol`.
pub fn generalization_test(loss_g: f64, loss_f: f64, tol: f64) -> TestOutcome {
    if loss_g < loss_f - tol {
        TestOutcome::Reject
    } else {
        TestOutcome::Keep
    }
}

/// `argmin_{g in class} sum (g(x, a) - r - f_next(x'))^2` over one slot.
pub fn regress_to_targets(class: &FunctionClass, slot: &[Transition], f_next: Option<&QFunction>, cap: f64) -> Result<QFunction> {
    class.erm(&bellman_samples(slot, f_next, cap))
}

/// `(1/n) sum (f(x, a) - r - f_next(x'))^2` over one validation slot.
pub fn validation_loss(f: &QFunction, f_next: Option<&QFunction>, slot: &[Transition], cap: f64) -> Result<f64> {
    empirical_sq_loss(f, &bellman_samples(slot, f_next, cap))
}

/// One comparison `(k, k', h)`; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestEvent {
    pub k: usize,
    pub k_prime: usize,
    pub step: usize,
    pub loss_g: f64,
    pub loss_f: f64,
    pub tol: f64,
    pub outcome: TestOutcome,
}

/// Audit record of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    /// Zero-based index of the returned class.
    pub selected: usize,
    pub functions: QSequence,
    pub events: Vec<TestEvent>,
    /// Class indices at which the loop body ran, in order.
    pub visited: Vec<usize>,
    /// Whether the base algorithm was re-run on the last class after every
    /// smaller one was rejected.
    pub final_rerun: bool,
    pub erm_calls: usize,
    pub base_calls: usize,
    pub num_classes: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub seed: u64,
}

impl SelectionTrace {
    pub fn policy(&self) -> Result<Policy> {
        self.functions.greedy_policy()
    }

    pub fn rejections(&self) -> usize {
        self.events.iter().filter(|e| e.outcome == TestOutcome::Reject).count()
    }
}

fn check_inputs(num_classes: usize, n: usize, delta: f64) -> Result<()> {
    if num_classes == 0 {
        return Err(Error::param("classes", "at least one class is required"));
    }
    if n < MIN_SPLIT_SIZE {
        return Err(Error::DatasetTooSmall(n));
    }
    check_delta(delta)
}

/// Runs the selection loop on `dataset` with the given base algorithm.
pub fn modbe(
    dataset: &OfflineDataset,
    base: &dyn BaseAlgorithm,
    classes: &NestedSequence,
    delta: f64,
    mode: ScheduleMode,
    seed: u64,
) -> Result<SelectionTrace> {
    let m = classes.len();
    check_inputs(m, dataset.n(), delta)?;
    let horizon = dataset.horizon();
    let cap = horizon as f64;
    let data = split(dataset, seed)?;
    let (n_train, n_valid) = (data.train.n(), data.valid.n());
    let delta_base = delta / (4.0 * m as f64);
    let omega = match mode {
        ScheduleMode::Theoretical => classes
            .classes()
            .iter()
            .map(|c| base.omega(n_train, delta_base, c, horizon))
            .collect::<Result<Vec<_>>>()?,
        _ => alloc::vec![0.0; m],
    };
    let schedule = ToleranceSchedule::new(mode, classes, omega, delta, horizon, dataset.n(), n_train, n_valid)?;

    let mut events = Vec::new();
    let mut visited = Vec::new();
    let (mut erm_calls, mut base_calls) = (0, 0);
    let mut k = 0;
    while k + 1 < m {
        visited.push(k);
        let f = base.train(&data.train, classes.get(k), k, delta_base)?;
        base_calls += 1;
        let loss_f = (0..horizon)
            .map(|h| validation_loss(f.get(h), f.next(h), data.valid.slot(h), cap))
            .collect::<Result<Vec<_>>>()?;
        let mut rejected = false;
        for kp in k + 1..m {
            let tol = schedule.tol(k, kp);
            for h in 0..horizon {
                let g = regress_to_targets(classes.get(kp), data.train.slot(h), f.next(h), cap)?;
                erm_calls += 1;
                let loss_g = validation_loss(&g, f.next(h), data.valid.slot(h), cap)?;
                let outcome = generalization_test(loss_g, loss_f[h], tol);
                rejected |= outcome == TestOutcome::Reject;
                events.push(TestEvent {
                    k,
                    k_prime: kp,
                    step: h,
                    loss_g,
                    loss_f: loss_f[h],
                    tol,
                    outcome,
                });
            }
            if rejected {
                break;
            }
        }
        if !rejected {
            return Ok(SelectionTrace {
                selected: k,
                functions: f,
                events,
                visited,
                final_rerun: false,
                erm_calls,
                base_calls,
                num_classes: m,
                n_train,
                n_valid,
                seed,
            });
        }
        k += 1;
    }
    let f = base.train(&data.train, classes.get(k), k, delta_base)?;
    base_calls += 1;
    Ok(SelectionTrace {
        selected: k,
        functions: f,
        events,
        visited,
        final_rerun: true,
        erm_calls,
        base_calls,
        num_classes: m,
        n_train,
        n_valid,
        seed,
    })
}

fn discounted_samples(data: &[Transition], f: &QFunction, gamma: f64, cap: f64) -> Vec<Sample> {
    data.iter()
        .map(|t| Sample {
            state: t.state,
            action: t.action,
            target: discounted_target(t, Some(f), gamma, cap),
        })
        .collect()
}

/// Effective horizon `ceil(1 / (1 - gamma))` used by the theoretical
/// schedule in the discounted setting.
pub fn effective_horizon(gamma: f64) -> usize {
    libm::ceil(1.0 / (1.0 - gamma)) as usize
}

/// Discounted variant on a flat transition list: each larger class's
/// re-regression `g^{k'}` is compared with the same-class re-regression `g^k`.
pub fn modbe_discounted(
    data: &[Transition],
    base: &DiscountedFqi,
    classes: &NestedSequence,
    delta: f64,
    mode: ScheduleMode,
    seed: u64,
) -> Result<SelectionTrace> {
    let m = classes.len();
    check_inputs(m, data.len(), delta)?;
    if !(0.0..1.0).contains(&base.gamma) {
        return Err(Error::param("gamma", "discount must lie in [0, 1)"));
    }
    let (gamma, cap) = (base.gamma, base.value_cap());
    let (train, valid) = split_flat(data, seed)?;
    let (n_train, n_valid) = (train.len(), valid.len());
    let horizon = effective_horizon(gamma);
    let delta_base = delta / (4.0 * m as f64);
    let omega = match mode {
        ScheduleMode::Theoretical => classes
            .classes()
            .iter()
            .map(|c| omega_from_complexity(n_train, delta_base, horizon, c.complexity()))
            .collect::<Result<Vec<_>>>()?,
        _ => alloc::vec![0.0; m],
    };
    let schedule = ToleranceSchedule::new(mode, classes, omega, delta, horizon, data.len(), n_train, n_valid)?;
    let wrap = |f: QFunction, k: usize| QSequence::new(alloc::vec![f], k, "fqi-discounted");

    let mut events = Vec::new();
    let mut visited = Vec::new();
    let (mut erm_calls, mut base_calls) = (0, 0);
    let mut k = 0;
    while k + 1 < m {
        visited.push(k);
        let f = base.train(&train, classes.get(k))?;
        base_calls += 1;
        let train_samples = discounted_samples(&train, &f, gamma, cap);
        let valid_samples = discounted_samples(&valid, &f, gamma, cap);
        let g_k = classes.get(k).erm(&train_samples)?;
        erm_calls += 1;
        let loss_ref = empirical_sq_loss(&g_k, &valid_samples)?;
        let mut rejected = false;
        for kp in k + 1..m {
            let g = classes.get(kp).erm(&train_samples)?;
            erm_calls += 1;
            let loss_g = empirical_sq_loss(&g, &valid_samples)?;
            let tol = schedule.tol(k, kp);
            let outcome = generalization_test(loss_g, loss_ref, tol);
            events.push(TestEvent {
                k,
                k_prime: kp,
                step: 0,
                loss_g,
                loss_f: loss_ref,
                tol,
                outcome,
            });
            if outcome == TestOutcome::Reject {
                rejected = true;
                break;
            }
        }
        if !rejected {
            return Ok(SelectionTrace {
                selected: k,
                functions: wrap(f, k),
                events,
                visited,
                final_rerun: false,
                erm_calls,
                base_calls,
                num_classes: m,
                n_train,
                n_valid,
                seed,
            });
        }
        k += 1;
    }
    let f = base.train(&train, classes.get(k))?;
    base_calls += 1;
    Ok(SelectionTrace {
        selected: k,
        functions: wrap(f, k),
        events,
        visited,
        final_rerun: true,
        erm_calls,
        base_calls,
        num_classes: m,
        n_train,
        n_valid,
        seed,
    })
}
