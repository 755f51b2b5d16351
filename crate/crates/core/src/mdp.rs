//! Finite-horizon tabular MDPs and exact dynamic-programming oracles.
//!
//! Transitions may differ per step; rewards are a deterministic function of
//! `(state, action)` with values in `[0, 1]`. Steps are indexed `0..horizon`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::{DERIVED_TOL, PROB_TOL};

/// A real-valued table over `(state, action)`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::constant(num_states, num_actions, 0.0)
    }

    pub fn constant(num_states: usize, num_actions: usize, value: f64) -> Self {
        QTable {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::DimensionMismatch {
                what: "q-table",
                expected: num_states * num_actions,
                got: values.len(),
            });
        }
        Ok(QTable {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn from_fn(num_states: usize, num_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for x in 0..num_states {
            for a in 0..num_actions {
                values.push(f(x, a));
            }
        }
        QTable {
            num_states,
            num_actions,
            values,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Panics when `(x, a)` is out of range.
    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        assert!(a < self.num_actions);
        self.values[x * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, value: f64) {
        assert!(a < self.num_actions);
        self.values[x * self.num_actions + a] = value;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.values[x * self.num_actions..(x + 1) * self.num_actions]
    }

    /// `max_a q(x, a)`.
    pub fn max_value(&self, x: usize) -> f64 {
        self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action at `x`; ties go to the lowest action index.
    pub fn greedy_action(&self, x: usize) -> usize {
        argmax_first(self.row(x))
    }

    /// Per-state maxima, i.e. the state-value function induced by the table.
    pub fn state_values(&self) -> Vec<f64> {
        (0..self.num_states).map(|x| self.max_value(x)).collect()
    }

    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn same_shape(&self, num_states: usize, num_actions: usize, what: &'static str) -> Result<()> {
        if self.num_states != num_states {
            return Err(Error::DimensionMismatch {
                what,
                expected: num_states,
                got: self.num_states,
            });
        }
        if self.num_actions != num_actions {
            return Err(Error::DimensionMismatch {
                what,
                expected: num_actions,
                got: self.num_actions,
            });
        }
        Ok(())
    }
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A per-step table over `(state, action)` indexed `[h][x][a]`.
#[derive(Debug, Clone, PartialEq)]
struct StepTable {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl StepTable {
    fn index(&self, h: usize, x: usize, a: usize) -> usize {
        (h * self.num_states + x) * self.num_actions + a
    }

    fn step(&self, h: usize) -> &[f64] {
        let len = self.num_states * self.num_actions;
        &self.values[h * len..(h + 1) * len]
    }
}

/// A possibly stochastic Markov policy `pi_h(a | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    table: StepTable,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = num_states * num_actions * horizon;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "policy",
                expected,
                got: probs.len(),
            });
        }
        for (row, chunk) in probs.chunks(num_actions.max(1)).enumerate() {
            check_distribution(chunk, "policy row", row, PROB_TOL)?;
        }
        Ok(Policy {
            table: StepTable {
                num_states,
                num_actions,
                horizon,
                values: probs,
            },
        })
    }

    /// A deterministic policy from `actions[h * num_states + x]`.
    pub fn deterministic(num_states: usize, num_actions: usize, horizon: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != num_states * horizon {
            return Err(Error::DimensionMismatch {
                what: "deterministic policy",
                expected: num_states * horizon,
                got: actions.len(),
            });
        }
        let mut probs = vec![0.0; num_states * num_actions * horizon];
        for (i, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::OutOfDomain {
                    state: i % num_states.max(1),
                    action: a,
                });
            }
            probs[i * num_actions + a] = 1.0;
        }
        Policy::new(num_states, num_actions, horizon, probs)
    }

    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Policy {
            table: StepTable {
                num_states,
                num_actions,
                horizon,
                values: vec![p; num_states * num_actions * horizon],
            },
        }
    }

    /// `(1 - eps) * self + eps * uniform`.
    pub fn mix_uniform(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::param("eps", "mixing weight must lie in [0, 1]"));
        }
        let u = 1.0 / self.num_actions() as f64;
        let values = self.table.values.iter().map(|&p| (1.0 - eps) * p + eps * u).collect();
        Ok(Policy {
            table: StepTable {
                values,
                ..self.table.clone()
            },
        })
    }

    pub fn num_states(&self) -> usize {
        self.table.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.table.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon
    }

    pub fn prob(&self, h: usize, x: usize, a: usize) -> f64 {
        self.table.values[self.table.index(h, x, a)]
    }

    pub fn probs(&self, h: usize, x: usize) -> &[f64] {
        let i = self.table.index(h, x, 0);
        &self.table.values[i..i + self.table.num_actions]
    }

    /// Highest-probability action, lowest index on ties.
    pub fn action(&self, h: usize, x: usize) -> usize {
        argmax_first(self.probs(h, x))
    }
}

/// Per-step state-action densities `P^pi_h(x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    table: StepTable,
}

impl OccupancyMeasure {
    pub fn get(&self, h: usize, x: usize, a: usize) -> f64 {
        self.table.values[self.table.index(h, x, a)]
    }

    /// Row-major `[x][a]` densities at step `h`.
    pub fn step(&self, h: usize) -> &[f64] {
        self.table.step(h)
    }

    pub fn state_marginal(&self, h: usize, x: usize) -> f64 {
        (0..self.table.num_actions).map(|a| self.get(h, x, a)).sum()
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon
    }

    /// Reinterprets the occupancy as a data distribution.
    pub fn to_distribution(&self) -> Result<DataDistribution> {
        DataDistribution::new(
            self.table.num_states,
            self.table.num_actions,
            self.table.horizon,
            self.table.values.clone(),
        )
    }
}

/// Per-step sampling distribution `mu_h` over `(state, action)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataDistribution {
    table: StepTable,
}

impl DataDistribution {
    /// Validates each step to sum to one within [`PROB_TOL`] (derived
    /// occupancies are accepted within [`DERIVED_TOL`]).
    pub fn new(num_states: usize, num_actions: usize, horizon: usize, values: Vec<f64>) -> Result<Self> {
        let len = num_states * num_actions;
        if values.len() != len * horizon {
            return Err(Error::DimensionMismatch {
                what: "data distribution",
                expected: len * horizon,
                got: values.len(),
            });
        }
        for (h, chunk) in values.chunks(len.max(1)).enumerate() {
            check_distribution(chunk, "data distribution step", h, DERIVED_TOL)?;
        }
        Ok(DataDistribution {
            table: StepTable {
                num_states,
                num_actions,
                horizon,
                values,
            },
        })
    }

    /// Uniform over all `(x, a)` at every step.
    pub fn uniform(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let p = 1.0 / (num_states * num_actions) as f64;
        DataDistribution {
            table: StepTable {
                num_states,
                num_actions,
                horizon,
                values: vec![p; num_states * num_actions * horizon],
            },
        }
    }

    pub fn get(&self, h: usize, x: usize, a: usize) -> f64 {
        self.table.values[self.table.index(h, x, a)]
    }

    /// Row-major `[x][a]` masses at step `h`.
    pub fn step(&self, h: usize) -> &[f64] {
        self.table.step(h)
    }

    pub fn num_states(&self) -> usize {
        self.table.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.table.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon
    }

    /// `||f - g||^2_{mu_h}`.
    pub fn sq_distance(&self, h: usize, f: &QTable, g: &QTable) -> f64 {
        self.step(h)
            .iter()
            .zip(f.values().iter().zip(g.values()))
            .map(|(w, (a, b))| w * (a - b) * (a - b))
            .sum()
    }
}

fn check_distribution(values: &[f64], what: &'static str, index: usize, tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for &p in values {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::NotDistribution { what, index, sum: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::NotDistribution { what, index, sum });
    }
    Ok(())
}

/// An immutable finite-horizon tabular MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    /// `[h][x][a][x']`
    transitions: Vec<f64>,
    /// `[x][a]`
    rewards: Vec<f64>,
    initial: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP.
    ///
    /// `transitions` is laid out `[h][x][a][x']` with `horizon` step blocks,
    /// `rewards` is `[x][a]` and `initial` is the start distribution.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::param("mdp dimensions", "S, A and H must all be positive"));
        }
        let sa = num_states * num_actions;
        if transitions.len() != horizon * sa * num_states {
            return Err(Error::DimensionMismatch {
                what: "transitions",
                expected: horizon * sa * num_states,
                got: transitions.len(),
            });
        }
        if rewards.len() != sa {
            return Err(Error::DimensionMismatch {
                what: "rewards",
                expected: sa,
                got: rewards.len(),
            });
        }
        if initial.len() != num_states {
            return Err(Error::DimensionMismatch {
                what: "initial distribution",
                expected: num_states,
                got: initial.len(),
            });
        }
        for (row, chunk) in transitions.chunks(num_states).enumerate() {
            check_distribution(chunk, "transition row", row, PROB_TOL)?;
        }
        check_distribution(&initial, "initial distribution", 0, PROB_TOL)?;
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::RewardOutOfRange {
                    state: i / num_actions,
                    action: i % num_actions,
                    value: r,
                });
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            horizon,
            transitions,
            rewards,
            initial,
        })
    }

    /// Same kernel `[x][a][x']` at every step.
    pub fn stationary(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        kernel: &[f64],
        rewards: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let mut transitions = Vec::with_capacity(kernel.len() * horizon);
        for _ in 0..horizon {
            transitions.extend_from_slice(kernel);
        }
        TabularMdp::new(num_states, num_actions, horizon, transitions, rewards, initial)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    #[inline]
    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards[x * self.num_actions + a]
    }

    /// `P_h(. | x, a)`.
    #[inline]
    pub fn transition_row(&self, h: usize, x: usize, a: usize) -> &[f64] {
        let start = ((h * self.num_states + x) * self.num_actions + a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    fn check_step(&self, h: usize) -> Result<()> {
        if h >= self.horizon {
            return Err(Error::param("step", "step index must be below the horizon"));
        }
        Ok(())
    }

    /// `r(x, a) + E_{x' ~ P_h(.|x,a)}[next_values(x')]`.
    pub fn backup_values(&self, h: usize, next_values: &[f64]) -> Result<QTable> {
        self.check_step(h)?;
        if next_values.len() != self.num_states {
            return Err(Error::DimensionMismatch {
                what: "next-step values",
                expected: self.num_states,
                got: next_values.len(),
            });
        }
        Ok(QTable::from_fn(self.num_states, self.num_actions, |x, a| {
            let row = self.transition_row(h, x, a);
            self.reward(x, a) + dot(row, next_values)
        }))
    }

    /// The optimal Bellman operator `T*_h` applied to `q_next`. Pass the zero
    /// table at the last step.
    pub fn bellman_backup(&self, h: usize, q_next: &QTable) -> Result<QTable> {
        q_next.same_shape(self.num_states, self.num_actions, "bellman backup input")?;
        self.backup_values(h, &q_next.state_values())
    }

    /// `Q*_0, ..., Q*_{H-1}` by backward induction from `Q*_H = 0`.
    pub fn optimal_q(&self) -> Vec<QTable> {
        let mut out = Vec::with_capacity(self.horizon);
        let mut next = vec![0.0; self.num_states];
        for h in (0..self.horizon).rev() {
            let q = self.backup_values(h, &next).expect("dimensions are consistent");
            next = q.state_values();
            out.push(q);
        }
        out.reverse();
        out
    }

    /// Greedy policy with respect to `tables` (one per step), lowest action on ties.
    pub fn greedy_policy(&self, tables: &[QTable]) -> Result<Policy> {
        if tables.len() != self.horizon {
            return Err(Error::DimensionMismatch {
                what: "q-sequence length",
                expected: self.horizon,
                got: tables.len(),
            });
        }
        let mut actions = Vec::with_capacity(self.horizon * self.num_states);
        for t in tables {
            t.same_shape(self.num_states, self.num_actions, "q-sequence")?;
            actions.extend((0..self.num_states).map(|x| t.greedy_action(x)));
        }
        Policy::deterministic(self.num_states, self.num_actions, self.horizon, &actions)
    }

    pub fn optimal_policy(&self) -> Policy {
        self.greedy_policy(&self.optimal_q()).expect("dimensions are consistent")
    }

    /// `v(pi*) = E_{x ~ rho}[V*_0(x)]`.
    pub fn optimal_value(&self) -> f64 {
        let q = self.optimal_q();
        dot(&self.initial, &q[0].state_values())
    }

    fn check_policy(&self, pi: &Policy) -> Result<()> {
        for (what, expected, got) in [
            ("policy states", self.num_states, pi.num_states()),
            ("policy actions", self.num_actions, pi.num_actions()),
            ("policy horizon", self.horizon, pi.horizon()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// `V^pi_h` for every step, plus the terminal zero vector at index `H`.
    pub fn policy_state_values(&self, pi: &Policy) -> Result<Vec<Vec<f64>>> {
        self.check_policy(pi)?;
        let mut values = vec![vec![0.0; self.num_states]; self.horizon + 1];
        for h in (0..self.horizon).rev() {
            for x in 0..self.num_states {
                let mut v = 0.0;
                for a in 0..self.num_actions {
                    let p = pi.prob(h, x, a);
                    if p > 0.0 {
                        v += p * (self.reward(x, a) + dot(self.transition_row(h, x, a), &values[h + 1]));
                    }
                }
                values[h][x] = v;
            }
        }
        Ok(values)
    }

    /// `v(pi) = E_{x ~ rho}[V^pi_0(x)]`, exact.
    pub fn policy_value(&self, pi: &Policy) -> Result<f64> {
        let values = self.policy_state_values(pi)?;
        Ok(dot(&self.initial, &values[0]))
    }

    /// `v(pi*) - v(pi)`, clamped at zero against rounding.
    pub fn regret(&self, pi: &Policy) -> Result<f64> {
        let gap = self.optimal_value() - self.policy_value(pi)?;
        debug_assert!(gap >= -DERIVED_TOL);
        Ok(gap.max(0.0))
    }

    /// Forward recursion of state-action densities from `rho`.
    pub fn occupancy(&self, pi: &Policy) -> Result<OccupancyMeasure> {
        self.check_policy(pi)?;
        let (s, na) = (self.num_states, self.num_actions);
        let mut values = vec![0.0; self.horizon * s * na];
        let mut state = self.initial.clone();
        for h in 0..self.horizon {
            let mut next = vec![0.0; s];
            for x in 0..s {
                for a in 0..na {
                    let d = state[x] * pi.prob(h, x, a);
                    values[(h * s + x) * na + a] = d;
                    if d > 0.0 && h + 1 < self.horizon {
                        for (n, p) in next.iter_mut().zip(self.transition_row(h, x, a)) {
                            *n += d * p;
                        }
                    }
                }
            }
            state = next;
        }
        Ok(OccupancyMeasure {
            table: StepTable {
                num_states: s,
                num_actions: na,
                horizon: self.horizon,
                values,
            },
        })
    }

    /// `max_pi P^pi_h(x)` for every `(h, x)`, indexed `[h][x]`.
    ///
    /// For each target `(h, x)` a backward DP computes the largest probability
    /// of being at `x` at step `h` from every earlier state.
    pub fn max_reach(&self) -> Vec<Vec<f64>> {
        let s = self.num_states;
        let mut out = vec![vec![0.0; s]; self.horizon];
        for h in 0..self.horizon {
            for target in 0..s {
                let mut w = vec![0.0; s];
                w[target] = 1.0;
                for t in (0..h).rev() {
                    let mut prev = vec![0.0; s];
                    for (y, p) in prev.iter_mut().enumerate() {
                        *p = (0..self.num_actions)
                            .map(|a| dot(self.transition_row(t, y, a), &w))
                            .fold(0.0, f64::max);
                    }
                    w = prev;
                }
                out[h][target] = dot(&self.initial, &w);
            }
        }
        out
    }

    /// `C(mu) = sup_{h, x, a, pi} P^pi_h(x, a) / mu_h(x, a)`.
    ///
    /// Returns `f64::INFINITY` when a reachable pair has zero data mass;
    /// unreachable pairs with zero mass are ignored.
    pub fn concentrability(&self, mu: &DataDistribution) -> Result<f64> {
        self.check_distribution_shape(mu)?;
        let reach = self.max_reach();
        let mut c = 0.0_f64;
        for (h, row) in reach.iter().enumerate() {
            for (x, &m) in row.iter().enumerate() {
                if m <= 0.0 {
                    continue;
                }
                for a in 0..self.num_actions {
                    let w = mu.get(h, x, a);
                    if w <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    c = c.max(m / w);
                }
            }
        }
        Ok(c)
    }

    pub(crate) fn check_distribution_shape(&self, mu: &DataDistribution) -> Result<()> {
        for (what, expected, got) in [
            ("distribution states", self.num_states, mu.num_states()),
            ("distribution actions", self.num_actions, mu.num_actions()),
            ("distribution horizon", self.horizon, mu.horizon()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// `||f_h - T*_h f_{h+1}||^2_{mu_h}` with `f_next = None` meaning zero.
    pub fn bellman_error_sq(&self, mu: &DataDistribution, h: usize, f: &QTable, f_next: Option<&QTable>) -> Result<f64> {
        self.check_distribution_shape(mu)?;
        f.same_shape(self.num_states, self.num_actions, "bellman error input")?;
        let target = match f_next {
            Some(next) => self.bellman_backup(h, next)?,
            None => self.backup_values(h, &vec![0.0; self.num_states])?,
        };
        Ok(mu.sq_distance(h, f, &target))
    }

    /// `2 sqrt(C(mu) * sum_h ||f_h - T*_h f_{h+1}||^2_{mu_h})`, an upper bound on
    /// the regret of the greedy policy of `f`. Infinite when `C(mu)` is.
    pub fn perf_diff_bound(&self, mu: &DataDistribution, f: &[QTable]) -> Result<f64> {
        if f.len() != self.horizon {
            return Err(Error::DimensionMismatch {
                what: "q-sequence length",
                expected: self.horizon,
                got: f.len(),
            });
        }
        let c = self.concentrability(mu)?;
        let mut total = 0.0;
        for h in 0..self.horizon {
            total += self.bellman_error_sq(mu, h, &f[h], f.get(h + 1))?;
        }
        if c.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(2.0 * libm::sqrt(c * total))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two states, two actions, deterministic: action 0 moves to state 1,
    /// action 1 stays. Reward 1 in state 1, 0 in state 0.
    fn chain(h: usize) -> TabularMdp {
        let kernel = [
            0.0, 1.0, /* x0 a0 */ 1.0, 0.0, /* x0 a1 */
            0.0, 1.0, /* x1 a0 */ 0.0, 1.0, /* x1 a1 */
        ];
        TabularMdp::stationary(2, 2, h, &kernel, vec![0.0, 0.0, 1.0, 1.0], vec![1.0, 0.0]).unwrap()
    }

    fn one_state(rewards: Vec<f64>, h: usize) -> TabularMdp {
        let a = rewards.len();
        TabularMdp::stationary(1, a, h, &vec![1.0; a], rewards, vec![1.0]).unwrap()
    }

    #[test]
    fn terminal_backup_is_reward() {
        let mdp = one_state(vec![1.0, 0.0], 1);
        let q = mdp.bellman_backup(0, &QTable::zeros(1, 2)).unwrap();
        assert_eq!(q.values(), &[1.0, 0.0]);
    }

    #[test]
    fn chain_backup_by_hand() {
        let mdp = chain(2);
        let q = mdp.optimal_q();
        assert_eq!(q[1].values(), &[0.0, 0.0, 1.0, 1.0]);
        let q0 = mdp.bellman_backup(0, &q[1]).unwrap();
        assert_eq!(q0.get(0, 0), 1.0);
        assert_eq!(q0, q[0]);
    }

    #[test]
    fn constant_propagates_through_zero_reward() {
        let kernel = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        let mdp = TabularMdp::stationary(2, 2, 2, &kernel, vec![0.0; 4], vec![0.5, 0.5]).unwrap();
        let q = mdp.bellman_backup(0, &QTable::constant(2, 2, 0.7)).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn backup_rejects_wrong_shape() {
        let mdp = chain(2);
        assert!(matches!(
            mdp.bellman_backup(0, &QTable::zeros(3, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn geometric_sum_of_constant_reward() {
        let mdp = one_state(vec![0.5], 3);
        let q = mdp.optimal_q();
        for (h, t) in q.iter().enumerate() {
            assert_eq!(t.get(0, 0), 0.5 * (3 - h) as f64);
        }
    }

    #[test]
    fn single_step_optimal_q_is_reward() {
        let mdp = chain(1);
        assert_eq!(mdp.optimal_q()[0].values(), mdp.rewards());
    }

    #[test]
    fn uniform_policy_value() {
        let mdp = one_state(vec![1.0, 0.0], 1);
        assert_eq!(mdp.policy_value(&Policy::uniform(1, 2, 1)).unwrap(), 0.5);
        assert_eq!(mdp.regret(&mdp.optimal_policy()).unwrap(), 0.0);
        assert_eq!(mdp.regret(&Policy::uniform(1, 2, 1)).unwrap(), 0.5);
    }

    #[test]
    fn first_step_occupancy() {
        let mdp = chain(3);
        let pi = Policy::uniform(2, 2, 3);
        let occ = mdp.occupancy(&pi).unwrap();
        assert_eq!(occ.get(0, 0, 0), 0.5);
        assert_eq!(occ.get(0, 1, 1), 0.0);
        for h in 0..3 {
            let total: f64 = occ.step(h).iter().sum();
            assert!((total - 1.0).abs() < DERIVED_TOL);
        }
    }

    #[test]
    fn deterministic_occupancy_is_point_mass() {
        let mdp = chain(3);
        // move at step 0, stay afterwards
        let pi = Policy::deterministic(2, 2, 3, &[0, 0, 1, 1, 1, 1]).unwrap();
        let occ = mdp.occupancy(&pi).unwrap();
        assert_eq!(occ.get(0, 0, 0), 1.0);
        assert_eq!(occ.get(1, 1, 1), 1.0);
        assert_eq!(occ.get(2, 1, 1), 1.0);
    }

    #[test]
    fn concentrability_uniform_single_step() {
        // S = 2, A = 2, H = 1, rho on x0, mu uniform: 1 / (1/4) = 4
        let kernel = [0.5; 8];
        let mdp = TabularMdp::stationary(2, 2, 1, &kernel, vec![0.0; 4], vec![1.0, 0.0]).unwrap();
        let c = mdp.concentrability(&DataDistribution::uniform(2, 2, 1)).unwrap();
        assert_eq!(c, 4.0);
    }

    #[test]
    fn concentrability_sentinel_on_missing_mass() {
        let mdp = chain(2);
        let mu = DataDistribution::new(2, 2, 2, vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]).unwrap();
        // x1 is unreachable at step 0, so only step 1 matters: x0 reachable (stay) but mu = 0 there.
        assert_eq!(mdp.concentrability(&mu).unwrap(), f64::INFINITY);
        let f = mdp.optimal_q();
        assert_eq!(mdp.perf_diff_bound(&mu, &f).unwrap(), f64::INFINITY);
    }

    #[test]
    fn generating_policy_support() {
        // mu = occupancy of "move then stay" on the deterministic chain
        let mdp = chain(2);
        let pi = Policy::deterministic(2, 2, 2, &[0, 0, 1, 1]).unwrap();
        let occ = mdp.occupancy(&pi).unwrap();
        // The generating policy never visits x0 at step 1 but another policy can.
        let mu = occ.to_distribution().unwrap();
        assert_eq!(mdp.concentrability(&mu).unwrap(), f64::INFINITY);
        // Mixing in a little uniform mass makes it finite and at least one.
        let mixed = mdp.occupancy(&pi.mix_uniform(0.5).unwrap()).unwrap().to_distribution().unwrap();
        let c = mdp.concentrability(&mixed).unwrap();
        assert!(c.is_finite() && c >= 1.0);
    }

    #[test]
    fn optimal_q_has_zero_bound() {
        let mdp = chain(3);
        let mu = DataDistribution::uniform(2, 2, 3);
        let q = mdp.optimal_q();
        assert_eq!(mdp.perf_diff_bound(&mu, &q).unwrap(), 0.0);
        assert_eq!(mdp.regret(&mdp.greedy_policy(&q).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn zero_f_bound_dominates_tie_break_regret() {
        let kernel = [0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9];
        let mdp = TabularMdp::stationary(2, 2, 2, &kernel, vec![1.0; 4], vec![0.5, 0.5]).unwrap();
        let f = [QTable::zeros(2, 2), QTable::zeros(2, 2)];
        let mu = DataDistribution::uniform(2, 2, 2);
        let regret = mdp.regret(&mdp.greedy_policy(&f).unwrap()).unwrap();
        assert!(mdp.perf_diff_bound(&mu, &f).unwrap() >= regret);
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            TabularMdp::stationary(1, 1, 1, &[0.9], vec![0.0], vec![1.0]),
            Err(Error::NotDistribution { .. })
        ));
        assert!(matches!(
            TabularMdp::stationary(1, 1, 1, &[1.0], vec![1.5], vec![1.0]),
            Err(Error::RewardOutOfRange { .. })
        ));
        assert!(matches!(
            TabularMdp::stationary(1, 1, 1, &[1.0], vec![0.5], vec![0.5]),
            Err(Error::NotDistribution { .. })
        ));
        assert!(Policy::new(1, 2, 1, vec![0.5, 0.6]).is_err());
    }
}
