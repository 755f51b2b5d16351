//! Named benchmark instances and data-distribution specs.

use std::str::FromStr;

use modbe_core::rng::keyed_stream;
use modbe_core::{
    generate_from_behavior, generate_from_mu, DataDistribution, FunctionClass, NestedSequence, OfflineDataset, Policy, QTable, Result,
    TabularMdp,
};
use rand::Rng;

/// An MDP, a data distribution and a nested class sequence.
#[derive(Debug, Clone)]
pub struct RlInstance {
    pub name: &'static str,
    pub mdp: TabularMdp,
    pub mu: DataDistribution,
    pub classes: NestedSequence,
}

/// Four-state combination lock. The correct action at `x` is `x mod 2`: it
/// advances with probability 0.8, the wrong one resets to state 0 with
/// probability 0.8. The correct action earns 0.75 on top of a reward that
/// grows along the chain to 0.25. Classes: one block, parity
/// blocks, tabular, all unclipped so that the tabular class is complete.
pub fn chain(horizon: usize) -> RlInstance {
    let (s, na) = (4, 2);
    let mut kernel = vec![0.0; s * na * s];
    let mut rewards = vec![0.0; s * na];
    for x in 0..s {
        for a in 0..na {
            let row = &mut kernel[(x * na + a) * s..(x * na + a + 1) * s];
            let correct = a == x % 2;
            let target = if correct { (x + 1).min(s - 1) } else { 0 };
            row[target] += 0.8;
            row[x] += 0.2;
            rewards[x * na + a] = 0.25 * x as f64 / 3.0 + if correct { 0.75 } else { 0.0 };
        }
    }
    let mdp = TabularMdp::stationary(s, na, horizon, &kernel, rewards, vec![0.25; 4]).expect("valid chain");
    let bound = None;
    let classes = NestedSequence::new(vec![
        FunctionClass::abstraction(vec![0, 0, 0, 0], na, bound).expect("valid blocks"),
        FunctionClass::abstraction(vec![0, 1, 0, 1], na, bound).expect("valid blocks"),
        FunctionClass::tabular(s, na, bound).expect("valid class"),
    ])
    .expect("nested");
    RlInstance {
        name: "chain",
        mu: DataDistribution::uniform(s, na, horizon),
        mdp,
        classes,
    }
}

/// 3x3 grid with four slippery moves and a rewarding corner. Classes: one
/// block, row blocks, tabular.
pub fn grid(horizon: usize) -> RlInstance {
    let (side, na) = (3usize, 4usize);
    let s = side * side;
    let goal = s - 1;
    let moves: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    let step = |x: usize, m: usize| {
        let (r, c) = ((x / side) as isize, (x % side) as isize);
        let (nr, nc) = (r + moves[m].0, c + moves[m].1);
        if (0..side as isize).contains(&nr) && (0..side as isize).contains(&nc) {
            nr as usize * side + nc as usize
        } else {
            x
        }
    };
    let mut kernel = vec![0.0; s * na * s];
    let mut rewards = vec![0.0; s * na];
    for x in 0..s {
        for a in 0..na {
            let row = &mut kernel[(x * na + a) * s..(x * na + a + 1) * s];
            for m in 0..na {
                row[step(x, m)] += if m == a { 0.85 } else { 0.05 };
            }
            rewards[x * na + a] = if x == goal { 1.0 } else { 0.0 };
        }
    }
    let mut initial = vec![0.0; s];
    initial[0] = 1.0;
    let mdp = TabularMdp::stationary(s, na, horizon, &kernel, rewards, initial).expect("valid grid");
    let bound = None;
    let rows: Vec<usize> = (0..s).map(|x| x / side).collect();
    let classes = NestedSequence::new(vec![
        FunctionClass::abstraction(vec![0; s], na, bound).expect("valid blocks"),
        FunctionClass::abstraction(rows, na, bound).expect("valid blocks"),
        FunctionClass::tabular(s, na, bound).expect("valid class"),
    ])
    .expect("nested");
    RlInstance {
        name: "grid",
        mu: DataDistribution::uniform(s, na, horizon),
        mdp,
        classes,
    }
}

/// Two states, two steps. From state 0 every action moves to state 0 or 1
/// with equal probability; `r(0, 0) = 1`, `r(1, 0) = 0`, `r(., 1) = 0.1`.
/// Step-1 data covers state 0 only, step-2 data is uniform.
///
/// The one-block class fits step 1 with zero target variance but keeps a
/// Bellman error of 0.125 at step 2; the tabular class is complete but its
/// step-1 targets have variance 0.2025. Summed validation losses therefore
/// favour the one-block class.
pub fn variance_bias() -> RlInstance {
    let (s, na, horizon) = (2, 2, 2);
    let kernel = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5];
    let mdp = TabularMdp::stationary(s, na, horizon, &kernel, vec![1.0, 0.1, 0.0, 0.1], vec![1.0, 0.0])
        .expect("valid instance");
    let mu = DataDistribution::new(s, na, horizon, vec![0.5, 0.5, 0.0, 0.0, 0.25, 0.25, 0.25, 0.25])
        .expect("valid distribution");
    let bound = None;
    let classes = NestedSequence::new(vec![
        FunctionClass::abstraction(vec![0, 0], na, bound).expect("valid blocks"),
        FunctionClass::tabular(s, na, bound).expect("valid class"),
    ])
    .expect("nested");
    RlInstance {
        name: "variance-bias",
        mdp,
        mu,
        classes,
    }
}

/// Every transition enters the zero-reward absorbing state 0, so the backup
/// of any member vanishing at state 0 is the reward table. `F_1 = {0, g}`
/// misses it, `F_2 = F_1 + {r}` is complete and `F_3` adds perturbations of `r`.
pub fn finite_absorbing() -> RlInstance {
    let (s, na, horizon) = (3, 2, 2);
    let mut kernel = vec![0.0; s * na * s];
    for row in kernel.chunks_mut(s) {
        row[0] = 1.0;
    }
    let rewards = vec![0.0, 0.0, 0.25, 0.75, 1.0, 0.5];
    let mdp = TabularMdp::stationary(s, na, horizon, &kernel, rewards.clone(), vec![0.0, 0.5, 0.5])
        .expect("valid instance");
    let table = |v: &[f64]| QTable::from_values(s, na, v.to_vec()).expect("shape");
    let zero = QTable::zeros(s, na);
    let g = table(&[0.0, 0.0, 0.5, 0.5, 0.5, 0.5]);
    let r = table(&rewards);
    let f1 = vec![zero, g];
    let mut f2 = f1.clone();
    f2.push(r);
    let mut f3 = f2.clone();
    f3.push(table(&[0.0, 0.0, 0.25, 1.0, 1.0, 0.5]));
    f3.push(table(&[0.0, 0.0, 0.5, 0.75, 0.75, 0.5]));
    f3.push(table(&[0.0, 0.0, 0.0, 0.75, 1.0, 0.25]));
    let bound = Some(horizon as f64);
    let classes = NestedSequence::new(vec![
        FunctionClass::finite(f1, bound).expect("valid class"),
        FunctionClass::finite(f2, bound).expect("valid class"),
        FunctionClass::finite(f3, bound).expect("valid class"),
    ])
    .expect("nested");
    RlInstance {
        name: "finite-absorbing",
        mu: DataDistribution::uniform(s, na, horizon),
        mdp,
        classes,
    }
}

const RANDOM_MDP_DOMAIN: u64 = 0x726e_646d;

/// A random MDP: each transition row is a normalized vector of uniforms with
/// roughly a third of the entries zeroed, rewards are uniform on `[0, 1]`.
pub fn random_mdp(seed: u64, s: usize, na: usize, horizon: usize) -> TabularMdp {
    let mut rng = keyed_stream(seed, RANDOM_MDP_DOMAIN, 0);
    let mut simplex = |len: usize, sparse: bool| {
        let mut w: Vec<f64> = (0..len)
            .map(|_| {
                let keep = !sparse || rng.random::<f64>() >= 1.0 / 3.0;
                if keep { rng.random::<f64>() + 1e-3 } else { 0.0 }
            })
            .collect();
        if w.iter().all(|&v| v == 0.0) {
            let i = rng.random_range(0..len);
            w[i] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    };
    let mut transitions = Vec::with_capacity(horizon * s * na * s);
    for _ in 0..horizon * s * na {
        transitions.extend(simplex(s, true));
    }
    let initial = simplex(s, false);
    let rewards = (0..s * na).map(|_| rng.random::<f64>()).collect();
    TabularMdp::new(s, na, horizon, transitions, rewards, initial).expect("rows are normalized")
}

/// A full-support random data distribution.
pub fn random_mu(seed: u64, s: usize, na: usize, horizon: usize) -> DataDistribution {
    let mut rng = keyed_stream(seed, RANDOM_MDP_DOMAIN, 1);
    let mut values = Vec::with_capacity(horizon * s * na);
    for _ in 0..horizon {
        let w: Vec<f64> = (0..s * na).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = w.iter().sum();
        values.extend(w.iter().map(|v| v / total));
    }
    DataDistribution::new(s, na, horizon, values).expect("normalized")
}

/// How data is distributed over `(x, a)` at each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuSpec {
    /// Uniform over all pairs at every step.
    UniformMu,
    /// Occupancy of the uniform behaviour policy.
    UniformPolicy,
    /// Occupancy of the optimal policy mixed with uniform actions.
    EpsOptimal(f64),
}

impl FromStr for MuSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform-mu" => Ok(MuSpec::UniformMu),
            "uniform" => Ok(MuSpec::UniformPolicy),
            _ => {
                let eps = s
                    .strip_prefix("eps-optimal:")
                    .ok_or_else(|| format!("unknown distribution `{s}` (uniform-mu, uniform, eps-optimal:<eps>)"))?;
                let eps: f64 = eps.parse().map_err(|e| format!("invalid eps `{eps}`: {e}"))?;
                if !(0.0..=1.0).contains(&eps) {
                    return Err(format!("eps must lie in [0, 1], got {eps}"));
                }
                Ok(MuSpec::EpsOptimal(eps))
            }
        }
    }
}

impl std::fmt::Display for MuSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MuSpec::UniformMu => write!(f, "uniform-mu"),
            MuSpec::UniformPolicy => write!(f, "uniform"),
            MuSpec::EpsOptimal(eps) => write!(f, "eps-optimal:{eps}"),
        }
    }
}

impl MuSpec {
    pub fn distribution(&self, mdp: &TabularMdp) -> Result<DataDistribution> {
        let (s, na, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        let policy = match self {
            MuSpec::UniformMu => return Ok(DataDistribution::uniform(s, na, h)),
            MuSpec::UniformPolicy => Policy::uniform(s, na, h),
            MuSpec::EpsOptimal(eps) => mdp.optimal_policy().mix_uniform(*eps)?,
        };
        mdp.occupancy(&policy)?.to_distribution()
    }

    /// `n` samples per step from this distribution, tagged with the spec.
    pub fn generate(&self, mdp: &TabularMdp, n: usize, seed: u64) -> Result<OfflineDataset> {
        let mut data = match self {
            MuSpec::UniformMu => generate_from_mu(mdp, &self.distribution(mdp)?, n, seed)?,
            MuSpec::UniformPolicy => generate_from_behavior(mdp, &Policy::uniform(mdp.num_states(), mdp.num_actions(), mdp.horizon()), n, seed)?.0,
            MuSpec::EpsOptimal(eps) => generate_from_behavior(mdp, &mdp.optimal_policy().mix_uniform(*eps)?, n, seed)?.0,
        };
        data.meta_mut().mu_spec = self.to_string();
        Ok(data)
    }
}

/// Instance by name, for configs and the command line.
pub fn rl_instance(name: &str) -> Option<RlInstance> {
    match name {
        "chain" => Some(chain(4)),
        "grid" => Some(grid(5)),
        "variance-bias" => Some(variance_bias()),
        "finite-absorbing" => Some(finite_absorbing()),
        _ => None,
    }
}
