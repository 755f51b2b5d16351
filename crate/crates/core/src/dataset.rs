//! Offline datasets: `n` i.i.d. transitions per step and the train/validation
//! split.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::mdp::{DataDistribution, Policy, TabularMdp};
use crate::rng::{domain, keyed_stream, seek_sample};

/// Smallest per-step sample count that leaves a non-empty validation split.
pub const MIN_SPLIT_SIZE: usize = 5;

/// One logged transition `(h, x, a, r, x')`; `step` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// Provenance recorded alongside a dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetMeta {
    pub seed: Option<u64>,
    pub generator: String,
    pub mu_spec: String,
    /// `C(mu)` of the generating distribution, when known.
    pub concentrability: Option<f64>,
}

/// `D = (D_h)` with the same count `n` at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    slots: Vec<Vec<Transition>>,
    meta: DatasetMeta,
}

impl OfflineDataset {
    /// Validates equal slot sizes, step indices and rewards in `[0, 1]`.
    pub fn new(slots: Vec<Vec<Transition>>, meta: DatasetMeta) -> Result<Self> {
        let n = slots.first().map_or(0, Vec::len);
        for (h, slot) in slots.iter().enumerate() {
            if slot.len() != n {
                return Err(Error::MalformedDataset(alloc::format!(
                    "step {} has {} transitions, step 1 has {}",
                    h + 1,
                    slot.len(),
                    n
                )));
            }
            for t in slot {
                if t.step != h {
                    return Err(Error::MalformedDataset(alloc::format!(
                        "transition with step {} stored in slot {}",
                        t.step + 1,
                        h + 1
                    )));
                }
                if !(0.0..=1.0).contains(&t.reward) {
                    return Err(Error::RewardOutOfRange {
                        state: t.state,
                        action: t.action,
                        value: t.reward,
                    });
                }
            }
        }
        Ok(OfflineDataset { slots, meta })
    }

    pub fn horizon(&self) -> usize {
        self.slots.len()
    }

    /// Transitions per step.
    pub fn n(&self) -> usize {
        self.slots.first().map_or(0, Vec::len)
    }

    pub fn slot(&self, h: usize) -> &[Transition] {
        &self.slots[h]
    }

    pub fn slots(&self) -> &[Vec<Transition>] {
        &self.slots
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut DatasetMeta {
        &mut self.meta
    }

    /// All transitions, step by step.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.slots.iter().flatten()
    }

    /// Checks that every index fits inside `mdp`.
    pub fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.horizon() != mdp.horizon() {
            return Err(Error::DimensionMismatch {
                what: "dataset horizon",
                expected: mdp.horizon(),
                got: self.horizon(),
            });
        }
        for t in self.iter() {
            if t.state >= mdp.num_states() || t.next_state >= mdp.num_states() || t.action >= mdp.num_actions() {
                return Err(Error::OutOfDomain {
                    state: t.state.max(t.next_state),
                    action: t.action,
                });
            }
        }
        Ok(())
    }

    /// The first `n` transitions of every step.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::param("n", "cannot truncate to more samples than available"));
        }
        let slots = self.slots.iter().map(|s| s[..n].to_vec()).collect();
        Ok(OfflineDataset {
            slots,
            meta: self.meta.clone(),
        })
    }
}

/// Draws `n` transitions per step with `(x, a) ~ mu_h`, `r = r(x, a)` and
/// `x' ~ P_h(. | x, a)`.
///
/// Sample `i` at step `h` depends only on `(seed, h, i)`.
pub fn generate_from_mu(mdp: &TabularMdp, mu: &DataDistribution, n: usize, seed: u64) -> Result<OfflineDataset> {
    mdp.check_distribution_shape(mu)?;
    if n == 0 {
        return Err(Error::param("n", "at least one sample per step is required"));
    }
    let (s, na) = (mdp.num_states(), mdp.num_actions());
    let mut slots = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let pairs = WeightedIndex::new(mu.step(h)).map_err(|_| Error::NotDistribution {
            what: "data distribution step",
            index: h,
            sum: mu.step(h).iter().sum(),
        })?;
        // Rows are validated distributions, so WeightedIndex cannot fail on them.
        let rows: Vec<Option<WeightedIndex<f64>>> = (0..s * na)
            .map(|i| WeightedIndex::new(mdp.transition_row(h, i / na, i % na)).ok())
            .collect();
        let mut rng = keyed_stream(seed, domain::DATASET, h as u64);
        let mut slot = Vec::with_capacity(n);
        for i in 0..n {
            seek_sample(&mut rng, i);
            let pair = pairs.sample(&mut rng);
            let (x, a) = (pair / na, pair % na);
            let next_state = rows[pair].as_ref().expect("validated transition row").sample(&mut rng);
            slot.push(Transition {
                step: h,
                state: x,
                action: a,
                reward: mdp.reward(x, a),
                next_state,
            });
        }
        slots.push(slot);
    }
    let meta = DatasetMeta {
        seed: Some(seed),
        generator: "mu".to_string(),
        mu_spec: String::new(),
        concentrability: Some(mdp.concentrability(mu)?),
    };
    OfflineDataset::new(slots, meta)
}

/// Generates from the occupancy of a behaviour policy and returns that
/// occupancy as the data distribution. Zero-mass reachable pairs are allowed;
/// they show up as an infinite concentrability in the metadata.
pub fn generate_from_behavior(
    mdp: &TabularMdp,
    behavior: &Policy,
    n: usize,
    seed: u64,
) -> Result<(OfflineDataset, DataDistribution)> {
    let mu = mdp.occupancy(behavior)?.to_distribution()?;
    let mut data = generate_from_mu(mdp, &mu, n, seed)?;
    data.meta.generator = "behavior".to_string();
    Ok((data, mu))
}

/// `(ceil(0.8 n), floor(0.2 n))`.
pub fn split_sizes(n: usize) -> (usize, usize) {
    let valid = n / 5;
    (n - valid, valid)
}

/// Train/validation split of an [`OfflineDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: OfflineDataset,
    pub valid: OfflineDataset,
    pub seed: u64,
}

/// Independently permutes each step and puts the first `ceil(0.8 n)` into the
/// training set.
pub fn split(data: &OfflineDataset, seed: u64) -> Result<DataSplit> {
    let n = data.n();
    if n < MIN_SPLIT_SIZE {
        return Err(Error::DatasetTooSmall(n));
    }
    let (n_train, _) = split_sizes(n);
    let mut train = Vec::with_capacity(data.horizon());
    let mut valid = Vec::with_capacity(data.horizon());
    for (h, slot) in data.slots.iter().enumerate() {
        let order = permutation(n, seed, domain::SPLIT, h as u64);
        train.push(order[..n_train].iter().map(|&i| slot[i]).collect());
        valid.push(order[n_train..].iter().map(|&i| slot[i]).collect());
    }
    Ok(DataSplit {
        train: OfflineDataset {
            slots: train,
            meta: data.meta.clone(),
        },
        valid: OfflineDataset {
            slots: valid,
            meta: data.meta.clone(),
        },
        seed,
    })
}

/// Split of a flat transition list (discounted mode).
pub fn split_flat(data: &[Transition], seed: u64) -> Result<(Vec<Transition>, Vec<Transition>)> {
    let n = data.len();
    if n < MIN_SPLIT_SIZE {
        return Err(Error::DatasetTooSmall(n));
    }
    let (n_train, _) = split_sizes(n);
    let order = permutation(n, seed, domain::FLAT_SPLIT, 0);
    Ok((
        order[..n_train].iter().map(|&i| data[i]).collect(),
        order[n_train..].iter().map(|&i| data[i]).collect(),
    ))
}

pub(crate) fn permutation(n: usize, seed: u64, tag: u64, stream: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = keyed_stream(seed, tag, stream);
    order.shuffle(&mut rng);
    order
}
