//! Linear contextual bandit with nested truncated-feature classes.
//!
//! Each `(context, action)` pair has Gaussian features with a per-action
//! diagonal scale; the mean reward is `<theta, phi>` and only the first
//! `active_dim` coordinates of `theta` are non-zero. Class `k` keeps the first
//! `class_dims[k]` coordinates. Every feature vector is a function of
//! `(seed, context, action)`, so data sets of different sizes share prefixes.

use std::sync::Arc;
use std::time::Instant;

use modbe_core::baselines::{argmin_first, holdout_select_discounted};
use modbe_core::rng::keyed_stream;
use modbe_core::{modbe_discounted, DiscountedFqi, FeatureMap, FunctionClass, NestedSequence, QFunction, Ridge, Transition};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::results::{sort_rows, ResultRow};
use super::{thread_pool, EvalError};

mod domain {
    pub const INSTANCE: u64 = 0x6362_696e;
    pub const CONTEXT: u64 = 0x6362_6378;
    pub const LOG: u64 = 0x6362_6c67;
    pub const TEST: u64 = 0x6362_7473;
}

/// Contexts evaluated per parallel chunk of the regret pass.
const EVAL_CHUNK: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct CbInstance {
    pub dim: usize,
    pub active_dim: usize,
    pub num_actions: usize,
    pub class_dims: Vec<usize>,
    pub noise_sd: f64,
    pub test_contexts: usize,
    /// Seed of the parameter draw and of the shared test contexts.
    pub instance_seed: u64,
    pub theta: Vec<f64>,
    /// `[a][j]`
    scales: Vec<f64>,
}

impl CbInstance {
    /// 200 features, 30 active, 10 actions, truncations
    /// `{15, 20, 25, 28, 29, 30, 50, 75, 100, 200}`.
    pub fn standard(instance_seed: u64) -> Self {
        Self::new(200, 30, 10, vec![15, 20, 25, 28, 29, 30, 50, 75, 100, 200], 0.5, instance_seed)
    }

    /// `theta_j ~ N(0, 1/active_dim)` for `j < active_dim` and 0 beyond;
    /// feature scales are uniform on `[0.5, 1.5]`.
    pub fn new(dim: usize, active_dim: usize, num_actions: usize, class_dims: Vec<usize>, noise_sd: f64, instance_seed: u64) -> Self {
        assert!(active_dim <= dim && class_dims.iter().all(|&k| k <= dim));
        let mut rng = keyed_stream(instance_seed, domain::INSTANCE, 0);
        let sd = 1.0 / (active_dim as f64).sqrt();
        let theta = (0..dim)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if j < active_dim { z * sd } else { 0.0 }
            })
            .collect();
        let unif = Uniform::new(0.5, 1.5).expect("valid range");
        let scales = (0..num_actions * dim).map(|_| unif.sample(&mut rng)).collect();
        CbInstance {
            dim,
            active_dim,
            num_actions,
            class_dims,
            noise_sd,
            test_contexts: 10_000,
            instance_seed,
            theta,
            scales,
        }
    }

    /// First `out.len()` coordinates of `phi(context, action)` in the stream
    /// `(seed, tag)`.
    fn write_features(&self, seed: u64, tag: u64, context: usize, action: usize, out: &mut [f64]) {
        let mut rng = keyed_stream(seed, tag, context as u64);
        rng.set_word_pos((action as u128) << 16);
        let scales = &self.scales[action * self.dim..];
        for (o, s) in out.iter_mut().zip(scales) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *o = z * s;
        }
    }

    pub fn mean_reward(&self, phi: &[f64]) -> f64 {
        phi.iter().zip(&self.theta).map(|(p, t)| p * t).sum()
    }

    /// `n` logged contexts for `seed` with uniformly random actions.
    pub fn generate(self: &Arc<Self>, seed: u64, n: usize) -> (Arc<ContextPool>, Vec<Transition>) {
        let d = self.dim;
        let mut logged = Vec::with_capacity(n);
        let mut cache = vec![0.0; n * d];
        let mut data = Vec::with_capacity(n);
        for (i, phi) in cache.chunks_mut(d).enumerate() {
            let mut rng: ChaCha8Rng = keyed_stream(seed, domain::LOG, i as u64);
            let action = rng.random_range(0..self.num_actions);
            let noise: f64 = StandardNormal.sample(&mut rng);
            self.write_features(seed, domain::CONTEXT, i, action, phi);
            logged.push(action);
            data.push(Transition {
                step: 0,
                state: i,
                action,
                reward: self.mean_reward(phi) + self.noise_sd * noise,
                next_state: i,
            });
        }
        let pool = ContextPool {
            instance: self.clone(),
            seed,
            logged,
            cache,
        };
        (Arc::new(pool), data)
    }

    /// The nested truncation classes over `pool`, unclipped.
    pub fn classes(&self, pool: &Arc<ContextPool>) -> Result<NestedSequence, EvalError> {
        let map: Arc<dyn FeatureMap> = pool.clone();
        let classes = self
            .class_dims
            .iter()
            .map(|&k| FunctionClass::linear(map.clone(), k, Ridge::default(), None))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(NestedSequence::new(classes)?)
    }

    /// Mean regret (and its Monte Carlo standard error) of the greedy policy
    /// of each weight vector on the shared test contexts, in one pass.
    pub fn test_regret(&self, weights: &[&[f64]]) -> Vec<(f64, f64)> {
        let (na, d) = (self.num_actions, self.dim);
        let chunks: Vec<usize> = (0..self.test_contexts).step_by(EVAL_CHUNK).collect();
        let partial: Vec<Vec<(f64, f64)>> = chunks
            .par_iter()
            .map(|&start| {
                let end = (start + EVAL_CHUNK).min(self.test_contexts);
                let mut sums = vec![(0.0, 0.0); weights.len()];
                let mut phi = vec![0.0; na * d];
                let mut means = vec![0.0; na];
                for context in start..end {
                    for (a, row) in phi.chunks_mut(d).enumerate() {
                        self.write_features(self.instance_seed, domain::TEST, context, a, row);
                        means[a] = self.mean_reward(row);
                    }
                    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    for (w, acc) in weights.iter().zip(&mut sums) {
                        let mut choice = 0;
                        let mut top = f64::NEG_INFINITY;
                        for (a, row) in phi.chunks(d).enumerate() {
                            let score: f64 = row.iter().zip(w.iter()).map(|(p, c)| p * c).sum();
                            if score > top {
                                top = score;
                                choice = a;
                            }
                        }
                        let gap = best - means[choice];
                        acc.0 += gap;
                        acc.1 += gap * gap;
                    }
                }
                sums
            })
            .collect();
        let m = self.test_contexts as f64;
        (0..weights.len())
            .map(|i| {
                let (s, s2) = partial.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p[i].0, acc.1 + p[i].1));
                let mean = s / m;
                let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
                (mean, (var / m).sqrt())
            })
            .collect()
    }
}

/// Feature map over the logged contexts of one seed. Logged-action features
/// are cached; other actions are regenerated on demand.
pub struct ContextPool {
    instance: Arc<CbInstance>,
    seed: u64,
    logged: Vec<usize>,
    cache: Vec<f64>,
}

impl FeatureMap for ContextPool {
    fn num_states(&self) -> usize {
        self.logged.len()
    }

    fn num_actions(&self) -> usize {
        self.instance.num_actions
    }

    fn dim(&self) -> usize {
        self.instance.dim
    }

    fn write_features(&self, x: usize, a: usize, out: &mut [f64]) {
        if self.logged[x] == a {
            let d = self.instance.dim;
            out.copy_from_slice(&self.cache[x * d..x * d + out.len()]);
        } else {
            self.instance.write_features(self.seed, domain::CONTEXT, x, a, out);
        }
    }
}

/// Rows of a contextual-bandit sweep plus the Monte Carlo standard error of
/// each row's regret.
#[derive(Debug, Clone, PartialEq)]
pub struct CbResults {
    pub rows: Vec<ResultRow>,
    pub mc_stderr: Vec<f64>,
}

struct Fit {
    n: usize,
    seed: u64,
    method: Method,
    selected: usize,
    weights: Vec<f64>,
    runtime_ms: u64,
}

fn weights_of(f: &QFunction) -> Vec<f64> {
    f.linear_weights().expect("linear class").to_vec()
}

fn run_cell(
    config: &ExperimentConfig,
    methods: &[Method],
    data: &[Transition],
    classes: &NestedSequence,
    n: usize,
    seed: u64,
) -> Result<Vec<Fit>, EvalError> {
    let base = DiscountedFqi {
        gamma: config.gamma,
        iterations: 1,
    };
    let time = |start: Instant| if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
    // Full-data fits of every class; the oracle picks among them after the
    // regret pass.
    let mut fits = Vec::new();
    for (k, class) in classes.classes().iter().enumerate() {
        let start = Instant::now();
        let f = base.train(data, class)?;
        fits.push(Fit {
            n,
            seed,
            method: Method::Fixed(k),
            selected: k,
            weights: weights_of(&f),
            runtime_ms: time(start),
        });
    }
    if methods.contains(&Method::Modbe) {
        let start = Instant::now();
        let trace = modbe_discounted(data, &base, classes, config.delta, config.schedule, seed)?;
        fits.push(Fit {
            n,
            seed,
            method: Method::Modbe,
            selected: trace.selected,
            weights: weights_of(trace.functions.get(0)),
            runtime_ms: time(start),
        });
    }
    if methods.contains(&Method::Holdout) {
        let start = Instant::now();
        let sel = holdout_select_discounted(data, &base, classes, seed)?;
        fits.push(Fit {
            n,
            seed,
            method: Method::Holdout,
            selected: sel.selected,
            weights: weights_of(sel.functions.get(0)),
            runtime_ms: time(start),
        });
    }
    Ok(fits)
}

/// Every method on every `(n, seed)` cell; regret on the shared test contexts.
pub fn run_cb_experiment(config: &ExperimentConfig, instance: &Arc<CbInstance>, jobs: usize) -> Result<CbResults, EvalError> {
    if config.gamma != 0.0 {
        return Err(EvalError::Config("the contextual bandit runs with gamma = 0".into()));
    }
    let methods = config.expand_methods(instance.class_dims.len()).map_err(EvalError::Config)?;
    let max_n = config.n_list.iter().copied().max().unwrap_or(0);
    let pool = thread_pool(jobs)?;
    let fits: Vec<Fit> = pool.install(|| {
        let per_seed = config
            .seeds
            .par_iter()
            .map(|&seed| {
                let (contexts, data) = instance.generate(seed, max_n);
                let classes = instance.classes(&contexts)?;
                config
                    .n_list
                    .par_iter()
                    .map(|&n| run_cell(config, &methods, &data[..n], &classes, n, seed))
                    .collect::<Result<Vec<_>, EvalError>>()
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        Ok::<_, EvalError>(per_seed.into_iter().flatten().flatten().collect())
    })?;
    let weights: Vec<&[f64]> = fits.iter().map(|f| f.weights.as_slice()).collect();
    let regrets = pool.install(|| instance.test_regret(&weights));
    let mut paired: Vec<(ResultRow, f64)> = Vec::with_capacity(fits.len());
    let mut fixed: Vec<(f64, f64, u64)> = Vec::new();
    for (i, (f, &(regret, se))) in fits.iter().zip(&regrets).enumerate() {
        if let Method::Fixed(k) = f.method {
            fixed.push((regret, se, f.runtime_ms));
            let last = fits.get(i + 1).map_or(true, |g| !matches!(g.method, Method::Fixed(_)));
            if last && methods.contains(&Method::Oracle) {
                let scores: Vec<f64> = fixed.iter().map(|x| x.0).collect();
                let best = argmin_first(&scores).expect("finite regrets");
                let row = ResultRow {
                    n: f.n,
                    seed: f.seed,
                    method: Method::Oracle,
                    selected: best,
                    regret: fixed[best].0,
                    runtime_ms: fixed.iter().map(|x| x.2).sum(),
                };
                paired.push((row, fixed[best].1));
            }
            if last {
                fixed.clear();
            }
            if !methods.contains(&Method::Fixed(k)) {
                continue;
            }
        }
        let row = ResultRow {
            n: f.n,
            seed: f.seed,
            method: f.method,
            selected: f.selected,
            regret,
            runtime_ms: f.runtime_ms,
        };
        paired.push((row, se));
    }
    paired.sort_by(|a, b| (a.0.n, a.0.seed, a.0.method).cmp(&(b.0.n, b.0.seed, b.0.method)));
    let (rows, mc_stderr): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
    debug_assert!({
        let mut sorted = rows.clone();
        sort_rows(&mut sorted);
        sorted == rows
    });
    Ok(CbResults { rows, mc_stderr })
}
