use modbe_core::basealg::{fqi, fqi_oracle, omega_fqi, Fqi};
use modbe_core::dataset::{generate_from_mu, DatasetMeta, OfflineDataset, Transition};
use modbe_core::diagnostics::{approx_error, global_xi};
use modbe_core::funcclass::{empirical_sq_loss, FunctionClass, NestedSequence, QFunction, Ridge, Sample, TableFeatures};
use modbe_core::mdp::{DataDistribution, Policy, QTable, TabularMdp};
use modbe_core::modbe::{modbe, validation_loss, ScheduleMode, TestOutcome};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn random_simplex(rng: &mut ChaCha8Rng, len: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| if sparse && rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&v| v == 0.0) {
        w[rng.random_range(0..len)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn random_mdp(seed: u64, s: usize, na: usize, h: usize) -> TabularMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::new();
    for _ in 0..h * s * na {
        transitions.extend(random_simplex(&mut rng, s, true));
    }
    let rewards = (0..s * na).map(|_| rng.random::<f64>()).collect();
    let initial = random_simplex(&mut rng, s, false);
    TabularMdp::new(s, na, h, transitions, rewards, initial).unwrap()
}

fn random_mu(seed: u64, s: usize, na: usize, h: usize) -> DataDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut values = Vec::new();
    for _ in 0..h {
        values.extend(random_simplex(&mut rng, s * na, false));
    }
    DataDistribution::new(s, na, h, values).unwrap()
}

fn random_samples(seed: u64, s: usize, na: usize, n: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Sample {
            state: rng.random_range(0..s),
            action: rng.random_range(0..na),
            target: rng.random::<f64>() * 3.0,
        })
        .collect()
}

fn finite_members(seed: u64, s: usize, na: usize, count: usize) -> Vec<QTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![QTable::zeros(s, na)];
    while out.len() < count {
        out.push(QTable::from_fn(s, na, |_, _| (rng.random_range(0..=32) as f64) / 16.0));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn finite_erm_is_a_minimizer(seed in any::<u64>(), s in 1usize..5, na in 1usize..4, count in 1usize..12, n in 1usize..40) {
        let members = finite_members(seed, s, na, count);
        let class = FunctionClass::finite(members.clone(), Some(2.0)).unwrap();
        let samples = random_samples(seed.wrapping_add(1), s, na, n);
        let best = empirical_sq_loss(&class.erm(&samples).unwrap(), &samples).unwrap();
        for m in members {
            let loss = empirical_sq_loss(&QFunction::from_table(m, Some(2.0)), &samples).unwrap();
            prop_assert!(best <= loss);
        }
    }

    #[test]
    fn abstraction_erm_beats_grid_members(seed in any::<u64>(), s in 1usize..6, na in 1usize..3, n in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<usize> = (0..s).map(|x| x % 2).collect();
        let class = FunctionClass::abstraction(blocks.clone(), na, Some(2.0)).unwrap();
        let samples = random_samples(seed.wrapping_add(7), s, na, n);
        let best = empirical_sq_loss(&class.erm(&samples).unwrap(), &samples).unwrap();
        for _ in 0..20 {
            let cell: Vec<f64> = (0..2 * na).map(|_| rng.random_range(0..=32) as f64 / 16.0).collect();
            let t = QTable::from_fn(s, na, |x, a| cell[blocks[x] * na + a]);
            prop_assert!(class.contains_table(&t));
            let loss = empirical_sq_loss(&QFunction::from_table(t, Some(2.0)), &samples).unwrap();
            prop_assert!(best <= loss + 1e-12);
        }
    }

    #[test]
    fn linear_erm_is_stationary(seed in any::<u64>(), n in 8usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, na, d) = (6, 2, 4);
        let values: Vec<f64> = (0..s * na * d).map(|_| rng.random::<f64>() - 0.5).collect();
        let features = Arc::new(TableFeatures::new(s, na, d, values).unwrap());
        let class = FunctionClass::linear(features, d, Ridge::Fixed(0.0), None).unwrap();
        let samples = random_samples(seed.wrapping_add(3), s, na, n);
        let Ok(f) = class.erm(&samples) else { return Ok(()); };
        let w = f.linear_weights().unwrap().to_vec();
        let base = empirical_sq_loss(&f, &samples).unwrap();
        for j in 0..d {
            for step in [1e-3, -1e-3] {
                let mut v = w.clone();
                v[j] += step;
                let g = QFunction::linear(match class.kind() {
                    modbe_core::funcclass::ClassKind::Linear { features, .. } => features.clone(),
                    _ => unreachable!(),
                }, v, None).unwrap();
                prop_assert!(base <= empirical_sq_loss(&g, &samples).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn larger_class_fits_no_worse(seed in any::<u64>(), s in 1usize..4, na in 1usize..3, n in 1usize..30) {
        let members = finite_members(seed, s, na, 10);
        let small = FunctionClass::finite(members[..4].to_vec(), Some(2.0)).unwrap();
        let large = FunctionClass::finite(members, Some(2.0)).unwrap();
        let samples = random_samples(seed ^ 9, s, na, n);
        let a = empirical_sq_loss(&small.erm(&samples).unwrap(), &samples).unwrap();
        let b = empirical_sq_loss(&large.erm(&samples).unwrap(), &samples).unwrap();
        prop_assert!(b <= a + 1e-9);
    }

    #[test]
    fn greedy_invariant_under_scaling_and_shift(seed in any::<u64>(), scale in 0.01f64..100.0, shift in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = QTable::from_fn(4, 3, |_, _| rng.random_range(0..8) as f64 / 8.0);
        let u = QTable::from_fn(4, 3, |x, a| t.get(x, a) * scale + shift * x as f64);
        for x in 0..4 {
            prop_assert_eq!(t.greedy_action(x), u.greedy_action(x));
        }
    }

    #[test]
    fn performance_difference_bound_holds(seed in any::<u64>(), s in 1usize..5, na in 1usize..4, h in 1usize..5) {
        let mdp = random_mdp(seed, s, na, h);
        let mu = random_mu(seed, s, na, h);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf);
        let f: Vec<QTable> = (0..h).map(|_| QTable::from_fn(s, na, |_, _| rng.random::<f64>() * h as f64)).collect();
        let pi = mdp.greedy_policy(&f).unwrap();
        let regret = mdp.regret(&pi).unwrap();
        prop_assert!(regret <= mdp.perf_diff_bound(&mu, &f).unwrap() + 1e-12);
    }

    #[test]
    fn occupancy_sums_to_one(seed in any::<u64>(), s in 1usize..5, na in 1usize..4, h in 1usize..5) {
        let mdp = random_mdp(seed, s, na, h);
        let pi = Policy::uniform(s, na, h).mix_uniform(0.3).unwrap();
        let occ = mdp.occupancy(&pi).unwrap();
        for step in 0..h {
            let total: f64 = occ.step(step).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn later_fits_ignore_earlier_slots(seed in any::<u64>(), rot in 1usize..20) {
        let mdp = random_mdp(seed, 3, 2, 3);
        let mu = DataDistribution::uniform(3, 2, 3);
        let data = generate_from_mu(&mdp, &mu, 40, seed).unwrap();
        let class = FunctionClass::tabular(3, 2, Some(3.0)).unwrap();
        let reference = fqi(&data, &class).unwrap();
        for h in 0..3 {
            let mut slots = data.slots().to_vec();
            slots[h].rotate_left(rot);
            // corrupt the slot's rewards as well: later steps must not notice
            for t in &mut slots[h] {
                t.reward = 1.0 - t.reward;
            }
            let other = fqi(&OfflineDataset::new(slots, DatasetMeta::default()).unwrap(), &class).unwrap();
            for later in h + 1..3 {
                prop_assert_eq!(reference.get(later), other.get(later));
            }
        }
    }

    #[test]
    fn completeness_errors_are_ordered(seed in any::<u64>(), s in 1usize..4, na in 1usize..3) {
        let mdp = random_mdp(seed, s, na, 2);
        let mu = random_mu(seed, s, na, 2);
        let members = finite_members(seed ^ 0xabc, s, na, 7);
        let classes = NestedSequence::new(vec![
            FunctionClass::finite(members[..2].to_vec(), Some(2.0)).unwrap(),
            FunctionClass::finite(members[..4].to_vec(), Some(2.0)).unwrap(),
            FunctionClass::finite(members, Some(2.0)).unwrap(),
        ]).unwrap();
        let mut previous = f64::INFINITY;
        for k in 0..3 {
            let approx = approx_error(classes.get(k), &mdp, &mu).unwrap();
            let xi = global_xi(&classes, k, &mdp, &mu).unwrap();
            prop_assert!(approx >= 0.0);
            prop_assert!(xi >= approx);
            prop_assert!(xi <= previous);
            previous = xi;
        }
    }

    #[test]
    fn selection_invariants(seed in any::<u64>(), n in 5usize..80, tol in prop_oneof![Just(0.0), 0.0f64..0.2]) {
        let mdp = random_mdp(seed, 3, 2, 2);
        let data = generate_from_mu(&mdp, &random_mu(seed, 3, 2, 2), n, seed).unwrap();
        let classes = NestedSequence::new(vec![
            FunctionClass::finite(vec![QTable::zeros(3, 2)], Some(2.0)).unwrap(),
            FunctionClass::abstraction(vec![0, 0, 0], 2, Some(2.0)).unwrap(),
            FunctionClass::abstraction(vec![0, 1, 1], 2, Some(2.0)).unwrap(),
            FunctionClass::tabular(3, 2, Some(2.0)).unwrap(),
        ]).unwrap();
        let (m, horizon) = (classes.len(), 2);
        for mode in [ScheduleMode::Constant(tol), ScheduleMode::Practical, ScheduleMode::Theoretical] {
            let trace = modbe(&data, &Fqi, &classes, 0.1, mode, seed).unwrap();
            prop_assert!(trace.selected < m);
            prop_assert!(trace.erm_calls <= horizon * m * m);
            prop_assert!(trace.base_calls <= trace.visited.len() + 1);
            prop_assert!(trace.base_calls <= m + 1);
            // k only grows, by one, and only after a rejection
            for w in trace.events.windows(2) {
                prop_assert!(w[0].k <= w[1].k);
                if w[1].k == w[0].k + 1 {
                    let rejected = trace.events.iter().any(|e| e.k == w[0].k && e.outcome == TestOutcome::Reject);
                    prop_assert!(rejected);
                }
            }
            let rejected_classes = trace.visited.iter().filter(|&&k| k != trace.selected).count();
            let visited_rejections: usize = trace.visited.iter().map(|&k| {
                let ks: Vec<_> = trace.events.iter().filter(|e| e.k == k).collect();
                let last_kp = ks.last().map(|e| e.k_prime);
                usize::from(ks.iter().any(|e| Some(e.k_prime) == last_kp && e.outcome == TestOutcome::Reject))
            }).sum();
            prop_assert_eq!(rejected_classes, visited_rejections);
            prop_assert_eq!(trace.selected, trace.visited.len() - usize::from(!trace.final_rerun));
            let again = modbe(&data, &Fqi, &classes, 0.1, mode, seed).unwrap();
            prop_assert_eq!(&trace, &again);
        }
    }
}

#[test]
fn omega_is_monotone_along_nesting() {
    let members = finite_members(1, 2, 2, 64);
    let mut last = 0.0;
    for size in [1, 2, 4, 8, 16, 64] {
        let class = FunctionClass::finite(members[..size].to_vec(), None).unwrap();
        let w = omega_fqi(500, 0.1, 3, &class).unwrap();
        assert!(w >= last);
        last = w;
    }
}

#[test]
fn occupancy_and_value_match_rollouts() {
    let mdp = random_mdp(42, 3, 2, 3);
    let pi = Policy::uniform(3, 2, 3).mix_uniform(0.5).unwrap();
    let occ = mdp.occupancy(&pi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let runs = 200_000;
    let mut counts = vec![0.0; 3 * 3 * 2];
    let mut total = 0.0;
    for _ in 0..runs {
        let mut x = sample(&mut rng, mdp.initial());
        for h in 0..3 {
            let a = sample(&mut rng, pi.probs(h, x));
            counts[(h * 3 + x) * 2 + a] += 1.0;
            total += mdp.reward(x, a);
            x = sample(&mut rng, mdp.transition_row(h, x, a));
        }
    }
    for h in 0..3 {
        for x in 0..3 {
            for a in 0..2 {
                let p = occ.get(h, x, a);
                let freq = counts[(h * 3 + x) * 2 + a] / runs as f64;
                let se = (p * (1.0 - p) / runs as f64).sqrt();
                assert!((freq - p).abs() <= 4.0 * se + 1e-12, "({h},{x},{a}): {freq} vs {p}");
            }
        }
    }
    let value = mdp.policy_value(&pi).unwrap();
    // returns lie in [0, 3]
    assert!((total / runs as f64 - value).abs() < 4.0 * 1.5 / (runs as f64).sqrt());
}

fn sample(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap()
}

#[test]
fn validation_loss_has_double_sampling_bias() {
    // E[L] = ||f - T* f_next||^2_mu + E_mu[Var_{x'} f_next(x')]
    let kernel = [0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9];
    let mdp = TabularMdp::stationary(2, 2, 2, &kernel, vec![0.2, 0.6, 0.8, 0.1], vec![0.5, 0.5]).unwrap();
    let mu = DataDistribution::new(2, 2, 2, vec![0.1, 0.2, 0.3, 0.4, 0.25, 0.25, 0.25, 0.25]).unwrap();
    let f = QTable::from_values(2, 2, vec![0.5, 1.0, 0.25, 0.75]).unwrap();
    let f_next = QTable::from_values(2, 2, vec![0.0, 1.5, 0.5, 0.25]).unwrap();
    let next_values = f_next.state_values();
    let h = 0;
    let bias: f64 = (0..2)
        .flat_map(|x| (0..2).map(move |a| (x, a)))
        .map(|(x, a)| {
            let row = mdp.transition_row(h, x, a);
            let mean: f64 = row.iter().zip(&next_values).map(|(p, v)| p * v).sum();
            let var: f64 = row.iter().zip(&next_values).map(|(p, v)| p * (v - mean) * (v - mean)).sum();
            mu.get(h, x, a) * var
        })
        .sum();
    let expected = mdp.bellman_error_sq(&mu, h, &f, Some(&f_next)).unwrap() + bias;
    let fq = QFunction::from_table(f, Some(2.0));
    let fq_next = QFunction::from_table(f_next, Some(2.0));
    let reps = 2000;
    let losses: Vec<f64> = (0..reps)
        .map(|seed| {
            let data = generate_from_mu(&mdp, &mu, 50, seed).unwrap();
            validation_loss(&fq, Some(&fq_next), data.slot(h), 2.0).unwrap()
        })
        .collect();
    let mean = losses.iter().sum::<f64>() / reps as f64;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
    assert!(losses.iter().all(|&l| (0.0..=9.0).contains(&l)));
}

#[test]
fn fqi_bellman_error_shrinks_with_n() {
    let mdp = random_mdp(7, 3, 2, 3);
    let mu = DataDistribution::uniform(3, 2, 3);
    let class = FunctionClass::tabular(3, 2, Some(3.0)).unwrap();
    let mut means = Vec::new();
    for n in [100, 1000, 10_000] {
        let mut total = 0.0;
        for seed in 0..20 {
            let tables = fqi(&generate_from_mu(&mdp, &mu, n, seed).unwrap(), &class).unwrap().to_tables();
            let worst = (0..3)
                .map(|h| mdp.bellman_error_sq(&mu, h, &tables[h], tables.get(h + 1)).unwrap())
                .fold(0.0, f64::max);
            total += worst;
        }
        means.push(total / 20.0);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn oracle_and_complete_class_agree() {
    for seed in 0..10 {
        let mdp = random_mdp(seed, 4, 3, 4);
        let mu = random_mu(seed, 4, 3, 4);
        let class = FunctionClass::tabular(4, 3, Some(4.0)).unwrap();
        let tables = fqi_oracle(&mdp, &mu, &class).unwrap().to_tables();
        for (f, q) in tables.iter().zip(mdp.optimal_q()) {
            assert!(f.max_abs_diff(&q) < 1e-9);
        }
    }
}

#[test]
fn zero_rewards_never_reject() {
    let kernel = [0.3, 0.7, 0.6, 0.4, 0.5, 0.5, 0.1, 0.9];
    let mdp = TabularMdp::stationary(2, 2, 2, &kernel, vec![0.0; 4], vec![0.5, 0.5]).unwrap();
    let mu = DataDistribution::uniform(2, 2, 2);
    let classes = NestedSequence::new(vec![
        FunctionClass::abstraction(vec![0, 0], 2, Some(2.0)).unwrap(),
        FunctionClass::tabular(2, 2, Some(2.0)).unwrap(),
    ])
    .unwrap();
    let mut rejections = 0;
    for seed in 0..50 {
        let data = generate_from_mu(&mdp, &mu, 200, seed).unwrap();
        let trace = modbe(&data, &Fqi, &classes, 0.1, ScheduleMode::Practical, seed).unwrap();
        rejections += usize::from(trace.rejections() > 0);
    }
    assert!(rejections <= 5, "{rejections}");
}

#[test]
fn transitions_of_generated_data_are_consistent() {
    let mdp = random_mdp(3, 3, 2, 2);
    let data = generate_from_mu(&mdp, &random_mu(3, 3, 2, 2), 500, 1).unwrap();
    data.check_against(&mdp).unwrap();
    let t: &Transition = &data.slot(1)[0];
    assert_eq!(t.step, 1);
}
