//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use ::modbe::eval::cb::{run_cb_experiment, CbInstance};
use ::modbe::eval::config::{ExperimentConfig, Method, MethodSpec};
use ::modbe::eval::instances::{chain, finite_absorbing, random_mdp, random_mu, variance_bias, RlInstance};
use ::modbe::eval::results::{format_results, summarize, ResultRow};
use ::modbe::eval::rl::run_rl_experiment;
use ::modbe::io::trace::format_trace;
use modbe_core::baselines::holdout_select;
use modbe_core::modbe::{zeta, ToleranceSchedule};
use modbe_core::{
    fqi, fqi_oracle, generate_from_mu, modbe, omega_fqi, Fqi, FunctionClass, NestedSequence, Policy, QTable, ScheduleMode,
    SelectionTrace, TabularMdp,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Every deterministic Markov policy `[h][x] -> a`, in lexicographic order.
fn for_each_policy(mdp: &TabularMdp, mut visit: impl FnMut(&Policy)) {
    let (s, na, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut actions = vec![0usize; s * h];
    loop {
        visit(&Policy::deterministic(s, na, h, &actions).unwrap());
        let mut i = 0;
        while i < actions.len() {
            actions[i] += 1;
            if actions[i] < na {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
        if i == actions.len() {
            return;
        }
    }
}

/// Policies are enumerated exhaustively, so instance sizes are drawn until
/// `A^(S H)` is at most this many.
const MAX_ENUMERATED_POLICIES: usize = 60_000;

fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    loop {
        let dims = (rng.random_range(1..=5), rng.random_range(1..=3), rng.random_range(1..=4));
        if (dims.1 as f64).powi((dims.0 * dims.2) as i32) <= MAX_ENUMERATED_POLICIES as f64 {
            return dims;
        }
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_value, mut worst_conc) = (0.0f64, 0.0f64);
    let mut policies = 0usize;
    for i in 0..200 {
        let (s, na, h) = random_dims(&mut rng);
        let mdp = random_mdp(1000 + i, s, na, h);
        let mu = random_mu(2000 + i, s, na, h);
        let greedy = mdp.greedy_policy(&mdp.optimal_q()).unwrap();
        let dp_value = mdp.policy_value(&greedy).unwrap();
        let mut best_value = f64::NEG_INFINITY;
        let mut best_conc = 0.0f64;
        for_each_policy(&mdp, |pi| {
            policies += 1;
            best_value = best_value.max(mdp.policy_value(pi).unwrap());
            let occ = mdp.occupancy(pi).unwrap();
            for step in 0..h {
                for x in 0..s {
                    for a in 0..na {
                        best_conc = best_conc.max(occ.get(step, x, a) / mu.get(step, x, a));
                    }
                }
            }
        });
        worst_value = worst_value.max((dp_value - best_value).abs());
        let conc = mdp.concentrability(&mu).unwrap();
        worst_conc = worst_conc.max((conc - best_conc).abs() / best_conc);
    }
    let elapsed = start.elapsed();
    let pass = worst_value <= 1e-9 && worst_conc <= 1e-12 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "200 MDPs, {policies} policies: max |V_dp - V_enum| = {worst_value:.2e} (<= 1e-9), \
             max relative concentrability gap = {worst_conc:.2e} (<= 1e-12), {:.1}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for i in 0..100 {
        let (s, na, h) = (rng.random_range(1..=5), rng.random_range(1..=3), rng.random_range(1..=4));
        let mdp = random_mdp(3000 + i, s, na, h);
        let mu = random_mu(4000 + i, s, na, h);
        let tables: Vec<QTable> = (0..h)
            .map(|_| QTable::from_fn(s, na, |_, _| rng.random::<f64>() * h as f64))
            .collect();
        let regret = mdp.regret(&mdp.greedy_policy(&tables).unwrap()).unwrap();
        let bound = mdp.perf_diff_bound(&mu, &tables).unwrap();
        if regret > bound {
            violations += 1;
        }
        tightest = tightest.min(bound - regret);
    }
    outcome(violations == 0, format!("{violations} violations in 100 triples, smallest slack {tightest:.3e}"))
}

fn max_q_error(mdp: &TabularMdp, f: &[QTable]) -> f64 {
    mdp.optimal_q().iter().zip(f).map(|(q, t)| q.max_abs_diff(t)).fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let inst = chain(4);
    let horizon = 4.0;
    let mean_error = |n: usize| {
        let total: f64 = (0..20)
            .map(|seed| {
                let data = generate_from_mu(&inst.mdp, &inst.mu, n, seed).unwrap();
                max_q_error(&inst.mdp, &fqi(&data, inst.classes.last()).unwrap().to_tables())
            })
            .sum();
        total / 20.0
    };
    let (small, large) = (mean_error(100), mean_error(10_000));
    let oracle = fqi_oracle(&inst.mdp, &inst.mu, inst.classes.last()).unwrap();
    let oracle_error = max_q_error(&inst.mdp, &oracle.to_tables());
    let pass = large < 0.05 * horizon && large < small && oracle_error <= 1e-9;
    outcome(
        pass,
        format!(
            "mean max-step sup error {large:.4} at n=1e4 (< {:.2}), {small:.4} at n=1e2; oracle error {oracle_error:.1e} (<= 1e-9)",
            0.05 * horizon
        ),
    )
}

fn check_budget(trace: &SelectionTrace, horizon: usize, budget: &mut (usize, usize)) {
    let m = trace.num_classes;
    budget.0 += 1;
    if trace.base_calls > trace.visited.len() + 1 || trace.erm_calls > horizon * m * m {
        budget.1 += 1;
    }
}

fn criterion_4(budget: &mut (usize, usize)) -> Outcome {
    let inst = finite_absorbing();
    let mut within = 0;
    for seed in 0..50 {
        let data = generate_from_mu(&inst.mdp, &inst.mu, 1000, seed).unwrap();
        let trace = modbe(&data, &Fqi, &inst.classes, 0.1, ScheduleMode::Theoretical, seed).unwrap();
        check_budget(&trace, 2, budget);
        if trace.selected <= 1 {
            within += 1;
        }
    }
    outcome(within >= 48, format!("selected k <= 2 in {within}/50 runs (>= 48)"))
}

fn rl_config(n_list: Vec<usize>, seeds: std::ops::Range<u64>) -> ExperimentConfig {
    ExperimentConfig {
        n_list,
        seeds: seeds.collect(),
        schedule: ScheduleMode::Practical,
        ..ExperimentConfig::default()
    }
}

fn criterion_5(budget: &mut (usize, usize)) -> Outcome {
    let start = Instant::now();
    let inst = chain(4);
    let config = rl_config(vec![100, 1000, 10_000], 0..20);
    let rows = run_rl_experiment(&config, &inst, 1).unwrap();
    let elapsed = start.elapsed();
    let stats = summarize(&rows);
    let mut pass = elapsed < Duration::from_secs(300);
    let mut parts = Vec::new();
    for n in [100, 1000, 10_000] {
        let modbe_mean = stats[&(n, Method::Modbe)].mean;
        let best_fixed = (0..inst.classes.len())
            .map(|k| stats[&(n, Method::Fixed(k))].mean)
            .fold(f64::INFINITY, f64::min);
        let limit = 1.5 * best_fixed + 0.05 * 4.0;
        pass &= modbe_mean <= limit;
        parts.push(format!("n={n}: {modbe_mean:.4} <= {limit:.4}"));
    }
    for seed in 0..20 {
        for n in [100, 1000, 10_000] {
            let data = generate_from_mu(&inst.mdp, &inst.mu, n, seed).unwrap();
            let trace = modbe(&data, &Fqi, &inst.classes, 0.1, ScheduleMode::Practical, seed).unwrap();
            check_budget(&trace, 4, budget);
        }
    }
    outcome(pass, format!("mean modbe regret {}; {:.1}s (< 300s)", parts.join(", "), elapsed.as_secs_f64()))
}

fn cb_mean(rows: &[ResultRow], n: usize, method: Method) -> f64 {
    summarize(rows)[&(n, method)].mean
}

fn criterion_6() -> (Outcome, Vec<ResultRow>) {
    let start = Instant::now();
    let instance = Arc::new(CbInstance::standard(0));
    let config = ExperimentConfig {
        instance: "cb".into(),
        n_list: vec![200, 500, 1000, 2000, 5000],
        seeds: (0..10).collect(),
        methods: vec![
            MethodSpec::One(Method::Modbe),
            MethodSpec::One(Method::Holdout),
            MethodSpec::One(Method::Oracle),
            MethodSpec::AllFixed,
        ],
        schedule: ScheduleMode::Practical,
        ..ExperimentConfig::default()
    };
    let rows = run_cb_experiment(&config, &instance, 1).unwrap().rows;
    let elapsed = start.elapsed();
    let curve: Vec<f64> = config.n_list.iter().map(|&n| cb_mean(&rows, n, Method::Modbe)).collect();
    let monotone = curve.windows(2).all(|w| w[1] <= w[0]);
    let (modbe_5k, oracle_5k, fixed15_5k) = (
        cb_mean(&rows, 5000, Method::Modbe),
        cb_mean(&rows, 5000, Method::Oracle),
        cb_mean(&rows, 5000, Method::Fixed(0)),
    );
    let b = modbe_5k <= 2.0 * oracle_5k;
    let c = fixed15_5k >= 1.5 * modbe_5k;
    let pass = monotone && b && c && elapsed < Duration::from_secs(600);
    let curve_text: Vec<String> = curve.iter().map(|v| format!("{v:.4}")).collect();
    (
        outcome(
            pass,
            format!(
                "(a) modbe curve [{}] non-increasing: {monotone}; (b) {modbe_5k:.4} <= 2 x oracle {oracle_5k:.4}: {b}; \
                 (c) fixed-15 {fixed15_5k:.4} >= 1.5 x modbe: {c}; {:.1}s (< 600s)",
                curve_text.join(", "),
                elapsed.as_secs_f64()
            ),
        ),
        rows,
    )
}

fn criterion_7(budget: &mut (usize, usize)) -> Outcome {
    let inst = variance_bias();
    // The one-block class has the larger true Bellman error.
    let biased = 0;
    let (mut holdout_hits, mut modbe_hits) = (0, 0);
    for seed in 0..20 {
        let data = generate_from_mu(&inst.mdp, &inst.mu, 1000, seed).unwrap();
        if holdout_select(&data, &Fqi, &inst.classes, 0.1, seed).unwrap().selected == biased {
            holdout_hits += 1;
        }
        let trace = modbe(&data, &Fqi, &inst.classes, 0.1, ScheduleMode::Practical, seed).unwrap();
        check_budget(&trace, 2, budget);
        if trace.selected == biased {
            modbe_hits += 1;
        }
    }
    outcome(
        holdout_hits >= 14 && modbe_hits <= 6,
        format!("hold-out picks the biased class in {holdout_hits}/20 (>= 14), modbe in {modbe_hits}/20 (<= 6)"),
    )
}

/// Finite classes of the given sizes over one state-action pair, nested by
/// prefix.
fn finite_sequence(sizes: &[usize]) -> NestedSequence {
    let members = |m: usize| (0..m).map(|i| QTable::constant(1, 1, i as f64 / 64.0)).collect();
    NestedSequence::new(sizes.iter().map(|&m| FunctionClass::finite(members(m), None).unwrap()).collect()).unwrap()
}

fn criterion_8() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs();
    let mut failures = Vec::new();
    let mut cases = 0;
    let omega_cases = [
        (1000, 2, 8, 0.1, 6.2782100299788866),
        (2000, 2, 8, 0.1, 3.1391050149894433),
        (100, 1, 1, 0.3, 7.953123053131435),
        (500, 3, 16, 0.05, 34.70227922412599),
        (10000, 4, 1024, 0.01, 5.022568023983109),
        (50, 2, 2, 0.2, 92.29313593270035),
        (1234, 5, 3, 0.001, 50.19608671930361),
        (800, 2, 16, 0.03125, 9.704060527839234),
    ];
    for (n, h, size, delta, expected) in omega_cases {
        cases += 1;
        let class = finite_sequence(&[size]).last().clone();
        let got = omega_fqi(n, delta, h, &class).unwrap();
        if !close(got, expected) {
            failures.push(format!("omega({n}, {h}, {size}, {delta}) = {got} != {expected}"));
        }
    }
    let zeta_cases = [
        (2, 2, 0.25, 100, 23.95516656015171),
        (2, 2, 0.25, 200, 11.977583280075855),
        (1, 1, 0.1, 50, 9.744333725248946),
        (3, 5, 0.01, 1000, 10.104693426804255),
        (4, 10, 0.3, 20, 765.5444024581402),
        (2, 3, 0.25, 100, 27.069138590422412),
    ];
    for (h, m, delta, n_valid, expected) in zeta_cases {
        cases += 1;
        let got = zeta(h, m, delta, n_valid).unwrap();
        if !close(got, expected) {
            failures.push(format!("zeta({h}, {m}, {delta}, {n_valid}) = {got} != {expected}"));
        }
    }
    let tol_cases: [(usize, usize, usize, &[usize], f64, [f64; 3]); 6] = [
        (800, 200, 2, &[4, 16], 0.25, [9.704060527839234, 11.977583280075855, 51.68105378254952]),
        (400, 100, 1, &[1, 2, 8], 0.1, [4.819761003350831, 6.981502456867244, 27.382567152947065]),
        (4000, 1000, 3, &[2, 32, 64], 0.05, [6.0798253579243, 7.83143239259356, 32.34275970270014]),
        (80, 20, 2, &[1, 3], 0.3, [78.47762537473608, 116.27525891031462, 456.99727105815634]),
        (8000, 2000, 4, &[16, 256], 0.01, [6.555468902202864, 7.795466980199158, 34.148305178110995]),
        (1600, 400, 2, &[8, 8, 64], 0.2, [5.8594817741907494, 6.981502456867244, 30.50172946546682]),
    ];
    for (n_train, n_valid, h, sizes, delta, [alpha, z, tol]) in tol_cases {
        cases += 1;
        let classes = finite_sequence(sizes);
        let m = classes.len();
        let omega = classes
            .classes()
            .iter()
            .map(|c| omega_fqi(n_train, delta / (4.0 * m as f64), h, c).unwrap())
            .collect();
        let schedule =
            ToleranceSchedule::new(ScheduleMode::Theoretical, &classes, omega, delta, h, n_train + n_valid, n_train, n_valid).unwrap();
        let got = [schedule.alpha(m - 1), schedule.zeta(), schedule.tol(0, m - 1)];
        if !(close(got[0], alpha) && close(got[1], z) && close(got[2], tol)) {
            failures.push(format!("schedule {sizes:?}: {got:?} != {:?}", [alpha, z, tol]));
        }
    }
    let detail = if failures.is_empty() {
        format!("{cases} cases agree to a relative 1e-6")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn criterion_9(budget: (usize, usize), cb_rows: &[ResultRow]) -> Outcome {
    let inst: RlInstance = chain(3);
    let config = rl_config(vec![50, 400], 0..6);
    let one = format_results(&run_rl_experiment(&config, &inst, 1).unwrap());
    let eight = format_results(&run_rl_experiment(&config, &inst, 8).unwrap());
    let rl_same = one == eight;

    let instance = Arc::new(CbInstance::standard(0));
    let cb_config = ExperimentConfig {
        instance: "cb".into(),
        n_list: vec![200, 5000],
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let cb8 = run_cb_experiment(&cb_config, &instance, 8).unwrap().rows;
    let expected: Vec<ResultRow> = cb_rows
        .iter()
        .filter(|r| cb_config.n_list.contains(&r.n) && cb_config.seeds.contains(&r.seed))
        .cloned()
        .collect();
    let cb_same = format_results(&cb8) == format_results(&expected);

    let data = generate_from_mu(&inst.mdp, &inst.mu, 500, 11).unwrap();
    let trace = || format_trace(&modbe(&data, &Fqi, &inst.classes, 0.1, ScheduleMode::Constant(0.0), 5).unwrap());
    let trace_same = trace() == trace();

    let (runs, over) = budget;
    let pass = over == 0 && rl_same && cb_same && trace_same;
    outcome(
        pass,
        format!(
            "budget exceeded in {over}/{runs} runs; 1 vs 8 jobs identical: tabular {rl_same}, bandit {cb_same}; repeated trace identical: {trace_same}"
        ),
    )
}

fn main() {
    let mut budget = (0, 0);
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    results.push((1, criterion_1()));
    results.push((2, criterion_2()));
    results.push((3, criterion_3()));
    results.push((4, criterion_4(&mut budget)));
    results.push((5, criterion_5(&mut budget)));
    let (c6, cb_rows) = criterion_6();
    results.push((6, c6));
    results.push((7, criterion_7(&mut budget)));
    results.push((8, criterion_8()));
    results.push((9, criterion_9(budget, &cb_rows)));
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (i, o) in &results {
        println!("criterion {i}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
