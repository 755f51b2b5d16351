//! Completeness errors computed from the true model.
//!
//! `Approx(F) = max_{h, f' in F} min_{f in F} ||f - T*_h f'||^2_{mu_h}` and
//! the global variant `xi_k` (outer max over `F_M`, inner min over `F_k`).
//!
//! The backup `T*_h f'` only depends on `f'` through its next-state value
//! profile `v(x') = max_a f'(x', a)`, so the outer max runs over profiles:
//!
//! * finite classes contribute their members' profiles;
//! * for a bounded abstraction outer class paired with an abstraction inner
//!   class the error is convex in `v`, so the box corners `{0, bound}^blocks`
//!   give the exact maximum;
//! * a bounded abstraction outer class paired with a finite inner class is
//!   scanned on the `1/16` grid, plus the profiles of every finite member;
//! * linear classes, unbounded abstractions with a finite inner class and
//!   grids larger than [`MAX_PROFILES`] are not computable (`None`).

use alloc::vec;
use alloc::vec::Vec;

use crate::funcclass::{ClassKind, FunctionClass, NestedSequence, ABSTRACTION_QUANTUM};
use crate::mdp::{DataDistribution, QTable, TabularMdp};

/// Largest number of next-value profiles enumerated.
pub const MAX_PROFILES: usize = 200_000;

/// Values at or below this count as zero when deciding completeness.
pub const COMPLETE_TOL: f64 = 1e-12;

fn profile(table: &QTable) -> Vec<f64> {
    (0..table.num_states()).map(|x| table.max_value(x)).collect()
}

fn block_profile(blocks: &[usize], values: &[f64]) -> Vec<f64> {
    blocks.iter().map(|&b| values[b]).collect()
}

/// Every vector in `levels^count`, or `None` past the cap.
fn grid(count: usize, levels: &[f64]) -> Option<Vec<Vec<f64>>> {
    let total = libm::pow(levels.len() as f64, count as f64);
    if total > MAX_PROFILES as f64 {
        return None;
    }
    let mut out = vec![Vec::new()];
    for _ in 0..count {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                levels.iter().map(move |&l| {
                    let mut p = prefix.clone();
                    p.push(l);
                    p
                })
            })
            .collect();
    }
    Some(out)
}

/// `min_{f in inner} sum_{x,a} w(x,a) (f(x,a) - target(x,a))^2`.
fn projection_error(inner: &FunctionClass, target: &QTable, weights: &[f64]) -> Option<f64> {
    let na = target.num_actions();
    match inner.kind() {
        ClassKind::Finite { members } => Some(
            members
                .iter()
                .map(|m| {
                    m.values()
                        .iter()
                        .zip(target.values())
                        .zip(weights)
                        .map(|((f, t), w)| w * (f - t) * (f - t))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
        ),
        ClassKind::Abstraction { blocks, num_blocks } => {
            let mut sums = vec![0.0; num_blocks * na];
            let mut mass = vec![0.0; num_blocks * na];
            for (i, (&t, &w)) in target.values().iter().zip(weights).enumerate() {
                let cell = blocks[i / na] * na + i % na;
                sums[cell] += w * t;
                mass[cell] += w;
            }
            let fit: Vec<f64> = sums
                .iter()
                .zip(&mass)
                .map(|(&s, &m)| {
                    let mean = if m > 0.0 { s / m } else { 0.0 };
                    match inner.bound() {
                        Some(b) => mean.clamp(0.0, b),
                        None => mean,
                    }
                })
                .collect();
            Some(
                target
                    .values()
                    .iter()
                    .zip(weights)
                    .enumerate()
                    .map(|(i, (&t, &w))| {
                        let f = fit[blocks[i / na] * na + i % na];
                        w * (f - t) * (f - t)
                    })
                    .sum(),
            )
        }
        ClassKind::Linear { .. } => None,
    }
}

enum Profiles {
    List(Vec<Vec<f64>>),
    /// Error is unbounded unless the backup's dependence on the profile is
    /// always projected away.
    Unbounded { blocks: Vec<usize>, num_blocks: usize },
}

fn outer_profiles(outer: &FunctionClass, inner: &FunctionClass, extra: &[&FunctionClass]) -> Option<Profiles> {
    match outer.kind() {
        ClassKind::Finite { members } => Some(Profiles::List(members.iter().map(profile).collect())),
        ClassKind::Linear { .. } => None,
        ClassKind::Abstraction { blocks, num_blocks } => match (inner.kind(), outer.bound()) {
            (ClassKind::Linear { .. }, _) => None,
            (ClassKind::Abstraction { .. }, Some(b)) => {
                let corners = grid(*num_blocks, &[0.0, b])?;
                Some(Profiles::List(corners.iter().map(|c| block_profile(blocks, c)).collect()))
            }
            (ClassKind::Abstraction { .. }, None) => Some(Profiles::Unbounded {
                blocks: blocks.to_vec(),
                num_blocks: *num_blocks,
            }),
            (ClassKind::Finite { .. }, None) => None,
            (ClassKind::Finite { .. }, Some(b)) => {
                let steps = libm::floor(b / ABSTRACTION_QUANTUM) as usize;
                let mut levels: Vec<f64> = (0..=steps).map(|i| i as f64 * ABSTRACTION_QUANTUM).collect();
                if levels.last() != Some(&b) {
                    levels.push(b);
                }
                let mut list: Vec<Vec<f64>> =
                    grid(*num_blocks, &levels)?.iter().map(|c| block_profile(blocks, c)).collect();
                for class in extra {
                    if let ClassKind::Finite { members } = class.kind() {
                        list.extend(members.iter().map(profile));
                    }
                }
                Some(Profiles::List(list))
            }
        },
    }
}

fn completeness_error(
    outer: &FunctionClass,
    inner: &FunctionClass,
    extra: &[&FunctionClass],
    mdp: &TabularMdp,
    mu: &DataDistribution,
) -> Option<f64> {
    if mdp.check_distribution_shape(mu).is_err()
        || inner.num_states() != mdp.num_states()
        || inner.num_actions() != mdp.num_actions()
        || outer.num_states() != mdp.num_states()
    {
        return None;
    }
    let s = mdp.num_states();
    let mut worst = 0.0f64;
    match outer_profiles(outer, inner, extra)? {
        Profiles::List(list) => {
            for h in 0..mdp.horizon() {
                for v in &list {
                    let target = mdp.backup_values(h, v).ok()?;
                    worst = worst.max(projection_error(inner, &target, mu.step(h))?);
                }
            }
        }
        Profiles::Unbounded { blocks, num_blocks } => {
            for h in 0..mdp.horizon() {
                let zero = mdp.backup_values(h, &vec![0.0; s]).ok()?;
                worst = worst.max(projection_error(inner, &zero, mu.step(h))?);
                for b in 0..num_blocks {
                    // the backup's reward part cancels in the difference
                    let indicator: Vec<f64> = blocks.iter().map(|&x| if x == b { 1.0 } else { 0.0 }).collect();
                    let with = mdp.backup_values(h, &indicator).ok()?;
                    let slope = QTable::from_fn(s, mdp.num_actions(), |x, a| with.get(x, a) - zero.get(x, a));
                    if projection_error(inner, &slope, mu.step(h))? > COMPLETE_TOL {
                        return Some(f64::INFINITY);
                    }
                }
            }
        }
    }
    Some(worst)
}

/// `Approx(F)` for one class, `None` when not computable.
pub fn approx_error(class: &FunctionClass, mdp: &TabularMdp, mu: &DataDistribution) -> Option<f64> {
    completeness_error(class, class, &[class], mdp, mu)
}

/// `xi_k` for zero-based `k`, `None` when not computable.
pub fn global_xi(classes: &NestedSequence, k: usize, mdp: &TabularMdp, mu: &DataDistribution) -> Option<f64> {
    let extra: Vec<&FunctionClass> = classes.classes().iter().collect();
    completeness_error(classes.last(), classes.get(k), &extra, mdp, mu)
}

/// Smallest zero-based `k` with `Approx(F_k) <= COMPLETE_TOL`.
pub fn minimal_complete_index(classes: &NestedSequence, mdp: &TabularMdp, mu: &DataDistribution) -> Option<usize> {
    classes
        .classes()
        .iter()
        .position(|c| approx_error(c, mdp, mu).is_some_and(|e| e <= COMPLETE_TOL))
}
