//! Function classes over `(state, action)` and squared-loss ERM.
//!
//! Three variants are supported:
//!
//! * **finite**: an explicit list of tables that must contain the zero table;
//!   ERM scans every member.
//! * **abstraction**: all tables that are constant on the blocks of a state
//!   partition (one value per block and action); ERM is the per-block mean.
//! * **linear**: `w . phi(x, a)` over a prefix of a shared feature map; ERM is
//!   ridge regression.
//!
//! Evaluation has two flavours. [`QFunction::raw_value`] is the unclipped
//! prediction used in every squared loss, and [`QFunction::value`] clips to
//! `[0, bound]` for Bellman targets and policy extraction.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::mdp::{argmax_first, QTable};

/// Grid spacing used to count abstraction-class members.
pub const ABSTRACTION_QUANTUM: f64 = 1.0 / 16.0;

/// A feature map `phi: (x, a) -> R^dim` over a finite domain.
pub trait FeatureMap: Send + Sync {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn dim(&self) -> usize;

    /// Writes the first `out.len()` coordinates of `phi(x, a)`.
    fn write_features(&self, x: usize, a: usize, out: &mut [f64]);

    /// `weights . phi(x, a)[..weights.len()]`.
    fn dot(&self, x: usize, a: usize, weights: &[f64]) -> f64 {
        let mut buf = vec![0.0; weights.len()];
        self.write_features(x, a, &mut buf);
        buf.iter().zip(weights).map(|(p, w)| p * w).sum()
    }
}

/// Features stored explicitly as a `[x][a][j]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableFeatures {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TableFeatures {
    pub fn new(num_states: usize, num_actions: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions * dim {
            return Err(Error::DimensionMismatch {
                what: "feature table",
                expected: num_states * num_actions * dim,
                got: values.len(),
            });
        }
        Ok(TableFeatures {
            num_states,
            num_actions,
            dim,
            values,
        })
    }

    /// One-hot features over `(x, a)`: the full tabular class as a linear class.
    pub fn one_hot(num_states: usize, num_actions: usize) -> Self {
        let d = num_states * num_actions;
        let mut values = vec![0.0; d * d];
        for i in 0..d {
            values[i * d + i] = 1.0;
        }
        TableFeatures {
            num_states,
            num_actions,
            dim: d,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.num_actions + a) * self.dim;
        &self.values[start..start + self.dim]
    }
}

impl FeatureMap for TableFeatures {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn write_features(&self, x: usize, a: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.row(x, a)[..out.len()]);
    }

    fn dot(&self, x: usize, a: usize, weights: &[f64]) -> f64 {
        self.row(x, a).iter().zip(weights).map(|(p, w)| p * w).sum()
    }
}

/// Ridge penalty for linear ERM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `lambda = c * n` for `n` samples.
    Scaled(f64),
    /// A fixed `lambda`.
    Fixed(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Scaled(1e-6)
    }
}

impl Ridge {
    pub fn lambda(&self, n: usize) -> f64 {
        match *self {
            Ridge::Scaled(c) => c * n as f64,
            Ridge::Fixed(l) => l,
        }
    }
}

/// A regression sample `((x, a), y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: usize,
    pub action: usize,
    pub target: f64,
}

#[derive(Clone)]
enum Repr {
    Table(QTable),
    Blocks { blocks: Arc<[usize]>, values: Vec<f64> },
    Linear { features: Arc<dyn FeatureMap>, weights: Vec<f64> },
}

/// A member of some function class.
#[derive(Clone)]
pub struct QFunction {
    repr: Repr,
    num_states: usize,
    num_actions: usize,
    bound: Option<f64>,
}

impl fmt::Debug for QFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("QFunction");
        match &self.repr {
            Repr::Table(t) => d.field("table", &t.values()),
            Repr::Blocks { values, .. } => d.field("blocks", values),
            Repr::Linear { weights, .. } => d.field("weights", weights),
        };
        d.field("bound", &self.bound).finish()
    }
}

impl PartialEq for QFunction {
    fn eq(&self, other: &Self) -> bool {
        if self.bound != other.bound || self.num_states != other.num_states || self.num_actions != other.num_actions {
            return false;
        }
        match (&self.repr, &other.repr) {
            (Repr::Table(a), Repr::Table(b)) => a == b,
            (Repr::Blocks { blocks: ba, values: va }, Repr::Blocks { blocks: bb, values: vb }) => ba == bb && va == vb,
            (Repr::Linear { features: fa, weights: wa }, Repr::Linear { features: fb, weights: wb }) => {
                Arc::ptr_eq(fa, fb) && wa == wb
            }
            _ => false,
        }
    }
}

impl QFunction {
    /// The zero function.
    pub fn zero(num_states: usize, num_actions: usize) -> Self {
        QFunction::from_table(QTable::zeros(num_states, num_actions), None)
    }

    pub fn from_table(table: QTable, bound: Option<f64>) -> Self {
        QFunction {
            num_states: table.num_states(),
            num_actions: table.num_actions(),
            repr: Repr::Table(table),
            bound,
        }
    }

    /// A linear function `w . phi` over the first `weights.len()` features.
    pub fn linear(features: Arc<dyn FeatureMap>, weights: Vec<f64>, bound: Option<f64>) -> Result<Self> {
        if weights.len() > features.dim() {
            return Err(Error::DimensionMismatch {
                what: "linear weights",
                expected: features.dim(),
                got: weights.len(),
            });
        }
        Ok(QFunction {
            num_states: features.num_states(),
            num_actions: features.num_actions(),
            repr: Repr::Linear { features, weights },
            bound,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Upper clipping bound; `None` means unclipped.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    /// Linear weights, if this is a linear member.
    pub fn linear_weights(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Linear { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Unclipped prediction. Panics outside the domain.
    #[inline]
    pub fn raw_value(&self, x: usize, a: usize) -> f64 {
        assert!(x < self.num_states && a < self.num_actions, "(x, a) out of domain");
        match &self.repr {
            Repr::Table(t) => t.get(x, a),
            Repr::Blocks { blocks, values } => values[blocks[x] * self.num_actions + a],
            Repr::Linear { features, weights } => features.dot(x, a, weights),
        }
    }

    /// Prediction clipped to `[0, bound]` (unchanged when unbounded).
    #[inline]
    pub fn value(&self, x: usize, a: usize) -> f64 {
        clip(self.raw_value(x, a), self.bound)
    }

    /// Checked, clipped evaluation.
    pub fn evaluate(&self, x: usize, a: usize) -> Result<f64> {
        if x >= self.num_states || a >= self.num_actions {
            return Err(Error::OutOfDomain { state: x, action: a });
        }
        Ok(self.value(x, a))
    }

    /// `max_a f(x, a)` on clipped values.
    pub fn max_value(&self, x: usize) -> f64 {
        (0..self.num_actions).map(|a| self.value(x, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `argmax_a f(x, a)` on clipped values, lowest index on ties.
    pub fn greedy_action(&self, x: usize) -> usize {
        let values: Vec<f64> = (0..self.num_actions).map(|a| self.value(x, a)).collect();
        argmax_first(&values)
    }

    /// The clipped function as an explicit table.
    pub fn to_table(&self) -> QTable {
        QTable::from_fn(self.num_states, self.num_actions, |x, a| self.value(x, a))
    }
}

#[inline]
fn clip(v: f64, bound: Option<f64>) -> f64 {
    match bound {
        Some(b) => v.clamp(0.0, b),
        None => v,
    }
}

/// Mean squared residual `(1/n) sum (f_raw(x, a) - y)^2`.
pub fn empirical_sq_loss(f: &QFunction, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut total = 0.0;
    for s in samples {
        if s.state >= f.num_states || s.action >= f.num_actions {
            return Err(Error::OutOfDomain {
                state: s.state,
                action: s.action,
            });
        }
        let r = f.raw_value(s.state, s.action) - s.target;
        total += r * r;
    }
    Ok(total / samples.len() as f64)
}

/// Variant-specific data of a [`FunctionClass`].
#[derive(Clone)]
pub enum ClassKind {
    Finite { members: Vec<QTable> },
    Abstraction { blocks: Arc<[usize]>, num_blocks: usize },
    Linear { features: Arc<dyn FeatureMap>, dim: usize, ridge: Ridge },
}

impl fmt::Debug for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassKind::Finite { members } => f.debug_struct("Finite").field("members", &members.len()).finish(),
            ClassKind::Abstraction { blocks, num_blocks } => f
                .debug_struct("Abstraction")
                .field("blocks", blocks)
                .field("num_blocks", num_blocks)
                .finish(),
            ClassKind::Linear { dim, ridge, .. } => {
                f.debug_struct("Linear").field("dim", dim).field("ridge", ridge).finish()
            }
        }
    }
}

/// One class of a nested sequence.
#[derive(Debug, Clone)]
pub struct FunctionClass {
    kind: ClassKind,
    num_states: usize,
    num_actions: usize,
    bound: Option<f64>,
}

impl FunctionClass {
    /// A finite class. The zero table must be among the members.
    pub fn finite(members: Vec<QTable>, bound: Option<f64>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptySamples)?;
        let (s, a) = (first.num_states(), first.num_actions());
        for m in &members {
            if m.num_states() != s || m.num_actions() != a {
                return Err(Error::DimensionMismatch {
                    what: "finite class member",
                    expected: s * a,
                    got: m.num_states() * m.num_actions(),
                });
            }
            if let Some(b) = bound {
                if m.values().iter().any(|&v| !(0.0..=b).contains(&v)) {
                    return Err(Error::param("finite class", "member values must lie in [0, bound]"));
                }
            }
        }
        if !members.iter().any(|m| m.values().iter().all(|&v| v == 0.0)) {
            return Err(Error::param("finite class", "the zero function must be a member"));
        }
        Ok(FunctionClass {
            kind: ClassKind::Finite { members },
            num_states: s,
            num_actions: a,
            bound,
        })
    }

    /// Tables constant on the blocks of `blocks` (`blocks[x]` is the block of
    /// state `x`; block ids must be `0..num_blocks` with none unused).
    pub fn abstraction(blocks: Vec<usize>, num_actions: usize, bound: Option<f64>) -> Result<Self> {
        if blocks.is_empty() || num_actions == 0 {
            return Err(Error::param("abstraction", "needs at least one state and one action"));
        }
        let num_blocks = blocks.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; num_blocks];
        for &b in &blocks {
            used[b] = true;
        }
        if used.iter().any(|u| !u) {
            return Err(Error::param("abstraction", "block ids must be contiguous from 0"));
        }
        Ok(FunctionClass {
            num_states: blocks.len(),
            num_actions,
            kind: ClassKind::Abstraction {
                blocks: blocks.into(),
                num_blocks,
            },
            bound,
        })
    }

    /// The complete tabular class (every state its own block).
    pub fn tabular(num_states: usize, num_actions: usize, bound: Option<f64>) -> Result<Self> {
        FunctionClass::abstraction((0..num_states).collect(), num_actions, bound)
    }

    /// Linear functions over the first `dim` coordinates of `features`.
    pub fn linear(features: Arc<dyn FeatureMap>, dim: usize, ridge: Ridge, bound: Option<f64>) -> Result<Self> {
        if dim == 0 || dim > features.dim() {
            return Err(Error::param("linear class", "dimension must lie in 1..=feature dimension"));
        }
        Ok(FunctionClass {
            num_states: features.num_states(),
            num_actions: features.num_actions(),
            kind: ClassKind::Linear { features, dim, ridge },
            bound,
        })
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn variant_name(&self) -> &'static str {
        match self.kind {
            ClassKind::Finite { .. } => "finite",
            ClassKind::Abstraction { .. } => "abstraction",
            ClassKind::Linear { .. } => "linear",
        }
    }

    /// `ln |F|` for finite classes, `blocks * A * ln(1/quantum)` for
    /// abstractions and the dimension for linear classes.
    pub fn complexity(&self) -> f64 {
        match &self.kind {
            ClassKind::Finite { members } => libm::log(members.len() as f64),
            ClassKind::Abstraction { num_blocks, .. } => {
                (*num_blocks * self.num_actions) as f64 * libm::log(1.0 / ABSTRACTION_QUANTUM)
            }
            ClassKind::Linear { dim, .. } => *dim as f64,
        }
    }

    /// Whether `table` is (exactly) a member of this class.
    pub fn contains_table(&self, table: &QTable) -> bool {
        if table.num_states() != self.num_states || table.num_actions() != self.num_actions {
            return false;
        }
        if let Some(b) = self.bound {
            if table.values().iter().any(|&v| !(0.0..=b).contains(&v)) {
                return false;
            }
        }
        match &self.kind {
            ClassKind::Finite { members } => members.iter().any(|m| m == table),
            ClassKind::Abstraction { blocks, num_blocks } => {
                let mut seen: Vec<Option<&[f64]>> = vec![None; *num_blocks];
                (0..self.num_states).all(|x| {
                    let row = table.row(x);
                    match seen[blocks[x]] {
                        Some(prev) => prev == row,
                        None => {
                            seen[blocks[x]] = Some(row);
                            true
                        }
                    }
                })
            }
            ClassKind::Linear { .. } => false,
        }
    }

    fn wrap_table(&self, table: QTable) -> QFunction {
        QFunction::from_table(table, self.bound)
    }

    /// The zero member.
    pub fn zero_member(&self) -> QFunction {
        match &self.kind {
            ClassKind::Linear { features, dim, .. } => {
                QFunction::linear(features.clone(), vec![0.0; *dim], self.bound).expect("dim checked at construction")
            }
            _ => self.wrap_table(QTable::zeros(self.num_states, self.num_actions)),
        }
    }

    fn check_samples(&self, samples: &[Sample]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        for s in samples {
            if s.state >= self.num_states || s.action >= self.num_actions {
                return Err(Error::OutOfDomain {
                    state: s.state,
                    action: s.action,
                });
            }
        }
        Ok(())
    }

    /// A member minimizing the empirical squared loss on `samples`.
    ///
    /// Finite classes scan members in order and keep the first minimizer.
    /// Abstractions take the per-(block, action) target mean, clipped to
    /// `[0, bound]`; cells without samples are zero. Linear classes solve
    /// `(Phi^T Phi + lambda I) w = Phi^T y`.
    pub fn erm(&self, samples: &[Sample]) -> Result<QFunction> {
        self.check_samples(samples)?;
        let weights = vec![1.0; samples.len()];
        self.weighted_fit(samples, &weights, self.ridge_lambda(samples.len()))
    }

    fn ridge_lambda(&self, n: usize) -> f64 {
        match &self.kind {
            ClassKind::Linear { ridge, .. } => ridge.lambda(n),
            _ => 0.0,
        }
    }

    /// Minimizer of `sum_i w_i (f(x_i, a_i) - y_i)^2` (+ `lambda |w|^2` for
    /// linear classes).
    pub(crate) fn weighted_fit(&self, samples: &[Sample], weights: &[f64], lambda: f64) -> Result<QFunction> {
        match &self.kind {
            ClassKind::Finite { members } => {
                let mut best = 0;
                let mut best_loss = f64::INFINITY;
                for (i, m) in members.iter().enumerate() {
                    let loss: f64 = samples
                        .iter()
                        .zip(weights)
                        .map(|(s, w)| {
                            let r = m.get(s.state, s.action) - s.target;
                            w * r * r
                        })
                        .sum();
                    if loss < best_loss {
                        best_loss = loss;
                        best = i;
                    }
                }
                Ok(self.wrap_table(members[best].clone()))
            }
            ClassKind::Abstraction { blocks, num_blocks } => {
                let na = self.num_actions;
                let mut sums = vec![0.0; num_blocks * na];
                let mut mass = vec![0.0; num_blocks * na];
                for (s, &w) in samples.iter().zip(weights) {
                    let cell = blocks[s.state] * na + s.action;
                    sums[cell] += w * s.target;
                    mass[cell] += w;
                }
                let values = sums
                    .iter()
                    .zip(&mass)
                    .map(|(&t, &m)| if m > 0.0 { clip(t / m, self.bound) } else { 0.0 })
                    .collect();
                Ok(QFunction {
                    repr: Repr::Blocks {
                        blocks: blocks.clone(),
                        values,
                    },
                    num_states: self.num_states,
                    num_actions: na,
                    bound: self.bound,
                })
            }
            ClassKind::Linear { features, dim, .. } => {
                let d = *dim;
                let mut gram = vec![0.0; d * d];
                let mut rhs = vec![0.0; d];
                let mut phi = vec![0.0; d];
                for (s, &w) in samples.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    features.write_features(s.state, s.action, &mut phi);
                    for i in 0..d {
                        let wi = w * phi[i];
                        if wi == 0.0 {
                            continue;
                        }
                        rhs[i] += wi * s.target;
                        let row = &mut gram[i * d..i * d + i + 1];
                        for (g, p) in row.iter_mut().zip(&phi[..=i]) {
                            *g += wi * p;
                        }
                    }
                }
                for i in 0..d {
                    for j in 0..i {
                        gram[j * d + i] = gram[i * d + j];
                    }
                    gram[i * d + i] += lambda;
                }
                let w = solve_spd(&mut gram, &rhs, d)?;
                QFunction::linear(features.clone(), w, self.bound)
            }
        }
    }
}

/// Structural relation of class `k` to class `k + 1`.
fn check_nested(i: usize, small: &FunctionClass, large: &FunctionClass) -> Result<()> {
    let err = |reason| Error::NotNested {
        first: i,
        second: i + 1,
        reason,
    };
    if small.num_states != large.num_states || small.num_actions != large.num_actions {
        return Err(err("domains differ"));
    }
    if small.bound != large.bound {
        return Err(err("clipping bounds differ"));
    }
    match (&small.kind, &large.kind) {
        (ClassKind::Finite { members }, _) if !matches!(large.kind, ClassKind::Linear { .. }) => {
            if members.iter().all(|m| large.contains_table(m)) {
                Ok(())
            } else {
                Err(err("a member of the smaller class is missing from the larger one"))
            }
        }
        (ClassKind::Abstraction { blocks: bs, .. }, ClassKind::Abstraction { blocks: bl, .. }) => {
            // every block of the larger partition must sit inside one block of the smaller
            let mut parent: Vec<Option<usize>> = vec![None; bl.iter().max().map_or(0, |m| m + 1)];
            for (x, &b) in bl.iter().enumerate() {
                match parent[b] {
                    Some(p) if p != bs[x] => return Err(err("partition does not refine the previous one")),
                    _ => parent[b] = Some(bs[x]),
                }
            }
            Ok(())
        }
        (
            ClassKind::Linear {
                features: fs,
                dim: ds,
                ridge: rs,
            },
            ClassKind::Linear {
                features: fl,
                dim: dl,
                ridge: rl,
            },
        ) => {
            if !Arc::ptr_eq(fs, fl) {
                Err(err("linear classes must share one feature map"))
            } else if ds > dl {
                Err(err("feature prefix shrinks"))
            } else if rs != rl {
                Err(err("ridge parameters differ"))
            } else {
                Ok(())
            }
        }
        _ => Err(err("unsupported combination of class variants")),
    }
}

/// `F_1 ⊂ ... ⊂ F_M`, validated structurally and by complexity.
#[derive(Debug, Clone)]
pub struct NestedSequence {
    classes: Vec<FunctionClass>,
}

impl NestedSequence {
    pub fn new(classes: Vec<FunctionClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::param("nested sequence", "needs at least one class"));
        }
        for (i, pair) in classes.windows(2).enumerate() {
            check_nested(i, &pair[0], &pair[1])?;
            if pair[0].complexity() > pair[1].complexity() {
                return Err(Error::NotNested {
                    first: i,
                    second: i + 1,
                    reason: "complexity decreases",
                });
            }
        }
        Ok(NestedSequence { classes })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, k: usize) -> &FunctionClass {
        &self.classes[k]
    }

    pub fn classes(&self) -> &[FunctionClass] {
        &self.classes
    }

    pub fn last(&self) -> &FunctionClass {
        self.classes.last().expect("non-empty by construction")
    }

    pub fn into_boxed(self) -> Box<[FunctionClass]> {
        self.classes.into_boxed_slice()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(points: &[(usize, usize, f64)]) -> Vec<Sample> {
        points
            .iter()
            .map(|&(state, action, target)| Sample { state, action, target })
            .collect()
    }

    #[test]
    fn zero_function_everywhere() {
        let f = QFunction::zero(3, 2);
        for x in 0..3 {
            for a in 0..2 {
                assert_eq!(f.evaluate(x, a).unwrap(), 0.0);
            }
        }
        assert_eq!(f.evaluate(3, 0), Err(Error::OutOfDomain { state: 3, action: 0 }));
    }

    #[test]
    fn linear_member_is_dot_product() {
        let phi = Arc::new(TableFeatures::new(1, 2, 2, vec![1.0, 2.0, 3.0, -1.0]).unwrap());
        let f = QFunction::linear(phi, vec![0.5, 0.25], Some(2.0)).unwrap();
        assert_eq!(f.raw_value(0, 0), 1.0);
        assert_eq!(f.raw_value(0, 1), 1.25);
        let g = QFunction::linear(f.linear_features(), vec![1.0, 1.0], Some(2.0)).unwrap();
        assert_eq!(g.raw_value(0, 0), 3.0);
        assert_eq!(g.value(0, 0), 2.0);
    }

    impl QFunction {
        fn linear_features(&self) -> Arc<dyn FeatureMap> {
            match &self.repr {
                Repr::Linear { features, .. } => features.clone(),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn table_member_returns_entry() {
        let t = QTable::from_values(2, 1, vec![0.25, 0.75]).unwrap();
        let f = QFunction::from_table(t, Some(1.0));
        assert_eq!(f.value(1, 0), 0.75);
    }

    #[test]
    fn finite_erm_picks_one_function() {
        let class = FunctionClass::finite(vec![QTable::zeros(2, 1), QTable::constant(2, 1, 1.0)], Some(1.0)).unwrap();
        let data = samples(&[(0, 0, 1.0), (1, 0, 1.0)]);
        let f = class.erm(&data).unwrap();
        assert_eq!(f.value(0, 0), 1.0);
        assert_eq!(empirical_sq_loss(&f, &data).unwrap(), 0.0);
    }

    #[test]
    fn finite_erm_ties_go_to_lowest_index() {
        let class = FunctionClass::finite(vec![QTable::zeros(1, 1), QTable::constant(1, 1, 1.0)], None).unwrap();
        let f = class.erm(&samples(&[(0, 0, 0.5)])).unwrap();
        assert_eq!(f.value(0, 0), 0.0);
    }

    #[test]
    fn linear_normal_equations_by_hand() {
        let phi = Arc::new(TableFeatures::new(2, 1, 1, vec![1.0, 1.0]).unwrap());
        let class = FunctionClass::linear(phi, 1, Ridge::Fixed(0.0), None).unwrap();
        let f = class.erm(&samples(&[(0, 0, 2.0), (1, 0, 4.0)])).unwrap();
        assert!((f.linear_weights().unwrap()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn abstraction_single_block_mean() {
        let class = FunctionClass::abstraction(vec![0, 0, 0], 1, Some(3.0)).unwrap();
        let f = class.erm(&samples(&[(0, 0, 0.0), (1, 0, 1.0), (2, 0, 2.0)])).unwrap();
        for x in 0..3 {
            assert_eq!(f.value(x, 0), 1.0);
        }
    }

    #[test]
    fn abstraction_clips_block_mean() {
        let class = FunctionClass::abstraction(vec![0, 1], 1, Some(1.0)).unwrap();
        let f = class.erm(&samples(&[(0, 0, 1.5), (1, 0, -0.5)])).unwrap();
        assert_eq!(f.raw_value(0, 0), 1.0);
        assert_eq!(f.raw_value(1, 0), 0.0);
    }

    #[test]
    fn loss_values() {
        let f = QFunction::from_table(QTable::constant(1, 1, 1.0), None);
        assert_eq!(empirical_sq_loss(&f, &samples(&[(0, 0, 3.0)])).unwrap(), 4.0);
        assert_eq!(empirical_sq_loss(&f, &samples(&[(0, 0, 1.0)])).unwrap(), 0.0);
        assert_eq!(empirical_sq_loss(&f, &[]), Err(Error::EmptySamples));
    }

    #[test]
    fn erm_rejects_empty_and_out_of_domain() {
        let class = FunctionClass::tabular(2, 2, Some(1.0)).unwrap();
        assert_eq!(class.erm(&[]).unwrap_err(), Error::EmptySamples);
        assert!(matches!(class.erm(&samples(&[(2, 0, 1.0)])), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn finite_class_requires_zero() {
        assert!(FunctionClass::finite(vec![QTable::constant(1, 1, 1.0)], None).is_err());
    }

    #[test]
    fn complexities() {
        let finite = FunctionClass::finite(vec![QTable::zeros(1, 1); 8], None).unwrap();
        assert!((finite.complexity() - libm::log(8.0)).abs() < 1e-15);
        let abs = FunctionClass::abstraction(vec![0, 1, 1], 2, Some(1.0)).unwrap();
        assert!((abs.complexity() - 4.0 * libm::log(16.0)).abs() < 1e-12);
        let lin = FunctionClass::linear(Arc::new(TableFeatures::one_hot(2, 2)), 3, Ridge::default(), None).unwrap();
        assert_eq!(lin.complexity(), 3.0);
    }

    #[test]
    fn nestedness_checks() {
        let coarse = FunctionClass::abstraction(vec![0, 0, 1, 1], 2, Some(2.0)).unwrap();
        let fine = FunctionClass::tabular(4, 2, Some(2.0)).unwrap();
        let other = FunctionClass::abstraction(vec![0, 1, 0, 1], 2, Some(2.0)).unwrap();
        assert!(NestedSequence::new(vec![coarse.clone(), fine.clone()]).is_ok());
        assert!(NestedSequence::new(vec![fine.clone(), coarse.clone()]).is_err());
        assert!(NestedSequence::new(vec![coarse.clone(), other]).is_err());

        let zero = FunctionClass::finite(vec![QTable::zeros(4, 2)], Some(2.0)).unwrap();
        assert!(NestedSequence::new(vec![zero, fine]).is_ok());

        let phi: Arc<dyn FeatureMap> = Arc::new(TableFeatures::one_hot(4, 2));
        let l1 = FunctionClass::linear(phi.clone(), 2, Ridge::default(), None).unwrap();
        let l2 = FunctionClass::linear(phi, 5, Ridge::default(), None).unwrap();
        assert!(NestedSequence::new(vec![l1.clone(), l2.clone()]).is_ok());
        assert!(NestedSequence::new(vec![l2, l1]).is_err());
    }

    #[test]
    fn finite_sublists() {
        let t1 = QTable::constant(1, 2, 1.0);
        let small = FunctionClass::finite(vec![QTable::zeros(1, 2), t1.clone()], None).unwrap();
        let large = FunctionClass::finite(vec![QTable::zeros(1, 2), QTable::constant(1, 2, 0.5), t1], None).unwrap();
        assert!(NestedSequence::new(vec![small.clone(), large.clone()]).is_ok());
        assert!(NestedSequence::new(vec![large, small]).is_err());
    }
}
