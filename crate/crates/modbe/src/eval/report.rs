//! Ground-truth diagnostics of a class sequence on a known MDP.

use std::fmt;

use modbe_core::diagnostics::{approx_error, global_xi, minimal_complete_index};
use modbe_core::{DataDistribution, NestedSequence, TabularMdp};

use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDiagnostics {
    pub variant: &'static str,
    pub complexity: f64,
    /// `None` when the class cannot be enumerated.
    pub approx: Option<f64>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub classes: Vec<ClassDiagnostics>,
    /// Zero-based index of the smallest complete class, when one is known.
    pub k_star: Option<usize>,
    pub concentrability: f64,
    pub optimal_value: f64,
    /// `(method, zero-based class, regret)`.
    pub regrets: Vec<(String, usize, f64)>,
}

impl DiagnosticReport {
    pub fn compute(mdp: &TabularMdp, mu: &DataDistribution, classes: &NestedSequence) -> Result<Self, EvalError> {
        let per_class = classes
            .classes()
            .iter()
            .enumerate()
            .map(|(k, c)| ClassDiagnostics {
                variant: c.variant_name(),
                complexity: c.complexity(),
                approx: approx_error(c, mdp, mu),
                xi: global_xi(classes, k, mdp, mu),
            })
            .collect();
        Ok(DiagnosticReport {
            classes: per_class,
            k_star: minimal_complete_index(classes, mdp, mu),
            concentrability: mdp.concentrability(mu)?,
            optimal_value: mdp.optimal_value(),
            regrets: Vec::new(),
        })
    }

    pub fn with_regret(mut self, method: impl Into<String>, class: usize, regret: f64) -> Self {
        self.regrets.push((method.into(), class, regret));
        self
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6}"))
}

impl fmt::Display for DiagnosticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "concentrability = {}", self.concentrability)?;
        writeln!(f, "optimal_value = {:.6}", self.optimal_value)?;
        match self.k_star {
            Some(k) => writeln!(f, "k_star = {}", k + 1)?,
            None => writeln!(f, "k_star = n/a")?,
        }
        writeln!(f, "{:>3}  {:<12}  {:>12}  {:>12}  {:>12}", "k", "variant", "complexity", "approx", "xi")?;
        for (k, c) in self.classes.iter().enumerate() {
            writeln!(
                f,
                "{:>3}  {:<12}  {:>12.6}  {:>12}  {:>12}",
                k + 1,
                c.variant,
                c.complexity,
                opt(c.approx),
                opt(c.xi)
            )?;
        }
        for (method, k, regret) in &self.regrets {
            writeln!(f, "regret {method} (k = {}) = {regret:.6}", k + 1)?;
        }
        Ok(())
    }
}
