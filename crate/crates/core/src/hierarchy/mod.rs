//! Hierarchical matrices and nested Archimedean copulas.
//!
//! A hierarchical matrix is read off a tree: the entry for a pair of
//! variables is the value of their lowest common ancestor. If values do not
//! decrease from a node to its children and are nonnegative, a nested
//! Archimedean copula with one parameter per node attains the matrix for
//! any measure of concordance.

mod archimedean;
mod tree;

pub use archimedean::{kappa_of_theta, Family};
pub use tree::{matrix_to_tree, HierNode, HierTree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::Measure;
use crate::sample::SampleMatrix;
use crate::samplers::{sample_rows, RngStream};

/// Largest node value accepted by [`calibrate`].
pub const MAX_NODE_VALUE: f64 = 1.0 - 1e-6;
const THETA_MAX: f64 = 1e4;
const BISECTION_ITERS: usize = 200;
const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("cannot parse tree: {0}")]
    Parse(String),
    #[error("matrix is not hierarchical: {0}")]
    NotHierarchical(String),
    #[error("tree is not proper: values must be nonnegative and must not decrease from parent to child")]
    NotProper,
    #[error("node {node} has value {value}, outside [0, 1 - 1e-6]")]
    ValueOutOfRange { node: usize, value: f64 },
    #[error("cannot solve kappa(theta) = {target} at node {node}")]
    BisectionFailure { node: usize, target: f64 },
    #[error("nesting violated: theta {parent_theta} at node {parent} exceeds theta {child_theta} at child {child}")]
    NestingViolated { parent: usize, child: usize, parent_theta: f64, child_theta: f64 },
    #[error("expected {expected} parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },
    #[error("theta {theta} at node {node} is below the {family} lower bound")]
    ThetaOutOfRange { node: usize, theta: f64, family: Family },
}

/// Parameter `θ` solving `κ(θ) = ρ` for one family and measure.
pub fn invert_kappa(family: Family, measure: Measure, rho: f64) -> Option<f64> {
    let lower = family.theta_lower();
    if rho == 0.0 {
        return Some(lower);
    }
    match (family, measure) {
        (Family::Gumbel, Measure::Tau) => return Some(1.0 / (1.0 - rho)),
        (Family::Gumbel, Measure::Beta) => return Some(1.0 / (2.0 - (1.0 + rho).log2()).log2()),
        (Family::Clayton, Measure::Tau) => return Some(2.0 * rho / (1.0 - rho)),
        _ => {}
    }
    let (mut lo, mut hi) = (lower + 1e-9, THETA_MAX);
    let k = |t: f64| kappa_of_theta(family, measure, t);
    if k(lo) > rho || k(hi) < rho {
        return None;
    }
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let v = k(mid);
        if (v - rho).abs() <= BISECTION_TOL {
            return Some(mid);
        }
        if v < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A nested Archimedean copula over a tree: one parameter per node in
/// preorder, generators from one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HacRepr", into = "HacRepr")]
pub struct HacModel {
    tree: HierTree,
    family: Family,
    theta: Vec<f64>,
    measure: Measure,
}

#[derive(Serialize, Deserialize)]
struct HacRepr {
    tree: String,
    family: Family,
    theta: Vec<f64>,
    measure: Measure,
}

impl TryFrom<HacRepr> for HacModel {
    type Error = HierarchyError;

    fn try_from(r: HacRepr) -> Result<Self, HierarchyError> {
        Self::new(r.tree.parse()?, r.family, r.theta, r.measure)
    }
}

impl From<HacModel> for HacRepr {
    fn from(m: HacModel) -> Self {
        Self { tree: m.tree.to_text(), family: m.family, theta: m.theta, measure: m.measure }
    }
}

impl HacModel {
    /// Checks the parameter count, the family range and `θ_parent ≤ θ_child`.
    pub fn new(tree: HierTree, family: Family, theta: Vec<f64>, measure: Measure) -> Result<Self, HierarchyError> {
        let parents = tree.parents();
        if theta.len() != parents.len() {
            return Err(HierarchyError::ParameterCount { expected: parents.len(), found: theta.len() });
        }
        for (v, &t) in theta.iter().enumerate() {
            if !(t >= family.theta_lower()) || !t.is_finite() {
                return Err(HierarchyError::ThetaOutOfRange { node: v, theta: t, family });
            }
            if let Some(p) = parents[v] {
                if theta[p] > t {
                    return Err(HierarchyError::NestingViolated {
                        parent: p,
                        child: v,
                        parent_theta: theta[p],
                        child_theta: t,
                    });
                }
            }
        }
        Ok(Self { tree, family, theta, measure })
    }

    pub fn tree(&self) -> &HierTree {
        &self.tree
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Parameters in node preorder.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }
}

/// Chooses `θ_v` with `κ(θ_v) = ρ_v` at every node. Closed forms are used
/// for Gumbel with tau or beta and Clayton with tau; other pairs are solved
/// by bisection on a deterministic quadrature of `κ(θ)`.
pub fn calibrate(tree: &HierTree, family: Family, measure: Measure) -> Result<HacModel, HierarchyError> {
    if !tree.is_proper() {
        return Err(HierarchyError::NotProper);
    }
    let theta = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(v, n)| {
            if !(0.0..=MAX_NODE_VALUE).contains(&n.value) {
                return Err(HierarchyError::ValueOutOfRange { node: v, value: n.value });
            }
            invert_kappa(family, measure, n.value).ok_or(HierarchyError::BisectionFailure { node: v, target: n.value })
        })
        .collect::<Result<Vec<_>, _>>()?;
    HacModel::new(tree.clone(), family, theta, measure)
}

/// Draws rows of the nested copula: a frailty per node, top-down from the
/// root, and `u_j = ψ_v(E_j / V_v)` for each variable `j` directly under `v`.
pub fn hac_sample(model: &HacModel, n: usize, rng: &RngStream) -> SampleMatrix {
    let nodes = model.tree.nodes();
    let parents = model.tree.parents();
    let fam = model.family;
    let theta = &model.theta;
    sample_rows(n, model.tree.dim(), rng, |g, row| {
        let mut frailty = vec![0.0; nodes.len()];
        for v in 0..nodes.len() {
            frailty[v] = match parents[v] {
                None => fam.root_frailty(theta[v], g),
                Some(p) => fam.inner_frailty(theta[p], theta[v], frailty[p], g),
            };
            for &j in &nodes[v].indices {
                let e: f64 = rand_distr::Distribution::sample(&rand_distr::Exp1, g);
                row[j] = fam.psi(theta[v], e / frailty[v]);
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "((1,2,3,4);0.4,(((5,6,7);0.3,(8,9);0.2));0.15);0.1";

    #[test]
    fn closed_form_calibration() {
        assert!((invert_kappa(Family::Gumbel, Measure::Tau, 0.1).unwrap() - 10.0 / 9.0).abs() < 1e-15);
        assert_eq!(invert_kappa(Family::Gumbel, Measure::Beta, 0.0).unwrap(), 1.0);
        let t = invert_kappa(Family::Gumbel, Measure::Beta, 0.2).unwrap();
        assert!((t - 1.0 / (2.0 - 1.2f64.log2()).log2()).abs() < 1e-15);
        assert!((t - 1.2553).abs() < 1e-4);
        assert!((invert_kappa(Family::Clayton, Measure::Tau, 0.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bisection_inverts_closed_forms() {
        for rho in [0.05, 0.3, 0.7] {
            let t = invert_kappa(Family::Clayton, Measure::Beta, rho).unwrap();
            assert!((kappa_of_theta(Family::Clayton, Measure::Beta, t) - rho).abs() < 1e-9);
        }
    }

    #[test]
    fn calibrate_rejects_bad_trees() {
        let t: HierTree = "((1,2);0.3,3);0.5".parse().unwrap();
        assert_eq!(calibrate(&t, Family::Gumbel, Measure::Tau), Err(HierarchyError::NotProper));
        let t: HierTree = "(1,2);1".parse().unwrap();
        assert!(matches!(calibrate(&t, Family::Gumbel, Measure::Tau), Err(HierarchyError::ValueOutOfRange { .. })));
    }

    #[test]
    fn model_checks_nesting() {
        let t: HierTree = "((1,2);0.3,3);0.1".parse().unwrap();
        assert!(HacModel::new(t.clone(), Family::Gumbel, vec![1.0, 2.0], Measure::Tau).is_ok());
        assert!(matches!(
            HacModel::new(t.clone(), Family::Gumbel, vec![2.0, 1.5], Measure::Tau),
            Err(HierarchyError::NestingViolated { .. })
        ));
        assert!(matches!(
            HacModel::new(t, Family::Gumbel, vec![0.5, 1.5], Measure::Tau),
            Err(HierarchyError::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn fig2_tree_roundtrip() {
        let t: HierTree = FIG2.parse().unwrap();
        assert_eq!(t.dim(), 9);
        assert_eq!(t.to_text(), FIG2.replace("(((5,6,7);0.3,(8,9);0.2));0.15", "((5,6,7);0.3,(8,9);0.2);0.15"));
        assert_eq!(t.to_text().parse::<HierTree>().unwrap(), t);
        assert_eq!(t.to_indented().parse::<HierTree>().unwrap(), t);
        let m = t.to_matrix();
        assert_eq!(m.get(0, 3), 0.4);
        assert_eq!(m.get(4, 6), 0.3);
        assert_eq!(m.get(7, 8), 0.2);
        assert_eq!(m.get(5, 8), 0.15);
        assert_eq!(m.get(2, 7), 0.1);
        assert_eq!(matrix_to_tree(&m).unwrap(), t);
        assert!(t.is_proper());
    }
}
