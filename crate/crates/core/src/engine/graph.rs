use crate::error::{Error, Result};
use crate::estimators::Prototype;
use crate::linops::OrthogonalOperator;
use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Which side of the transforms a constraint acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    /// `X`-domain constraint `Φ`.
    Phi,
    /// `Ξ`-domain constraint `Γ`.
    Gamma,
}

#[derive(Clone, Debug)]
pub struct Constraint<S: Scalar> {
    pub name: String,
    pub side: Side,
    pub ports: Vec<usize>,
    pub prototype: Prototype<S>,
}

/// Variables `(X_k, Ξ_k = V_k X_k)`, one per transform, tied together by
/// `Φ` and `Γ` constraints.
#[derive(Clone, Debug)]
pub struct SystemGraph<S: Scalar> {
    pub transforms: Vec<OrthogonalOperator<S>>,
    pub m: usize,
    pub constraints: Vec<Constraint<S>>,
}

/// Ground truth of every variable plus the observations anchors refer to.
#[derive(Clone, Debug)]
pub struct Truth<S: Scalar> {
    pub x: Vec<DMatrix<S>>,
    pub xi: Vec<DMatrix<S>>,
    pub observations: Vec<DMatrix<S>>,
}

impl<S: Scalar> SystemGraph<S> {
    /// Build a graph, dropping constraints repeated with the same name, side
    /// and ports.
    pub fn new(transforms: Vec<OrthogonalOperator<S>>, m: usize, constraints: Vec<Constraint<S>>) -> Self {
        let mut kept: Vec<Constraint<S>> = Vec::with_capacity(constraints.len());
        for c in constraints {
            if !kept.iter().any(|k| k.name == c.name && k.side == c.side && k.ports == c.ports) {
                kept.push(c);
            }
        }
        Self { transforms, m, constraints: kept }
    }

    pub fn ports(&self) -> usize {
        self.transforms.len()
    }

    pub fn dim(&self, port: usize) -> usize {
        self.transforms[port].dim()
    }

    /// Constraint indices on one side, in declaration order.
    pub fn side(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.constraints.iter().enumerate().filter(move |(_, c)| c.side == side).map(|(i, _)| i)
    }

    /// `(constraint, position)` of the constraint on `side` that owns `port`.
    pub fn owner(&self, port: usize, side: Side) -> Option<(usize, usize)> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.side == side)
            .find_map(|(i, c)| c.ports.iter().position(|&p| p == port).map(|pos| (i, pos)))
    }
}

/// Check the structural invariants of a graph, reporting every violation.
pub fn validate<S: Scalar>(graph: &SystemGraph<S>) -> std::result::Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let k = graph.ports();
    if k == 0 {
        errs.push("graph has no transforms".to_string());
    }
    if graph.m == 0 {
        errs.push("column count M must be positive".to_string());
    }
    let mut count = vec![[0usize; 2]; k];
    for c in &graph.constraints {
        let slot = if c.side == Side::Phi { 0 } else { 1 };
        if c.ports.len() != c.prototype.arity() {
            errs.push(format!(
                "constraint '{}' lists {} ports but its estimator has {}",
                c.name,
                c.ports.len(),
                c.prototype.arity()
            ));
        }
        let mut seen = Vec::new();
        for &p in &c.ports {
            if p >= k {
                errs.push(format!("constraint '{}' refers to port {} but the graph has {k} ports", c.name, p + 1));
                continue;
            }
            if seen.contains(&p) {
                errs.push(format!("constraint '{}' lists port {} twice", c.name, p + 1));
            }
            seen.push(p);
            count[p][slot] += 1;
        }
        if c.prototype.m() != graph.m {
            errs.push(format!("constraint '{}' has M = {} but the graph has M = {}", c.name, c.prototype.m(), graph.m));
        }
        for (pos, (&p, &d)) in c.ports.iter().zip(c.prototype.port_dims().iter()).enumerate() {
            if p < k && graph.dim(p) != d {
                errs.push(format!(
                    "constraint '{}' port position {} expects dimension {d}, port {} has {}",
                    c.name,
                    pos + 1,
                    p + 1,
                    graph.dim(p)
                ));
            }
        }
    }
    for (p, [phi, gamma]) in count.iter().enumerate() {
        for (n, side) in [(phi, "Φ"), (gamma, "Γ")] {
            if *n != 1 {
                errs.push(format!("port {} appears in {n} {side}-side constraints (need exactly 1)", p + 1));
            }
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

pub(crate) fn require_valid<S: Scalar>(graph: &SystemGraph<S>) -> Result<()> {
    validate(graph).map_err(Error::Graph)
}
