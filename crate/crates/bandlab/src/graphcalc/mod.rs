//! Atomic graphs: values, scaling orders, molecular structure, and the
//! built-in low-order expansion catalogs.
//!
//! A graph is a product of edge and weight factors times a coefficient,
//! summed over the sites of its internal atoms. External atoms are bound to
//! sites by the caller.

mod catalog;
mod eval;
mod json;
mod selfenergy;
mod structure;

pub use catalog::{catalog, CatalogTag};
pub use eval::{evaluate, evaluate_brute, evaluate_sum, evaluate_two_point, graph_kernel, EvalBudget, EvalContext, KernelSet};
pub use json::{graph_from_json, graph_to_json, graphs_from_json, graphs_to_json, GRAPH_SCHEMA_VERSION};
pub use selfenergy::{renormalize_self_energy, self_energy_symbol, SelfEnergySymbol};
pub use structure::{
    doubly_connected, dotted_partition_orders, molecular_graph, molecules, scaling_order, DoublyConnected, MolEdge,
    MolEdgeKind, MolecularGraph, ScalingOrder,
};

use crate::error::{Error, Result};
use crate::spectral::SpectralPoint;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomRole {
    External,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub role: AtomRole,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// `G_{from,to}`.
    Gplus,
    /// `conj(G_{from,to})`.
    Gminus,
    S,
    Splus,
    Sminus,
    Theta,
    /// `Theta E_1 Theta ... E_l Theta`, with self-energies looked up by label.
    LabelledTheta { order: i64, labels: Vec<String> },
    Dotted,
    CrossDotted,
}

impl EdgeKind {
    pub fn is_solid(&self) -> bool {
        matches!(self, EdgeKind::Gplus | EdgeKind::Gminus)
    }

    pub fn is_waved(&self) -> bool {
        matches!(self, EdgeKind::S | EdgeKind::Splus | EdgeKind::Sminus)
    }

    pub fn is_diffusive(&self) -> bool {
        matches!(self, EdgeKind::Theta | EdgeKind::LabelledTheta { .. })
    }

    pub fn is_dotted(&self) -> bool {
        matches!(self, EdgeKind::Dotted | EdgeKind::CrossDotted)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Charge {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// `G_xx` or `conj(G_xx)`; light weights subtract `m` or `conj(m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphWeight {
    pub atom: usize,
    pub charge: Charge,
    pub light: bool,
}

/// `scalar * m^a conj(m)^b (1 - m^2)^-c (1 - conj(m)^2)^-e (1 - |m|^2)^-f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub scalar: C64,
    #[serde(default)]
    pub m: i32,
    #[serde(default)]
    pub mbar: i32,
    #[serde(default)]
    pub inv_one_minus_m2: u32,
    #[serde(default)]
    pub inv_one_minus_mbar2: u32,
    #[serde(default)]
    pub inv_one_minus_absm2: u32,
    /// The scalar stands in for a coefficient the source does not print.
    #[serde(default)]
    pub placeholder: bool,
}

impl Default for Coefficient {
    fn default() -> Self {
        Self::one()
    }
}

impl Coefficient {
    pub fn one() -> Self {
        Self {
            scalar: C64::new(1.0, 0.0),
            m: 0,
            mbar: 0,
            inv_one_minus_m2: 0,
            inv_one_minus_mbar2: 0,
            inv_one_minus_absm2: 0,
            placeholder: false,
        }
    }

    pub fn monomial(m: i32, mbar: i32) -> Self {
        Self { m, mbar, ..Self::one() }
    }

    pub fn with_scalar(mut self, scalar: C64) -> Self {
        self.scalar = scalar;
        self
    }

    pub fn placeholder(mut self) -> Self {
        self.placeholder = true;
        self
    }

    pub fn eval(&self, point: &SpectralPoint) -> Result<C64> {
        let m = point.m;
        let mb = m.conj();
        let one = C64::new(1.0, 0.0);
        let mut v = self.scalar * m.powi(self.m) * mb.powi(self.mbar);
        for (base, k) in [
            (one - m * m, self.inv_one_minus_m2),
            (one - mb * mb, self.inv_one_minus_mbar2),
            (C64::new(1.0 - point.absm2, 0.0), self.inv_one_minus_absm2),
        ] {
            if k > 0 {
                if base.norm() < 1e-300 {
                    return Err(Error::Precondition(format!("coefficient denominator vanishes at z = {}", point.z)));
                }
                v /= base.powi(k as i32);
            }
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicGraph {
    pub name: String,
    pub atoms: Vec<Atom>,
    pub edges: Vec<GraphEdge>,
    pub weights: Vec<GraphWeight>,
    pub coefficient: Coefficient,
}

impl AtomicGraph {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGraph(format!("{}: {msg}", self.name)));
        let n = self.atoms.len();
        for (i, a) in self.atoms.iter().enumerate() {
            if a.name.is_empty() {
                return bad(format!("atom {i} has an empty name"));
            }
            if self.atoms[..i].iter().any(|b| b.name == a.name) {
                return bad(format!("duplicate atom name {:?}", a.name));
            }
        }
        let mut dotted_pairs = Vec::new();
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return bad(format!("edge endpoint out of range ({}, {})", e.from, e.to));
            }
            if e.kind.is_dotted() {
                if e.from == e.to {
                    return bad("dotted edges need two distinct atoms".into());
                }
                let key = (e.from.min(e.to), e.from.max(e.to));
                if dotted_pairs.contains(&key) {
                    return bad(format!("more than one dotted edge between atoms {} and {}", key.0, key.1));
                }
                dotted_pairs.push(key);
            }
            if let EdgeKind::LabelledTheta { order, labels } = &e.kind {
                if labels.is_empty() && *order != 2 {
                    return bad(format!("labelled edge without labels has order 2, not {order}"));
                }
            }
        }
        for w in &self.weights {
            if w.atom >= n {
                return bad(format!("weight on missing atom {}", w.atom));
            }
        }
        Ok(())
    }

    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a.name == name)
    }

    pub fn internal_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.role == AtomRole::Internal).count()
    }

    pub fn externals(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.role == AtomRole::External)
    }

    /// Same graph with the scalar multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        let mut g = self.clone();
        g.coefficient.scalar *= c;
        g
    }
}

/// Name-based construction of an [`AtomicGraph`].
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    name: String,
    atoms: Vec<Atom>,
    edges: Vec<(String, String, EdgeKind)>,
    weights: Vec<(String, Charge, bool)>,
    coefficient: Coefficient,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn external(mut self, name: &str) -> Self {
        self.atoms.push(Atom { name: name.into(), role: AtomRole::External });
        self
    }

    pub fn internal(mut self, name: &str) -> Self {
        self.atoms.push(Atom { name: name.into(), role: AtomRole::Internal });
        self
    }

    pub fn edge(mut self, from: &str, to: &str, kind: EdgeKind) -> Self {
        self.edges.push((from.into(), to.into(), kind));
        self
    }

    pub fn weight(mut self, atom: &str, charge: Charge, light: bool) -> Self {
        self.weights.push((atom.into(), charge, light));
        self
    }

    pub fn coefficient(mut self, c: Coefficient) -> Self {
        self.coefficient = c;
        self
    }

    pub fn build(self) -> Result<AtomicGraph> {
        let find = |n: &str| {
            self.atoms
                .iter()
                .position(|a| a.name == n)
                .ok_or_else(|| Error::InvalidGraph(format!("{}: unknown atom {n:?}", self.name)))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        for (a, b, kind) in &self.edges {
            edges.push(GraphEdge { from: find(a)?, to: find(b)?, kind: kind.clone() });
        }
        let mut weights = Vec::with_capacity(self.weights.len());
        for (a, charge, light) in &self.weights {
            weights.push(GraphWeight { atom: find(a)?, charge: *charge, light: *light });
        }
        let g = AtomicGraph { name: self.name, atoms: self.atoms, edges, weights, coefficient: self.coefficient };
        g.validate()?;
        Ok(g)
    }
}
