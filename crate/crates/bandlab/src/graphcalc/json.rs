use super::{Atom, AtomicGraph, Charge, Coefficient, EdgeKind, GraphEdge, GraphWeight};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum WireKind {
    Gplus,
    Gminus,
    S,
    Splus,
    Sminus,
    Theta,
    LabelledTheta,
    Dotted,
    CrossDotted,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireEdge {
    from: String,
    to: String,
    kind: WireKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireWeight {
    atom: String,
    charge: Charge,
    #[serde(default)]
    light: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    name: String,
    atoms: Vec<Atom>,
    #[serde(default)]
    edges: Vec<WireEdge>,
    #[serde(default)]
    weights: Vec<WireWeight>,
    #[serde(default)]
    coefficient: Coefficient,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pq_labels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireFile {
    schema_version: u32,
    graphs: Vec<WireGraph>,
}

fn check_version(v: u32) -> Result<()> {
    if v != GRAPH_SCHEMA_VERSION {
        return Err(Error::InvalidGraph(format!(
            "schema_version {v} is not supported (expected {GRAPH_SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn parse<'de, T: Deserialize<'de>>(text: &'de str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config { path, message: e.into_inner().to_string() }
    })
}

fn from_wire(w: WireGraph) -> Result<AtomicGraph> {
    if let Some(v) = w.schema_version {
        check_version(v)?;
    }
    if !w.pq_labels.is_empty() {
        return Err(Error::UnsupportedLabel(format!(
            "{}: P/Q labels {:?} cannot be evaluated",
            w.name, w.pq_labels
        )));
    }
    let find = |n: &str| {
        w.atoms
            .iter()
            .position(|a| a.name == n)
            .ok_or_else(|| Error::InvalidGraph(format!("{}: unknown atom {n:?}", w.name)))
    };
    let mut edges = Vec::with_capacity(w.edges.len());
    for e in &w.edges {
        let kind = match e.kind {
            WireKind::Gplus => EdgeKind::Gplus,
            WireKind::Gminus => EdgeKind::Gminus,
            WireKind::S => EdgeKind::S,
            WireKind::Splus => EdgeKind::Splus,
            WireKind::Sminus => EdgeKind::Sminus,
            WireKind::Theta => EdgeKind::Theta,
            WireKind::LabelledTheta => {
                EdgeKind::LabelledTheta { order: e.order.unwrap_or(2), labels: e.labels.clone() }
            }
            WireKind::Dotted => EdgeKind::Dotted,
            WireKind::CrossDotted => EdgeKind::CrossDotted,
        };
        if e.kind != WireKind::LabelledTheta && (e.order.is_some() || !e.labels.is_empty()) {
            return Err(Error::InvalidGraph(format!("{}: order/labels only apply to labelled_theta edges", w.name)));
        }
        edges.push(GraphEdge { from: find(&e.from)?, to: find(&e.to)?, kind });
    }
    let mut weights = Vec::with_capacity(w.weights.len());
    for x in &w.weights {
        weights.push(GraphWeight { atom: find(&x.atom)?, charge: x.charge, light: x.light });
    }
    if !w.coefficient.scalar.re.is_finite() || !w.coefficient.scalar.im.is_finite() {
        return Err(Error::InvalidGraph(format!("{}: coefficient scalar is not finite", w.name)));
    }
    let g = AtomicGraph { name: w.name, atoms: w.atoms, edges, weights, coefficient: w.coefficient };
    g.validate()?;
    Ok(g)
}

fn to_wire(g: &AtomicGraph, versioned: bool) -> WireGraph {
    let name = |i: usize| g.atoms[i].name.clone();
    let edges = g
        .edges
        .iter()
        .map(|e| {
            let (kind, order, labels) = match &e.kind {
                EdgeKind::Gplus => (WireKind::Gplus, None, vec![]),
                EdgeKind::Gminus => (WireKind::Gminus, None, vec![]),
                EdgeKind::S => (WireKind::S, None, vec![]),
                EdgeKind::Splus => (WireKind::Splus, None, vec![]),
                EdgeKind::Sminus => (WireKind::Sminus, None, vec![]),
                EdgeKind::Theta => (WireKind::Theta, None, vec![]),
                EdgeKind::LabelledTheta { order, labels } => (WireKind::LabelledTheta, Some(*order), labels.clone()),
                EdgeKind::Dotted => (WireKind::Dotted, None, vec![]),
                EdgeKind::CrossDotted => (WireKind::CrossDotted, None, vec![]),
            };
            WireEdge { from: name(e.from), to: name(e.to), kind, order, labels }
        })
        .collect();
    let weights =
        g.weights.iter().map(|w| WireWeight { atom: name(w.atom), charge: w.charge, light: w.light }).collect();
    WireGraph {
        schema_version: versioned.then_some(GRAPH_SCHEMA_VERSION),
        name: g.name.clone(),
        atoms: g.atoms.clone(),
        edges,
        weights,
        coefficient: g.coefficient,
        pq_labels: vec![],
    }
}

/// Parses one graph object. Edges and weights refer to atoms by name.
pub fn graph_from_json(text: &str) -> Result<AtomicGraph> {
    from_wire(parse::<WireGraph>(text)?)
}

pub fn graph_to_json(g: &AtomicGraph) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_wire(g, true))?)
}

/// Parses a `{schema_version, graphs: [...]}` file.
pub fn graphs_from_json(text: &str) -> Result<Vec<AtomicGraph>> {
    let f: WireFile = parse(text)?;
    check_version(f.schema_version)?;
    f.graphs.into_iter().map(from_wire).collect()
}

pub fn graphs_to_json(graphs: &[AtomicGraph]) -> Result<String> {
    let f = WireFile { schema_version: GRAPH_SCHEMA_VERSION, graphs: graphs.iter().map(|g| to_wire(g, false)).collect() };
    Ok(serde_json::to_string_pretty(&f)?)
}
