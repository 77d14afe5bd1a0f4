use super::{AtomRole, AtomicGraph, EdgeKind, GraphEdge};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingOrder {
    pub order: i64,
    /// Departures from normal regular form; the count is still reported.
    pub warnings: Vec<String>,
}

/// `#offdiag G + #light + 2 #waved + 2 #diffusive + sum labelled orders - 2 (#internal - #dotted)`.
///
/// A G edge is diagonal when a chain of dotted edges identifies its ends, and
/// `#dotted` counts independent identifications.
pub fn scaling_order(graph: &AtomicGraph) -> ScalingOrder {
    let n = graph.atoms.len();
    let mut uf = UnionFind::new(n);
    let mut dotted = 0i64;
    for e in &graph.edges {
        if e.kind == EdgeKind::Dotted && e.from < n && e.to < n && uf.union(e.from, e.to) {
            dotted += 1;
        }
    }
    let mut order = 0i64;
    let mut warnings = Vec::new();
    let crossed = |a: usize, b: usize| {
        graph.edges.iter().any(|e| e.kind == EdgeKind::CrossDotted && ((e.from, e.to) == (a, b) || (e.from, e.to) == (b, a)))
    };
    for e in &graph.edges {
        match &e.kind {
            EdgeKind::Gplus | EdgeKind::Gminus => {
                if e.from != e.to && uf.find(e.from) != uf.find(e.to) {
                    order += 1;
                    if !crossed(e.from, e.to) {
                        warnings.push(format!("G edge {}-{} has no cross-dotted partner", e.from, e.to));
                    }
                }
            }
            EdgeKind::S | EdgeKind::Splus | EdgeKind::Sminus | EdgeKind::Theta => order += 2,
            EdgeKind::LabelledTheta { order: k, .. } => order += k,
            EdgeKind::CrossDotted => {
                let has_g = graph
                    .edges
                    .iter()
                    .any(|f| f.kind.is_solid() && ((f.from, f.to) == (e.from, e.to) || (f.from, f.to) == (e.to, e.from)));
                if !has_g {
                    warnings.push(format!("cross-dotted edge {}-{} without a G edge", e.from, e.to));
                }
            }
            EdgeKind::Dotted => {}
        }
    }
    order += graph.weights.iter().filter(|w| w.light).count() as i64;
    order -= 2 * (graph.internal_count() as i64 - dotted);
    ScalingOrder { order, warnings }
}

/// Scaling orders of every dotted/cross-dotted split of the G edges between
/// distinct atoms that no dotted edge already fixes. Splits whose equalities
/// contradict a cross-dotted pair are skipped.
pub fn dotted_partition_orders(graph: &AtomicGraph) -> Result<Vec<i64>> {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for e in &graph.edges {
        if e.kind.is_solid() && e.from != e.to {
            let key = (e.from.min(e.to), e.from.max(e.to));
            let fixed = graph.edges.iter().any(|f| f.kind.is_dotted() && (f.from.min(f.to), f.from.max(f.to)) == key);
            if !fixed && !pairs.contains(&key) {
                pairs.push(key);
            }
        }
    }
    if pairs.len() > 16 {
        return Err(Error::BudgetExceeded(format!("{} undetermined G pairs exceed 16", pairs.len())));
    }
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let mut g = graph.clone();
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let kind = if mask >> k & 1 == 1 { EdgeKind::Dotted } else { EdgeKind::CrossDotted };
            g.edges.push(GraphEdge { from: a, to: b, kind });
        }
        let mut uf = UnionFind::new(g.atoms.len());
        for e in g.edges.iter().filter(|e| e.kind == EdgeKind::Dotted) {
            uf.union(e.from, e.to);
        }
        let consistent = g.edges.iter().filter(|e| e.kind == EdgeKind::CrossDotted).all(|e| uf.find(e.from) != uf.find(e.to));
        if consistent {
            out.push(scaling_order(&g).order);
        }
    }
    Ok(out)
}

/// Atoms grouped into molecules: internal atoms joined through waved or dotted
/// edges between internal atoms; every external atom alone. Sorted by first atom.
pub fn molecules(graph: &AtomicGraph) -> Vec<Vec<usize>> {
    let n = graph.atoms.len();
    let internal = |i: usize| graph.atoms[i].role == AtomRole::Internal;
    let mut uf = UnionFind::new(n);
    for e in &graph.edges {
        let joins = e.kind.is_waved() || e.kind == EdgeKind::Dotted;
        if joins && e.from < n && e.to < n && internal(e.from) && internal(e.to) {
            uf.union(e.from, e.to);
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    groups
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MolEdgeKind {
    /// Plus G edge.
    Blue,
    /// Minus G edge.
    Red,
    Diffusive,
    Dotted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolEdge {
    pub from: usize,
    pub to: usize,
    pub kind: MolEdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    pub molecules: Vec<Vec<usize>>,
    pub external: Vec<bool>,
    pub edges: Vec<MolEdge>,
}

impl MolecularGraph {
    pub fn internal_molecules(&self) -> Vec<usize> {
        (0..self.molecules.len()).filter(|&i| !self.external[i]).collect()
    }
}

/// Quotient by molecules, keeping solid and diffusive edges between distinct
/// molecules and dotted edges between an external and an internal molecule.
pub fn molecular_graph(graph: &AtomicGraph) -> MolecularGraph {
    let mols = molecules(graph);
    let mut of = vec![0usize; graph.atoms.len()];
    for (k, m) in mols.iter().enumerate() {
        for &a in m {
            of[a] = k;
        }
    }
    let external: Vec<bool> = mols.iter().map(|m| graph.atoms[m[0]].role == AtomRole::External).collect();
    let mut edges = Vec::new();
    for e in &graph.edges {
        let (a, b) = (of[e.from], of[e.to]);
        if a == b {
            continue;
        }
        let kind = match e.kind {
            EdgeKind::Gplus => MolEdgeKind::Blue,
            EdgeKind::Gminus => MolEdgeKind::Red,
            EdgeKind::Theta | EdgeKind::LabelledTheta { .. } => MolEdgeKind::Diffusive,
            EdgeKind::Dotted if external[a] != external[b] => MolEdgeKind::Dotted,
            _ => continue,
        };
        edges.push(MolEdge { from: a, to: b, kind });
    }
    MolecularGraph { molecules: mols, external, edges }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoublyConnected {
    pub connected: bool,
    /// Indices into the molecular graph's edges: a black spanning tree and a disjoint blue one.
    pub black: Vec<usize>,
    pub blue: Vec<usize>,
}

pub const DC_MAX_MOLECULES: usize = 12;
pub const DC_MAX_EDGES: usize = 24;

/// Whether the internal molecules carry a black net (diffusive edges) and a
/// disjoint blue net (plus G or diffusive edges), each containing a spanning tree.
///
/// Searches black spanning trees exhaustively and tests blue connectivity of
/// the remaining edges, so the cost is exponential in the edge count.
pub fn doubly_connected(graph: &AtomicGraph) -> Result<DoublyConnected> {
    let mg = molecular_graph(graph);
    let internal = mg.internal_molecules();
    if internal.len() > DC_MAX_MOLECULES {
        return Err(Error::BudgetExceeded(format!(
            "{} internal molecules exceed {DC_MAX_MOLECULES}",
            internal.len()
        )));
    }
    let local = |m: usize| internal.iter().position(|&x| x == m);
    let candidates: Vec<(usize, usize, usize, bool)> = mg
        .edges
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let (a, b) = (local(e.from)?, local(e.to)?);
            match e.kind {
                MolEdgeKind::Diffusive => Some((i, a, b, true)),
                MolEdgeKind::Blue => Some((i, a, b, false)),
                _ => None,
            }
        })
        .collect();
    if candidates.len() > DC_MAX_EDGES {
        return Err(Error::BudgetExceeded(format!("{} candidate edges exceed {DC_MAX_EDGES}", candidates.len())));
    }
    let k = internal.len();
    if k <= 1 {
        return Ok(DoublyConnected { connected: true, black: vec![], blue: vec![] });
    }
    let black_pool: Vec<usize> = (0..candidates.len()).filter(|&c| candidates[c].3).collect();
    let mut chosen = Vec::with_capacity(k - 1);
    let found = search(&candidates, &black_pool, 0, k, &mut chosen);
    Ok(match found {
        Some((black, blue)) => DoublyConnected {
            connected: true,
            black: black.into_iter().map(|c| candidates[c].0).collect(),
            blue: blue.into_iter().map(|c| candidates[c].0).collect(),
        },
        None => DoublyConnected { connected: false, black: vec![], blue: vec![] },
    })
}

fn spanning(cands: &[(usize, usize, usize, bool)], use_edge: impl Fn(usize) -> bool, k: usize) -> Option<Vec<usize>> {
    let mut uf = UnionFind::new(k);
    let mut tree = Vec::new();
    for (c, e) in cands.iter().enumerate() {
        if use_edge(c) && uf.union(e.1, e.2) {
            tree.push(c);
        }
    }
    (tree.len() + 1 == k).then_some(tree)
}

fn search(
    cands: &[(usize, usize, usize, bool)],
    pool: &[usize],
    start: usize,
    k: usize,
    chosen: &mut Vec<usize>,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if chosen.len() + 1 == k {
        let mut uf = UnionFind::new(k);
        if !chosen.iter().all(|&c| uf.union(cands[c].1, cands[c].2)) {
            return None;
        }
        let blue = spanning(cands, |c| !chosen.contains(&c), k)?;
        return Some((chosen.clone(), blue));
    }
    for i in start..pool.len() {
        if pool.len() - i < k - 1 - chosen.len() {
            break;
        }
        // Prune choices that close a cycle.
        let mut uf = UnionFind::new(k);
        for &c in chosen.iter() {
            uf.union(cands[c].1, cands[c].2);
        }
        let c = pool[i];
        if !uf.union(cands[c].1, cands[c].2) {
            continue;
        }
        chosen.push(c);
        if let Some(w) = search(cands, pool, i + 1, k, chosen) {
            return Some(w);
        }
        chosen.pop();
    }
    None
}
