use super::{AtomRole, AtomicGraph, Charge, EdgeKind};
use crate::ensemble::ResolventFrame;
use crate::error::{Error, Result};
use crate::kernels::{labelled_edge, s_kernel, sminus_kernel, splus_kernel, theta_kernel, LatticeKernel, SelfEnergyKernel};
use crate::profile::VarianceProfile;
use crate::spectral::SpectralPoint;
use crate::torus::{BandGeometry, TorusLattice};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

/// Deterministic kernels at one spectral point, plus named self-energies for labelled edges.
#[derive(Clone, Debug)]
pub struct KernelSet {
    pub point: SpectralPoint,
    pub s: LatticeKernel,
    pub splus: LatticeKernel,
    pub sminus: LatticeKernel,
    /// Absent on the real axis.
    pub theta: Option<LatticeKernel>,
    pub energies: BTreeMap<String, SelfEnergyKernel>,
}

impl KernelSet {
    pub fn new(profile: &VarianceProfile, point: &SpectralPoint) -> Result<Self> {
        let theta = if point.eta() > 0.0 { Some(theta_kernel(profile, point)?) } else { None };
        Ok(Self {
            point: *point,
            s: s_kernel(profile)?,
            splus: splus_kernel(profile, point)?,
            sminus: sminus_kernel(profile, point)?,
            theta,
            energies: BTreeMap::new(),
        })
    }

    pub fn with_energy(mut self, e: SelfEnergyKernel) -> Result<Self> {
        if e.kernel.geometry() != self.s.geometry() {
            return Err(Error::GeometryMismatch("self-energy lives on a different torus".into()));
        }
        self.energies.insert(e.label.clone(), e);
        Ok(self)
    }

    pub fn geometry(&self) -> &BandGeometry {
        self.s.geometry()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalBudget {
    pub max_internal: usize,
    /// Cap on multiply-adds of the elimination plan.
    pub max_work: u64,
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self { max_internal: 3, max_work: 4_000_000_000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub kernels: &'a KernelSet,
    pub frame: Option<&'a ResolventFrame>,
    pub budget: EvalBudget,
}

impl<'a> EvalContext<'a> {
    pub fn new(kernels: &'a KernelSet) -> Self {
        Self { kernels, frame: None, budget: EvalBudget::default() }
    }

    pub fn with_frame(mut self, frame: &'a ResolventFrame) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn with_budget(mut self, budget: EvalBudget) -> Self {
        self.budget = budget;
        self
    }
}

enum Resolved<'a> {
    Kernel(std::borrow::Cow<'a, [C64]>),
    G { conj: bool },
    Dot,
    Cross,
}

struct Prepared<'a> {
    lat: TorusLattice,
    edges: Vec<(usize, usize, Resolved<'a>)>,
    weights: Vec<(usize, bool, C64)>,
    g: Option<&'a ResolventFrame>,
    coefficient: C64,
    /// Site of each atom if external.
    fixed: Vec<Option<usize>>,
    /// Variable number of each internal atom.
    var: Vec<Option<usize>>,
    nvars: usize,
}

impl Prepared<'_> {
    fn edge(&self, r: &Resolved, a: usize, b: usize) -> C64 {
        match r {
            Resolved::Kernel(v) => v[self.lat.sub_index(b, a)],
            Resolved::G { conj } => {
                let v = self.g.expect("checked during preparation").g().get(a, b);
                if *conj {
                    v.conj()
                } else {
                    v
                }
            }
            Resolved::Dot => C64::new(if a == b { 1.0 } else { 0.0 }, 0.0),
            Resolved::Cross => C64::new(if a != b { 1.0 } else { 0.0 }, 0.0),
        }
    }

    fn weight(&self, conj: bool, shift: C64, a: usize) -> C64 {
        let v = self.g.expect("checked during preparation").g().get(a, a);
        (if conj { v.conj() } else { v }) - shift
    }
}

fn prepare<'a>(graph: &AtomicGraph, ctx: &EvalContext<'a>, externals: &[(&str, usize)]) -> Result<Prepared<'a>> {
    graph.validate()?;
    let ks = ctx.kernels;
    let geom = *ks.geometry();
    let lat = *geom.lattice();
    let n = lat.n();
    let mut fixed = vec![None; graph.atoms.len()];
    for (name, site) in externals {
        let i = graph
            .atom_index(name)
            .ok_or_else(|| Error::InvalidArgument(format!("{}: no atom named {name:?}", graph.name)))?;
        if graph.atoms[i].role != AtomRole::External {
            return Err(Error::InvalidArgument(format!("{}: atom {name:?} is internal", graph.name)));
        }
        if *site >= n {
            return Err(Error::InvalidArgument(format!("site {site} out of range for N = {n}")));
        }
        fixed[i] = Some(*site);
    }
    let mut var = vec![None; graph.atoms.len()];
    let mut nvars = 0;
    for (i, a) in graph.atoms.iter().enumerate() {
        match a.role {
            AtomRole::External if fixed[i].is_none() => {
                return Err(Error::Precondition(format!("{}: external atom {:?} is unassigned", graph.name, a.name)));
            }
            AtomRole::Internal => {
                var[i] = Some(nvars);
                nvars += 1;
            }
            AtomRole::External => {}
        }
    }
    if nvars > ctx.budget.max_internal {
        return Err(Error::BudgetExceeded(format!(
            "{}: {nvars} internal atoms exceed the budget of {}",
            graph.name, ctx.budget.max_internal
        )));
    }

    let needs_g = graph.edges.iter().any(|e| e.kind.is_solid()) || !graph.weights.is_empty();
    let g = if needs_g {
        let f = ctx
            .frame
            .ok_or_else(|| Error::MissingKernel(format!("{}: G factors need a resolvent frame", graph.name)))?;
        if f.sample().geometry() != &geom {
            return Err(Error::GeometryMismatch("resolvent frame and kernels live on different tori".into()));
        }
        if (f.z() - ks.point.z).norm() > 1e-12 * (1.0 + f.z().norm()) {
            return Err(Error::Precondition(format!("frame z = {} differs from kernel z = {}", f.z(), ks.point.z)));
        }
        Some(f)
    } else {
        None
    };

    let mut edges = Vec::with_capacity(graph.edges.len());
    for e in &graph.edges {
        let r = match &e.kind {
            EdgeKind::Gplus => Resolved::G { conj: false },
            EdgeKind::Gminus => Resolved::G { conj: true },
            EdgeKind::S => Resolved::Kernel(ks.s.values().into()),
            EdgeKind::Splus => Resolved::Kernel(ks.splus.values().into()),
            EdgeKind::Sminus => Resolved::Kernel(ks.sminus.values().into()),
            EdgeKind::Theta => {
                let t = ks.theta.as_ref().ok_or_else(|| Error::MissingKernel("Theta needs eta > 0".into()))?;
                Resolved::Kernel(t.values().into())
            }
            EdgeKind::LabelledTheta { order, labels } => {
                let t = ks.theta.as_ref().ok_or_else(|| Error::MissingKernel("Theta needs eta > 0".into()))?;
                let mut es = Vec::with_capacity(labels.len());
                for l in labels {
                    es.push(
                        ks.energies
                            .get(l)
                            .cloned()
                            .ok_or_else(|| Error::MissingKernel(format!("no self-energy labelled {l:?}")))?,
                    );
                }
                let k = labelled_edge(t, &es)?;
                if k.order() != Some(*order) {
                    return Err(Error::InvalidGraph(format!(
                        "{}: labelled edge declares order {order} but its labels give {:?}",
                        graph.name,
                        k.order()
                    )));
                }
                Resolved::Kernel(k.values().to_vec().into())
            }
            EdgeKind::Dotted => Resolved::Dot,
            EdgeKind::CrossDotted => Resolved::Cross,
        };
        edges.push((e.from, e.to, r));
    }
    let m = ks.point.m;
    let weights = graph
        .weights
        .iter()
        .map(|w| {
            let conj = w.charge == Charge::Minus;
            let shift = match (w.light, conj) {
                (false, _) => C64::new(0.0, 0.0),
                (true, false) => m,
                (true, true) => m.conj(),
            };
            (w.atom, conj, shift)
        })
        .collect();
    Ok(Prepared { lat, edges, weights, g, coefficient: graph.coefficient.eval(&ks.point)?, fixed, var, nvars })
}

/// Reference semantics: sum over every assignment of the internal atoms.
pub fn evaluate_brute(graph: &AtomicGraph, ctx: &EvalContext, externals: &[(&str, usize)]) -> Result<C64> {
    let p = prepare(graph, ctx, externals)?;
    let n = p.lat.n();
    let work = (n as u64).checked_pow(p.nvars as u32).and_then(|w| w.checked_mul((graph.edges.len() + 1) as u64));
    if work.map_or(true, |w| w > ctx.budget.max_work) {
        return Err(Error::BudgetExceeded(format!("{}: brute-force sum exceeds the work cap", graph.name)));
    }
    let mut sites: Vec<usize> = p.fixed.iter().map(|s| s.unwrap_or(0)).collect();
    let internal: Vec<usize> = (0..sites.len()).filter(|&i| p.var[i].is_some()).collect();
    let mut total = C64::new(0.0, 0.0);
    loop {
        let mut term = C64::new(1.0, 0.0);
        for (a, b, r) in &p.edges {
            term *= p.edge(r, sites[*a], sites[*b]);
            if term == C64::new(0.0, 0.0) {
                break;
            }
        }
        for &(a, conj, shift) in &p.weights {
            term *= p.weight(conj, shift, sites[a]);
        }
        total += term;
        let mut k = 0;
        while k < internal.len() {
            let s = &mut sites[internal[k]];
            *s += 1;
            if *s < n {
                break;
            }
            *s = 0;
            k += 1;
        }
        if k == internal.len() {
            break;
        }
    }
    Ok(total * p.coefficient)
}

#[derive(Clone)]
struct Factor {
    scope: Vec<usize>,
    table: Vec<C64>,
}

impl Factor {
    fn index(&self, n: usize, assignment: &[usize]) -> usize {
        self.scope.iter().fold(0, |acc, &v| acc * n + assignment[v])
    }
}

/// Greedy elimination order minimizing the scope of each new factor; returns
/// the order and the work of executing it, or `None` on overflow.
fn plan(scopes: &[Vec<usize>], nvars: usize, n: usize) -> (Vec<usize>, Option<u64>) {
    let mut scopes: Vec<Vec<usize>> = scopes.to_vec();
    let mut alive: Vec<usize> = (0..nvars).collect();
    let mut order = Vec::with_capacity(nvars);
    let mut work: Option<u64> = Some(0);
    while !alive.is_empty() {
        let union_for = |v: usize, scopes: &[Vec<usize>]| {
            let mut u: Vec<usize> = scopes.iter().filter(|s| s.contains(&v)).flatten().copied().collect();
            u.push(v);
            u.sort_unstable();
            u.dedup();
            u
        };
        let (pos, &v) = alive
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| (union_for(v, &scopes).len(), v))
            .expect("alive is nonempty");
        let u = union_for(v, &scopes);
        let involved = scopes.iter().filter(|s| s.contains(&v)).count().max(1) as u64;
        work = work.and_then(|w| {
            (n as u64).checked_pow(u.len() as u32).and_then(|c| c.checked_mul(involved)).and_then(|c| w.checked_add(c))
        });
        scopes.retain(|s| !s.contains(&v));
        scopes.push(u.into_iter().filter(|&x| x != v).collect());
        alive.remove(pos);
        order.push(v);
    }
    (order, work)
}

/// Graph value by variable elimination over dense factors.
pub fn evaluate(graph: &AtomicGraph, ctx: &EvalContext, externals: &[(&str, usize)]) -> Result<C64> {
    let p = prepare(graph, ctx, externals)?;
    let n = p.lat.n();
    let mut constant = p.coefficient;
    let mut factors: Vec<Factor> = Vec::new();
    let pair_cost = (n as u64) * (n as u64);

    // Scopes first, so the budget is checked before any table is filled.
    let mut scopes: Vec<Vec<usize>> = Vec::new();
    for (a, b, _) in &p.edges {
        let mut s: Vec<usize> = [p.var[*a], p.var[*b]].into_iter().flatten().collect();
        s.sort_unstable();
        s.dedup();
        scopes.push(s);
    }
    for &(a, _, _) in &p.weights {
        scopes.push(p.var[a].into_iter().collect());
    }
    let (order, work) = plan(&scopes.iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>(), p.nvars, n);
    let setup = pair_cost.saturating_mul(scopes.len() as u64);
    match work.and_then(|w| w.checked_add(setup)) {
        Some(w) if w <= ctx.budget.max_work => {}
        _ => {
            return Err(Error::BudgetExceeded(format!("{}: elimination plan exceeds the work cap", graph.name)));
        }
    }

    let site_of = |atom: usize, assignment: &[usize]| match p.var[atom] {
        Some(v) => assignment[v],
        None => p.fixed[atom].expect("externals are assigned"),
    };
    let mut assignment = vec![0usize; p.nvars];
    for ((a, b, r), scope) in p.edges.iter().zip(&scopes) {
        match scope.len() {
            0 => constant *= p.edge(r, site_of(*a, &assignment), site_of(*b, &assignment)),
            _ => {
                let mut table = Vec::with_capacity(n.pow(scope.len() as u32));
                fill(scope, n, &mut assignment, &mut |asg| {
                    table.push(p.edge(r, site_of(*a, asg), site_of(*b, asg)));
                });
                factors.push(Factor { scope: scope.clone(), table });
            }
        }
    }
    for (&(a, conj, shift), scope) in p.weights.iter().zip(&scopes[p.edges.len()..]) {
        match scope.len() {
            0 => constant *= p.weight(conj, shift, site_of(a, &assignment)),
            _ => {
                let table = (0..n).map(|s| p.weight(conj, shift, s)).collect();
                factors.push(Factor { scope: scope.clone(), table });
            }
        }
    }

    for v in order {
        let (involved, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.scope.contains(&v));
        factors = rest;
        let mut union: Vec<usize> = involved.iter().flat_map(|f| f.scope.iter().copied()).collect();
        union.sort_unstable();
        union.dedup();
        let new_scope: Vec<usize> = union.iter().copied().filter(|&x| x != v).collect();
        if involved.is_empty() {
            // A free internal atom contributes a factor N.
            constant *= n as f64;
            continue;
        }
        let mut table = Vec::with_capacity(n.pow(new_scope.len() as u32));
        fill(&new_scope, n, &mut assignment, &mut |asg| {
            let mut local = asg.to_vec();
            let mut acc = C64::new(0.0, 0.0);
            for s in 0..n {
                local[v] = s;
                let mut term = C64::new(1.0, 0.0);
                for f in &involved {
                    term *= f.table[f.index(n, &local)];
                }
                acc += term;
            }
            table.push(acc);
        });
        if new_scope.is_empty() {
            constant *= table[0];
        } else {
            factors.push(Factor { scope: new_scope, table });
        }
    }
    for f in factors {
        debug_assert!(f.scope.is_empty());
        constant *= f.table[0];
    }
    Ok(constant)
}

/// Calls `visit` for every assignment of the variables in `scope`, in table order.
fn fill(scope: &[usize], n: usize, assignment: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
    for &v in scope {
        assignment[v] = 0;
    }
    loop {
        visit(assignment);
        let mut k = scope.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let v = scope[k];
            assignment[v] += 1;
            if assignment[v] < n {
                break;
            }
            assignment[v] = 0;
        }
    }
}

/// Sum of the values of a list of graphs.
pub fn evaluate_sum(graphs: &[AtomicGraph], ctx: &EvalContext, externals: &[(&str, usize)]) -> Result<C64> {
    graphs.iter().try_fold(C64::new(0.0, 0.0), |acc, g| Ok(acc + evaluate(g, ctx, externals)?))
}

/// Row-major `N x N` table of values over every placement of externals `x` and `y`,
/// with any other externals held at the given sites.
pub fn evaluate_two_point(
    graph: &AtomicGraph,
    ctx: &EvalContext,
    x: &str,
    y: &str,
    others: &[(&str, usize)],
) -> Result<Vec<C64>> {
    let n = ctx.kernels.geometry().n();
    let mut out = Vec::with_capacity(n * n);
    for sx in 0..n {
        for sy in 0..n {
            let mut ext: Vec<(&str, usize)> = vec![(x, sx), (y, sy)];
            ext.extend_from_slice(others);
            out.push(evaluate(graph, ctx, &ext)?);
        }
    }
    Ok(out)
}

/// The two-point graph as a translation invariant kernel, read off the row `x = 0`.
pub fn graph_kernel(graph: &AtomicGraph, ctx: &EvalContext, x: &str, y: &str) -> Result<LatticeKernel> {
    let geom = ctx.kernels.geometry();
    let values = (0..geom.n()).map(|sy| evaluate(graph, ctx, &[(x, 0), (y, sy)])).collect::<Result<Vec<_>>>()?;
    LatticeKernel::from_values(geom, crate::kernels::KernelKind::Custom, values, Some(ctx.kernels.point))
}
