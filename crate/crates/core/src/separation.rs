//! Exact separation oracles.
//!
//! m-, t- and d-separation are decided by reachability in the automata of
//! [`crate::automaton`]; ancestral m-separation by exhaustive path search.
//! Witnesses are shortest walks, ties broken by the walk order.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::automaton::{mask, Automaton, ColliderRules, ConnectionRules, DirectedRules, TrekRules};
use crate::graph::{DirectedMixedGraph, VertexSet};
use crate::par::{self, Execution};
use crate::walk::{Step, StepKind, Walk};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeparationError {
    #[error("J, K and L must be pairwise disjoint")]
    Overlap,
    #[error("vertex index {0} is out of range")]
    OutOfRange(usize),
    #[error("witness rewriting did not terminate within {0} iterations")]
    RewriteDiverged(usize),
    #[error("undirected graph has a self-loop at {0}")]
    SelfLoop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeparationKind {
    M,
    T,
    D,
    AncestralM,
    /// Undirected separation in the augmented ancestral margin.
    U,
}

impl SeparationKind {
    pub const ALL: [SeparationKind; 5] =
        [SeparationKind::M, SeparationKind::T, SeparationKind::D, SeparationKind::AncestralM, SeparationKind::U];
}

impl FromStr for SeparationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" => Ok(SeparationKind::M),
            "t" => Ok(SeparationKind::T),
            "d" => Ok(SeparationKind::D),
            "am" => Ok(SeparationKind::AncestralM),
            "u" => Ok(SeparationKind::U),
            _ => Err(format!("unknown separation kind `{s}` (expected m, t, d, am or u)")),
        }
    }
}

impl fmt::Display for SeparationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeparationKind::M => "m",
            SeparationKind::T => "t",
            SeparationKind::D => "d",
            SeparationKind::AncestralM => "am",
            SeparationKind::U => "u",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationQuery {
    pub kind: SeparationKind,
    pub j: VertexSet,
    pub k: VertexSet,
    pub l: VertexSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationVerdict {
    pub separated: bool,
    /// Present iff connected.
    pub witness: Option<Walk>,
    pub warnings: Vec<String>,
}

impl SeparationVerdict {
    fn from_witness(witness: Option<Walk>) -> Self {
        SeparationVerdict { separated: witness.is_none(), witness, warnings: Vec::new() }
    }

    fn trivially_separated() -> Self {
        SeparationVerdict { separated: true, witness: None, warnings: Vec::new() }
    }
}

fn check(d: usize, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<(), SeparationError> {
    if let Some(&v) = j.iter().chain(k).chain(l).find(|&&v| v >= d) {
        return Err(SeparationError::OutOfRange(v));
    }
    if !j.is_disjoint(k) || !j.is_disjoint(l) || !k.is_disjoint(l) {
        return Err(SeparationError::Overlap);
    }
    Ok(())
}

/// Checks the sets; `Some` is the verdict for an empty `J` or `K`.
fn prelude(d: usize, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<Option<SeparationVerdict>, SeparationError> {
    check(d, j, k, l)?;
    Ok((j.is_empty() || k.is_empty()).then(SeparationVerdict::trivially_separated))
}

/// No walk from `J` to `K` is unblocked by `L`.
///
/// States are `(vertex, arrived with a head?)`. A vertex in `L` may only be
/// passed as a collider, a vertex outside `L` only as a non-collider.
pub fn m_separated(g: &DirectedMixedGraph, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<SeparationVerdict, SeparationError> {
    if let Some(v) = prelude(g.num_vertices(), j, k, l)? {
        return Ok(v);
    }
    let a = Automaton::new(g, ConnectionRules::m(g.num_vertices(), l));
    Ok(SeparationVerdict::from_witness(a.shortest_witness(j, k)))
}

/// No sequence of treks from `J` to `K`, joined at vertices of `L`, whose
/// other non-endpoints avoid `L`.
///
/// States are `(vertex, leg)`. The left leg admits `<-` and one `<->`
/// (switching to the right leg); the right leg admits `->`. Since a trek
/// arrives at its end with a head and the next trek leaves with a head, a
/// junction is a collider and must be in `L`; every other non-endpoint is a
/// non-collider and must avoid `L`. Accepting only in the right leg ensures
/// the last trek is complete.
pub fn t_separated(g: &DirectedMixedGraph, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<SeparationVerdict, SeparationError> {
    if let Some(v) = prelude(g.num_vertices(), j, k, l)? {
        return Ok(v);
    }
    let a = Automaton::new(g, TrekRules { in_l: mask(g.num_vertices(), l), junctions: true });
    Ok(SeparationVerdict::from_witness(a.shortest_witness(j, k)))
}

/// m-separation restricted to walks of directed edges.
pub fn d_separated(g: &DirectedMixedGraph, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<SeparationVerdict, SeparationError> {
    if let Some(v) = prelude(g.num_vertices(), j, k, l)? {
        return Ok(v);
    }
    let a = Automaton::new(g, ConnectionRules::d(g.num_vertices(), l));
    Ok(SeparationVerdict::from_witness(a.shortest_witness(j, k)))
}

/// No path from `J` to `K` escapes ancestral blocking by `L`.
pub fn ancestral_m_separated(
    g: &DirectedMixedGraph,
    j: &VertexSet,
    k: &VertexSet,
    l: &VertexSet,
) -> Result<SeparationVerdict, SeparationError> {
    if let Some(v) = prelude(g.num_vertices(), j, k, l)? {
        return Ok(v);
    }
    let a = Automaton::new(g, ConnectionRules::ancestral(g, l, false));
    Ok(SeparationVerdict::from_witness(a.shortest_path(j, k)))
}

pub fn separated(g: &DirectedMixedGraph, q: &SeparationQuery) -> Result<SeparationVerdict, SeparationError> {
    match q.kind {
        SeparationKind::M => m_separated(g, &q.j, &q.k, &q.l),
        SeparationKind::T => t_separated(g, &q.j, &q.k, &q.l),
        SeparationKind::D => d_separated(g, &q.j, &q.k, &q.l),
        SeparationKind::AncestralM => ancestral_m_separated(g, &q.j, &q.k, &q.l),
        SeparationKind::U => m_separated_via_augmentation(g, &q.j, &q.k, &q.l),
    }
}

/// Evaluates many queries against one graph.
pub fn separate_batch(
    g: &DirectedMixedGraph,
    queries: &[SeparationQuery],
    exec: Execution,
) -> Vec<Result<SeparationVerdict, SeparationError>> {
    par::map(exec, queries.iter().collect(), |q| separated(g, q))
}

/// A simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    labels: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl UndirectedGraph {
    pub fn new(labels: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, SeparationError> {
        let d = labels.len();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= d || b >= d {
                return Err(SeparationError::OutOfRange(a.max(b)));
            }
            if a == b {
                return Err(SeparationError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut adj = vec![Vec::new(); d];
        for &(a, b) in &set {
            adj[a].push(b);
            adj[b].push(a);
        }
        for n in &mut adj {
            n.sort_unstable();
        }
        Ok(UndirectedGraph { labels, edges: set, adj })
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub graph: UndirectedGraph,
    pub warning: Option<String>,
}

/// Joins every pair of distinct vertices connected by a walk whose
/// non-endpoints are all colliders. Non-canonical input is canonicalized first.
pub fn augment(g: &DirectedMixedGraph) -> Augmented {
    augment_with(g, Execution::default())
}

pub fn augment_with(g: &DirectedMixedGraph, exec: Execution) -> Augmented {
    let (canon, warning) = if g.is_canonical() {
        (g.clone(), None)
    } else {
        (g.canonicalize(), Some("input graph is not canonical; bidirected loops were added before augmenting".to_string()))
    };
    let a = Automaton::new(&canon, ColliderRules);
    let reach = a.reachability(exec);
    let edges: Vec<(usize, usize)> =
        reach.iter().enumerate().flat_map(|(j, ks)| ks.iter().filter(move |&&k| k != j).map(move |&k| (j, k))).collect();
    let graph = UndirectedGraph::new(canon.labels().to_vec(), edges).expect("no self-loops by construction");
    Augmented { graph, warning }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UVerdict {
    pub separated: bool,
    /// Vertex sequence of a shortest connecting path, present iff connected.
    pub path: Option<Vec<usize>>,
}

/// Every path from `J` to `K` passes through `L`.
pub fn u_separated(ug: &UndirectedGraph, j: &VertexSet, k: &VertexSet, l: &VertexSet) -> Result<UVerdict, SeparationError> {
    check(ug.num_vertices(), j, k, l)?;
    let d = ug.num_vertices();
    let mut prev = vec![usize::MAX; d];
    let mut seen = vec![false; d];
    let mut queue = VecDeque::new();
    for &v in j {
        seen[v] = true;
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        if k.contains(&v) {
            let mut path = vec![v];
            let mut at = v;
            while prev[at] != usize::MAX {
                at = prev[at];
                path.push(at);
            }
            path.reverse();
            return Ok(UVerdict { separated: false, path: Some(path) });
        }
        for &n in ug.neighbors(v) {
            if !seen[n] && !l.contains(&n) {
                seen[n] = true;
                prev[n] = v;
                queue.push_back(n);
            }
        }
    }
    Ok(UVerdict { separated: true, path: None })
}

/// m-separation decided through the augmented graph of the ancestral margin
/// `an(J u K u L)`. When connected, the undirected path is turned back into
/// a walk unblocked by `L`.
pub fn m_separated_via_augmentation(
    g: &DirectedMixedGraph,
    j: &VertexSet,
    k: &VertexSet,
    l: &VertexSet,
) -> Result<SeparationVerdict, SeparationError> {
    if let Some(v) = prelude(g.num_vertices(), j, k, l)? {
        return Ok(v);
    }
    let all: VertexSet = j.iter().chain(k).chain(l).copied().collect();
    let keep: Vec<usize> = g.ancestral_closure(&all).into_iter().collect();
    let sub = g.induced_subgraph(&keep.iter().copied().collect());
    let local = |s: &VertexSet| -> VertexSet { s.iter().map(|v| keep.binary_search(v).expect("ancestral")).collect() };
    let (jl, kl, ll) = (local(j), local(k), local(l));
    let aug = augment(&sub);
    let mut warnings: Vec<String> = aug.warning.into_iter().collect();
    let uv = u_separated(&aug.graph, &jl, &kl, &ll)?;
    let Some(path) = uv.path else {
        return Ok(SeparationVerdict { separated: true, witness: None, warnings });
    };
    let walk = rebuild_walk(&sub, &path, &jl, &kl, &ll)?;
    let steps =
        walk.steps().iter().map(|s| Step { from: keep[s.from], to: keep[s.to], kind: s.kind }).collect::<Vec<_>>();
    let witness = Walk::from_steps(keep[walk.start()], steps).expect("relabelled steps stay connected");
    if !g.is_canonical() {
        warnings.push("witness was built in the canonicalized graph".to_string());
    }
    Ok(SeparationVerdict { separated: false, witness: Some(witness), warnings })
}

/// Replaces each undirected edge by a collider-connected walk, then removes
/// colliders outside `L` one at a time: cut at the collider if it lies in
/// `J` or `K`, otherwise reroute through a directed walk from it to `J`,
/// `K` or `L` (one of which exists because the graph is ancestral for
/// `J u K u L`).
fn rebuild_walk(
    g: &DirectedMixedGraph,
    path: &[usize],
    j: &VertexSet,
    k: &VertexSet,
    l: &VertexSet,
) -> Result<Walk, SeparationError> {
    let cc = Automaton::new(g, ColliderRules);
    let mut w = Walk::trivial(path[0]);
    for pair in path.windows(2) {
        let piece = cc
            .shortest_witness(&VertexSet::from([pair[0]]), &VertexSet::from([pair[1]]))
            .expect("augmented edge has a collider-connected walk");
        w = w.concat(&piece).expect("pieces share endpoints");
    }
    let bad = |w: &Walk| -> Vec<usize> {
        (1..w.len()).filter(|&i| w.is_collider_at(i) && !l.contains(&w.vertices()[i])).collect()
    };
    let cap = bad(&w).len();
    let jkl: VertexSet = j.iter().chain(k).chain(l).copied().collect();
    let down = Automaton::new(g, DirectedRules { in_l: mask(g.num_vertices(), &jkl) });
    for _ in 0..cap {
        let Some(&i) = bad(&w).first() else {
            return Ok(w);
        };
        let v = w.vertices()[i];
        let w1 = w.segment(0, i);
        let w2 = w.segment(i, w.len());
        let from_v = VertexSet::from([v]);
        w = if j.contains(&v) {
            w2
        } else if k.contains(&v) {
            w1
        } else if let Some(p) = down.shortest_witness(&from_v, j) {
            p.reversed().concat(&w2).expect("shares v")
        } else if let Some(p) = down.shortest_witness(&from_v, k) {
            w1.concat(&p).expect("shares v")
        } else if let Some(p) = down.shortest_witness(&from_v, l) {
            w1.concat(&p).and_then(|x| x.concat(&p.reversed())).and_then(|x| x.concat(&w2)).expect("shares endpoints")
        } else {
            return Err(SeparationError::RewriteDiverged(cap));
        };
    }
    if bad(&w).is_empty() {
        Ok(w)
    } else {
        Err(SeparationError::RewriteDiverged(cap))
    }
}

/// Whether a walk is a valid witness of the given kind for `L`.
pub fn witness_is_valid(g: &DirectedMixedGraph, kind: SeparationKind, w: &Walk, l: &VertexSet) -> bool {
    use crate::queries::{ancestrally_blocked, blocked, is_trek};
    if w.is_empty() || !w.is_walk_in(g) {
        return false;
    }
    match kind {
        SeparationKind::M | SeparationKind::U => !blocked(w, l),
        SeparationKind::D => !blocked(w, l) && w.steps().iter().all(|s| s.kind != StepKind::Bidirected),
        SeparationKind::AncestralM => w.is_path() && !ancestrally_blocked(w, l, g),
        SeparationKind::T => {
            if blocked(w, l) {
                return false;
            }
            let mut cuts = vec![0];
            cuts.extend((1..w.len()).filter(|&i| w.is_collider_at(i)));
            cuts.push(w.len());
            cuts.windows(2).all(|c| is_trek(&w.segment(c[0], c[1])))
        }
    }
}
