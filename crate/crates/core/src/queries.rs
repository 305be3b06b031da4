//! Constructors for the named walk families, plus per-walk predicates.
//!
//! Every constructor enumerates walks up to a length budget and returns a
//! [`Truncated`] matrix. Decisions about emptiness belong to
//! [`crate::separation`], which never depends on a budget.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::automaton::{mask, Automaton, ConnectionRules};
use crate::graph::{DirectedMixedGraph, VertexSet};
use crate::walk::{StepKind, Truncated, Walk, WalkError, WalkMatrix};

/// Default enumeration budget, `2 * d` steps.
pub fn default_budget(g: &DirectedMixedGraph) -> usize {
    (2 * g.num_vertices()).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum WalkKind {
    DirectedRight,
    DirectedLeft,
    Trek,
    DConnectedArc,
    MConnectedArc,
    ConfoundingArc,
    ColliderConnected,
    BidirectedChain,
    MConnWalk,
    TConnWalk,
    DConnWalk,
}

impl WalkKind {
    pub const ALL: [WalkKind; 11] = [
        WalkKind::DirectedRight,
        WalkKind::DirectedLeft,
        WalkKind::Trek,
        WalkKind::DConnectedArc,
        WalkKind::MConnectedArc,
        WalkKind::ConfoundingArc,
        WalkKind::ColliderConnected,
        WalkKind::BidirectedChain,
        WalkKind::MConnWalk,
        WalkKind::TConnWalk,
        WalkKind::DConnWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WalkKind::DirectedRight => "directed",
            WalkKind::DirectedLeft => "left-directed",
            WalkKind::Trek => "trek",
            WalkKind::DConnectedArc => "d-arc",
            WalkKind::MConnectedArc => "m-arc",
            WalkKind::ConfoundingArc => "confounding-arc",
            WalkKind::ColliderConnected => "collider",
            WalkKind::BidirectedChain => "bidirected-chain",
            WalkKind::MConnWalk => "mconn",
            WalkKind::TConnWalk => "tconn",
            WalkKind::DConnWalk => "dconn",
        }
    }
}

impl FromStr for WalkKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WalkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown walk kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WalkClassification {
    /// Vertices at collider positions, in walk order.
    pub colliders: Vec<usize>,
    pub bidirected_count: usize,
    pub is_path: bool,
    pub is_trek: bool,
    pub is_d_connected: bool,
    pub is_arc: bool,
}

pub fn classify_walk(w: &Walk) -> Result<WalkClassification, WalkError> {
    if w.is_empty() {
        return Err(WalkError::EmptyWalk);
    }
    let vs = w.vertices();
    let colliders: Vec<usize> = (1..w.len()).filter(|&i| w.is_collider_at(i)).map(|i| vs[i]).collect();
    let bidirected_count = w.bidirected_count();
    let is_arc = colliders.is_empty();
    Ok(WalkClassification {
        is_trek: is_arc && bidirected_count == 1,
        is_d_connected: is_arc && bidirected_count == 0,
        is_arc,
        colliders,
        bidirected_count,
        is_path: w.is_path(),
    })
}

pub fn is_right_directed(w: &Walk) -> bool {
    !w.is_empty() && w.steps().iter().all(|s| s.kind == StepKind::Forward)
}

pub fn is_left_directed(w: &Walk) -> bool {
    !w.is_empty() && w.steps().iter().all(|s| s.kind == StepKind::Backward)
}

/// `<-* <-> ->*`.
pub fn is_trek(w: &Walk) -> bool {
    let s = w.steps();
    let Some(b) = s.iter().position(|x| x.kind == StepKind::Bidirected) else {
        return false;
    };
    s[..b].iter().all(|x| x.kind == StepKind::Backward) && s[b + 1..].iter().all(|x| x.kind == StepKind::Forward)
}

/// Whether `w` has a collider outside `L` or a non-collider non-endpoint in `L`.
pub fn blocked(w: &Walk, l: &VertexSet) -> bool {
    let vs = w.vertices();
    (1..w.len()).any(|i| if w.is_collider_at(i) { !l.contains(&vs[i]) } else { l.contains(&vs[i]) })
}

/// Like [`blocked`], but a collider only blocks when it has no directed
/// walk into `L` (and is not in `L`).
pub fn ancestrally_blocked(w: &Walk, l: &VertexSet, g: &DirectedMixedGraph) -> bool {
    let an = g.ancestral_closure(l);
    let vs = w.vertices();
    (1..w.len()).any(|i| if w.is_collider_at(i) { !an.contains(&vs[i]) } else { l.contains(&vs[i]) })
}

pub fn interior_avoids(w: &Walk, l: &VertexSet) -> bool {
    w.interior().all(|v| !l.contains(&v))
}

/// Accumulates products under a budget, tracking exactness.
struct Budgeted {
    budget: usize,
    exact: bool,
}

impl Budgeted {
    fn new(budget: usize) -> Self {
        Budgeted { budget, exact: true }
    }

    fn mul(&mut self, a: &WalkMatrix, b: &WalkMatrix) -> WalkMatrix {
        let t = a.multiply_bounded(b, self.budget).expect("same dimension");
        self.exact &= t.exact;
        t.matrix
    }

    fn series(&mut self, a: &WalkMatrix) -> WalkMatrix {
        let t = a.truncated_series(self.budget);
        self.exact &= t.exact;
        t.matrix
    }

    fn take(&mut self, t: Truncated) -> WalkMatrix {
        self.exact &= t.exact;
        t.matrix
    }

    fn done(self, matrix: WalkMatrix) -> Truncated {
        Truncated { matrix, exact: self.exact }
    }
}

fn add(a: &WalkMatrix, b: &WalkMatrix) -> WalkMatrix {
    a.add(b).expect("same dimension")
}

fn id_plus(a: &WalkMatrix) -> WalkMatrix {
    add(&WalkMatrix::identity(a.dim()), a)
}

/// `sum_{q >= 1} D^q`.
pub fn directed_walks(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    WalkMatrix::basic_directed(g).truncated_series(budget)
}

pub fn left_directed_walks(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let t = directed_walks(g, budget);
    Truncated { matrix: t.matrix.transpose(), exact: t.exact }
}

/// `(Id + left) B (Id + right)`.
pub fn treks(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let right = id_plus(&b.take(directed_walks(g, budget)));
    let left = right.transpose();
    let lb = b.mul(&left, &WalkMatrix::basic_bidirected(g));
    let m = b.mul(&lb, &right);
    b.done(m)
}

/// `(Id + left)(Id + right) \ Id`.
pub fn d_connected_arcs(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let right = id_plus(&b.take(directed_walks(g, budget)));
    let m = b.mul(&right.transpose(), &right);
    b.done(m.difference(&WalkMatrix::identity(g.num_vertices())).expect("same dimension"))
}

/// Treks plus d-connected arcs: every collider-free walk.
pub fn m_connected_arcs(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let t = b.take(treks(g, budget));
    let d = b.take(d_connected_arcs(g, budget));
    b.done(add(&t, &d))
}

/// m-connected arcs that are neither right- nor left-directed.
pub fn confounding_arcs(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let m = b.take(m_connected_arcs(g, budget));
    let r = b.take(directed_walks(g, budget));
    let m = m.difference(&r).expect("same dimension").difference(&r.transpose()).expect("same dimension");
    b.done(m)
}

/// Paths made of one or several confounding arcs. Exact whenever
/// `budget >= d - 1`, since paths are no longer than that.
pub fn confounding_paths(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let arcs = confounding_arcs(g, budget);
    let series = arcs.matrix.truncated_series(budget);
    let exact = (arcs.exact && series.exact) || budget + 1 >= g.num_vertices();
    Truncated { matrix: series.matrix.paths_only(), exact }
}

/// Right-directed walks whose non-endpoints avoid `L`:
/// `D + D[V, L^c] (Id + sum D[L^c, L^c]^q) D[L^c, V]`.
pub fn unblocked_directed_walks(g: &DirectedMixedGraph, l: &VertexSet, budget: usize) -> Truncated {
    let d = g.num_vertices();
    let all = vec![true; d];
    let lc: Vec<bool> = mask(d, l).iter().map(|x| !x).collect();
    let dm = WalkMatrix::basic_directed(g).filter(|w| w.len() <= budget);
    let mut b = Budgeted::new(budget);
    if dm.total_walks() != WalkMatrix::basic_directed(g).total_walks() {
        b.exact = false;
    }
    let inner = id_plus(&b.series(&dm.restrict(&lc, &lc)));
    let head = b.mul(&dm.restrict(&all, &lc), &inner);
    let through = b.mul(&head, &dm.restrict(&lc, &all));
    b.done(add(&dm, &through))
}

/// Treks whose non-endpoints avoid `L`, as the sum of four products: a lone
/// bidirected edge, a left leg ending outside `L`, a right leg starting
/// outside `L`, or both legs.
pub fn unblocked_treks(g: &DirectedMixedGraph, l: &VertexSet, budget: usize) -> Truncated {
    let d = g.num_vertices();
    let all = vec![true; d];
    let lc: Vec<bool> = mask(d, l).iter().map(|x| !x).collect();
    let mut b = Budgeted::new(budget);
    let right = b.take(unblocked_directed_walks(g, l, budget));
    let left = right.transpose();
    let bm = WalkMatrix::basic_bidirected(g).filter(|w| w.len() <= budget);
    let left_lc = left.restrict(&all, &lc);
    let right_lc = right.restrict(&lc, &all);
    let t2 = b.mul(&left_lc, &bm.restrict(&lc, &all));
    let t3 = b.mul(&bm.restrict(&all, &lc), &right_lc);
    let lb = b.mul(&left_lc, &bm.restrict(&lc, &lc));
    let t4 = b.mul(&lb, &right_lc);
    b.done(add(&add(&bm, &t2), &add(&t3, &t4)))
}

/// `sum_{q >= 1} B^q`.
pub fn bidirected_chains(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    WalkMatrix::basic_bidirected(g).truncated_series(budget)
}

/// `(Id + D)(Id + sum B^q)(Id + D^T) \ Id`: walks whose non-endpoints are all colliders.
pub fn collider_connected(g: &DirectedMixedGraph, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let dm = id_plus(&WalkMatrix::basic_directed(g));
    let chains = id_plus(&b.take(bidirected_chains(g, budget)));
    let left = b.mul(&dm, &chains);
    let m = b.mul(&left, &dm.transpose());
    b.done(m.difference(&WalkMatrix::identity(g.num_vertices())).expect("same dimension"))
}

/// Connected components of the bidirected skeleton, loops ignored. Sorted by
/// smallest member.
pub fn districts(g: &DirectedMixedGraph) -> Vec<VertexSet> {
    let d = g.num_vertices();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in g.bidirected_edges() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, VertexSet> = BTreeMap::new();
    for v in 0..d {
        let r = find(&mut parent, v);
        groups.entry(r).or_default().insert(v);
    }
    groups.into_values().collect()
}

/// Joins arcs unblocked by `L` at colliders in `L`:
/// `A + A_in (Id + sum A_both^q) A_out`, where `A_in` ends with a head in
/// `L`, `A_out` starts with a head in `L`, and `A_both` does both.
fn join_at_colliders(arcs: &WalkMatrix, l: &VertexSet, mut b: Budgeted) -> Truncated {
    let head_start = |w: &Walk| w.steps().first().is_some_and(|s| s.head_at_from()) && l.contains(&w.start());
    let head_end = |w: &Walk| w.steps().last().is_some_and(|s| s.head_at_to()) && l.contains(&w.end());
    let a_in = arcs.filter(head_end);
    let a_out = arcs.filter(head_start);
    let a_both = arcs.filter(|w| head_start(w) && head_end(w));
    let mid = id_plus(&b.series(&a_both));
    let left = b.mul(&a_in, &mid);
    let joined = b.mul(&left, &a_out);
    b.done(add(arcs, &joined))
}

/// Walks unblocked by `L` (colliders in `L`, other non-endpoints outside).
pub fn mconn_walks(g: &DirectedMixedGraph, l: &VertexSet, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let arcs = b.take(m_connected_arcs(g, budget)).filter(|w| interior_avoids(w, l));
    join_at_colliders(&arcs, l, b)
}

/// Sequences of treks unblocked by `L`, glued at vertices of `L`.
pub fn tconn_walks(g: &DirectedMixedGraph, l: &VertexSet, budget: usize) -> Truncated {
    let d = g.num_vertices();
    let all = vec![true; d];
    let in_l = mask(d, l);
    let mut b = Budgeted::new(budget);
    let t = b.take(unblocked_treks(g, l, budget));
    let mid = id_plus(&b.series(&t.restrict(&in_l, &in_l)));
    let left = b.mul(&t.restrict(&all, &in_l), &mid);
    let joined = b.mul(&left, &t.restrict(&in_l, &all));
    b.done(add(&t, &joined))
}

/// Walks of directed edges only, unblocked by `L`.
pub fn dconn_walks(g: &DirectedMixedGraph, l: &VertexSet, budget: usize) -> Truncated {
    let mut b = Budgeted::new(budget);
    let arcs = b.take(d_connected_arcs(g, budget)).filter(|w| interior_avoids(w, l));
    join_at_colliders(&arcs, l, b)
}

pub fn paths_only(w: &WalkMatrix) -> WalkMatrix {
    w.paths_only()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Any edges.
    M,
    /// Directed edges only.
    D,
}

impl FromStr for PathKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" => Ok(PathKind::M),
            "d" => Ok(PathKind::D),
            _ => Err(format!("unknown path kind `{s}` (expected m or d)")),
        }
    }
}

/// All paths of the given kind that are not ancestrally blocked by `L`. Exact.
pub fn ancestral_paths(g: &DirectedMixedGraph, kind: PathKind, l: &VertexSet) -> WalkMatrix {
    let rules = ConnectionRules::ancestral(g, l, kind == PathKind::D);
    let a = Automaton::new(g, rules);
    WalkMatrix::from_walks(g.num_vertices(), (0..g.num_vertices()).flat_map(|j| a.all_paths_from(j)))
}

/// The family of the given kind. `L` is used by the kinds that depend on it
/// (for directed walks and treks, a nonempty `L` selects the unblocked variant).
pub fn family(g: &DirectedMixedGraph, kind: WalkKind, l: &VertexSet, budget: usize) -> Truncated {
    match kind {
        WalkKind::DirectedRight if l.is_empty() => directed_walks(g, budget),
        WalkKind::DirectedRight => unblocked_directed_walks(g, l, budget),
        WalkKind::DirectedLeft => {
            let t = family(g, WalkKind::DirectedRight, l, budget);
            Truncated { matrix: t.matrix.transpose(), exact: t.exact }
        }
        WalkKind::Trek if l.is_empty() => treks(g, budget),
        WalkKind::Trek => unblocked_treks(g, l, budget),
        WalkKind::DConnectedArc => d_connected_arcs(g, budget),
        WalkKind::MConnectedArc => m_connected_arcs(g, budget),
        WalkKind::ConfoundingArc => confounding_arcs(g, budget),
        WalkKind::ColliderConnected => collider_connected(g, budget),
        WalkKind::BidirectedChain => bidirected_chains(g, budget),
        WalkKind::MConnWalk => mconn_walks(g, l, budget),
        WalkKind::TConnWalk => tconn_walks(g, l, budget),
        WalkKind::DConnWalk => dconn_walks(g, l, budget),
    }
}
