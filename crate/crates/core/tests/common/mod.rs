//! Reference computations for the integration tests. Nothing here calls the
//! decision procedures or numeric routines under test; graphs are read only
//! through their edge lists.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use dmg_core::{DirectedMixedGraph, VertexSet};
use nalgebra::DMatrix;

pub fn set(xs: &[usize]) -> VertexSet {
    xs.iter().copied().collect()
}

/// All subsets of `items`.
pub fn subsets(items: &[usize]) -> Vec<VertexSet> {
    (0..1u32 << items.len())
        .map(|m| items.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &v)| v).collect())
        .collect()
}

/// Every graph on `d` vertices: each ordered pair may carry a directed edge,
/// each unordered pair and each vertex a bidirected edge. With `canonical`,
/// all loops are present; with `acyclic`, only graphs without directed
/// cycles are kept.
pub fn all_graphs(d: usize, canonical: bool, acyclic: bool) -> Vec<DirectedMixedGraph> {
    let ordered: Vec<(usize, usize)> = (0..d).flat_map(|a| (0..d).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
    let loops: Vec<(usize, usize)> = (0..d).map(|v| (v, v)).collect();
    let mut out = Vec::new();
    for dm in 0..1u64 << ordered.len() {
        let directed: Vec<(usize, usize)> = ordered.iter().enumerate().filter(|(i, _)| dm >> i & 1 == 1).map(|(_, &e)| e).collect();
        if acyclic && has_cycle(d, &directed) {
            continue;
        }
        let free_loops = if canonical { 0 } else { loops.len() };
        for bm in 0..1u64 << (pairs.len() + free_loops) {
            let mut bidirected: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| bm >> i & 1 == 1).map(|(_, &e)| e).collect();
            if canonical {
                bidirected.extend(&loops);
            } else {
                bidirected.extend(loops.iter().enumerate().filter(|(i, _)| bm >> (pairs.len() + i) & 1 == 1).map(|(_, &e)| e));
            }
            out.push(DirectedMixedGraph::with_default_labels(d, &directed, &bidirected).unwrap());
        }
    }
    out
}

fn has_cycle(d: usize, directed: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; d];
    for &(_, b) in directed {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..d).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(a, b) in directed {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    seen < d
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Conn {
    M,
    T,
    D,
}

/// One traversal of an edge out of a vertex: where it leads, whether the
/// edge has an arrowhead at the near and far ends, and whether it is
/// bidirected.
#[derive(Clone, Copy)]
struct Move {
    to: usize,
    head_here: bool,
    head_there: bool,
    bidirected: bool,
}

fn moves(g: &DirectedMixedGraph) -> Vec<Vec<Move>> {
    let mut out = vec![Vec::new(); g.num_vertices()];
    for (a, b) in g.directed_edges() {
        out[a].push(Move { to: b, head_here: false, head_there: true, bidirected: false });
        out[b].push(Move { to: a, head_here: true, head_there: false, bidirected: false });
    }
    for (a, b) in g.bidirected_edges() {
        out[a].push(Move { to: b, head_here: true, head_there: true, bidirected: true });
        if a != b {
            out[b].push(Move { to: a, head_here: true, head_there: true, bidirected: true });
        }
    }
    out
}

/// Whether a walk of the given connection kind, unblocked by `L`, runs from
/// `j` to `k` with at most `budget` steps. Breadth-first over walk prefixes
/// summarised by (end, arrowhead at end, trek leg), layer by layer.
///
/// For treks the leg is 0 while only `<-` has been used in the current
/// segment and 1 after its `<->`; a segment restarts at every collider.
pub fn connected(g: &DirectedMixedGraph, kind: Conn, j: usize, k: usize, l: &VertexSet, budget: usize) -> bool {
    let mv = moves(g);
    let d = g.num_vertices();
    let idx = |v: usize, head: bool, leg: usize| (v * 2 + head as usize) * 2 + leg;
    let mut seen = vec![false; d * 4];
    let mut frontier = Vec::new();
    for m in &mv[j] {
        if kind == Conn::D && m.bidirected {
            continue;
        }
        let leg = match kind {
            Conn::T if !m.head_here => continue,
            Conn::T => m.bidirected as usize,
            _ => 0,
        };
        let s = idx(m.to, m.head_there, leg);
        if !seen[s] {
            seen[s] = true;
            frontier.push((m.to, m.head_there, leg));
        }
    }
    for _ in 1..=budget {
        if frontier.iter().any(|&(v, _, leg)| v == k && (kind != Conn::T || leg == 1)) {
            return true;
        }
        let mut next = Vec::new();
        for &(v, head, leg) in &frontier {
            for m in &mv[v] {
                if kind == Conn::D && m.bidirected {
                    continue;
                }
                let collider = head && m.head_here;
                if collider != l.contains(&v) {
                    continue;
                }
                let new_leg = if kind != Conn::T {
                    0
                } else if collider {
                    m.bidirected as usize
                } else if leg == 0 && m.head_here {
                    m.bidirected as usize
                } else if leg == 1 && !m.head_here {
                    1
                } else {
                    continue;
                };
                let s = idx(m.to, m.head_there, new_leg);
                if !seen[s] {
                    seen[s] = true;
                    next.push((m.to, m.head_there, new_leg));
                }
            }
        }
        frontier = next;
    }
    false
}

/// Vertices reachable from `from` along directed edges, excluding `from`
/// unless it lies on a cycle.
pub fn descendants(g: &DirectedMixedGraph, from: usize) -> VertexSet {
    let mut out = VertexSet::new();
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for (a, b) in g.directed_edges() {
            if a == v && out.insert(b) {
                queue.push_back(b);
            }
        }
    }
    out
}

/// Covariance of an acyclic system: `(I - B)^{-1}` is the finite sum of
/// powers of the nilpotent `B`.
pub fn covariance(beta: &DMatrix<f64>, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    let d = beta.nrows();
    let mut total = DMatrix::identity(d, d);
    let mut power = DMatrix::identity(d, d);
    for _ in 1..d {
        power = &power * beta;
        total += &power;
    }
    assert!((&power * beta).amax() == 0.0, "covariance oracle needs an acyclic system");
    total.transpose() * lambda * total
}

/// Coefficient of `V_j` when regressing `V_k` on `V_j` and `V_L`.
pub fn regression(sigma: &DMatrix<f64>, k: usize, j: usize, l: &VertexSet) -> f64 {
    let idx: Vec<usize> = [j, k].into_iter().chain(l.iter().copied()).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| sigma[(idx[a], idx[b])]);
    let p = sub.try_inverse().expect("invertible covariance");
    -p[(0, 1)] / p[(1, 1)]
}

/// Partial correlation of `V_j` and `V_k` given `V_L`.
pub fn partial_correlation(sigma: &DMatrix<f64>, j: usize, k: usize, l: &VertexSet) -> f64 {
    let idx: Vec<usize> = [j, k].into_iter().chain(l.iter().copied()).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| sigma[(idx[a], idx[b])]);
    let p = sub.try_inverse().expect("invertible covariance");
    -p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt()
}

/// Summed weight of the directed paths from `j` to `k` whose non-endpoints
/// avoid `L`, by depth-first search over `beta`.
pub fn directed_path_weight(beta: &DMatrix<f64>, j: usize, k: usize, l: &VertexSet) -> f64 {
    fn go(beta: &DMatrix<f64>, v: usize, k: usize, l: &VertexSet, on: &mut Vec<bool>, acc: f64) -> f64 {
        let mut total = 0.0;
        for w in 0..beta.ncols() {
            if beta[(v, w)] == 0.0 || on[w] {
                continue;
            }
            let weight = acc * beta[(v, w)];
            if w == k {
                total += weight;
            } else if !l.contains(&w) {
                on[w] = true;
                total += go(beta, w, k, l, on, weight);
                on[w] = false;
            }
        }
        total
    }
    let mut on = vec![false; beta.nrows()];
    on[j] = true;
    go(beta, j, k, l, &mut on, 1.0)
}

pub fn labeled(pairs: &[(&str, &str)]) -> BTreeSet<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}
