//! Latent projection.
//!
//! In the margin on `keep`, `j -> k` iff `g` has a directed walk from `j` to
//! `k` whose non-endpoints are all dropped, and `j <-> k` (loops included)
//! iff `g` has such a trek.

use thiserror::Error;

use crate::automaton::{mask, Automaton, ConfoundingArcRules, DirectedRules, TrekRules};
use crate::graph::{DirectedMixedGraph, VertexSet};
use crate::par::{self, Execution};
use crate::queries::{is_left_directed, is_right_directed, is_trek};
use crate::walk::{Step, Walk};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarginalError {
    #[error("vertex index {0} is out of range")]
    OutOfRange(usize),
    #[error("expected a trimmed acyclic graph (no bidirected loops, no directed cycles)")]
    NotTrimmedAcyclic,
}

fn check_keep(g: &DirectedMixedGraph, keep: &VertexSet) -> Result<(), MarginalError> {
    match keep.iter().find(|&&v| v >= g.num_vertices()) {
        Some(&v) => Err(MarginalError::OutOfRange(v)),
        None => Ok(()),
    }
}

fn build(g: &DirectedMixedGraph, keep: &VertexSet, directed: Vec<(usize, usize)>, bidirected: Vec<(usize, usize)>) -> DirectedMixedGraph {
    let order: Vec<usize> = keep.iter().copied().collect();
    let local = |v: usize| order.binary_search(&v).expect("kept vertex");
    let labels = order.iter().map(|&v| g.label(v).to_string()).collect();
    let d: Vec<(usize, usize)> = directed.into_iter().map(|(a, b)| (local(a), local(b))).collect();
    let b: Vec<(usize, usize)> = bidirected.into_iter().map(|(a, b)| (local(a), local(b))).collect();
    DirectedMixedGraph::from_indices(labels, &d, &b).expect("margin of a valid graph is valid")
}

/// The marginal graph on `keep`, with vertex indices re-densified in
/// ascending order and labels preserved.
///
/// A directed walk from a vertex back to itself through dropped vertices
/// (possible only in cyclic graphs) would be a directed loop; such loops
/// are not representable and are omitted.
pub fn marginalize(g: &DirectedMixedGraph, keep: &VertexSet) -> Result<DirectedMixedGraph, MarginalError> {
    marginalize_with(g, keep, Execution::default())
}

pub fn marginalize_with(g: &DirectedMixedGraph, keep: &VertexSet, exec: Execution) -> Result<DirectedMixedGraph, MarginalError> {
    check_keep(g, keep)?;
    let in_keep = mask(g.num_vertices(), keep);
    let dir = Automaton::new(g, DirectedRules { in_l: in_keep.clone() });
    let trek = Automaton::new(g, TrekRules { in_l: in_keep, junctions: false });
    let rows = par::map(exec, keep.iter().copied().collect(), |j| {
        let d: Vec<(usize, usize)> =
            dir.reachable_from(j).into_iter().filter(|k| *k != j && keep.contains(k)).map(|k| (j, k)).collect();
        let b: Vec<(usize, usize)> =
            trek.reachable_from(j).into_iter().filter(|k| *k >= j && keep.contains(k)).map(|k| (j, k)).collect();
        (d, b)
    });
    let (d, b): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(build(g, keep, d.concat(), b.concat()))
}

/// Latent projection of a trimmed acyclic graph via path existence: `j -> k`
/// iff a directed path with dropped interior exists, `j <-> k` iff a
/// confounding arc path (collider-free, arrowheads at both ends) with dropped
/// interior exists. The result is trimmed.
pub fn marginalize_admg(g: &DirectedMixedGraph, keep: &VertexSet) -> Result<DirectedMixedGraph, MarginalError> {
    check_keep(g, keep)?;
    if g.has_bidirected_loops() || !g.is_acyclic() {
        return Err(MarginalError::NotTrimmedAcyclic);
    }
    let in_keep = mask(g.num_vertices(), keep);
    let dir = Automaton::new(g, DirectedRules { in_l: in_keep.clone() });
    let conf = Automaton::new(g, ConfoundingArcRules { in_l: in_keep });
    let mut d = Vec::new();
    let mut b = Vec::new();
    for &j in keep {
        for &k in keep {
            if j == k {
                continue;
            }
            if dir.path_exists(j, k) {
                d.push((j, k));
            }
            if j < k && conf.path_exists(j, k) {
                b.push((j, k));
            }
        }
    }
    Ok(build(g, keep, d, b))
}

/// The image of a walk under marginalization onto `keep`, in the indices of
/// the marginal graph.
///
/// The walk is cut at its colliders and at every non-endpoint in `keep`.
/// Each piece must then be a right-directed walk, a left-directed walk or a
/// trek, and maps to the corresponding single edge. Returns `None` when the
/// walk has no image: an endpoint or a collider outside `keep`, or a piece of
/// another shape.
pub fn marginal_walk_image(w: &Walk, keep: &VertexSet) -> Option<Walk> {
    let order: Vec<usize> = keep.iter().copied().collect();
    let local = |v: usize| order.binary_search(&v).ok();
    let vs = w.vertices();
    let start = local(w.start())?;
    local(w.end())?;
    let mut cuts = vec![0];
    for i in 1..w.len() {
        let kept = keep.contains(&vs[i]);
        if w.is_collider_at(i) && !kept {
            return None;
        }
        if kept || w.is_collider_at(i) {
            cuts.push(i);
        }
    }
    if w.len() > 0 {
        cuts.push(w.len());
    }
    let mut steps = Vec::new();
    for c in cuts.windows(2) {
        let seg = w.segment(c[0], c[1]);
        let (a, b) = (local(seg.start())?, local(seg.end())?);
        let step = if is_right_directed(&seg) {
            Step::forward(a, b)
        } else if is_left_directed(&seg) {
            Step::backward(a, b)
        } else if is_trek(&seg) {
            Step::bidirected(a, b)
        } else {
            return None;
        };
        if step.is_directed() && a == b {
            return None;
        }
        steps.push(step);
    }
    Walk::from_steps(start, steps).ok()
}
