//! Small graphs used throughout the docs and tests.

use crate::graph::DirectedMixedGraph;

const LABELS: [&str; 5] = ["V1", "V2", "V3", "V4", "V5"];
const FIG1_DIRECTED: [(&str, &str); 5] = [("V1", "V3"), ("V2", "V3"), ("V2", "V5"), ("V3", "V4"), ("V3", "V5")];
const FIG1_BIDIRECTED: [(&str, &str); 7] =
    [("V1", "V1"), ("V2", "V2"), ("V3", "V3"), ("V4", "V4"), ("V5", "V5"), ("V1", "V4"), ("V1", "V5")];

/// The five-vertex canonical running example.
pub fn fig1() -> DirectedMixedGraph {
    DirectedMixedGraph::new(&LABELS, &FIG1_DIRECTED, &FIG1_BIDIRECTED).expect("valid fixture")
}

/// `fig1` plus `V4 -> V5` and `V4 <-> V5`; the graph of the worked Gaussian example.
pub fn fig1b() -> DirectedMixedGraph {
    let mut d = FIG1_DIRECTED.to_vec();
    d.push(("V4", "V5"));
    let mut b = FIG1_BIDIRECTED.to_vec();
    b.push(("V4", "V5"));
    DirectedMixedGraph::new(&LABELS, &d, &b).expect("valid fixture")
}

/// `V1 -> V3 <- V2`, `V3 -> V4`, no bidirected edges.
pub fn collider_with_descendant() -> DirectedMixedGraph {
    DirectedMixedGraph::new(&LABELS[..4], &[("V1", "V3"), ("V2", "V3"), ("V3", "V4")], &[]).expect("valid fixture")
}
