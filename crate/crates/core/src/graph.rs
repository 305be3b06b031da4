//! Directed mixed graphs: vertices, directed edges and bidirected edges
//! (bidirected loops allowed), together with the class predicates and the
//! structural operations used throughout the crate.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// A set of vertex indices.
pub type VertexSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate vertex label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid vertex label `{0}` (labels must match [A-Za-z0-9_]+)")]
    InvalidLabel(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertex index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("directed self-loop at `{0}`")]
    DirectedSelfLoop(String),
    #[error("duplicate directed edge `{0} -> {1}`")]
    DuplicateEdge(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Directed,
    Bidirected,
}

/// An edge of a directed mixed graph. Bidirected edges are normalized so that
/// `tail <= head`; equality is therefore orientation-insensitive for them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn directed(tail: usize, head: usize) -> Self {
        Edge { tail, head, kind: EdgeKind::Directed }
    }

    pub fn bidirected(a: usize, b: usize) -> Self {
        Edge { tail: a.min(b), head: a.max(b), kind: EdgeKind::Bidirected }
    }

    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

/// Membership of a graph in the classes used by the theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct GraphClassFlags {
    /// Every vertex carries a bidirected loop.
    pub canonical: bool,
    /// Canonical with no directed edges.
    pub bidirected_canonical: bool,
    /// Canonical and the only bidirected edges are loops.
    pub canonically_directed: bool,
    pub acyclic: bool,
    pub canonical_acyclic: bool,
    pub canonically_directed_acyclic: bool,
}

/// A directed mixed graph. Immutable after construction.
#[derive(Clone, PartialEq, Eq)]
pub struct DirectedMixedGraph {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
    directed: BTreeSet<(usize, usize)>,
    bidirected: BTreeSet<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    siblings: Vec<Vec<usize>>,
}

pub(crate) fn valid_label(label: &str) -> bool {
    !label.is_empty() && label.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl DirectedMixedGraph {
    /// Builds a graph from labels and label pairs.
    ///
    /// Bidirected pairs are unordered; listing the same pair twice (in either
    /// orientation) is tolerated. Directed edges must be unique and may not be
    /// loops.
    pub fn new<S: AsRef<str>>(
        labels: &[S],
        directed: &[(S, S)],
        bidirected: &[(S, S)],
    ) -> Result<Self, GraphError> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if !valid_label(l) {
                return Err(GraphError::InvalidLabel(l.clone()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        let lookup = |s: &S| {
            index
                .get(s.as_ref())
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex(s.as_ref().to_string()))
        };
        let mut d = Vec::with_capacity(directed.len());
        for (a, b) in directed {
            d.push((lookup(a)?, lookup(b)?));
        }
        let mut bi = Vec::with_capacity(bidirected.len());
        for (a, b) in bidirected {
            bi.push((lookup(a)?, lookup(b)?));
        }
        Self::build(labels, index, &d, &bi)
    }

    /// Builds a graph from labels and index pairs.
    pub fn from_indices(
        labels: Vec<String>,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if !valid_label(l) {
                return Err(GraphError::InvalidLabel(l.clone()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        Self::build(labels, index, directed, bidirected)
    }

    /// Graph on `V1..Vd` built from index pairs; convenient for generators and tests.
    pub fn with_default_labels(
        d: usize,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        Self::from_indices(default_labels(d), directed, bidirected)
    }

    fn build(
        labels: Vec<String>,
        index: BTreeMap<String, usize>,
        directed: &[(usize, usize)],
        bidirected: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        let check = |v: usize| if v < n { Ok(()) } else { Err(GraphError::IndexOutOfRange(v)) };
        let mut dset = BTreeSet::new();
        for &(a, b) in directed {
            check(a)?;
            check(b)?;
            if a == b {
                return Err(GraphError::DirectedSelfLoop(labels[a].clone()));
            }
            if !dset.insert((a, b)) {
                return Err(GraphError::DuplicateEdge(labels[a].clone(), labels[b].clone()));
            }
        }
        let mut bset = BTreeSet::new();
        for &(a, b) in bidirected {
            check(a)?;
            check(b)?;
            bset.insert((a.min(b), a.max(b)));
        }
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut siblings = vec![Vec::new(); n];
        for &(a, b) in &dset {
            children[a].push(b);
            parents[b].push(a);
        }
        for &(a, b) in &bset {
            siblings[a].push(b);
            if a != b {
                siblings[b].push(a);
            }
        }
        for s in &mut siblings {
            s.sort_unstable();
        }
        Ok(DirectedMixedGraph { labels, index, directed: dset, bidirected: bset, parents, children, siblings })
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Resolves a list of labels into a vertex set.
    pub fn vertex_set<S: AsRef<str>>(&self, labels: &[S]) -> Result<VertexSet, GraphError> {
        labels
            .iter()
            .map(|l| self.index_of(l.as_ref()).ok_or_else(|| GraphError::UnknownVertex(l.as_ref().to_string())))
            .collect()
    }

    pub fn all_vertices(&self) -> VertexSet {
        (0..self.num_vertices()).collect()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed.iter().copied()
    }

    /// Bidirected edges as normalized pairs `(a, b)` with `a <= b`.
    pub fn bidirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bidirected.iter().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.directed
            .iter()
            .map(|&(a, b)| Edge::directed(a, b))
            .chain(self.bidirected.iter().map(|&(a, b)| Edge::bidirected(a, b)))
    }

    pub fn num_directed(&self) -> usize {
        self.directed.len()
    }

    pub fn num_bidirected(&self) -> usize {
        self.bidirected.len()
    }

    pub fn has_directed(&self, tail: usize, head: usize) -> bool {
        self.directed.contains(&(tail, head))
    }

    pub fn has_bidirected(&self, a: usize, b: usize) -> bool {
        self.bidirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        match e.kind {
            EdgeKind::Directed => self.has_directed(e.tail, e.head),
            EdgeKind::Bidirected => self.has_bidirected(e.tail, e.head),
        }
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    /// Bidirected neighbours of `v`, including `v` itself when it has a loop.
    pub fn siblings(&self, v: usize) -> &[usize] {
        &self.siblings[v]
    }

    pub fn classify(&self) -> GraphClassFlags {
        let n = self.num_vertices();
        let canonical = (0..n).all(|v| self.has_bidirected(v, v));
        let only_loops = self.bidirected.iter().all(|&(a, b)| a == b);
        let acyclic = self.topological_order().is_some();
        let canonically_directed = canonical && only_loops;
        GraphClassFlags {
            canonical,
            bidirected_canonical: canonical && self.directed.is_empty(),
            canonically_directed,
            acyclic,
            canonical_acyclic: canonical && acyclic,
            canonically_directed_acyclic: canonically_directed && acyclic,
        }
    }

    pub fn is_canonical(&self) -> bool {
        (0..self.num_vertices()).all(|v| self.has_bidirected(v, v))
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn has_bidirected_loops(&self) -> bool {
        self.bidirected.iter().any(|&(a, b)| a == b)
    }

    /// Kahn's algorithm over the directed edges; `None` when a directed cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.num_vertices();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Removes every bidirected loop.
    pub fn trim(&self) -> Self {
        let bi: Vec<(usize, usize)> = self.bidirected.iter().copied().filter(|&(a, b)| a != b).collect();
        let d: Vec<(usize, usize)> = self.directed.iter().copied().collect();
        Self::build(self.labels.clone(), self.index.clone(), &d, &bi).expect("trim keeps a valid graph")
    }

    /// Adds a bidirected loop at every vertex lacking one.
    pub fn canonicalize(&self) -> Self {
        let mut bi: Vec<(usize, usize)> = self.bidirected.iter().copied().collect();
        bi.extend((0..self.num_vertices()).map(|v| (v, v)));
        let d: Vec<(usize, usize)> = self.directed.iter().copied().collect();
        Self::build(self.labels.clone(), self.index.clone(), &d, &bi).expect("canonicalize keeps a valid graph")
    }

    /// `S` together with every vertex that has a directed walk into `S`.
    pub fn ancestral_closure(&self, set: &VertexSet) -> VertexSet {
        let mut out = set.clone();
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if out.insert(p) {
                    stack.push(p);
                }
            }
        }
        out
    }

    /// `S` together with every vertex reachable from `S` by a directed walk.
    pub fn descendant_closure(&self, set: &VertexSet) -> VertexSet {
        let mut out = set.clone();
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Whether a directed walk of length at least one leads from `from` into `targets`.
    pub fn reaches_by_directed_walk(&self, from: usize, targets: &VertexSet) -> bool {
        let mut seen = vec![false; self.num_vertices()];
        let mut stack: Vec<usize> = self.children[from].to_vec();
        while let Some(v) = stack.pop() {
            if targets.contains(&v) {
                return true;
            }
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.children[v]);
            }
        }
        false
    }

    /// Subgraph on `keep` (labels preserved, indices re-densified in
    /// increasing order of the original indices).
    pub fn induced_subgraph(&self, keep: &VertexSet) -> Self {
        let map: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let labels: Vec<String> = keep.iter().map(|&v| self.labels[v].clone()).collect();
        let d: Vec<(usize, usize)> = self
            .directed
            .iter()
            .filter_map(|&(a, b)| Some((*map.get(&a)?, *map.get(&b)?)))
            .collect();
        let bi: Vec<(usize, usize)> = self
            .bidirected
            .iter()
            .filter_map(|&(a, b)| Some((*map.get(&a)?, *map.get(&b)?)))
            .collect();
        Self::from_indices(labels, &d, &bi).expect("induced subgraph keeps a valid graph")
    }

    /// Label-level equality: same label set and the same edges between labels.
    pub fn same_structure(&self, other: &Self) -> bool {
        let mine: BTreeSet<&str> = self.labels.iter().map(String::as_str).collect();
        let theirs: BTreeSet<&str> = other.labels.iter().map(String::as_str).collect();
        mine == theirs && self.labeled_edges() == other.labeled_edges()
    }

    /// Edges rendered by label, sorted; bidirected pairs ordered lexicographically.
    pub fn labeled_edges(&self) -> (BTreeSet<(String, String)>, BTreeSet<(String, String)>) {
        let d = self.directed.iter().map(|&(a, b)| (self.labels[a].clone(), self.labels[b].clone())).collect();
        let bi = self
            .bidirected
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (self.labels[a].clone(), self.labels[b].clone());
                if x <= y { (x, y) } else { (y, x) }
            })
            .collect();
        (d, bi)
    }

    /// Renders a vertex set as labels.
    pub fn set_labels(&self, set: &VertexSet) -> Vec<String> {
        set.iter().map(|&v| self.labels[v].clone()).collect()
    }
}

impl fmt::Debug for DirectedMixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DMG[{}; ", self.labels.join(","))?;
        let mut first = true;
        for &(a, b) in &self.directed {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{}->{}", self.labels[a], self.labels[b])?;
        }
        for &(a, b) in &self.bidirected {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{}<->{}", self.labels[a], self.labels[b])?;
        }
        write!(f, "]")
    }
}

pub fn default_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("V{i}")).collect()
}
