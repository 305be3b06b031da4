//! Walks, sets of walks, and the dioid of walk-set matrices.
//!
//! A [`WalkMatrix`] of dimension `d` has, at entry `(j, k)`, a finite set of
//! walks from vertex `j` to vertex `k`. Addition is entrywise union,
//! multiplication is pairwise concatenation summed over the middle index, and
//! transposition reverses every walk.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::graph::{DirectedMixedGraph, Edge};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WalkError {
    #[error("matrix dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("steps are not connected at position {0}")]
    Disconnected(usize),
    #[error("cannot parse walk `{0}`: {1}")]
    Parse(String, String),
    #[error("edge {0} is not in the graph")]
    MissingEdge(String),
    #[error("the trivial walk has no classification")]
    EmptyWalk,
}

/// How a single edge is traversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StepKind {
    /// `from -> to` along a directed edge.
    Forward,
    /// `from <- to`, i.e. the directed edge `to -> from` walked against its direction.
    Backward,
    /// `from <-> to`.
    Bidirected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub from: usize,
    pub to: usize,
    pub kind: StepKind,
}

impl Step {
    pub fn forward(from: usize, to: usize) -> Self {
        Step { from, to, kind: StepKind::Forward }
    }

    pub fn backward(from: usize, to: usize) -> Self {
        Step { from, to, kind: StepKind::Backward }
    }

    pub fn bidirected(from: usize, to: usize) -> Self {
        Step { from, to, kind: StepKind::Bidirected }
    }

    pub fn edge(&self) -> Edge {
        match self.kind {
            StepKind::Forward => Edge::directed(self.from, self.to),
            StepKind::Backward => Edge::directed(self.to, self.from),
            StepKind::Bidirected => Edge::bidirected(self.from, self.to),
        }
    }

    pub fn is_directed(&self) -> bool {
        self.kind != StepKind::Bidirected
    }

    pub fn head_at_from(&self) -> bool {
        matches!(self.kind, StepKind::Backward | StepKind::Bidirected)
    }

    pub fn head_at_to(&self) -> bool {
        matches!(self.kind, StepKind::Forward | StepKind::Bidirected)
    }

    pub fn reversed(&self) -> Self {
        let kind = match self.kind {
            StepKind::Forward => StepKind::Backward,
            StepKind::Backward => StepKind::Forward,
            StepKind::Bidirected => StepKind::Bidirected,
        };
        Step { from: self.to, to: self.from, kind }
    }

    fn arrow(&self) -> &'static str {
        match self.kind {
            StepKind::Forward => "->",
            StepKind::Backward => "<-",
            StepKind::Bidirected => "<->",
        }
    }
}

/// Every step a graph allows out of `v`, in ascending step order.
pub fn steps_from(g: &DirectedMixedGraph, v: usize) -> Vec<Step> {
    let mut out: Vec<Step> = g
        .children(v)
        .iter()
        .map(|&c| Step::forward(v, c))
        .chain(g.parents(v).iter().map(|&p| Step::backward(v, p)))
        .chain(g.siblings(v).iter().map(|&s| Step::bidirected(v, s)))
        .collect();
    out.sort_unstable();
    out
}

/// A walk: a start vertex followed by connected steps. The empty walk is the
/// trivial walk `id` at its start vertex.
///
/// Walks are ordered by length first, then start vertex, then step sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Walk {
    start: usize,
    steps: Vec<Step>,
}

impl Ord for Walk {
    fn cmp(&self, other: &Self) -> Ordering {
        self.steps
            .len()
            .cmp(&other.steps.len())
            .then(self.start.cmp(&other.start))
            .then_with(|| self.steps.cmp(&other.steps))
    }
}

impl PartialOrd for Walk {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Walk {
    pub fn trivial(v: usize) -> Self {
        Walk { start: v, steps: Vec::new() }
    }

    pub fn single(step: Step) -> Self {
        Walk { start: step.from, steps: vec![step] }
    }

    pub fn from_steps(start: usize, steps: Vec<Step>) -> Result<Self, WalkError> {
        let mut at = start;
        for (i, s) in steps.iter().enumerate() {
            if s.from != at {
                return Err(WalkError::Disconnected(i));
            }
            at = s.to;
        }
        Ok(Walk { start, steps })
    }

    /// Parses `"V1 <-> V1 -> V3 <- V2"` against the labels of `g`, checking
    /// that every edge exists.
    pub fn parse(g: &DirectedMixedGraph, text: &str) -> Result<Self, WalkError> {
        let err = |m: &str| WalkError::Parse(text.to_string(), m.to_string());
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() || tokens.len() % 2 == 0 {
            return Err(err("expected `V (arrow V)*`"));
        }
        let vertex = |t: &str| g.index_of(t).ok_or_else(|| err(&format!("unknown vertex {t}")));
        let start = vertex(tokens[0])?;
        let mut steps = Vec::new();
        let mut at = start;
        for pair in tokens[1..].chunks(2) {
            let to = vertex(pair[1])?;
            let step = match pair[0] {
                "->" => Step::forward(at, to),
                "<-" => Step::backward(at, to),
                "<->" => Step::bidirected(at, to),
                other => return Err(err(&format!("unknown arrow {other}"))),
            };
            if !g.contains_edge(&step.edge()) {
                return Err(WalkError::MissingEdge(step.render(g)));
            }
            steps.push(step);
            at = to;
        }
        Ok(Walk { start, steps })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.steps.last().map_or(self.start, |s| s.to)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Vertex sequence, `len() + 1` entries.
    pub fn vertices(&self) -> Vec<usize> {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.to)).collect()
    }

    /// Vertices at non-endpoint positions, in order (with repetitions).
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.steps.len();
        self.steps.iter().take(n.saturating_sub(1)).map(|s| s.to)
    }

    /// No repeated vertex.
    pub fn is_path(&self) -> bool {
        let vs = self.vertices();
        let set: BTreeSet<usize> = vs.iter().copied().collect();
        set.len() == vs.len()
    }

    pub fn bidirected_count(&self) -> usize {
        self.steps.iter().filter(|s| s.kind == StepKind::Bidirected).count()
    }

    /// Whether interior position `i` (1-based vertex position, `0 < i < len`)
    /// is a collider.
    pub fn is_collider_at(&self, i: usize) -> bool {
        debug_assert!(i > 0 && i < self.steps.len());
        self.steps[i - 1].head_at_to() && self.steps[i].head_at_from()
    }

    pub fn concat(&self, other: &Walk) -> Option<Walk> {
        if self.end() != other.start {
            return None;
        }
        let mut steps = Vec::with_capacity(self.steps.len() + other.steps.len());
        steps.extend_from_slice(&self.steps);
        steps.extend_from_slice(&other.steps);
        Some(Walk { start: self.start, steps })
    }

    /// The walk written from right to left.
    pub fn reversed(&self) -> Walk {
        Walk { start: self.end(), steps: self.steps.iter().rev().map(Step::reversed).collect() }
    }

    /// Sub-walk between vertex positions `a <= b`.
    pub fn segment(&self, a: usize, b: usize) -> Walk {
        let start = if a == 0 { self.start } else { self.steps[a - 1].to };
        Walk { start, steps: self.steps[a..b].to_vec() }
    }

    pub fn render(&self, g: &DirectedMixedGraph) -> String {
        let mut s = g.label(self.start).to_string();
        for step in &self.steps {
            s.push(' ');
            s.push_str(step.arrow());
            s.push(' ');
            s.push_str(g.label(step.to));
        }
        s
    }

    /// Whether every edge of the walk exists in `g`.
    pub fn is_walk_in(&self, g: &DirectedMixedGraph) -> bool {
        self.start < g.num_vertices() && self.steps.iter().all(|s| g.contains_edge(&s.edge()))
    }
}

impl Step {
    pub fn render(&self, g: &DirectedMixedGraph) -> String {
        format!("{} {} {}", g.label(self.from), self.arrow(), g.label(self.to))
    }
}

/// A finite set of walks, iterated in canonical (length, lexicographic) order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct WalkSet(BTreeSet<Walk>);

impl WalkSet {
    pub fn new() -> Self {
        WalkSet(BTreeSet::new())
    }

    pub fn singleton(w: Walk) -> Self {
        let mut s = BTreeSet::new();
        s.insert(w);
        WalkSet(s)
    }

    pub fn insert(&mut self, w: Walk) -> bool {
        self.0.insert(w)
    }

    pub fn contains(&self, w: &Walk) -> bool {
        self.0.contains(w)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Walk> {
        self.0.iter()
    }

    pub fn union(&self, other: &WalkSet) -> WalkSet {
        WalkSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &WalkSet) -> WalkSet {
        WalkSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &WalkSet) -> WalkSet {
        WalkSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &WalkSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Walk) -> bool) -> WalkSet {
        WalkSet(self.0.iter().filter(|w| keep(w)).cloned().collect())
    }

    pub fn render(&self, g: &DirectedMixedGraph) -> Vec<String> {
        self.0.iter().map(|w| w.render(g)).collect()
    }

    /// Pairwise concatenation; walks longer than `max_len` are dropped and
    /// reported through the returned flag.
    fn concat_into(&self, other: &WalkSet, max_len: usize, out: &mut WalkSet) -> bool {
        let mut dropped = false;
        for a in &self.0 {
            for b in &other.0 {
                if a.len() + b.len() > max_len {
                    dropped = true;
                    continue;
                }
                if let Some(w) = a.concat(b) {
                    out.0.insert(w);
                }
            }
        }
        dropped
    }
}

impl FromIterator<Walk> for WalkSet {
    fn from_iter<I: IntoIterator<Item = Walk>>(iter: I) -> Self {
        WalkSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a WalkSet {
    type Item = &'a Walk;
    type IntoIter = std::collections::btree_set::Iter<'a, Walk>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// A square matrix of walk sets indexed by vertices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WalkMatrix {
    dim: usize,
    entries: Vec<WalkSet>,
}

/// A matrix produced under a walk-length budget, with a flag telling whether
/// the budget cut anything off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncated {
    pub matrix: WalkMatrix,
    pub exact: bool,
}

impl WalkMatrix {
    /// The all-empty matrix, the additive identity.
    pub fn empty(dim: usize) -> Self {
        WalkMatrix { dim, entries: vec![WalkSet::new(); dim * dim] }
    }

    /// Trivial walks on the diagonal.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::empty(dim);
        for v in 0..dim {
            m.entries[v * dim + v].insert(Walk::trivial(v));
        }
        m
    }

    /// Single directed edges.
    pub fn basic_directed(g: &DirectedMixedGraph) -> Self {
        let mut m = Self::empty(g.num_vertices());
        for (a, b) in g.directed_edges() {
            m.insert(Walk::single(Step::forward(a, b)));
        }
        m
    }

    /// Single bidirected edges in both orientations (loops once).
    pub fn basic_bidirected(g: &DirectedMixedGraph) -> Self {
        let mut m = Self::empty(g.num_vertices());
        for (a, b) in g.bidirected_edges() {
            m.insert(Walk::single(Step::bidirected(a, b)));
            m.insert(Walk::single(Step::bidirected(b, a)));
        }
        m
    }

    /// Builds a matrix from arbitrary walks, each placed at `(start, end)`.
    pub fn from_walks(dim: usize, walks: impl IntoIterator<Item = Walk>) -> Self {
        let mut m = Self::empty(dim);
        for w in walks {
            m.insert(w);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, k: usize) -> &WalkSet {
        &self.entries[j * self.dim + k]
    }

    pub fn insert(&mut self, w: Walk) -> bool {
        let idx = w.start() * self.dim + w.end();
        self.entries[idx].insert(w)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(WalkSet::is_empty)
    }

    pub fn total_walks(&self) -> usize {
        self.entries.iter().map(WalkSet::len).sum()
    }

    pub fn walks(&self) -> impl Iterator<Item = &Walk> {
        self.entries.iter().flat_map(|s| s.iter())
    }

    fn check_dim(&self, other: &Self) -> Result<(), WalkError> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(WalkError::DimensionMismatch(self.dim, other.dim))
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&WalkSet, &WalkSet) -> WalkSet) -> Result<Self, WalkError> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect();
        Ok(WalkMatrix { dim: self.dim, entries })
    }

    /// Entrywise union.
    pub fn add(&self, other: &Self) -> Result<Self, WalkError> {
        self.zip_with(other, WalkSet::union)
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, WalkError> {
        self.zip_with(other, WalkSet::intersection)
    }

    pub fn difference(&self, other: &Self) -> Result<Self, WalkError> {
        self.zip_with(other, WalkSet::difference)
    }

    /// Entrywise inclusion, the order induced by `+`.
    pub fn is_subset(&self, other: &Self) -> bool {
        self.dim == other.dim && self.entries.iter().zip(&other.entries).all(|(a, b)| a.is_subset(b))
    }

    /// Concatenation product, with no length limit.
    pub fn multiply(&self, other: &Self) -> Result<Self, WalkError> {
        Ok(self.multiply_bounded(other, usize::MAX)?.matrix)
    }

    /// Concatenation product keeping only walks with at most `max_len` steps.
    pub fn multiply_bounded(&self, other: &Self, max_len: usize) -> Result<Truncated, WalkError> {
        self.multiply_bounded_with(other, max_len, Execution::default())
    }

    pub fn multiply_bounded_with(&self, other: &Self, max_len: usize, exec: Execution) -> Result<Truncated, WalkError> {
        self.check_dim(other)?;
        let d = self.dim;
        let rows: Vec<(Vec<WalkSet>, bool)> = par::map(exec, (0..d).collect(), |j| {
            let mut dropped = false;
            let row = (0..d)
                .map(|k| {
                    let mut out = WalkSet::new();
                    for l in 0..d {
                        let a = self.get(j, l);
                        let b = other.get(l, k);
                        if !a.is_empty() && !b.is_empty() {
                            dropped |= a.concat_into(b, max_len, &mut out);
                        }
                    }
                    out
                })
                .collect();
            (row, dropped)
        });
        let exact = rows.iter().all(|(_, dropped)| !dropped);
        let entries = rows.into_iter().flat_map(|(row, _)| row).collect();
        Ok(Truncated { matrix: WalkMatrix { dim: d, entries }, exact })
    }

    /// Entry `(j, k)` holds the reversed walks of entry `(k, j)`.
    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut m = Self::empty(d);
        for j in 0..d {
            for k in 0..d {
                m.entries[k * d + j] = self.get(j, k).iter().map(Walk::reversed).collect();
            }
        }
        m
    }

    /// `sum_{q >= 1} W^q` restricted to walks of at most `max_len` steps.
    ///
    /// `exact` is true when the infinite series contains no longer walk, i.e.
    /// the powers died out (or stopped producing new walks) within budget.
    pub fn truncated_series(&self, max_len: usize) -> Truncated {
        let mut exact = true;
        let mut power = self.filter(|w| w.len() <= max_len);
        if power.total_walks() != self.total_walks() {
            exact = false;
        }
        let mut sum = power.clone();
        loop {
            if power.is_empty() {
                break;
            }
            let next = power.multiply_bounded(self, max_len).expect("same dimension");
            exact &= next.exact;
            if next.matrix.is_subset(&sum) {
                break;
            }
            sum = sum.add(&next.matrix).expect("same dimension");
            power = next.matrix;
        }
        Truncated { matrix: sum, exact }
    }

    pub fn filter(&self, keep: impl Fn(&Walk) -> bool) -> Self {
        WalkMatrix { dim: self.dim, entries: self.entries.iter().map(|s| s.filter(&keep)).collect() }
    }

    /// Keeps entries whose row is in `rows` and column is in `cols`.
    pub fn restrict(&self, rows: &[bool], cols: &[bool]) -> Self {
        let d = self.dim;
        let mut m = self.clone();
        for j in 0..d {
            for k in 0..d {
                if !(rows[j] && cols[k]) {
                    m.entries[j * d + k] = WalkSet::new();
                }
            }
        }
        m
    }

    /// Keeps walks without repeated vertices.
    pub fn paths_only(&self) -> Self {
        self.filter(Walk::is_path)
    }

    /// Whether entry `(j, k)` only contains walks from `j` to `k`.
    pub fn audit(&self) -> bool {
        (0..self.dim).all(|j| (0..self.dim).all(|k| self.get(j, k).iter().all(|w| w.start() == j && w.end() == k)))
    }

    /// Label-indexed table, one line per nonempty entry.
    pub fn render(&self, g: &DirectedMixedGraph) -> String {
        let mut s = String::new();
        for j in 0..self.dim {
            for k in 0..self.dim {
                let e = self.get(j, k);
                if !e.is_empty() {
                    s.push_str(&format!("[{}, {}] = {{{}}}\n", g.label(j), g.label(k), e.render(g).join(", ")));
                }
            }
        }
        s
    }
}

impl fmt::Debug for WalkMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WalkMatrix(dim={}, walks={})", self.dim, self.total_walks())
    }
}

impl Truncated {
    pub fn exact(matrix: WalkMatrix) -> Self {
        Truncated { matrix, exact: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig1;

    fn set(g: &DirectedMixedGraph, walks: &[&str]) -> WalkSet {
        walks.iter().map(|w| Walk::parse(g, w).unwrap()).collect()
    }

    #[test]
    fn union_example() {
        let g = fig1();
        let a = set(&g, &["V2 -> V5"]);
        let b = set(&g, &["V2 -> V3 -> V5"]);
        assert_eq!(a.union(&b), set(&g, &["V2 -> V5", "V2 -> V3 -> V5"]));
    }

    #[test]
    fn concatenation_example() {
        let g = fig1();
        let a = WalkMatrix::from_walks(5, set(&g, &["V2 <-> V2"]).iter().cloned());
        let b = WalkMatrix::from_walks(5, set(&g, &["V2 -> V5", "V2 -> V3 -> V5"]).iter().cloned());
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.get(1, 4), &set(&g, &["V2 <-> V2 -> V5", "V2 <-> V2 -> V3 -> V5"]));
        assert_eq!(p.total_walks(), 2);
    }

    #[test]
    fn transpose_example() {
        let g = fig1();
        let m = WalkMatrix::from_walks(5, set(&g, &["V2 -> V5", "V2 -> V3 -> V5"]).iter().cloned());
        let t = m.transpose();
        assert_eq!(t.get(4, 1), &set(&g, &["V5 <- V2", "V5 <- V3 <- V2"]));
        assert_eq!(t.transpose(), m);
        assert_eq!(WalkMatrix::identity(5).transpose(), WalkMatrix::identity(5));
    }

    #[test]
    fn identity_and_absorption() {
        let g = fig1();
        let w = WalkMatrix::basic_directed(&g).add(&WalkMatrix::basic_bidirected(&g)).unwrap();
        let id = WalkMatrix::identity(5);
        assert_eq!(id.multiply(&w).unwrap(), w);
        assert_eq!(w.multiply(&id).unwrap(), w);
        assert!(WalkMatrix::empty(5).multiply(&w).unwrap().is_empty());
        assert_eq!(w.add(&WalkMatrix::empty(5)).unwrap(), w);
        assert_eq!(w.add(&w).unwrap(), w);
        assert_eq!(WalkMatrix::identity(0).dim(), 0);
    }

    #[test]
    fn dimension_mismatch() {
        let e = WalkMatrix::empty(2).add(&WalkMatrix::empty(3)).unwrap_err();
        assert_eq!(e, WalkError::DimensionMismatch(2, 3));
        assert!(WalkMatrix::empty(2).multiply(&WalkMatrix::empty(3)).is_err());
        assert!(WalkMatrix::empty(2).intersect(&WalkMatrix::empty(3)).is_err());
    }

    #[test]
    fn series_on_cycle_is_inexact() {
        let g = DirectedMixedGraph::with_default_labels(2, &[(0, 1), (1, 0)], &[]).unwrap();
        let t = WalkMatrix::basic_directed(&g).truncated_series(3);
        assert!(!t.exact);
        assert!(t.matrix.walks().all(|w| (1..=3).contains(&w.len())));
        assert_eq!(t.matrix.total_walks(), 6);
    }

    #[test]
    fn series_of_empty_is_exact() {
        let t = WalkMatrix::empty(4).truncated_series(3);
        assert!(t.exact && t.matrix.is_empty());
    }

    #[test]
    fn set_operations() {
        let g = fig1();
        let w = WalkMatrix::basic_bidirected(&g);
        assert_eq!(w.intersect(&w).unwrap(), w);
        assert_eq!(w.difference(&WalkMatrix::empty(5)).unwrap(), w);
        assert!(w.audit());
    }

    #[test]
    fn parse_and_render_round_trip() {
        let g = fig1();
        for text in ["V1 <-> V1 -> V3 -> V4", "V5 <- V3 <- V1 <-> V4", "V2"] {
            assert_eq!(Walk::parse(&g, text).unwrap().render(&g), text);
        }
        assert!(matches!(Walk::parse(&g, "V1 -> V2"), Err(WalkError::MissingEdge(_))));
    }

    #[test]
    fn walk_order_is_length_first() {
        let g = fig1();
        let mut ws: Vec<Walk> = ["V1 <-> V1 -> V3 -> V4", "V1 <-> V4"].iter().map(|t| Walk::parse(&g, t).unwrap()).collect();
        ws.sort();
        assert_eq!(ws[0].render(&g), "V1 <-> V4");
    }
}
