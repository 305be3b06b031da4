//! Reachability over (vertex, phase) states.
//!
//! Every exact walk-existence question in the crate is phrased as a small
//! automaton: a walk is accepted iff its first step is admitted by
//! [`Rules::start`], each interior vertex is passed according to
//! [`Rules::next`], and the final phase satisfies [`Rules::accept`]. Because
//! the admissibility of a step only depends on the current vertex and phase,
//! walk existence reduces to graph search on `d * phases` states.

use std::collections::VecDeque;

use crate::graph::{DirectedMixedGraph, VertexSet};
use crate::par::{self, Execution};
use crate::walk::{steps_from, Step, StepKind, Walk};

pub trait Rules: Sync {
    fn phases(&self) -> usize;
    /// Phase after taking `step` as the first step of a walk.
    fn start(&self, step: &Step) -> Option<usize>;
    /// Phase after passing through the interior vertex `step.from`, which was
    /// reached in `phase`, by taking `step`.
    fn next(&self, phase: usize, step: &Step) -> Option<usize>;
    fn accept(&self, phase: usize) -> bool;
}

/// Unblocked walks in the m-connection sense.
///
/// Phase 1 means the walk arrived with an arrowhead at the current vertex.
/// A vertex passed as a collider must satisfy `collider_ok`; otherwise it
/// must satisfy `noncollider_ok`.
#[derive(Debug, Clone)]
pub struct ConnectionRules {
    pub collider_ok: Vec<bool>,
    pub noncollider_ok: Vec<bool>,
    pub directed_only: bool,
    /// Only walks with an arrowhead at both endpoints.
    pub end_heads: bool,
    /// Fault injection: colliders are never checked.
    pub drop_collider_rule: bool,
}

impl ConnectionRules {
    /// Colliders in `L`, non-colliders outside `L`.
    pub fn m(d: usize, l: &VertexSet) -> Self {
        let in_l = mask(d, l);
        ConnectionRules {
            noncollider_ok: in_l.iter().map(|b| !b).collect(),
            collider_ok: in_l,
            directed_only: false,
            end_heads: false,
            drop_collider_rule: false,
        }
    }

    pub fn d(d: usize, l: &VertexSet) -> Self {
        ConnectionRules { directed_only: true, ..Self::m(d, l) }
    }

    /// Colliders only need to be ancestors of `L` (or in `L`).
    pub fn ancestral(g: &DirectedMixedGraph, l: &VertexSet, directed_only: bool) -> Self {
        let d = g.num_vertices();
        ConnectionRules { collider_ok: mask(d, &g.ancestral_closure(l)), directed_only, ..Self::m(d, l) }
    }

    fn admits(&self, step: &Step) -> bool {
        !(self.directed_only && step.kind == StepKind::Bidirected)
    }
}

impl Rules for ConnectionRules {
    fn phases(&self) -> usize {
        2
    }

    fn start(&self, step: &Step) -> Option<usize> {
        if !self.admits(step) || (self.end_heads && !step.head_at_from()) {
            return None;
        }
        Some(step.head_at_to() as usize)
    }

    fn next(&self, phase: usize, step: &Step) -> Option<usize> {
        if !self.admits(step) {
            return None;
        }
        let v = step.from;
        let collider = phase == 1 && step.head_at_from();
        let ok = if collider { self.drop_collider_rule || self.collider_ok[v] } else { self.noncollider_ok[v] };
        ok.then_some(step.head_at_to() as usize)
    }

    fn accept(&self, phase: usize) -> bool {
        !self.end_heads || phase == 1
    }
}

/// Treks (`<-* <-> ->*`) whose non-endpoints avoid `L`; with `junctions`,
/// also sequences of such treks glued at vertices of `L`.
///
/// Phase 0 is the left leg (only `<-` seen so far), phase 1 the right leg.
/// Inside a trek every non-endpoint is a non-collider, hence must avoid `L`.
/// In the right leg the walk arrives with a head; leaving with a new `<-` or
/// `<->` makes the vertex a collider, which is exactly a junction and is
/// admitted iff the vertex is in `L`.
#[derive(Debug, Clone)]
pub struct TrekRules {
    pub in_l: Vec<bool>,
    pub junctions: bool,
}

impl Rules for TrekRules {
    fn phases(&self) -> usize {
        2
    }

    fn start(&self, step: &Step) -> Option<usize> {
        match step.kind {
            StepKind::Backward => Some(0),
            StepKind::Bidirected => Some(1),
            StepKind::Forward => None,
        }
    }

    fn next(&self, phase: usize, step: &Step) -> Option<usize> {
        let v = step.from;
        match (phase, step.kind) {
            (0, StepKind::Backward) if !self.in_l[v] => Some(0),
            (0, StepKind::Bidirected) if !self.in_l[v] => Some(1),
            (1, StepKind::Forward) if !self.in_l[v] => Some(1),
            (1, StepKind::Backward) if self.junctions && self.in_l[v] => Some(0),
            (1, StepKind::Bidirected) if self.junctions && self.in_l[v] => Some(1),
            _ => None,
        }
    }

    fn accept(&self, phase: usize) -> bool {
        phase == 1
    }
}

/// Right-directed walks whose non-endpoints avoid `L`.
#[derive(Debug, Clone)]
pub struct DirectedRules {
    pub in_l: Vec<bool>,
}

impl Rules for DirectedRules {
    fn phases(&self) -> usize {
        1
    }

    fn start(&self, step: &Step) -> Option<usize> {
        (step.kind == StepKind::Forward).then_some(0)
    }

    fn next(&self, _: usize, step: &Step) -> Option<usize> {
        (step.kind == StepKind::Forward && !self.in_l[step.from]).then_some(0)
    }

    fn accept(&self, _: usize) -> bool {
        true
    }
}

/// Collider-free walks with an arrowhead at both ends (confounding arcs),
/// non-endpoints avoiding `L`.
///
/// Phases: 0 left leg, 1 right leg after a bidirected edge, 2 right leg
/// after a directed root.
#[derive(Debug, Clone)]
pub struct ConfoundingArcRules {
    pub in_l: Vec<bool>,
}

impl Rules for ConfoundingArcRules {
    fn phases(&self) -> usize {
        3
    }

    fn start(&self, step: &Step) -> Option<usize> {
        match step.kind {
            StepKind::Backward => Some(0),
            StepKind::Bidirected => Some(1),
            StepKind::Forward => None,
        }
    }

    fn next(&self, phase: usize, step: &Step) -> Option<usize> {
        if self.in_l[step.from] {
            return None;
        }
        match (phase, step.kind) {
            (0, StepKind::Backward) => Some(0),
            (0, StepKind::Bidirected) => Some(1),
            (0, StepKind::Forward) => Some(2),
            (p @ (1 | 2), StepKind::Forward) => Some(p),
            _ => None,
        }
    }

    fn accept(&self, phase: usize) -> bool {
        phase > 0
    }
}

/// Walks whose non-endpoints are all colliders:
/// `(-> )? (<->)* (<- )?`, at least one step.
#[derive(Debug, Clone, Copy)]
pub struct ColliderRules;

impl Rules for ColliderRules {
    fn phases(&self) -> usize {
        4
    }

    fn start(&self, step: &Step) -> Option<usize> {
        Some(match step.kind {
            StepKind::Forward => 1,
            StepKind::Bidirected => 2,
            StepKind::Backward => 3,
        })
    }

    fn next(&self, phase: usize, step: &Step) -> Option<usize> {
        match (phase, step.kind) {
            (1 | 2, StepKind::Bidirected) => Some(2),
            (1 | 2, StepKind::Backward) => Some(3),
            _ => None,
        }
    }

    fn accept(&self, _: usize) -> bool {
        true
    }
}

pub fn mask(d: usize, set: &VertexSet) -> Vec<bool> {
    let mut m = vec![false; d];
    for &v in set {
        m[v] = true;
    }
    m
}

/// The explicit state graph of a rule set on a graph.
pub struct Automaton<'a, R: Rules> {
    g: &'a DirectedMixedGraph,
    rules: R,
    phases: usize,
    trans: Vec<Vec<(Step, usize)>>,
}

impl<'a, R: Rules> Automaton<'a, R> {
    pub fn new(g: &'a DirectedMixedGraph, rules: R) -> Self {
        let phases = rules.phases();
        let d = g.num_vertices();
        let mut trans = vec![Vec::new(); d * phases];
        for v in 0..d {
            let steps = steps_from(g, v);
            for p in 0..phases {
                for s in &steps {
                    if let Some(q) = rules.next(p, s) {
                        trans[v * phases + p].push((*s, s.to * phases + q));
                    }
                }
            }
        }
        Automaton { g, rules, phases, trans }
    }

    pub fn rules(&self) -> &R {
        &self.rules
    }

    fn initial(&self, j: usize) -> Vec<(Step, usize)> {
        steps_from(self.g, j)
            .into_iter()
            .filter_map(|s| self.rules.start(&s).map(|q| (s, s.to * self.phases + q)))
            .collect()
    }

    fn accepting(&self, state: usize) -> bool {
        self.rules.accept(state % self.phases)
    }

    /// Vertices `k` such that an accepted walk of length at least one runs from `j` to `k`.
    pub fn reachable_from(&self, j: usize) -> VertexSet {
        let mut seen = vec![false; self.trans.len()];
        let mut queue = VecDeque::new();
        for (_, s) in self.initial(j) {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &(_, t) in &self.trans[s] {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        (0..self.trans.len()).filter(|&s| seen[s] && self.accepting(s)).map(|s| s / self.phases).collect()
    }

    /// `reachable_from` for every vertex.
    pub fn reachability(&self, exec: Execution) -> Vec<VertexSet> {
        par::map(exec, (0..self.g.num_vertices()).collect(), |j| self.reachable_from(j))
    }

    pub fn connects(&self, j: &VertexSet, k: &VertexSet) -> bool {
        j.iter().any(|&a| !self.reachable_from(a).is_disjoint(k))
    }

    /// Shortest accepted walk from `J` to `K`, ties broken by the walk order.
    pub fn shortest_witness(&self, j: &VertexSet, k: &VertexSet) -> Option<Walk> {
        let n = self.trans.len();
        let mut rev = vec![Vec::new(); n];
        for (s, out) in self.trans.iter().enumerate() {
            for &(_, t) in out {
                rev[t].push(s);
            }
        }
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            if k.contains(&(s / self.phases)) && self.accepting(s) {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(t) = queue.pop_front() {
            for &s in &rev[t] {
                if dist[s] == usize::MAX {
                    dist[s] = dist[t] + 1;
                    queue.push_back(s);
                }
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for &a in j {
            for (_, s) in self.initial(a) {
                if dist[s] != usize::MAX {
                    let cand = (dist[s] + 1, a);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
        }
        let (len, start) = best?;
        let (first, mut state) = self
            .initial(start)
            .into_iter()
            .filter(|&(_, s)| dist[s] == len - 1)
            .min_by_key(|&(st, _)| st)?;
        let mut steps = vec![first];
        while dist[state] > 0 {
            let want = dist[state] - 1;
            let &(st, t) = self.trans[state].iter().filter(|&&(_, t)| dist[t] == want).min_by_key(|&&(st, _)| st)?;
            steps.push(st);
            state = t;
        }
        Some(Walk::from_steps(start, steps).expect("automaton steps are connected"))
    }

    /// Whether an accepted walk without repeated vertices runs from `j` to `k`.
    pub fn path_exists(&self, j: usize, k: usize) -> bool {
        self.shortest_path(&VertexSet::from([j]), &VertexSet::from([k])).is_some()
    }

    /// Shortest accepted path (no repeated vertex) from `J` to `K`, ties
    /// broken by the walk order. Exhaustive depth-first search.
    pub fn shortest_path(&self, j: &VertexSet, k: &VertexSet) -> Option<Walk> {
        let d = self.g.num_vertices();
        for len in 1..d.max(1) {
            for &a in j {
                let mut on_path = vec![false; d];
                on_path[a] = true;
                let mut steps = Vec::with_capacity(len);
                for (s, state) in self.initial(a) {
                    if on_path[s.to] {
                        continue;
                    }
                    on_path[s.to] = true;
                    steps.push(s);
                    if self.dfs_exact(state, len, k, &mut on_path, &mut steps) {
                        return Some(Walk::from_steps(a, steps).expect("connected"));
                    }
                    steps.pop();
                    on_path[s.to] = false;
                }
            }
        }
        None
    }

    fn dfs_exact(&self, state: usize, len: usize, k: &VertexSet, on_path: &mut [bool], steps: &mut Vec<Step>) -> bool {
        if steps.len() == len {
            return k.contains(&(state / self.phases)) && self.accepting(state);
        }
        for &(s, t) in &self.trans[state] {
            if on_path[s.to] {
                continue;
            }
            on_path[s.to] = true;
            steps.push(s);
            if self.dfs_exact(t, len, k, on_path, steps) {
                return true;
            }
            steps.pop();
            on_path[s.to] = false;
        }
        false
    }

    /// Every accepted path from `j`, grouped by nothing; used by enumerators.
    pub fn all_paths_from(&self, j: usize) -> Vec<Walk> {
        let d = self.g.num_vertices();
        let mut out = Vec::new();
        let mut on_path = vec![false; d];
        on_path[j] = true;
        let mut steps = Vec::new();
        for (s, state) in self.initial(j) {
            if on_path[s.to] {
                continue;
            }
            on_path[s.to] = true;
            steps.push(s);
            self.collect_paths(j, state, &mut on_path, &mut steps, &mut out);
            steps.pop();
            on_path[s.to] = false;
        }
        out
    }

    fn collect_paths(&self, start: usize, state: usize, on_path: &mut [bool], steps: &mut Vec<Step>, out: &mut Vec<Walk>) {
        if self.accepting(state) {
            out.push(Walk::from_steps(start, steps.clone()).expect("connected"));
        }
        for &(s, t) in &self.trans[state] {
            if on_path[s.to] {
                continue;
            }
            on_path[s.to] = true;
            steps.push(s);
            self.collect_paths(start, t, on_path, steps, out);
            steps.pop();
            on_path[s.to] = false;
        }
    }
}
