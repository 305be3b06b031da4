//! Random generators, a brute-force walk oracle and the verification suite.

use std::collections::HashSet;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{mask, Automaton, ColliderRules, ConnectionRules, DirectedRules, TrekRules};
use crate::gaussian::{
    adjustment_criterion, adjustment_criterion_marginal, symmetric_no_confounding, WeightedLinearSystem, IDENTITY_TOL,
    ZERO_TOL,
};
use crate::graph::{DirectedMixedGraph, GraphClassFlags, VertexSet};
use crate::marginal::marginalize;
use crate::par::{self, Execution};
use crate::queries::{ancestrally_blocked, blocked, is_trek, unblocked_directed_walks};
use crate::separation::{
    ancestral_m_separated, d_separated, m_separated_via_augmentation, t_separated, witness_is_valid, SeparationKind,
};
use crate::walk::{steps_from, Step, StepKind, Walk};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestbenchError {
    #[error("a graph needs at least one vertex")]
    NoVertices,
    #[error("unsatisfiable class combination: {0}")]
    Unsatisfiable(&'static str),
}

/// A target with only the two base requirements set.
pub fn class_target(canonical: bool, acyclic: bool) -> GraphClassFlags {
    GraphClassFlags { canonical, acyclic, canonical_acyclic: canonical && acyclic, ..Default::default() }
}

/// Random graph meeting every flag set in `target`. Unset flags are not
/// constrained, but a derived flag may not be set while one of its
/// components is explicitly unset.
///
/// Directed edges follow a random topological order when acyclicity is
/// required, bidirected pairs and directed edges are each present with
/// probability `density`, and canonical targets get a loop at every vertex.
/// Other graphs get no loops.
pub fn random_graph(d: usize, target: GraphClassFlags, density: f64, seed: u64) -> Result<DirectedMixedGraph, TestbenchError> {
    if d == 0 {
        return Err(TestbenchError::NoVertices);
    }
    let t = target;
    if (t.bidirected_canonical || t.canonically_directed || t.canonical_acyclic) && !t.canonical {
        return Err(TestbenchError::Unsatisfiable("canonical subclass of a non-canonical target"));
    }
    if t.canonical_acyclic && !t.acyclic {
        return Err(TestbenchError::Unsatisfiable("canonical_acyclic without acyclic"));
    }
    if t.canonically_directed_acyclic && !(t.canonically_directed && t.canonical_acyclic) {
        return Err(TestbenchError::Unsatisfiable("canonically_directed_acyclic without its components"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = density.clamp(0.0, 1.0);
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut directed = Vec::new();
    if !t.bidirected_canonical {
        for a in 0..d {
            for b in 0..d {
                if a == b {
                    continue;
                }
                let allowed = !t.acyclic || order.iter().position(|&x| x == a) < order.iter().position(|&x| x == b);
                if allowed && rng.random_bool(density) {
                    directed.push((a, b));
                }
            }
        }
    }
    let mut bidirected = Vec::new();
    if t.canonical {
        bidirected.extend((0..d).map(|v| (v, v)));
    }
    if !t.canonically_directed {
        for a in 0..d {
            for b in a + 1..d {
                if rng.random_bool(density) {
                    bidirected.push((a, b));
                }
            }
        }
    }
    Ok(DirectedMixedGraph::with_default_labels(d, &directed, &bidirected).expect("generated edges are valid"))
}

/// Options for [`random_system`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemOptions {
    /// Draw every weight from the nonnegative half of its range.
    pub nonnegative: bool,
}

const LAMBDA_ATTEMPTS: usize = 20;

/// Random weights on `g`.
///
/// Directed weights are uniform in `[-0.9/d, 0.9/d]`, so every row sum of
/// `|beta|` is below 0.9 and the system is stable. `Lambda` is `A A^T + 0.1 I`
/// restricted to the bidirected pattern; rows of vertices without a loop are
/// zero. The draw is repeated when the restriction is not positive definite
/// on the looped vertices; after that the off-diagonal part is halved until
/// it is.
pub fn random_system(g: &DirectedMixedGraph, rng: &mut ChaCha8Rng, opts: SystemOptions) -> WeightedLinearSystem {
    let d = g.num_vertices();
    let bound = 0.9 / d as f64;
    let lo = if opts.nonnegative { 0.0 } else { -1.0 };
    let mut beta = DMatrix::zeros(d, d);
    for (a, b) in g.directed_edges() {
        beta[(a, b)] = rng.random_range(lo..=1.0) * bound;
    }
    let looped: Vec<usize> = (0..d).filter(|&v| g.has_bidirected(v, v)).collect();
    let project = |m: &DMatrix<f64>| {
        let mut p = DMatrix::zeros(d, d);
        for (a, b) in g.bidirected_edges() {
            if g.has_bidirected(a, a) && g.has_bidirected(b, b) {
                p[(a, b)] = m[(a, b)];
                p[(b, a)] = m[(a, b)];
            }
        }
        p
    };
    let pd = |m: &DMatrix<f64>| {
        let sub = DMatrix::from_fn(looped.len(), looped.len(), |i, j| m[(looped[i], looped[j])]);
        sub.cholesky().is_some()
    };
    let mut lambda = DMatrix::zeros(d, d);
    for attempt in 0.. {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(lo..=1.0));
        let full = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
        lambda = project(&full);
        if pd(&lambda) || attempt + 1 >= LAMBDA_ATTEMPTS {
            break;
        }
    }
    while !pd(&lambda) {
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    lambda[(i, j)] *= 0.5;
                }
            }
        }
    }
    WeightedLinearSystem::new(g.clone(), beta, lambda).expect("weights follow the graph")
}

/// Whether some walk from `j` to `k` with at most `budget` steps is a
/// connection of the given kind, found by plain enumeration.
///
/// Prefixes are cut as soon as an interior vertex is blocked, which is sound
/// because blocking at a non-endpoint never depends on later steps. Whether
/// a walk prefix can still be completed depends only on its end, its last
/// step and the remaining budget, so dead ends are remembered under that
/// key. `AncestralM` enumerates paths only and keeps no such memory; `U` is
/// treated as `M`.
pub fn brute_force_connected(
    g: &DirectedMixedGraph,
    kind: SeparationKind,
    j: usize,
    k: usize,
    l: &VertexSet,
    budget: usize,
) -> bool {
    let mut on_path = vec![false; g.num_vertices()];
    on_path[j] = true;
    let mut s = Search {
        g,
        kind,
        j,
        k,
        l,
        anc: g.ancestral_closure(l),
        budget,
        steps: Vec::new(),
        on_path,
        dead: HashSet::new(),
    };
    s.run()
}

struct Search<'a> {
    g: &'a DirectedMixedGraph,
    kind: SeparationKind,
    j: usize,
    k: usize,
    l: &'a VertexSet,
    anc: VertexSet,
    budget: usize,
    steps: Vec<Step>,
    on_path: Vec<bool>,
    dead: HashSet<(usize, StepKind, usize)>,
}

impl Search<'_> {
    fn run(&mut self) -> bool {
        let left = self.budget.saturating_sub(self.steps.len());
        if left == 0 {
            return false;
        }
        let paths_only = self.kind == SeparationKind::AncestralM;
        let key = self.steps.last().map(|s| (s.to, s.kind, left));
        if let Some(key) = key {
            if !paths_only && self.dead.contains(&key) {
                return false;
            }
        }
        let here = self.steps.last().map_or(self.j, |s| s.to);
        for s in steps_from(self.g, here) {
            if self.kind == SeparationKind::D && s.kind == StepKind::Bidirected {
                continue;
            }
            if paths_only && self.on_path[s.to] {
                continue;
            }
            // Inside a trek `->` may only follow `<->` or `->`.
            if self.kind == SeparationKind::T
                && s.kind == StepKind::Forward
                && self.steps.last().is_none_or(|p| p.kind == StepKind::Backward)
            {
                continue;
            }
            if let Some(prev) = self.steps.last() {
                let collider = prev.head_at_to() && s.head_at_from();
                let passable = match (collider, paths_only) {
                    (true, false) => self.l.contains(&here),
                    (true, true) => self.anc.contains(&here),
                    (false, _) => !self.l.contains(&here),
                };
                if !passable {
                    continue;
                }
            }
            self.steps.push(s);
            self.on_path[s.to] = true;
            let found = (s.to == self.k && accepts(self.g, self.kind, self.j, &self.steps, self.l)) || self.run();
            self.on_path[s.to] = false;
            self.steps.pop();
            if found {
                return true;
            }
        }
        if let Some(key) = key {
            self.dead.insert(key);
        }
        false
    }
}

fn accepts(g: &DirectedMixedGraph, kind: SeparationKind, j: usize, steps: &[Step], l: &VertexSet) -> bool {
    let w = Walk::from_steps(j, steps.to_vec()).expect("enumerated steps are connected");
    match kind {
        SeparationKind::M | SeparationKind::U | SeparationKind::D => !blocked(&w, l),
        SeparationKind::AncestralM => w.is_path() && !ancestrally_blocked(&w, l, g),
        SeparationKind::T => {
            let mut cuts = vec![0];
            cuts.extend((1..w.len()).filter(|&i| w.is_collider_at(i)));
            cuts.push(w.len());
            !blocked(&w, l) && cuts.windows(2).all(|c| is_trek(&w.segment(c[0], c[1])))
        }
    }
}

/// Faults that can be injected into the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mutation {
    /// m-connection stops checking colliders against the conditioning set.
    DropColliderRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub d_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub mutation: Option<Mutation>,
    pub exec: Execution,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { d_max: 6, trials: 200, seed: 0, mutation: None, exec: Execution::default() }
    }
}

/// Edge lists of a counterexample graph, by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub vertices: Vec<String>,
    pub directed: Vec<[String; 2]>,
    pub bidirected: Vec<[String; 2]>,
}

impl GraphSnapshot {
    pub fn of(g: &DirectedMixedGraph) -> Self {
        let pair = |(a, b): (usize, usize)| [g.label(a).to_string(), g.label(b).to_string()];
        GraphSnapshot {
            vertices: g.labels().to_vec(),
            directed: g.directed_edges().map(pair).collect(),
            bidirected: g.bidirected_edges().map(pair).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// Rerunning the property with this trial seed reproduces the failure.
    pub seed: u64,
    pub graph: GraphSnapshot,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub trials: usize,
    pub failures: Vec<Failure>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub properties: Vec<PropertyReport>,
    pub elapsed_ms: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failures.is_empty())
    }

    pub fn failures(&self) -> usize {
        self.properties.iter().map(|p| p.failures.len()).sum()
    }

    /// Combines two reports; properties with the same name are merged.
    pub fn merge(mut self, other: VerificationReport) -> VerificationReport {
        for p in other.properties {
            match self.properties.iter_mut().find(|q| q.property == p.property) {
                Some(q) => {
                    q.trials += p.trials;
                    q.failures.extend(p.failures);
                    q.elapsed_ms += p.elapsed_ms;
                }
                None => self.properties.push(p),
            }
        }
        self.elapsed_ms += other.elapsed_ms;
        self
    }
}

type Outcome = Result<(), (DirectedMixedGraph, String)>;
type Property = fn(&mut ChaCha8Rng, usize, Option<Mutation>) -> Outcome;

/// Names of the properties run by [`verify_all`], in order.
pub const PROPERTIES: [&str; 17] = [
    "oracle-m",
    "oracle-t",
    "oracle-d",
    "trek-existence",
    "separation-chain",
    "collider-connection",
    "margin-preserves-walks",
    "margin-preserves-connection",
    "margin-composition",
    "augmentation",
    "trek-rule",
    "path-analysis",
    "marginal-system",
    "global-markov",
    "district-precision",
    "adjustment",
    "symmetric-adjustment",
];

fn property(name: &str) -> Property {
    match name {
        "oracle-m" => |r, d, m| oracle(r, d, m, SeparationKind::M),
        "oracle-t" => |r, d, m| oracle(r, d, m, SeparationKind::T),
        "oracle-d" => |r, d, m| oracle(r, d, m, SeparationKind::D),
        "trek-existence" => trek_existence,
        "separation-chain" => separation_chain,
        "collider-connection" => collider_connection,
        "margin-preserves-walks" => margin_preserves_walks,
        "margin-preserves-connection" => margin_preserves_connection,
        "margin-composition" => margin_composition,
        "augmentation" => augmentation,
        "trek-rule" => trek_rule,
        "path-analysis" => path_analysis,
        "marginal-system" => marginal_system,
        "global-markov" => global_markov,
        "district-precision" => district_precision,
        "adjustment" => adjustment,
        "symmetric-adjustment" => symmetric_adjustment,
        _ => unreachable!("unknown property {name}"),
    }
}

fn trial_seed(seed: u64, prop: usize, trial: usize) -> u64 {
    let mut x = seed ^ (prop as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Runs one property for one trial seed.
pub fn run_trial(name: &str, seed: u64, d_max: usize, mutation: Option<Mutation>) -> Option<Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=d_max.max(2));
    property(name)(&mut rng, d, mutation).err().map(|(g, query)| Failure { seed, graph: GraphSnapshot::of(&g), query })
}

/// Runs every property `trials` times on random graphs with up to `d_max`
/// vertices. With zero trials the report is empty.
pub fn verify_all(config: &VerifyConfig) -> VerificationReport {
    let start = Instant::now();
    let mut report = VerificationReport::default();
    if config.trials == 0 {
        return report;
    }
    for (pi, name) in PROPERTIES.iter().enumerate() {
        let t0 = Instant::now();
        let seeds: Vec<u64> = (0..config.trials).map(|t| trial_seed(config.seed, pi, t)).collect();
        let failures: Vec<Failure> =
            par::map(config.exec, seeds, |s| run_trial(name, s, config.d_max, config.mutation)).into_iter().flatten().collect();
        report.properties.push(PropertyReport {
            property: name.to_string(),
            trials: config.trials,
            failures,
            elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

fn set(xs: &[usize]) -> VertexSet {
    xs.iter().copied().collect()
}

fn fmt_set(g: &DirectedMixedGraph, s: &VertexSet) -> String {
    format!("{{{}}}", g.set_labels(s).join(","))
}

/// Two distinct vertices and a random conditioning set from the rest.
fn random_query(rng: &mut ChaCha8Rng, d: usize, max_l: usize) -> (usize, usize, VertexSet) {
    let mut vs: Vec<usize> = (0..d).collect();
    vs.shuffle(rng);
    let n = rng.random_range(0..=max_l.min(d - 2));
    (vs[0], vs[1], vs[2..2 + n].iter().copied().collect())
}

fn query_text(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet) -> String {
    format!("{} ~ {} | {}", g.label(j), g.label(k), fmt_set(g, l))
}

fn any_graph(rng: &mut ChaCha8Rng, d: usize) -> DirectedMixedGraph {
    let target = match rng.random_range(0..3) {
        0 => class_target(false, false),
        1 => class_target(true, false),
        _ => class_target(true, true),
    };
    random_graph(d, target, rng.random_range(0.1..0.45), rng.random()).expect("satisfiable")
}

fn canonical_graph(rng: &mut ChaCha8Rng, d: usize, acyclic: bool) -> DirectedMixedGraph {
    random_graph(d, class_target(true, acyclic), rng.random_range(0.1..0.45), rng.random()).expect("satisfiable")
}

fn canonically_directed_graph(rng: &mut ChaCha8Rng, d: usize) -> DirectedMixedGraph {
    let t = GraphClassFlags { canonically_directed: true, ..class_target(true, rng.random_bool(0.5)) };
    random_graph(d, t, rng.random_range(0.1..0.45), rng.random()).expect("satisfiable")
}

fn canonical_any(rng: &mut ChaCha8Rng, d: usize) -> DirectedMixedGraph {
    let acyclic = rng.random_bool(0.5);
    canonical_graph(rng, d, acyclic)
}

/// A canonical graph, canonically directed half of the time.
fn canonical_or_directed(rng: &mut ChaCha8Rng, d: usize) -> (bool, DirectedMixedGraph) {
    if rng.random_bool(0.5) {
        (true, canonically_directed_graph(rng, d))
    } else {
        (false, canonical_any(rng, d))
    }
}

/// m-connection under an optional fault.
fn m_connected(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet, mutation: Option<Mutation>) -> bool {
    let rules = ConnectionRules {
        drop_collider_rule: mutation == Some(Mutation::DropColliderRule),
        ..ConnectionRules::m(g.num_vertices(), l)
    };
    Automaton::new(g, rules).connects(&set(&[j]), &set(&[k]))
}

fn connected(g: &DirectedMixedGraph, kind: SeparationKind, j: usize, k: usize, l: &VertexSet, mutation: Option<Mutation>) -> bool {
    let (js, ks) = (set(&[j]), set(&[k]));
    match kind {
        SeparationKind::M | SeparationKind::U => m_connected(g, j, k, l, mutation),
        SeparationKind::T => !t_separated(g, &js, &ks, l).expect("disjoint").separated,
        SeparationKind::D => !d_separated(g, &js, &ks, l).expect("disjoint").separated,
        SeparationKind::AncestralM => !ancestral_m_separated(g, &js, &ks, l).expect("disjoint").separated,
    }
}

fn fail(g: &DirectedMixedGraph, msg: String) -> Outcome {
    Err((g.clone(), msg))
}

fn oracle(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>, kind: SeparationKind) -> Outcome {
    let g = any_graph(rng, d);
    let (j, k, l) = random_query(rng, d, d);
    let fast = connected(&g, kind, j, k, &l, mutation);
    let slow = brute_force_connected(&g, kind, j, k, &l, 2 * d);
    if fast != slow {
        return fail(&g, format!("{kind}: {} automaton={fast} brute={slow}", query_text(&g, j, k, &l)));
    }
    Ok(())
}

fn arc_rules(d: usize, l: &VertexSet, directed_only: bool) -> ConnectionRules {
    let in_l = mask(d, l);
    ConnectionRules {
        collider_ok: vec![false; d],
        noncollider_ok: in_l.iter().map(|b| !b).collect(),
        directed_only,
        end_heads: false,
        drop_collider_rule: false,
    }
}

fn trek_existence(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let (directed, g) = canonical_or_directed(rng, d);
    let (j, k, l) = random_query(rng, d, d);
    let t = g.trim();
    let trek = Automaton::new(&g, TrekRules { in_l: mask(d, &l), junctions: false }).connects(&set(&[j]), &set(&[k]));
    let mut verdicts = vec![("trek", trek)];
    for (name, h) in [("arc", &g), ("arc in trim", &t)] {
        let a = Automaton::new(h, arc_rules(d, &l, false));
        verdicts.push((name, a.connects(&set(&[j]), &set(&[k]))));
        verdicts.push((name, a.path_exists(j, k)));
    }
    if directed && g.is_acyclic() {
        for h in [&g, &t] {
            let a = Automaton::new(h, arc_rules(d, &l, true));
            verdicts.push(("d-arc", a.connects(&set(&[j]), &set(&[k]))));
            verdicts.push(("d-arc path", a.path_exists(j, k)));
        }
    }
    if verdicts.iter().any(|v| v.1 != trek) {
        return fail(&g, format!("{} verdicts {verdicts:?}", query_text(&g, j, k, &l)));
    }
    Ok(())
}

fn separation_chain(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>) -> Outcome {
    let (directed, g) = canonical_or_directed(rng, d);
    let (j, k, l) = random_query(rng, d, d);
    let mut kinds = vec![SeparationKind::T, SeparationKind::M, SeparationKind::AncestralM];
    if directed {
        kinds.push(SeparationKind::D);
    }
    let verdicts: Vec<(SeparationKind, bool)> = kinds.iter().map(|&kd| (kd, connected(&g, kd, j, k, &l, mutation))).collect();
    if directed {
        let ad = Automaton::new(&g, ConnectionRules::ancestral(&g, &l, true)).shortest_path(&set(&[j]), &set(&[k])).is_some();
        if ad != verdicts[0].1 {
            return fail(&g, format!("{} ancestral d-path {ad} vs {verdicts:?}", query_text(&g, j, k, &l)));
        }
    }
    if verdicts.iter().any(|v| v.1 != verdicts[0].1) {
        return fail(&g, format!("{} verdicts {verdicts:?}", query_text(&g, j, k, &l)));
    }
    Ok(())
}

fn local_index(keep: &VertexSet, v: usize) -> usize {
    keep.iter().position(|&x| x == v).expect("kept vertex")
}

fn local_set(keep: &VertexSet, s: &VertexSet) -> VertexSet {
    s.iter().map(|&v| local_index(keep, v)).collect()
}

fn collider_connection(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>) -> Outcome {
    let g = canonical_any(rng, d);
    let (j, k, l) = random_query(rng, d, d);
    let keep: VertexSet = [j, k].into_iter().chain(l.iter().copied()).collect();
    let m = marginalize(&g, &keep).expect("in range");
    let cc = Automaton::new(&m, ColliderRules).connects(&set(&[local_index(&keep, j)]), &set(&[local_index(&keep, k)]));
    let mc = m_connected(&g, j, k, &l, mutation);
    if cc != mc {
        return fail(&g, format!("{} m-connected={mc} collider-connected in margin={cc}", query_text(&g, j, k, &l)));
    }
    Ok(())
}

/// Disjoint `J`, `K`, `L` and a superset `V~` of their union.
fn random_sets(rng: &mut ChaCha8Rng, d: usize) -> (VertexSet, VertexSet, VertexSet, VertexSet) {
    let mut j = VertexSet::new();
    let mut k = VertexSet::new();
    let mut l = VertexSet::new();
    let mut keep = VertexSet::new();
    for v in 0..d {
        match rng.random_range(0..6) {
            0 => j.insert(v),
            1 => k.insert(v),
            2 => l.insert(v),
            3 | 4 => keep.insert(v),
            _ => false,
        };
    }
    keep.extend(j.iter().chain(&k).chain(&l).copied());
    (j, k, l, keep)
}

fn margin_preserves_walks(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let g = any_graph(rng, d);
    let (j, k, l, keep) = random_sets(rng, d);
    let m = marginalize(&g, &keep).expect("in range");
    let (jl, kl, ll) = (local_set(&keep, &j), local_set(&keep, &k), local_set(&keep, &l));
    let dm = m.num_vertices();
    let pairs = [
        (
            "directed",
            Automaton::new(&g, DirectedRules { in_l: mask(d, &l) }).connects(&j, &k),
            Automaton::new(&m, DirectedRules { in_l: mask(dm, &ll) }).connects(&jl, &kl),
        ),
        (
            "trek",
            Automaton::new(&g, TrekRules { in_l: mask(d, &l), junctions: false }).connects(&j, &k),
            Automaton::new(&m, TrekRules { in_l: mask(dm, &ll), junctions: false }).connects(&jl, &kl),
        ),
        (
            "t-connection",
            !t_separated(&g, &j, &k, &l).expect("disjoint").separated,
            !t_separated(&m, &jl, &kl, &ll).expect("disjoint").separated,
        ),
    ];
    for (name, a, b) in pairs {
        if a != b {
            return fail(
                &g,
                format!("{name} {} ~ {} | {} keep {}: graph={a} margin={b}", fmt_set(&g, &j), fmt_set(&g, &k), fmt_set(&g, &l), fmt_set(&g, &keep)),
            );
        }
    }
    Ok(())
}

fn margin_preserves_connection(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>) -> Outcome {
    let (directed, g) = canonical_or_directed(rng, d);
    let (j, k, l) = random_query(rng, d, d);
    let mut keep: VertexSet = [j, k].into_iter().chain(l.iter().copied()).collect();
    keep.extend((0..d).filter(|_| rng.random_bool(0.5)));
    let m = marginalize(&g, &keep).expect("in range");
    let (jl, kl, ll) = (local_index(&keep, j), local_index(&keep, k), local_set(&keep, &l));
    let text = || format!("{} keep {}", query_text(&g, j, k, &l), fmt_set(&g, &keep));
    let mg = connected(&g, SeparationKind::M, j, k, &l, mutation);
    let mm = connected(&m, SeparationKind::M, jl, kl, &ll, mutation);
    if mg != mm {
        return fail(&g, format!("m: {}: graph={mg} margin={mm}", text()));
    }
    if directed {
        // The margin of a canonically directed graph may gain bidirected
        // edges, so d-connection in the graph matches m-connection in the
        // margin; d-connection in the margin still implies it in the graph.
        let dg = connected(&g, SeparationKind::D, j, k, &l, mutation);
        let dm = connected(&m, SeparationKind::D, jl, kl, &ll, mutation);
        if dg != mm || (dm && !dg) {
            return fail(&g, format!("d: {}: graph d={dg}, margin m={mm} d={dm}", text()));
        }
    }
    Ok(())
}

fn margin_composition(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let g = any_graph(rng, d);
    let outer: VertexSet = (0..d).filter(|_| rng.random_bool(0.7)).collect();
    let inner: VertexSet = outer.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
    let once = marginalize(&g, &outer).expect("in range");
    let twice = marginalize(&once, &local_set(&outer, &outer)).expect("in range");
    if once != twice {
        return fail(&g, format!("not idempotent on {}", fmt_set(&g, &outer)));
    }
    let direct = marginalize(&g, &inner).expect("in range");
    let staged = marginalize(&once, &local_set(&outer, &inner)).expect("in range");
    if direct != staged {
        return fail(&g, format!("order matters: {} then {}", fmt_set(&g, &outer), fmt_set(&g, &inner)));
    }
    if g.is_acyclic() && !direct.is_acyclic() {
        return fail(&g, format!("margin on {} is cyclic", fmt_set(&g, &inner)));
    }
    Ok(())
}

fn augmentation(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>) -> Outcome {
    let g = canonical_graph(rng, d, true);
    let (j, k, l) = random_query(rng, d, d);
    let v = match m_separated_via_augmentation(&g, &set(&[j]), &set(&[k]), &l) {
        Ok(v) => v,
        Err(e) => return fail(&g, format!("{}: {e}", query_text(&g, j, k, &l))),
    };
    let mc = m_connected(&g, j, k, &l, mutation);
    if v.separated == mc {
        return fail(&g, format!("{} augmentation separated={} m-connected={mc}", query_text(&g, j, k, &l), v.separated));
    }
    if let Some(w) = v.witness {
        if !witness_is_valid(&g, SeparationKind::M, &w, &l) || w.start() != j || w.end() != k {
            return fail(&g, format!("{} invalid witness {}", query_text(&g, j, k, &l), w.render(&g)));
        }
    }
    Ok(())
}

fn system(rng: &mut ChaCha8Rng, d: usize) -> WeightedLinearSystem {
    let g = canonical_graph(rng, d, true);
    random_system(&g, rng, SystemOptions::default())
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

fn trek_rule(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let closed = s.covariance_closed_form().expect("stable");
    let trek = s.trek_rule_covariance(2 * d).expect("canonical");
    let err = max_abs_diff(&closed, &trek.values);
    if !trek.exact || err > IDENTITY_TOL {
        return fail(s.graph(), format!("trek rule error {err:e}, exact={}", trek.exact));
    }
    Ok(())
}

fn path_analysis(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let closed = s.covariance_closed_form().expect("stable");
    for j in 0..d {
        for k in (0..d).filter(|&k| k != j) {
            let v = s.path_analysis_covariance(j, k).expect("acyclic");
            if (v - closed[(j, k)]).abs() > IDENTITY_TOL {
                return fail(s.graph(), format!("({j},{k}) path analysis {v} closed form {}", closed[(j, k)]));
            }
        }
    }
    Ok(())
}

fn marginal_system(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let outer: VertexSet = (0..d).filter(|_| rng.random_bool(0.75)).collect();
    let inner: VertexSet = outer.iter().copied().filter(|_| rng.random_bool(0.75)).collect();
    let g = s.graph();
    let m = match s.marginal_system(&outer) {
        Ok(m) => m,
        Err(e) => return fail(g, format!("marginal system on {}: {e}", fmt_set(g, &outer))),
    };
    let full = s.covariance_closed_form().expect("stable");
    let idx: Vec<usize> = outer.iter().copied().collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
    let msig = m.covariance_closed_form().expect("stable margin");
    if max_abs_diff(&sub, &msig) > IDENTITY_TOL {
        return fail(g, format!("covariance of margin on {} differs", fmt_set(g, &outer)));
    }
    if m.graph() != &marginalize(g, &outer).expect("in range") {
        return fail(g, format!("margin graph on {} differs", fmt_set(g, &outer)));
    }
    let direct = s.marginal_system(&inner);
    let staged = m.marginal_system(&local_set(&outer, &inner));
    match (direct, staged) {
        (Ok(a), Ok(b)) => {
            if max_abs_diff(a.beta(), b.beta()) > IDENTITY_TOL || max_abs_diff(a.lambda(), b.lambda()) > IDENTITY_TOL {
                return fail(g, format!("two-stage margin {} then {} differs", fmt_set(g, &outer), fmt_set(g, &inner)));
            }
        }
        (a, b) => return fail(g, format!("two-stage margin failed: {:?} / {:?}", a.err(), b.err())),
    }
    Ok(())
}

fn global_markov(rng: &mut ChaCha8Rng, d: usize, mutation: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let g = s.graph();
    let (j, k, l) = random_query(rng, d, 2);
    if !m_connected(g, j, k, &l, mutation) {
        let ci = s.conditional_independence(j, k, &l).expect("positive definite");
        if ci.statistic >= ZERO_TOL {
            return fail(g, format!("{} separated but statistic {:e}", query_text(g, j, k, &l), ci.statistic));
        }
    }
    Ok(())
}

fn district_precision(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let g = s.graph();
    let inv = s.lambda().clone().try_inverse().expect("positive definite");
    let districts = crate::queries::districts(g);
    let of = |v: usize| districts.iter().position(|c| c.contains(&v));
    for j in 0..d {
        for k in 0..d {
            if of(j) != of(k) && inv[(j, k)].abs() > ZERO_TOL {
                return fail(g, format!("({j},{k}) in different districts but precision {:e}", inv[(j, k)]));
            }
        }
    }
    Ok(())
}

fn adjustment(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let g = s.graph();
    let (j, k, l) = random_query(rng, d, d);
    let (m1, m2) = adjustment_criterion_marginal(g, j, k, &l).expect("canonical acyclic");
    let (c1, c2, c3) = adjustment_criterion(g, j, k, &l).expect("canonical acyclic");
    if (m1 && m2) != (c1 && c2 && c3) {
        return fail(g, format!("{} marginal ({m1},{m2}) graph ({c1},{c2},{c3})", query_text(g, j, k, &l)));
    }
    if m1 && m2 {
        let gamma = s.regression_coefficient(k, j, &l).expect("positive definite");
        let walks = unblocked_directed_walks(g, &l, 2 * d).matrix;
        let effect = s.sigma_of(walks.get(j, k)).expect("edges exist");
        if (gamma - effect).abs() > ZERO_TOL {
            return fail(g, format!("{} gamma {gamma} vs unblocked directed paths {effect}", query_text(g, j, k, &l)));
        }
    }
    Ok(())
}

fn symmetric_adjustment(rng: &mut ChaCha8Rng, d: usize, _: Option<Mutation>) -> Outcome {
    let s = system(rng, d);
    let g = s.graph();
    let (j, k, l) = random_query(rng, d, d);
    let k_before_j = g.reaches_by_directed_walk(k, &set(&[j]));
    if !k_before_j && symmetric_no_confounding(g, j, k, &l).expect("canonical acyclic") {
        let gamma = s.regression_coefficient(k, j, &l).expect("positive definite");
        let effect = s.total_causal_effect(j, k).expect("acyclic");
        if (gamma - effect).abs() > ZERO_TOL {
            return fail(g, format!("{} gamma {gamma} vs total effect {effect}", query_text(g, j, k, &l)));
        }
    }
    Ok(())
}
