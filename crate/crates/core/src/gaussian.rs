//! Gaussian linear systems `V = beta^T V + E`, `Cov(E) = Lambda`.
//!
//! `beta[(j, k)]` is the weight of `j -> k`, `lambda[(j, k)]` the weight of
//! `j <-> k`. The weight of a walk is the product of its edge weights and
//! the weight of a walk set is the sum over its members.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::automaton::{mask, Automaton, ConnectionRules, DirectedRules};
use crate::graph::{DirectedMixedGraph, VertexSet};
use crate::marginal::marginalize;
use crate::queries::{ancestral_paths, d_connected_arcs, default_budget, treks, PathKind};
use crate::walk::{Step, StepKind, Walk, WalkMatrix, WalkSet};

/// Entries below this are treated as structural zeros (relative to scale).
pub const ZERO_TOL: f64 = 1e-8;
/// Tolerance for linear-algebra identities.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Smallest eigenvalue still counted as positive semi-definite.
pub const PSD_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearSystemError {
    #[error("weight matrix has dimension {0}, graph has {1} vertices")]
    Dimension(usize, usize),
    #[error("nonzero weight {2} on {0} -> {1}, which is not an edge")]
    OffSupportBeta(String, String, f64),
    #[error("nonzero weight {2} on {0} <-> {1}, which is not an edge")]
    OffSupportLambda(String, String, f64),
    #[error("lambda is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("operation requires an acyclic graph")]
    Cyclic,
    #[error("operation requires a canonical acyclic graph")]
    NotCanonicalAcyclic,
    #[error("walk uses {0}, which carries no weight")]
    MissingEdge(String),
    #[error("the marginal system needs a directed self-loop at {0} (weight {1})")]
    NonzeroMarginalDiagonal(String, f64),
    #[error("marginal weight {2} on ({0}, {1}) lies outside the marginal graph")]
    MarginalSupport(String, String, f64),
    #[error("vertices must be distinct and the conditioning set disjoint from them")]
    Overlap,
    #[error("vertex index {0} is out of range")]
    OutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RegularityFlags {
    /// `I - beta` is invertible.
    pub nonsingular: bool,
    /// Every principal submatrix of `I - beta` is invertible.
    pub principally_nonsingular: bool,
    /// Spectral radius of `beta` below one.
    pub stable: bool,
    /// Same for every principal submatrix.
    pub principally_stable: bool,
    pub lambda_psd: bool,
    pub lambda_pd: bool,
}

/// Covariance by the trek rule: per-pair trek sets and their weights.
#[derive(Debug, Clone)]
pub struct SymbolicCovariance {
    pub treks: WalkMatrix,
    pub values: DMatrix<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CiTest {
    /// Absolute partial correlation of the pair given the conditioning set.
    pub statistic: f64,
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLinearSystem {
    graph: DirectedMixedGraph,
    beta: DMatrix<f64>,
    lambda: DMatrix<f64>,
}

fn principal(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn invertible(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || m.clone().lu().determinant().abs() > 1e-12
}

impl WeightedLinearSystem {
    /// Validates that weights live on edges and that `lambda` is symmetric.
    pub fn new(graph: DirectedMixedGraph, beta: DMatrix<f64>, lambda: DMatrix<f64>) -> Result<Self, LinearSystemError> {
        let d = graph.num_vertices();
        for m in [&beta, &lambda] {
            if m.nrows() != d || m.ncols() != d {
                return Err(LinearSystemError::Dimension(m.nrows(), d));
            }
        }
        for a in 0..d {
            for b in 0..d {
                let x = beta[(a, b)];
                if x != 0.0 && !graph.has_directed(a, b) {
                    return Err(LinearSystemError::OffSupportBeta(graph.label(a).into(), graph.label(b).into(), x));
                }
                let y = lambda[(a, b)];
                if y != 0.0 && !graph.has_bidirected(a, b) {
                    return Err(LinearSystemError::OffSupportLambda(graph.label(a).into(), graph.label(b).into(), y));
                }
                if (y - lambda[(b, a)]).abs() > 1e-12 * (1.0 + y.abs()) {
                    return Err(LinearSystemError::Asymmetric(a, b));
                }
            }
        }
        let lambda = (&lambda + lambda.transpose()) * 0.5;
        Ok(WeightedLinearSystem { graph, beta, lambda })
    }

    /// Builds a system from per-edge weights; unlisted edges get weight zero.
    /// Each bidirected pair is listed once, in either orientation.
    pub fn from_weights(
        graph: DirectedMixedGraph,
        beta: &[((usize, usize), f64)],
        lambda: &[((usize, usize), f64)],
    ) -> Result<Self, LinearSystemError> {
        let d = graph.num_vertices();
        let mut b = DMatrix::zeros(d, d);
        let mut l = DMatrix::zeros(d, d);
        for &((x, y), w) in beta {
            if x >= d || y >= d {
                return Err(LinearSystemError::OutOfRange(x.max(y)));
            }
            b[(x, y)] = w;
        }
        for &((x, y), w) in lambda {
            if x >= d || y >= d {
                return Err(LinearSystemError::OutOfRange(x.max(y)));
            }
            l[(x, y)] = w;
            l[(y, x)] = w;
        }
        Self::new(graph, b, l)
    }

    pub fn graph(&self) -> &DirectedMixedGraph {
        &self.graph
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn step_weight(&self, s: &Step) -> Result<f64, LinearSystemError> {
        if !self.graph.contains_edge(&s.edge()) {
            return Err(LinearSystemError::MissingEdge(s.render(&self.graph)));
        }
        Ok(match s.kind {
            StepKind::Forward => self.beta[(s.from, s.to)],
            StepKind::Backward => self.beta[(s.to, s.from)],
            StepKind::Bidirected => self.lambda[(s.from, s.to)],
        })
    }

    pub fn walk_weight(&self, w: &Walk) -> Result<f64, LinearSystemError> {
        w.steps().iter().try_fold(1.0, |acc, s| Ok(acc * self.step_weight(s)?))
    }

    /// Sum of walk weights; the empty set weighs 0 and the trivial walk 1.
    pub fn sigma_of(&self, ws: &WalkSet) -> Result<f64, LinearSystemError> {
        ws.iter().try_fold(0.0, |acc, w| Ok(acc + self.walk_weight(w)?))
    }

    fn i_minus_beta(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - &self.beta
    }

    pub fn check_regularity(&self) -> RegularityFlags {
        let d = self.dim();
        let imb = self.i_minus_beta();
        let nonsingular = invertible(&imb);
        let stable = spectral_radius(&self.beta) < 1.0;
        let mut principally_nonsingular = nonsingular;
        let mut principally_stable = stable;
        if d > 0 && d < usize::BITS as usize {
            for bits in 1u64..(1u64 << d) {
                if !(principally_nonsingular || principally_stable) {
                    break;
                }
                let idx: Vec<usize> = (0..d).filter(|v| bits >> v & 1 == 1).collect();
                if principally_nonsingular && !invertible(&principal(&imb, &idx)) {
                    principally_nonsingular = false;
                }
                if principally_stable && spectral_radius(&principal(&self.beta, &idx)) >= 1.0 {
                    principally_stable = false;
                }
            }
        }
        let min_eig = if d == 0 {
            0.0
        } else {
            self.lambda.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        };
        RegularityFlags {
            nonsingular,
            principally_nonsingular,
            stable,
            principally_stable: principally_stable && stable,
            lambda_psd: d == 0 || min_eig >= PSD_FLOOR,
            lambda_pd: d == 0 || min_eig > -PSD_FLOOR,
        }
    }

    /// `(I - beta)^{-T} Lambda (I - beta)^{-1}` via two LU solves.
    pub fn covariance_closed_form(&self) -> Result<DMatrix<f64>, LinearSystemError> {
        let imb = self.i_minus_beta();
        let lu_t = imb.transpose().lu();
        let x = lu_t.solve(&self.lambda).ok_or_else(|| LinearSystemError::Singular("I - beta".into()))?;
        let y = lu_t.solve(&x.transpose()).ok_or_else(|| LinearSystemError::Singular("I - beta".into()))?;
        let s = y.transpose();
        Ok((&s + s.transpose()) * 0.5)
    }

    /// `(I - beta)^{-1}` via an LU solve.
    pub fn total_effect_matrix(&self) -> Result<DMatrix<f64>, LinearSystemError> {
        let d = self.dim();
        self.i_minus_beta()
            .lu()
            .solve(&DMatrix::identity(d, d))
            .ok_or_else(|| LinearSystemError::Singular("I - beta".into()))
    }

    /// `sum_{q=0}^{Q} beta^q`.
    pub fn neumann_truncated(&self, q: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut sum = DMatrix::identity(d, d);
        let mut power = DMatrix::identity(d, d);
        for _ in 0..q {
            power = &power * &self.beta;
            sum += &power;
        }
        sum
    }

    /// Covariance as the weight of the trek matrix at the given budget.
    pub fn trek_rule_covariance(&self, budget: usize) -> Result<SymbolicCovariance, LinearSystemError> {
        let t = treks(&self.graph, budget);
        let d = self.dim();
        let mut values = DMatrix::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                values[(j, k)] = self.sigma_of(t.matrix.get(j, k))?;
            }
        }
        Ok(SymbolicCovariance { treks: t.matrix, values, exact: t.exact })
    }

    fn variance_by_treks(&self, r: usize, trek_matrix: &WalkMatrix) -> Result<f64, LinearSystemError> {
        self.sigma_of(trek_matrix.get(r, r))
    }

    /// Covariance of `j != k` from paths only: trek paths plus, for every
    /// root `r`, the weight of the directed-arc paths through `r` times
    /// `Var(V_r)`.
    pub fn path_analysis_covariance(&self, j: usize, k: usize) -> Result<f64, LinearSystemError> {
        self.path_analysis_terms(j, k).map(|t| t.total())
    }

    pub fn path_analysis_terms(&self, j: usize, k: usize) -> Result<PathAnalysis, LinearSystemError> {
        let d = self.dim();
        if j >= d || k >= d {
            return Err(LinearSystemError::OutOfRange(j.max(k)));
        }
        if j == k {
            return Err(LinearSystemError::Overlap);
        }
        if !self.graph.is_acyclic() {
            return Err(LinearSystemError::Cyclic);
        }
        let budget = default_budget(&self.graph);
        let t = treks(&self.graph, budget).matrix;
        let trek_paths: WalkSet = t.get(j, k).filter(Walk::is_path);
        let arcs = d_connected_arcs(&self.graph, budget).matrix;
        let mut by_root: Vec<(usize, WalkSet)> = Vec::new();
        for w in arcs.get(j, k).iter().filter(|w| w.is_path()) {
            let r = arc_root(w);
            match by_root.iter_mut().find(|(x, _)| *x == r) {
                Some((_, s)) => {
                    s.insert(w.clone());
                }
                None => by_root.push((r, WalkSet::singleton(w.clone()))),
            }
        }
        by_root.sort_by_key(|(r, _)| *r);
        let trek_sum = self.sigma_of(&trek_paths)?;
        let mut roots = Vec::new();
        for (r, ws) in by_root {
            roots.push(RootTerm { root: r, arc_weight: self.sigma_of(&ws)?, variance: self.variance_by_treks(r, &t)?, paths: ws });
        }
        Ok(PathAnalysis { trek_paths, trek_sum, roots })
    }

    /// The linear system of the margin on `keep`, by Schur complement.
    pub fn marginal_system(&self, keep: &VertexSet) -> Result<WeightedLinearSystem, LinearSystemError> {
        let d = self.dim();
        if let Some(&v) = keep.iter().find(|&&v| v >= d) {
            return Err(LinearSystemError::OutOfRange(v));
        }
        let kv: Vec<usize> = keep.iter().copied().collect();
        let u: Vec<usize> = (0..d).filter(|v| !keep.contains(v)).collect();
        let graph = marginalize(&self.graph, keep).map_err(|_| LinearSystemError::OutOfRange(d))?;
        let b_vv = block(&self.beta, &kv, &kv);
        let b_vu = block(&self.beta, &kv, &u);
        let b_uv = block(&self.beta, &u, &kv);
        let b_uu = block(&self.beta, &u, &u);
        let l_vv = block(&self.lambda, &kv, &kv);
        let l_vu = block(&self.lambda, &kv, &u);
        let l_uu = block(&self.lambda, &u, &u);
        let imb_uu = DMatrix::identity(u.len(), u.len()) - b_uu;
        let m = if u.is_empty() {
            DMatrix::zeros(0, kv.len())
        } else {
            imb_uu.lu().solve(&b_uv).ok_or_else(|| LinearSystemError::Singular("I - beta on the dropped vertices".into()))?
        };
        let mut beta = b_vv + &b_vu * &m;
        let mt = m.transpose();
        let mut lambda = &l_vv + &mt * l_vu.transpose() + &l_vu * &m + &mt * l_uu * &m;
        lambda = (&lambda + lambda.transpose()) * 0.5;
        let scale = 1.0 + beta.amax().max(lambda.amax());
        let n = kv.len();
        for a in 0..n {
            if beta[(a, a)].abs() > ZERO_TOL * scale {
                return Err(LinearSystemError::NonzeroMarginalDiagonal(graph.label(a).into(), beta[(a, a)]));
            }
            beta[(a, a)] = 0.0;
            for b in 0..n {
                if !graph.has_directed(a, b) && a != b {
                    if beta[(a, b)].abs() > ZERO_TOL * scale {
                        return Err(LinearSystemError::MarginalSupport(graph.label(a).into(), graph.label(b).into(), beta[(a, b)]));
                    }
                    beta[(a, b)] = 0.0;
                }
                if !graph.has_bidirected(a, b) {
                    if lambda[(a, b)].abs() > ZERO_TOL * scale {
                        return Err(LinearSystemError::MarginalSupport(graph.label(a).into(), graph.label(b).into(), lambda[(a, b)]));
                    }
                    lambda[(a, b)] = 0.0;
                }
            }
        }
        WeightedLinearSystem::new(graph, beta, lambda)
    }

    fn precision_pair(&self, j: usize, k: usize, l: &VertexSet) -> Result<(f64, f64, f64), LinearSystemError> {
        let d = self.dim();
        if j >= d || k >= d {
            return Err(LinearSystemError::OutOfRange(j.max(k)));
        }
        if let Some(&v) = l.iter().find(|&&v| v >= d) {
            return Err(LinearSystemError::OutOfRange(v));
        }
        if j == k || l.contains(&j) || l.contains(&k) {
            return Err(LinearSystemError::Overlap);
        }
        let sigma = self.covariance_closed_form()?;
        let idx: Vec<usize> = [j, k].into_iter().chain(l.iter().copied()).collect();
        let sub = principal(&sigma, &idx);
        let n = idx.len();
        let chol = Cholesky::new(sub).ok_or_else(|| LinearSystemError::Singular("marginal covariance".into()))?;
        let mut e0 = DVector::zeros(n);
        e0[0] = 1.0;
        let mut e1 = DVector::zeros(n);
        e1[1] = 1.0;
        let c0 = chol.solve(&e0);
        let c1 = chol.solve(&e1);
        Ok((c0[0], c0[1], c1[1]))
    }

    /// Tests `V_j _||_ V_k | V_L` through the precision matrix of the
    /// `{j, k} u L` margin of the covariance.
    pub fn conditional_independence(&self, j: usize, k: usize, l: &VertexSet) -> Result<CiTest, LinearSystemError> {
        let (pjj, pjk, pkk) = self.precision_pair(j, k, l)?;
        let statistic = (pjk / (pjj * pkk).sqrt()).abs();
        Ok(CiTest { statistic, independent: statistic < ZERO_TOL })
    }

    pub fn conditionally_independent(&self, j: usize, k: usize, l: &VertexSet) -> Result<bool, LinearSystemError> {
        Ok(self.conditional_independence(j, k, l)?.independent)
    }

    /// Coefficient of `V_j` in the regression of `V_k` on `V_j` and `V_L`.
    pub fn regression_coefficient(&self, k: usize, j: usize, l: &VertexSet) -> Result<f64, LinearSystemError> {
        let (_, pjk, pkk) = self.precision_pair(j, k, l)?;
        Ok(-pjk / pkk)
    }

    fn directed_paths(&self, j: usize, k: usize, l: &VertexSet) -> Result<WalkSet, LinearSystemError> {
        let d = self.dim();
        if j >= d || k >= d {
            return Err(LinearSystemError::OutOfRange(j.max(k)));
        }
        if !self.graph.is_acyclic() {
            return Err(LinearSystemError::Cyclic);
        }
        let a = Automaton::new(&self.graph, DirectedRules { in_l: mask(d, l) });
        Ok(a.all_paths_from(j).into_iter().filter(|w| w.end() == k).collect())
    }

    /// Weight of all directed paths from `j` to `k`.
    pub fn total_causal_effect(&self, j: usize, k: usize) -> Result<f64, LinearSystemError> {
        self.sigma_of(&self.directed_paths(j, k, &VertexSet::new())?)
    }

    /// Weight of the directed paths from `j` to `k` whose non-endpoints avoid `L`.
    pub fn controlled_effect(&self, j: usize, k: usize, l: &VertexSet) -> Result<f64, LinearSystemError> {
        self.sigma_of(&self.directed_paths(j, k, l)?)
    }
}

/// The unique vertex of a collider-free, bidirected-free walk with no
/// arrowhead pointing at it.
pub fn arc_root(w: &Walk) -> usize {
    w.steps().iter().find(|s| s.kind == StepKind::Forward).map_or(w.end(), |s| s.from)
}

#[derive(Debug, Clone)]
pub struct RootTerm {
    pub root: usize,
    pub paths: WalkSet,
    pub arc_weight: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct PathAnalysis {
    pub trek_paths: WalkSet,
    pub trek_sum: f64,
    pub roots: Vec<RootTerm>,
}

impl PathAnalysis {
    pub fn total(&self) -> f64 {
        self.trek_sum + self.roots.iter().map(|r| r.arc_weight * r.variance).sum::<f64>()
    }
}

fn require_canonical_acyclic(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet) -> Result<(), LinearSystemError> {
    let d = g.num_vertices();
    if let Some(&v) = [j, k].iter().chain(l).find(|&&v| v >= d) {
        return Err(LinearSystemError::OutOfRange(v));
    }
    if j == k || l.contains(&j) || l.contains(&k) {
        return Err(LinearSystemError::Overlap);
    }
    if !(g.is_canonical() && g.is_acyclic()) {
        return Err(LinearSystemError::NotCanonicalAcyclic);
    }
    Ok(())
}

/// The two conditions on the margin over `{j, k} u L`: the only path from
/// `j` to `k` not blocked by `L` is the edge `j -> k`, and `k` has no
/// directed walk into `L`.
pub fn adjustment_criterion_marginal(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet) -> Result<(bool, bool), LinearSystemError> {
    require_canonical_acyclic(g, j, k, l)?;
    let keep: VertexSet = [j, k].into_iter().chain(l.iter().copied()).collect();
    let order: Vec<usize> = keep.iter().copied().collect();
    let local = |v: usize| order.binary_search(&v).expect("kept");
    let m = marginalize(g, &keep).map_err(|_| LinearSystemError::OutOfRange(j))?;
    let (jl, kl) = (local(j), local(k));
    let ll: VertexSet = l.iter().map(|&v| local(v)).collect();
    let paths = ancestral_paths(&m, PathKind::M, &ll);
    let c1 = paths.get(jl, kl).iter().all(|w| w.len() == 1 && w.steps()[0].kind == StepKind::Forward);
    let c2 = !m.reaches_by_directed_walk(kl, &ll);
    Ok((c1, c2))
}

/// The three conditions on the graph itself: every path from `j` to `k` not
/// ancestrally blocked by `L` is right-directed; `k` has no directed walk
/// into `L`; and no vertex outside `{j, k} u L` lying on a directed walk
/// from `j` to `k` unblocked by `L` has a directed walk into `L`.
pub fn adjustment_criterion(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet) -> Result<(bool, bool, bool), LinearSystemError> {
    require_canonical_acyclic(g, j, k, l)?;
    let d = g.num_vertices();
    let a = Automaton::new(g, ConnectionRules::ancestral(g, l, false));
    let c1 = a
        .all_paths_from(j)
        .iter()
        .filter(|w| w.end() == k)
        .all(|w| w.steps().iter().all(|s| s.kind == StepKind::Forward));
    let c2 = !g.reaches_by_directed_walk(k, l);
    let dir = Automaton::new(g, DirectedRules { in_l: mask(d, l) });
    let from_j = dir.reachable_from(j);
    let c3 = !(0..d).any(|v| {
        v != j && v != k && !l.contains(&v) && from_j.contains(&v) && dir.reachable_from(v).contains(&k) && g.reaches_by_directed_walk(v, l)
    });
    Ok((c1, c2, c3))
}

/// No descendant of `j` or `k` in `L`, and no path from `j` to `k` made of
/// confounding arcs escapes ancestral blocking by `L`.
///
/// A path is a chain of confounding arcs exactly when it has an arrowhead at
/// both endpoints: cutting at colliders leaves collider-free pieces with
/// heads at both ends, which are neither right- nor left-directed.
pub fn symmetric_no_confounding(g: &DirectedMixedGraph, j: usize, k: usize, l: &VertexSet) -> Result<bool, LinearSystemError> {
    require_canonical_acyclic(g, j, k, l)?;
    if g.reaches_by_directed_walk(j, l) || g.reaches_by_directed_walk(k, l) {
        return Ok(false);
    }
    let rules = ConnectionRules { end_heads: true, ..ConnectionRules::ancestral(g, l, false) };
    Ok(!Automaton::new(g, rules).path_exists(j, k))
}
