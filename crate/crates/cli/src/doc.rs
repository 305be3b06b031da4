//! JSON documents for graphs and weighted systems, and DOT rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dmg_core::separation::UndirectedGraph;
use dmg_core::{DirectedMixedGraph, WeightedLinearSystem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub vertices: Vec<String>,
    #[serde(default)]
    pub directed: Vec<[String; 2]>,
    /// Unordered pairs; a loop is written `[a, a]`.
    #[serde(default)]
    pub bidirected: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    #[serde(flatten)]
    pub graph: GraphDocument,
    /// `"A->B"` to weight. Absent when the file only describes a graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BTreeMap<String, f64>>,
    /// `"A<->B"` to weight, smaller label first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<BTreeMap<String, f64>>,
}

impl GraphDocument {
    pub fn of(g: &DirectedMixedGraph) -> Self {
        let pair = |(a, b): (usize, usize)| [g.label(a).to_string(), g.label(b).to_string()];
        GraphDocument {
            vertices: g.labels().to_vec(),
            directed: g.directed_edges().map(pair).collect(),
            bidirected: g.bidirected_edges().map(pair).collect(),
        }
    }

    pub fn of_undirected(g: &UndirectedGraph) -> Self {
        let l = g.labels();
        GraphDocument {
            vertices: l.to_vec(),
            directed: Vec::new(),
            bidirected: g.edges().iter().map(|&(a, b)| [l[a].clone(), l[b].clone()]).collect(),
        }
    }

    pub fn to_graph(&self) -> Result<DirectedMixedGraph> {
        fn pairs(v: &[[String; 2]]) -> Vec<(&str, &str)> {
            v.iter().map(|[a, b]| (a.as_str(), b.as_str())).collect()
        }
        Ok(DirectedMixedGraph::new(&self.vertices.iter().map(String::as_str).collect::<Vec<_>>(), &pairs(&self.directed), &pairs(&self.bidirected))?)
    }
}

fn split_key<'a>(key: &'a str, arrow: &str) -> Result<(&'a str, &'a str)> {
    match key.split_once(arrow) {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim(), b.trim())),
        _ => bail!("weight key `{key}` is not of the form `A{arrow}B`"),
    }
}

impl SystemDocument {
    #[cfg(test)]
    pub fn of(s: &WeightedLinearSystem) -> Self {
        let g = s.graph();
        let beta = g.directed_edges().map(|(a, b)| (format!("{}->{}", g.label(a), g.label(b)), s.beta()[(a, b)])).collect();
        let lambda = g
            .bidirected_edges()
            .map(|(a, b)| {
                let (x, y) = if g.label(a) <= g.label(b) { (a, b) } else { (b, a) };
                (format!("{}<->{}", g.label(x), g.label(y)), s.lambda()[(a, b)])
            })
            .collect();
        SystemDocument { graph: GraphDocument::of(g), beta: Some(beta), lambda: Some(lambda) }
    }

    pub fn has_weights(&self) -> bool {
        self.beta.is_some() || self.lambda.is_some()
    }

    /// Unlisted edges carry weight zero.
    pub fn to_system(&self) -> Result<WeightedLinearSystem> {
        let g = self.graph.to_graph()?;
        let index = |label: &str| g.index_of(label).with_context(|| format!("weight references unknown vertex `{label}`"));
        let mut beta = Vec::new();
        for (key, &w) in self.beta.iter().flatten() {
            if key.contains("<->") {
                bail!("beta key `{key}` names a bidirected edge");
            }
            let (a, b) = split_key(key, "->")?;
            let (a, b) = (index(a)?, index(b)?);
            if !g.has_directed(a, b) {
                bail!("beta key `{key}` is not an edge of the graph");
            }
            beta.push(((a, b), w));
        }
        let mut lambda = Vec::new();
        let mut seen = BTreeMap::new();
        for (key, &w) in self.lambda.iter().flatten() {
            let (a, b) = split_key(key, "<->")?;
            let (a, b) = (index(a)?, index(b)?);
            if !g.has_bidirected(a, b) {
                bail!("lambda key `{key}` is not an edge of the graph");
            }
            if let Some(other) = seen.insert((a.min(b), a.max(b)), key) {
                bail!("lambda keys `{other}` and `{key}` name the same edge");
            }
            lambda.push(((a, b), w));
        }
        Ok(WeightedLinearSystem::from_weights(g, &beta, &lambda)?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid document {}", path.display()))
}

fn dot_id(s: &str) -> String {
    format!("\"{s}\"")
}

/// Directed edges solid, bidirected edges dashed with heads at both ends.
pub fn dot(g: &DirectedMixedGraph) -> String {
    let mut s = String::from("digraph G {\n");
    for l in g.labels() {
        let _ = writeln!(s, "  {};", dot_id(l));
    }
    for (a, b) in g.directed_edges() {
        let _ = writeln!(s, "  {} -> {};", dot_id(g.label(a)), dot_id(g.label(b)));
    }
    for (a, b) in g.bidirected_edges() {
        let _ = writeln!(s, "  {} -> {} [dir=both, style=dashed];", dot_id(g.label(a)), dot_id(g.label(b)));
    }
    s.push_str("}\n");
    s
}

pub fn dot_undirected(g: &UndirectedGraph) -> String {
    let l = g.labels();
    let mut s = String::from("graph G {\n");
    for v in l {
        let _ = writeln!(s, "  {};", dot_id(v));
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(s, "  {} -- {};", dot_id(&l[a]), dot_id(&l[b]));
    }
    s.push_str("}\n");
    s
}
