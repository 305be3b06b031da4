mod doc;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dmg_core::gaussian::{adjustment_criterion, adjustment_criterion_marginal, symmetric_no_confounding};
use dmg_core::queries::{default_budget, districts, family};
use dmg_core::separation::{augment, separated};
use dmg_core::testbench::{verify_all, Mutation, VerifyConfig};
use dmg_core::{
    marginalize, marginalize_admg, DirectedMixedGraph, Execution, SeparationKind, SeparationQuery, VertexSet, WalkKind,
    WalkSet,
};
use serde::Serialize;
use serde_json::{json, Value};

use doc::{dot, dot_undirected, read_json, GraphDocument, SystemDocument};

#[derive(Parser)]
#[command(name = "dmg", version, about = "Walks, separation and latent projection on directed mixed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vertex and edge counts, graph classes and districts.
    Info { graph: PathBuf },
    /// Decide a separation statement. Exit status 0 if separated, 1 if connected.
    Separate {
        graph: PathBuf,
        /// m, t, d, am (ancestral m) or u (via the augmented graph).
        #[arg(long, default_value = "m")]
        kind: String,
        #[arg(long, value_delimiter = ',', required = true)]
        j: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Marginal graph on the kept vertices.
    Marginalize {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        keep: Vec<String>,
        /// Drop bidirected loops from the result.
        #[arg(long)]
        trim: bool,
        /// Project a trimmed acyclic graph through path existence.
        #[arg(long)]
        admg: bool,
        /// Print DOT instead of JSON.
        #[arg(long)]
        dot: bool,
    },
    /// Enumerate the walks of one family between two vertices.
    Walks {
        graph: PathBuf,
        /// directed, left-directed, trek, d-arc, m-arc, confounding-arc,
        /// collider, bidirected-chain, mconn, tconn or dconn.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        /// Length budget; defaults to twice the number of vertices.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long)]
        paths_only: bool,
    },
    /// Covariance matrix of a weighted system.
    Covariance {
        system: PathBuf,
        #[arg(long, value_enum, default_value = "closed")]
        method: Method,
        /// Trek length budget; defaults to twice the number of vertices.
        #[arg(long)]
        budget: Option<usize>,
        /// Also list the walks behind every entry.
        #[arg(long)]
        symbolic: bool,
    },
    /// Adjustment criteria for the effect of one vertex on another.
    Adjust {
        file: PathBuf,
        #[arg(long)]
        cause: String,
        #[arg(long)]
        effect: String,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Augmented undirected graph.
    Augment {
        graph: PathBuf,
        #[arg(long)]
        dot: bool,
    },
    /// Randomized cross-checks of the library. Exit status 1 on any failure.
    Verify {
        #[arg(long, default_value_t = 6)]
        d_max: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, env = "DMG_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        sequential: bool,
        /// Inject a known fault to check that it is detected.
        #[arg(long, value_enum, hide = true)]
        inject: Option<Injection>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Trek,
    Path,
}

#[derive(Clone, Copy, ValueEnum)]
enum Injection {
    DropColliderRule,
}

fn read_graph(path: &PathBuf) -> Result<DirectedMixedGraph> {
    read_json::<GraphDocument>(path)?.to_graph()
}

fn vertex(g: &DirectedMixedGraph, label: &str) -> Result<usize> {
    g.index_of(label).with_context(|| format!("unknown vertex `{label}`"))
}

fn vertices(g: &DirectedMixedGraph, labels: &[String]) -> Result<VertexSet> {
    Ok(g.vertex_set(labels)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn info(path: &PathBuf) -> Result<ExitCode> {
    let g = read_graph(path)?;
    let loops = g.bidirected_edges().filter(|(a, b)| a == b).count();
    print_json(&json!({
        "vertices": g.num_vertices(),
        "directed_edges": g.num_directed(),
        "bidirected_edges": g.num_bidirected(),
        "bidirected_loops": loops,
        "classes": g.classify(),
        "districts": districts(&g).iter().map(|s| g.set_labels(s)).collect::<Vec<_>>(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn separate(path: &PathBuf, kind: &str, j: &[String], k: &[String], given: &[String]) -> Result<ExitCode> {
    let g = read_graph(path)?;
    let kind: SeparationKind = kind.parse().map_err(anyhow::Error::msg)?;
    let q = SeparationQuery { kind, j: vertices(&g, j)?, k: vertices(&g, k)?, l: vertices(&g, given)? };
    let v = separated(&g, &q)?;
    for w in &v.warnings {
        warn(w);
    }
    print_json(&json!({
        "kind": kind.to_string(),
        "separated": v.separated,
        "witness": v.witness.as_ref().map(|w| w.render(&g)),
    }))?;
    Ok(if v.separated { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn marginal(path: &PathBuf, keep: &[String], trim: bool, admg: bool, as_dot: bool) -> Result<ExitCode> {
    let g = read_graph(path)?;
    let keep = vertices(&g, keep)?;
    let mut m = if admg { marginalize_admg(&g, &keep)? } else { marginalize(&g, &keep)? };
    if trim {
        m = m.trim();
    }
    if as_dot {
        print!("{}", dot(&m));
    } else {
        print_json(&GraphDocument::of(&m))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn walks(
    path: &PathBuf,
    kind: &str,
    from: &str,
    to: &str,
    given: &[String],
    max_len: Option<usize>,
    paths_only: bool,
) -> Result<ExitCode> {
    let g = read_graph(path)?;
    let kind: WalkKind = kind.parse().map_err(anyhow::Error::msg)?;
    let (j, k, l) = (vertex(&g, from)?, vertex(&g, to)?, vertices(&g, given)?);
    let budget = max_len.unwrap_or_else(|| default_budget(&g));
    let t = family(&g, kind, &l, budget);
    let mut set = t.matrix.get(j, k).clone();
    if paths_only {
        set = set.filter(|w| w.is_path());
    }
    if !t.exact {
        warn(&format!("walks longer than {budget} steps exist and were not listed"));
    }
    print_json(&json!({
        "kind": kind.name(),
        "from": from,
        "to": to,
        "given": given,
        "max_len": budget,
        "exact": t.exact,
        "walks": set.render(&g),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

fn rendered(g: &DirectedMixedGraph, ws: &WalkSet) -> Vec<String> {
    ws.render(g)
}

fn covariance(path: &PathBuf, method: Method, budget: Option<usize>, symbolic: bool) -> Result<ExitCode> {
    let s = read_json::<SystemDocument>(path)?.to_system()?;
    let g = s.graph().clone();
    let d = g.num_vertices();
    let budget = budget.unwrap_or_else(|| default_budget(&g));
    let mut out = json!({ "vertices": g.labels() });
    match method {
        Method::Closed => {
            out["method"] = "closed".into();
            out["matrix"] = json!(matrix_json(&s.covariance_closed_form()?));
        }
        Method::Trek => {
            let t = s.trek_rule_covariance(budget)?;
            if !t.exact {
                warn(&format!("treks longer than {budget} steps were left out"));
            }
            out["method"] = "trek".into();
            out["budget"] = budget.into();
            out["exact"] = t.exact.into();
            out["matrix"] = json!(matrix_json(&t.values));
            if symbolic {
                let entries: Vec<Value> = (0..d)
                    .flat_map(|j| (j..d).map(move |k| (j, k)))
                    .map(|(j, k)| json!({ "pair": [g.label(j), g.label(k)], "treks": rendered(&g, t.treks.get(j, k)) }))
                    .collect();
                out["symbolic"] = entries.into();
            }
        }
        Method::Path => {
            if !g.is_acyclic() {
                bail!("path analysis requires an acyclic graph");
            }
            let variances = s.trek_rule_covariance(default_budget(&g))?.values;
            let mut m = variances.clone();
            let mut entries = Vec::new();
            for j in 0..d {
                for k in j + 1..d {
                    let terms = s.path_analysis_terms(j, k)?;
                    m[(j, k)] = terms.total();
                    m[(k, j)] = terms.total();
                    if symbolic {
                        let roots: Vec<Value> = terms
                            .roots
                            .iter()
                            .map(|r| json!({ "root": g.label(r.root), "paths": rendered(&g, &r.paths), "variance": r.variance }))
                            .collect();
                        entries.push(json!({
                            "pair": [g.label(j), g.label(k)],
                            "trek_paths": rendered(&g, &terms.trek_paths),
                            "roots": roots,
                        }));
                    }
                }
            }
            out["method"] = "path".into();
            out["matrix"] = json!(matrix_json(&m));
            if symbolic {
                out["symbolic"] = entries.into();
            }
        }
    }
    print_json(&out)?;
    Ok(ExitCode::SUCCESS)
}

const EFFECT_TOL: f64 = 1e-8;

fn adjust(path: &PathBuf, cause: &str, effect: &str, given: &[String]) -> Result<ExitCode> {
    let document = read_json::<SystemDocument>(path)?;
    let g = document.graph.to_graph()?;
    let (j, k, l) = (vertex(&g, cause)?, vertex(&g, effect)?, vertices(&g, given)?);
    let (m1, m2) = adjustment_criterion_marginal(&g, j, k, &l)?;
    let (c1, c2, c3) = adjustment_criterion(&g, j, k, &l)?;
    let symmetric = symmetric_no_confounding(&g, j, k, &l)?;
    let mut out = json!({
        "prop10": m1 && m2,
        "prop10_conditions": [m1, m2],
        "thm5": c1 && c2 && c3,
        "thm5_conditions": [c1, c2, c3],
        "symmetric": symmetric,
    });
    if document.has_weights() {
        let s = document.to_system()?;
        let gamma = s.regression_coefficient(k, j, &l)?;
        let total = s.total_causal_effect(j, k)?;
        out["gamma"] = gamma.into();
        out["total_effect"] = total.into();
        if m1 && m2 {
            let unblocked = s.controlled_effect(j, k, &l)?;
            out["unblocked_path_effect"] = unblocked.into();
            out["gamma_matches"] = ((gamma - unblocked).abs() < EFFECT_TOL).into();
        }
        if symmetric && !g.reaches_by_directed_walk(k, &[j].into()) {
            out["symmetric_gamma_matches"] = ((gamma - total).abs() < EFFECT_TOL).into();
        }
    }
    print_json(&out)?;
    Ok(ExitCode::SUCCESS)
}

fn augmented(path: &PathBuf, as_dot: bool) -> Result<ExitCode> {
    let g = read_graph(path)?;
    let a = augment(&g);
    if let Some(w) = &a.warning {
        warn(w);
    }
    if as_dot {
        print!("{}", dot_undirected(&a.graph));
    } else {
        let d = GraphDocument::of_undirected(&a.graph);
        print_json(&json!({ "vertices": d.vertices, "edges": d.bidirected }))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(d_max: usize, trials: usize, seed: u64, as_json: bool, sequential: bool, inject: Option<Injection>) -> Result<ExitCode> {
    let config = VerifyConfig {
        d_max,
        trials,
        seed,
        mutation: inject.map(|Injection::DropColliderRule| Mutation::DropColliderRule),
        exec: if sequential { Execution::Sequential } else { Execution::Parallel },
    };
    let report = verify_all(&config);
    if as_json {
        print_json(&report)?;
    } else {
        for p in &report.properties {
            let status = if p.failures.is_empty() { "ok" } else { "FAILED" };
            println!("{:<30} {:>6} trials {:>4} failures {:>10.1}ms  {status}", p.property, p.trials, p.failures.len(), p.elapsed_ms);
            if let Some(f) = p.failures.first() {
                println!("    seed {}: {}", f.seed, f.query);
                println!("    graph {}", serde_json::to_string(&f.graph)?);
            }
        }
        println!("{} failures, {:.1}ms", report.failures(), report.elapsed_ms);
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Info { graph } => info(&graph),
        Command::Separate { graph, kind, j, k, given } => separate(&graph, &kind, &j, &k, &given),
        Command::Marginalize { graph, keep, trim, admg, dot } => marginal(&graph, &keep, trim, admg, dot),
        Command::Walks { graph, kind, from, to, given, max_len, paths_only } => {
            walks(&graph, &kind, &from, &to, &given, max_len, paths_only)
        }
        Command::Covariance { system, method, budget, symbolic } => covariance(&system, method, budget, symbolic),
        Command::Adjust { file, cause, effect, given } => adjust(&file, &cause, &effect, &given),
        Command::Augment { graph, dot } => augmented(&graph, dot),
        Command::Verify { d_max, trials, seed, json, sequential, inject } => verify(d_max, trials, seed, json, sequential, inject),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
