use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use ceg_engine::ceg::{CegPath, FailureCeg, DEFAULT_PATH_CAP};
use ceg_engine::extraction::{sigma, Document, Omega, OrderedEvents};
use ceg_engine::fixtures;
use ceg_engine::global_net::{
    build_core_event_variables, counts_from_corpus, derive_constraints, l_map, learn_global_net, ClusterConfig, ScoreConfig,
};
use ceg_engine::hierarchy::{build_flattening, q_map_resolved, Assignment};
use ceg_engine::shell::bundle::{CegDoc, GnDoc};
use ceg_engine::shell::{
    ceg_to_dot, evaluate, flattening_to_dot, from_json, gn_to_dot, oracle_check, parse_bundle, Model, QueryDoc, QueryError, QueryKind, SchemaError,
};

/// Chain event graph reliability engine.
#[derive(Debug, Parser)]
#[command(name = "ceg", version)]
struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Write the JSON artifact here and print a summary instead.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Maximum number of enumerated paths or oracle rows.
    #[arg(long, global = true, default_value_t = DEFAULT_PATH_CAP)]
    cap: usize,
    #[arg(long, global = true, default_value_t = 1e-10)]
    tolerance: f64,
    /// Directory holding omega.json; the built-in rules are used otherwise.
    #[arg(long, global = true, env = "CEG_REMEDY_CONFIG")]
    config_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphKind {
    Ceg,
    Mceg,
    Gn,
    Flattening,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Backdoor,
    Control,
    Mceg,
}

impl From<Kind> for QueryKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Backdoor => QueryKind::Backdoor,
            Kind::Control => QueryKind::Control,
            Kind::Mceg => QueryKind::Mceg,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ordered events for each non-empty line of a log file.
    Extract {
        #[arg(short, long)]
        input: PathBuf,
        /// Rules file; overrides the config directory.
        #[arg(long)]
        omega: Option<PathBuf>,
    },
    /// Learn a global net from a job file of documents and cluster config.
    BuildGn {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        omega: Option<PathBuf>,
    },
    /// Build the CEG of a bundle's staged tree.
    BuildCeg {
        #[arg(short, long, visible_alias = "tree")]
        input: PathBuf,
    },
    /// Map a document to a latent CEG path.
    MapPath {
        #[arg(short, long)]
        input: PathBuf,
        /// Cluster config mapping event keys to variable states.
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long, conflicts_with = "doc_file", required_unless_present = "doc_file")]
        text: Option<String>,
        #[arg(long)]
        doc_file: Option<PathBuf>,
        #[arg(long)]
        omega: Option<PathBuf>,
    },
    /// Effect of controlling a core event variable.
    DoQuery {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        var: String,
        #[arg(long)]
        state: String,
        /// Target position; the failure sink by default.
        #[arg(long)]
        target: Option<String>,
    },
    /// Back-door formula for a remedial or singular manipulation.
    Backdoor {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// m-adjusted back-door formula on the bundle's M-CEG.
    McegQuery {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
    /// Compare a formula with exhaustive enumeration.
    OracleCheck {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        query: PathBuf,
    },
    /// Graphviz text for a CEG, M-CEG, global net or flattening.
    ExportDot {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "ceg")]
        graph: GraphKind,
        /// Comma-separated edge labels of the path to flatten along.
        #[arg(long)]
        path: Option<String>,
    },
    /// Check a bundle against the schema and resolve it.
    Validate {
        #[arg(short, long)]
        input: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Schema(SchemaError),
    Other { code: &'static str, message: String },
    /// A completed run whose result is itself a failure.
    Check(Value, String),
}

impl Failure {
    fn other(code: &'static str, e: impl std::fmt::Display) -> Self {
        Failure::Other { code, message: e.to_string() }
    }

    fn payload(&self) -> Value {
        match self {
            Failure::Schema(e) => json!({ "error": "schema", "pointer": e.pointer, "message": e.message }),
            Failure::Other { code, message } => json!({ "error": code, "message": message }),
            Failure::Check(v, _) => v.clone(),
        }
    }
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Failure::Schema(e)
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Schema(s) => Failure::Schema(s),
            other => Failure::Other { code: other.code(), message: other.to_string() },
        }
    }
}

/// Result artifact and a one-paragraph summary.
struct Report {
    artifact: Value,
    summary: String,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::other("io", format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    from_json(&read(path)?).map_err(|e| Failure::Schema(SchemaError::at(e.pointer, format!("{}: {}", path.display(), e.message))))
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    Ok(parse_bundle(&read(path)?)?.resolve()?)
}

fn load_omega(flag: &Option<PathBuf>, config_dir: &Option<PathBuf>) -> Result<Omega, Failure> {
    if let Some(p) = flag {
        return read_json(p);
    }
    if let Some(dir) = config_dir {
        let p = dir.join("omega.json");
        if p.exists() {
            return read_json(&p);
        }
    }
    Ok(fixtures::omega())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("engine types serialise")
}

fn labels(ceg: &FailureCeg, path: &CegPath) -> String {
    ceg.path_labels(path).join(" -> ")
}

fn extract(cli: &Cli, input: &Path, omega: &Option<PathBuf>) -> Result<Report, Failure> {
    let omega = load_omega(omega, &cli.config_dir)?;
    let text = read(input)?;
    let docs: Vec<(String, OrderedEvents)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let id = format!("line{}", i + 1);
            let out = sigma(&Document::parse(&id, l), &omega);
            (id, out)
        })
        .collect();
    let pairs: usize = docs.iter().map(|(_, o)| o.order.len()).sum();
    let artifact = Value::Array(
        docs.iter().map(|(id, o)| json!({ "doc_id": id, "events": o.events, "order": o.order })).collect(),
    );
    Ok(Report { artifact, summary: format!("{} documents, {pairs} ordered pairs", docs.len()) })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GnJob {
    documents: Vec<String>,
    clusters: ClusterConfig,
    /// Documents that must show a cause-effect pair before it is required.
    #[serde(default = "one")]
    threshold: usize,
    #[serde(default)]
    required: Vec<(String, String)>,
    #[serde(default)]
    forbidden: Vec<(String, String)>,
    #[serde(default)]
    non_causal: Vec<(String, String)>,
    #[serde(default)]
    max_parents: Option<usize>,
    #[serde(default)]
    restarts: Option<usize>,
}

fn one() -> usize {
    1
}

fn build_gn(cli: &Cli, input: &Path, omega: &Option<PathBuf>) -> Result<Report, Failure> {
    let job: GnJob = read_json(input)?;
    let omega = load_omega(omega, &cli.config_dir)?;
    let corpus: Vec<OrderedEvents> =
        job.documents.iter().enumerate().map(|(i, t)| sigma(&Document::parse(&format!("doc{i}"), t), &omega)).collect();
    let (vars, unmapped) = build_core_event_variables(&corpus, &job.clusters);
    let counts = counts_from_corpus(&corpus, &job.clusters, &vars);
    let mut constraints = derive_constraints(&corpus, &job.clusters, &vars, job.threshold).map_err(|e| Failure::other("global_net", e))?;
    let ix = |field: &str, i: usize, name: &str| {
        vars.iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Failure::Schema(SchemaError::at(format!("/{field}/{i}"), format!("unknown variable `{name}`"))))
    };
    let pairs = |field: &str, list: &[(String, String)]| -> Result<BTreeSet<(usize, usize)>, Failure> {
        list.iter().enumerate().map(|(i, (a, b))| Ok((ix(field, i, a)?, ix(field, i, b)?))).collect()
    };
    constraints.required.extend(pairs("required", &job.required)?);
    constraints.forbidden.extend(pairs("forbidden", &job.forbidden)?);
    let mut config = ScoreConfig { seed: cli.seed, non_causal: pairs("non_causal", &job.non_causal)?, ..ScoreConfig::default() };
    if let Some(m) = job.max_parents {
        config.max_parents = m;
    }
    if let Some(r) = job.restarts {
        config.restarts = r;
    }
    let out = learn_global_net(&vars, &counts, &constraints, &config).map_err(|e| Failure::other("global_net", e))?;
    let name_pairs = |s: &BTreeSet<(usize, usize)>| -> Vec<(String, String)> {
        s.iter().map(|&(a, b)| (vars[a].name.clone(), vars[b].name.clone())).collect()
    };
    let artifact = json!({
        "learned": GnDoc::from_gn(&out.learned),
        "net": GnDoc::from_gn(&out.net),
        "score": out.score,
        "required": name_pairs(&constraints.required),
        "forbidden": name_pairs(&constraints.forbidden),
        "unmapped": unmapped,
    });
    let summary = format!(
        "{} variables from {} documents; learned {} edges, kept {} after the non-causal filter; BIC {:.4}",
        vars.len(),
        corpus.len(),
        out.learned.edges().len(),
        out.net.edges().len(),
        out.score
    );
    Ok(Report { artifact, summary })
}

fn build_ceg(input: &Path) -> Result<Report, Failure> {
    let model = load_model(input)?;
    let ceg = &model.ceg;
    let stages = ceg.stages();
    let shared = stages.iter().filter(|s| s.len() > 1).count();
    let summary = format!(
        "{} positions + 2 sinks, {} edges, {} stages ({shared} with more than one position)",
        ceg.num_internal(),
        ceg.num_edges(),
        stages.len()
    );
    let artifact = json!({
        "positions": ceg.num_internal(),
        "sinks": 2,
        "ceg": CegDoc::from_ceg(ceg),
        "topology": ceg.topology_fingerprint(),
    });
    Ok(Report { artifact, summary })
}

fn map_path(cli: &Cli, input: &Path, clusters: &Path, text: &Option<String>, doc_file: &Option<PathBuf>, omega: &Option<PathBuf>) -> Result<Report, Failure> {
    let model = load_model(input)?;
    let (gn, cmap) = match (&model.gn, &model.cmap) {
        (Some(g), Some(c)) => (g, c),
        _ => return Err(SchemaError::at("/community_map", "map-path needs global_net and community_map").into()),
    };
    let cfg: ClusterConfig = read_json(clusters)?;
    let omega = load_omega(omega, &cli.config_dir)?;
    let body = match (text, doc_file) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => read(p)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    let doc = Document::parse("input", &body);
    let g = l_map(&doc, &omega, gn, &cfg).map_err(|e| Failure::other("global_net", e))?;
    let path = q_map_resolved(&model.ceg, cmap, gn, &g).map_err(|e| Failure::other("hierarchy", e))?;
    let ceg = &model.ceg;
    let prob = ceg.path_probability(&path).map_err(|e| Failure::other("ceg", e))?;
    let artifact = json!({
        "variables": g.vertices.iter().map(|&v| gn.variable(v).name.clone()).collect::<Vec<_>>(),
        "labels": ceg.path_labels(&path),
        "positions": ceg.path_positions(&path).iter().map(|&w| ceg.node(w).name.clone()).collect::<Vec<_>>(),
        "probability": prob,
    });
    Ok(Report { artifact, summary: format!("{} (probability {prob})", labels(ceg, &path)) })
}

fn query(cli: &Cli, input: &Path, kind: QueryKind, q: &QueryDoc) -> Result<Report, Failure> {
    let model = load_model(input)?;
    let a = evaluate(&model, kind, q, cli.cap)?;
    let mut summary = format!("value {}", a.value);
    if let (Some(l), Some(b)) = (a.lambda, a.lambda_bar) {
        summary.push_str(&format!(" (intervened {l}, untouched {b})"));
    }
    Ok(Report { artifact: to_value(&a), summary })
}

fn check(cli: &Cli, input: &Path, kind: QueryKind, query: &Path) -> Result<Report, Failure> {
    let model = load_model(input)?;
    let q: QueryDoc = read_json(query)?;
    let r = oracle_check(&model, kind, &q, cli.cap, cli.tolerance)?;
    let summary = format!("formula {} oracle {} max abs diff {:e} (tolerance {:e})", r.formula, r.oracle, r.abs_diff, r.tolerance);
    if !r.pass {
        return Err(Failure::Check(to_value(&r), summary));
    }
    Ok(Report { artifact: to_value(&r), summary })
}

fn export_dot(input: &Path, graph: GraphKind, path: &Option<String>) -> Result<String, Failure> {
    let model = load_model(input)?;
    match graph {
        GraphKind::Ceg => Ok(ceg_to_dot(&model.ceg)),
        GraphKind::Mceg => {
            let m = model.missing.as_ref().ok_or_else(|| SchemaError::at("/missingness", "the bundle has no missingness section"))?;
            Ok(ceg_to_dot(&m.mceg.ceg))
        }
        GraphKind::Gn => Ok(gn_to_dot(model.gn.as_ref().ok_or_else(|| SchemaError::at("/global_net", "missing"))?)),
        GraphKind::Flattening => {
            let (gn, cmap) = match (&model.gn, &model.cmap) {
                (Some(g), Some(c)) => (g, c),
                _ => return Err(SchemaError::at("/community_map", "flattening needs global_net and community_map").into()),
            };
            let labels = path.as_deref().ok_or_else(|| Failure::other("usage", "--path is required for a flattening"))?;
            let ceg = &model.ceg;
            let mut w = ceg.root();
            let mut edges = Vec::new();
            for label in labels.split(',').map(str::trim) {
                let e = ceg.edge_by_label(w, label).map_err(|e| Failure::other("ceg", e))?;
                edges.push(e);
                w = ceg.edge(e).dst;
            }
            let path = CegPath { edges };
            let flat = build_flattening(ceg, gn, cmap, &Assignment::from_path(ceg, &path)).map_err(|e| Failure::other("hierarchy", e))?;
            Ok(flattening_to_dot(&flat))
        }
    }
}

fn emit(cli: &Cli, report: Report) -> Result<(), Failure> {
    if let Some(out) = &cli.output {
        let text = serde_json::to_string_pretty(&report.artifact).expect("json value") + "\n";
        fs::write(out, text).map_err(|e| Failure::other("io", format!("{}: {e}", out.display())))?;
    }
    if cli.json && cli.output.is_none() {
        println!("{}", serde_json::to_string_pretty(&report.artifact).expect("json value"));
    } else {
        println!("{}", report.summary);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Extract { input, omega } => emit(cli, extract(cli, input, omega)?),
        Command::BuildGn { input, omega } => emit(cli, build_gn(cli, input, omega)?),
        Command::BuildCeg { input } => emit(cli, build_ceg(input)?),
        Command::MapPath { input, clusters, text, doc_file, omega } => emit(cli, map_path(cli, input, clusters, text, doc_file, omega)?),
        Command::DoQuery { input, var, state, target } => {
            let q = QueryDoc {
                variable: Some(var.clone()),
                state: Some(state.clone()),
                y: target.clone().map(ceg_engine::shell::EventDoc::Position),
                ..QueryDoc::default()
            };
            emit(cli, query(cli, input, QueryKind::Control, &q)?)
        }
        Command::Backdoor { input, query: q } => emit(cli, query(cli, input, QueryKind::Backdoor, &read_json(q)?)?),
        Command::McegQuery { input, query: q } => emit(cli, query(cli, input, QueryKind::Mceg, &read_json(q)?)?),
        Command::OracleCheck { input, kind, query } => emit(cli, check(cli, input, (*kind).into(), query)?),
        Command::ExportDot { input, graph, path } => {
            let dot = export_dot(input, *graph, path)?;
            match &cli.output {
                Some(out) => fs::write(out, &dot).map_err(|e| Failure::other("io", format!("{}: {e}", out.display()))),
                None => {
                    print!("{dot}");
                    Ok(())
                }
            }
        }
        Command::Validate { input } => {
            let model = load_model(input)?;
            let summary = format!(
                "valid: {} positions + 2 sinks{}{}",
                model.ceg.num_internal(),
                if model.gn.is_some() { ", global net" } else { "" },
                if model.missing.is_some() { ", missingness" } else { "" }
            );
            emit(cli, Report { artifact: json!({ "valid": true }), summary })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            // validate always answers with the machine-readable payload
            if cli.json || matches!(cli.command, Command::Validate { .. }) {
                println!("{}", serde_json::to_string_pretty(&f.payload()).expect("json value"));
            }
            match &f {
                Failure::Schema(e) => eprintln!("error: {e}"),
                Failure::Other { message, .. } => eprintln!("error: {message}"),
                Failure::Check(_, summary) => {
                    if !cli.json {
                        println!("{summary}");
                    }
                    eprintln!("error: oracle difference above tolerance");
                }
            }
            ExitCode::FAILURE
        }
    }
}
