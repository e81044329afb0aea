//! The versioned model document and its resolution into engine types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ceg::{build_ceg, FailureCeg, PosIx};
use crate::global_net::{CoreEventVariable, GlobalNet, VarId};
use crate::hierarchy::{CommunityMap, Cpt, EmissionTables, GnCegModel};
use crate::missingness::{build_mceg, build_mtree, Cluster, HeterogeneityModel, MCeg, MEventTree};
use crate::remedy::{FloretPrior, RemedyEvidence, RemedyRecord};
use crate::tree::{
    compute_positions, compute_stages, validate_probability_tree, with_stages, EventTree, FloretSpec, LeafCategory, ProbabilityTree, StagedTree, ViolationKind, TOL,
};

pub const BUNDLE_VERSION: u32 = 1;

/// A probability read from a decimal string or a JSON number and written
/// back as the shortest decimal string that parses to the same float.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Prob(pub f64);

impl Serialize for Prob {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for Prob {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Prob(x)),
            Raw::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(Prob)
                .map_err(|_| serde::de::Error::custom(format!("`{s}` is not a decimal probability"))),
        }
    }
}

fn probs(v: &[Prob]) -> Vec<f64> {
    v.iter().map(|p| p.0).collect()
}

/// Invalid document, located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl SchemaError {
    pub fn at(pointer: impl Into<String>, message: impl fmt::Display) -> Self {
        SchemaError { pointer: pointer.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBundle {
    pub version: u32,
    pub staged_tree: TreeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ceg: Option<CegDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_net: Option<GnDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community_map: Option<CommunityDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<TablesDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub remedies: Vec<RemedyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missingness: Option<MissingnessDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDoc {
    pub root: String,
    pub florets: Vec<FloretDoc>,
    /// Leaf name to category ("fail", "not fail"); unlisted leaves are plain.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub leaves: BTreeMap<String, String>,
    /// Explicit stage colouring; computed from the florets when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloretDoc {
    pub vertex: String,
    pub edges: Vec<TreeEdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEdgeDoc {
    pub label: String,
    pub child: String,
    pub prob: Prob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegDoc {
    pub positions: Vec<PositionDoc>,
    pub edges: Vec<CegEdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionDoc {
    pub name: String,
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CegEdgeDoc {
    pub src: String,
    pub dst: String,
    pub label: String,
    pub prob: Prob,
}

impl CegDoc {
    pub fn from_ceg(ceg: &FailureCeg) -> Self {
        CegDoc {
            positions: ceg
                .nodes()
                .iter()
                .map(|n| PositionDoc { name: n.name.clone(), members: n.members.clone(), stage: n.stage })
                .collect(),
            edges: ceg
                .edges()
                .iter()
                .map(|e| CegEdgeDoc {
                    src: ceg.node(e.src).name.clone(),
                    dst: ceg.node(e.dst).name.clone(),
                    label: e.label.clone(),
                    prob: Prob(e.prob),
                })
                .collect(),
        }
    }

    fn matches(&self, other: &CegDoc) -> bool {
        self.positions == other.positions
            && self.edges.len() == other.edges.len()
            && self.edges.iter().zip(&other.edges).all(|(a, b)| {
                a.src == b.src && a.dst == b.dst && a.label == b.label && (a.prob.0 - b.prob.0).abs() <= TOL
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnDoc {
    pub variables: Vec<VariableDoc>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDoc {
    pub name: String,
    #[serde(default = "binary_states")]
    pub states: Vec<String>,
}

fn binary_states() -> Vec<String> {
    vec!["no".into(), "yes".into()]
}

/// An edge of the CEG named by its source position and label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRef {
    pub position: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunityDoc {
    pub sub_communities: Vec<SubCommunityDoc>,
    /// Edges taken when a document names none of the floret's variables.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub defaults: Vec<EdgeRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubCommunityDoc {
    pub position: String,
    pub label: String,
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub emissions: Vec<EmissionDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub priors: Vec<PriorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionDoc {
    pub position: String,
    pub label: String,
    pub variable: String,
    #[serde(default)]
    pub parents: Vec<String>,
    pub rows: Vec<Vec<Prob>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorDoc {
    pub position: String,
    pub alpha: Vec<f64>,
    pub omega: f64,
    /// Root-cause index each edge is aligned with, or null.
    pub alignment: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemedyDoc {
    pub r: String,
    pub root_causes: Vec<String>,
    pub q: Prob,
    #[serde(default)]
    pub perfect: BTreeMap<String, Prob>,
    #[serde(default)]
    pub by_action: BTreeMap<String, BTreeMap<String, Prob>>,
    #[serde(default)]
    pub action_given_path: BTreeMap<String, BTreeMap<String, Prob>>,
    #[serde(default)]
    pub path_prior: BTreeMap<String, Prob>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recovery: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<RemedyEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessDoc {
    /// Tree vertex name to the probability its floret goes unrecorded.
    pub unobservable: BTreeMap<String, Prob>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<Cluster>,
    /// N for N-event-dependent missingness.
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    1
}

/// A document resolved into engine objects.
#[derive(Debug, Clone)]
pub struct Model {
    pub staged: StagedTree,
    pub ceg: FailureCeg,
    pub gn: Option<GlobalNet>,
    pub cmap: Option<CommunityMap>,
    pub emissions: Option<EmissionTables>,
    pub priors: BTreeMap<PosIx, FloretPrior>,
    pub remedies: Vec<RemedyRecord>,
    pub missing: Option<MissingModel>,
}

#[derive(Debug, Clone)]
pub struct MissingModel {
    pub mtree: MEventTree,
    pub mceg: MCeg,
    pub heterogeneity: HeterogeneityModel,
    pub depth: usize,
}

impl Model {
    pub fn ptree(&self) -> &ProbabilityTree {
        self.staged.ptree()
    }

    /// The GN-CEG with emission tables, when the document carries all parts.
    pub fn gn_ceg(&self) -> Option<GnCegModel> {
        let (gn, cmap, em) = (self.gn.as_ref()?, self.cmap.as_ref()?, self.emissions.as_ref()?);
        GnCegModel::new(self.ceg.clone(), gn.clone(), cmap.clone(), em.clone()).ok()
    }
}

/// Deserialises any document, locating failures by JSON pointer.
pub fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => Some(format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
                serde_path_to_error::Segment::Enum { variant } => Some(format!("/{variant}")),
                serde_path_to_error::Segment::Unknown => None,
            })
            .collect::<String>();
        SchemaError::at(pointer, e.into_inner())
    })
}

pub fn parse_bundle(text: &str) -> Result<ModelBundle, SchemaError> {
    let bundle: ModelBundle = from_json(text)?;
    if bundle.version != BUNDLE_VERSION {
        return Err(SchemaError::at("/version", format!("unsupported version {}", bundle.version)));
    }
    Ok(bundle)
}

/// Reads and checks a document; the parsed form is returned only when it resolves.
pub fn load_bundle(path: &Path) -> Result<ModelBundle, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::at("", format!("{}: {e}", path.display())))?;
    let b = parse_bundle(&text)?;
    b.resolve()?;
    Ok(b)
}

pub fn to_canonical_json(b: &ModelBundle) -> String {
    let mut s = serde_json::to_string_pretty(b).expect("bundle serialises");
    s.push('\n');
    s
}

pub fn save_bundle(b: &ModelBundle, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_canonical_json(b))
}

impl ModelBundle {
    pub fn new(tree: TreeDoc) -> Self {
        ModelBundle {
            version: BUNDLE_VERSION,
            staged_tree: tree,
            ceg: None,
            global_net: None,
            community_map: None,
            tables: None,
            remedies: Vec::new(),
            missingness: None,
        }
    }

    /// Builds every section and checks cross references.
    pub fn resolve(&self) -> Result<Model, SchemaError> {
        let staged = self.resolve_tree()?;
        let positions = compute_positions(&staged);
        let ceg = build_ceg(&staged, &positions).map_err(|e| SchemaError::at("/staged_tree", e))?;
        if let Some(doc) = &self.ceg {
            if !doc.matches(&CegDoc::from_ceg(&ceg)) {
                return Err(SchemaError::at("/ceg", "does not match the CEG built from the staged tree"));
            }
        }
        let gn = self.global_net.as_ref().map(resolve_gn).transpose()?;
        let edge_ref = |ptr: String, pos: &str, label: &str| {
            let w = ceg.resolve(pos).map_err(|e| SchemaError::at(format!("{ptr}/position"), e))?;
            ceg.edge_by_label(w, label).map_err(|e| SchemaError::at(format!("{ptr}/label"), e))
        };
        let cmap = match &self.community_map {
            None => None,
            Some(doc) => {
                let gn = gn.as_ref().ok_or_else(|| SchemaError::at("/community_map", "requires a global_net section"))?;
                let mut sub: BTreeMap<usize, BTreeSet<VarId>> = BTreeMap::new();
                for (i, s) in doc.sub_communities.iter().enumerate() {
                    let ptr = format!("/community_map/sub_communities/{i}");
                    let e = edge_ref(ptr.clone(), &s.position, &s.label)?;
                    let vars = sub.entry(e).or_default();
                    for (j, v) in s.variables.iter().enumerate() {
                        vars.insert(gn.var(v).ok_or_else(|| SchemaError::at(format!("{ptr}/variables/{j}"), format!("unknown variable `{v}`")))?);
                    }
                }
                let mut defaults = BTreeSet::new();
                for (i, d) in doc.defaults.iter().enumerate() {
                    defaults.insert(edge_ref(format!("/community_map/defaults/{i}"), &d.position, &d.label)?);
                }
                Some(CommunityMap::new(&ceg, gn, sub, defaults).map_err(|e| SchemaError::at("/community_map", e))?)
            }
        };
        let mut emissions = None;
        let mut priors = BTreeMap::new();
        if let Some(t) = &self.tables {
            if !t.emissions.is_empty() {
                let (gn, cmap) = match (&gn, &cmap) {
                    (Some(g), Some(c)) => (g, c),
                    _ => return Err(SchemaError::at("/tables/emissions", "requires global_net and community_map sections")),
                };
                let mut by_edge: BTreeMap<usize, Vec<Cpt>> = BTreeMap::new();
                for (i, d) in t.emissions.iter().enumerate() {
                    let ptr = format!("/tables/emissions/{i}");
                    let e = edge_ref(ptr.clone(), &d.position, &d.label)?;
                    let var = |name: &str, at: String| gn.var(name).ok_or_else(|| SchemaError::at(at, format!("unknown variable `{name}`")));
                    let variable = var(&d.variable, format!("{ptr}/variable"))?;
                    let parents = d
                        .parents
                        .iter()
                        .enumerate()
                        .map(|(j, p)| var(p, format!("{ptr}/parents/{j}")))
                        .collect::<Result<Vec<_>, _>>()?;
                    by_edge.entry(e).or_default().push(Cpt { variable, parents, rows: d.rows.iter().map(|r| probs(r)).collect() });
                }
                let em = EmissionTables { by_edge };
                GnCegModel::new(ceg.clone(), gn.clone(), cmap.clone(), em.clone()).map_err(|e| SchemaError::at("/tables/emissions", e))?;
                emissions = Some(em);
            }
            for (i, p) in t.priors.iter().enumerate() {
                let ptr = format!("/tables/priors/{i}");
                let w = ceg.resolve(&p.position).map_err(|e| SchemaError::at(format!("{ptr}/position"), e))?;
                let arity = ceg.out_edges(w).len();
                if p.alpha.len() != arity || p.alignment.len() != arity {
                    return Err(SchemaError::at(ptr, format!("prior at {} needs {arity} entries", p.position)));
                }
                if p.alpha.iter().any(|&a| a <= 0.0) || p.omega < 0.0 {
                    return Err(SchemaError::at(ptr, "hyperparameters must be positive"));
                }
                priors.insert(w, FloretPrior { alpha: p.alpha.clone(), omega: p.omega, alignment: p.alignment.clone() });
            }
        }
        let mut remedies = Vec::new();
        for (i, r) in self.remedies.iter().enumerate() {
            let ptr = format!("/remedies/{i}");
            for (j, rc) in r.root_causes.iter().enumerate() {
                ceg.resolve(rc).map_err(|e| SchemaError::at(format!("{ptr}/root_causes/{j}"), e))?;
            }
            let rec = r.to_record();
            crate::remedy::indicator_distribution(&rec).map_err(|e| SchemaError::at(ptr, e))?;
            remedies.push(rec);
        }
        let missing = match &self.missingness {
            None => None,
            Some(m) => {
                let unobs: BTreeMap<String, f64> = m.unobservable.iter().map(|(k, v)| (k.clone(), v.0)).collect();
                let mtree = build_mtree(staged.ptree(), &unobs).map_err(|e| SchemaError::at("/missingness/unobservable", e))?;
                let mceg = build_mceg(&mtree).map_err(|e| SchemaError::at("/missingness", e))?;
                let heterogeneity = HeterogeneityModel { clusters: m.clusters.clone() };
                if !m.clusters.is_empty() {
                    let s: f64 = m.clusters.iter().map(|c| c.weight).sum();
                    if (s - 1.0).abs() > TOL {
                        return Err(SchemaError::at("/missingness/clusters", format!("weights sum to {s}")));
                    }
                }
                if m.depth == 0 {
                    return Err(SchemaError::at("/missingness/depth", "must be at least 1"));
                }
                Some(MissingModel { mtree, mceg, heterogeneity, depth: m.depth })
            }
        };
        Ok(Model { staged, ceg, gn, cmap, emissions, priors, remedies, missing })
    }

    fn resolve_tree(&self) -> Result<StagedTree, SchemaError> {
        let t = &self.staged_tree;
        let specs: Vec<FloretSpec> = t
            .florets
            .iter()
            .map(|f| FloretSpec { vertex: f.vertex.clone(), edges: f.edges.iter().map(|e| (e.label.clone(), e.child.clone())).collect() })
            .collect();
        let cats = t.leaves.iter().map(|(k, v)| (k.clone(), LeafCategory::parse(v))).collect();
        let tree = EventTree::new(&t.root, &specs, &cats).map_err(|e| SchemaError::at("/staged_tree", e))?;
        for (k, v) in &t.leaves {
            match tree.vertex(k) {
                Some(id) if tree.is_leaf(id) => {}
                _ => return Err(SchemaError::at(format!("/staged_tree/leaves/{k}"), format!("`{k}` is not a leaf")))?,
            }
            if LeafCategory::parse(v) == LeafCategory::Plain && v != "sink" {
                return Err(SchemaError::at(format!("/staged_tree/leaves/{k}"), format!("unknown category `{v}`")));
            }
        }
        let theta = t.florets.iter().map(|f| (f.vertex.clone(), f.edges.iter().map(|e| e.prob.0).collect())).collect();
        let ptree = ProbabilityTree::from_named(tree, &theta).map_err(|e| SchemaError::at("/staged_tree", e))?;
        if let Some(v) = validate_probability_tree(&ptree).violations.first() {
            let i = t.florets.iter().position(|f| f.vertex == v.name).unwrap_or(0);
            let msg = match v.kind {
                ViolationKind::SumNotOne { sum } => format!("floret `{}` sums to {sum}", v.name),
                ViolationKind::OutsideOpenUnit { index, value } => {
                    format!("floret `{}` edge {index} has probability {value} outside (0, 1)", v.name)
                }
            };
            return Err(SchemaError::at(format!("/staged_tree/florets/{i}"), msg));
        }
        if t.stages.is_empty() {
            return Ok(compute_stages(&ptree));
        }
        let tree = ptree.tree();
        let mut groups = Vec::new();
        for (i, g) in t.stages.iter().enumerate() {
            let ids = g
                .iter()
                .map(|v| tree.vertex(v).ok_or_else(|| SchemaError::at(format!("/staged_tree/stages/{i}"), format!("unknown vertex `{v}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            groups.push(ids);
        }
        with_stages(&ptree, &groups).map_err(|e| SchemaError::at("/staged_tree/stages", e))
    }
}

fn resolve_gn(doc: &GnDoc) -> Result<GlobalNet, SchemaError> {
    let vars: Vec<CoreEventVariable> = doc.variables.iter().map(|v| CoreEventVariable { name: v.name.clone(), states: v.states.clone() }).collect();
    let idx: BTreeMap<&str, usize> = doc.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut edges = BTreeSet::new();
    for (i, (a, b)) in doc.edges.iter().enumerate() {
        match (idx.get(a.as_str()), idx.get(b.as_str())) {
            (Some(&x), Some(&y)) => {
                edges.insert((x, y));
            }
            _ => return Err(SchemaError::at(format!("/global_net/edges/{i}"), format!("unknown variable in `{a}` -> `{b}`"))),
        }
    }
    GlobalNet::new(vars, edges).map_err(|e| SchemaError::at("/global_net", e))
}

impl GnDoc {
    pub fn from_gn(gn: &GlobalNet) -> Self {
        GnDoc {
            variables: gn.variables().iter().map(|v| VariableDoc { name: v.name.clone(), states: v.states.clone() }).collect(),
            edges: gn.edge_names(),
        }
    }
}

fn unwrap_probs(m: &BTreeMap<String, Prob>) -> BTreeMap<String, f64> {
    m.iter().map(|(k, v)| (k.clone(), v.0)).collect()
}

impl RemedyDoc {
    pub fn to_record(&self) -> RemedyRecord {
        RemedyRecord {
            r: self.r.clone(),
            root_causes: self.root_causes.clone(),
            q: self.q.0,
            perfect: unwrap_probs(&self.perfect),
            by_action: self.by_action.iter().map(|(k, v)| (k.clone(), unwrap_probs(v))).collect(),
            action_given_path: self.action_given_path.iter().map(|(k, v)| (k.clone(), unwrap_probs(v))).collect(),
            path_prior: unwrap_probs(&self.path_prior),
            recovery: self.recovery.clone(),
            evidence: self.evidence,
        }
    }
}

impl TreeDoc {
    pub fn from_ptree(p: &ProbabilityTree) -> Self {
        let t = p.tree();
        let florets = (0..t.num_vertices())
            .filter(|&v| !t.is_leaf(v))
            .map(|v| FloretDoc {
                vertex: t.name(v).to_string(),
                edges: t
                    .out_edges(v)
                    .iter()
                    .zip(p.theta(v))
                    .map(|(&e, &q)| TreeEdgeDoc { label: t.edge(e).label.clone(), child: t.name(t.edge(e).child).to_string(), prob: Prob(q) })
                    .collect(),
            })
            .collect();
        let leaves = t
            .leaves()
            .filter(|&l| t.category(l) != LeafCategory::Plain)
            .map(|l| (t.name(l).to_string(), t.category(l).as_str().to_string()))
            .collect();
        TreeDoc { root: t.name(t.root()).to_string(), florets, leaves, stages: Vec::new() }
    }
}
