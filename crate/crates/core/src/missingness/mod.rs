//! Missing floret indicators, M-trees and M-CEGs, engineer heterogeneity
//! and back-door queries restricted to complete cases.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ceg::{build_ceg, CegError, FailureCeg, NodeKind, PathEvent, PosIx};
use crate::hierarchy::{Flattening, HierarchyError};
use crate::tree::{
    compute_positions, compute_stages, validate_with, EventTree, FloretSpec, LeafCategory, ProbabilityTree, TreeError, VertexId, ViolationKind, TOL,
};

mod query;

pub use query::{m_backdoor_remedial, m_backdoor_singular};

pub const MISSING_LABEL: &str = "Missing";
pub const OBSERVED_LABEL: &str = "NM";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MissingError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("`{0}` is a leaf and has no floret")]
    LeafFloret(String),
    #[error("missing probability {1} at `{0}` is outside [0, 1]")]
    BadProbability(String, f64),
    #[error("cannot merge the children of `{vertex}` under label `{label}`")]
    UnsupportedMerge { vertex: String, label: String },
    #[error("heterogeneity weights are invalid: {0}")]
    BadWeights(String),
    #[error("not identifiable: {0}")]
    NotIdentifiable(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Ceg(#[from] CegError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
}

/// What an M-tree vertex stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "of", rename_all = "snake_case")]
pub enum MVertexKind {
    /// A fact vertex; unobservable ones carry the flag.
    Fact { vertex: String, unobservable: bool },
    /// The indicator floret B_v.
    Indicator(String),
    /// Outcomes reached when the floret of v is missing.
    Merged(String),
    Leaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MEventTree {
    pub ptree: ProbabilityTree,
    /// Indexed by M-tree vertex id.
    pub kinds: Vec<MVertexKind>,
}

/// Vertex, (label, child) edges and floret probabilities.
type FloretRow = (String, Vec<(String, String)>, Vec<f64>);

struct Builder<'a> {
    fact: &'a ProbabilityTree,
    missing: &'a BTreeMap<String, f64>,
    florets: Vec<FloretRow>,
    leaves: BTreeMap<String, LeafCategory>,
    kinds: BTreeMap<String, MVertexKind>,
}

impl Builder<'_> {
    /// Emits the subtree of fact vertex `v` under name prefix `scope` and
    /// returns the name standing in its place.
    fn emit(&mut self, v: VertexId, scope: &str) -> Result<String, MissingError> {
        let t = self.fact.tree();
        let name = format!("{scope}{}", t.name(v));
        if t.is_leaf(v) {
            self.leaves.insert(name.clone(), t.category(v));
            self.kinds.insert(name.clone(), MVertexKind::Leaf);
            return Ok(name);
        }
        let mut edges = Vec::new();
        for &e in t.out_edges(v) {
            let child = self.emit(t.edge(e).child, scope)?;
            edges.push((t.edge(e).label.clone(), child));
        }
        self.florets.push((name.clone(), edges, self.fact.theta(v).to_vec()));
        let m = self.missing.get(t.name(v)).copied();
        self.kinds.insert(name.clone(), MVertexKind::Fact { vertex: t.name(v).to_string(), unobservable: m.is_some() });
        let Some(m) = m else { return Ok(name) };
        let merged = self.merged(v, scope)?;
        let ind = format!("{name}'");
        self.florets.push((
            ind.clone(),
            vec![(MISSING_LABEL.into(), merged), (OBSERVED_LABEL.into(), name)],
            vec![m, 1.0 - m],
        ));
        self.kinds.insert(ind.clone(), MVertexKind::Indicator(t.name(v).to_string()));
        Ok(ind)
    }

    /// Floret seen when F(v) is missing: v's grandchildren outcomes grouped
    /// by label, with the unobserved choice marginalised.
    fn merged(&mut self, v: VertexId, scope: &str) -> Result<String, MissingError> {
        let t = self.fact.tree();
        let name = format!("{scope}{}''", t.name(v));
        let inner = format!("{name}/");
        // (label, members as (fact vertex, probability))
        let mut groups: Vec<(String, Vec<(VertexId, f64)>)> = Vec::new();
        let mut leaf_children = Vec::new();
        for (&e, &p) in t.out_edges(v).iter().zip(self.fact.theta(v)) {
            let c = t.edge(e).child;
            if t.is_leaf(c) {
                leaf_children.push((t.edge(e).label.clone(), c, p));
                continue;
            }
            for (&f, &q) in t.out_edges(c).iter().zip(self.fact.theta(c)) {
                let label = &t.edge(f).label;
                let member = (t.edge(f).child, p * q);
                match groups.iter_mut().find(|g| &g.0 == label) {
                    Some(g) => g.1.push(member),
                    None => groups.push((label.clone(), vec![member])),
                }
            }
        }
        let leaf_group = |members: &[(VertexId, f64)], cat: LeafCategory| members.iter().all(|&(x, _)| t.is_leaf(x) && t.category(x) == cat);
        for (label, c, p) in leaf_children {
            match groups.iter_mut().find(|g| leaf_group(&g.1, t.category(c))) {
                Some(g) => g.1.push((c, p)),
                None => groups.push((label, vec![(c, p)])),
            }
        }
        let mut edges = Vec::new();
        let mut probs = Vec::new();
        for (label, members) in groups {
            let mass: f64 = members.iter().map(|m| m.1).sum();
            let first = members[0].0;
            let child = if t.is_leaf(first) && leaf_group(&members, t.category(first)) {
                let leaf = format!("{inner}{label}");
                self.leaves.insert(leaf.clone(), t.category(first));
                self.kinds.insert(leaf.clone(), MVertexKind::Leaf);
                leaf
            } else if members.len() == 1 {
                self.emit(first, &inner)?
            } else {
                return Err(MissingError::UnsupportedMerge { vertex: t.name(v).to_string(), label });
            };
            edges.push((label, child));
            probs.push(mass);
        }
        self.florets.push((name.clone(), edges, probs));
        self.kinds.insert(name.clone(), MVertexKind::Merged(t.name(v).to_string()));
        Ok(name)
    }
}

/// Inserts an indicator floret above every unobservable floret. Internal
/// M-tree vertices are named v0, v1, ... and leaves l0, l1, ... breadth first.
pub fn build_mtree(fact: &ProbabilityTree, missing: &BTreeMap<String, f64>) -> Result<MEventTree, MissingError> {
    let t = fact.tree();
    for (v, &m) in missing {
        let id = t.vertex(v).ok_or_else(|| MissingError::UnknownVertex(v.clone()))?;
        if t.is_leaf(id) {
            return Err(MissingError::LeafFloret(v.clone()));
        }
        if !(0.0..=1.0).contains(&m) {
            return Err(MissingError::BadProbability(v.clone(), m));
        }
    }
    let mut b = Builder { fact, missing, florets: Vec::new(), leaves: BTreeMap::new(), kinds: BTreeMap::new() };
    let root = b.emit(t.root(), "")?;
    let specs: Vec<FloretSpec> = b
        .florets
        .iter()
        .map(|(v, e, _)| FloretSpec { vertex: v.clone(), edges: e.clone() })
        .collect();
    let draft = EventTree::new(&root, &specs, &b.leaves)?;
    // final names in breadth-first order
    let mut rename = BTreeMap::new();
    let (mut nv, mut nl) = (0, 0);
    for id in 0..draft.num_vertices() {
        let new = if draft.is_leaf(id) {
            nl += 1;
            format!("l{}", nl - 1)
        } else {
            nv += 1;
            format!("v{}", nv - 1)
        };
        rename.insert(draft.name(id).to_string(), new);
    }
    let specs: Vec<FloretSpec> = specs
        .iter()
        .map(|f| FloretSpec {
            vertex: rename[&f.vertex].clone(),
            edges: f.edges.iter().map(|(l, c)| (l.clone(), rename[c].clone())).collect(),
        })
        .collect();
    let leaves = b.leaves.iter().map(|(k, &c)| (rename[k].clone(), c)).collect();
    let tree = EventTree::new(&rename[&root], &specs, &leaves)?;
    let theta: BTreeMap<String, Vec<f64>> = b.florets.iter().map(|(v, _, p)| (rename[v].clone(), p.clone())).collect();
    let mut kinds = vec![MVertexKind::Leaf; tree.num_vertices()];
    for (old, kind) in b.kinds {
        kinds[tree.vertex(&rename[&old]).expect("renamed vertex")] = kind;
    }
    let ptree = ProbabilityTree::from_named(tree, &theta)?;
    let report = validate_with(&ptree, |v| matches!(kinds[v], MVertexKind::Indicator(_) | MVertexKind::Merged(_)));
    if let Some(v) = report.violations.first() {
        let value = match v.kind {
            ViolationKind::SumNotOne { sum } => sum,
            ViolationKind::OutsideOpenUnit { value, .. } => value,
        };
        return Err(MissingError::BadProbability(v.name.clone(), value));
    }
    Ok(MEventTree { ptree, kinds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum VertexClass {
    /// Position with an unobservable floret.
    Missing,
    Observed,
    /// Missing-indicator position.
    Indicator,
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCeg {
    pub ceg: FailureCeg,
    pub classes: Vec<VertexClass>,
}

pub fn build_mceg(m: &MEventTree) -> Result<MCeg, MissingError> {
    let st = compute_stages(&m.ptree);
    let pos = compute_positions(&st);
    let ceg = build_ceg(&st, &pos)?;
    let tree = m.ptree.tree();
    let classes = ceg
        .nodes()
        .iter()
        .map(|n| {
            if n.kind != NodeKind::Internal {
                return VertexClass::Sink;
            }
            let kinds: Vec<&MVertexKind> = n.members.iter().map(|v| &m.kinds[tree.vertex(v).expect("member")]).collect();
            if kinds.iter().any(|k| matches!(k, MVertexKind::Indicator(_))) {
                VertexClass::Indicator
            } else if kinds.iter().any(|k| matches!(k, MVertexKind::Fact { unobservable: true, .. })) {
                VertexClass::Missing
            } else {
                VertexClass::Observed
            }
        })
        .collect();
    Ok(MCeg { ceg, classes })
}

impl MCeg {
    pub fn class_members(&self, class: VertexClass) -> BTreeSet<PosIx> {
        (0..self.classes.len()).filter(|&w| self.classes[w] == class).collect()
    }

    /// Missing edges of the indicators sitting directly above `w`.
    pub fn missing_edges_for(&self, w: PosIx) -> BTreeSet<usize> {
        let ceg = &self.ceg;
        ceg.in_edges(w)
            .iter()
            .filter(|&&e| ceg.edge(e).label == OBSERVED_LABEL && self.classes[ceg.edge(e).src] == VertexClass::Indicator)
            .filter_map(|&e| ceg.edge_by_label(ceg.edge(e).src, MISSING_LABEL).ok())
            .collect()
    }

    /// Paths on which no indicator of a position in `ws` fires: B_W = 0.
    pub fn b_zero(&self, ws: &BTreeSet<PosIx>) -> PathEvent {
        PathEvent::along(ws.iter().flat_map(|&w| self.missing_edges_for(w))).negate()
    }

    /// Paths taking no Missing edge at all.
    pub fn complete(&self) -> PathEvent {
        let ceg = &self.ceg;
        PathEvent::along((0..ceg.num_edges()).filter(|&e| {
            ceg.edge(e).label == MISSING_LABEL && self.classes[ceg.edge(e).src] == VertexClass::Indicator
        }))
        .negate()
    }
}

/// Mixture of engineer clusters: per-cluster additive offsets on a base
/// Dirichlet-role vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HeterogeneityModel {
    pub clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cluster {
    pub name: String,
    pub weight: f64,
    /// Offsets per position name; positions not listed use the base vector.
    #[serde(default)]
    pub offsets: BTreeMap<String, Vec<f64>>,
}

/// Mean edge distribution at `position`: Σ_j p(η_j) mean_j.
pub fn mix_heterogeneity(het: &HeterogeneityModel, position: &str, alpha: &[f64]) -> Result<Vec<f64>, MissingError> {
    if het.clusters.is_empty() {
        return Err(MissingError::BadWeights("no clusters".into()));
    }
    let s: f64 = het.clusters.iter().map(|c| c.weight).sum();
    if (s - 1.0).abs() > TOL || het.clusters.iter().any(|c| c.weight < 0.0) {
        return Err(MissingError::BadWeights(format!("weights sum to {s}")));
    }
    let mut out = vec![0.0; alpha.len()];
    for c in &het.clusters {
        let a: Vec<f64> = match c.offsets.get(position) {
            Some(off) if off.len() == alpha.len() => alpha.iter().zip(off).map(|(a, o)| a + o).collect(),
            Some(_) => return Err(MissingError::BadWeights(format!("cluster {} offset length at {position}", c.name))),
            None => alpha.to_vec(),
        };
        if a.iter().any(|&x| x <= 0.0) {
            return Err(MissingError::BadWeights(format!("cluster {} gives a non-positive parameter", c.name)));
        }
        let z: f64 = a.iter().sum();
        for (o, x) in out.iter_mut().zip(&a) {
            *o += c.weight * x / z;
        }
    }
    Ok(out)
}

/// Adds N-event-dependent missing-event indicators to a flattening.
pub fn extend_flattening_with_missingness(flat: &Flattening, depth: usize, ceg: &FailureCeg) -> Result<Flattening, MissingError> {
    Ok(flat.with_missing_indicators(depth, ceg)?)
}

/// Each B node against its non-descendants given the parents it was
/// declared with (Y at its floret and the `depth` preceding core variables);
/// returns the nodes where d-separation fails.
pub fn check_missing_indicators(flat: &Flattening, depth: usize, ceg: &FailureCeg) -> Result<Vec<String>, MissingError> {
    let mut bad = Vec::new();
    for (k, u) in flat.sequence.iter().enumerate() {
        let b = format!("B:{}", &u[2..]);
        if !flat.graph.contains(&b) {
            continue;
        }
        let mut pa: BTreeSet<String> = flat.sequence[k.saturating_sub(depth)..k].iter().cloned().collect();
        pa.insert(crate::hierarchy::floret_node(&ceg.node(flat.core[u].floret).name));
        let nd: BTreeSet<String> = flat.non_descendants(&b).difference(&pa).cloned().collect();
        if !flat.d_separated(&[b.clone()].into_iter().collect(), &nd, &pa)? {
            bad.push(b);
        }
    }
    Ok(bad)
}
