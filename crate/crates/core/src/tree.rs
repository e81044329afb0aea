//! Event trees, probability trees, stage and position partitions.
//!
//! Vertices are renumbered breadth-first from the root at construction so
//! that every identifier derived from a tree is stable across runs.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Absolute tolerance used for every probability comparison.
pub const TOL: f64 = 1e-9;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("vertex `{0}` has more than one floret")]
    DuplicateFloret(String),
    #[error("vertex `{0}` has more than one incoming edge")]
    MultipleParents(String),
    #[error("root `{0}` has an incoming edge")]
    RootHasParent(String),
    #[error("vertex `{0}` is not reachable from the root")]
    Unreachable(String),
    #[error("floret of `{vertex}` repeats edge label `{label}`")]
    DuplicateLabel { vertex: String, label: String },
    #[error("floret of `{0}` has no edges")]
    EmptyFloret(String),
    #[error("vertex `{vertex}` expects {expected} probabilities, got {got}")]
    ArityMismatch { vertex: String, expected: usize, got: usize },
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
}

/// Terminal category carried by a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeafCategory {
    Fail,
    NotFail,
    Plain,
}

impl LeafCategory {
    pub fn parse(s: &str) -> LeafCategory {
        match s.trim().to_ascii_lowercase().as_str() {
            "fail" | "failure" => LeafCategory::Fail,
            "not fail" | "not-fail" | "notfail" | "nofail" | "not_fail" => LeafCategory::NotFail,
            _ => LeafCategory::Plain,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LeafCategory::Fail => "fail",
            LeafCategory::NotFail => "not fail",
            LeafCategory::Plain => "sink",
        }
    }
}

impl fmt::Display for LeafCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeEdge {
    pub parent: VertexId,
    pub child: VertexId,
    pub label: String,
}

/// Input description of one floret: a vertex and its labelled children.
#[derive(Debug, Clone, PartialEq)]
pub struct FloretSpec {
    pub vertex: String,
    pub edges: Vec<(String, String)>,
}

impl FloretSpec {
    pub fn new(vertex: &str, edges: &[(&str, &str)]) -> Self {
        FloretSpec {
            vertex: vertex.to_string(),
            edges: edges.iter().map(|(l, c)| (l.to_string(), c.to_string())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    names: Vec<String>,
    children: Vec<Vec<EdgeId>>,
    edges: Vec<TreeEdge>,
    parent_edge: Vec<Option<EdgeId>>,
    category: Vec<LeafCategory>,
    depth: Vec<usize>,
}

impl EventTree {
    /// Builds a tree from florets. Leaves not named in `categories` are plain.
    pub fn new(
        root: &str,
        florets: &[FloretSpec],
        categories: &BTreeMap<String, LeafCategory>,
    ) -> Result<EventTree, TreeError> {
        let mut by_vertex: HashMap<&str, &FloretSpec> = HashMap::new();
        let mut parent_of: HashMap<&str, &str> = HashMap::new();
        for f in florets {
            if by_vertex.insert(f.vertex.as_str(), f).is_some() {
                return Err(TreeError::DuplicateFloret(f.vertex.clone()));
            }
            if f.edges.is_empty() {
                return Err(TreeError::EmptyFloret(f.vertex.clone()));
            }
            let mut seen = std::collections::HashSet::new();
            for (label, child) in &f.edges {
                if !seen.insert(label.as_str()) {
                    return Err(TreeError::DuplicateLabel {
                        vertex: f.vertex.clone(),
                        label: label.clone(),
                    });
                }
                if child == root {
                    return Err(TreeError::RootHasParent(root.to_string()));
                }
                if parent_of.insert(child.as_str(), f.vertex.as_str()).is_some() {
                    return Err(TreeError::MultipleParents(child.clone()));
                }
            }
        }

        let mut tree = EventTree {
            names: Vec::new(),
            children: Vec::new(),
            edges: Vec::new(),
            parent_edge: Vec::new(),
            category: Vec::new(),
            depth: Vec::new(),
        };
        let mut queue: VecDeque<(String, Option<EdgeId>, usize)> = VecDeque::new();
        queue.push_back((root.to_string(), None, 0));
        while let Some((name, pe, depth)) = queue.pop_front() {
            let id = tree.names.len();
            if let Some(e) = pe {
                tree.edges[e].child = id;
            }
            tree.names.push(name.clone());
            tree.parent_edge.push(pe);
            tree.children.push(Vec::new());
            tree.depth.push(depth);
            match by_vertex.get(name.as_str()) {
                Some(f) => {
                    tree.category.push(LeafCategory::Plain);
                    for (label, child) in &f.edges {
                        let e = tree.edges.len();
                        tree.edges.push(TreeEdge {
                            parent: id,
                            child: usize::MAX,
                            label: label.clone(),
                        });
                        tree.children[id].push(e);
                        queue.push_back((child.clone(), Some(e), depth + 1));
                    }
                }
                None => {
                    let cat = categories.get(&name).copied().unwrap_or(LeafCategory::Plain);
                    tree.category.push(cat);
                }
            }
        }
        let known: std::collections::HashSet<&String> = tree.names.iter().collect();
        for f in florets {
            if !known.contains(&f.vertex) {
                return Err(TreeError::Unreachable(f.vertex.clone()));
            }
        }
        Ok(tree)
    }

    pub fn root(&self) -> VertexId {
        0
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn name(&self, v: VertexId) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex(&self, name: &str) -> Option<VertexId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edge(&self, e: EdgeId) -> &TreeEdge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Outgoing edges of `v`, in floret order.
    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.children[v]
    }

    pub fn child_vertices(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.children[v].iter().map(move |&e| self.edges[e].child)
    }

    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        self.parent_edge[v]
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent_edge[v].map(|e| self.edges[e].parent)
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.children[v].is_empty()
    }

    pub fn category(&self, v: VertexId) -> LeafCategory {
        self.category[v]
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v]
    }

    pub fn leaves(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.names.len()).filter(move |&v| self.is_leaf(v))
    }

    /// Edge labels from the root down to `v`.
    pub fn label_path(&self, v: VertexId) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = v;
        while let Some(e) = self.parent_edge[cur] {
            out.push(self.edges[e].label.as_str());
            cur = self.edges[e].parent;
        }
        out.reverse();
        out
    }

    /// Follows a sequence of edge labels from the root.
    pub fn follow(&self, labels: &[&str]) -> Option<VertexId> {
        let mut cur = self.root();
        for l in labels {
            let e = self.children[cur].iter().find(|&&e| self.edges[e].label == *l)?;
            cur = self.edges[*e].child;
        }
        Some(cur)
    }

    /// Florets in input form, one per internal vertex in vertex order.
    pub fn floret_specs(&self) -> Vec<FloretSpec> {
        (0..self.num_vertices())
            .filter(|&v| !self.is_leaf(v))
            .map(|v| FloretSpec {
                vertex: self.names[v].clone(),
                edges: self.children[v]
                    .iter()
                    .map(|&e| (self.edges[e].label.clone(), self.names[self.edges[e].child].clone()))
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTree {
    tree: EventTree,
    theta: Vec<Vec<f64>>,
}

impl ProbabilityTree {
    /// `theta[v]` is aligned with `tree.out_edges(v)`; leaves take an empty vector.
    pub fn new(tree: EventTree, theta: Vec<Vec<f64>>) -> Result<Self, TreeError> {
        if theta.len() != tree.num_vertices() {
            return Err(TreeError::ArityMismatch {
                vertex: "<tree>".into(),
                expected: tree.num_vertices(),
                got: theta.len(),
            });
        }
        for (v, t) in theta.iter().enumerate() {
            if t.len() != tree.out_edges(v).len() {
                return Err(TreeError::ArityMismatch {
                    vertex: tree.name(v).to_string(),
                    expected: tree.out_edges(v).len(),
                    got: t.len(),
                });
            }
        }
        Ok(ProbabilityTree { tree, theta })
    }

    /// Same as [`ProbabilityTree::new`] with vectors keyed by vertex name.
    pub fn from_named(tree: EventTree, named: &BTreeMap<String, Vec<f64>>) -> Result<Self, TreeError> {
        for k in named.keys() {
            if tree.vertex(k).is_none() {
                return Err(TreeError::UnknownVertex(k.clone()));
            }
        }
        let theta = (0..tree.num_vertices())
            .map(|v| named.get(tree.name(v)).cloned().unwrap_or_default())
            .collect();
        ProbabilityTree::new(tree, theta)
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn theta(&self, v: VertexId) -> &[f64] {
        &self.theta[v]
    }

    pub fn edge_prob(&self, e: EdgeId) -> f64 {
        let parent = self.tree.edge(e).parent;
        let k = self.tree.out_edges(parent).iter().position(|&x| x == e).expect("edge in floret");
        self.theta[parent][k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    SumNotOne { sum: f64 },
    OutsideOpenUnit { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub vertex: VertexId,
    pub name: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every floret sums to one and every component lies in (0,1).
pub fn validate_probability_tree(ptree: &ProbabilityTree) -> ValidationReport {
    validate_with(ptree, |_| false)
}

/// Like [`validate_probability_tree`] but florets for which `closed` returns
/// true may carry components equal to 0 or 1.
pub fn validate_with(ptree: &ProbabilityTree, closed: impl Fn(VertexId) -> bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    let tree = ptree.tree();
    for v in 0..tree.num_vertices() {
        if tree.is_leaf(v) {
            continue;
        }
        let t = ptree.theta(v);
        let sum: f64 = t.iter().sum();
        if (sum - 1.0).abs() > TOL {
            report.violations.push(Violation {
                vertex: v,
                name: tree.name(v).to_string(),
                kind: ViolationKind::SumNotOne { sum },
            });
        }
        let allow_closed = closed(v);
        for (i, &p) in t.iter().enumerate() {
            let bad = if allow_closed {
                !(0.0..=1.0).contains(&p)
            } else {
                !(p > 0.0 && p < 1.0)
            };
            if bad || !p.is_finite() {
                report.violations.push(Violation {
                    vertex: v,
                    name: tree.name(v).to_string(),
                    kind: ViolationKind::OutsideOpenUnit { index: i, value: p },
                });
            }
        }
    }
    report
}

/// Sorted copy of a probability vector, used for permutation-blind comparison.
pub fn sorted_vector(t: &[f64]) -> Vec<f64> {
    let mut s = t.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s
}

pub fn vectors_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOL)
}

/// True iff `a` equals `b` up to a permutation of components.
pub fn same_up_to_permutation(a: &[f64], b: &[f64]) -> bool {
    vectors_close(&sorted_vector(a), &sorted_vector(b))
}

/// Permutation `p` with `a[i] ≈ b[p[i]]`, if one exists.
pub fn matching_permutation(a: &[f64], b: &[f64]) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    let mut used = vec![false; b.len()];
    let mut perm = Vec::with_capacity(a.len());
    for &x in a {
        let j = (0..b.len()).find(|&j| !used[j] && (b[j] - x).abs() <= TOL)?;
        used[j] = true;
        perm.push(j);
    }
    Some(perm)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let n = self.parent[c];
            self.parent[c] = r;
            c = n;
        }
        r
    }

    /// Union keeping the smaller index as representative.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups items whose vectors agree up to permutation. Returns, for each
/// item with `Some` vector, the smallest index in its class.
pub(crate) fn stage_classes(vectors: &[Option<&[f64]>]) -> Vec<Option<usize>> {
    let n = vectors.len();
    let sorted: Vec<Option<Vec<f64>>> = vectors.iter().map(|v| v.map(sorted_vector)).collect();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        let Some(a) = &sorted[i] else { continue };
        for (j, b) in sorted.iter().enumerate().skip(i + 1) {
            if b.as_ref().is_some_and(|b| vectors_close(a, b)) {
                uf.union(i, j);
            }
        }
    }
    (0..n).map(|i| sorted[i].as_ref().map(|_| uf.find(i))).collect()
}

pub type StageId = usize;
pub type PositionId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct StagedTree {
    ptree: ProbabilityTree,
    stage_of: Vec<Option<StageId>>,
}

impl StagedTree {
    pub fn ptree(&self) -> &ProbabilityTree {
        &self.ptree
    }

    pub fn tree(&self) -> &EventTree {
        self.ptree.tree()
    }

    /// Stage of an internal vertex; leaves carry no floret and no stage.
    pub fn stage_of(&self, v: VertexId) -> Option<StageId> {
        self.stage_of[v]
    }

    /// Stages as sorted member lists, ordered by stage id.
    pub fn stages(&self) -> Vec<Vec<VertexId>> {
        let mut map: BTreeMap<StageId, Vec<VertexId>> = BTreeMap::new();
        for (v, s) in self.stage_of.iter().enumerate() {
            if let Some(s) = s {
                map.entry(*s).or_default().push(v);
            }
        }
        map.into_values().collect()
    }

    /// Permutation aligning the floret of `v` with that of `w` when they share a stage.
    pub fn stage_permutation(&self, v: VertexId, w: VertexId) -> Option<Vec<usize>> {
        if self.stage_of[v].is_none() || self.stage_of[v] != self.stage_of[w] {
            return None;
        }
        matching_permutation(self.ptree.theta(v), self.ptree.theta(w))
    }
}

/// Stage partition as the equivalence closure of permutation-equality.
pub fn compute_stages(ptree: &ProbabilityTree) -> StagedTree {
    let tree = ptree.tree();
    let vecs: Vec<Option<&[f64]>> = (0..tree.num_vertices())
        .map(|v| if tree.is_leaf(v) { None } else { Some(ptree.theta(v)) })
        .collect();
    StagedTree { ptree: ptree.clone(), stage_of: stage_classes(&vecs) }
}

/// Builds a staged tree with an explicitly given stage partition. Each group
/// must list internal vertices with permutation-equal florets.
pub fn with_stages(ptree: &ProbabilityTree, groups: &[Vec<VertexId>]) -> Result<StagedTree, TreeError> {
    let tree = ptree.tree();
    let mut stage_of: Vec<Option<StageId>> =
        (0..tree.num_vertices()).map(|v| if tree.is_leaf(v) { None } else { Some(v) }).collect();
    for g in groups {
        let Some(&min) = g.iter().min() else { continue };
        for &v in g {
            if tree.is_leaf(v) || !same_up_to_permutation(ptree.theta(v), ptree.theta(min)) {
                return Err(TreeError::ArityMismatch {
                    vertex: tree.name(v).to_string(),
                    expected: ptree.theta(min).len(),
                    got: ptree.theta(v).len(),
                });
            }
            stage_of[v] = Some(min);
        }
    }
    Ok(StagedTree { ptree: ptree.clone(), stage_of })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionPartition {
    position_of: Vec<PositionId>,
}

impl PositionPartition {
    pub fn position_of(&self, v: VertexId) -> PositionId {
        self.position_of[v]
    }

    pub fn as_slice(&self) -> &[PositionId] {
        &self.position_of
    }

    pub fn classes(&self) -> Vec<Vec<VertexId>> {
        let mut map: BTreeMap<PositionId, Vec<VertexId>> = BTreeMap::new();
        for (v, &p) in self.position_of.iter().enumerate() {
            map.entry(p).or_default().push(v);
        }
        map.into_values().collect()
    }
}

/// Bottom-up refinement: leaves grouped by category, internal vertices merged
/// when they share a stage and the same (label, probability, child position)
/// triples.
pub fn compute_positions(stree: &StagedTree) -> PositionPartition {
    let tree = stree.tree();
    let n = tree.num_vertices();
    let mut pos = vec![usize::MAX; n];
    let mut leaf_rep: BTreeMap<LeafCategory, VertexId> = BTreeMap::new();
    for v in tree.leaves() {
        let rep = *leaf_rep.entry(tree.category(v)).or_insert(v);
        pos[v] = rep;
    }
    // Process deeper vertices first so that children are classified.
    let mut order: Vec<VertexId> = (0..n).filter(|&v| !tree.is_leaf(v)).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(tree.depth(v)), v));
    type Key = (StageId, Vec<(String, PositionId)>);
    let mut reps: HashMap<Key, Vec<VertexId>> = HashMap::new();
    let mut assigned: Vec<(VertexId, VertexId)> = Vec::new();
    for v in order {
        let mut triples: Vec<(String, PositionId, f64)> = tree
            .out_edges(v)
            .iter()
            .zip(stree.ptree().theta(v))
            .map(|(&e, &p)| (tree.edge(e).label.clone(), pos[tree.edge(e).child], p))
            .collect();
        triples.sort_by(|a, b| a.0.cmp(&b.0));
        let key: Key = (
            stree.stage_of(v).unwrap_or(v),
            triples.iter().map(|(l, c, _)| (l.clone(), *c)).collect(),
        );
        let probs: Vec<f64> = triples.iter().map(|t| t.2).collect();
        let list = reps.entry(key).or_default();
        let found = list.iter().copied().find(|&r| {
            let mut rt: Vec<(&str, f64)> = tree
                .out_edges(r)
                .iter()
                .zip(stree.ptree().theta(r))
                .map(|(&e, &p)| (tree.edge(e).label.as_str(), p))
                .collect();
            rt.sort_by(|a, b| a.0.cmp(b.0));
            rt.iter().zip(&probs).all(|(a, b)| (a.1 - b).abs() <= TOL)
        });
        match found {
            Some(r) => assigned.push((v, r)),
            None => {
                list.push(v);
                assigned.push((v, v));
            }
        }
        let r = assigned.last().unwrap().1;
        pos[v] = r;
    }
    // Canonical id: smallest member vertex.
    let mut min_of: HashMap<VertexId, VertexId> = HashMap::new();
    for (v, &p) in pos.iter().enumerate() {
        let e = min_of.entry(p).or_insert(v);
        if v < *e {
            *e = v;
        }
    }
    PositionPartition { position_of: pos.iter().map(|p| min_of[p]).collect() }
}

/// Direct recursive isomorphism test on edge-labelled subtrees.
pub fn subtree_isomorphic(stree: &StagedTree, v: VertexId, w: VertexId) -> bool {
    let tree = stree.tree();
    if v == w {
        return true;
    }
    match (tree.is_leaf(v), tree.is_leaf(w)) {
        (true, true) => return tree.category(v) == tree.category(w),
        (false, false) => {}
        _ => return false,
    }
    let ev = tree.out_edges(v);
    let ew = tree.out_edges(w);
    if ev.len() != ew.len() {
        return false;
    }
    let tv = stree.ptree().theta(v);
    let tw = stree.ptree().theta(w);
    for (i, &e) in ev.iter().enumerate() {
        let label = &tree.edge(e).label;
        let Some(j) = ew.iter().position(|&f| &tree.edge(f).label == label) else {
            return false;
        };
        if (tv[i] - tw[j]).abs() > TOL {
            return false;
        }
        if !subtree_isomorphic(stree, tree.edge(e).child, tree.edge(ew[j]).child) {
            return false;
        }
    }
    true
}
