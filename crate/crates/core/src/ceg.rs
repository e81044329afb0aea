//! Chain event graphs with a fail sink and a not-fail sink.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tree::{stage_classes, LeafCategory, PositionPartition, StagedTree, TOL};

pub type PosIx = usize;
pub type EdgeIx = usize;

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

pub const SINK_FAIL_NAME: &str = "w_inf_f";
pub const SINK_NOFAIL_NAME: &str = "w_inf_n";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CegError {
    #[error("tree edges merged into one CEG edge disagree at `{vertex}` label `{label}`")]
    InconsistentMerge { vertex: String, label: String },
    #[error("path enumeration exceeded the cap of {cap}")]
    PathExplosion { cap: usize },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("conditioning event has probability zero")]
    ZeroConditioningSet,
    #[error("graph is not acyclic")]
    Cyclic,
    #[error("position `{0}` is not reachable from the root")]
    Unreachable(String),
    #[error("position `{0}` has no outgoing edges")]
    DeadEnd(String),
    #[error("florets at `{position}` do not sum to one (sum {sum})")]
    BadFloret { position: String, sum: f64 },
    #[error("probability {value} outside [0,1] at `{position}`")]
    BadProbability { position: String, value: f64 },
    #[error("position `{position}` repeats label `{label}`")]
    DuplicateLabel { position: String, label: String },
    #[error("unknown position `{0}`")]
    UnknownPosition(String),
    #[error("position `{position}` has no edge labelled `{label}`")]
    UnknownEdge { position: String, label: String },
    #[error("expected {expected} probabilities at `{position}`, got {got}")]
    ArityMismatch { position: String, expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Internal,
    SinkFail,
    SinkNotFail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CegNode {
    pub name: String,
    pub kind: NodeKind,
    /// Tree vertex names merged into this position.
    pub members: Vec<String>,
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CegEdge {
    pub src: PosIx,
    pub dst: PosIx,
    pub label: String,
    pub prob: f64,
}

/// Destination of an edge when assembling a CEG by hand.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Pos(PosIx),
    Fail,
    NotFail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureCeg {
    nodes: Vec<CegNode>,
    edges: Vec<CegEdge>,
    out: Vec<Vec<EdgeIx>>,
    inc: Vec<Vec<EdgeIx>>,
    topo: Vec<PosIx>,
}

/// Root-to-sink path as a sequence of edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CegPath {
    pub edges: Vec<EdgeIx>,
}

/// A set of paths: those passing any listed position or edge, or the
/// complement of that set when `negated`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathEvent {
    pub positions: BTreeSet<PosIx>,
    pub edges: BTreeSet<EdgeIx>,
    pub negated: bool,
}

impl PathEvent {
    pub fn through<I: IntoIterator<Item = PosIx>>(positions: I) -> Self {
        PathEvent { positions: positions.into_iter().collect(), ..Default::default() }
    }

    pub fn along<I: IntoIterator<Item = EdgeIx>>(edges: I) -> Self {
        PathEvent { edges: edges.into_iter().collect(), ..Default::default() }
    }

    /// The sure event.
    pub fn all() -> Self {
        PathEvent { negated: true, ..Default::default() }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn holds(&self, ceg: &FailureCeg, path: &CegPath) -> bool {
        let mut hit = false;
        if self.positions.contains(&ceg.root()) {
            hit = true;
        }
        for &e in &path.edges {
            if self.edges.contains(&e) || self.positions.contains(&ceg.edge(e).dst) {
                hit = true;
            }
        }
        hit != self.negated
    }
}

impl FailureCeg {
    /// Assembles a CEG from internal position names and edges. Position 0 is
    /// the root; the two sinks are appended after the internal positions.
    pub fn from_parts(names: Vec<String>, edges: Vec<(PosIx, Target, String, f64)>) -> Result<Self, CegError> {
        let n = names.len();
        let mut nodes: Vec<CegNode> = names
            .into_iter()
            .map(|name| CegNode { name, kind: NodeKind::Internal, members: Vec::new(), stage: None })
            .collect();
        nodes.push(CegNode {
            name: SINK_FAIL_NAME.into(),
            kind: NodeKind::SinkFail,
            members: Vec::new(),
            stage: None,
        });
        nodes.push(CegNode {
            name: SINK_NOFAIL_NAME.into(),
            kind: NodeKind::SinkNotFail,
            members: Vec::new(),
            stage: None,
        });
        let edges = edges
            .into_iter()
            .map(|(src, t, label, prob)| {
                let dst = match t {
                    Target::Pos(p) => p,
                    Target::Fail => n,
                    Target::NotFail => n + 1,
                };
                CegEdge { src, dst, label, prob }
            })
            .collect();
        let mut ceg = Self::assemble(nodes, edges)?;
        ceg.restage();
        Ok(ceg)
    }

    fn assemble(nodes: Vec<CegNode>, mut edges: Vec<CegEdge>) -> Result<Self, CegError> {
        let n = nodes.len();
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(CegError::UnknownPosition(format!("{}", e.src.max(e.dst))));
            }
        }
        // stable order: by source, then insertion order
        let mut idx: Vec<usize> = (0..edges.len()).collect();
        idx.sort_by_key(|&i| (edges[i].src, i));
        let mut sorted = Vec::with_capacity(edges.len());
        for i in idx {
            sorted.push(std::mem::replace(
                &mut edges[i],
                CegEdge { src: 0, dst: 0, label: String::new(), prob: 0.0 },
            ));
        }
        let edges = sorted;
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            out[e.src].push(i);
            inc[e.dst].push(i);
        }
        let mut ceg = FailureCeg { nodes, edges, out, inc, topo: Vec::new() };
        ceg.topo = ceg.topological()?;
        ceg.check()?;
        Ok(ceg)
    }

    fn topological(&self) -> Result<Vec<PosIx>, CegError> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.inc.iter().map(|v| v.len()).collect();
        let mut q: VecDeque<PosIx> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = q.pop_front() {
            order.push(v);
            for &e in &self.out[v] {
                let d = self.edges[e].dst;
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    q.push_back(d);
                }
            }
        }
        if order.len() != n {
            return Err(CegError::Cyclic);
        }
        Ok(order)
    }

    fn check(&self) -> Result<(), CegError> {
        let reach = self.descendants(self.root());
        for (v, node) in self.nodes.iter().enumerate() {
            if node.kind != NodeKind::Internal {
                continue;
            }
            if !reach[v] {
                return Err(CegError::Unreachable(node.name.clone()));
            }
            if self.out[v].is_empty() {
                return Err(CegError::DeadEnd(node.name.clone()));
            }
            let mut labels = BTreeSet::new();
            let mut sum = 0.0;
            for &e in &self.out[v] {
                let edge = &self.edges[e];
                if !labels.insert(edge.label.as_str()) {
                    return Err(CegError::DuplicateLabel { position: node.name.clone(), label: edge.label.clone() });
                }
                if !(0.0..=1.0).contains(&edge.prob) || !edge.prob.is_finite() {
                    return Err(CegError::BadProbability { position: node.name.clone(), value: edge.prob });
                }
                sum += edge.prob;
            }
            if (sum - 1.0).abs() > TOL {
                return Err(CegError::BadFloret { position: node.name.clone(), sum });
            }
        }
        Ok(())
    }

    /// Recomputes stage colours from the current floret vectors.
    pub fn restage(&mut self) {
        let vecs: Vec<Vec<f64>> = (0..self.nodes.len()).map(|v| self.floret_probs(v)).collect();
        let opt: Vec<Option<&[f64]>> = (0..self.nodes.len())
            .map(|v| if self.is_sink(v) { None } else { Some(vecs[v].as_slice()) })
            .collect();
        let classes = stage_classes(&opt);
        for (v, c) in classes.into_iter().enumerate() {
            self.nodes[v].stage = c;
        }
    }

    pub fn root(&self) -> PosIx {
        0
    }

    pub fn sink_fail(&self) -> PosIx {
        self.nodes.len() - 2
    }

    pub fn sink_nofail(&self) -> PosIx {
        self.nodes.len() - 1
    }

    pub fn is_sink(&self, v: PosIx) -> bool {
        self.nodes[v].kind != NodeKind::Internal
    }

    pub fn num_positions(&self) -> usize {
        self.nodes.len()
    }

    /// Number of non-sink positions.
    pub fn num_internal(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn node(&self, v: PosIx) -> &CegNode {
        &self.nodes[v]
    }

    pub fn nodes(&self) -> &[CegNode] {
        &self.nodes
    }

    pub fn edge(&self, e: EdgeIx) -> &CegEdge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[CegEdge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn out_edges(&self, v: PosIx) -> &[EdgeIx] {
        &self.out[v]
    }

    pub fn in_edges(&self, v: PosIx) -> &[EdgeIx] {
        &self.inc[v]
    }

    pub fn topo_order(&self) -> &[PosIx] {
        &self.topo
    }

    pub fn stage_of(&self, v: PosIx) -> Option<usize> {
        self.nodes[v].stage
    }

    /// Stages as sorted lists of positions.
    pub fn stages(&self) -> Vec<Vec<PosIx>> {
        let mut map: BTreeMap<usize, Vec<PosIx>> = BTreeMap::new();
        for (v, n) in self.nodes.iter().enumerate() {
            if let Some(s) = n.stage {
                map.entry(s).or_default().push(v);
            }
        }
        map.into_values().collect()
    }

    pub fn floret_probs(&self, v: PosIx) -> Vec<f64> {
        self.out[v].iter().map(|&e| self.edges[e].prob).collect()
    }

    pub fn parents(&self, v: PosIx) -> BTreeSet<PosIx> {
        self.inc[v].iter().map(|&e| self.edges[e].src).collect()
    }

    pub fn children(&self, v: PosIx) -> BTreeSet<PosIx> {
        self.out[v].iter().map(|&e| self.edges[e].dst).collect()
    }

    /// Resolves a position by its name or by any merged tree vertex name.
    pub fn resolve(&self, name: &str) -> Result<PosIx, CegError> {
        if let Some(i) = self.nodes.iter().position(|n| n.name == name) {
            return Ok(i);
        }
        match name {
            "fail" | "w_inf^f" => return Ok(self.sink_fail()),
            "not fail" | "w_inf^n" => return Ok(self.sink_nofail()),
            _ => {}
        }
        self.nodes
            .iter()
            .position(|n| n.members.iter().any(|m| m == name))
            .ok_or_else(|| CegError::UnknownPosition(name.to_string()))
    }

    pub fn edge_by_label(&self, v: PosIx, label: &str) -> Result<EdgeIx, CegError> {
        self.out[v]
            .iter()
            .copied()
            .find(|&e| self.edges[e].label == label)
            .ok_or_else(|| CegError::UnknownEdge { position: self.nodes[v].name.clone(), label: label.into() })
    }

    /// Follows edge labels from the root.
    pub fn follow(&self, labels: &[&str]) -> Result<PosIx, CegError> {
        let mut cur = self.root();
        for l in labels {
            cur = self.edges[self.edge_by_label(cur, l)?].dst;
        }
        Ok(cur)
    }

    /// All edges whose label equals `label`: the edge set of a d-event.
    pub fn edges_labelled(&self, label: &str) -> Vec<EdgeIx> {
        (0..self.edges.len()).filter(|&e| self.edges[e].label == label).collect()
    }

    /// Receiving positions of the edges carrying `label`.
    pub fn receiving(&self, label: &str) -> BTreeSet<PosIx> {
        self.edges_labelled(label).into_iter().map(|e| self.edges[e].dst).collect()
    }

    /// `out[v]` is true iff `v` is reachable from `from` (including `from`).
    pub fn descendants(&self, from: PosIx) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.out[v] {
                let d = self.edges[e].dst;
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        seen
    }

    /// `out[v]` is true iff `to` is reachable from `v` (including `to`).
    pub fn ancestors(&self, to: PosIx) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![to];
        seen[to] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.inc[v] {
                let s = self.edges[e].src;
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// Copy with replaced floret vectors; stages are recomputed.
    pub fn with_florets(&self, florets: &BTreeMap<PosIx, Vec<f64>>) -> Result<FailureCeg, CegError> {
        let mut edges = self.edges.clone();
        for (&v, probs) in florets {
            if v >= self.nodes.len() {
                return Err(CegError::UnknownPosition(v.to_string()));
            }
            if probs.len() != self.out[v].len() {
                return Err(CegError::ArityMismatch {
                    position: self.nodes[v].name.clone(),
                    expected: self.out[v].len(),
                    got: probs.len(),
                });
            }
            for (&e, &p) in self.out[v].iter().zip(probs) {
                edges[e].prob = p;
            }
        }
        let mut ceg = FailureCeg::assemble(self.nodes.clone(), edges)?;
        ceg.restage();
        Ok(ceg)
    }

    /// Hex SHA-256 over names, kinds and edge endpoints/labels.
    pub fn topology_fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.nodes {
            h.update(n.name.as_bytes());
            h.update([0u8, n.kind as u8]);
        }
        for e in &self.edges {
            h.update(e.src.to_le_bytes());
            h.update(e.dst.to_le_bytes());
            h.update(e.label.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Depth-first enumeration, children visited in label order.
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<CegPath>, CegError> {
        let mut out = Vec::new();
        let sorted: Vec<Vec<EdgeIx>> = (0..self.nodes.len())
            .map(|v| {
                let mut es = self.out[v].clone();
                es.sort_by(|&a, &b| self.edges[a].label.cmp(&self.edges[b].label).then(a.cmp(&b)));
                es
            })
            .collect();
        let mut stack: Vec<(PosIx, usize)> = vec![(self.root(), 0)];
        let mut current: Vec<EdgeIx> = Vec::new();
        while let Some((v, i)) = stack.pop() {
            if self.is_sink(v) {
                out.push(CegPath { edges: current.clone() });
                if out.len() > cap {
                    return Err(CegError::PathExplosion { cap });
                }
                current.pop();
                continue;
            }
            if i < sorted[v].len() {
                stack.push((v, i + 1));
                let e = sorted[v][i];
                current.push(e);
                stack.push((self.edges[e].dst, 0));
            } else {
                current.pop();
            }
        }
        Ok(out)
    }

    pub fn validate_path(&self, path: &CegPath) -> Result<(), CegError> {
        let mut cur = self.root();
        for &e in &path.edges {
            if e >= self.edges.len() {
                return Err(CegError::InvalidPath(format!("edge {e} out of range")));
            }
            if self.edges[e].src != cur {
                return Err(CegError::InvalidPath(format!(
                    "edge `{}` does not leave `{}`",
                    self.edges[e].label, self.nodes[cur].name
                )));
            }
            cur = self.edges[e].dst;
        }
        if !self.is_sink(cur) {
            return Err(CegError::InvalidPath(format!("path stops at `{}`", self.nodes[cur].name)));
        }
        Ok(())
    }

    pub fn path_probability(&self, path: &CegPath) -> Result<f64, CegError> {
        self.validate_path(path)?;
        Ok(path.edges.iter().map(|&e| self.edges[e].prob).product())
    }

    /// Positions visited by a path, root first.
    pub fn path_positions(&self, path: &CegPath) -> Vec<PosIx> {
        let mut v = vec![self.root()];
        v.extend(path.edges.iter().map(|&e| self.edges[e].dst));
        v
    }

    pub fn path_labels(&self, path: &CegPath) -> Vec<String> {
        path.edges.iter().map(|&e| self.edges[e].label.clone()).collect()
    }

    /// Probability that every event holds, by forward message passing over
    /// the product of the graph with one flag per event.
    pub fn prob_all(&self, events: &[&PathEvent]) -> f64 {
        let k = events.len();
        assert!(k <= 16, "too many simultaneous events");
        let width = 1usize << k;
        let pos_bits = |v: PosIx| -> usize {
            events.iter().enumerate().filter(|(_, ev)| ev.positions.contains(&v)).fold(0, |m, (i, _)| m | (1 << i))
        };
        let edge_bits = |e: EdgeIx| -> usize {
            events.iter().enumerate().filter(|(_, ev)| ev.edges.contains(&e)).fold(0, |m, (i, _)| m | (1 << i))
        };
        let mut mass = vec![vec![0.0f64; width]; self.nodes.len()];
        mass[self.root()][pos_bits(self.root())] = 1.0;
        let mut total = 0.0;
        let accept = events.iter().enumerate().fold((0usize, 0usize), |(need, neg), (i, ev)| {
            if ev.negated {
                (need, neg | (1 << i))
            } else {
                (need | (1 << i), neg)
            }
        });
        for &v in &self.topo {
            if self.is_sink(v) {
                for (m, &p) in mass[v].iter().enumerate() {
                    if m & accept.0 == accept.0 && m & accept.1 == 0 {
                        total += p;
                    }
                }
                continue;
            }
            for &e in &self.out[v] {
                let d = self.edges[e].dst;
                let add = edge_bits(e) | pos_bits(d);
                let prob = self.edges[e].prob;
                for m in 0..width {
                    let p = mass[v][m];
                    if p != 0.0 {
                        mass[d][m | add] += p * prob;
                    }
                }
            }
        }
        total
    }

    pub fn event_prob(&self, event: &PathEvent) -> f64 {
        self.prob_all(&[event])
    }

    /// π(Λ_w) by forward message passing.
    pub fn event_probability(&self, w: PosIx) -> f64 {
        let mut mass = vec![0.0; self.nodes.len()];
        mass[self.root()] = 1.0;
        for &v in &self.topo {
            for &e in &self.out[v] {
                mass[self.edges[e].dst] += mass[v] * self.edges[e].prob;
            }
        }
        mass[w]
    }

    /// π(target ∩ given) / π(given).
    pub fn conditional_path_probability(&self, target: &PathEvent, given: &PathEvent) -> Result<f64, CegError> {
        self.conditional(&[target], &[given])
    }

    /// π(∩ targets ∩ givens) / π(∩ givens).
    pub fn conditional(&self, targets: &[&PathEvent], givens: &[&PathEvent]) -> Result<f64, CegError> {
        let den = self.prob_all(givens);
        if den <= 0.0 {
            return Err(CegError::ZeroConditioningSet);
        }
        let all: Vec<&PathEvent> = targets.iter().chain(givens.iter()).copied().collect();
        Ok(self.prob_all(&all) / den)
    }

    /// Floret variable Y(w) as the edge taken out of `w` (None for 0) and the
    /// incident bit I(w).
    pub fn eval_floret_and_incident(&self, path: &CegPath, w: PosIx) -> (Option<EdgeIx>, bool) {
        let y = path.edges.iter().copied().find(|&e| self.edges[e].src == w);
        let i = w == self.root() || path.edges.iter().any(|&e| self.edges[e].dst == w);
        (y, i)
    }
}

/// One CEG position per position class; leaves collapse into the sinks.
pub fn build_ceg(stree: &StagedTree, positions: &PositionPartition) -> Result<FailureCeg, CegError> {
    let tree = stree.tree();
    let ptree = stree.ptree();
    let n = tree.num_vertices();
    let rep_of = |v: usize| positions.position_of(v);
    // classes reached breadth-first through representative florets
    let mut index_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    let mut q = VecDeque::new();
    let root_rep = rep_of(tree.root());
    index_of.insert(root_rep, 0);
    order.push(root_rep);
    q.push_back(root_rep);
    while let Some(r) = q.pop_front() {
        for c in tree.child_vertices(r) {
            if tree.is_leaf(c) {
                continue;
            }
            let cr = rep_of(c);
            if let std::collections::btree_map::Entry::Vacant(slot) = index_of.entry(cr) {
                slot.insert(order.len());
                order.push(cr);
                q.push_back(cr);
            }
        }
    }
    let internal = order.len();
    let sink_of = |v: usize| -> usize {
        if tree.category(v) == LeafCategory::Fail {
            internal
        } else {
            internal + 1
        }
    };
    let target = |v: usize| -> usize {
        if tree.is_leaf(v) {
            sink_of(v)
        } else {
            index_of[&rep_of(v)]
        }
    };

    let mut members: Vec<Vec<String>> = vec![Vec::new(); internal + 2];
    for v in 0..n {
        if tree.is_leaf(v) {
            members[sink_of(v)].push(tree.name(v).to_string());
        } else if let Some(&i) = index_of.get(&rep_of(v)) {
            members[i].push(tree.name(v).to_string());
        }
    }

    // Definition-1 consistency across every member of a class
    for v in 0..n {
        if tree.is_leaf(v) {
            continue;
        }
        let r = rep_of(v);
        for (&e, &p) in tree.out_edges(v).iter().zip(ptree.theta(v)) {
            let label = &tree.edge(e).label;
            let re = tree.out_edges(r).iter().position(|&f| &tree.edge(f).label == label);
            let ok = match re {
                Some(k) => {
                    let f = tree.out_edges(r)[k];
                    (ptree.theta(r)[k] - p).abs() <= TOL && target(tree.edge(f).child) == target(tree.edge(e).child)
                }
                None => false,
            };
            if !ok {
                return Err(CegError::InconsistentMerge { vertex: tree.name(v).to_string(), label: label.clone() });
            }
        }
    }

    let mut nodes = Vec::with_capacity(internal + 2);
    for (i, &r) in order.iter().enumerate() {
        nodes.push(CegNode {
            name: format!("w{i}"),
            kind: NodeKind::Internal,
            members: std::mem::take(&mut members[i]),
            stage: stree.stage_of(r),
        });
    }
    nodes.push(CegNode {
        name: SINK_FAIL_NAME.into(),
        kind: NodeKind::SinkFail,
        members: std::mem::take(&mut members[internal]),
        stage: None,
    });
    nodes.push(CegNode {
        name: SINK_NOFAIL_NAME.into(),
        kind: NodeKind::SinkNotFail,
        members: std::mem::take(&mut members[internal + 1]),
        stage: None,
    });
    // tree stage ids -> smallest CEG index sharing them
    let mut stage_min: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, node) in nodes.iter().enumerate() {
        if let Some(s) = node.stage {
            stage_min.entry(s).or_insert(i);
        }
    }
    for node in nodes.iter_mut() {
        node.stage = node.stage.map(|s| stage_min[&s]);
    }

    let mut edges = Vec::new();
    for (i, &r) in order.iter().enumerate() {
        for (&e, &p) in tree.out_edges(r).iter().zip(ptree.theta(r)) {
            edges.push(CegEdge { src: i, dst: target(tree.edge(e).child), label: tree.edge(e).label.clone(), prob: p });
        }
    }
    FailureCeg::assemble(nodes, edges)
}

/// Stages, positions and CEG in one call.
pub fn ceg_from_ptree(ptree: &crate::tree::ProbabilityTree) -> Result<FailureCeg, CegError> {
    let st = crate::tree::compute_stages(ptree);
    let pos = crate::tree::compute_positions(&st);
    build_ceg(&st, &pos)
}
