//! Core event variables, edge constraints, constrained structure search and
//! the document-to-subgraph map.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{sigma, Document, Omega, OrderedEvents};
use crate::graph::Digraph;

pub type VarId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnError {
    #[error("events not mapped to any variable: {0:?}")]
    UnmappedEvent(Vec<String>),
    #[error("conflicting constraints on {0} -> {1}")]
    ConflictingConstraints(String, String),
    #[error("score undefined: {0}")]
    ScoreFailure(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` needs at least two distinct states")]
    BadStates(String),
    #[error("edges contain a cycle through `{0}`")]
    Cyclic(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoreEventVariable {
    pub name: String,
    pub states: Vec<String>,
}

impl CoreEventVariable {
    pub fn new(name: &str, states: &[&str]) -> Self {
        CoreEventVariable { name: name.into(), states: states.iter().map(|s| s.to_string()).collect() }
    }

    pub fn binary(name: &str) -> Self {
        Self::new(name, &["no", "yes"])
    }

    pub fn state(&self, s: &str) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }
}

/// DAG over core event variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalNet {
    variables: Vec<CoreEventVariable>,
    edges: BTreeSet<(VarId, VarId)>,
}

fn has_cycle(n: usize, edges: &BTreeSet<(VarId, VarId)>) -> Option<VarId> {
    let mut indeg = vec![0usize; n];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    if seen == n {
        None
    } else {
        (0..n).find(|&i| indeg[i] > 0)
    }
}

impl GlobalNet {
    pub fn new(variables: Vec<CoreEventVariable>, edges: BTreeSet<(VarId, VarId)>) -> Result<Self, GnError> {
        let mut names = BTreeSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(GnError::DuplicateVariable(v.name.clone()));
            }
            let distinct: BTreeSet<&String> = v.states.iter().collect();
            if v.states.len() < 2 || distinct.len() != v.states.len() {
                return Err(GnError::BadStates(v.name.clone()));
            }
        }
        for &(a, b) in &edges {
            if a >= variables.len() || b >= variables.len() {
                return Err(GnError::UnknownVariable(format!("#{}", a.max(b))));
            }
        }
        if let Some(v) = has_cycle(variables.len(), &edges) {
            return Err(GnError::Cyclic(variables[v].name.clone()));
        }
        Ok(GlobalNet { variables, edges })
    }

    pub fn from_names(variables: Vec<CoreEventVariable>, edges: &[(&str, &str)]) -> Result<Self, GnError> {
        let idx = |n: &str| -> Result<VarId, GnError> {
            variables.iter().position(|v| v.name == n).ok_or_else(|| GnError::UnknownVariable(n.into()))
        };
        let e = edges.iter().map(|(a, b)| Ok((idx(a)?, idx(b)?))).collect::<Result<_, GnError>>()?;
        GlobalNet::new(variables.clone(), e)
    }

    pub fn variables(&self) -> &[CoreEventVariable] {
        &self.variables
    }

    pub fn variable(&self, v: VarId) -> &CoreEventVariable {
        &self.variables[v]
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn edges(&self) -> &BTreeSet<(VarId, VarId)> {
        &self.edges
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.edges.contains(&(a, b))
    }

    pub fn parents(&self, v: VarId) -> BTreeSet<VarId> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.variables[a].name.clone(), self.variables[b].name.clone()))
            .collect()
    }

    /// Topological order, ties broken by variable index.
    pub fn topo_order(&self) -> Vec<VarId> {
        let n = self.variables.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            out.push(v);
            for &(a, b) in &self.edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        out
    }

    pub fn to_digraph(&self) -> Digraph {
        let mut g = Digraph::new();
        for v in &self.variables {
            g.add_node(&v.name);
        }
        for (a, b) in self.edge_names() {
            g.add_edge(&a, &b);
        }
        g
    }
}

/// Induced subgraph of the net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GnSubgraph {
    pub vertices: BTreeSet<VarId>,
    pub edges: BTreeSet<(VarId, VarId)>,
}

impl GnSubgraph {
    pub fn induced(gn: &GlobalNet, vertices: BTreeSet<VarId>) -> Self {
        let edges = gn
            .edges()
            .iter()
            .copied()
            .filter(|(a, b)| vertices.contains(a) && vertices.contains(b))
            .collect();
        GnSubgraph { vertices, edges }
    }

    pub fn union(&self, other: &GnSubgraph) -> GnSubgraph {
        GnSubgraph {
            vertices: self.vertices.union(&other.vertices).copied().collect(),
            edges: self.edges.union(&other.edges).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeConstraints {
    pub required: BTreeSet<(VarId, VarId)>,
    pub forbidden: BTreeSet<(VarId, VarId)>,
}

/// Maps abstract event keys (tokens joined by spaces) to a variable state.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub variables: Vec<CoreEventVariable>,
    pub event_map: BTreeMap<String, (String, String)>,
    /// State taken by a variable a document does not mention, if any.
    #[serde(default)]
    pub absent_state: BTreeMap<String, String>,
}

impl ClusterConfig {
    pub fn lookup(&self, key: &str) -> Option<(&str, &str)> {
        self.event_map.get(key).map(|(v, s)| (v.as_str(), s.as_str()))
    }
}

/// Variables receiving at least one corpus event, in config order, plus
/// the keys of events that matched nothing.
pub fn build_core_event_variables(corpus: &[OrderedEvents], cfg: &ClusterConfig) -> (Vec<CoreEventVariable>, Vec<String>) {
    let mut used = BTreeSet::new();
    let mut unmapped = BTreeSet::new();
    for doc in corpus {
        for i in 0..doc.events.len() {
            let key = doc.event_key(i);
            match cfg.lookup(&key) {
                Some((v, _)) => {
                    used.insert(v.to_string());
                }
                None => {
                    unmapped.insert(key);
                }
            }
        }
    }
    let vars = cfg.variables.iter().filter(|v| used.contains(&v.name)).cloned().collect();
    (vars, unmapped.into_iter().collect())
}

/// Required edges are variable-level cause→effect pairs seen in at least
/// `threshold` documents; each required edge forbids its reversal.
pub fn derive_constraints(
    corpus: &[OrderedEvents],
    cfg: &ClusterConfig,
    vars: &[CoreEventVariable],
    threshold: usize,
) -> Result<EdgeConstraints, GnError> {
    let idx = |name: &str| vars.iter().position(|v| v.name == name);
    let mut counts: BTreeMap<(VarId, VarId), usize> = BTreeMap::new();
    for doc in corpus {
        let mut seen = BTreeSet::new();
        for &(a, b) in &doc.order {
            let va = cfg.lookup(&doc.event_key(a)).and_then(|(v, _)| idx(v));
            let vb = cfg.lookup(&doc.event_key(b)).and_then(|(v, _)| idx(v));
            if let (Some(x), Some(y)) = (va, vb) {
                if x != y {
                    seen.insert((x, y));
                }
            }
        }
        for p in seen {
            *counts.entry(p).or_default() += 1;
        }
    }
    let threshold = threshold.max(1);
    let required: BTreeSet<(VarId, VarId)> =
        counts.iter().filter(|(_, &c)| c >= threshold).map(|(&p, _)| p).collect();
    for &(a, b) in &required {
        if required.contains(&(b, a)) {
            return Err(GnError::ConflictingConstraints(vars[a].name.clone(), vars[b].name.clone()));
        }
    }
    if let Some(v) = has_cycle(vars.len(), &required) {
        return Err(GnError::ConflictingConstraints(vars[v].name.clone(), "cycle".into()));
    }
    let forbidden = required.iter().map(|&(a, b)| (b, a)).collect();
    Ok(EdgeConstraints { required, forbidden })
}

/// Joint state counts; each row is one state index per variable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountTable {
    pub rows: Vec<(Vec<usize>, f64)>,
}

impl CountTable {
    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.1).sum()
    }
}

/// One joint observation per document. Unmentioned variables take their
/// configured absent state; documents leaving a variable undetermined are skipped.
pub fn counts_from_corpus(corpus: &[OrderedEvents], cfg: &ClusterConfig, vars: &[CoreEventVariable]) -> CountTable {
    let mut agg: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    'doc: for doc in corpus {
        let mut state: Vec<Option<usize>> = vec![None; vars.len()];
        for i in 0..doc.events.len() {
            if let Some((v, s)) = cfg.lookup(&doc.event_key(i)) {
                if let Some(k) = vars.iter().position(|x| x.name == v) {
                    state[k] = vars[k].state(s);
                }
            }
        }
        let mut row = Vec::with_capacity(vars.len());
        for (k, s) in state.into_iter().enumerate() {
            let s = s.or_else(|| cfg.absent_state.get(&vars[k].name).and_then(|a| vars[k].state(a)));
            match s {
                Some(s) => row.push(s),
                None => continue 'doc,
            }
        }
        *agg.entry(row).or_default() += 1.0;
    }
    CountTable { rows: agg.into_iter().collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    #[serde(default = "default_max_parents")]
    pub max_parents: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Learned edges an expert marks as non-causal; dropped unless required.
    #[serde(default)]
    pub non_causal: BTreeSet<(VarId, VarId)>,
}

fn default_max_parents() -> usize {
    4
}

fn default_restarts() -> usize {
    5
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { max_parents: 4, restarts: 5, seed: 0, non_causal: BTreeSet::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome {
    /// Search result before the non-causal filter.
    pub learned: GlobalNet,
    pub net: GlobalNet,
    pub score: f64,
}

struct Scorer<'a> {
    vars: &'a [CoreEventVariable],
    counts: &'a CountTable,
    log_n: f64,
    cache: HashMap<(VarId, Vec<VarId>), f64>,
}

impl<'a> Scorer<'a> {
    fn family(&mut self, x: VarId, parents: &BTreeSet<VarId>) -> f64 {
        let pa: Vec<VarId> = parents.iter().copied().collect();
        if let Some(&s) = self.cache.get(&(x, pa.clone())) {
            return s;
        }
        let rx = self.vars[x].states.len();
        let mut table: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
        for (row, c) in &self.counts.rows {
            let key: Vec<usize> = pa.iter().map(|&p| row[p]).collect();
            table.entry(key).or_insert_with(|| vec![0.0; rx])[row[x]] += c;
        }
        let mut ll = 0.0;
        for counts in table.values() {
            let n: f64 = counts.iter().sum();
            for &c in counts {
                if c > 0.0 {
                    ll += c * (c / n).ln();
                }
            }
        }
        let q: f64 = pa.iter().map(|&p| self.vars[p].states.len() as f64).product();
        let s = ll - 0.5 * self.log_n * (rx as f64 - 1.0) * q;
        self.cache.insert((x, pa), s);
        s
    }

    fn total(&mut self, n: usize, edges: &BTreeSet<(VarId, VarId)>) -> f64 {
        (0..n).map(|x| self.family(x, &parents_in(edges, x))).sum()
    }
}

fn parents_in(edges: &BTreeSet<(VarId, VarId)>, x: VarId) -> BTreeSet<VarId> {
    edges.iter().filter(|e| e.1 == x).map(|e| e.0).collect()
}

fn reaches(edges: &BTreeSet<(VarId, VarId)>, from: VarId, to: VarId) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if v == to {
            return true;
        }
        if seen.insert(v) {
            stack.extend(edges.iter().filter(|e| e.0 == v).map(|e| e.1));
        }
    }
    false
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Add(VarId, VarId),
    Remove(VarId, VarId),
    Reverse(VarId, VarId),
}

fn legal_moves(n: usize, edges: &BTreeSet<(VarId, VarId)>, c: &EdgeConstraints, max_parents: usize) -> Vec<Move> {
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            if edges.contains(&(a, b)) {
                if c.required.contains(&(a, b)) {
                    continue;
                }
                out.push(Move::Remove(a, b));
                if !c.forbidden.contains(&(b, a)) && parents_in(edges, a).len() < max_parents {
                    let mut e = edges.clone();
                    e.remove(&(a, b));
                    if !reaches(&e, a, b) {
                        out.push(Move::Reverse(a, b));
                    }
                }
            } else if !edges.contains(&(b, a))
                && !c.forbidden.contains(&(a, b))
                && parents_in(edges, b).len() < max_parents
                && !reaches(edges, b, a)
            {
                out.push(Move::Add(a, b));
            }
        }
    }
    out
}

fn apply(edges: &BTreeSet<(VarId, VarId)>, m: Move) -> BTreeSet<(VarId, VarId)> {
    let mut e = edges.clone();
    match m {
        Move::Add(a, b) => {
            e.insert((a, b));
        }
        Move::Remove(a, b) => {
            e.remove(&(a, b));
        }
        Move::Reverse(a, b) => {
            e.remove(&(a, b));
            e.insert((b, a));
        }
    }
    e
}

fn climb(scorer: &mut Scorer, n: usize, start: BTreeSet<(VarId, VarId)>, c: &EdgeConstraints, max_parents: usize) -> (BTreeSet<(VarId, VarId)>, f64) {
    let mut cur = start;
    let mut score = scorer.total(n, &cur);
    loop {
        let mut best: Option<(f64, BTreeSet<(VarId, VarId)>)> = None;
        for m in legal_moves(n, &cur, c, max_parents) {
            let next = apply(&cur, m);
            let s = scorer.total(n, &next);
            if s > score + 1e-9 && best.as_ref().is_none_or(|(bs, _)| s > *bs) {
                best = Some((s, next));
            }
        }
        match best {
            Some((s, next)) => {
                score = s;
                cur = next;
            }
            None => return (cur, score),
        }
    }
}

/// Greedy hill climbing on BIC with random restarts. Required edges stay,
/// forbidden edges never enter, then non-causal edges are filtered out.
pub fn learn_global_net(
    vars: &[CoreEventVariable],
    counts: &CountTable,
    constraints: &EdgeConstraints,
    config: &ScoreConfig,
) -> Result<LearnOutcome, GnError> {
    let n = vars.len();
    let total = counts.total();
    if counts.rows.is_empty() || total <= 0.0 {
        return Err(GnError::ScoreFailure("empty count table".into()));
    }
    for (row, c) in &counts.rows {
        if row.len() != n || row.iter().zip(vars).any(|(&s, v)| s >= v.states.len()) || *c < 0.0 {
            return Err(GnError::ScoreFailure("count row does not match the variables".into()));
        }
    }
    for e in &constraints.required {
        if constraints.forbidden.contains(e) {
            return Err(GnError::ConflictingConstraints(vars[e.0].name.clone(), vars[e.1].name.clone()));
        }
    }
    if let Some(v) = has_cycle(n, &constraints.required) {
        return Err(GnError::Cyclic(vars[v].name.clone()));
    }
    let mut scorer = Scorer { vars, counts, log_n: total.ln(), cache: HashMap::new() };
    let (mut best, mut best_score) = climb(&mut scorer, n, constraints.required.clone(), constraints, config.max_parents);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let mut start = best.clone();
        let steps = 1 + rng.random_range(0..n.max(1));
        for _ in 0..steps {
            let moves = legal_moves(n, &start, constraints, config.max_parents);
            if moves.is_empty() {
                break;
            }
            start = apply(&start, moves[rng.random_range(0..moves.len())]);
        }
        let (cand, s) = climb(&mut scorer, n, start, constraints, config.max_parents);
        if s > best_score + 1e-9 {
            best = cand;
            best_score = s;
        }
    }
    let learned = GlobalNet::new(vars.to_vec(), best.clone())?;
    let filtered = best
        .into_iter()
        .filter(|e| constraints.required.contains(e) || !config.non_causal.contains(e))
        .collect();
    Ok(LearnOutcome { learned, net: GlobalNet::new(vars.to_vec(), filtered)?, score: best_score })
}

/// Subgraph induced by the variables the events map to.
pub fn psi(events: &OrderedEvents, gn: &GlobalNet, cfg: &ClusterConfig) -> Result<GnSubgraph, GnError> {
    let mut vertices = BTreeSet::new();
    let mut unmapped = Vec::new();
    for i in 0..events.events.len() {
        let key = events.event_key(i);
        match cfg.lookup(&key) {
            Some((v, _)) => match gn.var(v) {
                Some(id) => {
                    vertices.insert(id);
                }
                None => unmapped.push(key),
            },
            None => unmapped.push(key),
        }
    }
    if !unmapped.is_empty() {
        return Err(GnError::UnmappedEvent(unmapped));
    }
    Ok(GnSubgraph::induced(gn, vertices))
}

/// Document to subgraph: psi after sigma.
pub fn l_map(doc: &Document, omega: &Omega, gn: &GlobalNet, cfg: &ClusterConfig) -> Result<GnSubgraph, GnError> {
    psi(&sigma(doc, omega), gn, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(events: &[&str], order: &[(usize, usize)]) -> OrderedEvents {
        OrderedEvents {
            events: events.iter().map(|e| e.split(' ').map(String::from).collect()).collect(),
            order: order.iter().copied().collect(),
        }
    }

    fn cluster() -> ClusterConfig {
        ClusterConfig {
            variables: vec![
                CoreEventVariable::new("phase", &["red", "yellow", "blue"]),
                CoreEventVariable::binary("oil_leak"),
                CoreEventVariable::binary("seal"),
            ],
            event_map: [
                ("red phase transformer", ("phase", "red")),
                ("yellow phase transformer", ("phase", "yellow")),
                ("blue phase transformer", ("phase", "blue")),
                ("oil leak", ("oil_leak", "yes")),
                ("seal decay", ("seal", "yes")),
            ]
            .iter()
            .map(|(k, (v, s))| (k.to_string(), (v.to_string(), s.to_string())))
            .collect(),
            absent_state: BTreeMap::new(),
        }
    }

    #[test]
    fn clustering_into_variables() {
        let corpus = vec![ev(&["red phase transformer", "yellow phase transformer", "blue phase transformer"], &[])];
        let (vars, unmapped) = build_core_event_variables(&corpus, &cluster());
        assert_eq!(vars.len(), 1);
        assert_eq!(vars[0].states.len(), 3);
        assert!(unmapped.is_empty());
        let (vars, _) = build_core_event_variables(&[ev(&["oil leak", "sparks"], &[])], &cluster());
        assert_eq!(vars, vec![CoreEventVariable::binary("oil_leak")]);
        assert!(build_core_event_variables(&[], &cluster()).0.is_empty());
    }

    #[test]
    fn constraints_from_corpus() {
        let cfg = cluster();
        let vars = cfg.variables.clone();
        let c = derive_constraints(&[ev(&["seal decay", "oil leak"], &[(0, 1)])], &cfg, &vars, 1).unwrap();
        assert_eq!(c.required, [(2, 1)].into_iter().collect());
        assert_eq!(c.forbidden, [(1, 2)].into_iter().collect());
        let empty = derive_constraints(&[], &cfg, &vars, 1).unwrap();
        assert!(empty.required.is_empty() && empty.forbidden.is_empty());
        let conflict = derive_constraints(
            &[ev(&["seal decay", "oil leak"], &[(0, 1)]), ev(&["oil leak", "seal decay"], &[(0, 1)])],
            &cfg,
            &vars,
            1,
        );
        assert!(matches!(conflict, Err(GnError::ConflictingConstraints(..))));
    }

    #[test]
    fn uniform_data_keeps_only_required() {
        let vars = vec![CoreEventVariable::binary("a"), CoreEventVariable::binary("b"), CoreEventVariable::binary("c")];
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    rows.push((vec![a, b, c], 25.0));
                }
            }
        }
        let cons = EdgeConstraints { required: [(0, 1)].into_iter().collect(), forbidden: BTreeSet::new() };
        let out = learn_global_net(&vars, &CountTable { rows }, &cons, &ScoreConfig::default()).unwrap();
        assert_eq!(out.net.edges(), &cons.required);
    }

    #[test]
    fn empty_counts_fail() {
        let vars = vec![CoreEventVariable::binary("a")];
        let r = learn_global_net(&vars, &CountTable::default(), &EdgeConstraints::default(), &ScoreConfig::default());
        assert!(matches!(r, Err(GnError::ScoreFailure(_))));
    }

    #[test]
    fn psi_induces() {
        let cfg = cluster();
        let gn = GlobalNet::from_names(cfg.variables.clone(), &[("seal", "oil_leak"), ("phase", "seal")]).unwrap();
        let g = psi(&ev(&["seal decay", "oil leak"], &[(0, 1)]), &gn, &cfg).unwrap();
        assert_eq!(g.vertices, [1, 2].into_iter().collect());
        assert_eq!(g.edges, [(2, 1)].into_iter().collect());
        let single = psi(&ev(&["oil leak"], &[]), &gn, &cfg).unwrap();
        assert_eq!(single.vertices.len(), 1);
        assert!(single.edges.is_empty());
        assert!(matches!(psi(&ev(&["sparks"], &[]), &gn, &cfg), Err(GnError::UnmappedEvent(_))));
    }
}
