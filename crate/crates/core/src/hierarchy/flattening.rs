use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{direct_superiors, CommunityMap, HierarchyError};
use crate::ceg::{CegPath, EdgeIx, FailureCeg, PosIx};
use crate::global_net::GlobalNet;
use crate::graph::Digraph;

/// Floret values and incident bits for one unfolding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Chosen edge per non-terminal position, None for the value 0.
    pub y: BTreeMap<PosIx, Option<EdgeIx>>,
    pub i: BTreeMap<PosIx, bool>,
}

impl Assignment {
    pub fn from_path(ceg: &FailureCeg, path: &CegPath) -> Self {
        let mut y = BTreeMap::new();
        let mut i = BTreeMap::new();
        for w in 0..ceg.num_positions() {
            let (yw, iw) = ceg.eval_floret_and_incident(path, w);
            if !ceg.is_sink(w) {
                y.insert(w, yw);
            }
            i.insert(w, iw);
        }
        Assignment { y, i }
    }

    /// The unique path the assignment describes.
    pub fn to_path(&self, ceg: &FailureCeg) -> Result<CegPath, HierarchyError> {
        let bad = |m: String| Err(HierarchyError::InconsistentAssignment(m));
        if self.i.len() != ceg.num_positions() || self.y.len() != ceg.num_internal() {
            return bad("assignment does not cover every position".into());
        }
        let mut on = vec![false; ceg.num_positions()];
        let mut edges = Vec::new();
        let mut w = ceg.root();
        on[w] = true;
        while !ceg.is_sink(w) {
            match self.y.get(&w).copied().flatten() {
                Some(e) if ceg.edge(e).src == w => {
                    edges.push(e);
                    w = ceg.edge(e).dst;
                    on[w] = true;
                }
                _ => return bad(format!("no valid floret value at {}", ceg.node(w).name)),
            }
        }
        for (w, &flag) in on.iter().enumerate() {
            if self.i.get(&w) != Some(&flag) {
                return bad(format!("incident bit at {} disagrees with the path", ceg.node(w).name));
            }
            if !flag && !ceg.is_sink(w) && self.y.get(&w) != Some(&None) {
                return bad(format!("off-path position {} has a floret value", ceg.node(w).name));
            }
        }
        Ok(CegPath { edges })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreNode {
    /// Declared parents inside the flattening.
    pub parents: BTreeSet<String>,
    /// Floret nodes Y(W_i).
    pub superiors: BTreeSet<String>,
    /// Position whose floret carries the variable on the assigned path.
    pub floret: PosIx,
}

/// Non-recursive graph over core, floret, incident and auxiliary variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Flattening {
    pub graph: Digraph,
    pub core: BTreeMap<String, CoreNode>,
    pub floret_nodes: Vec<String>,
    pub incident_nodes: Vec<String>,
    /// Active core nodes in path order, topological within each edge.
    pub sequence: Vec<String>,
    pub path: CegPath,
}

pub fn core_node(name: &str) -> String {
    format!("U:{name}")
}

pub fn floret_node(pos: &str) -> String {
    format!("Y:{pos}")
}

pub fn incident_node(pos: &str) -> String {
    format!("I:{pos}")
}

fn is_level_node(n: &str) -> bool {
    n.starts_with("Y:") || n.starts_with("I:")
}

pub fn build_flattening(ceg: &FailureCeg, gn: &GlobalNet, cmap: &CommunityMap, h: &Assignment) -> Result<Flattening, HierarchyError> {
    let path = h.to_path(ceg)?;
    let mut graph = Digraph::new();
    let mut floret_nodes = Vec::new();
    let mut incident_nodes = Vec::new();
    for w in 0..ceg.num_positions() {
        let name = &ceg.node(w).name;
        graph.add_node(&incident_node(name));
        incident_nodes.push(incident_node(name));
        if !ceg.is_sink(w) {
            let y = floret_node(name);
            graph.add_edge(&incident_node(name), &y);
            for c in ceg.children(w) {
                graph.add_edge(&y, &incident_node(&ceg.node(c).name));
            }
            floret_nodes.push(y);
        }
    }
    let order = gn.topo_order();
    let mut active = BTreeSet::new();
    let mut sequence = Vec::new();
    let mut floret_of = BTreeMap::new();
    for &e in &path.edges {
        let sub = cmap.sub_community(e);
        for &u in order.iter().filter(|u| sub.contains(u)) {
            if !active.insert(u) {
                return Err(HierarchyError::RepeatedVariable { variable: gn.variable(u).name.clone() });
            }
            sequence.push(core_node(&gn.variable(u).name));
            floret_of.insert(u, ceg.edge(e).src);
        }
    }
    let mut core = BTreeMap::new();
    for &u in &active {
        let un = core_node(&gn.variable(u).name);
        graph.add_node(&un);
        let parents: BTreeSet<String> =
            gn.parents(u).into_iter().filter(|p| active.contains(p)).map(|p| core_node(&gn.variable(p).name)).collect();
        let superiors: BTreeSet<String> = direct_superiors(u, cmap, ceg, gn)?
            .into_iter()
            .map(|w| floret_node(&ceg.node(w).name))
            .collect();
        for p in parents.iter().chain(&superiors) {
            graph.add_edge(p, &un);
        }
        core.insert(un, CoreNode { parents, superiors, floret: floret_of[&u] });
    }
    Ok(Flattening { graph, core, floret_nodes, incident_nodes, sequence, path })
}

impl Flattening {
    /// Attaches a holding-time node whose only parent is Y(w).
    pub fn add_holding_time(&mut self, pos: &str) -> Result<String, HierarchyError> {
        let y = floret_node(pos);
        if !self.graph.contains(&y) {
            return Err(HierarchyError::UnknownVariable(y));
        }
        let t = format!("T:{pos}");
        self.graph.add_edge(&y, &t);
        Ok(t)
    }

    /// Adds a missing-event indicator B_k per active core variable U_k,
    /// with parents Y at U_k's floret and the `n` preceding core variables;
    /// B_k becomes a declared parent of U_k.
    pub fn with_missing_indicators(&self, n: usize, ceg: &FailureCeg) -> Result<Flattening, HierarchyError> {
        if n == 0 {
            return Err(HierarchyError::BadDependence);
        }
        let mut out = self.clone();
        for (k, u) in self.sequence.iter().enumerate() {
            let b = format!("B:{}", &u[2..]);
            let y = floret_node(&ceg.node(self.core[u].floret).name);
            out.graph.add_edge(&y, &b);
            for prev in &self.sequence[k.saturating_sub(n)..k] {
                out.graph.add_edge(prev, &b);
            }
            out.graph.add_edge(&b, u);
            out.core.get_mut(u).expect("sequence node is core").parents.insert(b);
        }
        Ok(out)
    }

    pub fn d_separated(&self, a: &BTreeSet<String>, b: &BTreeSet<String>, z: &BTreeSet<String>) -> Result<bool, HierarchyError> {
        Ok(self.graph.d_separated(a, b, z)?)
    }

    /// Non-descendant variables of `u` outside the floret and incident levels.
    pub fn non_descendants(&self, u: &str) -> BTreeSet<String> {
        let Some(i) = self.graph.id(u) else { return BTreeSet::new() };
        let desc = self.graph.descendants(i);
        (0..self.graph.len())
            .filter(|&j| j != i && !desc.contains(&j) && !is_level_node(self.graph.name(j)))
            .map(|j| self.graph.name(j).to_string())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VariableCheck {
    pub variable: String,
    pub cmc: bool,
    pub rmc: bool,
    pub rcmc: bool,
    /// False only if CMC and RMC hold while RCMC fails.
    pub implication_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RcmcViolation {
    pub variable: String,
    pub condition: String,
    pub separated_from: BTreeSet<String>,
    pub given: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RcmcReport {
    pub checks: Vec<VariableCheck>,
    pub violations: Vec<RcmcViolation>,
}

impl RcmcReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty() && self.checks.iter().all(|c| c.implication_consistent)
    }
}

/// Checks the causal Markov condition, its recursive counterpart and
/// their combination as d-separations for every core variable.
pub fn check_rcmc(flat: &Flattening) -> Result<RcmcReport, HierarchyError> {
    let mut report = RcmcReport::default();
    let incident: BTreeSet<String> = flat.incident_nodes.iter().cloned().collect();
    for (u, node) in &flat.core {
        let uset: BTreeSet<String> = [u.clone()].into_iter().collect();
        let nd = flat.non_descendants(u);
        let nd_minus_pa: BTreeSet<String> = nd.difference(&node.parents).cloned().collect();
        let y_bar: BTreeSet<String> = flat.floret_nodes.iter().filter(|y| !node.superiors.contains(*y)).cloned().collect();
        let pa_y: BTreeSet<String> = node.parents.union(&node.superiors).cloned().collect();
        let far: BTreeSet<String> = y_bar.union(&incident).cloned().collect();
        let y_nd: BTreeSet<String> = node.superiors.union(&nd).cloned().collect();
        let all: BTreeSet<String> = nd_minus_pa.union(&far).cloned().collect();

        let mut run = |name: &str, b: &BTreeSet<String>, z: &BTreeSet<String>| -> Result<bool, HierarchyError> {
            let ok = flat.d_separated(&uset, b, z)?;
            if !ok {
                report.violations.push(RcmcViolation {
                    variable: u.clone(),
                    condition: name.into(),
                    separated_from: b.clone(),
                    given: z.clone(),
                });
            }
            Ok(ok)
        };
        let cmc = run("CMC", &nd_minus_pa, &pa_y)?;
        let rmc = run("RMC", &far, &y_nd)?;
        let rcmc = run("RCMC", &all, &pa_y)?;
        report.checks.push(VariableCheck {
            variable: u.clone(),
            cmc,
            rmc,
            rcmc,
            implication_consistent: !(cmc && rmc) || rcmc,
        });
    }
    Ok(report)
}
