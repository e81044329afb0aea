//! Two-level GN-CEG model: communities, the latent-path map, flattenings and
//! core-event control.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ceg::{CegError, CegPath, EdgeIx, FailureCeg, PosIx};
use crate::global_net::{GlobalNet, GnSubgraph, VarId};
use crate::graph::GraphError;

mod control;
mod flattening;

pub use control::{control_core_event, Cpt, EmissionTables, GnCegModel};
pub use flattening::{build_flattening, check_rcmc, core_node, floret_node, incident_node, Assignment, Flattening, RcmcReport, RcmcViolation, VariableCheck};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("unknown CEG edge #{0}")]
    UnknownEdge(EdgeIx),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` belongs to no community")]
    OrphanVariable(String),
    #[error("overlapping communities at {a} and {b} joined by edge {from} -> {to}")]
    OverlapEdge { a: String, b: String, from: String, to: String },
    #[error("inconsistent assignment: {0}")]
    InconsistentAssignment(String),
    #[error("{} candidate paths match", candidates.len())]
    AmbiguousPath { candidates: Vec<(Vec<String>, f64)> },
    #[error("no outgoing edge of {position} matches the subgraph")]
    NoMatchingEdge { position: String },
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("target is not determined downstream of {0}")]
    NotDownstream(String),
    #[error("bad emission table: {0}")]
    BadEmission(String),
    #[error("variable `{variable}` appears twice on one path")]
    RepeatedVariable { variable: String },
    #[error("variable `{variable}` has no state `{state}`")]
    InvalidState { variable: String, state: String },
    #[error("dependence order must be at least one")]
    BadDependence,
    #[error(transparent)]
    Ceg(#[from] CegError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Sub-community of core event variables per CEG edge, plus edges used
/// when nothing in a floret matches.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommunityMap {
    sub: BTreeMap<EdgeIx, BTreeSet<VarId>>,
    defaults: BTreeSet<EdgeIx>,
}

impl CommunityMap {
    pub fn new(
        ceg: &FailureCeg,
        gn: &GlobalNet,
        sub: BTreeMap<EdgeIx, BTreeSet<VarId>>,
        defaults: BTreeSet<EdgeIx>,
    ) -> Result<Self, HierarchyError> {
        for (&e, vars) in &sub {
            if e >= ceg.num_edges() {
                return Err(HierarchyError::UnknownEdge(e));
            }
            if let Some(&v) = vars.iter().find(|&&v| v >= gn.variables().len()) {
                return Err(HierarchyError::UnknownVariable(format!("#{v}")));
            }
        }
        if let Some(&e) = defaults.iter().find(|&&e| e >= ceg.num_edges()) {
            return Err(HierarchyError::UnknownEdge(e));
        }
        let map = CommunityMap { sub: sub.into_iter().filter(|(_, v)| !v.is_empty()).collect(), defaults };
        map.check_overlaps(ceg, gn)?;
        Ok(map)
    }

    /// Overlapping communities may not be joined by a GN edge between
    /// their non-shared parts.
    fn check_overlaps(&self, ceg: &FailureCeg, gn: &GlobalNet) -> Result<(), HierarchyError> {
        let internal: Vec<PosIx> = (0..ceg.num_positions()).filter(|&w| !ceg.is_sink(w)).collect();
        for (i, &a) in internal.iter().enumerate() {
            let ua = self.community(ceg, a);
            for &b in &internal[i + 1..] {
                let ub = self.community(ceg, b);
                if ua.is_disjoint(&ub) {
                    continue;
                }
                let only_a: BTreeSet<VarId> = ua.difference(&ub).copied().collect();
                let only_b: BTreeSet<VarId> = ub.difference(&ua).copied().collect();
                for &(x, y) in gn.edges() {
                    if (only_a.contains(&x) && only_b.contains(&y)) || (only_b.contains(&x) && only_a.contains(&y)) {
                        return Err(HierarchyError::OverlapEdge {
                            a: ceg.node(a).name.clone(),
                            b: ceg.node(b).name.clone(),
                            from: gn.variable(x).name.clone(),
                            to: gn.variable(y).name.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sub_community(&self, e: EdgeIx) -> BTreeSet<VarId> {
        self.sub.get(&e).cloned().unwrap_or_default()
    }

    pub fn entries(&self) -> &BTreeMap<EdgeIx, BTreeSet<VarId>> {
        &self.sub
    }

    pub fn defaults(&self) -> &BTreeSet<EdgeIx> {
        &self.defaults
    }

    /// Union of the sub-communities on the floret of `w`.
    pub fn community(&self, ceg: &FailureCeg, w: PosIx) -> BTreeSet<VarId> {
        ceg.out_edges(w).iter().flat_map(|e| self.sub_community(*e)).collect()
    }

    /// Edges whose sub-community contains `u`.
    pub fn carrying(&self, u: VarId) -> Vec<EdgeIx> {
        self.sub.iter().filter(|(_, s)| s.contains(&u)).map(|(&e, _)| e).collect()
    }

    /// G_{i,k}: the sub-community with GN edges whose head lies in it and
    /// whose tail lies in it or outside the whole community.
    pub fn subgraph(&self, ceg: &FailureCeg, gn: &GlobalNet, e: EdgeIx) -> GnSubgraph {
        let vertices = self.sub_community(e);
        let community = self.community(ceg, ceg.edge(e).src);
        let edges = gn
            .edges()
            .iter()
            .copied()
            .filter(|(a, b)| vertices.contains(b) && (vertices.contains(a) || !community.contains(a)))
            .collect();
        GnSubgraph { vertices, edges }
    }

    /// Whether the edge's sub-community, with its internal GN edges, sits inside `g`.
    pub fn contained_in(&self, gn: &GlobalNet, e: EdgeIx, g: &GnSubgraph) -> bool {
        let s = self.sub_community(e);
        s.is_subset(&g.vertices)
            && gn
                .edges()
                .iter()
                .filter(|(a, b)| s.contains(a) && s.contains(b))
                .all(|edge| g.edges.contains(edge))
    }
}

/// W_i: parents of the receiving positions of every edge carrying `u`.
pub fn direct_superiors(u: VarId, cmap: &CommunityMap, ceg: &FailureCeg, gn: &GlobalNet) -> Result<BTreeSet<PosIx>, HierarchyError> {
    let carrying = cmap.carrying(u);
    if carrying.is_empty() {
        return Err(HierarchyError::OrphanVariable(gn.variable(u).name.clone()));
    }
    Ok(carrying.iter().flat_map(|&e| ceg.parents(ceg.edge(e).dst)).collect())
}

/// Root-to-sink paths whose every edge is contained in `g`; where no edge
/// of a floret matches, a configured default edge is followed.
pub fn q_candidates(ceg: &FailureCeg, cmap: &CommunityMap, gn: &GlobalNet, g: &GnSubgraph) -> Result<Vec<CegPath>, HierarchyError> {
    let mut out = Vec::new();
    let mut dead_end = None;
    let mut stack: Vec<(PosIx, Vec<EdgeIx>)> = vec![(ceg.root(), Vec::new())];
    while let Some((w, prefix)) = stack.pop() {
        if ceg.is_sink(w) {
            out.push(CegPath { edges: prefix });
            continue;
        }
        let mut next: Vec<EdgeIx> =
            ceg.out_edges(w).iter().copied().filter(|&e| cmap.contained_in(gn, e, g)).collect();
        if next.is_empty() {
            next = ceg.out_edges(w).iter().copied().filter(|e| cmap.defaults().contains(e)).collect();
        }
        if next.is_empty() {
            dead_end.get_or_insert(w);
            continue;
        }
        for &e in next.iter().rev() {
            let mut p = prefix.clone();
            p.push(e);
            stack.push((ceg.edge(e).dst, p));
        }
    }
    if out.is_empty() {
        let w = dead_end.unwrap_or(ceg.root());
        return Err(HierarchyError::NoMatchingEdge { position: ceg.node(w).name.clone() });
    }
    out.sort();
    Ok(out)
}

/// The latent path a subgraph maps to. More than one candidate is
/// reported with each candidate's probability.
pub fn q_map(ceg: &FailureCeg, cmap: &CommunityMap, gn: &GlobalNet, g: &GnSubgraph) -> Result<CegPath, HierarchyError> {
    let mut cands = q_candidates(ceg, cmap, gn, g)?;
    match cands.len() {
        1 => Ok(cands.remove(0)),
        _ => Err(HierarchyError::AmbiguousPath { candidates: describe(ceg, &cands)? }),
    }
}

/// Among candidates whose sub-communities jointly cover the vertices of
/// `g`, the most probable one; remaining ties stay ambiguous.
pub fn q_map_resolved(ceg: &FailureCeg, cmap: &CommunityMap, gn: &GlobalNet, g: &GnSubgraph) -> Result<CegPath, HierarchyError> {
    let cands = q_candidates(ceg, cmap, gn, g)?;
    let covering: Vec<CegPath> = cands
        .iter()
        .filter(|p| {
            let cover: BTreeSet<VarId> = p.edges.iter().flat_map(|&e| cmap.sub_community(e)).collect();
            g.vertices.is_subset(&cover)
        })
        .cloned()
        .collect();
    let pool = if covering.is_empty() { cands } else { covering };
    let mut best: Vec<(f64, CegPath)> = Vec::new();
    for p in pool {
        let pr = ceg.path_probability(&p)?;
        match best.first() {
            Some((b, _)) if pr < *b - crate::tree::TOL => {}
            Some((b, _)) if pr > *b + crate::tree::TOL => best = vec![(pr, p)],
            _ => best.push((pr, p)),
        }
    }
    match best.len() {
        0 => Err(HierarchyError::NoMatchingEdge { position: ceg.node(ceg.root()).name.clone() }),
        1 => Ok(best.remove(0).1),
        _ => {
            let paths: Vec<CegPath> = best.into_iter().map(|b| b.1).collect();
            Err(HierarchyError::AmbiguousPath { candidates: describe(ceg, &paths)? })
        }
    }
}

fn describe(ceg: &FailureCeg, paths: &[CegPath]) -> Result<Vec<(Vec<String>, f64)>, HierarchyError> {
    paths.iter().map(|p| Ok((ceg.path_labels(p), ceg.path_probability(p)?))).collect()
}
