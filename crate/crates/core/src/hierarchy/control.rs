use std::collections::{BTreeMap, BTreeSet};

use super::{CommunityMap, HierarchyError};
use crate::ceg::{EdgeIx, FailureCeg, PathEvent};
use crate::global_net::{GlobalNet, VarId};
use crate::tree::TOL;

/// Conditional table of one core variable inside one sub-community. Rows
/// are indexed by parent states in mixed radix, first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub variable: VarId,
    pub parents: Vec<VarId>,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn row_index(&self, gn: &GlobalNet, state: &BTreeMap<VarId, usize>) -> usize {
        self.parents.iter().fold(0, |acc, &p| acc * gn.variable(p).states.len() + state[&p])
    }
}

/// Emission tables per CEG edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmissionTables {
    pub by_edge: BTreeMap<EdgeIx, Vec<Cpt>>,
}

/// A bound GN-CEG with emission tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GnCegModel {
    pub ceg: FailureCeg,
    pub gn: GlobalNet,
    pub cmap: CommunityMap,
    pub emissions: EmissionTables,
}

impl GnCegModel {
    pub fn new(ceg: FailureCeg, gn: GlobalNet, cmap: CommunityMap, emissions: EmissionTables) -> Result<Self, HierarchyError> {
        let m = GnCegModel { ceg, gn, cmap, emissions };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), HierarchyError> {
        let bad = |m: String| Err(HierarchyError::BadEmission(m));
        for (&e, cpts) in &self.emissions.by_edge {
            if !self.cmap.entries().contains_key(&e) && !cpts.is_empty() {
                return bad(format!("tables on edge #{e} without a sub-community"));
            }
        }
        for (&e, sub) in self.cmap.entries() {
            let cpts = self.emissions.by_edge.get(&e).map(Vec::as_slice).unwrap_or(&[]);
            let covered: BTreeSet<VarId> = cpts.iter().map(|c| c.variable).collect();
            if covered != *sub || covered.len() != cpts.len() {
                return bad(format!("edge #{e} needs exactly one table per sub-community variable"));
            }
            for c in cpts {
                let name = &self.gn.variable(c.variable).name;
                let gn_pa = self.gn.parents(c.variable);
                if c.parents.iter().any(|p| !sub.contains(p) || !gn_pa.contains(p)) {
                    return bad(format!("`{name}` has a parent outside its sub-community or the net"));
                }
                let q: usize = c.parents.iter().map(|&p| self.gn.variable(p).states.len()).product();
                let r = self.gn.variable(c.variable).states.len();
                if c.rows.len() != q || c.rows.iter().any(|row| row.len() != r) {
                    return bad(format!("`{name}` table has the wrong shape"));
                }
                for row in &c.rows {
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > TOL || row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                        return bad(format!("`{name}` row does not form a distribution"));
                    }
                }
            }
        }
        for u in 0..self.gn.variables().len() {
            let carrying = self.cmap.carrying(u);
            for &a in &carrying {
                let reach = self.ceg.descendants(self.ceg.edge(a).dst);
                if carrying.iter().any(|&b| b != a && reach[self.ceg.edge(b).src]) {
                    return Err(HierarchyError::RepeatedVariable { variable: self.gn.variable(u).name.clone() });
                }
            }
        }
        Ok(())
    }

    /// Sub-community variables of `e` in GN topological order.
    pub fn emission_order(&self, e: EdgeIx) -> Vec<VarId> {
        let sub = self.cmap.sub_community(e);
        self.gn.topo_order().into_iter().filter(|v| sub.contains(v)).collect()
    }

    pub fn cpt(&self, e: EdgeIx, u: VarId) -> Option<&Cpt> {
        self.emissions.by_edge.get(&e)?.iter().find(|c| c.variable == u)
    }

    /// Every joint state of the sub-community of `e` with its probability.
    pub fn emission_joint(&self, e: EdgeIx) -> Vec<(BTreeMap<VarId, usize>, f64)> {
        let mut out = vec![(BTreeMap::new(), 1.0)];
        for u in self.emission_order(e) {
            let cpt = self.cpt(e, u).expect("validated");
            let mut next = Vec::new();
            for (state, p) in out {
                let row = &cpt.rows[cpt.row_index(&self.gn, &state)];
                for (s, &q) in row.iter().enumerate() {
                    let mut st = state.clone();
                    st.insert(u, s);
                    next.push((st, p * q));
                }
            }
            out = next;
        }
        out
    }

    /// P_e(u = state), marginalising the rest of the sub-community.
    pub fn emission_marginal(&self, e: EdgeIx, u: VarId, state: usize) -> f64 {
        self.emission_joint(e).iter().filter(|(s, _)| s.get(&u) == Some(&state)).map(|(_, p)| p).sum()
    }

    pub fn resolve_state(&self, var: &str, state: &str) -> Result<(VarId, usize), HierarchyError> {
        let u = self.gn.var(var).ok_or_else(|| HierarchyError::UnknownVariable(var.into()))?;
        let s = self.gn.variable(u).state(state).ok_or_else(|| HierarchyError::InvalidState {
            variable: var.into(),
            state: state.into(),
        })?;
        Ok((u, s))
    }
}

/// π(target || U = state): the target probability after fixing U by
/// control, with U's incoming GN edges severed in every sub-community.
pub fn control_core_event(model: &GnCegModel, u: VarId, state: usize, target: &PathEvent) -> Result<f64, HierarchyError> {
    let ceg = &model.ceg;
    let var = model.gn.variable(u);
    if state >= var.states.len() {
        return Err(HierarchyError::InvalidState { variable: var.name.clone(), state: state.to_string() });
    }
    let carrying = model.cmap.carrying(u);
    if carrying.is_empty() {
        return Err(HierarchyError::OrphanVariable(var.name.clone()));
    }
    let mut into: BTreeMap<usize, Vec<EdgeIx>> = BTreeMap::new();
    for &e in &carrying {
        into.entry(ceg.edge(e).dst).or_default().push(e);
    }
    for &w in into.keys() {
        let reach = ceg.descendants(w);
        let upstream_pos = target.positions.iter().any(|&p| p != w && ceg.descendants(p)[w]);
        let upstream_edge = target.edges.iter().any(|&e| ceg.descendants(ceg.edge(e).dst)[w] && !reach[ceg.edge(e).src]);
        if upstream_pos || upstream_edge {
            return Err(HierarchyError::NotDownstream(ceg.node(w).name.clone()));
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&w, edges) in &into {
        let lw = ceg.event_probability(w);
        if lw <= 0.0 {
            continue;
        }
        let joint: f64 = edges
            .iter()
            .map(|&e| ceg.event_prob(&PathEvent::along([e])) * model.emission_marginal(e, u, state))
            .sum();
        let pu = joint / lw;
        num += ceg.prob_all(&[&PathEvent::through([w]), target]) * pu;
        den += pu * lw;
    }
    if den <= 0.0 {
        return Err(HierarchyError::ZeroDenominator);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::super::tests::hierarchy;
    use super::*;
    use crate::shell::oracle::{Manipulation, OracleJoint};

    /// Tables on the running example; values are multiples of 1/8.
    pub(crate) fn hierarchy_model() -> GnCegModel {
        let (ceg, gn, cmap) = hierarchy();
        let v = |n: &str| gn.var(n).unwrap();
        let cpt = |u: &str, parents: &[&str], rows: &[[f64; 2]]| Cpt {
            variable: v(u),
            parents: parents.iter().map(|p| v(p)).collect(),
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        };
        let e = |w: usize, l: &str| ceg.edge_by_label(w, l).unwrap();
        let mut by_edge = BTreeMap::new();
        by_edge.insert(
            e(0, "x01"),
            vec![
                cpt("U1", &[], &[[0.25, 0.75]]),
                cpt("U3", &["U1"], &[[0.875, 0.125], [0.375, 0.625]]),
                cpt("U4", &["U3"], &[[0.75, 0.25], [0.5, 0.5]]),
            ],
        );
        by_edge.insert(
            e(0, "x02"),
            vec![
                cpt("U2", &[], &[[0.5, 0.5]]),
                cpt("U3", &["U2"], &[[0.625, 0.375], [0.125, 0.875]]),
                cpt("U4", &["U3"], &[[0.875, 0.125], [0.25, 0.75]]),
            ],
        );
        by_edge.insert(e(1, "fail"), vec![cpt("U5", &[], &[[0.25, 0.75]])]);
        by_edge.insert(e(1, "not fail"), vec![cpt("U6", &[], &[[0.5, 0.5]])]);
        by_edge.insert(e(2, "not fail"), vec![cpt("U6", &[], &[[0.75, 0.25]])]);
        by_edge.insert(e(2, "fail"), vec![cpt("U7", &[], &[[0.375, 0.625]])]);
        GnCegModel::new(ceg, gn, cmap, EmissionTables { by_edge }).unwrap()
    }

    #[test]
    fn matches_sever_oracle() {
        let m = hierarchy_model();
        let u3 = m.gn.var("U3").unwrap();
        let fail = PathEvent::through([m.ceg.sink_fail()]);
        for s in 0..2 {
            let formula = control_core_event(&m, u3, s, &fail).unwrap();
            let joint = OracleJoint::enumerate(&m, &[Manipulation::Sever(u3)], 1_000_000).unwrap();
            let oracle = joint.conditional(&m.ceg, &fail, &[(u3, s)]).unwrap();
            assert!((formula - oracle).abs() < 1e-10, "{formula} vs {oracle}");
        }
    }

    #[test]
    fn parentless_equals_conditioning_exactly() {
        let m = hierarchy_model();
        let u6 = m.gn.var("U6").unwrap();
        let w1 = PathEvent::through([1]);
        let joint = OracleJoint::enumerate(&m, &[], 1_000_000).unwrap();
        // U6 sits on edges into the not-fail sink; the target must lie downstream.
        assert!(matches!(control_core_event(&m, u6, 1, &w1), Err(HierarchyError::NotDownstream(_))));
        let u1 = m.gn.var("U1").unwrap();
        for s in 0..2 {
            let target = PathEvent::through([m.ceg.sink_fail()]);
            let formula = control_core_event(&m, u1, s, &target).unwrap();
            let plain = joint.conditional(&m.ceg, &target, &[(u1, s)]).unwrap();
            assert_eq!(formula, plain);
        }
    }

    #[test]
    fn repeated_variable_rejected() {
        let m = hierarchy_model();
        let vars = m.gn.variables().to_vec();
        let gn = GlobalNet::new(vars, BTreeSet::new()).unwrap();
        let mut sub = m.cmap.entries().clone();
        let e = m.ceg.edge_by_label(1, "fail").unwrap();
        sub.get_mut(&e).unwrap().insert(gn.var("U1").unwrap());
        let cmap = CommunityMap::new(&m.ceg, &gn, sub.clone(), BTreeSet::new()).unwrap();
        let by_edge = sub
            .iter()
            .map(|(&e, vs)| (e, vs.iter().map(|&v| Cpt { variable: v, parents: vec![], rows: vec![vec![0.5, 0.5]] }).collect()))
            .collect();
        let r = GnCegModel::new(m.ceg.clone(), gn, cmap, EmissionTables { by_edge });
        assert!(matches!(r, Err(HierarchyError::RepeatedVariable { .. })));
    }
}
