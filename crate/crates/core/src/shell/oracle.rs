//! Brute-force ground truth: every (path, core-event state) outcome with
//! its probability, after an optional manipulation.

use std::collections::BTreeMap;

use crate::ceg::{CegError, CegPath, FailureCeg, PathEvent, PosIx};
use crate::global_net::VarId;
use crate::hierarchy::GnCegModel;

#[derive(Debug, Clone, PartialEq)]
pub enum Manipulation {
    /// Replace the floret probabilities at these positions.
    Florets(BTreeMap<PosIx, Vec<f64>>),
    /// Cut the incoming GN edges of a variable, keeping its marginal per edge.
    Sever(VarId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub path: CegPath,
    pub core: BTreeMap<VarId, usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleJoint {
    pub rows: Vec<OracleRow>,
}

fn path_weight(ceg: &FailureCeg, path: &CegPath, florets: &BTreeMap<PosIx, Vec<f64>>) -> f64 {
    path.edges
        .iter()
        .map(|&e| {
            let edge = ceg.edge(e);
            match florets.get(&edge.src) {
                Some(theta) => {
                    let k = ceg.out_edges(edge.src).iter().position(|&x| x == e).expect("edge in floret");
                    theta[k]
                }
                None => edge.prob,
            }
        })
        .product()
}

fn florets_of(manips: &[Manipulation]) -> BTreeMap<PosIx, Vec<f64>> {
    let mut out = BTreeMap::new();
    for m in manips {
        if let Manipulation::Florets(f) = m {
            out.extend(f.clone());
        }
    }
    out
}

impl OracleJoint {
    /// Path outcomes only.
    pub fn paths(ceg: &FailureCeg, manips: &[Manipulation], cap: usize) -> Result<OracleJoint, CegError> {
        let florets = florets_of(manips);
        let rows = ceg
            .enumerate_paths(cap)?
            .into_iter()
            .map(|path| {
                let weight = path_weight(ceg, &path, &florets);
                OracleRow { path, core: BTreeMap::new(), weight }
            })
            .collect();
        Ok(OracleJoint { rows })
    }

    /// Paths crossed with every core-event state the emission tables allow.
    pub fn enumerate(model: &GnCegModel, manips: &[Manipulation], cap: usize) -> Result<OracleJoint, CegError> {
        let ceg = &model.ceg;
        let gn = &model.gn;
        let florets = florets_of(manips);
        let severed: Vec<VarId> = manips
            .iter()
            .filter_map(|m| if let Manipulation::Sever(u) = m { Some(*u) } else { None })
            .collect();
        let mut rows = Vec::new();
        for path in ceg.enumerate_paths(cap)? {
            let mut partial = vec![(BTreeMap::new(), path_weight(ceg, &path, &florets))];
            for &e in &path.edges {
                for u in model.emission_order(e) {
                    let cpt = model.cpt(e, u).expect("validated tables");
                    let marginal: Option<Vec<f64>> = severed.contains(&u).then(|| {
                        (0..gn.variable(u).states.len()).map(|s| model.emission_marginal(e, u, s)).collect()
                    });
                    let mut next = Vec::new();
                    for (state, p) in partial {
                        let row: &[f64] = match &marginal {
                            Some(m) => m,
                            None => &cpt.rows[cpt.row_index(gn, &state)],
                        };
                        for (s, &q) in row.iter().enumerate() {
                            let mut st: BTreeMap<VarId, usize> = state.clone();
                            st.insert(u, s);
                            next.push((st, p * q));
                        }
                    }
                    partial = next;
                    if rows.len() + partial.len() > cap {
                        return Err(CegError::PathExplosion { cap });
                    }
                }
            }
            rows.extend(partial.into_iter().map(|(core, weight)| OracleRow { path: path.clone(), core, weight }));
        }
        Ok(OracleJoint { rows })
    }

    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.weight).sum()
    }

    /// Rows satisfying `keep`, renormalised.
    pub fn restrict(&self, keep: impl Fn(&OracleRow) -> bool) -> Result<OracleJoint, CegError> {
        let kept: Vec<OracleRow> = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        let mass: f64 = kept.iter().map(|r| r.weight).sum();
        if mass <= 0.0 {
            return Err(CegError::ZeroConditioningSet);
        }
        Ok(OracleJoint { rows: kept.into_iter().map(|r| OracleRow { weight: r.weight / mass, ..r }).collect() })
    }

    pub fn mass(&self, pred: impl Fn(&OracleRow) -> bool) -> f64 {
        self.rows.iter().filter(|r| pred(r)).map(|r| r.weight).sum()
    }

    /// P(target | core states) over the table.
    pub fn conditional(&self, ceg: &FailureCeg, target: &PathEvent, given: &[(VarId, usize)]) -> Result<f64, CegError> {
        let matches = |r: &OracleRow| given.iter().all(|(u, s)| r.core.get(u) == Some(s));
        let den = self.mass(matches);
        if den <= 0.0 {
            return Err(CegError::ZeroConditioningSet);
        }
        Ok(self.mass(|r| matches(r) && target.holds(ceg, &r.path)) / den)
    }

    /// P(∩ targets | ∩ givens) for path events.
    pub fn path_conditional(&self, ceg: &FailureCeg, targets: &[&PathEvent], givens: &[&PathEvent]) -> Result<f64, CegError> {
        let g = |r: &OracleRow| givens.iter().all(|ev| ev.holds(ceg, &r.path));
        let den = self.mass(g);
        if den <= 0.0 {
            return Err(CegError::ZeroConditioningSet);
        }
        Ok(self.mass(|r| g(r) && targets.iter().all(|ev| ev.holds(ceg, &r.path))) / den)
    }

    pub fn path_marginal(&self) -> BTreeMap<CegPath, f64> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            *out.entry(r.path.clone()).or_insert(0.0) += r.weight;
        }
        out
    }
}
