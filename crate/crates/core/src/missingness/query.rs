use std::collections::BTreeSet;

use super::{MCeg, MissingError, VertexClass};
use crate::ceg::{CegPath, EdgeIx, FailureCeg, PathEvent, PosIx};
use crate::remedy::backdoor::{check_pi_star, check_structure, determined};
use crate::remedy::{BackdoorQuery, BackdoorTerms};
use crate::tree::TOL;

fn not_identifiable(msg: impl Into<String>) -> MissingError {
    MissingError::NotIdentifiable(msg.into())
}

/// π(targets | givens), or None on a null conditioning set.
fn cond(ceg: &FailureCeg, targets: &[&PathEvent], givens: &[&PathEvent]) -> Option<f64> {
    ceg.conditional(targets, givens).ok()
}

fn agree(a: Option<f64>, b: Option<f64>, what: &str) -> Result<(), MissingError> {
    match (a, b) {
        (None, None) => Ok(()),
        (Some(x), Some(y)) if (x - y).abs() <= TOL => Ok(()),
        _ => Err(not_identifiable(format!("{what}: {a:?} vs {b:?}"))),
    }
}

/// Positions an event is stated on: listed positions plus edge heads.
fn event_positions(ceg: &FailureCeg, ev: &PathEvent) -> BTreeSet<PosIx> {
    ev.positions.iter().copied().chain(ev.edges.iter().map(|&e| ceg.edge(e).dst)).collect()
}

fn parents_of(ceg: &FailureCeg, ws: &BTreeSet<PosIx>) -> BTreeSet<PosIx> {
    ws.iter().flat_map(|&w| ceg.parents(w)).collect()
}

impl MCeg {
    /// V^M ∩ (pa(w(x)) ∪ pa(w(y)) ∪ pa(w(z))).
    fn adjustment_set(&self, wx: &BTreeSet<PosIx>, y: &PathEvent, z: &[PathEvent]) -> BTreeSet<PosIx> {
        let ceg = &self.ceg;
        let mut anchors = wx.clone();
        anchors.extend(event_positions(ceg, y));
        for zj in z {
            anchors.extend(event_positions(ceg, zj));
        }
        parents_of(ceg, &anchors).into_iter().filter(|&w| self.classes[w] == VertexClass::Missing).collect()
    }

    fn paths_where(&self, ev: &PathEvent, cap: usize) -> Result<Vec<CegPath>, MissingError> {
        Ok(self.ceg.enumerate_paths(cap)?.into_iter().filter(|p| ev.holds(&self.ceg, p)).collect())
    }
}

/// π(Λ_y || Λ_x) for a singular manipulation forcing paths along the edges
/// `x`, summed over the partition `z` among paths with no missing record at W.
pub fn m_backdoor_singular(m: &MCeg, x: &BTreeSet<EdgeIx>, y: &PathEvent, z: &[PathEvent], cap: usize) -> Result<f64, MissingError> {
    let ceg = &m.ceg;
    if x.is_empty() || x.iter().any(|&e| e >= ceg.num_edges()) {
        return Err(not_identifiable("manipulated edge set is empty or unknown"));
    }
    let wx: BTreeSet<PosIx> = x.iter().map(|&e| ceg.edge(e).dst).collect();
    let px: BTreeSet<PosIx> = x.iter().map(|&e| ceg.edge(e).src).collect();
    if px.iter().any(|&p| m.classes[p] == VertexClass::Indicator) {
        return Err(not_identifiable("manipulated floret is a missing-record indicator"));
    }
    let w = m.adjustment_set(&wx, y, z);
    let b0 = m.b_zero(&w);
    let paths = m.paths_where(&b0, cap)?;
    let pa = parents_of(ceg, &wx);
    for &p in &pa {
        let n = ceg.out_edges(p).iter().filter(|e| x.contains(e)).count();
        if n != 1 {
            return Err(not_identifiable(format!("{} has {n} manipulated edges", ceg.node(p).name)));
        }
    }
    for p in &paths {
        let hits = ceg.path_positions(p).iter().filter(|w| pa.contains(w)).count();
        if hits != 1 {
            return Err(not_identifiable(format!("path {:?} meets the manipulated florets {hits} times", ceg.path_labels(p))));
        }
        if z.iter().filter(|zj| zj.holds(ceg, p)).count() != 1 {
            return Err(not_identifiable(format!("path {:?} is not in exactly one partition block", ceg.path_labels(p))));
        }
    }
    let lx = PathEvent::along(x.iter().copied());
    for &wv in &wx {
        let name = &ceg.node(wv).name;
        if !determined(ceg, &paths, wv, y, false) {
            return Err(not_identifiable(format!("effect is not determined downstream of {name}")));
        }
        if z.iter().any(|zj| !determined(ceg, &paths, wv, zj, true)) {
            return Err(not_identifiable(format!("partition is not determined upstream of {name}")));
        }
    }
    for (j, zj) in z.iter().enumerate() {
        if ceg.prob_all(&[zj, &b0]) > 0.0 && ceg.prob_all(&[&lx, zj, &b0]) <= 0.0 {
            return Err(not_identifiable(format!("partition block {j} has no mass along the manipulated edges")));
        }
    }
    if wx.len() > 1 {
        let vals: Vec<Option<f64>> = wx.iter().map(|&wv| cond(ceg, &[y], &[&PathEvent::through([wv]), &b0])).collect();
        for v in &vals[1..] {
            agree(vals[0], *v, "effect differs across the manipulated positions")?;
        }
    }
    let all = PathEvent::all();
    for (j, zj) in z.iter().enumerate() {
        agree(cond(ceg, &[zj], &[&b0]), cond(ceg, &[zj], &[&all]), &format!("partition block {j} depends on the missing records"))?;
        agree(
            cond(ceg, &[y], &[&lx, zj, &b0]),
            cond(ceg, &[y], &[&lx, zj]),
            &format!("effect within block {j} depends on the missing records"),
        )?;
    }
    let mut out = 0.0;
    for zj in z {
        let pz = cond(ceg, &[zj], &[&b0]).ok_or_else(|| not_identifiable("no path without missing records"))?;
        if pz > 0.0 {
            out += cond(ceg, &[y], &[&lx, zj, &b0]).expect("positivity checked") * pz;
        }
    }
    Ok(out)
}

/// Back-door effect of the stochastic manipulation `q` on an M-CEG,
/// adjusting over complete cases. Every condition that lets the
/// complete-case sums stand in for the full manipulated model is checked;
/// a failing one is reported as not identifiable.
pub fn m_backdoor_remedial(m: &MCeg, q: &BackdoorQuery, cap: usize) -> Result<BackdoorTerms, MissingError> {
    let ceg = &m.ceg;
    check_pi_star(ceg, q).map_err(|e| not_identifiable(e.to_string()))?;
    let c = m.complete();
    let paths = m.paths_where(&c, cap)?;
    check_structure(ceg, q, &paths, &c).map_err(MissingError::NotIdentifiable)?;
    if let Some(&p) = q.pi_star.keys().find(|&&p| m.classes[p] == VertexClass::Indicator) {
        return Err(not_identifiable(format!("{} is a missing-record indicator", ceg.node(p).name)));
    }
    let wx = q.controlled(ceg);
    let wset = m.adjustment_set(&wx, &q.y, &q.z);
    let b0 = m.b_zero(&wset);
    let star = ceg.with_florets(&q.pi_star)?;

    for (j, z) in q.z.iter().enumerate() {
        agree(cond(ceg, &[z], &[&b0]), cond(ceg, &[z], &[&c]), &format!("block {j} differs on complete cases"))?;
    }
    for &w in &wx {
        let lw = PathEvent::through([w]);
        for (j, z) in q.z.iter().enumerate() {
            agree(
                cond(ceg, &[&q.y], &[&lw, z, &b0]),
                cond(ceg, &[&q.y], &[&lw, z, &c]),
                &format!("effect through {} in block {j} differs on complete cases", ceg.node(w).name),
            )?;
        }
        agree(
            cond(&star, &[&lw], &[&b0]),
            cond(&star, &[&lw], &[&c]),
            &format!("manipulated mass of {} differs on complete cases", ceg.node(w).name),
        )?;
    }
    let wy = event_positions(ceg, &q.y);
    let untouched: Vec<PosIx> = q.cut.difference(&wx).copied().collect();
    let mut bar_terms = Vec::new();
    for &w in &untouched {
        let lw = PathEvent::through([w]);
        let bw = m.b_zero(&[w].into_iter().collect());
        let byw = m.b_zero(&wy.iter().copied().chain([w]).collect());
        let name = &ceg.node(w).name;
        let py = cond(ceg, &[&q.y], &[&lw, &byw]);
        let pw = cond(ceg, &[&lw], &[&bw]);
        agree(py, cond(ceg, &[&q.y], &[&lw, &c]), &format!("effect through {name} differs on complete cases"))?;
        agree(pw, cond(ceg, &[&lw], &[&c]), &format!("mass of {name} differs on complete cases"))?;
        bar_terms.push((py, pw));
    }
    let (pc, pc_star) = (ceg.event_prob(&c), star.event_prob(&c));
    if (pc - pc_star).abs() > TOL {
        return Err(not_identifiable(format!("manipulation moves complete-case mass from {pc} to {pc_star}")));
    }

    let mut lambda = 0.0;
    for &w in &wx {
        let Some(mass) = cond(&star, &[&PathEvent::through([w])], &[&b0]) else { continue };
        if mass <= 0.0 {
            continue;
        }
        let lw = PathEvent::through([w]);
        let mut inner = 0.0;
        for z in &q.z {
            if let Some(pz) = cond(ceg, &[z], &[&b0]).filter(|&p| p > 0.0) {
                inner += cond(ceg, &[&q.y], &[&lw, z, &b0]).expect("positivity checked") * pz;
            }
        }
        lambda += mass * inner;
    }
    let lambda_bar = bar_terms.iter().fold(0.0, |acc, (py, pw)| acc + py.unwrap_or(0.0) * pw.unwrap_or(0.0));
    Ok(BackdoorTerms { lambda, lambda_bar, total: lambda + lambda_bar })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{example_mceg, warning_lights};
    use super::*;
    use crate::ceg::{ceg_from_ptree, DEFAULT_PATH_CAP};
    use crate::remedy::{backdoor_remedial_effect, singular_backdoor};
    use std::collections::BTreeMap;

    fn example5(m: &MCeg) -> Result<f64, MissingError> {
        let c = &m.ceg;
        let x: BTreeSet<EdgeIx> = c.edges_labelled("2 on").into_iter().collect();
        let y = PathEvent::through([c.sink_fail()]);
        let z = [PathEvent::through([1]), PathEvent::through([2])];
        m_backdoor_singular(m, &x, &y, &z, DEFAULT_PATH_CAP)
    }

    #[test]
    fn singular_matches_fact_ceg() {
        let fact = ceg_from_ptree(&warning_lights()).unwrap();
        let w = fact.resolve("w3").unwrap();
        assert_eq!(fact.node(w).members, vec!["v3".to_string(), "v5".to_string()]);
        let y = PathEvent::through([fact.sink_fail()]);
        let expect = singular_backdoor(&fact, w, &y, &[PathEvent::all()]).unwrap();
        for m in [0.0, 0.05, 0.15, 0.4, 0.95] {
            let got = example5(&example_mceg(m, m)).unwrap();
            assert!((got - expect).abs() < 1e-10, "m = {m}: {got} vs {expect}");
        }
    }

    #[test]
    fn unequal_missingness_not_identifiable() {
        assert!(matches!(example5(&example_mceg(0.1, 0.3)), Err(MissingError::NotIdentifiable(_))));
    }

    fn remedial_query(m: &MCeg) -> BackdoorQuery {
        BackdoorQuery {
            pi_star: BTreeMap::from([(0, vec![0.3, 0.7])]),
            cut: [1, 2].into_iter().collect(),
            y: PathEvent::through([m.ceg.sink_fail()]),
            z: vec![PathEvent::all()],
        }
    }

    /// Manipulated M-CEG restricted to paths with no missing record.
    fn complete_case_oracle(m: &MCeg, q: &BackdoorQuery) -> f64 {
        let star = m.ceg.with_florets(&q.pi_star).unwrap();
        let c = m.complete();
        let (mut num, mut den) = (0.0, 0.0);
        for p in star.enumerate_paths(DEFAULT_PATH_CAP).unwrap() {
            if !c.holds(&star, &p) {
                continue;
            }
            let pr = star.path_probability(&p).unwrap();
            den += pr;
            if q.y.holds(&star, &p) {
                num += pr;
            }
        }
        num / den
    }

    #[test]
    fn remedial_matches_complete_case_oracle() {
        for m in [0.05, 0.2, 0.6] {
            let mc = example_mceg(m, m);
            let q = remedial_query(&mc);
            let got = m_backdoor_remedial(&mc, &q, DEFAULT_PATH_CAP).unwrap();
            let oracle = complete_case_oracle(&mc, &q);
            assert!((got.total - oracle).abs() < 1e-10, "{got:?} vs {oracle}");
        }
    }

    #[test]
    fn remedial_without_missingness_is_fact_backdoor() {
        let mc = example_mceg(0.0, 0.0);
        let q = remedial_query(&mc);
        let got = m_backdoor_remedial(&mc, &q, DEFAULT_PATH_CAP).unwrap().total;
        let fact = ceg_from_ptree(&warning_lights()).unwrap();
        let fq = BackdoorQuery { y: PathEvent::through([fact.sink_fail()]), ..q };
        let expect = backdoor_remedial_effect(&fact, &fq, DEFAULT_PATH_CAP).unwrap().total;
        assert!((got - expect).abs() < 1e-12);
        assert!((expect - (0.3 * 0.24 + 0.7 * 0.31)).abs() < 1e-12);
    }

    #[test]
    fn remedial_unequal_missingness_rejected() {
        let mc = example_mceg(0.1, 0.4);
        let q = remedial_query(&mc);
        assert!(matches!(m_backdoor_remedial(&mc, &q, DEFAULT_PATH_CAP), Err(MissingError::NotIdentifiable(_))));
    }

    #[test]
    fn indicator_cannot_be_manipulated() {
        let mc = example_mceg(0.2, 0.2);
        let q = BackdoorQuery {
            pi_star: BTreeMap::from([(1, vec![0.5, 0.5])]),
            cut: [3, 4].into_iter().collect(),
            y: PathEvent::through([mc.ceg.sink_fail()]),
            z: vec![PathEvent::all()],
        };
        assert!(matches!(m_backdoor_remedial(&mc, &q, DEFAULT_PATH_CAP), Err(MissingError::NotIdentifiable(_))));
    }
}
