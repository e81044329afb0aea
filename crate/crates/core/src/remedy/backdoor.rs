use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{apply_zr, FloretPrior, RemedyError};
use crate::ceg::{CegPath, EdgeIx, FailureCeg, PathEvent, PosIx};
use crate::tree::TOL;

/// A stochastic manipulation of the florets in `pi_star` and the effect
/// query evaluated through a back-door partition.
#[derive(Debug, Clone, PartialEq)]
pub struct BackdoorQuery {
    /// Post-intervention floret distributions, keyed by the intervened positions.
    pub pi_star: BTreeMap<PosIx, Vec<f64>>,
    /// Root-cause positions: a cut containing every child of an intervened position.
    pub cut: BTreeSet<PosIx>,
    pub y: PathEvent,
    /// Back-door partition of the paths.
    pub z: Vec<PathEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackdoorTerms {
    pub lambda: f64,
    pub lambda_bar: f64,
    pub total: f64,
}

impl BackdoorQuery {
    pub fn intervened(&self) -> BTreeSet<PosIx> {
        self.pi_star.keys().copied().collect()
    }

    /// w(x): children of the intervened positions.
    pub fn controlled(&self, ceg: &FailureCeg) -> BTreeSet<PosIx> {
        self.pi_star.keys().flat_map(|&p| ceg.children(p)).collect()
    }
}

fn split_at(ceg: &FailureCeg, path: &CegPath, w: PosIx) -> Option<(Vec<EdgeIx>, Vec<EdgeIx>)> {
    if w == ceg.root() {
        return Some((Vec::new(), path.edges.clone()));
    }
    let k = path.edges.iter().position(|&e| ceg.edge(e).dst == w)?;
    Some((path.edges[..=k].to_vec(), path.edges[k + 1..].to_vec()))
}

/// Whether `ev` restricted to paths through `w` depends only on the part
/// of the path before `w` (`upstream`) or only on the part after it.
pub(crate) fn determined(ceg: &FailureCeg, paths: &[CegPath], w: PosIx, ev: &PathEvent, upstream: bool) -> bool {
    let mut seen: BTreeMap<Vec<EdgeIx>, bool> = BTreeMap::new();
    for p in paths {
        if let Some((pre, post)) = split_at(ceg, p, w) {
            let key = if upstream { pre } else { post };
            let h = ev.holds(ceg, p);
            if *seen.entry(key).or_insert(h) != h {
                return false;
            }
        }
    }
    true
}

pub(crate) fn pi_star_mass(ceg: &FailureCeg, q: &BackdoorQuery, w: PosIx) -> f64 {
    ceg.in_edges(w)
        .iter()
        .map(|&e| {
            let src = ceg.edge(e).src;
            let theta = match q.pi_star.get(&src) {
                Some(v) => v[ceg.out_edges(src).iter().position(|&x| x == e).expect("edge in floret")],
                None => ceg.edge(e).prob,
            };
            ceg.event_probability(src) * theta
        })
        .sum()
}

pub(crate) fn check_pi_star(ceg: &FailureCeg, q: &BackdoorQuery) -> Result<(), RemedyError> {
    for (&p, v) in &q.pi_star {
        if p >= ceg.num_positions() || ceg.is_sink(p) {
            return Err(RemedyError::InvalidPartition(format!("intervened position #{p} is not internal")));
        }
        let name = &ceg.node(p).name;
        if v.len() != ceg.out_edges(p).len() {
            return Err(RemedyError::BadDistribution(format!("pi* at {name} has {} entries", v.len())));
        }
        let s: f64 = v.iter().sum();
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) || (s - 1.0).abs() > TOL {
            return Err(RemedyError::BadDistribution(format!("pi* at {name} is not a distribution")));
        }
    }
    Ok(())
}

/// Cut, partition, determination and positivity conditions over `paths`,
/// with masses taken jointly with `given`.
pub(crate) fn check_structure(ceg: &FailureCeg, q: &BackdoorQuery, paths: &[CegPath], given: &PathEvent) -> Result<(), String> {
    if q.cut.iter().any(|&w| w >= ceg.num_positions()) {
        return Err("cut names an unknown position".into());
    }
    let wx = q.controlled(ceg);
    if let Some(&w) = wx.difference(&q.cut).next() {
        return Err(format!("child {} of an intervened position is outside the root-cause cut", ceg.node(w).name));
    }
    for p in paths {
        let hits = ceg.path_positions(p).iter().filter(|w| q.cut.contains(w)).count();
        if hits != 1 {
            return Err(format!("path {:?} meets the root-cause cut {hits} times", ceg.path_labels(p)));
        }
        let zs = q.z.iter().filter(|z| z.holds(ceg, p)).count();
        if zs != 1 {
            return Err(format!("path {:?} lies in {zs} partition blocks", ceg.path_labels(p)));
        }
    }
    for &w in &wx {
        let name = &ceg.node(w).name;
        if !determined(ceg, paths, w, &q.y, false) {
            return Err(format!("effect is not determined downstream of {name}"));
        }
        for (j, z) in q.z.iter().enumerate() {
            if !determined(ceg, paths, w, z, true) {
                return Err(format!("partition block {j} is not determined upstream of {name}"));
            }
        }
        if pi_star_mass(ceg, q, w) <= 0.0 {
            continue;
        }
        let lw = PathEvent::through([w]);
        for (j, z) in q.z.iter().enumerate() {
            if ceg.prob_all(&[z, given]) > 0.0 && ceg.prob_all(&[&lw, z, given]) <= 0.0 {
                return Err(format!("partition block {j} has no mass through {name}"));
            }
        }
    }
    Ok(())
}

/// Structural and positivity checks that make the back-door sums exact.
pub fn check_backdoor(ceg: &FailureCeg, q: &BackdoorQuery, cap: usize) -> Result<(), RemedyError> {
    check_pi_star(ceg, q)?;
    let paths = ceg.enumerate_paths(cap)?;
    check_structure(ceg, q, &paths, &PathEvent::all()).map_err(RemedyError::InvalidPartition)
}

/// π(Λ_y || π*) as the sum of the intervened and untouched components.
pub fn backdoor_remedial_effect(ceg: &FailureCeg, q: &BackdoorQuery, cap: usize) -> Result<BackdoorTerms, RemedyError> {
    check_backdoor(ceg, q, cap)?;
    let wx = q.controlled(ceg);
    let mut lambda = 0.0;
    for &w in &wx {
        let star = pi_star_mass(ceg, q, w);
        if star <= 0.0 {
            continue;
        }
        let lw = PathEvent::through([w]);
        let mut inner = 0.0;
        for z in &q.z {
            let pz = ceg.event_prob(z);
            if pz > 0.0 {
                inner += ceg.conditional(&[&q.y], &[&lw, z])? * pz;
            }
        }
        lambda += inner * star;
    }
    let lambda_bar: f64 = q
        .cut
        .difference(&wx)
        .map(|&w| ceg.prob_all(&[&q.y, &PathEvent::through([w])]))
        .fold(0.0, |a, b| a + b);
    Ok(BackdoorTerms { lambda, lambda_bar, total: lambda + lambda_bar })
}

/// Σ_z π(Λ_y | Λ_x, Λ_z) π(Λ_z) for a manipulation forcing every path through `x`.
pub fn singular_backdoor(ceg: &FailureCeg, x: PosIx, y: &PathEvent, z: &[PathEvent]) -> Result<f64, RemedyError> {
    let lx = PathEvent::through([x]);
    let mut out = 0.0;
    for zj in z {
        let pz = ceg.event_prob(zj);
        if pz > 0.0 {
            out += ceg.conditional(&[y], &[&lx, zj])? * pz;
        }
    }
    Ok(out)
}

/// Effect of a perfect remedy: π* from the updated priors, then the back-door sums.
pub fn perfect_effect(
    ceg: &FailureCeg,
    priors: &BTreeMap<PosIx, FloretPrior>,
    indicator: &[u8],
    cut: BTreeSet<PosIx>,
    y: PathEvent,
    z: Vec<PathEvent>,
    cap: usize,
) -> Result<f64, RemedyError> {
    let (_, pi_star) = apply_zr(ceg, priors, indicator)?;
    Ok(backdoor_remedial_effect(ceg, &BackdoorQuery { pi_star, cut, y, z }, cap)?.total)
}

/// Σ_a p(a | r) times the back-door effect of action a.
pub fn random_effect(ceg: &FailureCeg, actions: &[(f64, BackdoorQuery)], cap: usize) -> Result<f64, RemedyError> {
    let s: f64 = actions.iter().map(|a| a.0).sum();
    if (s - 1.0).abs() > TOL || actions.iter().any(|a| a.0 < 0.0) {
        return Err(RemedyError::WeightsNotNormalized(s));
    }
    let mut out = 0.0;
    for (p, q) in actions {
        out += p * backdoor_remedial_effect(ceg, q, cap)?.total;
    }
    Ok(out)
}
