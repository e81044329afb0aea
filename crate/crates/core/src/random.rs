//! Seeded generators for random trees, layered failure CEGs, back-door
//! queries and GN-CEGs.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::ceg::{FailureCeg, PathEvent, PosIx, Target};
use crate::global_net::{CoreEventVariable, GlobalNet, VarId};
use crate::hierarchy::CommunityMap;
use crate::remedy::{check_backdoor, BackdoorQuery};
use crate::tree::{EventTree, FloretSpec, LeafCategory, ProbabilityTree};

/// Strictly positive probability vector of length `k`.
pub fn random_distribution<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// A random tree with at most `max_vertices` vertices. Florets draw from a
/// two-vector pool per arity and share edge labels, so stages and positions
/// merge often.
pub fn random_staged_tree<R: Rng>(rng: &mut R, max_vertices: usize) -> ProbabilityTree {
    let max_vertices = max_vertices.max(3);
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut open = vec![0];
    let mut count = 1;
    while let Some(pos) = (!open.is_empty()).then(|| rng.random_range(0..open.len())) {
        let v = open.swap_remove(pos);
        let k = rng.random_range(2..=3);
        if count + k > max_vertices || (count > 1 && rng.random_bool(0.3)) {
            continue;
        }
        for _ in 0..k {
            children.push(Vec::new());
            children[v].push(count);
            open.push(count);
            count += 1;
        }
    }
    let mut pool: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for k in 2..=3 {
        pool.insert(k, (0..2).map(|_| random_distribution(rng, k)).collect());
    }
    let name = |v: usize| format!("n{v}");
    let mut florets = Vec::new();
    let mut theta = BTreeMap::new();
    let mut cats = BTreeMap::new();
    for (v, ch) in children.iter().enumerate() {
        if ch.is_empty() {
            let c = if rng.random_bool(0.5) { LeafCategory::Fail } else { LeafCategory::NotFail };
            cats.insert(name(v), c);
            continue;
        }
        let edges = ch.iter().enumerate().map(|(i, &c)| (format!("e{i}"), name(c))).collect();
        florets.push(FloretSpec { vertex: name(v), edges });
        let options = &pool[&ch.len()];
        theta.insert(name(v), options[rng.random_range(0..options.len())].clone());
    }
    let tree = EventTree::new(&name(0), &florets, &cats).expect("generated tree is well formed");
    ProbabilityTree::from_named(tree, &theta).expect("generated florets fit")
}

/// A failure CEG whose internal positions sit in layers; every edge goes
/// from one layer to the next and the last layer feeds the sinks. At most
/// `max_positions` positions counting the sinks, and at least two layers.
#[derive(Debug, Clone)]
pub struct LayeredCeg {
    pub ceg: FailureCeg,
    pub layers: Vec<Vec<PosIx>>,
}

pub fn random_layered_fceg<R: Rng>(rng: &mut R, max_positions: usize) -> LayeredCeg {
    let budget = max_positions.saturating_sub(2).max(3);
    let mut sizes = vec![1];
    let mut used = 1;
    while budget - used >= 2 {
        let s = rng.random_range(2..=(budget - used).min(4));
        sizes.push(s);
        used += s;
        if sizes.len() >= 3 && rng.random_bool(0.3) {
            break;
        }
    }
    let mut layers = Vec::new();
    let mut next = 0;
    for &s in &sizes {
        layers.push((next..next + s).collect::<Vec<_>>());
        next += s;
    }
    let names = (0..next).map(|i| format!("w{i}")).collect();
    let mut edges = Vec::new();
    for (li, layer) in layers.iter().enumerate() {
        if li + 1 == layers.len() {
            for &w in layer {
                let p = random_distribution(rng, 2);
                edges.push((w, Target::Fail, "fail".to_string(), p[0]));
                edges.push((w, Target::NotFail, "not fail".to_string(), p[1]));
            }
            continue;
        }
        let below = &layers[li + 1];
        let mut targets: Vec<BTreeSet<PosIx>> = layer
            .iter()
            .map(|_| {
                let k = rng.random_range(2..=below.len().min(3));
                let mut t = BTreeSet::new();
                while t.len() < k {
                    t.insert(below[rng.random_range(0..below.len())]);
                }
                t
            })
            .collect();
        for &b in below {
            if !targets.iter().any(|t| t.contains(&b)) {
                let i = rng.random_range(0..targets.len());
                targets[i].insert(b);
            }
        }
        for (&w, t) in layer.iter().zip(&targets) {
            let p = random_distribution(rng, t.len());
            for (i, &c) in t.iter().enumerate() {
                edges.push((w, Target::Pos(c), format!("to w{c}"), p[i]));
            }
        }
    }
    let ceg = FailureCeg::from_parts(names, edges).expect("layered CEG is well formed");
    LayeredCeg { ceg, layers }
}

/// Random stochastic manipulation of a subset P of one layer; the cut is the
/// next layer and y is reaching the failure sink. The partition is the
/// deepest layer at or above P that passes the back-door checks.
pub fn random_backdoor_query<R: Rng>(rng: &mut R, lc: &LayeredCeg) -> BackdoorQuery {
    let ceg = &lc.ceg;
    let depth = lc.layers.len();
    let k = rng.random_range(0..depth - 1);
    let layer = &lc.layers[k];
    let mut p: Vec<PosIx> = layer.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    if p.is_empty() {
        p.push(layer[rng.random_range(0..layer.len())]);
    }
    let pi_star: BTreeMap<PosIx, Vec<f64>> = p.iter().map(|&w| (w, random_distribution(rng, ceg.out_edges(w).len()))).collect();
    let cut: BTreeSet<PosIx> = lc.layers[k + 1].iter().copied().collect();
    let y = PathEvent::through([ceg.sink_fail()]);
    let mut q = BackdoorQuery { pi_star, cut, y, z: vec![PathEvent::all()] };
    for j in (0..=k).rev() {
        let z: Vec<PathEvent> = lc.layers[j].iter().map(|&w| PathEvent::through([w])).collect();
        let cand = BackdoorQuery { z, ..q.clone() };
        if check_backdoor(ceg, &cand, crate::ceg::DEFAULT_PATH_CAP).is_ok() {
            q = cand;
            break;
        }
    }
    q
}

/// A small layered GN-CEG: random DAG over binary variables, each variable
/// placed on one CEG edge.
pub fn random_gn_ceg<R: Rng>(rng: &mut R) -> (FailureCeg, GlobalNet, CommunityMap) {
    let lc = random_layered_fceg(rng, 8);
    let ceg = lc.ceg;
    let n = rng.random_range(3..=8);
    let vars: Vec<CoreEventVariable> = (0..n).map(|i| CoreEventVariable::binary(&format!("U{i}"))).collect();
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.35) {
                edges.insert((a, b));
            }
        }
    }
    let gn = GlobalNet::new(vars, edges).expect("forward edges are acyclic");
    let mut sub: BTreeMap<usize, BTreeSet<VarId>> = BTreeMap::new();
    for u in 0..n {
        sub.entry(rng.random_range(0..ceg.num_edges())).or_default().insert(u);
    }
    // one edge per variable keeps the communities disjoint
    let cmap = CommunityMap::new(&ceg, &gn, sub, BTreeSet::new()).expect("disjoint communities");
    (ceg, gn, cmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t = random_staged_tree(&mut rng, 15);
            assert!(t.tree().num_vertices() <= 15);
            let lc = random_layered_fceg(&mut rng, 20);
            assert!(lc.ceg.num_positions() <= 20);
            let q = random_backdoor_query(&mut rng, &lc);
            assert!(!q.pi_star.is_empty());
        }
    }
}
