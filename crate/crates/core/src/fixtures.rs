//! Example models shipped with the crate: the bushing staged tree, the
//! warning-lights missingness model, the two-floret GN-CEG with emission
//! tables, the bushing global net and a small extraction rule set.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use crate::extraction::Omega;
use crate::global_net::{CoreEventVariable, CountTable, EdgeConstraints, GlobalNet, ScoreConfig, VarId};
use crate::shell::{parse_bundle, ModelBundle, Prob};

pub const BUSHING_JSON: &str = include_str!("../fixtures/bushing.json");
pub const BUSHING_GOLDEN_JSON: &str = include_str!("../fixtures/bushing_golden.json");
pub const WARNING_LIGHTS_JSON: &str = include_str!("../fixtures/warning_lights.json");
pub const HIERARCHY_JSON: &str = include_str!("../fixtures/hierarchy.json");
pub const BUSHING_NET_JSON: &str = include_str!("../fixtures/bushing_net.json");
pub const OMEGA_JSON: &str = include_str!("../fixtures/omega.json");

pub const MOTIVATING_LOG: &str = "the seal deterioration caused oil leak in the conservator - topping up oil";

pub fn bushing() -> ModelBundle {
    parse_bundle(BUSHING_JSON).expect("bushing fixture parses")
}

pub fn warning_lights() -> ModelBundle {
    parse_bundle(WARNING_LIGHTS_JSON).expect("warning-lights fixture parses")
}

pub fn hierarchy() -> ModelBundle {
    parse_bundle(HIERARCHY_JSON).expect("GN-CEG fixture parses")
}

pub fn omega() -> Omega {
    serde_json::from_str(OMEGA_JSON).expect("rule fixture parses")
}

/// Expected bushing CEG: each position by one tree vertex it contains,
/// and its labelled edges.
#[derive(Debug, Clone, Deserialize)]
pub struct CegGolden {
    pub representatives: BTreeMap<String, String>,
    pub same_position: Vec<Vec<String>>,
    pub edges: Vec<(String, String, String)>,
}

pub fn bushing_golden() -> CegGolden {
    serde_json::from_str(BUSHING_GOLDEN_JSON).expect("golden adjacency parses")
}

#[derive(Debug, Deserialize)]
struct BushingNetDoc {
    sample_size: f64,
    variables: Vec<CoreEventVariable>,
    extracted_bn: Vec<(String, String)>,
    tables: Vec<TableDoc>,
    required: Vec<(String, String)>,
    forbidden: Vec<(String, String)>,
    non_causal: Vec<(String, String)>,
}

#[derive(Debug, Deserialize)]
struct TableDoc {
    variable: String,
    parents: Vec<String>,
    rows: Vec<Vec<Prob>>,
}

/// Bushing net with exact expected counts from its tables.
#[derive(Debug, Clone)]
pub struct BushingNet {
    pub variables: Vec<CoreEventVariable>,
    /// The net the tables were drawn from.
    pub extracted: GlobalNet,
    pub counts: CountTable,
    pub constraints: EdgeConstraints,
    pub config: ScoreConfig,
}

pub fn bushing_net() -> BushingNet {
    let doc: BushingNetDoc = serde_json::from_str(BUSHING_NET_JSON).expect("net fixture parses");
    let ix: BTreeMap<&str, VarId> = doc.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let pairs = |es: &[(String, String)]| -> BTreeSet<(VarId, VarId)> { es.iter().map(|(a, b)| (ix[a.as_str()], ix[b.as_str()])).collect() };
    let extracted = GlobalNet::new(doc.variables.clone(), pairs(&doc.extracted_bn)).expect("acyclic fixture net");
    let arity: Vec<usize> = doc.variables.iter().map(|v| v.states.len()).collect();
    let mut rows = Vec::new();
    let total: usize = arity.iter().product();
    for mut code in 0..total {
        let mut state = vec![0; arity.len()];
        for (s, &r) in state.iter_mut().zip(&arity).rev() {
            *s = code % r;
            code /= r;
        }
        let p: f64 = doc
            .tables
            .iter()
            .map(|t| {
                let row = t.parents.iter().fold(0, |acc, p| acc * arity[ix[p.as_str()]] + state[ix[p.as_str()]]);
                t.rows[row][state[ix[t.variable.as_str()]]].0
            })
            .product();
        rows.push((state, doc.sample_size * p));
    }
    BushingNet {
        variables: doc.variables.clone(),
        extracted,
        counts: CountTable { rows },
        constraints: EdgeConstraints { required: pairs(&doc.required), forbidden: pairs(&doc.forbidden) },
        config: ScoreConfig { non_causal: pairs(&doc.non_causal), ..ScoreConfig::default() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_resolve() {
        for b in [bushing(), warning_lights(), hierarchy()] {
            b.resolve().unwrap();
        }
        assert!(hierarchy().resolve().unwrap().gn_ceg().is_some());
        let f = bushing_net();
        assert!((f.counts.total() - 4f64.powi(9)).abs() < 1e-6);
        assert!(f.counts.rows.iter().all(|(_, c)| c.fract() == 0.0));
    }
}
