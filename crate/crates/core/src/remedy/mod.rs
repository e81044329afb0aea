//! Remedial interventions: classification, intervention indicators, the
//! hyperparameter update and the stochastic manipulation it induces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ceg::{CegError, FailureCeg, PosIx};
use crate::tree::TOL;

pub(crate) mod backdoor;

pub use backdoor::{
    backdoor_remedial_effect, check_backdoor, perfect_effect, random_effect, singular_backdoor, BackdoorQuery, BackdoorTerms,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RemedyError {
    #[error("missing table: {0}")]
    MissingTable(String),
    #[error("misaligned indicator: {0}")]
    MisalignedIndicator(String),
    #[error("action weights sum to {0}")]
    WeightsNotNormalized(f64),
    #[error("invalid back-door partition: {0}")]
    InvalidPartition(String),
    #[error("bad distribution: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Ceg(#[from] CegError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemedyClass {
    Perfect,
    Imperfect,
    Uncertain,
}

/// Evidence a maintenance log gives about one remedy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RemedyEvidence {
    pub root_cause_identified: bool,
    pub root_cause_corrected: bool,
    /// Some secondary or intermediate fault was remedied.
    pub recovery_observed: bool,
}

pub fn classify_remedy(ev: &RemedyEvidence) -> RemedyClass {
    if ev.root_cause_identified && ev.root_cause_corrected {
        RemedyClass::Perfect
    } else if ev.recovery_observed {
        RemedyClass::Imperfect
    } else {
        RemedyClass::Uncertain
    }
}

/// Distribution over intervention indicators, keyed by bit strings with one
/// bit per root-cause position.
pub type IndicatorDist = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RemedyRecord {
    pub r: String,
    /// Root-cause positions, in indicator bit order.
    pub root_causes: Vec<String>,
    pub q: f64,
    /// p(I | r, δ=1)
    pub perfect: IndicatorDist,
    /// p(I | r, a)
    pub by_action: BTreeMap<String, IndicatorDist>,
    /// p(a | λ, r, δ=0)
    pub action_given_path: BTreeMap<String, BTreeMap<String, f64>>,
    /// p(λ | r, δ=0)
    pub path_prior: BTreeMap<String, f64>,
    /// Recovery edges taken after the repair, kept as metadata only.
    pub recovery: Vec<String>,
    pub evidence: Option<RemedyEvidence>,
}

fn check_bits(d: &IndicatorDist, n: usize, what: &str) -> Result<(), RemedyError> {
    for k in d.keys() {
        if k.len() != n || !k.chars().all(|c| c == '0' || c == '1') {
            return Err(RemedyError::MisalignedIndicator(format!("{what}: `{k}` is not a {n}-bit indicator")));
        }
    }
    check_dist(d.values().copied(), what)
}

fn check_dist(values: impl Iterator<Item = f64>, what: &str) -> Result<(), RemedyError> {
    let mut s = 0.0;
    for v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(RemedyError::BadDistribution(format!("{what}: value {v}")));
        }
        s += v;
    }
    if (s - 1.0).abs() > TOL {
        return Err(RemedyError::BadDistribution(format!("{what}: sums to {s}")));
    }
    Ok(())
}

/// p(I | r) = q p(I | r, δ=1) + (1 - q) p(I | r, δ=0), the second branch
/// being the normalised sum over actions and paths.
pub fn indicator_distribution(rec: &RemedyRecord) -> Result<IndicatorDist, RemedyError> {
    let n = rec.root_causes.len();
    if !(0.0..=1.0).contains(&rec.q) {
        return Err(RemedyError::BadDistribution(format!("q = {}", rec.q)));
    }
    let mut out: IndicatorDist = BTreeMap::new();
    if rec.q > 0.0 {
        if rec.perfect.is_empty() {
            return Err(RemedyError::MissingTable("p(I | r, delta=1)".into()));
        }
        check_bits(&rec.perfect, n, "p(I | r, delta=1)")?;
        for (k, &p) in &rec.perfect {
            *out.entry(k.clone()).or_default() += rec.q * p;
        }
    }
    if rec.q < 1.0 {
        let branch = delta_zero_branch(rec)?;
        for (k, p) in branch {
            *out.entry(k).or_default() += (1.0 - rec.q) * p;
        }
    }
    Ok(out)
}

fn delta_zero_branch(rec: &RemedyRecord) -> Result<IndicatorDist, RemedyError> {
    let n = rec.root_causes.len();
    if rec.path_prior.is_empty() {
        return Err(RemedyError::MissingTable("p(lambda | r, delta=0)".into()));
    }
    check_dist(rec.path_prior.values().copied(), "p(lambda | r, delta=0)")?;
    let mut acc: IndicatorDist = BTreeMap::new();
    for (lambda, &pl) in &rec.path_prior {
        let actions = rec
            .action_given_path
            .get(lambda)
            .ok_or_else(|| RemedyError::MissingTable(format!("p(a | {lambda}, r, delta=0)")))?;
        check_dist(actions.values().copied(), &format!("p(a | {lambda})"))?;
        for (a, &pa) in actions {
            let ind = rec.by_action.get(a).ok_or_else(|| RemedyError::MissingTable(format!("p(I | r, {a})")))?;
            check_bits(ind, n, &format!("p(I | r, {a})"))?;
            for (k, &pi) in ind {
                *acc.entry(k.clone()).or_default() += pi * pa * pl;
            }
        }
    }
    let z: f64 = acc.values().sum();
    if z <= 0.0 {
        return Err(RemedyError::BadDistribution("delta=0 branch has no mass".into()));
    }
    Ok(acc.into_iter().map(|(k, v)| (k, v / z)).collect())
}

/// Dirichlet-role hyperparameters of one floret. `alignment[k]` names the
/// indicator bit of component k when its edge enters a root-cause position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloretPrior {
    pub alpha: Vec<f64>,
    pub omega: f64,
    pub alignment: Vec<Option<usize>>,
}

/// α̂ = α + ω(1 - I) on aligned components.
pub fn kappa(prior: &FloretPrior, indicator: &[u8]) -> Result<Vec<f64>, RemedyError> {
    if prior.omega <= 0.0 || !prior.omega.is_finite() {
        return Err(RemedyError::MisalignedIndicator(format!("omega = {} must be positive", prior.omega)));
    }
    if prior.alignment.len() != prior.alpha.len() {
        return Err(RemedyError::MisalignedIndicator(format!(
            "{} alignment entries for {} components",
            prior.alignment.len(),
            prior.alpha.len()
        )));
    }
    if let Some(&a) = prior.alpha.iter().find(|&&a| a <= 0.0 || !a.is_finite()) {
        return Err(RemedyError::MisalignedIndicator(format!("alpha component {a} must be positive")));
    }
    if let Some(&b) = indicator.iter().find(|&&b| b > 1) {
        return Err(RemedyError::MisalignedIndicator(format!("indicator bit {b}")));
    }
    prior
        .alpha
        .iter()
        .zip(&prior.alignment)
        .map(|(&a, al)| match al {
            None => Ok(a),
            Some(i) => indicator
                .get(*i)
                .map(|&bit| a + prior.omega * (1.0 - bit as f64))
                .ok_or_else(|| RemedyError::MisalignedIndicator(format!("no indicator bit {i}"))),
        })
        .collect()
}

/// Parses a bit string such as "10".
pub fn parse_bits(s: &str) -> Result<Vec<u8>, RemedyError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(RemedyError::MisalignedIndicator(format!("`{s}` is not a bit string"))),
        })
        .collect()
}

/// Z_r: the CEG with florets at the prior positions set to posterior
/// means of the updated hyperparameters. Topology is unchanged; stages are
/// recomputed.
pub fn apply_zr(
    ceg: &FailureCeg,
    priors: &BTreeMap<PosIx, FloretPrior>,
    indicator: &[u8],
) -> Result<(FailureCeg, BTreeMap<PosIx, Vec<f64>>), RemedyError> {
    let mut florets = BTreeMap::new();
    for (&w, prior) in priors {
        let hat = kappa(prior, indicator)?;
        if ceg.is_sink(w) || w >= ceg.num_positions() || hat.len() != ceg.out_edges(w).len() {
            return Err(RemedyError::MisalignedIndicator(format!("prior does not fit position #{w}")));
        }
        let s: f64 = hat.iter().sum();
        florets.insert(w, hat.iter().map(|a| a / s).collect());
    }
    let out = ceg.with_florets(&florets)?;
    Ok((out, florets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(pairs: &[(&str, f64)]) -> IndicatorDist {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn record(q: f64) -> RemedyRecord {
        RemedyRecord {
            r: "replace bushing".into(),
            root_causes: vec!["w1".into(), "w2".into()],
            q,
            perfect: bits(&[("11", 1.0)]),
            by_action: [
                ("a1".to_string(), bits(&[("10", 0.5), ("00", 0.5)])),
                ("a2".to_string(), bits(&[("01", 0.25), ("11", 0.75)])),
            ]
            .into_iter()
            .collect(),
            action_given_path: [
                ("l1".to_string(), [("a1".to_string(), 1.0)].into_iter().collect()),
                ("l2".to_string(), [("a1".to_string(), 0.5), ("a2".to_string(), 0.5)].into_iter().collect()),
            ]
            .into_iter()
            .collect(),
            path_prior: [("l1".to_string(), 0.5), ("l2".to_string(), 0.5)].into_iter().collect(),
            ..Default::default()
        }
    }

    #[test]
    fn classification() {
        let ev = |i, c, r| RemedyEvidence { root_cause_identified: i, root_cause_corrected: c, recovery_observed: r };
        assert_eq!(classify_remedy(&ev(true, true, false)), RemedyClass::Perfect);
        assert_eq!(classify_remedy(&ev(true, false, true)), RemedyClass::Imperfect);
        assert_eq!(classify_remedy(&ev(false, false, false)), RemedyClass::Uncertain);
    }

    #[test]
    fn mixture_endpoints_and_blend() {
        assert_eq!(indicator_distribution(&record(1.0)).unwrap(), bits(&[("11", 1.0)]));
        // δ=0: p(a1) = 0.5 + 0.25 = 0.75, p(a2) = 0.25
        let zero = indicator_distribution(&record(0.0)).unwrap();
        let want = bits(&[("10", 0.375), ("00", 0.375), ("01", 0.0625), ("11", 0.1875)]);
        for (k, v) in &want {
            assert!((zero[k] - v).abs() < 1e-12, "{k}");
        }
        let half = indicator_distribution(&record(0.5)).unwrap();
        assert!((half["11"] - (0.5 + 0.5 * 0.1875)).abs() < 1e-12);
        assert!((half.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_missing_table() {
        let mut r = record(0.3);
        r.by_action.remove("a2");
        assert!(matches!(indicator_distribution(&r), Err(RemedyError::MissingTable(_))));
    }

    #[test]
    fn kappa_examples() {
        let p = FloretPrior { alpha: vec![2.0, 3.0], omega: 5.0, alignment: vec![Some(0), Some(1)] };
        assert_eq!(kappa(&p, &[1, 0]).unwrap(), vec![2.0, 8.0]);
        assert_eq!(kappa(&p, &[1, 1]).unwrap(), vec![2.0, 3.0]);
        let bad = FloretPrior { omega: 0.0, ..p.clone() };
        assert!(matches!(kappa(&bad, &[1, 0]), Err(RemedyError::MisalignedIndicator(_))));
        assert!(matches!(kappa(&p, &[1]), Err(RemedyError::MisalignedIndicator(_))));
        let partial = FloretPrior { alpha: vec![2.0, 3.0], omega: 5.0, alignment: vec![None, Some(0)] };
        assert_eq!(kappa(&partial, &[0]).unwrap(), vec![2.0, 8.0]);
    }

    #[test]
    fn zr_posterior_mean() {
        use crate::ceg::Target;
        let ceg = FailureCeg::from_parts(
            vec!["w0".into()],
            vec![(0, Target::Fail, "a".into(), 0.5), (0, Target::NotFail, "b".into(), 0.5)],
        )
        .unwrap();
        let p = FloretPrior { alpha: vec![2.0, 3.0], omega: 5.0, alignment: vec![Some(0), Some(1)] };
        let (out, florets) = apply_zr(&ceg, &[(0, p)].into_iter().collect(), &[1, 0]).unwrap();
        assert_eq!(florets[&0], vec![0.2, 0.8]);
        assert_eq!(out.floret_probs(0), vec![0.2, 0.8]);
        assert_eq!(out.topology_fingerprint(), ceg.topology_fingerprint());
    }
}
