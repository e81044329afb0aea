//! Query documents for the back-door, control and missingness formulas, and
//! the oracle computation each one is checked against.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bundle::{EdgeRef, Model, Prob, SchemaError};
use super::oracle::{Manipulation, OracleJoint};
use crate::ceg::{CegError, EdgeIx, FailureCeg, PathEvent, PosIx};
use crate::hierarchy::{control_core_event, HierarchyError};
use crate::missingness::{m_backdoor_remedial, m_backdoor_singular, MissingError};
use crate::remedy::{backdoor_remedial_effect, singular_backdoor, BackdoorQuery, RemedyError};

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("{0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Ceg(#[from] CegError),
    #[error(transparent)]
    Remedy(#[from] RemedyError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Missing(#[from] MissingError),
    #[error("{0}")]
    Unsupported(String),
}

impl QueryError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Schema(_) => "schema",
            QueryError::Ceg(_) => "ceg",
            QueryError::Remedy(_) => "remedy",
            QueryError::Hierarchy(_) => "hierarchy",
            QueryError::Missing(MissingError::NotIdentifiable(_)) => "not_identifiable",
            QueryError::Missing(_) => "missingness",
            QueryError::Unsupported(_) => "unsupported",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Backdoor,
    Control,
    Mceg,
}

/// A set of paths: a bare position name, or positions and edges any of
/// which the path must meet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EventDoc {
    Position(String),
    Set {
        #[serde(default)]
        positions: Vec<String>,
        #[serde(default)]
        edges: Vec<EdgeRef>,
        #[serde(default)]
        negated: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryDoc {
    /// Remedial manipulation: position name to new floret.
    #[serde(default)]
    pub pi_star: BTreeMap<String, Vec<Prob>>,
    #[serde(default)]
    pub cut: Vec<String>,
    /// Singular manipulation by position (fact CEG) or by edges (M-CEG).
    #[serde(default)]
    pub x_position: Option<String>,
    #[serde(default)]
    pub x: Vec<EdgeRef>,
    /// Defaults to reaching the failure sink.
    #[serde(default)]
    pub y: Option<EventDoc>,
    /// Defaults to the single sure event.
    #[serde(default)]
    pub z: Vec<EventDoc>,
    #[serde(default)]
    pub variable: Option<String>,
    #[serde(default)]
    pub state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryAnswer {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_bar: Option<f64>,
}

impl QueryAnswer {
    fn plain(value: f64) -> Self {
        QueryAnswer { value, lambda: None, lambda_bar: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub kind: QueryKind,
    pub formula: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn position(ceg: &FailureCeg, ptr: &str, name: &str) -> Result<PosIx, SchemaError> {
    ceg.resolve(name).map_err(|e| SchemaError::at(ptr, e))
}

fn edge(ceg: &FailureCeg, ptr: &str, r: &EdgeRef) -> Result<EdgeIx, SchemaError> {
    let w = position(ceg, &format!("{ptr}/position"), &r.position)?;
    ceg.edge_by_label(w, &r.label).map_err(|e| SchemaError::at(format!("{ptr}/label"), e))
}

impl EventDoc {
    pub fn resolve(&self, ceg: &FailureCeg, ptr: &str) -> Result<PathEvent, SchemaError> {
        match self {
            EventDoc::Position(name) => Ok(PathEvent::through([position(ceg, ptr, name)?])),
            EventDoc::Set { positions, edges, negated } => {
                let mut ev = PathEvent::default();
                for (i, p) in positions.iter().enumerate() {
                    ev.positions.insert(position(ceg, &format!("{ptr}/positions/{i}"), p)?);
                }
                for (i, r) in edges.iter().enumerate() {
                    ev.edges.insert(edge(ceg, &format!("{ptr}/edges/{i}"), r)?);
                }
                ev.negated = *negated;
                Ok(ev)
            }
        }
    }
}

impl QueryDoc {
    pub fn y(&self, ceg: &FailureCeg) -> Result<PathEvent, SchemaError> {
        match &self.y {
            Some(doc) => doc.resolve(ceg, "/y"),
            None => Ok(PathEvent::through([ceg.sink_fail()])),
        }
    }

    pub fn z(&self, ceg: &FailureCeg) -> Result<Vec<PathEvent>, SchemaError> {
        if self.z.is_empty() {
            return Ok(vec![PathEvent::all()]);
        }
        self.z.iter().enumerate().map(|(i, d)| d.resolve(ceg, &format!("/z/{i}"))).collect()
    }

    pub fn x_edges(&self, ceg: &FailureCeg) -> Result<BTreeSet<EdgeIx>, SchemaError> {
        let mut out: BTreeSet<EdgeIx> = self.x.iter().enumerate().map(|(i, r)| edge(ceg, &format!("/x/{i}"), r)).collect::<Result<_, _>>()?;
        if let Some(name) = &self.x_position {
            out.extend(ceg.in_edges(position(ceg, "/x_position", name)?).iter().copied());
        }
        Ok(out)
    }

    pub fn backdoor_query(&self, ceg: &FailureCeg) -> Result<BackdoorQuery, SchemaError> {
        let mut pi_star = BTreeMap::new();
        for (name, probs) in &self.pi_star {
            let ptr = format!("/pi_star/{name}");
            pi_star.insert(position(ceg, &ptr, name)?, probs.iter().map(|p| p.0).collect());
        }
        let cut = self.cut.iter().enumerate().map(|(i, n)| position(ceg, &format!("/cut/{i}"), n)).collect::<Result<_, _>>()?;
        Ok(BackdoorQuery { pi_star, cut, y: self.y(ceg)?, z: self.z(ceg)? })
    }

    fn is_remedial(&self) -> bool {
        !self.pi_star.is_empty()
    }
}

fn missing_model(model: &Model) -> Result<&crate::missingness::MCeg, QueryError> {
    model
        .missing
        .as_ref()
        .map(|m| &m.mceg)
        .ok_or_else(|| QueryError::Schema(SchemaError::at("/missingness", "the bundle has no missingness section")))
}

fn control_args(model: &Model, q: &QueryDoc) -> Result<(crate::hierarchy::GnCegModel, usize, usize, PathEvent), QueryError> {
    let m = model
        .gn_ceg()
        .ok_or_else(|| QueryError::Schema(SchemaError::at("/tables", "control needs global_net, community_map and tables")))?;
    let var = q.variable.as_deref().ok_or_else(|| SchemaError::at("/variable", "missing"))?;
    let state = q.state.as_deref().ok_or_else(|| SchemaError::at("/state", "missing"))?;
    let (u, s) = m.resolve_state(var, state)?;
    let y = q.y(&m.ceg)?;
    Ok((m, u, s, y))
}

/// The identification formula for the query.
pub fn evaluate(model: &Model, kind: QueryKind, q: &QueryDoc, cap: usize) -> Result<QueryAnswer, QueryError> {
    match kind {
        QueryKind::Backdoor => {
            let ceg = &model.ceg;
            if q.is_remedial() {
                let t = backdoor_remedial_effect(ceg, &q.backdoor_query(ceg)?, cap)?;
                return Ok(QueryAnswer { value: t.total, lambda: Some(t.lambda), lambda_bar: Some(t.lambda_bar) });
            }
            let name = q.x_position.as_deref().ok_or_else(|| SchemaError::at("/x_position", "need pi_star or x_position"))?;
            let x = position(ceg, "/x_position", name)?;
            Ok(QueryAnswer::plain(singular_backdoor(ceg, x, &q.y(ceg)?, &q.z(ceg)?)?))
        }
        QueryKind::Control => {
            let (m, u, s, y) = control_args(model, q)?;
            Ok(QueryAnswer::plain(control_core_event(&m, u, s, &y)?))
        }
        QueryKind::Mceg => {
            let mc = missing_model(model)?;
            let ceg = &mc.ceg;
            if q.is_remedial() {
                let t = m_backdoor_remedial(mc, &q.backdoor_query(ceg)?, cap)?;
                return Ok(QueryAnswer { value: t.total, lambda: Some(t.lambda), lambda_bar: Some(t.lambda_bar) });
            }
            let x = q.x_edges(ceg)?;
            if x.is_empty() {
                return Err(SchemaError::at("/x", "need pi_star or x").into());
            }
            Ok(QueryAnswer::plain(m_backdoor_singular(mc, &x, &q.y(ceg)?, &q.z(ceg)?, cap)?))
        }
    }
}

/// Florets that send every path reaching a tail of `x` along `x`, keeping
/// the relative weights of parallel `x` edges.
fn forcing(ceg: &FailureCeg, x: &BTreeSet<EdgeIx>) -> BTreeMap<PosIx, Vec<f64>> {
    let tails: BTreeSet<PosIx> = x.iter().map(|&e| ceg.edge(e).src).collect();
    tails
        .into_iter()
        .map(|w| {
            let out = ceg.out_edges(w);
            let mass: f64 = out.iter().filter(|e| x.contains(e)).map(|&e| ceg.edge(e).prob).sum();
            let theta = out
                .iter()
                .map(|e| match x.contains(e) {
                    true if mass > 0.0 => ceg.edge(*e).prob / mass,
                    true => 1.0 / out.iter().filter(|e| x.contains(e)).count() as f64,
                    false => 0.0,
                })
                .collect();
            (w, theta)
        })
        .collect()
}

fn forced_value(ceg: &FailureCeg, x: &BTreeSet<EdgeIx>, y: &PathEvent, given: &PathEvent, cap: usize) -> Result<f64, QueryError> {
    let joint = OracleJoint::paths(ceg, &[Manipulation::Florets(forcing(ceg, x))], cap)?;
    let hit = PathEvent::along(x.iter().copied());
    Ok(joint.path_conditional(ceg, &[y], &[&hit, given])?)
}

/// The same quantity by exhaustive enumeration of the manipulated model.
pub fn oracle(model: &Model, kind: QueryKind, q: &QueryDoc, cap: usize) -> Result<f64, QueryError> {
    match kind {
        QueryKind::Backdoor => {
            let ceg = &model.ceg;
            let y = q.y(ceg)?;
            if q.is_remedial() {
                let bq = q.backdoor_query(ceg)?;
                let joint = OracleJoint::paths(ceg, &[Manipulation::Florets(bq.pi_star)], cap)?;
                return Ok(joint.mass(|r| y.holds(ceg, &r.path)));
            }
            let x = q.x_edges(ceg)?;
            forced_value(ceg, &x, &y, &PathEvent::all(), cap)
        }
        QueryKind::Control => {
            let (m, u, s, y) = control_args(model, q)?;
            let joint = OracleJoint::enumerate(&m, &[Manipulation::Sever(u)], cap)?;
            Ok(joint.conditional(&m.ceg, &y, &[(u, s)])?)
        }
        QueryKind::Mceg => {
            let mc = missing_model(model)?;
            let ceg = &mc.ceg;
            let y = q.y(ceg)?;
            let complete = mc.complete();
            if q.is_remedial() {
                let bq = q.backdoor_query(ceg)?;
                let joint = OracleJoint::paths(ceg, &[Manipulation::Florets(bq.pi_star)], cap)?;
                return Ok(joint.path_conditional(ceg, &[&y], &[&complete])?);
            }
            forced_value(ceg, &q.x_edges(ceg)?, &y, &complete, cap)
        }
    }
}

pub fn oracle_check(model: &Model, kind: QueryKind, q: &QueryDoc, cap: usize, tolerance: f64) -> Result<CheckReport, QueryError> {
    let formula = evaluate(model, kind, q, cap)?.value;
    let oracle = oracle(model, kind, q, cap)?;
    let abs_diff = (formula - oracle).abs();
    Ok(CheckReport { kind, formula, oracle, abs_diff, tolerance, pass: abs_diff <= tolerance })
}
