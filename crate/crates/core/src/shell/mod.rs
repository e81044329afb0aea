//! Serialization, DOT export and the enumeration oracle.

pub mod bundle;
pub mod dot;
pub mod oracle;
pub mod query;

pub use bundle::{from_json, load_bundle, parse_bundle, save_bundle, to_canonical_json, Model, ModelBundle, Prob, SchemaError};
pub use dot::{ceg_to_dot, flattening_to_dot, gn_to_dot};
pub use query::{evaluate, oracle_check, CheckReport, EventDoc, QueryAnswer, QueryDoc, QueryError, QueryKind};
