//! Domain types, registries and the simulated ledger.

mod credential;
mod ledger;
mod registry;
mod request;
mod space;
pub mod store;

pub use credential::Credential;
pub use ledger::{HistoryRecord, Ledger};
pub use registry::{Matrix, ObjectRecord, PopulationKind, PopulationLine, Registry, SubjectRecord};
pub use request::{AccessRequest, Outcome, PolicyRule, Reason};
pub use space::{AttrClass, AttrId, AttributeDef, AttributeSpace, AvPair, PairId};
