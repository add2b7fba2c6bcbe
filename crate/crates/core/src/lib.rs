//! Neural economic dispatch with outputs that are feasible by construction.
//!
//! The dispatch problem is reduced to an inequality-only polytope over the
//! independent generators ([`dispatch`]). A network predicts a point, a gauge
//! layer ([`gauge`]) maps it into the polytope, and equality completion restores
//! the balance. [`oracle`] supplies exact labels and the projection baseline.

pub mod data_io;
pub mod dispatch;
pub mod error;
pub mod gauge;
pub mod linalg;
pub mod mapviz;
pub mod neural;
pub mod oracle;
pub mod polytope;
pub mod report;

pub use error::{Error, Result};
