//! Proximal mappings of convex functions, the proximal-mapping metric on subdifferentials, and
//! proximal point dynamics, with sampling-based verifiers for the operator characterizations
//! they rest on.

pub mod catalog;
pub mod checks;
pub mod contraction;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod operator;
pub mod par;
pub mod prox;
pub mod sampling;

pub use catalog::{ConvexFunction, MinimizerInfo, MinimizerKind, MinimizerSet, Node, Subdifferential};
pub use error::{Error, Result};
pub use operator::{AffineMap, FnMap, VectorMap};
pub use prox::{moreau, prox, prox_operator, ProxMethod, ProxOperator, ProxOptions, ProxQuery, ProxResult};
