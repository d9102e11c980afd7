//! Concrete model geometries with finite-difference realizations of the
//! tensor calculus, the Lorentzian cone lift, and the numerical identity
//! suite.

pub mod cone;
pub mod field;
pub mod metric;
pub mod ops;
pub mod suite;

pub use field::{Chart, DiscreteField, RankBasis};
pub use metric::{GeometryError, MetricKind, ModelMetric};
