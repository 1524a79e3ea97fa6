//! Numerical laboratory for Laplacians on weighted graphs.
//!
//! Infinite graphs enter through [`GraphFamily`] rules and are studied on
//! finite truncation windows. On top of the graph substrate the crate builds
//! intrinsic path metrics, Dirichlet-form evaluations, capacities of Cauchy
//! boundary ends, Minkowski codimension estimates and a per-family
//! classification of Markov uniqueness and essential self-adjointness.

pub mod budget;
pub mod classify;
pub mod completeness;
pub mod error;
pub mod family;
pub mod forms;
pub mod gallery;
pub mod graph;
pub mod io;
pub mod metric;
pub mod par;
pub mod potential;
pub mod random;
pub mod registry;
pub mod series;
pub mod solver;

pub use budget::Budget;
pub use error::{Error, Result};
pub use family::{EndSide, GraphFamily, VertexModel};
pub use graph::{GraphBuilder, VertexSet, WeightedGraph};
pub use par::Execution;
