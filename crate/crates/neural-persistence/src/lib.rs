//! Topological complexity measures for neural-network weight matrices.
//!
//! Each fully-connected layer is read as a weighted bipartite graph. Sorting
//! the absolute, max-normalized weights in descending order induces a
//! filtration whose zero-dimensional persistent homology tracks how the
//! layer's connected components merge. The p-norm of the resulting
//! persistence diagram ("neural persistence") is a scalar complexity
//! measure; normalizing it by its architecture-level upper bound makes
//! layers and networks of different sizes comparable.
//!
//! The crate provides:
//!
//! - [`filtration`]: the descending-weight filtration, union-find diagram
//!   computation, and an independent maximum-spanning-forest oracle.
//! - [`measures`]: persistence norms, range and order-statistic bounds, and
//!   normalized / mean normalized values.
//! - [`conv`]: exact neural persistence of unrolled convolution filters and
//!   a closed-form per-filter approximation.
//! - [`earlystop`]: a patience criterion on any monitored scalar and a
//!   burn-in x patience grid simulator comparing two stopping criteria.
//! - [`trainer`]: a small deterministic MLP trainer and random-matrix
//!   generators that produce snapshots and metric traces.
//! - [`io`]: versioned JSON snapshot files and CSV metric traces.

pub mod conv;
pub mod diagram;
pub mod earlystop;
pub mod error;
pub mod filtration;
pub mod io;
pub mod layer;
pub mod measures;
pub mod trainer;
pub mod union_find;

pub use diagram::{EssentialPolicy, PersistenceDiagram, PersistencePoint};
pub use error::{Error, Result};
pub use filtration::{build_filtration, compute_diagram, mst_oracle, transform_weights};
pub use layer::{NetworkSnapshot, SparseEntry, WeightedBipartiteLayer};
pub use measures::{
    empirical_bounds, empirical_bounds_for_layer, mean_normalized_neural_persistence,
    neural_persistence, normalized_neural_persistence, theoretical_upper_bound, BoundsPair,
    NeuralPersistenceValue, NormalizationRange,
};
pub use union_find::UnionFind;
