//! Normal approximation of the edge count in the random intersection graph
//! `G(n, m, p)`: exact moments, subgraph and clique-cover probabilities,
//! contraction norms, distance-bound brackets, and exact or simulated
//! Kolmogorov and Wasserstein distances to the standard normal.

pub mod bounds;
pub mod contractions;
pub mod distance;
pub mod error;
pub mod model;
pub mod moments;
pub mod numeric;
pub mod sampler;
pub mod subgraphs;

pub use error::{Error, Result};
pub use model::{AssignmentMatrix, ModelParams, SampleSummary};
