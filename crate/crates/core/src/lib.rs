//! Copula versions of distance multivariance and dHSIC.
//!
//! Every margin is first mapped to uniform by the empirical distributional transform
//! `x ↦ P̂(X < x) + u·P̂(X = x)`, which makes the statistics' null distributions free of
//! the marginal laws, including discrete and mixed ones. The crate provides the
//! transform, both dependence statistics, several p-value backends and a simulation
//! harness for power studies.

pub mod data;
pub mod dhsic;
pub mod error;
pub mod kernels;
pub mod multivariance;
pub mod pvalues;
pub mod simulate;
pub mod statistic;
pub mod stats;
pub mod transform;

pub use data::{draw_uniforms, load_dataset, parse_grouping, write_dataset, Dataset, RandomStream};
pub use error::{Error, Result};
pub use kernels::{center, psi_distance_matrix, CenteredKernelMatrix, CndfSpec};
pub use statistic::{Flags, PreparedStatistic, StatisticKind, StatisticSpec};
pub use transform::{empirical_transform_dataset, TransformedDataset, UniformDraws};
