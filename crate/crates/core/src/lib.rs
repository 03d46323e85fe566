//! Outlier-robust Wasserstein distances between discrete measures.

pub mod dual;
pub mod error;
pub mod flow;
pub mod measure;
pub mod privacy;
pub mod radius;
pub mod robust;
pub mod sampling;

pub use error::{Error, Result};
pub use measure::{
    cost_matrix, huber_mix, tv_distance, ContaminationSpec, CostMatrix, Costs, DiscreteMeasure, Exponent, GroundCosts,
    GroundMetric, MetricKind, PointCosts, Provenance,
};
