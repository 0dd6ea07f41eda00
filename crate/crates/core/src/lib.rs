//! Certified Euclidean embeddings of unions of Euclidean metric spaces.

pub mod acceptance;
pub mod audit;
pub mod cover;
pub mod error;
pub mod glue;
pub mod kirszbraun;
pub mod lower_bound;
pub mod linalg;
pub mod metric;
pub mod par;
pub mod report;
pub mod rng;
pub mod testgen;
pub mod union_embed;

pub use error::{Error, MetricViolation, Result};
