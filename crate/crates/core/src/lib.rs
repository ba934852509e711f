//! Causal orderings of heavy-tailed linear structural equation models with
//! nonnegative weights, estimated from the scalings of extremal angular
//! measures.
//!
//! The crate covers the full pipeline: DAGs and random models ([`graph`],
//! [`lsem`]), angular measures and scaling estimators ([`extremes`]), the
//! ordering algorithm ([`discovery`]), evaluation by structural intervention
//! distance ([`metrics`]), a tail-coefficient baseline ([`baseline`]),
//! panel data handling ([`data`]) and benchmark sweeps ([`bench`]).

pub mod baseline;
pub mod bench;
pub mod cli;
pub mod data;
pub mod discovery;
pub mod error;
pub mod extremes;
pub mod graph;
pub mod lsem;
pub mod metrics;

pub use discovery::{causal_order, causal_order_oracle, AlgoParams, DeltaMatrix, OrderingResult};
pub use error::{Error, Result};
pub use extremes::{pit_frechet2, Margins, SampleMatrix};
pub use graph::Dag;
pub use lsem::{simulate, CoefficientMatrix, LsemModel};
pub use metrics::{full_dag_from_order, sid, SidScore};
