//! Feature extraction and exploration segmentation for SQL query workloads.
//!
//! A workload is a list of user sessions, each an ordered list of queries.
//! The pipeline runs in stages, each one filling more columns of the
//! canonical CSV exchange format:
//!
//! 1. [`workload`]: filter raw logs to SELECT statements and assemble sessions.
//! 2. [`fragments`]: parse each statement into projections, selections,
//!    aggregations, tables and attributes.
//! 3. [`features`]: intrinsic and predecessor-relative counts per query, with
//!    regression imputation for unresolved wildcards.
//! 4. [`indexes`]: five normalized similarity indexes per consecutive pair.
//! 5. Segmentation: [`vote`], [`classifier`], [`weak`] and the [`baselines`].
//! 6. [`evaluation`]: quality scores, agreement statistics and profiling.

pub mod baselines;
pub mod classifier;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fragments;
pub mod indexes;
pub mod label;
pub mod stats;
pub mod vote;
pub mod weak;
pub mod workload;

pub use error::{Error, Result};
pub use label::Label;
