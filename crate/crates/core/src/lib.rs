//! Decentralized navigation on Poisson point processes.
//!
//! The library samples homogeneous Poisson point processes, runs greedy
//! navigation rules over them (long-range "small-world" hops, radial
//! nearest-neighbor steps, compass routing on a Delaunay triangulation),
//! builds the resulting navigation trees, and confronts the Monte Carlo
//! output with closed-form constants and quadratures for the hop-count,
//! progress-tail, deviation and tree-shape scaling laws.
//!
//! Core pieces:
//! - [`point_process`]: reproducible PPP sampling, Palm augmentation,
//!   spatial queries.
//! - [`delaunay`]: planar Delaunay triangulation with robust predicates.
//! - [`navigators`]: single-step and full-path navigation rules, with an
//!   exact lazy construction of the long-range environment.
//! - [`tree`]: navigation trees and per-path metrics.
//! - [`analytic`]: adaptive quadratures and the closed-form limit constants.
//! - [`regen`]: the coupled walk with regenerative times and the
//!   infinite-server queue recursion that dominates it.
//! - [`experiments`]: Monte Carlo experiment plans and reports.

pub mod analytic;
pub mod delaunay;
pub mod experiments;
pub mod navigators;
pub mod point_process;
pub mod regen;
pub mod rng;
pub mod stats;
pub mod tree;

use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejected input (bad window, parameters out of the supported regime, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Geometrically degenerate input (e.g. all points collinear).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// The conditioned neighbor draw stayed empty past the rejection cap.
    #[error("conditioning failure after {rounds} rejection rounds at point {point:?} (|X| = {norm})")]
    ConditioningFailure {
        rounds: u64,
        point: Vec<f64>,
        norm: f64,
    },
    /// Nearest-point search exhausted the realized region.
    #[error("boundary exhaustion: no candidate point in the search region of {0:?}")]
    BoundaryExhaustion(Vec<f64>),
    /// An adaptive quadrature did not reach its tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    /// Not enough data to form the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Navigation failure attributed to a specific tree node.
    #[error("navigation failed at node {node}: {source}")]
    NodeNavigation {
        node: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
