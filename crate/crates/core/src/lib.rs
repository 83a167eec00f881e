//! Simulation and Monte Carlo estimation for stochastic flows on embedded
//! Riemannian manifolds.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod flows;
pub mod geometry;
pub mod linalg;
pub mod oracles;
pub mod region;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{MonteCarloEstimate, OneForm, Sampling, TestFunction};
pub use exec::Executor;
pub use flows::{FlowConfig, Model, PathStatus, StochasticSystem, TrajectoryRecord};
pub use geometry::{Manifold, ManifoldModel, Potential, TangentVector};
pub use linalg::Vector;
pub use oracles::OracleCatalog;
pub use region::{ExitRule, RegionSpec};
pub use rng::{BrownianDriver, NoiseSource};
