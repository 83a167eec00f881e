//! Experiment runner for `geomflow`: spec files in, result tables and run
//! manifests out, plus the named acceptance suites.

pub mod run;
pub mod spec;
pub mod suite;

pub use run::{execute, run_to_dir, ResultRow, CSV_HEADER};
pub use spec::{ExperimentSpec, RawSpec, SpecError};
pub use suite::{run_suite, CriterionRow, Scale, SUITES};
