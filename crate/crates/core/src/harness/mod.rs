//! Experiment driver: configuration, reference solutions, error tables,
//! adaptive refinement and output files.

pub mod adaptive;
pub mod config;
pub mod nondim;
pub mod output;
pub mod reference;
pub mod run;
pub mod zz;

pub use adaptive::{adaptive_loop, AdaptiveConfig, AdaptiveRun};
pub use config::{Mode, Overrides, ReferenceMode, RunConfig};
pub use nondim::{nondimensionalize, Nondimensional, PhysicalParameters};
pub use output::{AdaptiveRow, UniformRow};
pub use reference::{reference_solve, Reference, ReferenceCache, Richardson};
pub use run::{execute, run, run_with_cache, Report, RunOutcome};
pub use zz::{dorfler_mark, zz_estimate, ZzIndicators};
