//! Library side of the `homog` command-line tool.

pub mod commands;
pub mod config;

pub use commands::{cmd_homogenize, cmd_solve, cmd_study, cmd_validate, exit_code, load_material, CommandOutput};
pub use config::{ConfigFile, MaterialSource, Overrides, RunConfig, StudyKind};
