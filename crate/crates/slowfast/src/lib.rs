//! Monte Carlo harness, file formats and command-line plumbing on top of
//! [`slowfast_core`].

pub mod config;
mod error;
pub mod harness;
pub mod io;
pub mod output;
pub mod registry;
pub mod store;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use harness::{run_experiment, ExperimentResult};
pub use registry::BuiltinModel;
pub use store::SharedXiStore;
