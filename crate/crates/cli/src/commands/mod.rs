//! One module per subcommand. Each exposes `compute`, returning results in
//! memory, and `run`, which also writes the artifacts.

pub mod entropy_demo;
pub mod fit_eval;
pub mod hmc_demo;
pub mod sweep;
