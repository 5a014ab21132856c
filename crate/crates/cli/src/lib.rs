//! Command-line workflow driver: build benchmark systems, compute
//! Gramians and certificates, reduce, simulate, and sweep output errors
//! over reduced orders.
//!
//! All artifacts are exchanged through a directory bundle: a JSON
//! manifest plus one CSV file per matrix (row-major, scientific notation
//! with 17 significant digits, which round-trips `f64` bit-exactly).
//! Every command also writes a `run_manifest.json` describing the exact
//! invocation; re-running it reproduces the outputs byte for byte.

pub mod commands;
pub mod io;
pub mod signals;

pub use commands::{run, Cli};
