//! Random walks on random sceneries: multiscale reduced walks, bad-set
//! classifiers, recursive test sets and exact probability oracles.

pub mod badsets;
pub mod bigreal;
pub mod error;
pub mod finder;
pub mod harness;
pub mod hierarchy;
pub mod io;
pub mod oracle;
pub mod params;
pub mod reconstruct;
pub mod scenery;
pub mod seed;
pub mod stats;
pub mod testset;
pub mod walk;

pub use error::{Error, Result};
