pub mod arith;
pub mod brauer;
pub mod cli;
pub mod density;
pub mod error;
pub mod fields;
pub mod heights;
pub mod lattice;
pub mod local;
pub mod metacyclic;
pub mod primesets;
pub mod residue;
pub mod selftest;

pub use error::{Error, Result};
