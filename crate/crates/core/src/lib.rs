//! Max-plus thermodynamic formalism on finite alphabets.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod ifs;
pub mod maxplus;
pub mod search;
pub mod shift;
pub mod simplex;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
