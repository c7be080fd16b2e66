pub mod arborescence;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod io;
pub mod lattice;
pub mod model;
pub mod scheduler;
pub mod stability;

pub use error::{Error, Result};
