pub mod cone;
pub mod market;
pub mod path;
pub mod portfolio;
pub mod price_system;
pub mod utility;
pub mod bellman;
pub mod config;
pub mod experiment;
pub mod error;
pub mod kv;
pub mod lp;

pub use error::{Error, Result};
