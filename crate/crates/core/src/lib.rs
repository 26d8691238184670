pub mod coalescent;
pub mod csbp;
pub mod error;
pub mod experiments;
pub mod gw;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
