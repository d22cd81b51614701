pub mod error;
pub mod fixedpoint;
pub mod mestim;
pub mod prox;
pub mod randmodel;
pub mod riskest;
pub mod roots;
pub mod seed;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
