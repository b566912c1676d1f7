pub mod counterfn;
pub mod dynamics;
pub mod error;
pub mod gamma;
pub mod moduli;
pub mod numerics;
pub mod rates;
pub mod verify;

pub use error::{Error, Result};
