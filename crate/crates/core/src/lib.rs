pub mod divkernels;
pub mod expharness;
pub mod error;
pub mod kde;
pub mod models;
pub mod numerics;
pub mod objectives;
pub mod proximal;

pub use error::{Error, Result};
