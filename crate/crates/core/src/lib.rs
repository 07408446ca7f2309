pub mod cache;
pub mod compare;
pub mod config;
pub mod error;
pub mod export;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod quadrature;
pub mod reference;
pub mod runner;
pub mod smearing;
pub mod special;

pub use error::{Error, Result};
