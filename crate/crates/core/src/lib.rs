pub mod channel;
pub mod error;
pub mod flat;
pub mod geometry;
pub mod greens;
pub mod position;
pub mod quad;
pub mod radau;
pub mod radial;
pub mod rk;
pub mod special;
pub mod thermal;

pub use error::{Error, Result};
