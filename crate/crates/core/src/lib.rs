//! Parametric LMP policies and demand-response targeting for DC-network
//! economic dispatch.

pub mod error;
pub mod mpqp;
pub mod netmodel;
pub mod qpcore;
pub mod sced;
pub mod targeting;

pub use error::{Error, Result};
