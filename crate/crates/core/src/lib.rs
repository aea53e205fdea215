//! Downlink from a LEO satellite to a ground user through a tilted
//! intelligent reflecting surface.

pub mod array;
pub mod beamform;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geo;
pub mod sim;

pub use error::{Error, Result};
