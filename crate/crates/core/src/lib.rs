//! Simulator for hybrid laser-based optical wireless and WiFi indoor networks.
//!
//! The crate models ceiling-mounted VCSEL access points with Gaussian beams,
//! users carrying reconfigurable multi-photodiode detectors, and a WiFi AP.
//! Optical APs serve users by zero-forcing, blind interference alignment or
//! time division; a load balancer assigns every user to one AP.

pub mod balancer;
pub mod downlink;
pub mod error;
pub mod harness;
pub mod optics;
pub mod quadrature;
pub mod scenario;
pub mod wifi;

pub use error::{Error, Result};

// Compiles and runs every snippet of the guide as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/beam.md")]
    mod beam {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/zero_forcing.md")]
    mod zero_forcing {}
    #[doc = include_str!("../../../book/src/bia.md")]
    mod bia {}
    #[doc = include_str!("../../../book/src/wifi.md")]
    mod wifi {}
    #[doc = include_str!("../../../book/src/load_balancing.md")]
    mod load_balancing {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
