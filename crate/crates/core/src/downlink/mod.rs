//! Downlink transmission schemes for a cluster of cooperating optical APs.

pub mod bia;
pub mod tdma;
pub mod zf;

use serde::{Deserialize, Serialize};

pub use bia::{
    bia_block_fraction, bia_noise_covariance, bia_resource_fraction, bia_resource_fraction_exact,
    bia_user_rate, BiaNoiseCovariance, BiaSchedule, Block,
};
pub use tdma::{tdma_rates, tdma_user_rate};
pub use zf::{zf_precoder, zf_rate_from_terms, zf_user_rate, ZfPrecoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Zf,
    Bia,
    Tdma,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Zf => "zf",
            Scheme::Bia => "bia",
            Scheme::Tdma => "tdma",
        })
    }
}
