//! Time-division baseline: one user served per slot by all cluster APs.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;

/// Rate (bit/s/Hz) of user `k` when the `users` users of a cluster share time
/// equally and the APs co-phase their transmission to the served user.
pub fn tdma_user_rate(h_k: &[f64], power: f64, sigma2: f64, users: usize) -> f64 {
    if users == 0 {
        return 0.0;
    }
    let gain: f64 = h_k.iter().map(|h| h * h).sum::<f64>() * power * power;
    let rate = 0.5 * (2.0 * gain / (PI * E * sigma2)).ln_1p() / std::f64::consts::LN_2;
    rate / users as f64
}

/// TDMA rates for every row of a `K x L` channel.
pub fn tdma_rates(h: &DMatrix<f64>, power: f64, sigma2: &[f64]) -> Vec<f64> {
    let users = h.nrows();
    (0..users)
        .map(|k| {
            let row: Vec<f64> = h.row(k).iter().copied().collect();
            tdma_user_rate(&row, power, sigma2[k], users)
        })
        .collect()
}
