//! WiFi access point: link budget, downlink rate and subcarrier shares.

use nalgebra::Vector3;

use crate::scenario::{User, WifiAp};

/// Distances below this are clamped before computing path loss.
pub const MIN_DISTANCE_M: f64 = 0.1;
/// Breakpoint between free-space and indoor decay.
pub const BREAKPOINT_M: f64 = 5.0;
/// Path-loss exponent beyond the breakpoint.
pub const FAR_EXPONENT: f64 = 3.5;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space loss in dB at distance `d` (m) and carrier `f` (Hz).
pub fn free_space_loss(d: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// Two-slope indoor path loss in dB.
pub fn wifi_path_loss(d: f64, carrier_hz: f64) -> f64 {
    let d = d.max(MIN_DISTANCE_M);
    if d <= BREAKPOINT_M {
        free_space_loss(d, carrier_hz)
    } else {
        free_space_loss(BREAKPOINT_M, carrier_hz) + 10.0 * FAR_EXPONENT * (d / BREAKPOINT_M).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WifiLinkBudget {
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub subcarriers: usize,
}

impl WifiLinkBudget {
    pub fn from_ap(ap: &WifiAp) -> Self {
        WifiLinkBudget {
            tx_power_dbm: ap.transmit_power_dbm,
            noise_power_dbm: ap.noise_power_dbm,
            bandwidth_hz: ap.bandwidth_hz,
            carrier_hz: ap.carrier_hz,
            subcarriers: ap.subcarrier_count,
        }
    }

    pub fn path_loss(&self, d: f64) -> f64 {
        wifi_path_loss(d, self.carrier_hz)
    }

    /// Linear SNR at distance `d`.
    pub fn snr(&self, d: f64) -> f64 {
        let db = self.tx_power_dbm - self.path_loss(d) - self.noise_power_dbm;
        10f64.powf(db / 10.0)
    }

    /// Full-allocation rate in bit/s at distance `d`.
    pub fn rate(&self, d: f64) -> f64 {
        shannon_rate(self.bandwidth_hz, self.snr(d))
    }
}

/// `B log2(1 + snr)`.
pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> f64 {
    bandwidth_hz * snr.max(0.0).ln_1p() / std::f64::consts::LN_2
}

/// Full-allocation downlink rate of `user` from `wifi`, bit/s.
pub fn wifi_downlink_rate(user: &User, wifi: &WifiAp) -> f64 {
    let d: Vector3<f64> = user.position - wifi.position;
    WifiLinkBudget::from_ap(wifi).rate(d.norm())
}

/// Uplink fraction granted to each of `users` users.
pub fn uplink_share(users: usize, uplink_reservation: f64) -> f64 {
    uplink_reservation / users as f64
}

/// Splits `subcarriers` among users in proportion to `shares`. Each user gets
/// `floor(share * subcarriers)`; leftovers go one at a time to the users in
/// index order, skipping users with a zero share.
pub fn allocate_subcarriers(shares: &[f64], subcarriers: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = shares
        .iter()
        .map(|&s| (s.clamp(0.0, 1.0) * subcarriers as f64 + 1e-9).floor() as usize)
        .collect();
    let total_share: f64 = shares.iter().map(|s| s.clamp(0.0, 1.0)).sum();
    let budget = ((total_share.min(1.0) * subcarriers as f64) + 1e-9).floor() as usize;
    let active: Vec<usize> = (0..shares.len()).filter(|&k| shares[k] > 0.0).collect();
    let mut used: usize = counts.iter().sum();
    let mut i = 0;
    while used < budget && !active.is_empty() {
        counts[active[i % active.len()]] += 1;
        used += 1;
        i += 1;
    }
    counts
}

/// Per-user WiFi throughput (bit/s) when users with the given full-allocation
/// rates split the downlink equally. The downlink keeps `1 - uplink_reservation`
/// of the subcarriers.
pub fn wifi_shared_rates(full_rates: &[f64], subcarriers: usize, uplink_reservation: f64) -> Vec<f64> {
    if full_rates.is_empty() {
        return Vec::new();
    }
    let downlink = ((1.0 - uplink_reservation) * subcarriers as f64 + 1e-9).floor() as usize;
    let shares = vec![1.0 / full_rates.len() as f64; full_rates.len()];
    allocate_subcarriers(&shares, downlink)
        .into_iter()
        .zip(full_rates)
        .map(|(n, r)| r * n as f64 / subcarriers as f64)
        .collect()
}
