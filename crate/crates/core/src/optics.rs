//! Gaussian-beam propagation, received power and per-user channel matrices.
//!
//! Each optical AP is an aggregate VCSEL emitter pointing straight down. Its
//! beam spreads with distance according to the Rayleigh range, and a
//! photodiode collects the beam intensity over its own aperture. The
//! line-of-sight gain of photodiode `m` from AP `l` is
//!
//! ```text
//! h = responsivity * filter_gain * (P_recv / P_t) * cos(psi) * [psi <= fov]
//! ```
//!
//! where `P_recv` integrates the transverse intensity over a disc centred at
//! the detector's horizontal offset from the beam axis.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, periodic_trapezoid};
use crate::scenario::{NoiseConfig, OpticalAp, User};

/// Receiver noise: shot plus thermal floor and laser relative intensity noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Shot plus thermal noise variance, A^2.
    pub sigma_sum: f64,
    /// Relative intensity noise as a linear density, 1/Hz.
    pub rin: f64,
    /// Single-sided electrical bandwidth, Hz.
    pub bandwidth: f64,
}

impl NoiseParams {
    pub fn from_config(cfg: &NoiseConfig) -> Result<Self> {
        let noise = NoiseParams {
            sigma_sum: cfg.sigma_sum_a2,
            rin: 10f64.powf(cfg.rin_db_hz / 10.0),
            bandwidth: cfg.bandwidth_ghz * 1e9,
        };
        if noise.sigma_sum >= 0.0 && noise.rin >= 0.0 && noise.bandwidth > 0.0 {
            Ok(noise)
        } else {
            Err(Error::InvalidConfig(format!("invalid noise parameters {cfg:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub waist: f64,
    pub wavelength: f64,
    pub rayleigh_range: f64,
    pub refractive_index: f64,
}

impl BeamGeometry {
    /// Beam in air (refractive index 1).
    pub fn new(waist: f64, wavelength: f64) -> Self {
        Self::with_index(waist, wavelength, 1.0)
    }

    pub fn with_index(waist: f64, wavelength: f64, refractive_index: f64) -> Self {
        BeamGeometry {
            waist,
            wavelength,
            rayleigh_range: PI * waist * waist * refractive_index / wavelength,
            refractive_index,
        }
    }
}

/// Beam radius `W_d` at distance `d` from the waist.
pub fn beam_radius(beam: &BeamGeometry, d: f64) -> f64 {
    let z = d / beam.rayleigh_range;
    beam.waist * (1.0 + z * z).sqrt()
}

/// Transverse intensity at radial offset `r` and distance `d`, W/m^2.
pub fn intensity(r: f64, d: f64, transmit_power: f64, beam: &BeamGeometry) -> f64 {
    let w = beam_radius(beam, d);
    intensity_at_radius(r, transmit_power, w)
}

fn intensity_at_radius(r: f64, transmit_power: f64, w: f64) -> f64 {
    2.0 * transmit_power / (PI * w * w) * (-2.0 * r * r / (w * w)).exp()
}

/// Closed-form power collected by a detector centred on the beam axis,
/// as printed for the laser link budget:
/// `P_t * (1 - exp(-2 * (A / (2 pi W_d))^2))`.
///
/// The bracketed ratio is not dimensionless for an area `A`; simulations use
/// [`received_power_offset`] instead, which integrates the intensity over the
/// physical aperture.
pub fn received_power_centered(transmit_power: f64, area: f64, w_d: f64) -> f64 {
    let x = area / (2.0 * PI * w_d);
    transmit_power * -(-2.0 * x * x).exp_m1()
}

/// Exact power through a disc of radius `radius` centred on the beam axis.
pub fn disc_power_on_axis(transmit_power: f64, radius: f64, w_d: f64) -> f64 {
    transmit_power * -(-2.0 * radius * radius / (w_d * w_d)).exp_m1()
}

/// Power collected by a disc of area `area` whose centre sits `offset`
/// metres from the beam axis, by numerical integration of the intensity.
pub fn received_power_offset(transmit_power: f64, area: f64, w_d: f64, offset: f64) -> Result<f64> {
    if !(area > 0.0 && w_d > 0.0 && offset >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "received power needs area > 0, W_d > 0, offset >= 0 (got {area}, {w_d}, {offset})"
        )));
    }
    let radius = (area / PI).sqrt();
    // Nearest point of the disc is beyond the f64 range of exp().
    let gap = offset - radius;
    if gap > 0.0 && 2.0 * gap * gap / (w_d * w_d) > 745.0 {
        return Ok(0.0);
    }
    let peak = intensity_at_radius(0.0, transmit_power, w_d);
    let abs_tol = 1e-18 * transmit_power;
    // In polar coordinates about the disc centre, the squared distance to
    // the beam axis is rho^2 + offset^2 + 2 rho offset cos(theta).
    let ring = |rho: f64| -> Result<f64> {
        let theta_integral = periodic_trapezoid(
            |theta| {
                let r2 = rho * rho + offset * offset + 2.0 * rho * offset * theta.cos();
                (-2.0 * r2.max(0.0) / (w_d * w_d)).exp()
            },
            1e-12,
            1e-300,
        )?;
        Ok(peak * theta_integral * rho)
    };
    let power = adaptive_simpson(ring, 0.0, radius, 1e-10, abs_tol)?;
    Ok(power.clamp(0.0, transmit_power))
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (a.dot(b) / denom).clamp(-1.0, 1.0).acos()
}

/// Irradiance angle at the AP and incidence angle at photodiode `m`.
pub fn irradiance_incidence_angles(ap: &OpticalAp, user: &User, m: usize) -> (f64, f64) {
    let to_user = user.position - ap.position;
    let irradiance = angle_between(&ap.orientation, &to_user);
    let normal = user.detector.photodiodes[m].orientation();
    let incidence = angle_between(&normal, &(-to_user));
    (irradiance, incidence)
}

/// Fraction of the AP's optical power landing on one photodiode aperture.
pub fn power_ratio(ap: &OpticalAp, user: &User, m: usize) -> Result<f64> {
    let pd = &user.detector.photodiodes[m];
    let d = ap.position.z - user.position.z;
    let w_d = beam_radius(&ap.beam(), d);
    let offset = (ap.position.xy() - user.position.xy()).norm();
    Ok(received_power_offset(ap.transmit_power, pd.area, w_d, offset)? / ap.transmit_power)
}

/// Gain before the responsivity is applied: power ratio, filter gain,
/// incidence cosine and FOV cut-off.
fn optical_gain(ap: &OpticalAp, user: &User, m: usize, ratio: f64) -> f64 {
    let (_, incidence) = irradiance_incidence_angles(ap, user, m);
    if incidence > user.detector.photodiodes[m].fov {
        return 0.0;
    }
    ap.filter_gain * ratio * incidence.cos()
}

/// Line-of-sight channel gain from `ap` to photodiode `m` of `user`, A/W.
pub fn channel_gain(ap: &OpticalAp, user: &User, m: usize) -> Result<f64> {
    let ratio = power_ratio(ap, user, m)?;
    Ok(user.detector.photodiodes[m].responsivity * optical_gain(ap, user, m, ratio))
}

/// Per-user `M x L` channel matrix: rows are photodiodes, columns are APs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub user_id: usize,
    pub entries: DMatrix<f64>,
}

impl ChannelMatrix {
    pub fn photodiodes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn aps(&self) -> usize {
        self.entries.ncols()
    }

    /// CSV dump, one row per photodiode and one column per AP.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("photodiode");
        for l in 0..self.aps() {
            let _ = write!(out, ",ap{l}");
        }
        out.push('\n');
        for m in 0..self.photodiodes() {
            let _ = write!(out, "{m}");
            for l in 0..self.aps() {
                let _ = write!(out, ",{:e}", self.entries[(m, l)]);
            }
            out.push('\n');
        }
        out
    }
}

pub fn channel_matrix(user: &User, aps: &[OpticalAp]) -> Result<ChannelMatrix> {
    let rows = user.detector.len();
    let mut entries = DMatrix::zeros(rows, aps.len());
    for (l, ap) in aps.iter().enumerate() {
        // Every photodiode shares the detector centre, so equal-area branches
        // collect the same power; only the incidence term differs.
        let mut cached: Option<(f64, f64)> = None;
        for m in 0..rows {
            let pd = &user.detector.photodiodes[m];
            let ratio = match cached {
                Some((area, ratio)) if area == pd.area => ratio,
                _ => {
                    let ratio = power_ratio(ap, user, m)?;
                    cached = Some((pd.area, ratio));
                    ratio
                }
            };
            entries[(m, l)] = pd.responsivity * optical_gain(ap, user, m, ratio);
        }
    }
    Ok(ChannelMatrix { user_id: user.id, entries })
}

/// Noise variance for a given list of interfering photocurrents `h * delta * P_t`.
pub fn noise_from_interference<I>(noise: &NoiseParams, photocurrents: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let interference: f64 = photocurrents.into_iter().map(|i| i * i).sum();
    noise.sigma_sum + noise.rin * interference * noise.bandwidth
}

/// Noise variance at photodiode `m` when `user` is served by AP `serving`:
/// the shot/thermal floor plus RIN from every other AP.
pub fn noise_variance(
    user: &User,
    serving: usize,
    aps: &[OpticalAp],
    m: usize,
    noise: &NoiseParams,
) -> Result<f64> {
    let responsivity = user.detector.photodiodes[m].responsivity;
    let mut currents = Vec::with_capacity(aps.len().saturating_sub(1));
    for (l, ap) in aps.iter().enumerate() {
        if l == serving {
            continue;
        }
        let gain = optical_gain(ap, user, m, power_ratio(ap, user, m)?);
        currents.push(gain * responsivity * ap.transmit_power);
    }
    Ok(noise_from_interference(noise, currents))
}

/// Same as [`noise_variance`] but reads the gains from a precomputed matrix,
/// whose entries already include the responsivity.
pub fn noise_variance_from_matrix(
    h: &ChannelMatrix,
    serving: usize,
    aps: &[OpticalAp],
    m: usize,
    noise: &NoiseParams,
) -> f64 {
    let currents = aps
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != serving)
        .map(|(l, ap)| h.entries[(m, l)] * ap.transmit_power);
    noise_from_interference(noise, currents)
}
