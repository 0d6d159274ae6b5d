//! Room geometry, access-point layout, detector construction and user drops.
//!
//! A [`Scenario`] is a pure function of a [`ScenarioConfig`]: the same
//! configuration (including its seed) always yields bit-identical positions.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{BeamGeometry, NoiseParams};

/// Downward normal shared by every ceiling AP.
pub const AP_NORMAL: Vector3<f64> = Vector3::new(0.0, 0.0, -1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Default for Room {
    fn default() -> Self {
        Room { width: 5.0, depth: 5.0, height: 3.0 }
    }
}

impl Room {
    fn validate(&self) -> Result<()> {
        let ok = [self.width, self.depth, self.height]
            .iter()
            .all(|d| d.is_finite() && *d > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("room dimensions must be positive: {self:?}")))
        }
    }

    /// True when `(x, y)` lies strictly inside the footprint.
    pub fn contains_footprint(&self, p: &Vector3<f64>) -> bool {
        p.x > 0.0 && p.x < self.width && p.y > 0.0 && p.y < self.depth
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(self.width / 2.0, self.depth / 2.0, self.height / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// Centre-to-centre spacing. `None` places APs at the centres of a
    /// uniform `rows x cols` partition of the ceiling.
    pub spacing_m: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { rows: 4, cols: 4, spacing_m: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalConfig {
    /// Optical power of a single VCSEL.
    pub power_w: f64,
    pub wavelength_nm: f64,
    pub waist_um: f64,
    pub vcsels_per_ap: u32,
    pub filter_gain: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        OpticalConfig {
            power_w: 1e-3,
            wavelength_nm: 830.0,
            waist_um: 30.0,
            vcsels_per_ap: 1,
            filter_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// Every branch at the same tilt, azimuths evenly spaced.
    Pyramidal,
    /// One upward-facing branch plus a ring of tilted branches.
    Hemispherical,
    /// Random orientation angles drawn per user.
    RandomRoa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub branches: usize,
    pub tilt_deg: f64,
    /// Total detection area, shared evenly by the branches.
    pub area_mm2: f64,
    pub responsivity: f64,
    pub fov_deg: f64,
    pub arrangement: Arrangement,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            branches: 4,
            tilt_deg: 45.0,
            area_mm2: 15.0,
            responsivity: 0.53,
            fov_deg: 45.0,
            arrangement: Arrangement::Pyramidal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WifiConfig {
    pub power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub subcarriers: usize,
    pub noise_dbm: f64,
    pub carrier_ghz: f64,
    /// Defaults to the centre of the ceiling.
    pub position: Option<[f64; 3]>,
    /// Fraction of WiFi resources reserved for uplink.
    pub uplink_reservation: f64,
}

impl Default for WifiConfig {
    fn default() -> Self {
        WifiConfig {
            power_dbm: 20.0,
            bandwidth_mhz: 40.0,
            subcarriers: 108,
            noise_dbm: -63.0,
            carrier_ghz: 2.4,
            position: None,
            uplink_reservation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UsersConfig {
    pub count: usize,
    pub rx_height_m: f64,
    pub uplink_power_w: f64,
    pub amplifier_efficiency: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        UsersConfig {
            count: 10,
            rx_height_m: 0.85,
            uplink_power_w: 0.1,
            amplifier_efficiency: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Shot plus thermal noise variance, A^2.
    pub sigma_sum_a2: f64,
    pub rin_db_hz: f64,
    pub bandwidth_ghz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma_sum_a2: 1e-14, rin_db_hz: -155.0, bandwidth_ghz: 5.0 }
    }
}

/// Parameters of the optical downlink schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    /// Number of neighbouring APs that cooperate around each serving AP.
    pub cluster_size: usize,
    /// Optical power per BIA stream as a fraction of the AP power.
    /// `None` means `1 / cluster_size`.
    pub stream_power_fraction: Option<f64>,
    /// Single-user SNR below which an AP does not offer service to a user.
    pub snr_floor_db: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { cluster_size: 4, stream_power_fraction: None, snr_floor_db: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub room: Room,
    pub ap_grid: GridConfig,
    pub optical: OpticalConfig,
    pub detector: DetectorConfig,
    pub wifi: WifiConfig,
    pub users: UsersConfig,
    pub noise: NoiseConfig,
    pub link: LinkConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_owned(), source })?;
        Self::from_json_str(&text).map_err(|source| Error::Json { path: path.to_owned(), source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalAp {
    pub id: usize,
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
    /// Aggregate optical power of all VCSELs in the AP.
    pub transmit_power: f64,
    pub wavelength: f64,
    pub beam_waist: f64,
    pub vcsel_count: u32,
    pub filter_gain: f64,
}

impl OpticalAp {
    pub fn beam(&self) -> BeamGeometry {
        BeamGeometry::new(self.beam_waist, self.wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photodiode {
    pub polar: f64,
    pub azimuth: f64,
    pub area: f64,
    pub responsivity: f64,
    /// Half-angle field of view.
    pub fov: f64,
}

impl Photodiode {
    pub fn orientation(&self) -> Vector3<f64> {
        orientation_vector(self.polar, self.azimuth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconfigurableDetector {
    pub photodiodes: Vec<Photodiode>,
    pub total_area: f64,
    pub arrangement: Arrangement,
}

impl ReconfigurableDetector {
    /// Builds a detector whose `branches` photodiodes share `total_area`.
    /// The rng is only consulted for [`Arrangement::RandomRoa`].
    pub fn build<R: Rng + ?Sized>(cfg: &DetectorConfig, rng: &mut R) -> Result<Self> {
        if cfg.branches == 0 {
            return Err(Error::InvalidConfig("detector needs at least one branch".into()));
        }
        if !(cfg.area_mm2 > 0.0 && cfg.responsivity > 0.0 && cfg.fov_deg > 0.0) {
            return Err(Error::InvalidConfig(
                "detector area, responsivity and fov must be positive".into(),
            ));
        }
        let tilt = cfg.tilt_deg.to_radians();
        let angles = match cfg.arrangement {
            Arrangement::Pyramidal => pyramidal_angles(cfg.branches, tilt)?,
            Arrangement::Hemispherical => hemispherical_angles(cfg.branches, tilt)?,
            Arrangement::RandomRoa => random_roa_angles(cfg.branches, tilt, rng)?,
        };
        let total_area = cfg.area_mm2 * 1e-6;
        let area = total_area / cfg.branches as f64;
        let photodiodes = angles
            .into_iter()
            .map(|(polar, azimuth)| Photodiode {
                polar,
                azimuth,
                area,
                responsivity: cfg.responsivity,
                fov: cfg.fov_deg.to_radians(),
            })
            .collect();
        Ok(ReconfigurableDetector { photodiodes, total_area, arrangement: cfg.arrangement })
    }

    pub fn len(&self) -> usize {
        self.photodiodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photodiodes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub id: usize,
    pub position: Vector3<f64>,
    pub detector: ReconfigurableDetector,
    pub uplink_power: f64,
    pub amplifier_efficiency: f64,
}

impl User {
    /// Power drawn by the RF front end while transmitting uplink.
    pub fn uplink_consumption(&self) -> f64 {
        self.uplink_power / self.amplifier_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WifiAp {
    pub position: Vector3<f64>,
    pub transmit_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_count: usize,
    pub noise_power_dbm: f64,
    pub carrier_hz: f64,
    pub uplink_reservation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub room: Room,
    pub optical_aps: Vec<OpticalAp>,
    pub wifi: WifiAp,
    pub users: Vec<User>,
    pub noise: NoiseParams,
    pub link: LinkConfig,
    pub seed: u64,
}

/// Unit vector for polar angle `polar` (from +z) and azimuth `azimuth`.
pub fn orientation_vector(polar: f64, azimuth: f64) -> Vector3<f64> {
    Vector3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

fn check_tilt(tilt: f64) -> Result<()> {
    if (0.0..PI / 2.0).contains(&tilt) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("tilt {tilt} rad outside [0, pi/2)")))
    }
}

fn check_distinct(angles: &[(f64, f64)], tilt: f64) -> Result<()> {
    let vectors: Vec<_> = angles.iter().map(|&(p, a)| orientation_vector(p, a)).collect();
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            if (a - b).norm() < 1e-9 {
                return Err(Error::DegenerateOrientations { branches: angles.len(), tilt });
            }
        }
    }
    Ok(())
}

fn pyramidal_angles(branches: usize, tilt: f64) -> Result<Vec<(f64, f64)>> {
    check_tilt(tilt)?;
    let angles: Vec<_> =
        (0..branches).map(|m| (tilt, TAU * m as f64 / branches as f64)).collect();
    check_distinct(&angles, tilt)?;
    Ok(angles)
}

fn hemispherical_angles(branches: usize, tilt: f64) -> Result<Vec<(f64, f64)>> {
    check_tilt(tilt)?;
    let ring = branches.saturating_sub(1);
    let mut angles = vec![(0.0, 0.0)];
    angles.extend((0..ring).map(|m| (tilt, TAU * m as f64 / ring as f64)));
    angles.truncate(branches);
    check_distinct(&angles, tilt)?;
    Ok(angles)
}

fn random_roa_angles<R: Rng + ?Sized>(
    branches: usize,
    max_tilt: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    check_tilt(max_tilt)?;
    let angles: Vec<_> = (0..branches)
        .map(|_| (rng.gen::<f64>() * max_tilt, rng.gen::<f64>() * TAU))
        .collect();
    check_distinct(&angles, max_tilt)?;
    Ok(angles)
}

/// Orientation vectors of a pyramidal detector: common polar angle `tilt`,
/// azimuths `2 pi m / branches`.
pub fn pyramidal_orientations(branches: usize, tilt: f64) -> Result<Vec<Vector3<f64>>> {
    if branches == 0 {
        return Err(Error::InvalidConfig("detector needs at least one branch".into()));
    }
    Ok(pyramidal_angles(branches, tilt)?
        .into_iter()
        .map(|(p, a)| orientation_vector(p, a))
        .collect())
}

/// `count` i.i.d. uniform positions strictly inside the footprint at height `rx_height`.
pub fn place_users_uniform<R: Rng + ?Sized>(
    room: &Room,
    count: usize,
    rx_height: f64,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    let open_unit = |rng: &mut R| loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    };
    (0..count)
        .map(|_| {
            let x = open_unit(rng) * room.width;
            let y = open_unit(rng) * room.depth;
            Vector3::new(x, y, rx_height)
        })
        .collect()
}

fn grid_axis(extent: f64, n: usize, spacing: Option<f64>) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("AP grid needs at least one row and column".into()));
    }
    match spacing {
        None => Ok((0..n).map(|i| (i as f64 + 0.5) * extent / n as f64).collect()),
        Some(s) => {
            let span = s * (n - 1) as f64;
            if !(s > 0.0) || span > extent {
                return Err(Error::InvalidConfig(format!(
                    "AP grid spans {span} m but the room is only {extent} m"
                )));
            }
            Ok((0..n).map(|i| extent / 2.0 + (i as f64 - (n - 1) as f64 / 2.0) * s).collect())
        }
    }
}

/// Builds the ceiling grid of optical APs, the WiFi AP and a uniform user drop.
pub fn build_grid_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let room = config.room;
    room.validate()?;
    if config.users.count == 0 {
        return Err(Error::InvalidConfig("user count must be at least 1".into()));
    }
    let rx_height = config.users.rx_height_m;
    if !(0.0..room.height).contains(&rx_height) {
        return Err(Error::InvalidConfig(format!(
            "receiver height {rx_height} m outside [0, {})",
            room.height
        )));
    }
    let optical = &config.optical;
    if !(optical.power_w > 0.0 && optical.wavelength_nm > 0.0 && optical.waist_um > 0.0)
        || optical.vcsels_per_ap == 0
    {
        return Err(Error::InvalidConfig(
            "optical power, wavelength, waist and VCSEL count must be positive".into(),
        ));
    }
    if !(config.users.amplifier_efficiency > 0.0 && config.users.amplifier_efficiency <= 1.0) {
        return Err(Error::InvalidConfig("amplifier efficiency must lie in (0, 1]".into()));
    }
    if config.link.cluster_size < 1 {
        return Err(Error::InvalidConfig("cluster size must be at least 1".into()));
    }
    let wifi_cfg = &config.wifi;
    if !(0.0..=1.0).contains(&wifi_cfg.uplink_reservation) || wifi_cfg.subcarriers == 0 {
        return Err(Error::InvalidConfig(
            "WiFi needs subcarriers and an uplink reservation in [0, 1]".into(),
        ));
    }

    let xs = grid_axis(room.width, config.ap_grid.cols, config.ap_grid.spacing_m)?;
    let ys = grid_axis(room.depth, config.ap_grid.rows, config.ap_grid.spacing_m)?;
    let transmit_power = optical.power_w * optical.vcsels_per_ap as f64;
    let optical_aps = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .enumerate()
        .map(|(id, (x, y))| OpticalAp {
            id,
            position: Vector3::new(x, y, room.height),
            orientation: AP_NORMAL,
            transmit_power,
            wavelength: optical.wavelength_nm * 1e-9,
            beam_waist: optical.waist_um * 1e-6,
            vcsel_count: optical.vcsels_per_ap,
            filter_gain: optical.filter_gain,
        })
        .collect();

    let wifi = WifiAp {
        position: wifi_cfg
            .position
            .map(Vector3::from)
            .unwrap_or_else(|| Vector3::new(room.width / 2.0, room.depth / 2.0, room.height)),
        transmit_power_dbm: wifi_cfg.power_dbm,
        bandwidth_hz: wifi_cfg.bandwidth_mhz * 1e6,
        subcarrier_count: wifi_cfg.subcarriers,
        noise_power_dbm: wifi_cfg.noise_dbm,
        carrier_hz: wifi_cfg.carrier_ghz * 1e9,
        uplink_reservation: wifi_cfg.uplink_reservation,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let positions = place_users_uniform(&room, config.users.count, rx_height, &mut rng);
    let users = positions
        .into_iter()
        .enumerate()
        .map(|(id, position)| {
            Ok(User {
                id,
                position,
                detector: ReconfigurableDetector::build(&config.detector, &mut rng)?,
                uplink_power: config.users.uplink_power_w,
                amplifier_efficiency: config.users.amplifier_efficiency,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        room,
        optical_aps,
        wifi,
        users,
        noise: NoiseParams::from_config(&config.noise)?,
        link: config.link,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(k: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            users: UsersConfig { count: k, ..Default::default() },
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn default_grid_has_sixteen_aps_at_cell_centres() {
        let s = build_grid_scenario(&config(10, 7)).unwrap();
        assert_eq!(s.optical_aps.len(), 16);
        assert_eq!(s.users.len(), 10);
        let centres = [0.625, 1.875, 3.125, 4.375];
        for ap in &s.optical_aps {
            assert!(centres.iter().any(|c| (ap.position.x - c).abs() < 1e-12));
            assert!(centres.iter().any(|c| (ap.position.y - c).abs() < 1e-12));
            assert_eq!(ap.position.z, 3.0);
            assert_eq!(ap.orientation, AP_NORMAL);
        }
    }

    #[test]
    fn single_cell_grid_is_room_centre() {
        let mut cfg = config(1, 0);
        cfg.ap_grid = GridConfig { rows: 1, cols: 1, spacing_m: None };
        let s = build_grid_scenario(&cfg).unwrap();
        assert_eq!(s.optical_aps.len(), 1);
        assert_eq!(s.optical_aps[0].position, Vector3::new(2.5, 2.5, 3.0));
    }

    #[test]
    fn same_seed_same_users() {
        let a = build_grid_scenario(&config(10, 7)).unwrap();
        let b = build_grid_scenario(&config(10, 7)).unwrap();
        let pa: Vec<_> = a.users.iter().map(|u| u.position).collect();
        let pb: Vec<_> = b.users.iter().map(|u| u.position).collect();
        assert_eq!(pa, pb);
        let c = build_grid_scenario(&config(10, 8)).unwrap();
        assert_ne!(pa[0], c.users[0].position);
    }

    #[test]
    fn rejects_zero_users_and_oversized_grid() {
        assert!(matches!(build_grid_scenario(&config(0, 1)), Err(Error::InvalidConfig(_))));
        let mut cfg = config(3, 1);
        cfg.ap_grid = GridConfig { rows: 4, cols: 4, spacing_m: Some(2.0) };
        assert!(matches!(build_grid_scenario(&cfg), Err(Error::InvalidConfig(_))));
        cfg.ap_grid = GridConfig { rows: 0, cols: 4, spacing_m: None };
        assert!(build_grid_scenario(&cfg).is_err());
    }

    #[test]
    fn pyramidal_examples() {
        assert!(matches!(
            pyramidal_orientations(4, 0.0),
            Err(Error::DegenerateOrientations { .. })
        ));
        assert_eq!(pyramidal_orientations(1, 0.0).unwrap(), vec![Vector3::new(0.0, 0.0, 1.0)]);

        let v = pyramidal_orientations(4, PI / 4.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [[s, 0.0, s], [0.0, s, s], [-s, 0.0, s], [0.0, -s, s]];
        for (got, want) in v.iter().zip(expected) {
            assert!((got.norm() - 1.0).abs() < 1e-12);
            for i in 0..3 {
                assert!((got[i] - want[i]).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn hemispherical_has_one_upward_branch() {
        let cfg = DetectorConfig {
            arrangement: Arrangement::Hemispherical,
            tilt_deg: 30.0,
            ..Default::default()
        };
        let det = ReconfigurableDetector::build(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(det.len(), 4);
        assert_eq!(det.photodiodes[0].orientation(), Vector3::new(0.0, 0.0, 1.0));
        assert!(det.photodiodes[1..].iter().all(|p| (p.polar - 30f64.to_radians()).abs() < 1e-15));
        assert!((det.photodiodes[0].area - 15e-6 / 4.0).abs() < 1e-20);
    }

    #[test]
    fn random_roa_is_seeded() {
        let cfg = DetectorConfig { arrangement: Arrangement::RandomRoa, ..Default::default() };
        let a = ReconfigurableDetector::build(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = ReconfigurableDetector::build(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.photodiodes.iter().all(|p| p.polar <= 45f64.to_radians()));
    }

    #[test]
    fn user_placement() {
        let room = Room::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert!(place_users_uniform(&room, 0, 0.85, &mut rng).is_empty());

        let n = 1000;
        let pts = place_users_uniform(&room, n, 0.85, &mut rng);
        assert!(pts.iter().all(|p| room.contains_footprint(p) && p.z == 0.85));
        // Uniform on [0, 5]: sigma of the mean is 5 / sqrt(12 n).
        let sigma = 5.0 / (12.0 * n as f64).sqrt();
        let mx = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        let my = pts.iter().map(|p| p.y).sum::<f64>() / n as f64;
        assert!((mx - 2.5).abs() < 3.0 * sigma, "mean x {mx}");
        assert!((my - 2.5).abs() < 3.0 * sigma, "mean y {my}");

        let a = place_users_uniform(&room, 5, 0.85, &mut ChaCha8Rng::seed_from_u64(4));
        let b = place_users_uniform(&room, 5, 0.85, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn config_json_defaults_fill_missing_keys() {
        let cfg = ScenarioConfig::from_json_str(r#"{"users": {"count": 3}, "seed": 9}"#).unwrap();
        assert_eq!(cfg.users.count, 3);
        assert_eq!(cfg.users.rx_height_m, 0.85);
        assert_eq!(cfg.wifi.subcarriers, 108);
        assert_eq!(cfg.detector.responsivity, 0.53);
        assert_eq!(cfg.noise.rin_db_hz, -155.0);
        assert!(ScenarioConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pyramidal_vectors_unit_and_distinct(m in 2usize..16, tilt in 0.01f64..1.5) {
                let v = pyramidal_orientations(m, tilt).unwrap();
                prop_assert_eq!(v.len(), m);
                for (i, a) in v.iter().enumerate() {
                    prop_assert!((a.norm() - 1.0).abs() < 1e-12);
                    for b in &v[i + 1..] {
                        prop_assert!((a - b).norm() > 1e-9);
                    }
                }
            }

            #[test]
            fn users_strictly_inside(seed in any::<u64>(), w in 0.5f64..20.0, d in 0.5f64..20.0) {
                let room = Room { width: w, depth: d, height: 3.0 };
                let pts = place_users_uniform(&room, 50, 0.85, &mut ChaCha8Rng::seed_from_u64(seed));
                prop_assert!(pts.iter().all(|p| room.contains_footprint(p)));
            }
        }
    }
}
