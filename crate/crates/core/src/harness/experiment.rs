//! Monte Carlo drops: rate matrices per scheme, load balancing, sum rates.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancer::{distributed_lagrangian, LagrangianConfig, RateMatrix};
use crate::downlink::{bia_user_rate, tdma_user_rate, zf_precoder, zf_user_rate, Scheme};
use crate::error::{Error, Result};
use crate::optics::{channel_matrix, noise_from_interference, ChannelMatrix};
use crate::scenario::{build_grid_scenario, Scenario, ScenarioConfig};
use crate::wifi::{wifi_downlink_rate, wifi_shared_rates};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Optical APs plus the WiFi AP.
    Hybrid,
    /// Optical APs only.
    Standalone,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Hybrid => "hybrid",
            Mode::Standalone => "standalone",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: ScenarioConfig,
    pub scheme: Scheme,
    pub mode: Mode,
    pub users: Vec<usize>,
    pub waists_um: Vec<f64>,
    pub drops: usize,
    pub seed: u64,
    pub solver: LagrangianConfig,
}

impl ExperimentSpec {
    pub fn new(config: ScenarioConfig, scheme: Scheme, mode: Mode) -> Self {
        ExperimentSpec {
            users: vec![config.users.count],
            waists_um: vec![config.optical.waist_um],
            seed: config.seed,
            config,
            scheme,
            mode,
            drops: 200,
            solver: LagrangianConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.drops == 0 {
            return Err(Error::InvalidConfig("drops must be at least 1".into()));
        }
        if self.users.is_empty() || self.waists_um.is_empty() {
            return Err(Error::InvalidConfig("sweep lists must be non-empty".into()));
        }
        if self.users.contains(&0) {
            return Err(Error::InvalidConfig("user counts must be at least 1".into()));
        }
        Ok(())
    }

    fn points(&self) -> Vec<(usize, f64)> {
        self.users
            .iter()
            .flat_map(|&k| self.waists_um.iter().map(move |&w| (k, w)))
            .collect()
    }
}

/// Seed of one drop. It depends on the user count but not on the waist,
/// scheme or mode, so those comparisons see the same user placements.
pub fn drop_seed(seed: u64, users: usize, drop: usize) -> u64 {
    let mut z = seed ^ splitmix(users as u64) ^ splitmix(splitmix(drop as u64));
    z = splitmix(z);
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub drop: usize,
    pub sum_rate_bps: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_point: String,
    pub scheme: Scheme,
    pub mode: Mode,
    pub users: usize,
    pub waist_um: f64,
    pub drops: Vec<DropResult>,
    pub mean_bps: f64,
    pub std_error_bps: f64,
    pub status: String,
}

impl ResultRow {
    fn from_drops(spec: &ExperimentSpec, users: usize, waist_um: f64, drops: Vec<DropResult>) -> Self {
        let n = drops.len() as f64;
        let mean = drops.iter().map(|d| d.sum_rate_bps).sum::<f64>() / n;
        let std_error = if drops.len() > 1 {
            let var = drops.iter().map(|d| (d.sum_rate_bps - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let issues = drops.iter().filter(|d| d.status != "ok").count();
        let status = if issues == 0 { "ok".to_string() } else { format!("{issues}/{} drops flagged", drops.len()) };
        ResultRow {
            sweep_point: format!("{}/{}/K={users}/w0={waist_um}", spec.scheme, spec.mode),
            scheme: spec.scheme,
            mode: spec.mode,
            users,
            waist_um,
            drops,
            mean_bps: mean,
            std_error_bps: std_error,
            status,
        }
    }
}

/// One drop's rate matrix together with what is needed to score it.
#[derive(Debug, Clone)]
pub struct DropInstance {
    pub scenario: Scenario,
    pub channels: Vec<ChannelMatrix>,
    /// `K x (L+1)` full-allocation rates; the last column is WiFi.
    pub rates: DMatrix<f64>,
}

/// The AP itself plus its nearest neighbours, `size` APs in total.
pub fn cluster_of(scenario: &Scenario, ap: usize, size: usize) -> Vec<usize> {
    let centre = scenario.optical_aps[ap].position;
    let mut order: Vec<(f64, usize)> = scenario
        .optical_aps
        .iter()
        .map(|a| ((a.position - centre).norm(), a.id))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().take(size).map(|(_, id)| id).collect()
}

/// Noise at photodiode `m` of one user when the APs in `cluster` cooperate:
/// RIN comes from every AP outside the cluster.
fn cluster_noise(s: &Scenario, h: &ChannelMatrix, m: usize, cluster: &[usize]) -> f64 {
    let currents = s
        .optical_aps
        .iter()
        .filter(|a| !cluster.contains(&a.id))
        .map(|a| h.entries[(m, a.id)] * a.transmit_power);
    noise_from_interference(&s.noise, currents)
}

/// Index of the photodiode with the largest gain restricted to `cluster`.
fn best_photodiode(h: &ChannelMatrix, cluster: &[usize]) -> usize {
    (0..h.photodiodes())
        .map(|m| (m, cluster.iter().map(|&l| h.entries[(m, l)].powi(2)).sum::<f64>()))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map_or(0, |(m, _)| m)
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Builds a drop and its rate matrix for the given scheme. Standalone mode
/// leaves the WiFi column at zero.
pub fn build_drop(config: &ScenarioConfig, scheme: Scheme, mode: Mode) -> Result<DropInstance> {
    let s = build_grid_scenario(config)?;
    let channels = s
        .users
        .iter()
        .map(|u| channel_matrix(u, &s.optical_aps))
        .collect::<Result<Vec<_>>>()?;
    let users = s.users.len();
    let aps = s.optical_aps.len();
    let mut rates = DMatrix::zeros(users, aps + 1);
    let bandwidth = s.noise.bandwidth;
    let cluster_size = s.link.cluster_size.min(aps);
    let snr_floor = db_to_linear(s.link.snr_floor_db);

    for l in 0..aps {
        let cluster = cluster_of(&s, l, cluster_size);
        let power = s.optical_aps[l].transmit_power;
        // Users the AP can reach on its own above the SNR floor.
        let mut group: Vec<(usize, f64)> = (0..users)
            .filter_map(|k| {
                let h = &channels[k];
                let (m, g) = (0..h.photodiodes())
                    .map(|m| (m, h.entries[(m, l)]))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))?;
                let snr = (power * g).powi(2) / cluster_noise(&s, h, m, &[l]);
                (g > 0.0 && snr >= snr_floor).then_some((k, snr))
            })
            .collect();
        if group.is_empty() {
            continue;
        }
        group.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let members: Vec<usize> = group.iter().map(|&(k, _)| k).collect();

        match scheme {
            Scheme::Tdma => {
                for &k in &members {
                    let h = &channels[k];
                    let m = best_photodiode(h, &cluster);
                    let row: Vec<f64> = cluster.iter().map(|&j| h.entries[(m, j)]).collect();
                    let sigma2 = cluster_noise(&s, h, m, &cluster);
                    // Full allocation is the single-user rate.
                    rates[(k, l)] = bandwidth * tdma_user_rate(&row, power, sigma2, 1);
                }
            }
            Scheme::Zf => {
                let rows_of = |k: usize| -> (Vec<f64>, f64) {
                    let h = &channels[k];
                    let m = best_photodiode(h, &cluster);
                    let row = cluster.iter().map(|&j| h.entries[(m, j)]).collect();
                    (row, cluster_noise(&s, h, m, &cluster))
                };
                let mut served: Vec<usize> = Vec::new();
                let mut rows: Vec<Vec<f64>> = Vec::new();
                for &k in &members {
                    if served.len() == cluster.len() {
                        break;
                    }
                    let (row, _) = rows_of(k);
                    rows.push(row);
                    let trial = DMatrix::from_fn(rows.len(), cluster.len(), |i, j| rows[i][j]);
                    if zf_precoder(&trial).is_ok() {
                        served.push(k);
                    } else {
                        rows.pop();
                    }
                }
                if served.is_empty() {
                    continue;
                }
                let h = DMatrix::from_fn(rows.len(), cluster.len(), |i, j| rows[i][j]);
                let w = zf_precoder(&h)?.weights;
                let n = served.len() as f64;
                for (i, &k) in served.iter().enumerate() {
                    let sigma2 = rows_of(k).1;
                    rates[(k, l)] = bandwidth * n * zf_user_rate(i, &h, &w, sigma2, power);
                }
            }
            Scheme::Bia => {
                let n = members.len();
                let fraction = s.link.stream_power_fraction.unwrap_or(1.0 / cluster.len() as f64);
                let stream_power = (power * fraction).powi(2);
                for &k in &members {
                    let h = &channels[k];
                    let modes = h.photodiodes().min(cluster.len());
                    if modes < 2 {
                        let m = best_photodiode(h, &cluster);
                        let row: Vec<f64> = cluster.iter().map(|&j| h.entries[(m, j)]).collect();
                        let sigma2 = cluster_noise(&s, h, m, &cluster);
                        rates[(k, l)] = bandwidth * n as f64 * tdma_user_rate(&row, power, sigma2, n);
                        continue;
                    }
                    // Strongest photodiodes serve as the preset modes.
                    let mut order: Vec<(usize, f64)> = (0..h.photodiodes())
                        .map(|m| (m, cluster.iter().map(|&j| h.entries[(m, j)].powi(2)).sum::<f64>()))
                        .collect();
                    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    let picked: Vec<usize> = order.iter().take(modes).map(|&(m, _)| m).collect();
                    let hk = DMatrix::from_fn(modes, modes, |i, j| h.entries[(picked[i], cluster[j])]);
                    let sigma2 = picked
                        .iter()
                        .map(|&m| cluster_noise(&s, h, m, &cluster))
                        .fold(0.0, f64::max);
                    rates[(k, l)] = bandwidth * n as f64 * bia_user_rate(&hk, stream_power, sigma2, n)?;
                }
            }
        }
    }

    if mode == Mode::Hybrid {
        for (k, u) in s.users.iter().enumerate() {
            rates[(k, aps)] = wifi_downlink_rate(u, &s.wifi);
        }
    }
    Ok(DropInstance { scenario: s, channels, rates })
}

/// Sum rate and status of one drop after load balancing.
pub fn solve_drop(instance: &DropInstance, solver: &LagrangianConfig) -> Result<(f64, String)> {
    let rates = &instance.rates;
    let (users, cols) = rates.shape();
    let wifi_col = cols - 1;
    let served: Vec<usize> = (0..users).filter(|&k| rates.row(k).iter().any(|&r| r > 0.0)).collect();
    let unserved = users - served.len();
    let mut status = Vec::new();
    let mut sum = 0.0;
    if !served.is_empty() {
        let sub = RateMatrix::new(DMatrix::from_fn(served.len(), cols, |i, j| rates[(served[i], j)]))?;
        let out = distributed_lagrangian(&sub, solver)?;
        if !out.converged {
            status.push("nonconverged".to_string());
        }
        let a = &out.assignment;
        let mut wifi_full = Vec::new();
        for (i, &l) in a.choice.iter().enumerate() {
            if l == wifi_col {
                wifi_full.push(sub.get(i, l));
            } else {
                sum += a.shares[(i, l)] * sub.get(i, l);
            }
        }
        let w = &instance.scenario.wifi;
        sum += wifi_shared_rates(&wifi_full, w.subcarrier_count, w.uplink_reservation)
            .iter()
            .sum::<f64>();
    }
    if unserved > 0 {
        status.push(format!("unserved={unserved}"));
    }
    let status = if status.is_empty() { "ok".to_string() } else { status.join(";") };
    Ok((sum, status))
}

fn run_point(spec: &ExperimentSpec, users: usize, waist_um: f64) -> Result<Vec<DropResult>> {
    (0..spec.drops)
        .into_par_iter()
        .map(|drop| {
            let mut cfg = spec.config.clone();
            cfg.users.count = users;
            cfg.optical.waist_um = waist_um;
            cfg.seed = drop_seed(spec.seed, users, drop);
            let instance = build_drop(&cfg, spec.scheme, spec.mode)?;
            let (sum_rate_bps, status) = solve_drop(&instance, &spec.solver)?;
            Ok(DropResult { drop, sum_rate_bps, status })
        })
        .collect::<Result<Vec<_>>>()
        .map(|mut v| {
            v.sort_by_key(|d| d.drop);
            v
        })
}

/// Mean sum rate at every `(users, waist)` point of the sweep.
pub fn run_sum_rate_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    spec.points()
        .into_iter()
        .map(|(k, w)| Ok(ResultRow::from_drops(spec, k, w, run_point(spec, k, w)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfSeries {
    pub label: String,
    /// Sorted per-drop sum rates.
    pub samples: Vec<f64>,
    /// Empirical CDF levels `i / n`.
    pub levels: Vec<f64>,
}

impl CdfSeries {
    pub fn from_samples(label: String, mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let n = samples.len() as f64;
        let levels = (1..=samples.len()).map(|i| i as f64 / n).collect();
        CdfSeries { label, samples, levels }
    }

    /// Sample quantile at level `q` (inverse empirical CDF).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.samples.len();
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.samples[idx]
    }
}

/// Per-drop sum rates of every sweep point, as empirical CDFs.
pub fn run_cdf_experiment(spec: &ExperimentSpec) -> Result<Vec<CdfSeries>> {
    Ok(run_sum_rate_sweep(spec)?
        .into_iter()
        .map(|row| {
            let samples = row.drops.iter().map(|d| d.sum_rate_bps).collect();
            CdfSeries::from_samples(row.sweep_point, samples)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.users.count = 4;
        cfg
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = drop_seed(1, 10, 0);
        assert_eq!(a, drop_seed(1, 10, 0));
        assert_ne!(a, drop_seed(1, 10, 1));
        assert_ne!(a, drop_seed(1, 11, 0));
        assert_ne!(a, drop_seed(2, 10, 0));
    }

    #[test]
    fn clusters_are_nearest_aps() {
        let s = build_grid_scenario(&ScenarioConfig::default()).unwrap();
        assert_eq!(cluster_of(&s, 0, 4), vec![0, 1, 4, 5]);
        assert_eq!(cluster_of(&s, 5, 1), vec![5]);
        assert_eq!(cluster_of(&s, 5, 4)[0], 5);
    }

    #[test]
    fn standalone_has_no_wifi_column() {
        for scheme in [Scheme::Zf, Scheme::Bia, Scheme::Tdma] {
            let d = build_drop(&small_config(), scheme, Mode::Standalone).unwrap();
            assert!(d.rates.column(16).iter().all(|&r| r == 0.0));
            let d = build_drop(&small_config(), scheme, Mode::Hybrid).unwrap();
            assert!(d.rates.column(16).iter().all(|&r| r > 0.0));
            assert!(d.rates.iter().all(|r| r.is_finite() && *r >= 0.0));
        }
    }

    #[test]
    fn single_user_gets_its_best_rate() {
        let mut cfg = small_config();
        cfg.users.count = 1;
        let mut spec = ExperimentSpec::new(cfg.clone(), Scheme::Bia, Mode::Hybrid);
        spec.drops = 1;
        let rows = run_sum_rate_sweep(&spec).unwrap();
        let mut c = cfg;
        c.seed = drop_seed(spec.seed, 1, 0);
        let d = build_drop(&c, Scheme::Bia, Mode::Hybrid).unwrap();
        let best = d.rates.row(0).iter().copied().fold(0.0, f64::max);
        let got = rows[0].drops[0].sum_rate_bps;
        // WiFi hands out whole subcarriers, so a lone user gets all of them.
        assert!((got - best).abs() <= 1e-9 * best, "{got} vs {best}");
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let mut spec = ExperimentSpec::new(small_config(), Scheme::Zf, Mode::Standalone);
        spec.drops = 6;
        spec.users = vec![2, 3];
        spec.waists_um = vec![5.0, 30.0];
        let rows = run_sum_rate_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            let lo = row.drops.iter().map(|d| d.sum_rate_bps).fold(f64::INFINITY, f64::min);
            let hi = row.drops.iter().map(|d| d.sum_rate_bps).fold(0.0, f64::max);
            assert!(lo - 1e-6 <= row.mean_bps && row.mean_bps <= hi + 1e-6);
            assert!(row.drops.iter().all(|d| d.sum_rate_bps.is_finite() && d.sum_rate_bps >= 0.0));
        }
        spec.drops = 0;
        assert!(run_sum_rate_sweep(&spec).is_err());
    }

    #[test]
    fn cdf_levels() {
        let c = CdfSeries::from_samples("x".into(), vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(c.samples, vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(c.levels, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(c.quantile(0.5), 2.0);
        assert_eq!(c.quantile(1.0), 3.0);
        assert_eq!(c.quantile(0.1), 1.0);
    }
}
