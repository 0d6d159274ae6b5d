//! Joint user association and resource allocation under log utility.
//!
//! Each user connects to exactly one AP (an optical AP or the WiFi AP, which
//! is the last column of the rate matrix) and every AP splits its resources
//! equally among its users. Two solvers are provided: exhaustive enumeration
//! and a distributed dual-ascent scheme where APs publish prices `mu_l`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default cap on the number of assignments enumerated.
pub const DEFAULT_SEARCH_BUDGET: u128 = 10_000_000;
const TIE_TOLERANCE: f64 = 1e-12;

/// `K x (L+1)` full-allocation rates in bit/s.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    r: DMatrix<f64>,
}

impl RateMatrix {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        if r.nrows() == 0 || r.ncols() == 0 {
            return Err(Error::InvalidConfig("rate matrix must be non-empty".into()));
        }
        if let Some(bad) = r.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("rate {bad} is not finite and non-negative")));
        }
        Ok(RateMatrix { r })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("ragged rate matrix".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn users(&self) -> usize {
        self.r.nrows()
    }

    pub fn aps(&self) -> usize {
        self.r.ncols()
    }

    pub fn get(&self, user: usize, ap: usize) -> f64 {
        self.r[(user, ap)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Users whose every entry is zero.
    pub fn unserveable(&self) -> Vec<usize> {
        (0..self.users()).filter(|&k| self.r.row(k).iter().all(|&v| v == 0.0)).collect()
    }

    fn check_serveable(&self) -> Result<()> {
        match self.unserveable().first() {
            Some(&user) => Err(Error::UnserveableUser { user }),
            None => Ok(()),
        }
    }
}

/// Association `x` (stored as one AP index per user) and resource shares `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub choice: Vec<usize>,
    pub shares: DMatrix<f64>,
}

impl Assignment {
    /// Equal shares `1 / K_l` for the given association.
    pub fn equal_share(choice: Vec<usize>, aps: usize) -> Self {
        let shares = equal_share(&choice, aps);
        Assignment { choice, shares }
    }

    /// Binary association matrix.
    pub fn x(&self) -> DMatrix<u8> {
        DMatrix::from_fn(self.shares.nrows(), self.shares.ncols(), |k, l| {
            u8::from(self.choice[k] == l)
        })
    }

    /// Users per AP.
    pub fn loads(&self) -> Vec<usize> {
        loads(&self.choice, self.shares.ncols())
    }

    pub fn validate(&self) -> Result<()> {
        let (users, aps) = self.shares.shape();
        if self.choice.len() != users {
            return Err(Error::Infeasible(format!(
                "{} associations for {users} users",
                self.choice.len()
            )));
        }
        if let Some(k) = self.choice.iter().position(|&l| l >= aps) {
            return Err(Error::Infeasible(format!("user {k} is associated with no AP")));
        }
        for l in 0..aps {
            let total: f64 = self.shares.column(l).sum();
            if total > 1.0 + 1e-9 {
                return Err(Error::Infeasible(format!("AP {l} hands out {total} of its resources")));
            }
        }
        for ((k, l), &e) in self.shares.iter().enumerate().map(|(i, e)| ((i % users, i / users), e)) {
            if !(0.0..=1.0).contains(&e) || (e > 0.0 && self.choice[k] != l) {
                return Err(Error::Infeasible(format!("share {e} of user {k} on AP {l}")));
            }
        }
        Ok(())
    }

    /// Throughput of every user, `sum_l x e r`.
    pub fn user_rates(&self, rates: &RateMatrix) -> Vec<f64> {
        self.choice
            .iter()
            .enumerate()
            .map(|(k, &l)| self.shares[(k, l)] * rates.get(k, l))
            .collect()
    }
}

fn loads(choice: &[usize], aps: usize) -> Vec<usize> {
    let mut n = vec![0usize; aps];
    for &l in choice {
        n[l] += 1;
    }
    n
}

/// `sum_k ln(sum_l x e r)`, or `-inf` if some user gets nothing.
pub fn utility(assign: &Assignment, rates: &RateMatrix) -> Result<f64> {
    assign.validate()?;
    if assign.shares.shape() != rates.matrix().shape() {
        return Err(Error::Infeasible("assignment and rate matrix differ in shape".into()));
    }
    Ok(assign.user_rates(rates).iter().map(|r| r.ln()).sum())
}

/// Shares `1 / K_l` on each user's chosen AP.
pub fn equal_share(choice: &[usize], aps: usize) -> DMatrix<f64> {
    let n = loads(choice, aps);
    let mut e = DMatrix::zeros(choice.len(), aps);
    for (k, &l) in choice.iter().enumerate() {
        e[(k, l)] = 1.0 / n[l] as f64;
    }
    e
}

/// Utility of `choice` under equal shares, without building the matrices.
fn equal_share_utility(choice: &[usize], rates: &RateMatrix, counts: &mut [usize]) -> f64 {
    counts.fill(0);
    let mut u = 0.0;
    for (k, &l) in choice.iter().enumerate() {
        counts[l] += 1;
        u += rates.get(k, l).ln();
    }
    counts.iter().filter(|&&n| n > 1).map(|&n| n as f64 * (n as f64).ln()).fold(u, |u, c| u - c)
}

/// Globally optimal association under equal shares, found by enumerating all
/// `(L+1)^K` associations. Ties go to the lexicographically smallest choice.
pub fn exhaustive_optimum(rates: &RateMatrix) -> Result<(Assignment, f64)> {
    exhaustive_optimum_with_budget(rates, DEFAULT_SEARCH_BUDGET)
}

pub fn exhaustive_optimum_with_budget(rates: &RateMatrix, budget: u128) -> Result<(Assignment, f64)> {
    rates.check_serveable()?;
    let (users, aps) = (rates.users(), rates.aps());
    let size = u32::try_from(users)
        .ok()
        .and_then(|k| (aps as u128).checked_pow(k))
        .unwrap_or(u128::MAX);
    if size > budget {
        return Err(Error::SearchTooLarge { size, budget });
    }
    let mut choice = vec![0usize; users];
    let mut counts = vec![0usize; aps];
    let mut best = choice.clone();
    let mut best_u = equal_share_utility(&choice, rates, &mut counts);
    // Odometer with the last user as the fastest digit gives lexicographic order.
    loop {
        let mut k = users;
        loop {
            if k == 0 {
                let assign = Assignment::equal_share(best, aps);
                return Ok((assign, best_u));
            }
            k -= 1;
            choice[k] += 1;
            if choice[k] < aps {
                break;
            }
            choice[k] = 0;
        }
        let u = equal_share_utility(&choice, rates, &mut counts);
        if u > best_u + TIE_TOLERANCE * best_u.abs().max(1.0) || best_u == f64::NEG_INFINITY && u > best_u {
            best_u = u;
            best.copy_from_slice(&choice);
        }
    }
}

/// Prices and step schedule of the dual ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub step0: f64,
    /// Number of updates applied so far.
    pub iteration: usize,
    /// Demanded load per AP at each update.
    pub load_history: Vec<Vec<usize>>,
}

impl DualState {
    pub fn new(aps: usize, step0: f64) -> Self {
        DualState { mu: vec![0.0; aps], step0, iteration: 0, load_history: Vec::new() }
    }

    /// Step size of the next update, `step0 / sqrt(t)`.
    pub fn step(&self) -> f64 {
        self.step0 / ((self.iteration + 1) as f64).sqrt()
    }
}

/// The AP a user picks given the current prices: `argmax_l ln r - mu_l`.
pub fn user_subproblem(k: usize, mu: &[f64], rates: &RateMatrix) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (l, &m) in mu.iter().enumerate().take(rates.aps()) {
        let r = rates.get(k, l);
        if r <= 0.0 {
            continue;
        }
        let score = r.ln() - m;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((l, score));
        }
    }
    best.map(|(l, _)| l).ok_or(Error::UnserveableUser { user: k })
}

/// Load at which the AP's own term `K (mu - ln K)` is stationary.
pub fn ap_expected_load(mu: f64) -> f64 {
    (mu - 1.0).exp()
}

/// Projected subgradient step on every price.
pub fn multiplier_update(state: &DualState, demanded: &[usize]) -> DualState {
    let step = state.step();
    let mu = state
        .mu
        .iter()
        .zip(demanded)
        .map(|(&m, &d)| (m + step * (d as f64 - ap_expected_load(m))).max(0.0))
        .collect();
    let mut load_history = state.load_history.clone();
    load_history.push(demanded.to_vec());
    DualState { mu, step0: state.step0, iteration: state.iteration + 1, load_history }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianConfig {
    pub step0: f64,
    pub max_iters: usize,
    /// Stop once the association has been unchanged for this many iterations.
    pub patience: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig { step0: 1.0, max_iters: 500, patience: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub mu: Vec<f64>,
    pub load: Vec<usize>,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianOutcome {
    /// Best association seen, with equal shares.
    pub assignment: Assignment,
    pub utility: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

/// Change in equal-share utility when user `k` moves from its AP to `to`.
fn move_gain(k: usize, from: usize, to: usize, rates: &RateMatrix, counts: &[usize]) -> f64 {
    let f = |n: usize| if n > 1 { n as f64 * (n as f64).ln() } else { 0.0 };
    let (na, nb) = (counts[from], counts[to]);
    rates.get(k, to).ln() - rates.get(k, from).ln() - (f(nb + 1) - f(nb)) + (f(na) - f(na - 1))
}

/// Users take turns moving to the AP that raises the utility most given the
/// loads the APs broadcast. Equal-share log utility is an exact potential
/// for these moves, so the loop ends.
fn best_response(choice: &mut [usize], rates: &RateMatrix, counts: &mut [usize]) {
    counts.fill(0);
    for &l in choice.iter() {
        counts[l] += 1;
    }
    let max_passes = 100 * choice.len().max(1);
    for _ in 0..max_passes {
        let mut moved = false;
        for k in 0..choice.len() {
            let from = choice[k];
            let mut best = (from, 1e-12);
            for to in (0..rates.aps()).filter(|&to| to != from && rates.get(k, to) > 0.0) {
                let gain = move_gain(k, from, to, rates, counts);
                if gain > best.1 {
                    best = (to, gain);
                }
            }
            if best.0 != from {
                counts[from] -= 1;
                counts[best.0] += 1;
                choice[k] = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Distributed dual ascent: users answer prices with their best AP, APs move
/// prices toward the gap between demanded and expected load. Each priced
/// association is then polished by load-aware best responses, and the best
/// association seen is returned.
pub fn distributed_lagrangian(rates: &RateMatrix, cfg: &LagrangianConfig) -> Result<LagrangianOutcome> {
    rates.check_serveable()?;
    if !(cfg.step0 > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("dual ascent needs step0 > 0 and max_iters >= 1".into()));
    }
    let (users, aps) = (rates.users(), rates.aps());
    let mut state = DualState::new(aps, cfg.step0);
    let mut counts = vec![0usize; aps];
    let mut trace = Vec::new();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut previous: Option<Vec<usize>> = None;
    let mut stable = 0usize;
    let mut converged = false;

    for iteration in 1..=cfg.max_iters {
        let choice = (0..users)
            .map(|k| user_subproblem(k, &state.mu, rates))
            .collect::<Result<Vec<_>>>()?;
        let load = loads(&choice, aps);
        let mut polished = choice.clone();
        best_response(&mut polished, rates, &mut counts);
        let u = equal_share_utility(&polished, rates, &mut counts);
        trace.push(TraceRow { iteration, mu: state.mu.clone(), load: load.clone(), utility: u });
        if best.as_ref().is_none_or(|(_, b)| u > *b) {
            best = Some((polished, u));
        }
        if previous.as_ref() == Some(&choice) {
            stable += 1;
        } else {
            stable = 0;
        }
        previous = Some(choice);
        if stable + 1 >= cfg.patience {
            converged = true;
            break;
        }
        state = multiplier_update(&state, &load);
    }

    let (choice, utility) = best.expect("at least one iteration");
    Ok(LagrangianOutcome {
        assignment: Assignment::equal_share(choice, aps),
        utility,
        converged,
        iterations: trace.len(),
        trace,
    })
}

/// Writes the solver trace as CSV: `iteration,mu_0..,load_0..,utility`.
pub fn write_trace<W: Write>(trace: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let aps = trace.first().map_or(0, |t| t.mu.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..aps).map(|l| format!("mu_{l}")));
    header.extend((0..aps).map(|l| format!("load_{l}")));
    header.push("utility".into());
    w.write_record(&header)?;
    for row in trace {
        let mut rec = vec![row.iteration.to_string()];
        rec.extend(row.mu.iter().map(|m| m.to_string()));
        rec.extend(row.load.iter().map(|n| n.to_string()));
        rec.push(row.utility.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_trace(trace: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
    write_trace(trace, file).map_err(|source| Error::Csv { path: path.to_owned(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn rates(rows: &[Vec<f64>]) -> RateMatrix {
        RateMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn utility_examples() {
        let r = rates(&[vec![E]]);
        let a = Assignment::equal_share(vec![0], 1);
        assert!((utility(&a, &r).unwrap() - 1.0).abs() < 1e-15);

        let r = rates(&[vec![4.0], vec![4.0]]);
        let a = Assignment::equal_share(vec![0, 0], 1);
        assert!((utility(&a, &r).unwrap() - 2.0 * LN_2).abs() < 1e-15);

        let r = rates(&[vec![0.0, 1.0]]);
        let a = Assignment::equal_share(vec![0], 2);
        assert_eq!(utility(&a, &r).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn infeasible_assignments_rejected() {
        let r = rates(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let mut a = Assignment::equal_share(vec![0, 0], 2);
        a.shares[(0, 0)] = 0.8;
        assert!(matches!(utility(&a, &r), Err(Error::Infeasible(_))));
        let mut a = Assignment::equal_share(vec![0, 1], 2);
        a.shares[(0, 1)] = 0.1;
        assert!(matches!(utility(&a, &r), Err(Error::Infeasible(_))));
        let a = Assignment { choice: vec![0, 2], shares: DMatrix::zeros(2, 2) };
        assert!(a.validate().is_err());
    }

    #[test]
    fn equal_share_examples() {
        let e = equal_share(&[0, 0, 0], 2);
        assert!(e.column(0).iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(e.column(1).iter().all(|&v| v == 0.0));
        let e = equal_share(&[0, 2, 2, 1, 2], 4);
        for l in 0..3 {
            assert!((e.column(l).sum() - 1.0).abs() < 1e-15);
        }
        assert_eq!(e.column(3).sum(), 0.0);
    }

    #[test]
    fn exhaustive_examples() {
        let r = rates(&[vec![4.0, 2.0], vec![4.0, 2.0]]);
        let (a, u) = exhaustive_optimum(&r).unwrap();
        assert_eq!(a.choice, vec![0, 1]);
        assert!((u - (4f64.ln() + 2f64.ln())).abs() < 1e-12);
        assert!(u > 2.0 * LN_2);

        let r = rates(&[vec![1.0, 7.0, 3.0]]);
        assert_eq!(exhaustive_optimum(&r).unwrap().0.choice, vec![1]);

        let r = rates(&[vec![5.0; 3], vec![5.0; 3], vec![5.0; 3]]);
        assert_eq!(exhaustive_optimum(&r).unwrap().0.choice, vec![0, 1, 2]);

        let r = rates(&vec![vec![1.0; 17]; 10]);
        assert!(matches!(exhaustive_optimum(&r), Err(Error::SearchTooLarge { .. })));
        let r = rates(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert!(matches!(exhaustive_optimum(&r), Err(Error::UnserveableUser { user: 1 })));
    }

    #[test]
    fn subproblem_examples() {
        let r = rates(&[vec![8.0, 4.0]]);
        assert_eq!(user_subproblem(0, &[0.0, 0.0], &r).unwrap(), 0);
        assert_eq!(user_subproblem(0, &[2.0, 0.0], &r).unwrap(), 1);
        // Shifting every price leaves the choice alone.
        assert_eq!(user_subproblem(0, &[7.0, 5.0], &r).unwrap(), 1);
        assert_eq!(user_subproblem(0, &[5.0, 5.0], &r).unwrap(), 0);
        let r = rates(&[vec![0.0, 0.0]]);
        assert!(matches!(user_subproblem(0, &[0.0, 0.0], &r), Err(Error::UnserveableUser { user: 0 })));
    }

    #[test]
    fn load_and_update_examples() {
        assert_eq!(ap_expected_load(1.0), 1.0);
        assert!((ap_expected_load(1.0 + 4f64.ln()) - 4.0).abs() < 1e-12);

        let s = DualState { mu: vec![1.0], step0: 1.0, iteration: 0, load_history: vec![] };
        assert_eq!(multiplier_update(&s, &[1]).mu, vec![1.0]);
        assert!(multiplier_update(&s, &[3]).mu[0] > 1.0);
        let s = DualState { mu: vec![1.0], step0: 2.0, iteration: 0, load_history: vec![] };
        assert_eq!(multiplier_update(&s, &[0]).mu, vec![0.0]);
        let next = multiplier_update(&s, &[0]);
        assert_eq!(next.iteration, 1);
        assert!((next.step() - 2.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lagrangian_examples() {
        let r = rates(&[vec![3.0, 9.0, 1.0]]);
        let out = distributed_lagrangian(&r, &LagrangianConfig::default()).unwrap();
        assert_eq!(out.assignment.choice, vec![1]);
        assert!(out.converged);

        let r = rates(&[vec![4.0, 2.0], vec![4.0, 2.0]]);
        let out = distributed_lagrangian(&r, &LagrangianConfig::default()).unwrap();
        let (_, opt) = exhaustive_optimum(&r).unwrap();
        assert!((out.utility - opt).abs() < 1e-9);
    }

    #[test]
    fn trace_csv() {
        let r = rates(&[vec![4.0, 2.0], vec![4.0, 2.0]]);
        let out = distributed_lagrangian(&r, &LagrangianConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iteration,mu_0,mu_1,load_0,load_1,utility"));
        assert_eq!(lines.count(), out.trace.len());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_rates(seed: u64, users: usize, aps: usize) -> RateMatrix {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            RateMatrix::new(DMatrix::from_fn(users, aps, |_, _| 10f64.powf(rng.gen_range(6.0..9.0))))
                .unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn equal_share_beats_any_feasible_split(seed in any::<u64>(), users in 1usize..7, aps in 1usize..4) {
                let r = random_rates(seed, users, aps);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let choice: Vec<usize> = (0..users).map(|_| rng.gen_range(0..aps)).collect();
                let best = utility(&Assignment::equal_share(choice.clone(), aps), &r).unwrap();
                // Random points of the share simplex of every AP.
                for _ in 0..50 {
                    let mut shares = DMatrix::zeros(users, aps);
                    for l in 0..aps {
                        let members: Vec<usize> = (0..users).filter(|&k| choice[k] == l).collect();
                        let w: Vec<f64> = members.iter().map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                        let total: f64 = w.iter().sum();
                        for (&k, wk) in members.iter().zip(&w) {
                            shares[(k, l)] = wk / total;
                        }
                    }
                    let a = Assignment { choice: choice.clone(), shares };
                    prop_assert!(utility(&a, &r).unwrap() <= best + 1e-9);
                }
            }

            #[test]
            fn exhaustive_dominates_lagrangian(seed in any::<u64>(), users in 1usize..6, aps in 1usize..5) {
                let r = random_rates(seed, users, aps);
                let (_, opt) = exhaustive_optimum(&r).unwrap();
                let out = distributed_lagrangian(&r, &LagrangianConfig::default()).unwrap();
                prop_assert!(out.utility <= opt + 1e-9);
                out.assignment.validate().unwrap();
                for row in &out.trace {
                    prop_assert!(row.mu.iter().all(|&m| m >= 0.0));
                    prop_assert_eq!(row.load.iter().sum::<usize>(), users);
                }
            }

            #[test]
            fn scale_invariance(seed in any::<u64>(), users in 1usize..6, aps in 1usize..4, c in 0.01f64..100.0) {
                let r = random_rates(seed, users, aps);
                let scaled = RateMatrix::new(r.matrix() * c).unwrap();
                let (a1, u1) = exhaustive_optimum(&r).unwrap();
                let (a2, u2) = exhaustive_optimum(&scaled).unwrap();
                prop_assert_eq!(a1.choice, a2.choice);
                prop_assert!((u2 - u1 - users as f64 * c.ln()).abs() < 1e-9 * u1.abs().max(1.0));
                let d1 = distributed_lagrangian(&r, &LagrangianConfig::default()).unwrap();
                let d2 = distributed_lagrangian(&scaled, &LagrangianConfig::default()).unwrap();
                prop_assert_eq!(d1.assignment.choice, d2.assignment.choice);
            }

            #[test]
            fn extra_column_never_hurts(seed in any::<u64>(), users in 1usize..6, aps in 1usize..4) {
                let r = random_rates(seed, users, aps + 1);
                let without = RateMatrix::new(r.matrix().columns(0, aps).into_owned()).unwrap();
                let (_, u_with) = exhaustive_optimum(&r).unwrap();
                let (_, u_without) = exhaustive_optimum(&without).unwrap();
                prop_assert!(u_with >= u_without - 1e-12);
            }
        }
    }
}
