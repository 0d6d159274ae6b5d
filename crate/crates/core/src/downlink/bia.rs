//! Blind interference alignment: supersymbol construction and user rate.
//!
//! With `L` transmitters and `K` users, each user switches its reconfigurable
//! detector among `L` preset modes. Write `b = L - 1`. The supersymbol is
//!
//! * Block 1: `b^K` slots, one per digit vector `(d_0, .., d_{K-1})` in base
//!   `b`. Every user is served; user `j` sits in mode `d_j`.
//! * Block 2: `K` sub-blocks of `b^(K-1)` slots. Sub-block `k` serves only
//!   user `k`, who sits in mode `L - 1`; every other user keeps the mode given
//!   by its digit, so it can measure (and later subtract) the interference it
//!   saw in Block 1.
//!
//! User `k` owns one alignment block per digit vector `t` of the other users:
//! the `b` Block-1 slots where only `d_k` varies, followed by slot `t` of
//! sub-block `k`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_rational::Ratio;

use crate::error::{Error, Result};

/// Default cap on the number of slots a schedule may span.
pub const DEFAULT_SLOT_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    One,
    /// Orthogonal sub-block of `user`.
    Two { user: usize },
}

/// Implicit slot table of a BIA supersymbol. Slot contents are computed on
/// demand, so large `K` costs nothing until queried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiaSchedule {
    aps: usize,
    users: usize,
    /// `b^j` for `j = 0..=K`.
    powers: Vec<u64>,
    block1_len: u64,
    block2_len: u64,
}

/// `(L - 1)^K`, `K (L - 1)^(K - 1)` and their sum, or `None` on overflow.
fn block_lengths(aps: usize, users: usize) -> Option<(u128, u128, u128)> {
    let base = aps.checked_sub(1)? as u128;
    let per_user = base.checked_pow(u32::try_from(users.checked_sub(1)?).ok()?)?;
    let block1 = per_user.checked_mul(base)?;
    let block2 = per_user.checked_mul(users as u128)?;
    Some((block1, block2, block1.checked_add(block2)?))
}

impl BiaSchedule {
    pub fn new(aps: usize, users: usize) -> Result<Self> {
        Self::with_budget(aps, users, DEFAULT_SLOT_BUDGET)
    }

    pub fn with_budget(aps: usize, users: usize, budget: u128) -> Result<Self> {
        if aps < 2 || users < 1 {
            return Err(Error::InvalidConfig(format!(
                "BIA needs L >= 2 and K >= 1 (got L={aps}, K={users})"
            )));
        }
        let (block1, block2, total) = block_lengths(aps, users).ok_or(Error::ScheduleTooLarge {
            aps,
            users,
            length: u128::MAX,
            budget,
        })?;
        if total > budget || total > u64::MAX as u128 {
            return Err(Error::ScheduleTooLarge { aps, users, length: total, budget });
        }
        let base = (aps - 1) as u64;
        let mut powers = Vec::with_capacity(users + 1);
        let mut p = 1u64;
        for _ in 0..=users {
            powers.push(p);
            // Saturation only affects b^K when b^K * b would overflow, which
            // the budget check above already excludes for indices we use.
            p = p.saturating_mul(base);
        }
        Ok(BiaSchedule {
            aps,
            users,
            powers,
            block1_len: block1 as u64,
            block2_len: block2 as u64,
        })
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn block1_len(&self) -> u64 {
        self.block1_len
    }

    pub fn block2_len(&self) -> u64 {
        self.block2_len
    }

    pub fn len(&self) -> u64 {
        self.block1_len + self.block2_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alignment_blocks_per_user(&self) -> u64 {
        self.powers[self.users - 1]
    }

    fn base(&self) -> u64 {
        (self.aps - 1) as u64
    }

    pub fn block(&self, slot: u64) -> Block {
        assert!(slot < self.len(), "slot {slot} outside schedule of {}", self.len());
        if slot < self.block1_len {
            Block::One
        } else {
            let user = ((slot - self.block1_len) / self.alignment_blocks_per_user()) as usize;
            Block::Two { user }
        }
    }

    fn digit(&self, value: u64, position: usize) -> u64 {
        (value / self.powers[position]) % self.base()
    }

    /// Digit vector index `s` with position `k` removed.
    fn drop_digit(&self, s: u64, k: usize) -> u64 {
        let low = s % self.powers[k];
        let high = s / self.powers[k + 1];
        high * self.powers[k] + low
    }

    /// Inverse of [`Self::drop_digit`]: insert digit `d` at position `k`.
    fn insert_digit(&self, t: u64, k: usize, d: u64) -> u64 {
        let low = t % self.powers[k];
        let high = t / self.powers[k];
        high * self.powers[k + 1] + d * self.powers[k] + low
    }

    /// Preset mode (`0..L`) of `user` during `slot`.
    pub fn mode(&self, slot: u64, user: usize) -> usize {
        match self.block(slot) {
            Block::One => self.digit(slot, user) as usize,
            Block::Two { user: owner } => {
                if owner == user {
                    self.aps - 1
                } else {
                    let t = slot - self.block1_len - owner as u64 * self.alignment_blocks_per_user();
                    let position = if user < owner { user } else { user - 1 };
                    self.digit(t, position) as usize
                }
            }
        }
    }

    /// Alignment block of `user` that `slot` belongs to, if any.
    pub fn alignment_index(&self, slot: u64, user: usize) -> Option<u64> {
        match self.block(slot) {
            Block::One => Some(self.drop_digit(slot, user)),
            Block::Two { user: owner } if owner == user => {
                Some(slot - self.block1_len - owner as u64 * self.alignment_blocks_per_user())
            }
            Block::Two { .. } => None,
        }
    }

    /// Symbols transmitted in `slot`, as `(user, alignment block)` pairs.
    pub fn served(&self, slot: u64) -> Vec<(usize, u64)> {
        match self.block(slot) {
            Block::One => (0..self.users).map(|k| (k, self.drop_digit(slot, k))).collect(),
            Block::Two { user } => vec![(user, self.alignment_index(slot, user).expect("owner"))],
        }
    }

    /// The `L` slots of alignment block `index` of `user`: `L - 1` slots from
    /// Block 1 in increasing order, then one slot from Block 2.
    pub fn alignment_block(&self, user: usize, index: u64) -> Vec<u64> {
        assert!(user < self.users && index < self.alignment_blocks_per_user());
        let mut slots: Vec<u64> =
            (0..self.base()).map(|d| self.insert_digit(index, user, d)).collect();
        slots.push(self.block1_len + user as u64 * self.alignment_blocks_per_user() + index);
        slots
    }

    /// Share of the supersymbol carrying each user's alignment blocks,
    /// counted from the constructed block sizes.
    pub fn resource_fraction(&self) -> Ratio<u128> {
        Ratio::new(self.alignment_blocks_per_user() as u128, self.len() as u128)
    }

    /// Checks every structural property of the supersymbol by querying the
    /// slot table. Cost grows as `K^2 L (L-1)^(K-1)`.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let (l, k) = (self.aps, self.users);
        let (b1, b2, _) = block_lengths(l, k).expect("constructed");
        let mut count1 = 0u64;
        let mut count2 = vec![0u64; k];
        for s in 0..self.len() {
            match self.block(s) {
                Block::One => count1 += 1,
                Block::Two { user } => count2[user] += 1,
            }
        }
        if count1 as u128 != b1 || count2.iter().sum::<u64>() as u128 != b2 {
            return Err(format!("block sizes {count1}/{count2:?}, expected {b1}/{b2}"));
        }
        let blocks = self.alignment_blocks_per_user();
        if count2.iter().any(|&c| c != blocks) {
            return Err(format!("Block 2 sub-blocks {count2:?}, expected {blocks} each"));
        }

        for user in 0..k {
            let mut owner = vec![None::<u64>; self.len() as usize];
            for index in 0..blocks {
                let slots = self.alignment_block(user, index);
                if slots.len() != l {
                    return Err(format!("user {user} block {index} has {} slots", slots.len()));
                }
                let (first, last) = slots.split_at(l - 1);
                if first.iter().any(|&s| self.block(s) != Block::One)
                    || self.block(last[0]) != (Block::Two { user })
                {
                    return Err(format!("user {user} block {index} straddles blocks wrongly"));
                }
                let mut modes = Vec::with_capacity(l);
                for &s in &slots {
                    if let Some(prev) = owner[s as usize].replace(index) {
                        return Err(format!("user {user} blocks {prev} and {index} share slot {s}"));
                    }
                    let mine: Vec<u64> = self
                        .served(s)
                        .into_iter()
                        .filter(|&(u, _)| u == user)
                        .map(|(_, a)| a)
                        .collect();
                    if mine != [index] {
                        return Err(format!(
                            "slot {s} carries user {user} symbols {mine:?}, expected [{index}]"
                        ));
                    }
                    modes.push(self.mode(s, user));
                }
                modes.sort_unstable();
                modes.dedup();
                if modes.len() != l {
                    return Err(format!("user {user} block {index} visits modes {modes:?}"));
                }
                for other in (0..k).filter(|&o| o != user) {
                    let m0 = self.mode(slots[0], other);
                    if slots.iter().any(|&s| self.mode(s, other) != m0) {
                        return Err(format!(
                            "user {other} changes mode inside block {index} of user {user}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Text dump: `slot,block,served,modes` with `;`-separated lists.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "# L={} K={} block1={} block2={}\nslot,block,served,modes\n",
            self.aps, self.users, self.block1_len, self.block2_len
        );
        for s in 0..self.len() {
            let block = match self.block(s) {
                Block::One => 1,
                Block::Two { .. } => 2,
            };
            let served: Vec<String> =
                self.served(s).iter().map(|(u, a)| format!("{u}:{a}")).collect();
            let modes: Vec<String> =
                (0..self.users).map(|u| self.mode(s, u).to_string()).collect();
            let _ = writeln!(out, "{s},{block},{},{}", served.join(";"), modes.join(";"));
        }
        out
    }
}

/// Per-user share of the supersymbol, `1 / (L + K - 1)`.
pub fn bia_resource_fraction(aps: usize, users: usize) -> f64 {
    1.0 / (aps + users - 1) as f64
}

/// Exact `1 / (L + K - 1)`.
pub fn bia_resource_fraction_exact(aps: usize, users: usize) -> Ratio<u128> {
    Ratio::new(1, (aps + users - 1) as u128)
}

/// Exact `(L-1)^(K-1) / ((L-1)^K + K (L-1)^(K-1))` from the block sizes,
/// or `None` if the counts overflow `u128`.
pub fn bia_block_fraction(aps: usize, users: usize) -> Option<Ratio<u128>> {
    let (b1, b2, total) = block_lengths(aps, users)?;
    let _ = b1;
    Some(Ratio::new(b2 / users as u128, total))
}

/// Covariance of the noise after interference subtraction, before scaling
/// by the receiver noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BiaNoiseCovariance {
    pub matrix: DMatrix<f64>,
}

impl BiaNoiseCovariance {
    pub fn determinant(&self) -> f64 {
        self.matrix.diagonal().product()
    }
}

/// `diag(K I_{L-1}, 1)`.
pub fn bia_noise_covariance(aps: usize, users: usize) -> BiaNoiseCovariance {
    let mut diag = vec![users as f64; aps.saturating_sub(1)];
    diag.push(1.0);
    BiaNoiseCovariance { matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) }
}

/// BIA rate of one user (bit/s/Hz) for a given realisation of its `L x L`
/// preset-mode channel `h` (rows are modes, columns are transmitters).
///
/// `stream_power` multiplies `H H^T` directly and must carry the units that
/// make `stream_power * h^2` commensurate with `sigma2`.
pub fn bia_user_rate(h: &DMatrix<f64>, stream_power: f64, sigma2: f64, users: usize) -> Result<f64> {
    let aps = h.nrows();
    if aps != h.ncols() || aps < 2 || users < 1 {
        return Err(Error::InvalidConfig(format!(
            "BIA needs a square channel with L >= 2 and K >= 1 (got {:?}, K={users})",
            h.shape()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance must be positive, got {sigma2}")));
    }
    let r = bia_noise_covariance(aps, users);
    // det(I + c H H^T R^-1) = det(I + c R^-1/2 H H^T R^-1/2), which is SPD.
    let inv_sqrt = r.matrix.diagonal().map(|v| 1.0 / v.sqrt());
    let scaled = DMatrix::from_fn(aps, aps, |i, j| h[(i, j)] * inv_sqrt[i]);
    let gram = &scaled * scaled.transpose() * (stream_power / sigma2);
    let spd = DMatrix::identity(aps, aps) + gram;
    let log_det = match spd.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => spd.determinant().ln(),
    };
    let rate = bia_resource_fraction(aps, users) * log_det / std::f64::consts::LN_2;
    Ok(if rate.is_finite() { rate.max(0.0) } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_schedules() {
        let s = BiaSchedule::new(2, 2).unwrap();
        assert_eq!((s.block1_len(), s.block2_len(), s.len()), (1, 2, 3));
        assert_eq!(s.alignment_blocks_per_user(), 1);
        assert_eq!(s.alignment_block(0, 0), vec![0, 1]);
        assert_eq!(s.alignment_block(1, 0), vec![0, 2]);

        let s = BiaSchedule::new(3, 2).unwrap();
        assert_eq!((s.block1_len(), s.block2_len(), s.len()), (4, 4, 8));
        assert_eq!(s.alignment_blocks_per_user(), 2);

        let s = BiaSchedule::new(2, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.alignment_blocks_per_user(), 1);
        assert_eq!(s.alignment_block(0, 0), vec![0, 1]);
        assert_eq!((s.mode(0, 0), s.mode(1, 0)), (0, 1));
    }

    #[test]
    fn golden_table_l3_k2() {
        let expected = "\
# L=3 K=2 block1=4 block2=4
slot,block,served,modes
0,1,0:0;1:0,0;0
1,1,0:0;1:1,1;0
2,1,0:1;1:0,0;1
3,1,0:1;1:1,1;1
4,2,0:0,2;0
5,2,0:1,2;1
6,2,1:0,0;2
7,2,1:1,1;2
";
        assert_eq!(BiaSchedule::new(3, 2).unwrap().to_table(), expected);
    }

    #[test]
    fn verify_small_grid() {
        for l in 2..=5 {
            for k in 1..=4 {
                BiaSchedule::new(l, k).unwrap().verify().unwrap();
            }
        }
    }

    #[test]
    fn budget_and_domain_errors() {
        assert!(matches!(
            BiaSchedule::new(16, 10),
            Err(Error::ScheduleTooLarge { length, .. }) if length == 15u128.pow(10) + 10 * 15u128.pow(9)
        ));
        assert!(matches!(BiaSchedule::new(200, 100), Err(Error::ScheduleTooLarge { .. })));
        assert!(BiaSchedule::new(1, 3).is_err());
        assert!(BiaSchedule::new(3, 0).is_err());
        assert!(BiaSchedule::with_budget(3, 2, 7).is_err());
        assert!(BiaSchedule::with_budget(3, 2, 8).is_ok());
    }

    #[test]
    fn fraction_examples() {
        assert_eq!(bia_resource_fraction_exact(2, 2), Ratio::new(1, 3));
        assert_eq!(bia_block_fraction(2, 2), Some(Ratio::new(1, 3)));
        assert_eq!(bia_resource_fraction(16, 10), 1.0 / 25.0);
        assert_eq!(bia_block_fraction(16, 10), Some(Ratio::new(1, 25)));
        assert_eq!(bia_resource_fraction(2, 1), 0.5);
    }

    #[test]
    fn covariance_examples() {
        let r = bia_noise_covariance(2, 3);
        assert_eq!(r.matrix, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        assert_eq!(bia_noise_covariance(2, 1).matrix, DMatrix::identity(2, 2));
        assert_eq!(bia_noise_covariance(4, 5).determinant(), 125.0);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(bia_user_rate(&DMatrix::zeros(3, 3), 1.0, 1.0, 2).unwrap(), 0.0);
        let r = bia_user_rate(&DMatrix::identity(2, 2), 1.0, 1.0, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let r = bia_user_rate(&DMatrix::identity(2, 2), 2.0, 2.0, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(bia_user_rate(&DMatrix::identity(2, 3), 1.0, 1.0, 1).is_err());
        assert!(bia_user_rate(&DMatrix::identity(2, 2), 1.0, 0.0, 1).is_err());
        // Singular channel still has a defined rate.
        let singular = DMatrix::from_element(3, 3, 1.0);
        assert!(bia_user_rate(&singular, 1.0, 1.0, 2).unwrap() > 0.0);
    }

    #[test]
    fn det_identity_for_scaled_identity_channel() {
        for l in 2..=6 {
            for k in 1..=6 {
                for c in [0.1f64, 1.0, 7.5, 300.0] {
                    let h = DMatrix::identity(l, l) * c.sqrt();
                    let numeric = bia_user_rate(&h, 1.0, 1.0, k).unwrap() * (l + k - 1) as f64;
                    let kf = k as f64;
                    let closed = (l - 1) as f64 * (1.0 + c / kf).log2() + (1.0 + c).log2();
                    assert!((numeric - closed).abs() < 1e-10 * closed.max(1.0));
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        proptest! {
            #[test]
            fn rate_monotone(seed in any::<u64>(), l in 2usize..6, k in 1usize..8, p in 0.01f64..100.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = DMatrix::from_fn(l, l, |_, _| rng.gen::<f64>());
                let base = bia_user_rate(&h, p, 1.0, k).unwrap();
                prop_assert!(bia_user_rate(&h, p * 2.0, 1.0, k).unwrap() > base);
                prop_assert!(bia_user_rate(&h, p, 1.0, k + 1).unwrap() < base);
                prop_assert!(bia_user_rate(&h, p, 1.0, 2 * k).unwrap() < base);
            }

            #[test]
            fn fraction_routes_agree(l in 2usize..=16, k in 1usize..=32) {
                prop_assert_eq!(bia_block_fraction(l, k).unwrap(), bia_resource_fraction_exact(l, k));
            }
        }
    }
}
