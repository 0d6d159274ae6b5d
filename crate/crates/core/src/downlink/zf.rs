//! Zero-forcing precoding over cooperating optical APs.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition number above which a channel is treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ZfPrecoder {
    /// `L x K` precoding matrix with unit-norm columns.
    pub weights: DMatrix<f64>,
    /// `g_k`, the squared diagonal of `H W`.
    pub effective_gains: Vec<f64>,
}

/// Rows of `h` that add nothing to the span of the rows before them.
fn dependent_rows(h: &DMatrix<f64>) -> Vec<usize> {
    let scale = h.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut basis: Vec<nalgebra::RowDVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (k, row) in h.row_iter().enumerate() {
        let mut residual = row.clone_owned();
        for q in &basis {
            let proj = residual.dot(q);
            residual -= q * proj;
        }
        let norm = residual.norm();
        if basis.len() >= h.ncols() || norm <= 1e-9 * scale || norm == 0.0 {
            dependent.push(k);
        } else {
            basis.push(residual / norm);
        }
    }
    dependent
}

/// Zero-forcing precoder for a `K x L` channel (`K <= L`, full row rank).
///
/// The raw precoder is the right pseudo-inverse `H^T (H H^T)^-1`, computed
/// through the SVD; each column is then scaled to unit norm.
pub fn zf_precoder(h: &DMatrix<f64>) -> Result<ZfPrecoder> {
    let (users, aps) = h.shape();
    if users == 0 || users > aps {
        let users_over: Vec<usize> = (aps.min(users)..users).collect();
        return Err(Error::SingularChannel { users: users_over });
    }
    let svd = h.clone().svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(min > 0.0) || max / min > MAX_CONDITION {
        let mut users = dependent_rows(h);
        if users.is_empty() {
            users.push(users_by_weakness(h));
        }
        return Err(Error::SingularChannel { users });
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|_| Error::SingularChannel { users: (0..users).collect() })?;
    let mut weights = pinv;
    for mut col in weights.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    let hw = h * &weights;
    let effective_gains = (0..users).map(|k| hw[(k, k)] * hw[(k, k)]).collect();
    Ok(ZfPrecoder { weights, effective_gains })
}

fn users_by_weakness(h: &DMatrix<f64>) -> usize {
    // Ill-conditioned but not flagged by Gram-Schmidt: blame the row with the
    // smallest component orthogonal to the others.
    (0..h.nrows())
        .map(|k| {
            let others = h.clone().remove_row(k);
            let row = h.row(k).clone_owned();
            let residual = if others.nrows() == 0 {
                row.norm()
            } else {
                let svd = others.svd(false, true);
                let v = svd.v_t.expect("requested");
                let proj = &row * v.transpose() * &v;
                (row - proj).norm()
            };
            (k, residual)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

/// Achievable rate (bit/s/Hz) from the signal and interference powers seen
/// after precoding, using the lower bound for non-negative OOK signalling.
pub fn zf_rate_from_terms(signal: f64, interference: f64, sigma2: f64) -> f64 {
    let sinr = 2.0 * signal / (PI * E * (interference / 3.0 + sigma2));
    0.5 * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Rate of user `k` with precoder `w` scaled by the per-AP optical power.
pub fn zf_user_rate(k: usize, h: &DMatrix<f64>, w: &DMatrix<f64>, sigma2: f64, power: f64) -> f64 {
    let row = h.row(k);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (j, col) in w.column_iter().enumerate() {
        let amplitude = power * row.dot(&col.transpose());
        if j == k {
            signal = amplitude * amplitude;
        } else {
            interference += amplitude * amplitude;
        }
    }
    zf_rate_from_terms(signal, interference, sigma2)
}
