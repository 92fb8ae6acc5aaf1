//! Growth of `‖T^S‖_{L^p(w)}` in `[w]_{A_p(S)}` along the power weights
//! `w(x) = x^{(1-δ)(p-1)}` with the tower `S = {[0, 2^{-k}) : 0 <= k <= depth}`.
//!
//! The witness `h(x) = x^{δ-1} χ_{[0,1)}` has `‖h‖^p_{L^p(w)} = 1/δ`, and `T^S h`
//! is constant on each shell `[2^{-j-1}, 2^{-j})`, so every quantity has a
//! closed form. Sums are taken in log space since the shell values overflow.

use serde::Serialize;

use super::ExperimentConfig;
use crate::constants::{cz_constant, cz_exponent};
use crate::error::{Error, Result};
use crate::numerics::{ls_slope, rel_diff};

pub const DEFAULT_DEPTH: usize = 2048;
const DEPTH_STEP: usize = 8;
const DEPTH_TOL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpnessRow {
    pub delta: f64,
    pub weight_constant: f64,
    pub norm_lower_bound: f64,
    /// `norm / (c_p [w]^{max(1, p'/p)})`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SharpnessReport {
    pub command: String,
    pub p: f64,
    pub constant: f64,
    pub target_exponent: f64,
    pub depth: usize,
    /// Least-squares slope of `log(norm)` against `log([w])`; needs two rows.
    pub slope: Option<f64>,
    pub rows: Vec<SharpnessRow>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `log(T^S h)` on shell `j`, i.e. `log((1/δ) Σ_{k<=j} 2^{k(1-δ)})`.
fn log_th(delta: f64, j: usize) -> f64 {
    let m = (j + 1) as f64;
    if delta == 1.0 {
        return m.ln();
    }
    let ln_r = (1.0 - delta) * std::f64::consts::LN_2;
    -delta.ln() + m * ln_r + (-(-m * ln_r).exp_m1()).ln() - ln_r.exp_m1().ln()
}

/// `‖T^S h‖_{L^p(w)} / ‖h‖_{L^p(w)}` for the tower of the given depth.
fn tower_ratio(p: f64, delta: f64, depth: usize) -> f64 {
    let a1 = (1.0 - delta) * (p - 1.0) + 1.0;
    let ln2 = std::f64::consts::LN_2;
    let shell = (a1 * ln2).exp_m1().ln() - a1.ln();
    let mut terms: Vec<f64> =
        (0..depth).map(|j| p * log_th(delta, j) - (j + 1) as f64 * a1 * ln2 + shell).collect();
    terms.push(p * log_th(delta, depth) - depth as f64 * a1 * ln2 - a1.ln());
    ((log_sum_exp(&terms) + delta.ln()) / p).exp()
}

/// One δ: closed-form `[w]_{A_p(S)}` and the witness lower bound, with the depth check.
pub fn sharpness_row(p: f64, delta: f64, depth: usize) -> Result<SharpnessRow> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p must satisfy 1 < p < inf, got {p}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Precondition(format!("delta must lie in (0, 1], got {delta}")));
    }
    if depth == 0 {
        return Err(Error::Precondition("tower depth must be positive".into()));
    }
    let norm = tower_ratio(p, delta, depth);
    let change = rel_diff(norm, tower_ratio(p, delta, depth + DEPTH_STEP));
    if change > DEPTH_TOL {
        return Err(Error::DepthInsufficient { depth, delta, change });
    }
    let a = (1.0 - delta) * (p - 1.0);
    let weight_constant = 1.0 / ((1.0 + a) * delta.powf(p - 1.0));
    let bound = cz_constant(p) * weight_constant.powf(cz_exponent(p));
    Ok(SharpnessRow { delta, weight_constant, norm_lower_bound: norm, ratio: norm / bound })
}

/// Default deltas `2^{-2}, …, 2^{-7}`.
pub fn default_deltas() -> Vec<f64> {
    (2..=7).map(|k| 2f64.powi(-k)).collect()
}

pub fn sharpness(cfg: &ExperimentConfig) -> Result<SharpnessReport> {
    let p = cfg.p.unwrap_or(1.5);
    let depth = cfg.depth.unwrap_or(DEFAULT_DEPTH);
    let mut deltas = cfg.deltas.clone().unwrap_or_else(default_deltas);
    if deltas.is_empty() {
        return Err(Error::Precondition("at least one delta is required".into()));
    }
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let rows = deltas.iter().map(|&d| sharpness_row(p, d, depth)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.weight_constant.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm_lower_bound.ln()).collect();
    let distinct = xs.iter().any(|x| (x - xs[0]).abs() > 0.0);
    Ok(SharpnessReport {
        command: "sharpness".into(),
        p,
        constant: cz_constant(p),
        target_exponent: cz_exponent(p),
        depth,
        slope: distinct.then(|| ls_slope(&xs, &ys)),
        rows,
    })
}
