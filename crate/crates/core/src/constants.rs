//! Exponent relations and the explicit constants of the weighted bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::conjugate;

const RELATION_TOL: f64 = 1e-12;

/// Target exponent `q` of the fractional maximal bound: `1/q = 1/p - α/n`.
///
/// Requires `0 <= α < n` and `1 < p <= n/α` (`p < ∞` when `α = 0`).
/// Returns `∞` at the endpoint `p = n/α`.
pub fn maximal_target_exponent(p: f64, alpha: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(0.0..nf).contains(&alpha) {
        return Err(Error::Precondition(format!("need 0 <= alpha < n, got alpha={alpha}, n={n}")));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Precondition(format!("p must satisfy 1 < p < inf, got {p}")));
    }
    let inv_q = 1.0 / p - alpha / nf;
    if inv_q < -RELATION_TOL {
        return Err(Error::Precondition(format!("p = {p} exceeds n/alpha = {}", nf / alpha)));
    }
    Ok(if inv_q <= RELATION_TOL { f64::INFINITY } else { 1.0 / inv_q })
}

/// `(1 + p'/q)^{1 - α/n}`.
pub fn maximal_constant(p: f64, q: f64, alpha: f64, n: usize) -> f64 {
    let pp = conjugate(p);
    (1.0 + pp / q).powf(1.0 - alpha / n as f64)
}

/// `c_p = p p' 2^{max(p/p', p'/p)}`.
pub fn cz_constant(p: f64) -> f64 {
    let pp = conjugate(p);
    p * pp * 2f64.powf((p / pp).max(pp / p))
}

/// `max(1, p'/p)`.
pub fn cz_exponent(p: f64) -> f64 {
    (conjugate(p) / p).max(1.0)
}

pub fn check_cz_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("p must satisfy 1 < p < inf, got {p}")));
    }
    Ok(())
}

/// Exponents of an off-diagonal fractional bound.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FracExponents {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub n: usize,
}

impl FracExponents {
    /// Requires `0 < α < n` and `1 < p < n/α`.
    pub fn new(p: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Precondition(format!("need 0 < alpha, got {alpha}")));
        }
        let q = maximal_target_exponent(p, alpha, n)?;
        if q.is_infinite() {
            return Err(Error::Precondition(format!("need p < n/alpha, got p = {p}")));
        }
        Ok(Self { p, q, alpha, n })
    }

    pub fn p_conj(&self) -> f64 {
        conjugate(self.p)
    }

    /// `1 - α/n`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.alpha / self.n as f64
    }

    /// `min(p'/q, q/p') <= 1 - α/n`.
    pub fn check_admissible(&self) -> Result<()> {
        let x = self.p_conj() / self.q;
        let m = x.min(1.0 / x);
        if m > self.gamma() * (1.0 + RELATION_TOL) {
            return Err(Error::Precondition(format!(
                "min(p'/q, q/p') <= 1 - alpha/n fails: min({:.6}, {:.6}) = {:.6} > {:.6}",
                x,
                1.0 / x,
                m,
                self.gamma()
            )));
        }
        Ok(())
    }

    /// `p'/q <= 1 - α/n`, the case proved directly.
    pub fn is_direct_case(&self) -> bool {
        self.p_conj() / self.q <= self.gamma() * (1.0 + RELATION_TOL)
    }

    /// Exponents of the adjoint problem `L^{q'}(w^{-q'}) -> L^{p'}(w^{-p'})`.
    pub fn dual(&self) -> Self {
        Self { p: conjugate(self.q), q: self.p_conj(), alpha: self.alpha, n: self.n }
    }

    /// `c_{p,α} = p' (1 + q/p')^{1-α/n} 2^{(1-α/n) max(q/p', p'/q)}`.
    pub fn constant(&self) -> f64 {
        let pp = self.p_conj();
        let g = self.gamma();
        pp * (1.0 + self.q / pp).powf(g) * 2f64.powf(g * (self.q / pp).max(pp / self.q))
    }

    /// `(1 - α/n) max(1, p'/q)`.
    pub fn weight_exponent(&self) -> f64 {
        self.gamma() * (self.p_conj() / self.q).max(1.0)
    }
}

/// Checks `1 + p'/q = p'(1 - α/n)` to `1e-12` relative.
pub fn constant_identity_check(p: f64, q: f64, alpha: f64, n: usize) -> Result<bool> {
    let expected_q = maximal_target_exponent(p, alpha, n)?;
    let relation_ok = if expected_q.is_infinite() || q.is_infinite() {
        expected_q.is_infinite() && q.is_infinite()
    } else {
        (1.0 / q - 1.0 / expected_q).abs() <= RELATION_TOL * (1.0 / expected_q).max(1.0)
    };
    if !relation_ok {
        return Err(Error::Precondition(format!(
            "1/q = 1/p - alpha/n violated: q = {q}, expected {expected_q}"
        )));
    }
    let pp = conjugate(p);
    let lhs = 1.0 + pp / q;
    let rhs = pp * (1.0 - alpha / n as f64);
    Ok((lhs - rhs).abs() <= RELATION_TOL * lhs.abs().max(rhs.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cz_constants() {
        assert!((cz_constant(2.0) - 8.0).abs() < 1e-12);
        assert!((cz_constant(3.0) - 18.0).abs() < 1e-12);
        assert!((cz_constant(1.5) - 18.0).abs() < 1e-12);
        assert_eq!(cz_exponent(2.0), 1.0);
        assert_eq!(cz_exponent(3.0), 1.0);
        assert!((cz_exponent(1.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn maximal_constants() {
        assert!((maximal_constant(2.0, 2.0, 0.0, 1) - 2.0).abs() < 1e-15);
        let q = maximal_target_exponent(8.0 / 7.0, 0.5, 1).unwrap();
        assert!((q - 8.0 / 3.0).abs() < 1e-12);
        assert!((maximal_constant(8.0 / 7.0, q, 0.5, 1) - 2.0).abs() < 1e-12);
        assert!(maximal_target_exponent(2.0, 0.5, 1).unwrap().is_infinite());
        assert!(maximal_target_exponent(2.5, 0.5, 1).is_err());
        assert!(maximal_target_exponent(1.0, 0.0, 1).is_err());
    }

    #[test]
    fn frac_constant_and_condition() {
        let e = FracExponents::new(8.0 / 7.0, 0.5, 1).unwrap();
        e.check_admissible().unwrap();
        let want = 8.0 * (4.0f64 / 3.0).sqrt() * 2f64.powf(1.5);
        assert!((e.constant() - want).abs() < 1e-12);
        assert!((e.constant() - 26.13).abs() < 5e-3);
        assert!((e.weight_exponent() - 1.5).abs() < 1e-12);
        assert!(!e.is_direct_case());
        let d = e.dual();
        assert!((d.p - 1.6).abs() < 1e-12 && (d.q - 8.0).abs() < 1e-12);
        assert!(d.is_direct_case());

        let bad = FracExponents::new(4.0 / 3.0, 0.5, 1).unwrap();
        let err = bad.check_admissible().unwrap_err().to_string();
        assert!(err.contains("min(p'/q, q/p') <= 1 - alpha/n"));
    }

    #[test]
    fn identity_examples() {
        assert!(constant_identity_check(2.0, 2.0, 0.0, 1).unwrap());
        assert!(constant_identity_check(8.0 / 7.0, 8.0 / 3.0, 0.5, 1).unwrap());
        assert!(constant_identity_check(4.0 / 3.0, 4.0, 1.0, 2).unwrap());
        assert!(constant_identity_check(2.0, f64::INFINITY, 0.5, 1).unwrap());
        assert!(constant_identity_check(2.0, 3.0, 0.0, 1).is_err());
    }
}
