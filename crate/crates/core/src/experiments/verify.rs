use rand::Rng;
use serde::Serialize;

use super::random::{random_family, random_function, random_measure, random_signed_function, random_weight};
use super::ExperimentConfig;
use crate::batch::{map_trials, trial_rng};
use crate::chain::{proof_chain_cz, proof_chain_frac};
use crate::constants::{check_cz_exponent, cz_constant, cz_exponent, maximal_constant, maximal_target_exponent, FracExponents};
use crate::error::{Error, Result};
use crate::mesh::MeshSpec;
use crate::numerics::le_rel;
use crate::norm::{bound_check_cz, bound_check_frac, BoundReport, EstimatorConfig};
use crate::operators::{weak_type_from, OperatorSpec};
use crate::step::lp_norm_cells;

const LAMBDAS: usize = 50;
const CZ_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalTrial {
    pub trial: usize,
    pub p: f64,
    pub q: f64,
    pub ratio: f64,
    pub bound: f64,
    pub strong_ok: bool,
    pub weak_violations: usize,
    /// Largest `lhs / rhs` over the level grid.
    pub worst_weak: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaximalReport {
    pub command: String,
    pub alpha: f64,
    pub n: usize,
    pub mesh: MeshSpec,
    pub seed: u64,
    /// `None` when `p` was drawn per trial.
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub constant: Option<f64>,
    pub trials: usize,
    pub lambdas_per_trial: usize,
    pub strong_violations: usize,
    pub weak_violations: usize,
    pub max_ratio_over_bound: f64,
    pub ok: bool,
    pub rows: Vec<MaximalTrial>,
}

fn check_q(given: Option<f64>, derived: f64) -> Result<()> {
    match given {
        Some(q) if (q - derived).abs() > 1e-9 * derived.abs().max(1.0) && !(q.is_infinite() && derived.is_infinite()) => {
            Err(Error::Precondition(format!("q = {q} contradicts 1/q = 1/p - alpha/n, which gives q = {derived}")))
        }
        _ => Ok(()),
    }
}

fn lambda_grid(mf: &[f64]) -> Vec<f64> {
    let positive = mf.iter().copied().filter(|v| *v > 0.0);
    let lo = positive.clone().fold(f64::INFINITY, f64::min);
    let hi = positive.fold(0.0, f64::max);
    let (lo, hi) = if hi > 0.0 { (lo / 2.0, hi * 1.1) } else { (1e-3, 1.0) };
    let (a, b) = (lo.ln(), hi.ln());
    (0..LAMBDAS).map(|i| (a + (b - a) * i as f64 / (LAMBDAS - 1) as f64).exp()).collect()
}

/// Strong and weak type bounds for the universal maximal operator on random `(f, μ)`.
pub fn verify_maximal(cfg: &ExperimentConfig) -> Result<MaximalReport> {
    let mesh = cfg.mesh()?;
    let n = mesh.dim;
    let alpha = cfg.alpha.unwrap_or(0.0);
    if !(0.0..n as f64).contains(&alpha) {
        return Err(Error::Precondition(format!("need 0 <= alpha < n, got alpha={alpha}, n={n}")));
    }
    let fixed = match cfg.p {
        Some(p) => {
            let q = maximal_target_exponent(p, alpha, n)?;
            check_q(cfg.q, q)?;
            Some((p, q))
        }
        None => None,
    };
    let seed = cfg.seed();
    let trials = cfg.trials_or(100);
    let p_max = if alpha > 0.0 { (n as f64 / alpha).min(4.0) } else { 4.0 };

    let rows = map_trials(trials, |t| -> Result<MaximalTrial> {
        let mut rng = trial_rng(seed, t as u64);
        let (p, q) = match fixed {
            Some(pq) => pq,
            None => {
                let p = rng.random_range(1.1..p_max);
                (p, maximal_target_exponent(p, alpha, n)?)
            }
        };
        let f = random_signed_function(&mut rng, &mesh)?;
        let mu = random_measure(&mut rng, &mesh)?;
        let op = OperatorSpec::maximal(alpha, mu.clone())?;
        let mf = op.apply_values(f.values());

        let num = lp_norm_cells(&mf, q, mu.masses())?;
        let den = lp_norm_cells(f.values(), p, mu.masses())?;
        let ratio = if den > 0.0 { num / den } else { 0.0 };
        let bound = maximal_constant(p, q, alpha, n);
        let strong_ok = le_rel(ratio, bound, 1e-10);

        let mut weak_violations = 0;
        let mut worst_weak = 0.0f64;
        for lambda in lambda_grid(&mf) {
            let w = weak_type_from(&mf, f.values(), mu.masses(), alpha, n, lambda);
            weak_violations += usize::from(!w.ok);
            if w.rhs > 0.0 {
                worst_weak = worst_weak.max(w.lhs / w.rhs);
            }
        }
        Ok(MaximalTrial { trial: t, p, q, ratio, bound, strong_ok, weak_violations, worst_weak })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let strong_violations = rows.iter().filter(|r| !r.strong_ok).count();
    let weak_violations = rows.iter().map(|r| r.weak_violations).sum();
    let max_ratio_over_bound = rows.iter().map(|r| r.ratio / r.bound).fold(0.0, f64::max);
    Ok(MaximalReport {
        command: "verify-maximal".into(),
        alpha,
        n,
        mesh,
        seed,
        p: fixed.map(|(p, _)| p),
        q: fixed.map(|(_, q)| q),
        constant: fixed.map(|(p, q)| maximal_constant(p, q, alpha, n)),
        trials,
        lambdas_per_trial: LAMBDAS,
        strong_violations,
        weak_violations,
        max_ratio_over_bound,
        ok: strong_violations == 0 && weak_violations == 0,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTrial {
    pub trial: usize,
    pub p: f64,
    pub cubes: usize,
    pub weight_constant: f64,
    pub dyadic_weight_constant: f64,
    pub norm_estimate: f64,
    pub bound: f64,
    pub ratio: f64,
    pub ok: bool,
    pub converged: bool,
    pub chain_monotone: Option<bool>,
}

impl BoundTrial {
    fn new(trial: usize, p: f64, r: &BoundReport, chain_monotone: Option<bool>) -> Self {
        Self {
            trial,
            p,
            cubes: r.params.get("cubes").copied().unwrap_or(0.0) as usize,
            weight_constant: r.weight_constant.value,
            dyadic_weight_constant: r.dyadic_weight_constant,
            norm_estimate: r.norm_estimate,
            bound: r.bound,
            ratio: r.ratio,
            ok: r.ok,
            converged: r.estimate.converged,
            chain_monotone,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReportSummary {
    pub command: String,
    pub theorem: String,
    pub n: usize,
    pub mesh: MeshSpec,
    pub seed: u64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub constant: Option<f64>,
    /// Power on the weight constant in the bound.
    pub exponent: Option<f64>,
    pub trials: usize,
    pub ok_count: usize,
    pub violations: usize,
    /// Largest `norm / bound`.
    pub worst_ratio: f64,
    pub chains_checked: usize,
    pub chain_failures: usize,
    pub ok: bool,
    pub rows: Vec<BoundTrial>,
}

impl BoundReportSummary {
    #[allow(clippy::too_many_arguments)]
    fn new(
        command: &str,
        theorem: &str,
        mesh: MeshSpec,
        seed: u64,
        p: Option<f64>,
        q: Option<f64>,
        alpha: Option<f64>,
        constant: Option<f64>,
        exponent: Option<f64>,
        rows: Vec<BoundTrial>,
    ) -> Self {
        let ok_count = rows.iter().filter(|r| r.ok).count();
        let chains_checked = rows.iter().filter(|r| r.chain_monotone.is_some()).count();
        let chain_failures = rows.iter().filter(|r| r.chain_monotone == Some(false)).count();
        let violations = rows.len() - ok_count;
        Self {
            command: command.into(),
            theorem: theorem.into(),
            n: mesh.dim,
            mesh,
            seed,
            p,
            q,
            alpha,
            constant,
            exponent,
            trials: rows.len(),
            ok_count,
            violations,
            worst_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
            chains_checked,
            chain_failures,
            ok: violations == 0 && chain_failures == 0,
            rows,
        }
    }
}

fn estimator<R: Rng>(rng: &mut R, cfg: &ExperimentConfig) -> EstimatorConfig {
    EstimatorConfig { restarts: cfg.restarts(), seed: rng.random(), ..Default::default() }
}

/// Sparse operator bound on random stopping-cube families and step weights.
///
/// Without `--p` the trials cycle through `p = 3/2, 2, 3`. Chains are replayed
/// on random `(f, g)` whenever `p >= 2`.
pub fn verify_cz(cfg: &ExperimentConfig) -> Result<BoundReportSummary> {
    let mesh = cfg.mesh()?;
    if let Some(p) = cfg.p {
        check_cz_exponent(p)?;
        check_q(cfg.q, p)?;
    }
    if cfg.alpha.is_some_and(|a| a != 0.0) {
        return Err(Error::Precondition("verify-cz takes no alpha".into()));
    }
    let seed = cfg.seed();
    let rows = map_trials(cfg.trials_or(100), |t| -> Result<BoundTrial> {
        let mut rng = trial_rng(seed, t as u64);
        let p = cfg.p.unwrap_or(CZ_EXPONENTS[t % CZ_EXPONENTS.len()]);
        let family = random_family(&mut rng, &mesh)?;
        let w = random_weight(&mut rng, &mesh)?;
        let est = estimator(&mut rng, cfg);
        let report = bound_check_cz(&mesh, &family, &w, p, &est)?;
        let chain = if p >= 2.0 {
            let f = random_function(&mut rng, &mesh)?;
            let g = random_function(&mut rng, &mesh)?;
            Some(proof_chain_cz(&mesh, &family, &w, p, &f, &g)?.monotone)
        } else {
            None
        };
        Ok(BoundTrial::new(t, p, &report, chain))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BoundReportSummary::new(
        "verify-cz",
        "cz",
        mesh,
        seed,
        cfg.p,
        cfg.p,
        None,
        cfg.p.map(cz_constant),
        cfg.p.map(cz_exponent),
        rows,
    ))
}

/// Sparse fractional bound on random families and weights, with chain replays.
pub fn verify_frac(cfg: &ExperimentConfig) -> Result<BoundReportSummary> {
    let mesh = cfg.mesh()?;
    let alpha = cfg.alpha.unwrap_or(0.5);
    let p = cfg.p.unwrap_or(8.0 / 7.0);
    let e = FracExponents::new(p, alpha, mesh.dim)?;
    check_q(cfg.q, e.q)?;
    e.check_admissible()?;
    let seed = cfg.seed();
    let rows = map_trials(cfg.trials_or(100), |t| -> Result<BoundTrial> {
        let mut rng = trial_rng(seed, t as u64);
        let family = random_family(&mut rng, &mesh)?;
        let w = random_weight(&mut rng, &mesh)?;
        let est = estimator(&mut rng, cfg);
        let report = bound_check_frac(&mesh, &family, &w, p, alpha, &est)?;
        let f = random_function(&mut rng, &mesh)?;
        let g = random_function(&mut rng, &mesh)?;
        let chain = proof_chain_frac(&mesh, &family, &w, p, alpha, &f, &g)?;
        Ok(BoundTrial::new(t, p, &report, Some(chain.monotone)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BoundReportSummary::new(
        "verify-frac",
        "frac",
        mesh,
        seed,
        Some(p),
        Some(e.q),
        Some(alpha),
        Some(e.constant()),
        Some(e.weight_exponent()),
        rows,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximal_small_batch() {
        let cfg = ExperimentConfig { trials: Some(8), resolution_level: Some(-5), ..Default::default() };
        let r = verify_maximal(&cfg).unwrap();
        assert!(r.ok);
        assert_eq!(r.rows.len(), 8);
        assert!(r.max_ratio_over_bound <= 1.0);
    }

    #[test]
    fn maximal_rejects_p_one() {
        let cfg = ExperimentConfig { p: Some(1.0), ..Default::default() };
        assert!(matches!(verify_maximal(&cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn maximal_reports_constant() {
        let cfg = ExperimentConfig {
            p: Some(8.0 / 7.0),
            alpha: Some(0.5),
            trials: Some(2),
            resolution_level: Some(-4),
            ..Default::default()
        };
        let r = verify_maximal(&cfg).unwrap();
        assert!((r.constant.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cz_small_batch_is_reproducible() {
        let cfg = ExperimentConfig { trials: Some(3), resolution_level: Some(-5), ..Default::default() };
        let a = verify_cz(&cfg).unwrap();
        let b = verify_cz(&cfg).unwrap();
        assert!(a.ok);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn frac_rejects_inadmissible() {
        let cfg = ExperimentConfig { p: Some(4.0 / 3.0), alpha: Some(0.5), ..Default::default() };
        let err = verify_frac(&cfg).unwrap_err().to_string();
        assert!(err.contains("min(p'/q, q/p') <= 1 - alpha/n"));
    }
}
