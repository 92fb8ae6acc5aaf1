//! Step-by-step evaluation of the chains of inequalities behind the weighted
//! sparse bounds, on concrete inputs.

use serde::Serialize;

use crate::constants::{cz_constant, cz_exponent, FracExponents};
use crate::error::{Error, Result};
use crate::mesh::{MeshIndex, MeshSpec};
use crate::numerics::{compensated_sum, conjugate, le_rel};
use crate::operators::OperatorSpec;
use crate::sparse::SparseFamily;
use crate::step::{lp_norm_cells, MeasureView, StepFunction};
use crate::weights::{ap_constant, apq_constant, CubeSet, Weight};

const CHAIN_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainStep {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub steps: Vec<ChainStep>,
    pub monotone: bool,
    /// The chain was evaluated on the adjoint problem.
    pub dual: bool,
}

impl ChainReport {
    fn new(steps: Vec<(&str, f64)>, dual: bool) -> Self {
        let steps: Vec<ChainStep> =
            steps.into_iter().map(|(l, v)| ChainStep { label: l.to_string(), value: v }).collect();
        let monotone = steps.windows(2).all(|w| le_rel(w[0].value, w[1].value, CHAIN_SLACK));
        Self { steps, monotone, dual }
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    /// First step `i` with `Q_i > Q_{i+1}` beyond the slack.
    pub fn first_violation(&self) -> Option<usize> {
        self.steps.windows(2).position(|w| !le_rel(w[0].value, w[1].value, CHAIN_SLACK))
    }
}

/// Per-cube data of the family: `∫_Q fσ`, `∫_Q g u`, `σ(Q)`, `u(Q)`,
/// `|E(Q)|`, `σ(E(Q))`, `u(E(Q))`.
struct CubeData {
    vol: Vec<f64>,
    f_sigma: Vec<f64>,
    g_u: Vec<f64>,
    sigma_q: Vec<f64>,
    u_q: Vec<f64>,
    vol_e: Vec<f64>,
    sigma_e: Vec<f64>,
    u_e: Vec<f64>,
}

impl CubeData {
    fn new(
        mesh: &MeshSpec,
        family: &SparseFamily,
        f: &StepFunction,
        g: &StepFunction,
        sigma: &[f64],
        u: &[f64],
    ) -> Result<Self> {
        let index = MeshIndex::new(*mesh);
        let located = family.locate(mesh)?;
        let pick = |levels: Vec<Vec<f64>>| -> Vec<f64> { located.iter().map(|&(j, i)| levels[j][i]).collect() };
        let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
        let e = family.exceptional_sets(mesh)?;
        let data = Self {
            vol: located.iter().map(|&(j, _)| mesh.volume_at(j)).collect(),
            f_sigma: pick(index.sums(mul(f.values(), sigma))),
            g_u: pick(index.sums(mul(g.values(), u))),
            sigma_q: pick(index.sums(sigma.to_vec())),
            u_q: pick(index.sums(u.to_vec())),
            vol_e: e.volumes(),
            sigma_e: e.masses(sigma),
            u_e: e.masses(u),
        };
        for (k, cube) in family.cubes().iter().enumerate() {
            if !(data.sigma_e[k] > 0.0 && data.u_e[k] > 0.0) {
                return Err(Error::DegenerateMeasure(format!("exceptional set of {cube}")));
            }
        }
        Ok(data)
    }

    fn sum(&self, term: impl Fn(usize) -> f64) -> f64 {
        compensated_sum((0..self.vol.len()).map(term))
    }
}

fn check_inputs(mesh: &MeshSpec, f: &StepFunction, g: &StepFunction) -> Result<()> {
    mesh.check_same(f.mesh())?;
    mesh.check_same(g.mesh())?;
    if !f.nonneg() || !g.nonneg() {
        return Err(Error::InvalidInput("chain inputs must be nonnegative".into()));
    }
    Ok(())
}

/// `∫ op(f σ) g u dx` on cell masses.
fn pairing(op: &OperatorSpec, f: &StepFunction, g: &StepFunction, sigma: &[f64], u: &[f64]) -> f64 {
    let inv_h = 1.0 / op.mesh().cell_volume();
    let density: Vec<f64> = f.values().iter().zip(sigma).map(|(v, s)| v * s * inv_h).collect();
    let image = op.apply_values(&density);
    compensated_sum(image.iter().zip(g.values()).zip(u).map(|((y, g), u)| y * g * u))
}

fn maximal_norm(masses: &[f64], mesh: &MeshSpec, alpha: f64, f: &StepFunction, r: f64) -> Result<f64> {
    let mu = MeasureView::from_masses(*mesh, masses.to_vec(), "mu")?;
    let m = OperatorSpec::maximal(alpha, mu)?;
    lp_norm_cells(&m.apply_values(f.values()), r, masses)
}

/// Chain for `⟨T^S(fσ), g⟩_w`, `p >= 2`, ending at `c_p [w]^{max(1,p'/p)} ‖f‖ ‖g‖`.
pub fn proof_chain_cz(
    mesh: &MeshSpec,
    family: &SparseFamily,
    w: &Weight,
    p: f64,
    f: &StepFunction,
    g: &StepFunction,
) -> Result<ChainReport> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("the direct chain needs p >= 2, got {p}")));
    }
    check_inputs(mesh, f, g)?;
    let pp = conjugate(p);
    let sigma_w = w.dual(p)?;
    let sigma = sigma_w.cell_masses(mesh)?;
    let wm = w.cell_masses(mesh)?;
    let a = ap_constant(w, p, &CubeSet::Sparse(family))?.value;
    let d = CubeData::new(mesh, family, f, g, &sigma, &wm)?;
    let avg = |k: usize| (d.f_sigma[k] / d.sigma_q[k]) * (d.g_u[k] / d.u_q[k]);
    let lead = 2f64.powf(p - 1.0) * a;

    let op = OperatorSpec::cz_sparse(*mesh, family.clone())?;
    let q0 = pairing(&op, f, g, &sigma, &wm);
    let q1 = a * d.sum(|k| avg(k) * d.vol[k].powf(p - 1.0) * d.sigma_q[k].powf(2.0 - p));
    let q2 = lead * d.sum(|k| avg(k) * d.vol_e[k].powf(p - 1.0) * d.sigma_e[k].powf(2.0 - p));
    let q3 = lead * d.sum(|k| avg(k) * d.sigma_e[k].powf(1.0 / p) * d.u_e[k].powf(1.0 / pp));
    let q4 = lead * maximal_norm(&sigma, mesh, 0.0, f, p)? * maximal_norm(&wm, mesh, 0.0, g, pp)?;
    let q5 = cz_constant(p) * a.powf(cz_exponent(p)) * lp_norm_cells(f.values(), p, &sigma)?
        * lp_norm_cells(g.values(), pp, &wm)?;
    Ok(ChainReport::new(
        vec![
            ("pairing", q0),
            ("weight precursor", q1),
            ("exceptional sets", q2),
            ("holder on E(Q)", q3),
            ("maximal functions", q4),
            ("stated bound", q5),
        ],
        false,
    ))
}

/// Chain for `⟨I_α^S(fσ), g⟩_u`, `σ = w^{-p'}`, `u = w^q`, for admissible exponents.
///
/// When `p'/q > 1 - α/n` the chain runs on the adjoint problem
/// (`w ↦ w^{-1}`, `(p, q) ↦ (q', p')`, `f ↔ g`), which has the same pairing,
/// and a final step restores the stated constant of the original exponents.
pub fn proof_chain_frac(
    mesh: &MeshSpec,
    family: &SparseFamily,
    w: &Weight,
    p: f64,
    alpha: f64,
    f: &StepFunction,
    g: &StepFunction,
) -> Result<ChainReport> {
    let e = FracExponents::new(p, alpha, mesh.dim)?;
    e.check_admissible()?;
    check_inputs(mesh, f, g)?;
    let k = apq_constant(w, p, e.q, &CubeSet::Sparse(family))?.value;
    let sigma = w.pow(-e.p_conj())?.cell_masses(mesh)?;
    let u = w.pow(e.q)?.cell_masses(mesh)?;
    let stated = e.constant()
        * k.powf(e.weight_exponent())
        * lp_norm_cells(f.values(), p, &sigma)?
        * lp_norm_cells(g.values(), conjugate(e.q), &u)?;

    let (mut steps, dual) = if e.is_direct_case() {
        (frac_chain_direct(mesh, family, w, &e, f, g)?, false)
    } else {
        (frac_chain_direct(mesh, family, &w.pow(-1.0)?, &e.dual(), g, f)?, true)
    };
    steps.push(("stated bound", stated));
    Ok(ChainReport::new(steps, dual))
}

fn frac_chain_direct(
    mesh: &MeshSpec,
    family: &SparseFamily,
    w: &Weight,
    e: &FracExponents,
    f: &StepFunction,
    g: &StepFunction,
) -> Result<Vec<(&'static str, f64)>> {
    let (p, q, alpha) = (e.p, e.q, e.alpha);
    let pp = e.p_conj();
    let gamma = e.gamma();
    let ex = q / pp * gamma;
    let sigma = w.pow(-pp)?.cell_masses(mesh)?;
    let u = w.pow(q)?.cell_masses(mesh)?;
    let k = apq_constant(w, p, q, &CubeSet::Sparse(family))?.value;
    let d = CubeData::new(mesh, family, f, g, &sigma, &u)?;
    let a_sigma = |k: usize| d.f_sigma[k] / d.sigma_q[k];
    let a_u = |k: usize| d.u_q[k].powf(-gamma) * d.g_u[k];
    let lead = 2f64.powf(ex) * k.powf(gamma);

    let op = OperatorSpec::frac_sparse(*mesh, family.clone(), alpha)?;
    let q0 = pairing(&op, f, g, &sigma, &u);
    let q1 = k.powf(gamma) * d.sum(|k| a_sigma(k) * a_u(k) * d.vol[k].powf(ex) * d.sigma_q[k].powf(1.0 - ex));
    let q2 = lead * d.sum(|k| a_sigma(k) * a_u(k) * d.vol_e[k].powf(ex) * d.sigma_e[k].powf(1.0 - ex));
    let q3 = lead * d.sum(|k| a_sigma(k) * a_u(k) * d.sigma_e[k].powf(1.0 / p) * d.u_e[k].powf(1.0 / pp));
    let q4 = lead
        * d.sum(|k| a_sigma(k).powf(p) * d.sigma_e[k]).powf(1.0 / p)
        * d.sum(|k| a_u(k).powf(pp) * d.u_e[k]).powf(1.0 / pp);
    let q5 = lead * maximal_norm(&sigma, mesh, 0.0, f, p)? * maximal_norm(&u, mesh, alpha, g, pp)?;
    let q6 = lead
        * pp
        * (1.0 + q / pp).powf(gamma)
        * lp_norm_cells(f.values(), p, &sigma)?
        * lp_norm_cells(g.values(), conjugate(q), &u)?;
    Ok(vec![
        ("pairing", q0),
        ("weight precursor", q1),
        ("exceptional sets", q2),
        ("holder on E(Q)", q3),
        ("discrete holder", q4),
        ("maximal functions", q5),
        ("maximal bounds", q6),
    ])
}
