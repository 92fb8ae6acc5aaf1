//! Positive dyadic operators on a mesh: sparse (fractional) averaging
//! operators, the truncated dyadic fractional integral, and the universal
//! fractional maximal operator.
//!
//! All evaluations aggregate cube sums level by level and push coefficients
//! back down to the cells, so one application costs `O(cells)`.

use serde::Serialize;

use crate::constants::{maximal_constant, maximal_target_exponent};
use crate::error::{Error, Result};
use crate::mesh::{MeshIndex, MeshSpec};
use crate::numerics::{compensated_sum, le_rel};
use crate::sparse::SparseFamily;
use crate::step::{lp_norm_cells, MeasureView, StepFunction};

const WEAK_SLACK: f64 = 1e-12;
const STRONG_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// `T^S f = Σ_{Q∈S} avg_Q f · χ_Q`.
    CzSparse { family: SparseFamily },
    /// `I_α^S f = Σ_{Q∈S} |Q|^{α/n} avg_Q f · χ_Q`.
    FracSparse { family: SparseFamily, alpha: f64 },
    /// `I_α^D` truncated to the cubes of the mesh.
    FracDyadic { alpha: f64 },
    /// `M^D_{α,μ} f = sup_{Q ∋ x} μ(Q)^{α/n-1} ∫_Q |f| dμ`.
    Maximal { alpha: f64, measure: MeasureView },
}

#[derive(Clone, Debug)]
pub struct OperatorSpec {
    mesh: MeshSpec,
    kind: OperatorKind,
    index: MeshIndex,
    /// Per-cube multiplier of `avg_Q f` (linear kinds) — zero off the family.
    coeffs: Vec<Vec<f64>>,
    /// Level sums of `μ` (maximal kind).
    mu_sums: Vec<Vec<f64>>,
}

fn check_alpha(alpha: f64, n: usize) -> Result<()> {
    if !(0.0..n as f64).contains(&alpha) {
        return Err(Error::Precondition(format!("need 0 <= alpha < n, got alpha={alpha}, n={n}")));
    }
    Ok(())
}

impl OperatorSpec {
    pub fn cz_sparse(mesh: MeshSpec, family: SparseFamily) -> Result<Self> {
        Self::new(mesh, OperatorKind::CzSparse { family })
    }

    pub fn frac_sparse(mesh: MeshSpec, family: SparseFamily, alpha: f64) -> Result<Self> {
        Self::new(mesh, OperatorKind::FracSparse { family, alpha })
    }

    pub fn frac_dyadic(mesh: MeshSpec, alpha: f64) -> Result<Self> {
        Self::new(mesh, OperatorKind::FracDyadic { alpha })
    }

    pub fn maximal(alpha: f64, measure: MeasureView) -> Result<Self> {
        Self::new(*measure.mesh(), OperatorKind::Maximal { alpha, measure })
    }

    pub fn new(mesh: MeshSpec, kind: OperatorKind) -> Result<Self> {
        mesh.validate()?;
        let index = MeshIndex::new(mesh);
        let n = mesh.dim as f64;
        let zeros = || -> Vec<Vec<f64>> { (0..mesh.depth()).map(|j| vec![0.0; mesh.count_at(j)]).collect() };
        let mut coeffs = Vec::new();
        let mut mu_sums = Vec::new();
        match &kind {
            OperatorKind::CzSparse { family } | OperatorKind::FracSparse { family, .. } => {
                let alpha = match kind {
                    OperatorKind::FracSparse { alpha, .. } => alpha,
                    _ => 0.0,
                };
                check_alpha(alpha, mesh.dim)?;
                if family.dim() != mesh.dim {
                    return Err(Error::DimensionMismatch { expected: mesh.dim, got: family.dim() });
                }
                coeffs = zeros();
                for (j, i) in family.locate(&mesh)? {
                    let vol = mesh.volume_at(j);
                    coeffs[j][i] = vol.powf(alpha / n) / vol;
                }
            }
            OperatorKind::FracDyadic { alpha } => {
                check_alpha(*alpha, mesh.dim)?;
                coeffs = (0..mesh.depth())
                    .map(|j| {
                        let vol = mesh.volume_at(j);
                        vec![vol.powf(alpha / n) / vol; mesh.count_at(j)]
                    })
                    .collect();
            }
            OperatorKind::Maximal { alpha, measure } => {
                check_alpha(*alpha, mesh.dim)?;
                mu_sums = index.sums(measure.masses().to_vec());
            }
        }
        Ok(Self { mesh, kind, index, coeffs, mu_sums })
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::CzSparse { .. } => None,
            OperatorKind::FracSparse { alpha, .. }
            | OperatorKind::FracDyadic { alpha }
            | OperatorKind::Maximal { alpha, .. } => Some(*alpha),
        }
    }

    pub fn family(&self) -> Option<&SparseFamily> {
        match &self.kind {
            OperatorKind::CzSparse { family } | OperatorKind::FracSparse { family, .. } => Some(family),
            _ => None,
        }
    }

    pub fn measure(&self) -> Option<&MeasureView> {
        match &self.kind {
            OperatorKind::Maximal { measure, .. } => Some(measure),
            _ => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.kind, OperatorKind::Maximal { .. })
    }

    pub fn apply(&self, f: &StepFunction) -> Result<StepFunction> {
        self.mesh.check_same(f.mesh())?;
        StepFunction::new(self.mesh, self.apply_values(f.values()))
    }

    /// Cellwise evaluation on raw cell values.
    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.mesh.cell_count());
        match &self.kind {
            OperatorKind::Maximal { alpha, measure } => {
                let weighted = values.iter().zip(measure.masses()).map(|(v, m)| v.abs() * m).collect();
                let sums = self.index.sums(weighted);
                let expo = alpha / self.mesh.dim as f64 - 1.0;
                let coeffs: Vec<Vec<f64>> = sums
                    .iter()
                    .zip(&self.mu_sums)
                    .map(|(s, mu)| {
                        s.iter()
                            .zip(mu)
                            .map(|(&s, &m)| if m > 0.0 { m.powf(expo) * s } else { 0.0 })
                            .collect()
                    })
                    .collect();
                self.index.push_down_max(&coeffs)
            }
            _ => {
                let h = self.mesh.cell_volume();
                let sums = self.index.sums(values.iter().map(|v| v * h).collect());
                let coeffs: Vec<Vec<f64>> = sums
                    .iter()
                    .zip(&self.coeffs)
                    .map(|(s, c)| s.iter().zip(c).map(|(s, c)| s * c).collect())
                    .collect();
                self.index.push_down_sum(&coeffs)
            }
        }
    }

    /// `∫ (op f) g dρ`, evaluated cellwise; `ρ` defaults to Lebesgue measure.
    pub fn bilinear_form(&self, f: &StepFunction, g: &StepFunction, rho: Option<&MeasureView>) -> Result<f64> {
        self.mesh.check_same(g.mesh())?;
        let tf = self.apply(f)?;
        let masses = self.rho_masses(rho)?;
        Ok(compensated_sum(tf.values().iter().zip(g.values()).zip(masses.iter()).map(|((a, b), m)| a * b * m)))
    }

    /// `Σ_Q c_Q avg_Q f · ∫_Q g dρ` over the operator's cubes (linear kinds).
    pub fn bilinear_form_cube_sum(
        &self,
        f: &StepFunction,
        g: &StepFunction,
        rho: Option<&MeasureView>,
    ) -> Result<f64> {
        if !self.is_linear() {
            return Err(Error::InvalidInput("cube-sum evaluation needs a linear operator".into()));
        }
        self.mesh.check_same(f.mesh())?;
        self.mesh.check_same(g.mesh())?;
        let h = self.mesh.cell_volume();
        let masses = self.rho_masses(rho)?;
        let fs = self.index.sums(f.values().iter().map(|v| v * h).collect());
        let gs = self.index.sums(g.values().iter().zip(masses.iter()).map(|(v, m)| v * m).collect());
        let mut terms = Vec::new();
        for j in 0..self.mesh.depth() {
            for i in 0..self.mesh.count_at(j) {
                let c = self.coeffs[j][i];
                if c != 0.0 {
                    terms.push(c * fs[j][i] * gs[j][i]);
                }
            }
        }
        Ok(compensated_sum(terms))
    }

    fn rho_masses(&self, rho: Option<&MeasureView>) -> Result<Vec<f64>> {
        Ok(match rho {
            Some(r) => {
                self.mesh.check_same(r.mesh())?;
                r.masses().to_vec()
            }
            None => vec![self.mesh.cell_volume(); self.mesh.cell_count()],
        })
    }

    fn maximal_parts(&self) -> Result<(f64, &MeasureView)> {
        match &self.kind {
            OperatorKind::Maximal { alpha, measure } => Ok((*alpha, measure)),
            _ => Err(Error::InvalidInput("operator is not a maximal operator".into())),
        }
    }

    /// Level-set inequality `μ({Mf > λ}) <= (λ^{-1} ∫_{Mf>λ} |f| dμ)^{n/(n-α)}`.
    pub fn weak_type_check(&self, f: &StepFunction, lambda: f64) -> Result<WeakTypeCheck> {
        let (alpha, measure) = self.maximal_parts()?;
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        let mf = self.apply(f)?;
        Ok(weak_type_from(mf.values(), f.values(), measure.masses(), alpha, self.mesh.dim, lambda))
    }

    /// `‖Mf‖_{L^q(μ)} / ‖f‖_{L^p(μ)}` against `(1 + p'/q)^{1-α/n}`.
    pub fn maximal_bound_check(&self, f: &StepFunction, p: f64) -> Result<MaximalBoundCheck> {
        let (alpha, measure) = self.maximal_parts()?;
        let q = maximal_target_exponent(p, alpha, self.mesh.dim)?;
        let mf = self.apply(f)?;
        let num = lp_norm_cells(mf.values(), q, measure.masses())?;
        let den = lp_norm_cells(f.values(), p, measure.masses())?;
        let ratio = if den > 0.0 { num / den } else { 0.0 };
        let bound = maximal_constant(p, q, alpha, self.mesh.dim);
        Ok(MaximalBoundCheck { p, q, ratio, bound, ok: le_rel(ratio, bound, STRONG_SLACK) })
    }
}

/// Weak-type check from precomputed `Mf`, usable across many `λ`.
pub fn weak_type_from(mf: &[f64], f: &[f64], masses: &[f64], alpha: f64, n: usize, lambda: f64) -> WeakTypeCheck {
    let mut level = Vec::new();
    let mut mass_f = Vec::new();
    for ((&m, &v), &mu) in mf.iter().zip(f).zip(masses) {
        if m > lambda {
            level.push(mu);
            mass_f.push(v.abs() * mu);
        }
    }
    let lhs = compensated_sum(level);
    let nf = n as f64;
    let rhs = (compensated_sum(mass_f) / lambda).powf(nf / (nf - alpha));
    WeakTypeCheck { lambda, lhs, rhs, ok: lhs <= rhs * (1.0 + WEAK_SLACK) }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct WeakTypeCheck {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct MaximalBoundCheck {
    pub p: f64,
    pub q: f64,
    pub ratio: f64,
    pub bound: f64,
    pub ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DyadicCube;

    fn c(level: i32, m: i64) -> DyadicCube {
        DyadicCube::standard(level, vec![m])
    }

    fn two_tower() -> SparseFamily {
        SparseFamily::new(vec![c(0, 0), c(-1, 0)], 0.5).unwrap()
    }

    #[test]
    fn sparse_examples() {
        let mesh = MeshSpec::new(1, 0, -2).unwrap();
        let one = StepFunction::constant(mesh, 1.0).unwrap();
        let single = SparseFamily::new(vec![c(0, 0)], 0.5).unwrap();
        let t = OperatorSpec::cz_sparse(mesh, single).unwrap();
        assert_eq!(t.apply(&one).unwrap().values(), &[1.0; 4]);

        let t = OperatorSpec::cz_sparse(mesh, two_tower()).unwrap();
        assert_eq!(t.apply(&one).unwrap().values(), &[2.0, 2.0, 1.0, 1.0]);

        let i = OperatorSpec::frac_sparse(mesh, two_tower(), 0.5).unwrap();
        let v = i.apply(&one).unwrap();
        let top = 1.0 + 2f64.powf(-0.5);
        for (got, want) in v.values().iter().zip([top, top, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn maximal_examples() {
        let mesh = MeshSpec::new(1, 1, -1).unwrap();
        let f = StepFunction::indicator(mesh, &c(0, 0)).unwrap();
        let m0 = OperatorSpec::maximal(0.0, MeasureView::lebesgue(mesh)).unwrap();
        assert_eq!(m0.apply(&f).unwrap().values(), &[1.0, 1.0, 0.5, 0.5]);
        let m = OperatorSpec::maximal(0.5, MeasureView::lebesgue(mesh)).unwrap();
        let v = m.apply(&f).unwrap();
        let r = 2f64.powf(-0.5);
        for (got, want) in v.values().iter().zip([1.0, 1.0, r, r]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn maximal_skips_null_cubes() {
        let mesh = MeshSpec::new(1, 1, 0).unwrap();
        let mu = MeasureView::from_masses(mesh, vec![1.0, 0.0], "mu").unwrap();
        let m = OperatorSpec::maximal(0.5, mu).unwrap();
        let f = StepFunction::new(mesh, vec![1.0, 5.0]).unwrap();
        let v = m.apply(&f).unwrap();
        // Only the cube [1,2) has zero mass; [0,2) still covers it.
        assert!((v.values()[1] - 1.0).abs() < 1e-15);
        assert!((v.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bilinear_examples() {
        let mesh = MeshSpec::new(1, 0, -3).unwrap();
        let one = StepFunction::constant(mesh, 1.0).unwrap();
        let single = OperatorSpec::cz_sparse(mesh, SparseFamily::new(vec![c(0, 0)], 0.5).unwrap()).unwrap();
        assert!((single.bilinear_form(&one, &one, None).unwrap() - 1.0).abs() < 1e-15);
        let t = OperatorSpec::cz_sparse(mesh, two_tower()).unwrap();
        assert!((t.bilinear_form(&one, &one, None).unwrap() - 1.5).abs() < 1e-15);
        assert!((t.bilinear_form_cube_sum(&one, &one, None).unwrap() - 1.5).abs() < 1e-15);

        let other = OperatorSpec::cz_sparse(MeshSpec::new(1, 0, -2).unwrap(), two_tower()).unwrap();
        assert!(matches!(other.apply(&one), Err(Error::MeshMismatch(_))));
    }

    #[test]
    fn weak_type_examples() {
        let mesh = MeshSpec::new(1, 1, -1).unwrap();
        let f = StepFunction::indicator(mesh, &c(0, 0)).unwrap();
        let m0 = OperatorSpec::maximal(0.0, MeasureView::lebesgue(mesh)).unwrap();
        let w = m0.weak_type_check(&f, 0.75).unwrap();
        assert_eq!((w.lhs, w.ok), (1.0, true));
        assert!((w.rhs - 4.0 / 3.0).abs() < 1e-15);
        let w = m0.weak_type_check(&f, 1.0).unwrap();
        assert_eq!((w.lhs, w.ok), (0.0, true));
        assert!(m0.weak_type_check(&f, 0.0).is_err());

        let m = OperatorSpec::maximal(0.5, MeasureView::lebesgue(mesh)).unwrap();
        let w = m.weak_type_check(&f, 0.9).unwrap();
        assert_eq!((w.lhs, w.ok), (1.0, true));
        assert!((w.rhs - (1.0f64 / 0.9).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn maximal_bound_examples() {
        let mesh = MeshSpec::new(1, 1, -1).unwrap();
        let f = StepFunction::indicator(mesh, &c(0, 0)).unwrap();
        let m0 = OperatorSpec::maximal(0.0, MeasureView::lebesgue(mesh)).unwrap();
        let r = m0.maximal_bound_check(&f, 2.0).unwrap();
        assert_eq!(r.bound, 2.0);
        assert!((r.ratio - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(r.ok);

        let m = OperatorSpec::maximal(0.5, MeasureView::lebesgue(mesh)).unwrap();
        let r = m.maximal_bound_check(&f, 8.0 / 7.0).unwrap();
        assert!((r.bound - 2.0).abs() < 1e-12);
        assert!(m.maximal_bound_check(&f, 3.0).is_err());
    }

    #[test]
    fn alpha_range() {
        let mesh = MeshSpec::new(1, 0, -2).unwrap();
        assert!(OperatorSpec::frac_dyadic(mesh, 1.0).is_err());
        assert!(OperatorSpec::frac_dyadic(mesh, -0.1).is_err());
        assert!(OperatorSpec::cz_sparse(mesh, two_tower()).unwrap().alpha().is_none());
    }
}
