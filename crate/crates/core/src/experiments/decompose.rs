use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::le_rel;
use crate::operators::OperatorSpec;
use crate::sparse::{is_sparse, sparse_from_function, SparseFamily};
use crate::step::StepFunction;

/// Jump factor of the stopping-cube construction.
const STOP_FACTOR: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExceptionalStats {
    /// `min_Q |E(Q)| / |Q|`; at least `1/2` for a sparse family.
    pub min_ratio: f64,
    pub mean_ratio: f64,
    /// `Σ |E(Q)|`, the measure of the union of the family.
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecomposeReport {
    pub command: String,
    pub alpha: f64,
    pub family: SparseFamily,
    pub cubes: usize,
    pub is_sparse: bool,
    pub exceptional: ExceptionalStats,
    /// `I_α^S f <= I_α^D f` on every cell.
    pub sparse_below_dyadic: bool,
    /// `max I_α^D f / I_α^S f` over the mesh.
    pub max_dyadic_over_sparse: f64,
    /// `a / (1 - 2^{-α})` with stopping factor `a = 2`; absent for `α = 0`.
    pub reverse_constant: Option<f64>,
    pub reverse_ok: Option<bool>,
}

impl DecomposeReport {
    pub fn ok(&self) -> bool {
        self.is_sparse && self.sparse_below_dyadic && self.exceptional.min_ratio >= 0.5 && self.reverse_ok != Some(false)
    }
}

/// `a / (1 - 2^{-α})`: bound on `I_α^D f / I_α^S f` for the stopping cubes of `f`.
///
/// Every dyadic `Q` whose smallest stopping ancestor is `P` has
/// `avg_Q f < a avg_P f`, and those `Q` containing a point form a chain with
/// `|Q|^{α/n} = 2^{-kα} |P|^{α/n}`.
pub fn reverse_domination_constant(alpha: f64) -> Option<f64> {
    (alpha > 0.0).then(|| STOP_FACTOR / (1.0 - 2f64.powf(-alpha)))
}

/// Stopping cubes of `f` on its mesh root, with a verification block.
pub fn sparse_decompose(f: &StepFunction, alpha: f64) -> Result<DecomposeReport> {
    let mesh = *f.mesh();
    if !(0.0..mesh.dim as f64).contains(&alpha) {
        return Err(Error::Precondition(format!("need 0 <= alpha < n, got alpha={alpha}")));
    }
    if f.is_zero() {
        return Err(Error::Degenerate("input function is identically zero".into()));
    }
    let family = sparse_from_function(f, &mesh.root(), STOP_FACTOR)?;
    let sparse = is_sparse(family.cubes(), 0.5)?;
    let e = family.exceptional_sets(&mesh)?.volumes();
    let ratios: Vec<f64> = e.iter().zip(family.cubes()).map(|(v, q)| v / q.volume_f64()).collect();
    let exceptional = ExceptionalStats {
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
        total: e.iter().sum(),
    };

    let is = OperatorSpec::frac_sparse(mesh, family.clone(), alpha)?.apply_values(f.values());
    let id = OperatorSpec::frac_dyadic(mesh, alpha)?.apply_values(f.values());
    let sparse_below_dyadic = is.iter().zip(&id).all(|(s, d)| s <= d);
    let max_dyadic_over_sparse =
        is.iter().zip(&id).filter(|(s, _)| **s > 0.0).map(|(s, d)| d / s).fold(0.0, f64::max);
    let reverse_constant = reverse_domination_constant(alpha);
    Ok(DecomposeReport {
        command: "sparse-decompose".into(),
        alpha,
        cubes: family.len(),
        family,
        is_sparse: sparse,
        exceptional,
        sparse_below_dyadic,
        max_dyadic_over_sparse,
        reverse_ok: reverse_constant.map(|c| le_rel(max_dyadic_over_sparse, c, 1e-12)),
        reverse_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DyadicCube;
    use crate::mesh::MeshSpec;

    #[test]
    fn examples() {
        let mesh = MeshSpec::new(1, 0, -2).unwrap();
        let f = StepFunction::new(mesh, vec![4.0, 1.0, 1.0, 1.0]).unwrap();
        let r = sparse_decompose(&f, 0.5).unwrap();
        let want = [DyadicCube::standard(0, vec![0]), DyadicCube::standard(-2, vec![0])];
        assert_eq!(r.family.cubes(), &want);
        assert!(r.ok());

        let one = StepFunction::constant(mesh, 1.0).unwrap();
        assert_eq!(sparse_decompose(&one, 0.5).unwrap().cubes, 1);

        let mesh8 = MeshSpec::new(1, 0, -8).unwrap();
        let spike = StepFunction::indicator(mesh8, &DyadicCube::standard(-8, vec![0])).unwrap();
        let r = sparse_decompose(&spike, 0.5).unwrap();
        assert_eq!(r.cubes, 9);
        assert!(r.max_dyadic_over_sparse.is_finite());
        assert!(r.ok(), "{r:?}");

        let zero = StepFunction::constant(mesh, 0.0).unwrap();
        assert!(matches!(sparse_decompose(&zero, 0.5), Err(Error::Degenerate(_))));
    }
}
