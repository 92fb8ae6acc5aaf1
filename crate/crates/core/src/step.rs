//! Piecewise-constant functions on a uniform dyadic mesh and the cell
//! measures they are integrated against.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DyadicCube;
use crate::mesh::MeshSpec;
use crate::numerics::compensated_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFunctionFile", into = "StepFunctionFile")]
pub struct StepFunction {
    mesh: MeshSpec,
    values: Vec<f64>,
    nonneg: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StepFunctionFile {
    dim: usize,
    root_level: i32,
    resolution_level: i32,
    values: Vec<f64>,
    #[serde(default)]
    nonneg: bool,
}

impl TryFrom<StepFunctionFile> for StepFunction {
    type Error = Error;

    fn try_from(file: StepFunctionFile) -> Result<Self> {
        let mesh = MeshSpec::new(file.dim, file.root_level, file.resolution_level)?;
        let f = StepFunction::new(mesh, file.values)?;
        if file.nonneg && !f.nonneg {
            return Err(Error::InvalidInput("nonneg flag set but a cell value is negative".into()));
        }
        Ok(f)
    }
}

impl From<StepFunction> for StepFunctionFile {
    fn from(f: StepFunction) -> Self {
        Self {
            dim: f.mesh.dim,
            root_level: f.mesh.root_level,
            resolution_level: f.mesh.resolution_level,
            values: f.values,
            nonneg: f.nonneg,
        }
    }
}

impl StepFunction {
    /// The nonneg flag is set when every value is `>= 0`.
    pub fn new(mesh: MeshSpec, values: Vec<f64>) -> Result<Self> {
        mesh.validate()?;
        if values.len() != mesh.cell_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} cell values, got {}",
                mesh.cell_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("cell {i} has non-finite value")));
        }
        let nonneg = values.iter().all(|&v| v >= 0.0);
        Ok(Self { mesh, values, nonneg })
    }

    pub fn constant(mesh: MeshSpec, c: f64) -> Result<Self> {
        Self::new(mesh, vec![c; mesh.cell_count()])
    }

    pub fn indicator(mesh: MeshSpec, cube: &DyadicCube) -> Result<Self> {
        let mut values = vec![0.0; mesh.cell_count()];
        for c in mesh.cells_of(cube)? {
            values[c] = 1.0;
        }
        Self::new(mesh, values)
    }

    /// Cell values from a function of the cell's lower corner.
    pub fn from_lower_corners(mesh: MeshSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..mesh.cell_count()).map(|i| f(&mesh.cell_lower(i))).collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nonneg(&self) -> bool {
        self.nonneg
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.mesh, self.values.iter().map(|v| c * v).collect())
    }

    pub fn abs(&self) -> Self {
        Self { mesh: self.mesh, values: self.values.iter().map(|v| v.abs()).collect(), nonneg: true }
    }

    pub fn zip_with(&self, other: &StepFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.mesh.check_same(&other.mesh)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Self::new(self.mesh, values)
    }

    /// `∫_Q f dx`, summed cell by cell.
    pub fn integral(&self, cube: &DyadicCube) -> Result<f64> {
        let cells = self.mesh.cells_of(cube)?;
        Ok(compensated_sum(cells.iter().map(|&c| self.values[c])) * self.mesh.cell_volume())
    }

    /// `∫_Q f dμ`.
    pub fn integral_wrt(&self, cube: &DyadicCube, mu: &MeasureView) -> Result<f64> {
        self.mesh.check_same(&mu.mesh)?;
        let cells = self.mesh.cells_of(cube)?;
        Ok(compensated_sum(cells.iter().map(|&c| self.values[c] * mu.masses[c])))
    }

    /// `μ(Q)^{-1} ∫_Q f dμ`.
    pub fn average(&self, cube: &DyadicCube, mu: &MeasureView) -> Result<f64> {
        let mass = mu.mass(cube)?;
        if mass <= 0.0 {
            return Err(Error::DegenerateMeasure(cube.to_string()));
        }
        Ok(self.integral_wrt(cube, mu)? / mass)
    }

    /// `(Σ |f_c|^p μ(c))^{1/p}`; `p = ∞` gives the sup over cells of positive mass.
    pub fn lp_norm(&self, p: f64, mu: &MeasureView) -> Result<f64> {
        self.mesh.check_same(&mu.mesh)?;
        lp_norm_cells(&self.values, p, &mu.masses)
    }

    /// Cellwise power `f^exponent`.
    pub fn pointwise_map(&self, exponent: f64) -> Result<Self> {
        if exponent < 0.0 {
            if let Some(cell) = self.values.iter().position(|&v| v == 0.0) {
                return Err(Error::Singularity { cell });
            }
        }
        if exponent.fract() != 0.0 {
            if let Some(i) = self.values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "fractional power of negative value in cell {i}"
                )));
            }
        }
        let mut out = Self::new(self.mesh, self.values.iter().map(|v| v.powf(exponent)).collect())?;
        out.nonneg = out.nonneg || self.nonneg;
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub(crate) fn lp_norm_cells(values: &[f64], p: f64, masses: &[f64]) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values
            .iter()
            .zip(masses)
            .filter(|(_, &m)| m > 0.0)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max));
    }
    let s = compensated_sum(values.iter().zip(masses).map(|(v, m)| v.abs().powf(p) * m));
    Ok(s.powf(1.0 / p))
}

/// A measure on the mesh given by its cell masses.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureView {
    mesh: MeshSpec,
    masses: Vec<f64>,
    label: String,
}

impl MeasureView {
    pub fn lebesgue(mesh: MeshSpec) -> Self {
        Self { mesh, masses: vec![mesh.cell_volume(); mesh.cell_count()], label: "lebesgue".into() }
    }

    pub fn from_masses(mesh: MeshSpec, masses: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if masses.len() != mesh.cell_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} cell masses, got {}",
                mesh.cell_count(),
                masses.len()
            )));
        }
        if let Some(i) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidInput(format!("cell {i} has invalid mass {}", masses[i])));
        }
        Ok(Self { mesh, masses, label: label.into() })
    }

    /// Measure with the given nonnegative density.
    pub fn from_density(density: &StepFunction, label: impl Into<String>) -> Result<Self> {
        let h = density.mesh.cell_volume();
        Self::from_masses(density.mesh, density.values.iter().map(|v| v * h).collect(), label)
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn density(&self) -> Vec<f64> {
        let h = self.mesh.cell_volume();
        self.masses.iter().map(|m| m / h).collect()
    }

    pub fn mass(&self, cube: &DyadicCube) -> Result<f64> {
        let cells = self.mesh.cells_of(cube)?;
        Ok(compensated_sum(cells.iter().map(|&c| self.masses[c])))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.masses.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_mesh(l: i32) -> MeshSpec {
        MeshSpec::new(1, 0, l).unwrap()
    }

    fn four_one() -> StepFunction {
        // 4 on [0,1/4), 1 on [1/4,1)
        StepFunction::new(unit_mesh(-2), vec![4.0, 1.0, 1.0, 1.0]).unwrap()
    }

    #[test]
    fn integral_examples() {
        let m = unit_mesh(-2);
        let chi = StepFunction::constant(m, 1.0).unwrap();
        assert_eq!(chi.integral(&m.root()).unwrap(), 1.0);
        assert_eq!(chi.integral(&DyadicCube::standard(-1, vec![0])).unwrap(), 0.5);
        assert_eq!(four_one().integral(&DyadicCube::standard(-1, vec![0])).unwrap(), 1.25);
        assert!(chi.integral(&DyadicCube::standard(-3, vec![0])).is_err());
        assert!(chi.integral(&DyadicCube::standard(1, vec![0])).is_err());
    }

    #[test]
    fn average_examples() {
        let m = unit_mesh(-1);
        let leb = MeasureView::lebesgue(m);
        let chi = StepFunction::constant(m, 1.0).unwrap();
        assert_eq!(chi.average(&m.root(), &leb).unwrap(), 1.0);

        let leb2 = MeasureView::lebesgue(unit_mesh(-2));
        assert_eq!(four_one().average(&unit_mesh(-2).root(), &leb2).unwrap(), 1.75);

        let half = StepFunction::new(m, vec![1.0, 0.0]).unwrap();
        let density = StepFunction::new(m, vec![2.0, 1.0]).unwrap();
        let mu = MeasureView::from_density(&density, "w").unwrap();
        let avg = half.average(&m.root(), &mu).unwrap();
        assert!((avg - 2.0 / 3.0).abs() < 1e-15);

        let null = MeasureView::from_masses(m, vec![0.0, 0.0], "zero").unwrap();
        assert!(matches!(half.average(&m.root(), &null), Err(Error::DegenerateMeasure(_))));
    }

    #[test]
    fn lp_norm_examples() {
        let m = unit_mesh(-1);
        let leb = MeasureView::lebesgue(m);
        assert_eq!(StepFunction::constant(m, 1.0).unwrap().lp_norm(2.0, &leb).unwrap(), 1.0);
        let f = StepFunction::new(m, vec![2.0, 0.0]).unwrap();
        assert!((f.lp_norm(2.0, &leb).unwrap() - 2f64.sqrt()).abs() < 1e-15);

        let leb2 = MeasureView::lebesgue(unit_mesh(-2));
        let got = four_one().lp_norm(3.0, &leb2).unwrap();
        assert!((got - 16.75f64.cbrt()).abs() < 1e-14);
        assert_eq!(four_one().lp_norm(f64::INFINITY, &leb2).unwrap(), 4.0);
        assert!(four_one().lp_norm(0.5, &leb2).is_err());
    }

    #[test]
    fn pointwise_map_examples() {
        let m = unit_mesh(-1);
        let w = StepFunction::constant(m, 4.0).unwrap();
        assert_eq!(w.pointwise_map(-1.0).unwrap().values(), &[0.25, 0.25]);
        let one = StepFunction::constant(m, 1.0).unwrap();
        assert_eq!(one.pointwise_map(-7.3).unwrap().values(), &[1.0, 1.0]);
        let w = StepFunction::new(m, vec![2.0, 1.0]).unwrap();
        let s = w.pointwise_map(-0.5).unwrap();
        assert!((s.values()[0] - 2f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(s.values()[1], 1.0);
        let z = StepFunction::new(m, vec![0.0, 1.0]).unwrap();
        assert!(matches!(z.pointwise_map(-1.0), Err(Error::Singularity { cell: 0 })));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let f = four_one();
        let back = StepFunction::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let bad = r#"{"dim":1,"root_level":0,"resolution_level":-1,"values":[1.0],"nonneg":true}"#;
        assert!(StepFunction::from_json(bad).is_err());
        let neg = r#"{"dim":1,"root_level":0,"resolution_level":-1,"values":[1.0,-1.0],"nonneg":true}"#;
        assert!(StepFunction::from_json(neg).is_err());
    }
}
