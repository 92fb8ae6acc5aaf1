//! Weights, their dual weights, and the `A_p` / `A_{p,q}` constants in
//! precursor form `sup_Q w(Q) σ(Q)^{p-1} / |Q|^p`, taken over an explicit
//! finite cube set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DyadicCube;
use crate::mesh::{MeshIndex, MeshSpec};
use crate::numerics::conjugate;
use crate::sparse::SparseFamily;
use crate::step::{MeasureView, StepFunction};

const TIE_TOL: f64 = 1e-12;

/// `scale · x^a` on `[0, 2^K)`, one-dimensional.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PowerWeight {
    pub a: f64,
    pub root_level: i32,
    pub scale: f64,
}

impl PowerWeight {
    /// `∫_{x0}^{x0+h} scale · x^a dx`.
    pub fn interval_mass(&self, x0: f64, h: f64) -> f64 {
        let e = self.a + 1.0;
        let raw = if x0 == 0.0 {
            h.powf(e) / e
        } else {
            x0.powf(e) * (e * (h / x0).ln_1p()).exp_m1() / e
        };
        self.scale * raw
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Step(StepFunction),
    Power(PowerWeight),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PowerFile {
    Power {
        a: f64,
        root_level: i32,
        #[serde(default = "unit_scale", skip_serializing_if = "is_unit")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

fn is_unit(s: &f64) -> bool {
    *s == 1.0
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightFile {
    Power(PowerFile),
    Step(StepFunction),
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Step(f) => f.serialize(s),
            Weight::Power(w) => PowerFile::Power { a: w.a, root_level: w.root_level, scale: w.scale }
                .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match WeightFile::deserialize(d)? {
            WeightFile::Step(f) => Weight::step(f).map_err(D::Error::custom),
            WeightFile::Power(PowerFile::Power { a, root_level, scale }) => {
                Weight::power_scaled(a, root_level, scale).map_err(D::Error::custom)
            }
        }
    }
}

impl Weight {
    pub fn step(f: StepFunction) -> Result<Self> {
        if let Some(i) = f.values().iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "step weight must be positive, cell {i} has {}",
                f.values()[i]
            )));
        }
        Ok(Weight::Step(f))
    }

    pub fn power(a: f64, root_level: i32) -> Result<Self> {
        Self::power_scaled(a, root_level, 1.0)
    }

    pub fn power_scaled(a: f64, root_level: i32, scale: f64) -> Result<Self> {
        if !(a > -1.0) || !a.is_finite() {
            return Err(Error::NonIntegrable { exponent: a });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!("power weight scale must be positive, got {scale}")));
        }
        Ok(Weight::Power(PowerWeight { a, root_level, scale }))
    }

    pub fn constant(mesh: MeshSpec, c: f64) -> Result<Self> {
        Self::step(StepFunction::constant(mesh, c)?)
    }

    /// `w^e`, cellwise for step weights and `a ↦ a e` for power weights.
    pub fn pow(&self, e: f64) -> Result<Self> {
        match self {
            Weight::Step(f) => Self::step(f.pointwise_map(e)?),
            Weight::Power(w) => {
                let a = w.a * e;
                if !(a > -1.0) {
                    return Err(Error::NonIntegrable { exponent: a });
                }
                Self::power_scaled(a, w.root_level, w.scale.powf(e))
            }
        }
    }

    /// `σ = w^{1-p'}`.
    pub fn dual(&self, p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Precondition(format!("dual weight needs 1 < p < inf, got {p}")));
        }
        self.pow(1.0 - conjugate(p))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        match self {
            Weight::Step(f) => Self::step(f.scaled(c)?),
            Weight::Power(w) => Self::power_scaled(w.a, w.root_level, w.scale * c),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Step(_) => "step".into(),
            Weight::Power(w) if w.scale == 1.0 => format!("x^{}", w.a),
            Weight::Power(w) => format!("{}*x^{}", w.scale, w.a),
        }
    }

    /// `w(Q)`; power weights use the closed-form antiderivative at any level.
    pub fn cube_mass(&self, cube: &DyadicCube) -> Result<f64> {
        match self {
            Weight::Step(f) => f.integral(cube),
            Weight::Power(w) => {
                if cube.dim() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: cube.dim() });
                }
                if !cube.shift.is_zero()
                    || cube.index[0] < 0
                    || cube.level > w.root_level
                    || cube.index[0] >= 1i64 << (w.root_level - cube.level).min(62)
                {
                    return Err(Error::CubeOutOfRange(cube.to_string()));
                }
                let h = 2f64.powi(cube.level);
                Ok(w.interval_mass(cube.index[0] as f64 * h, h))
            }
        }
    }

    pub fn cell_masses(&self, mesh: &MeshSpec) -> Result<Vec<f64>> {
        match self {
            Weight::Step(f) => {
                f.mesh().check_same(mesh)?;
                let h = mesh.cell_volume();
                Ok(f.values().iter().map(|v| v * h).collect())
            }
            Weight::Power(w) => {
                if mesh.dim != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: mesh.dim });
                }
                if mesh.root_level > w.root_level {
                    return Err(Error::MeshMismatch(format!(
                        "mesh root level {} exceeds power weight support level {}",
                        mesh.root_level, w.root_level
                    )));
                }
                let h = 2f64.powi(mesh.resolution_level);
                Ok((0..mesh.cell_count()).map(|i| w.interval_mass(i as f64 * h, h)).collect())
            }
        }
    }

    pub fn measure(&self, mesh: &MeshSpec) -> Result<MeasureView> {
        MeasureView::from_masses(*mesh, self.cell_masses(mesh)?, self.label())
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
}

/// The finite cube family a weight constant ranges over.
#[derive(Clone, Copy, Debug)]
pub enum CubeSet<'a> {
    /// Every unshifted cube of the mesh between the resolution and root levels.
    Dyadic(MeshSpec),
    Sparse(&'a SparseFamily),
    Explicit(&'a [DyadicCube]),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeSetKind {
    Dyadic,
    Sparse,
    Explicit,
}

impl CubeSet<'_> {
    pub fn kind(&self) -> CubeSetKind {
        match self {
            CubeSet::Dyadic(_) => CubeSetKind::Dyadic,
            CubeSet::Sparse(_) => CubeSetKind::Sparse,
            CubeSet::Explicit(_) => CubeSetKind::Explicit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightConstantReport {
    pub value: f64,
    pub argmax_cube: DyadicCube,
    pub cube_set: CubeSetKind,
}

/// `(first(Q)/|Q|) (second(Q)/|Q|)^expo`, maximized over the cube set.
fn sup_precursor(
    first: &Weight,
    second: &Weight,
    expo: f64,
    cubes: &CubeSet<'_>,
) -> Result<WeightConstantReport> {
    let product = |a: f64, b: f64, vol: f64, cube: &dyn Fn() -> DyadicCube| -> Result<f64> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::DegenerateMeasure(cube().to_string()));
        }
        Ok((a / vol) * (b / vol).powf(expo))
    };

    let mut scored: Vec<(f64, DyadicCube)> = Vec::new();
    match cubes {
        CubeSet::Dyadic(mesh) => {
            let index = MeshIndex::new(*mesh);
            let fa = index.sums(first.cell_masses(mesh)?);
            let fb = index.sums(second.cell_masses(mesh)?);
            for j in 0..mesh.depth() {
                let vol = mesh.volume_at(j);
                for i in 0..mesh.count_at(j) {
                    let v = product(fa[j][i], fb[j][i], vol, &|| mesh.cube_at(j, i))?;
                    scored.push((v, mesh.cube_at(j, i)));
                }
            }
        }
        CubeSet::Sparse(family) => {
            for cube in family.cubes() {
                let v = product(
                    first.cube_mass(cube)?,
                    second.cube_mass(cube)?,
                    cube.volume_f64(),
                    &|| cube.clone(),
                )?;
                scored.push((v, cube.clone()));
            }
        }
        CubeSet::Explicit(list) => {
            for cube in list.iter() {
                let v = product(
                    first.cube_mass(cube)?,
                    second.cube_mass(cube)?,
                    cube.volume_f64(),
                    &|| cube.clone(),
                )?;
                scored.push((v, cube.clone()));
            }
        }
    }
    if scored.is_empty() {
        return Err(Error::InvalidInput("weight constant over an empty cube set".into()));
    }
    let value = scored.iter().map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
    let argmax_cube = scored
        .into_iter()
        .filter(|(v, _)| *v >= value * (1.0 - TIE_TOL))
        .map(|(_, c)| c)
        .min_by(|a, b| b.level.cmp(&a.level).then_with(|| a.index.cmp(&b.index)))
        .expect("nonempty");
    Ok(WeightConstantReport { value, argmax_cube, cube_set: cubes.kind() })
}

/// `[w]_{A_p}` over the cube set.
pub fn ap_constant(w: &Weight, p: f64, cubes: &CubeSet<'_>) -> Result<WeightConstantReport> {
    let sigma = w.dual(p)?;
    sup_precursor(w, &sigma, p - 1.0, cubes)
}

/// `[w]_{A_{p,q}} = sup u(Q) σ(Q)^{q/p'} / |Q|^{1+q/p'}`, `u = w^q`, `σ = w^{-p'}`.
pub fn apq_constant(w: &Weight, p: f64, q: f64, cubes: &CubeSet<'_>) -> Result<WeightConstantReport> {
    if !(p > 1.0 && p.is_finite()) || !(q > 0.0 && q.is_finite()) {
        return Err(Error::Precondition(format!("A_pq needs 1 < p < inf and 0 < q < inf, got p={p}, q={q}")));
    }
    let pp = conjugate(p);
    let u = w.pow(q)?;
    let sigma = w.pow(-pp)?;
    sup_precursor(&u, &sigma, q / pp, cubes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tower(depth: i32) -> Vec<DyadicCube> {
        (0..=depth).map(|k| DyadicCube::standard(-k, vec![0])).collect()
    }

    #[test]
    fn dual_weight_examples() {
        let m = MeshSpec::new(1, 0, -1).unwrap();
        let w = Weight::constant(m, 4.0).unwrap();
        match w.dual(2.0).unwrap() {
            Weight::Step(s) => assert_eq!(s.values(), &[0.25, 0.25]),
            _ => unreachable!(),
        }
        let Weight::Power(s) = Weight::power(0.5, 0).unwrap().dual(2.0).unwrap() else { unreachable!() };
        assert_eq!(s.a, -0.5);
        let Weight::Power(s) = Weight::power(1.0, 0).unwrap().dual(3.0).unwrap() else { unreachable!() };
        assert!((s.a + 0.5).abs() < 1e-15);
        assert!(matches!(Weight::power(2.0, 0).unwrap().dual(2.0), Err(Error::NonIntegrable { .. })));
    }

    #[test]
    fn ap_constant_examples() {
        let m = MeshSpec::new(1, 0, -1).unwrap();
        let one = Weight::constant(m, 1.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let r = ap_constant(&one, p, &CubeSet::Dyadic(m)).unwrap();
            assert!((r.value - 1.0).abs() < 1e-14);
            assert_eq!(r.argmax_cube, m.root());
        }

        let w = Weight::step(StepFunction::new(m, vec![2.0, 1.0]).unwrap()).unwrap();
        let r = ap_constant(&w, 2.0, &CubeSet::Dyadic(m)).unwrap();
        assert!((r.value - 1.125).abs() < 1e-14);
        assert_eq!(r.argmax_cube, m.root());
        assert_eq!(r.cube_set, CubeSetKind::Dyadic);

        let cubes = tower(40);
        let r = ap_constant(&Weight::power(0.5, 0).unwrap(), 2.0, &CubeSet::Explicit(&cubes)).unwrap();
        assert!((r.value - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.argmax_cube, DyadicCube::standard(0, vec![0]));
    }

    #[test]
    fn apq_constant_examples() {
        let m = MeshSpec::new(1, 0, -3).unwrap();
        let cubes = CubeSet::Dyadic(m);
        let r = apq_constant(&Weight::constant(m, 1.0).unwrap(), 8.0 / 7.0, 8.0 / 3.0, &cubes).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
        let r = apq_constant(&Weight::constant(m, 7.5).unwrap(), 8.0 / 7.0, 8.0 / 3.0, &cubes).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apq_power_tower_closed_form() {
        // a = 1/16: u = x^{1/6}, σ = x^{-1/2}; every tower cube gives (6/7) 2^{1/3}.
        let (p, q) = (8.0 / 7.0, 8.0 / 3.0);
        let cubes = tower(30);
        let w = Weight::power(1.0 / 16.0, 0).unwrap();
        let r = apq_constant(&w, p, q, &CubeSet::Explicit(&cubes)).unwrap();
        let want = (6.0 / 7.0) * 2f64.powf(1.0 / 3.0);
        assert!((r.value - want).abs() < 1e-12 * want);

        // a = 1/8 makes σ = x^{-1}, which is not integrable.
        let w = Weight::power(1.0 / 8.0, 0).unwrap();
        assert!(matches!(
            apq_constant(&w, p, q, &CubeSet::Explicit(&cubes)),
            Err(Error::NonIntegrable { .. })
        ));
    }

    #[test]
    fn power_cube_masses() {
        let w = Weight::power(0.5, 0).unwrap();
        let m = w.cube_mass(&DyadicCube::standard(-1, vec![1])).unwrap();
        let want = (1.0 - 0.5f64.powf(1.5)) / 1.5;
        assert!((m - want).abs() < 1e-15);
        assert!(w.cube_mass(&DyadicCube::standard(1, vec![0])).is_err());
        assert!(w.cube_mass(&DyadicCube::standard(-1, vec![2])).is_err());
    }

    #[test]
    fn weight_json_forms() {
        let w = Weight::from_json(r#"{"kind":"power","a":0.5,"root_level":0}"#).unwrap();
        assert_eq!(w, Weight::power(0.5, 0).unwrap());
        let back = Weight::from_json(&w.to_json().unwrap()).unwrap();
        assert_eq!(back, w);
        let step = r#"{"dim":1,"root_level":0,"resolution_level":-1,"values":[2.0,1.0],"nonneg":true}"#;
        assert!(matches!(Weight::from_json(step).unwrap(), Weight::Step(_)));
        let zero = r#"{"dim":1,"root_level":0,"resolution_level":-1,"values":[0.0,1.0],"nonneg":true}"#;
        assert!(Weight::from_json(zero).is_err());
        assert!(Weight::from_json(r#"{"kind":"power","a":-1.5,"root_level":0}"#).is_err());
    }

    #[test]
    fn empty_cube_set_is_rejected() {
        let m = MeshSpec::new(1, 0, -1).unwrap();
        let w = Weight::constant(m, 1.0).unwrap();
        assert!(ap_constant(&w, 2.0, &CubeSet::Explicit(&[])).is_err());
    }
}
