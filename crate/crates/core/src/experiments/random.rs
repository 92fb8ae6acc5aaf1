//! Random inputs for the batch experiments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::mesh::MeshSpec;
use crate::sparse::{sparse_from_function, SparseFamily};
use crate::step::{MeasureView, StepFunction};
use crate::weights::Weight;

/// Nonnegative function: uniform on `[0, 10]`, or a low floor with a few tall cube spikes.
pub fn random_function<R: Rng>(rng: &mut R, mesh: &MeshSpec) -> Result<StepFunction> {
    let cells = mesh.cell_count();
    let values = if rng.random_bool(0.5) {
        (0..cells).map(|_| rng.random_range(0.0..=10.0)).collect()
    } else {
        let mut v: Vec<f64> = (0..cells).map(|_| rng.random_range(0.0..0.1)).collect();
        for _ in 0..rng.random_range(1..=4) {
            let j = rng.random_range(0..mesh.depth());
            let i = rng.random_range(0..mesh.count_at(j));
            let height = rng.random_range(1.0..100.0);
            for c in mesh.cells_of_located(j, i) {
                v[c] += height;
            }
        }
        v
    };
    StepFunction::new(*mesh, values)
}

/// Like [`random_function`] but with random signs on a third of the cells.
pub fn random_signed_function<R: Rng>(rng: &mut R, mesh: &MeshSpec) -> Result<StepFunction> {
    let f = random_function(rng, mesh)?;
    let values = f.values().iter().map(|&v| if rng.random_bool(1.0 / 3.0) { -v } else { v }).collect();
    StepFunction::new(*mesh, values)
}

fn lognormal<R: Rng>(rng: &mut R, spread: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (spread * z).exp()
}

/// Positive step weight: cellwise log-normal, log-normal on coarse blocks, or a
/// power profile `|x - x0|^a` sampled at cell centres.
pub fn random_weight<R: Rng>(rng: &mut R, mesh: &MeshSpec) -> Result<Weight> {
    let cells = mesh.cell_count();
    let values: Vec<f64> = match rng.random_range(0..3) {
        0 => {
            let spread = rng.random_range(0.2..1.5);
            (0..cells).map(|_| lognormal(rng, spread)).collect()
        }
        1 => {
            let j = rng.random_range(1..mesh.depth());
            let spread = rng.random_range(0.5..2.0);
            let mut v = vec![0.0; cells];
            for i in 0..mesh.count_at(j) {
                let level = lognormal(rng, spread);
                for c in mesh.cells_of_located(j, i) {
                    v[c] = level;
                }
            }
            v
        }
        _ => {
            let a = rng.random_range(-0.9..2.0);
            let h = 2f64.powi(mesh.resolution_level);
            let side = 2f64.powi(mesh.root_level);
            let centre: Vec<f64> = (0..mesh.dim).map(|_| rng.random_range(0.0..side)).collect();
            (0..cells)
                .map(|c| {
                    let dist = mesh
                        .cell_lower(c)
                        .iter()
                        .zip(&centre)
                        .map(|(x, x0)| (x + h / 2.0 - x0).abs())
                        .fold(0.0, f64::max);
                    (dist + h / 2.0).powf(a)
                })
                .collect()
        }
    };
    Weight::step(StepFunction::new(*mesh, values)?)
}

/// Measure with log-normal cell masses, roughly a fifth of the cells empty.
pub fn random_measure<R: Rng>(rng: &mut R, mesh: &MeshSpec) -> Result<MeasureView> {
    let h = mesh.cell_volume();
    let spread = rng.random_range(0.2..2.0);
    let masses = (0..mesh.cell_count())
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { h * lognormal(rng, spread) })
        .collect();
    MeasureView::from_masses(*mesh, masses, "random")
}

/// Stopping cubes (factor 2) of a random nonnegative function on the mesh root.
pub fn random_family<R: Rng>(rng: &mut R, mesh: &MeshSpec) -> Result<SparseFamily> {
    loop {
        let f = random_function(rng, mesh)?;
        if !f.is_zero() {
            return sparse_from_function(&f, &mesh.root(), 2.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::trial_rng;

    #[test]
    fn generators_respect_their_contracts() {
        let mesh = MeshSpec::new(1, 0, -6).unwrap();
        for t in 0..50 {
            let mut rng = trial_rng(3, t);
            assert!(random_function(&mut rng, &mesh).unwrap().nonneg());
            let w = random_weight(&mut rng, &mesh).unwrap();
            assert!(w.cell_masses(&mesh).unwrap().iter().all(|m| *m > 0.0));
            let mu = random_measure(&mut rng, &mesh).unwrap();
            assert!(mu.masses().iter().all(|m| *m >= 0.0));
            let s = random_family(&mut rng, &mesh).unwrap();
            assert_eq!(s.cubes()[0], mesh.root());
        }
    }
}
