//! Brute-force oracles for one-dimensional meshes: cubes are handled as
//! integer cell ranges, with no use of the level pyramid.

#![allow(dead_code)]

use std::ops::Range;

use dyadic_core::geometry::DyadicCube;
use dyadic_core::mesh::MeshSpec;
use nalgebra::DMatrix;

/// Cells of a one-dimensional unshifted cube, by direct index arithmetic.
pub fn cell_range(mesh: &MeshSpec, cube: &DyadicCube) -> Range<usize> {
    assert_eq!(mesh.dim, 1);
    let span = 1usize << (cube.level - mesh.resolution_level);
    let m = cube.index[0] as usize;
    m * span..(m + 1) * span
}

/// Every unshifted cube between the cell and root levels.
pub fn all_cubes(mesh: &MeshSpec) -> Vec<DyadicCube> {
    let mut out = Vec::new();
    for level in mesh.resolution_level..=mesh.root_level {
        let count = 1i64 << (mesh.root_level - level);
        for m in 0..count {
            out.push(DyadicCube::standard(level, vec![m]));
        }
    }
    out
}

/// `Σ_Q |Q|^α avg_Q f χ_Q` summed cube by cube.
pub fn sparse_apply(mesh: &MeshSpec, cubes: &[DyadicCube], alpha: f64, f: &[f64]) -> Vec<f64> {
    let h = mesh.cell_volume();
    let mut out = vec![0.0; f.len()];
    for q in cubes {
        let r = cell_range(mesh, q);
        let vol = r.len() as f64 * h;
        let avg = f[r.clone()].iter().sum::<f64>() * h / vol;
        for c in r {
            out[c] += vol.powf(alpha) * avg;
        }
    }
    out
}

/// `sup_{Q ∋ x} μ(Q)^{α-1} ∫_Q |f| dμ` by enumerating all cubes.
pub fn maximal_apply(mesh: &MeshSpec, alpha: f64, masses: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; f.len()];
    for q in all_cubes(mesh) {
        let r = cell_range(mesh, &q);
        let mu: f64 = masses[r.clone()].iter().sum();
        if mu == 0.0 {
            continue;
        }
        let integral: f64 = r.clone().map(|c| f[c].abs() * masses[c]).sum();
        let v = mu.powf(alpha - 1.0) * integral;
        for c in r {
            out[c] = out[c].max(v);
        }
    }
    out
}

/// Stopping cubes by definition: the children of `Q` are the maximal dyadic
/// `Q' ⊊ Q` with `avg_{Q'} f >= a avg_Q f`, found by scanning every subcube.
pub fn stopping_cubes(mesh: &MeshSpec, f: &[f64], a: f64) -> Vec<DyadicCube> {
    let cubes = all_cubes(mesh);
    let avg = |q: &DyadicCube| {
        let r = cell_range(mesh, q);
        let len = r.len() as f64;
        f[r].iter().sum::<f64>() / len
    };
    let strictly_inside = |inner: &DyadicCube, outer: &DyadicCube| {
        let (a, b) = (cell_range(mesh, inner), cell_range(mesh, outer));
        inner.level < outer.level && b.start <= a.start && a.end <= b.end
    };
    let mut out = vec![mesh.root()];
    let mut next = 0;
    while next < out.len() {
        let q = out[next].clone();
        next += 1;
        let threshold = a * avg(&q);
        let hits: Vec<&DyadicCube> =
            cubes.iter().filter(|c| strictly_inside(c, &q) && avg(c) >= threshold).collect();
        for c in &hits {
            if !hits.iter().any(|d| strictly_inside(c, d)) {
                out.push((*c).clone());
            }
        }
    }
    out
}

/// Matrix of `Σ_Q |Q|^α avg_Q(·) χ_Q` in the orthonormal basis `χ_c / sqrt(h)`.
pub fn sparse_matrix(mesh: &MeshSpec, cubes: &[DyadicCube], alpha: f64) -> DMatrix<f64> {
    let n = mesh.cell_count();
    let h = mesh.cell_volume();
    let mut m = DMatrix::zeros(n, n);
    for q in cubes {
        let r = cell_range(mesh, q);
        let vol = r.len() as f64 * h;
        let entry = vol.powf(alpha) * h / vol;
        for a in r.clone() {
            for b in r.clone() {
                m[(a, b)] += entry;
            }
        }
    }
    m
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}
