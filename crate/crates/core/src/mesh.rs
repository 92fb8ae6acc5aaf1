//! Uniform dyadic mesh inside the root cube `[0, 2^K)^n` with cells of side
//! `2^L`, plus the level pyramid used to aggregate cube quantities.
//!
//! Level offsets `j = level - L` run from `0` (cells) to `K - L` (root).
//! Linear indices are row-major with the last axis fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DyadicCube;

const MAX_CELL_BITS: i64 = 28;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dim: usize,
    pub root_level: i32,
    pub resolution_level: i32,
}

impl MeshSpec {
    pub fn new(dim: usize, root_level: i32, resolution_level: i32) -> Result<Self> {
        let mesh = Self { dim, root_level, resolution_level };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("mesh dimension must be at least 1".into()));
        }
        if self.resolution_level > self.root_level {
            return Err(Error::InvalidInput(format!(
                "resolution level {} above root level {}",
                self.resolution_level, self.root_level
            )));
        }
        if self.root_level.abs() > 60 || self.resolution_level.abs() > 60 {
            return Err(Error::InvalidInput("mesh levels must lie in -60..=60".into()));
        }
        let bits = self.dim as i64 * (self.root_level - self.resolution_level) as i64;
        if bits > MAX_CELL_BITS {
            return Err(Error::InvalidInput(format!(
                "mesh with 2^{bits} cells exceeds the 2^{MAX_CELL_BITS} limit"
            )));
        }
        Ok(())
    }

    /// Number of levels from the cells up to the root, inclusive.
    pub fn depth(&self) -> usize {
        (self.root_level - self.resolution_level) as usize + 1
    }

    /// Cubes per axis at level offset `j`.
    pub fn side_at(&self, j: usize) -> usize {
        1usize << (self.depth() - 1 - j)
    }

    pub fn count_at(&self, j: usize) -> usize {
        self.side_at(j).pow(self.dim as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.count_at(0)
    }

    pub fn cell_volume(&self) -> f64 {
        2f64.powi(self.resolution_level * self.dim as i32)
    }

    pub fn volume_at(&self, j: usize) -> f64 {
        2f64.powi((self.resolution_level + j as i32) * self.dim as i32)
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::standard(self.root_level, vec![0; self.dim])
    }

    /// `(level offset, linear index)` of a cube of the unshifted grid.
    pub fn locate(&self, cube: &DyadicCube) -> Result<(usize, usize)> {
        if cube.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: cube.dim() });
        }
        if !cube.shift.is_zero()
            || cube.level < self.resolution_level
            || cube.level > self.root_level
        {
            return Err(Error::CubeOutOfRange(cube.to_string()));
        }
        let j = (cube.level - self.resolution_level) as usize;
        let side = self.side_at(j) as i64;
        let mut linear = 0usize;
        for &m in &cube.index {
            if m < 0 || m >= side {
                return Err(Error::CubeOutOfRange(cube.to_string()));
            }
            linear = linear * side as usize + m as usize;
        }
        Ok((j, linear))
    }

    pub fn coords(&self, j: usize, linear: usize) -> Vec<usize> {
        let side = self.side_at(j);
        let mut coords = vec![0; self.dim];
        let mut rest = linear;
        for c in coords.iter_mut().rev() {
            *c = rest % side;
            rest /= side;
        }
        coords
    }

    pub fn linear(&self, j: usize, coords: &[usize]) -> usize {
        let side = self.side_at(j);
        coords.iter().fold(0, |acc, &c| acc * side + c)
    }

    pub fn cube_at(&self, j: usize, linear: usize) -> DyadicCube {
        let index = self.coords(j, linear).into_iter().map(|c| c as i64).collect();
        DyadicCube::standard(self.resolution_level + j as i32, index)
    }

    /// Linear cell indices covered by the cube, in row-major order.
    pub fn cells_of(&self, cube: &DyadicCube) -> Result<Vec<usize>> {
        let (j, linear) = self.locate(cube)?;
        Ok(self.cells_of_located(j, linear))
    }

    pub(crate) fn cells_of_located(&self, j: usize, linear: usize) -> Vec<usize> {
        let span = 1usize << j;
        let start: Vec<usize> = self.coords(j, linear).into_iter().map(|c| c * span).collect();
        let cell_side = self.side_at(0);
        let mut out = Vec::with_capacity(span.pow(self.dim as u32));
        let mut offset = vec![0usize; self.dim];
        loop {
            let idx = start
                .iter()
                .zip(&offset)
                .fold(0, |acc, (s, o)| acc * cell_side + s + o);
            out.push(idx);
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                offset[axis] += 1;
                if offset[axis] < span {
                    break;
                }
                offset[axis] = 0;
            }
        }
    }

    /// Lower corner of a cell as floating point coordinates.
    pub fn cell_lower(&self, cell: usize) -> Vec<f64> {
        let h = 2f64.powi(self.resolution_level);
        self.coords(0, cell).into_iter().map(|c| c as f64 * h).collect()
    }

    pub fn check_same(&self, other: &MeshSpec) -> Result<()> {
        if self != other {
            return Err(Error::MeshMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Parent maps for every level below the root, built once per mesh.
#[derive(Clone, Debug)]
pub struct MeshIndex {
    mesh: MeshSpec,
    parents: Vec<Vec<u32>>,
}

impl MeshIndex {
    pub fn new(mesh: MeshSpec) -> Self {
        let parents = (0..mesh.depth() - 1)
            .map(|j| {
                (0..mesh.count_at(j))
                    .map(|i| {
                        let coords: Vec<usize> =
                            mesh.coords(j, i).into_iter().map(|c| c / 2).collect();
                        mesh.linear(j + 1, &coords) as u32
                    })
                    .collect()
            })
            .collect();
        Self { mesh, parents }
    }

    pub fn mesh(&self) -> &MeshSpec {
        &self.mesh
    }

    pub fn parents(&self, j: usize) -> &[u32] {
        &self.parents[j]
    }

    /// Cube sums at every level from per-cell values.
    pub fn sums(&self, cells: Vec<f64>) -> Vec<Vec<f64>> {
        debug_assert_eq!(cells.len(), self.mesh.cell_count());
        let mut levels = Vec::with_capacity(self.mesh.depth());
        levels.push(cells);
        for j in 0..self.mesh.depth() - 1 {
            let mut up = vec![0.0; self.mesh.count_at(j + 1)];
            for (v, &p) in levels[j].iter().zip(&self.parents[j]) {
                up[p as usize] += v;
            }
            levels.push(up);
        }
        levels
    }

    /// Cellwise sum over all ancestors (including the cell) of `coeffs`.
    pub fn push_down_sum(&self, coeffs: &[Vec<f64>]) -> Vec<f64> {
        self.push_down(coeffs, |a, b| a + b)
    }

    /// Cellwise max over all ancestors (including the cell) of `coeffs`.
    pub fn push_down_max(&self, coeffs: &[Vec<f64>]) -> Vec<f64> {
        self.push_down(coeffs, f64::max)
    }

    fn push_down(&self, coeffs: &[Vec<f64>], combine: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let top = self.mesh.depth() - 1;
        let mut acc = coeffs[top].clone();
        for j in (0..top).rev() {
            acc = coeffs[j]
                .iter()
                .zip(&self.parents[j])
                .map(|(&c, &p)| combine(acc[p as usize], c))
                .collect();
        }
        acc
    }

    /// Linear indices of the `2^n` children of cube `(j, linear)`, `j > 0`.
    pub fn children(&self, j: usize, linear: usize) -> Vec<usize> {
        let mesh = &self.mesh;
        let base: Vec<usize> = mesh.coords(j, linear).into_iter().map(|c| 2 * c).collect();
        (0..1usize << mesh.dim)
            .map(|bits| {
                let coords: Vec<usize> = base
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b + ((bits >> (mesh.dim - 1 - i)) & 1))
                    .collect();
                mesh.linear(j - 1, &coords)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_volumes() {
        let m = MeshSpec::new(2, 1, -1).unwrap();
        assert_eq!(m.depth(), 3);
        assert_eq!(m.cell_count(), 16);
        assert_eq!(m.count_at(2), 1);
        assert_eq!(m.cell_volume(), 0.25);
        assert_eq!(m.volume_at(2), 4.0);
        assert!(MeshSpec::new(1, 0, 1).is_err());
        assert!(MeshSpec::new(2, 0, -20).is_err());
    }

    #[test]
    fn locate_and_cells() {
        let m = MeshSpec::new(1, 0, -3).unwrap();
        let q = DyadicCube::standard(-1, vec![1]);
        assert_eq!(m.locate(&q).unwrap(), (2, 1));
        assert_eq!(m.cells_of(&q).unwrap(), vec![4, 5, 6, 7]);
        assert!(m.locate(&DyadicCube::standard(-1, vec![2])).is_err());
        assert!(m.locate(&DyadicCube::standard(-4, vec![0])).is_err());
        assert_eq!(m.cube_at(2, 1), q);

        let m2 = MeshSpec::new(2, 0, -2).unwrap();
        let q = DyadicCube::standard(-1, vec![1, 0]);
        assert_eq!(m2.cells_of(&q).unwrap(), vec![8, 9, 12, 13]);
    }

    #[test]
    fn pyramid_sums_and_push_down() {
        let m = MeshSpec::new(1, 0, -2).unwrap();
        let idx = MeshIndex::new(m);
        let sums = idx.sums(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(sums[1], vec![3.0, 7.0]);
        assert_eq!(sums[2], vec![10.0]);
        let down = idx.push_down_sum(&sums);
        assert_eq!(down, vec![14.0, 15.0, 20.0, 21.0]);
        let down = idx.push_down_max(&sums);
        assert_eq!(down, vec![10.0, 10.0, 10.0, 10.0]);
        assert_eq!(idx.children(1, 1), vec![2, 3]);
    }
}
