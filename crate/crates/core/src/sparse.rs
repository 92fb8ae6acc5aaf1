//! Sparse families of dyadic cubes, their exceptional sets `E(Q)`, and the
//! stopping-cube construction from a nonnegative function.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DyadicCube, GridShift};
use crate::mesh::{MeshIndex, MeshSpec};
use crate::numerics::compensated_sum;
use crate::step::StepFunction;

/// A finite family satisfying `|∪{Q' ∈ S : Q' ⊊ Q}| <= factor · |Q|` for every `Q ∈ S`.
///
/// Cubes are kept sorted from the largest level down, then by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SparseFamilyFile", into = "SparseFamilyFile")]
pub struct SparseFamily {
    dim: usize,
    shift: GridShift,
    cubes: Vec<DyadicCube>,
    factor: f64,
}

#[derive(Serialize, Deserialize)]
struct CubeEntry {
    level: i32,
    index: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct SparseFamilyFile {
    grid: String,
    cubes: Vec<CubeEntry>,
    factor: f64,
}

fn grid_name(shift: GridShift) -> String {
    format!("t{}", shift.0)
}

fn parse_grid_name(name: &str) -> Result<GridShift> {
    name.strip_prefix('t')
        .and_then(|bits| bits.parse::<u32>().ok())
        .map(GridShift)
        .ok_or_else(|| Error::InvalidInput(format!("unknown grid name {name:?}")))
}

impl TryFrom<SparseFamilyFile> for SparseFamily {
    type Error = Error;

    fn try_from(file: SparseFamilyFile) -> Result<Self> {
        let shift = parse_grid_name(&file.grid)?;
        let cubes = file
            .cubes
            .into_iter()
            .map(|c| DyadicCube { level: c.level, index: c.index, shift })
            .collect();
        SparseFamily::new(cubes, file.factor)
    }
}

impl From<SparseFamily> for SparseFamilyFile {
    fn from(s: SparseFamily) -> Self {
        Self {
            grid: grid_name(s.shift),
            cubes: s.cubes.into_iter().map(|c| CubeEntry { level: c.level, index: c.index }).collect(),
            factor: s.factor,
        }
    }
}

fn sort_cubes(cubes: &mut Vec<DyadicCube>) {
    cubes.sort_by(|a, b| b.level.cmp(&a.level).then_with(|| a.index.cmp(&b.index)));
    cubes.dedup();
}

fn check_one_grid(cubes: &[DyadicCube]) -> Result<()> {
    if let Some(first) = cubes.first() {
        for c in cubes {
            if c.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), got: c.dim() });
            }
            if c.shift != first.shift {
                return Err(Error::MixedGrids);
            }
        }
    }
    Ok(())
}

/// For every cube, `|∪ strict descendants in the set| / |Q|`, in the order given.
///
/// Only maximal strict descendants contribute, so the union is a disjoint sum.
pub fn descendant_union_ratios(cubes: &[DyadicCube]) -> Result<Vec<f64>> {
    check_one_grid(cubes)?;
    let position: HashMap<&DyadicCube, usize> =
        cubes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let Some(top) = cubes.iter().map(|c| c.level).max() else {
        return Ok(Vec::new());
    };
    let mut ratios = vec![0.0; cubes.len()];
    for (i, c) in cubes.iter().enumerate() {
        if position.get(c) != Some(&i) {
            continue; // duplicate entry
        }
        let mut anc = c.parent();
        while anc.level <= top {
            if let Some(&a) = position.get(&anc) {
                ratios[a] += 2f64.powi((c.level - anc.level) * c.dim() as i32);
                break;
            }
            anc = anc.parent();
        }
    }
    Ok(ratios)
}

/// `true` iff every cube's strict-descendant union covers at most `factor · |Q|`.
pub fn is_sparse(cubes: &[DyadicCube], factor: f64) -> Result<bool> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InvalidInput(format!("sparsity factor {factor} not in (0, 1]")));
    }
    Ok(descendant_union_ratios(cubes)?.iter().all(|&r| r <= factor))
}

impl SparseFamily {
    /// Validates sparseness with the given factor.
    pub fn new(mut cubes: Vec<DyadicCube>, factor: f64) -> Result<Self> {
        sort_cubes(&mut cubes);
        if cubes.is_empty() {
            return Err(Error::InvalidInput("sparse family must contain at least one cube".into()));
        }
        if !is_sparse(&cubes, factor)? {
            return Err(Error::InvalidInput(format!("cube family is not {factor}-sparse")));
        }
        Ok(Self { dim: cubes[0].dim(), shift: cubes[0].shift, cubes, factor })
    }

    /// `{[0, 2^{K-k})^n : 0 <= k <= depth}` in the unshifted grid.
    pub fn tower(dim: usize, root_level: i32, depth: u32) -> Result<Self> {
        let cubes = (0..=depth as i32)
            .map(|k| DyadicCube::standard(root_level - k, vec![0; dim]))
            .collect();
        Self::new(cubes, 0.5)
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> GridShift {
        self.shift
    }

    /// `(level offset, linear index)` of each cube on the mesh.
    pub fn locate(&self, mesh: &MeshSpec) -> Result<Vec<(usize, usize)>> {
        self.cubes.iter().map(|c| mesh.locate(c)).collect()
    }

    /// Per-level membership masks on the mesh.
    pub fn level_masks(&self, mesh: &MeshSpec) -> Result<Vec<Vec<bool>>> {
        let mut masks: Vec<Vec<bool>> = (0..mesh.depth()).map(|j| vec![false; mesh.count_at(j)]).collect();
        for (j, i) in self.locate(mesh)? {
            masks[j][i] = true;
        }
        Ok(masks)
    }

    /// `E(Q) = Q \ ∪{Q' ∈ S : Q' ⊊ Q}` as sets of mesh cells.
    pub fn exceptional_sets(&self, mesh: &MeshSpec) -> Result<ExceptionalSets> {
        let located = self.locate(mesh)?;
        let mut owner = vec![None; mesh.cell_count()];
        // Largest cubes first, so each cell ends up owned by its smallest cube.
        for (q, &(j, i)) in located.iter().enumerate() {
            for c in mesh.cells_of_located(j, i) {
                owner[c] = Some(q as u32);
            }
        }
        Ok(ExceptionalSets { mesh: *mesh, owner, count: self.cubes.len() })
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

/// Cell ownership: cell `c` belongs to `E(Q)` for `Q = cubes[owner[c]]`.
#[derive(Clone, Debug)]
pub struct ExceptionalSets {
    mesh: MeshSpec,
    owner: Vec<Option<u32>>,
    count: usize,
}

impl ExceptionalSets {
    pub fn owner(&self) -> &[Option<u32>] {
        &self.owner
    }

    pub fn cells(&self, q: usize) -> Vec<usize> {
        self.owner
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(q as u32))
            .map(|(c, _)| c)
            .collect()
    }

    /// `μ(E(Q))` for every cube, given cell masses.
    pub fn masses(&self, cell_masses: &[f64]) -> Vec<f64> {
        let mut per: Vec<Vec<f64>> = vec![Vec::new(); self.count];
        for (c, o) in self.owner.iter().enumerate() {
            if let Some(q) = o {
                per[*q as usize].push(cell_masses[c]);
            }
        }
        per.into_iter().map(compensated_sum).collect()
    }

    /// Lebesgue measure `|E(Q)|` for every cube.
    pub fn volumes(&self) -> Vec<f64> {
        let h = self.mesh.cell_volume();
        let mut counts = vec![0usize; self.count];
        for q in self.owner.iter().flatten() {
            counts[*q as usize] += 1;
        }
        counts.into_iter().map(|n| n as f64 * h).collect()
    }
}

/// Stopping cubes of `f` inside `root` with jump factor `a > 1`.
///
/// The `S`-children of a stopping cube `Q` are the maximal dyadic `Q' ⊊ Q`
/// with `avg_{Q'} f >= a · avg_Q f`. The result is `1/a`-sparse.
pub fn sparse_from_function(f: &StepFunction, root: &DyadicCube, a: f64) -> Result<SparseFamily> {
    if !(a > 1.0) {
        return Err(Error::InvalidInput(format!("stopping factor must exceed 1, got {a}")));
    }
    if !f.nonneg() {
        return Err(Error::InvalidInput("stopping cubes need a nonnegative function".into()));
    }
    let mesh = *f.mesh();
    let (j0, i0) = mesh.locate(root)?;
    let index = MeshIndex::new(mesh);
    let sums = index.sums(f.values().to_vec());
    let avg = |j: usize, i: usize| sums[j][i] / (1u64 << (j * mesh.dim)) as f64;
    if !(avg(j0, i0) > 0.0) {
        return Err(Error::Degenerate("function vanishes on the root cube".into()));
    }

    let mut selected = vec![(j0, i0)];
    let mut queue = VecDeque::from([(j0, i0)]);
    while let Some((j, i)) = queue.pop_front() {
        if j == 0 {
            continue;
        }
        let threshold = a * avg(j, i);
        let mut stack = index.children(j, i);
        let mut level = vec![j - 1; stack.len()];
        while let (Some(ci), Some(cj)) = (stack.pop(), level.pop()) {
            if avg(cj, ci) >= threshold {
                selected.push((cj, ci));
                queue.push_back((cj, ci));
            } else if cj > 0 {
                for g in index.children(cj, ci) {
                    stack.push(g);
                    level.push(cj - 1);
                }
            }
        }
    }
    let cubes = selected.into_iter().map(|(j, i)| mesh.cube_at(j, i)).collect();
    SparseFamily::new(cubes, 1.0 / a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(level: i32, m: i64) -> DyadicCube {
        DyadicCube::standard(level, vec![m])
    }

    #[test]
    fn is_sparse_examples() {
        let tower: Vec<_> = (0..=10).map(|k| c(-k, 0)).collect();
        assert!(is_sparse(&tower, 0.5).unwrap());
        assert!(!is_sparse(&[c(0, 0), c(-1, 0), c(-1, 1)], 0.5).unwrap());
        assert!(is_sparse(&[c(0, 0), c(-2, 0)], 0.5).unwrap());
        let mut shifted = c(-1, 0);
        shifted.shift = GridShift(1);
        assert!(matches!(is_sparse(&[c(0, 0), shifted], 0.5), Err(Error::MixedGrids)));
    }

    #[test]
    fn union_counts_only_maximal_descendants() {
        // [0,1/4) sits inside [0,1/2); only the latter counts for [0,1).
        let r = descendant_union_ratios(&[c(0, 0), c(-1, 0), c(-2, 0)]).unwrap();
        assert_eq!(r, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn exceptional_set_examples() {
        let mesh = MeshSpec::new(1, 0, -4).unwrap();
        let tower = SparseFamily::tower(1, 0, 3).unwrap();
        let e = tower.exceptional_sets(&mesh).unwrap();
        let vols = e.volumes();
        for (k, cube) in tower.cubes().iter().enumerate() {
            let want = if k < 3 { 2f64.powi(-(k as i32) - 1) } else { 1.0 / 8.0 };
            assert_eq!(vols[k], want, "cube {cube}");
        }
        assert_eq!(e.cells(0), (8..16).collect::<Vec<_>>());

        let single = SparseFamily::new(vec![c(0, 0)], 0.5).unwrap();
        assert_eq!(single.exceptional_sets(&mesh).unwrap().volumes(), vec![1.0]);

        let two = SparseFamily::new(vec![c(0, 0), c(-2, 0)], 0.5).unwrap();
        let v = two.exceptional_sets(&mesh).unwrap().volumes();
        assert_eq!(v, vec![0.75, 0.25]);

        let coarse = MeshSpec::new(1, 0, -1).unwrap();
        assert!(two.exceptional_sets(&coarse).is_err());
    }

    #[test]
    fn stopping_cube_examples() {
        let mesh = MeshSpec::new(1, 0, -2).unwrap();
        let one = StepFunction::constant(mesh, 1.0).unwrap();
        let s = sparse_from_function(&one, &mesh.root(), 2.0).unwrap();
        assert_eq!(s.cubes(), &[mesh.root()]);

        let f = StepFunction::new(mesh, vec![4.0, 1.0, 1.0, 1.0]).unwrap();
        let s = sparse_from_function(&f, &mesh.root(), 2.0).unwrap();
        assert_eq!(s.cubes(), &[c(0, 0), c(-2, 0)]);

        let mesh8 = MeshSpec::new(1, 0, -8).unwrap();
        let spike = StepFunction::indicator(mesh8, &c(-8, 0)).unwrap();
        let s = sparse_from_function(&spike, &mesh8.root(), 2.0).unwrap();
        let want: Vec<_> = (0..=8).map(|k| c(-k, 0)).collect();
        assert_eq!(s.cubes(), want.as_slice());
        assert_eq!(s.factor(), 0.5);
    }

    #[test]
    fn stopping_cube_errors() {
        let mesh = MeshSpec::new(1, 0, -2).unwrap();
        let zero = StepFunction::constant(mesh, 0.0).unwrap();
        assert!(matches!(sparse_from_function(&zero, &mesh.root(), 2.0), Err(Error::Degenerate(_))));
        let neg = StepFunction::new(mesh, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert!(sparse_from_function(&neg, &mesh.root(), 2.0).is_err());
        let one = StepFunction::constant(mesh, 1.0).unwrap();
        assert!(sparse_from_function(&one, &mesh.root(), 1.0).is_err());
    }

    #[test]
    fn family_json() {
        let s = SparseFamily::tower(1, 0, 2).unwrap();
        let json = s.to_json().unwrap();
        assert!(json.starts_with(r#"{"grid":"t0","cubes":[{"level":0,"index":[0]}"#));
        assert_eq!(SparseFamily::from_json(&json).unwrap(), s);
        let bad = r#"{"grid":"t0","cubes":[{"level":0,"index":[0]},{"level":-1,"index":[0]},{"level":-1,"index":[1]}],"factor":0.5}"#;
        assert!(SparseFamily::from_json(bad).is_err());
    }
}
