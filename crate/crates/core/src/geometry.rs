//! Exact dyadic cubes, grids and the one-third shifted grid family.
//!
//! A cube of level `k` in the grid with shift `t` is
//! `2^k ([0,1)^n + m + (-1)^k t)`; every endpoint is a rational with
//! denominator dividing `3 * 2^j`. With `t` in `{0, 1/3}^n` the alternating
//! sign keeps the grid nested because `3t` is an integer.

use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// `2^k` as an exact rational.
pub fn pow2(k: i32) -> Rational {
    if k >= 0 {
        Rational::from_integer(1i128 << k)
    } else {
        Rational::new(1, 1i128 << (-k))
    }
}

fn level_sign(level: i32) -> i128 {
    if level.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Bit `i` set means coordinate `i` is shifted by `1/3`.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridShift(pub u32);

impl GridShift {
    pub const ZERO: GridShift = GridShift(0);

    /// `3 t_i`, either 0 or 1.
    pub fn thirds(self, axis: usize) -> i128 {
        ((self.0 >> axis) & 1) as i128
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    fn is_zero_ref(&self) -> bool {
        self.0 == 0
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicGrid {
    dim: usize,
    shift: GridShift,
    sign_rule: bool,
}

impl DyadicGrid {
    pub fn new(dim: usize, shift: GridShift, sign_rule: bool) -> Result<Self> {
        if dim == 0 || dim > 16 {
            return Err(Error::InvalidInput(format!("grid dimension {dim} not in 1..=16")));
        }
        if shift.0 >> dim != 0 {
            return Err(Error::InvalidInput(format!(
                "shift bits {:#b} exceed dimension {dim}",
                shift.0
            )));
        }
        if !shift.is_zero() && !sign_rule {
            return Err(Error::InvalidInput(
                "a 1/3-shifted grid without the (-1)^k sign rule is not nested".into(),
            ));
        }
        Ok(Self { dim, shift, sign_rule })
    }

    /// The unshifted grid `t = 0`.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, GridShift::ZERO, true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> GridShift {
        self.shift
    }

    pub fn sign_rule(&self) -> bool {
        self.sign_rule
    }

    /// Shift vector `t` as exact rationals.
    pub fn shift_vector(&self) -> Vec<Rational> {
        (0..self.dim)
            .map(|i| Rational::new(self.shift.thirds(i), 3))
            .collect()
    }

    pub fn cube(&self, level: i32, index: &[i64]) -> Result<DyadicCube> {
        if index.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: index.len() });
        }
        Ok(DyadicCube { level, index: index.to_vec(), shift: self.shift })
    }

    /// The unique level-`level` cube of this grid containing `point`.
    pub fn containing(&self, level: i32, point: &[Rational]) -> Result<DyadicCube> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        let scale = pow2(level);
        let sign = level_sign(level);
        let index = point
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let offset = Rational::new(sign * self.shift.thirds(i), 3);
                let m = (x / scale - offset).floor().to_integer();
                m as i64
            })
            .collect();
        Ok(DyadicCube { level, index, shift: self.shift })
    }
}

/// Identified structurally by `(shift, level, index)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: i32,
    pub index: Vec<i64>,
    #[serde(default, skip_serializing_if = "GridShift::is_zero_ref")]
    pub shift: GridShift,
}

impl DyadicCube {
    /// Cube of the unshifted grid.
    pub fn standard(level: i32, index: Vec<i64>) -> Self {
        Self { level, index, shift: GridShift::ZERO }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> Rational {
        pow2(self.level)
    }

    /// `|Q| = 2^{nk}`.
    pub fn volume(&self) -> Rational {
        pow2(self.level * self.dim() as i32)
    }

    pub fn volume_f64(&self) -> f64 {
        2f64.powi(self.level * self.dim() as i32)
    }

    pub fn lower(&self, axis: usize) -> Rational {
        let sign = level_sign(self.level);
        let m = self.index[axis] as i128;
        pow2(self.level) * Rational::new(3 * m + sign * self.shift.thirds(axis), 3)
    }

    pub fn upper(&self, axis: usize) -> Rational {
        self.lower(axis) + self.side()
    }

    pub fn bounds(&self) -> Vec<(Rational, Rational)> {
        (0..self.dim()).map(|i| (self.lower(i), self.upper(i))).collect()
    }

    pub fn parent(&self) -> DyadicCube {
        let sign = level_sign(self.level) as i64;
        let index = self
            .index
            .iter()
            .enumerate()
            .map(|(i, &m)| (m + sign * self.shift.thirds(i) as i64).div_euclid(2))
            .collect();
        DyadicCube { level: self.level + 1, index, shift: self.shift }
    }

    /// The `2^n` cubes one level down whose union is `self`.
    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        let child_sign = level_sign(self.level - 1) as i64;
        let base: Vec<i64> = self
            .index
            .iter()
            .enumerate()
            .map(|(i, &m)| 2 * m - child_sign * self.shift.thirds(i) as i64)
            .collect();
        (0..1u32 << n)
            .map(|bits| {
                let index = base
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| b + ((bits >> (n - 1 - i)) & 1) as i64)
                    .collect();
                DyadicCube { level: self.level - 1, index, shift: self.shift }
            })
            .collect()
    }

    pub fn contains_point(&self, point: &[Rational]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .enumerate()
                .all(|(i, x)| self.lower(i) <= *x && *x < self.upper(i))
    }

    /// Set containment `other ⊆ self`, by endpoint comparison.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                self.lower(i) <= other.lower(i) && other.upper(i) <= self.upper(i)
            })
    }

    pub fn is_disjoint(&self, other: &DyadicCube) -> bool {
        (0..self.dim()).any(|i| {
            self.upper(i) <= other.lower(i) || other.upper(i) <= self.lower(i)
        })
    }

    /// Strict dyadic ancestor test without rational arithmetic.
    pub fn is_strict_ancestor_of(&self, other: &DyadicCube) -> bool {
        if other.shift != self.shift || other.level >= self.level {
            return false;
        }
        let mut c = other.parent();
        while c.level < self.level {
            c = c.parent();
        }
        c == *self
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (lo, hi)) in self.bounds().into_iter().enumerate() {
            if i > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{lo},{hi})")?;
        }
        Ok(())
    }
}

/// The `2^n` grids with shifts `t ∈ {0, 1/3}^n`, unshifted grid first.
pub fn shifted_grids(n: usize) -> Result<Vec<DyadicGrid>> {
    if n == 0 || n > 16 {
        return Err(Error::InvalidInput(format!("dimension {n} not in 1..=16")));
    }
    (0..1u32 << n)
        .map(|bits| DyadicGrid::new(n, GridShift(bits), true))
        .collect()
}

fn level_of_power(side: Rational) -> Option<i32> {
    if side <= Rational::zero() {
        return None;
    }
    let (num, den) = (*side.numer(), *side.denom());
    if num == 1 && den.count_ones() == 1 {
        Some(-(den.trailing_zeros() as i32))
    } else if den == 1 && num.count_ones() == 1 {
        Some(num.trailing_zeros() as i32)
    } else {
        None
    }
}

/// Smallest `k` with `2^k > bound`.
fn smallest_level_above(bound: Rational) -> i32 {
    let approx = (*bound.numer() as f64 / *bound.denom() as f64).log2().floor() as i32;
    let mut k = approx.clamp(-120, 120);
    while pow2(k) <= bound {
        k += 1;
    }
    while pow2(k - 1) > bound {
        k -= 1;
    }
    k
}

/// Finds a cube of one of the `2^n` shifted grids containing the query cube
/// `lo + [0, side)^n` with side at most `6 * side`.
pub fn covering_cube(lo: &[Rational], side: Rational) -> Result<(DyadicCube, DyadicGrid)> {
    if side <= Rational::zero() {
        return Err(Error::InvalidInput("query side must be positive".into()));
    }
    let grids = shifted_grids(lo.len())?;
    let describe = || {
        let coords: Vec<String> = lo.iter().map(|x| x.to_string()).collect();
        format!("[{}] + [0,{side})^{}", coords.join(","), lo.len())
    };

    if let Some(level) = level_of_power(side) {
        for grid in &grids {
            let cube = grid.containing(level, lo)?;
            if (0..lo.len()).all(|i| cube.lower(i) == lo[i]) {
                return Ok((cube, *grid));
            }
        }
    }

    let level = smallest_level_above(side * Rational::from_integer(3));
    debug_assert!(pow2(level) <= side * Rational::from_integer(6));
    for grid in &grids {
        let cube = grid.containing(level, lo)?;
        if (0..lo.len()).all(|i| lo[i].clone() + side <= cube.upper(i)) {
            return Ok((cube, *grid));
        }
    }
    Err(Error::NoCover(describe()))
}

/// `true` if the two cubes are nested or disjoint.
pub fn nested_or_disjoint(a: &DyadicCube, b: &DyadicCube) -> bool {
    a.is_disjoint(b) || a.contains(b) || b.contains(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn third_grid() -> DyadicGrid {
        DyadicGrid::new(1, GridShift(1), true).unwrap()
    }

    #[test]
    fn cube_endpoints() {
        let g = DyadicGrid::standard(1).unwrap();
        assert_eq!(g.cube(0, &[0]).unwrap().bounds(), vec![(r(0, 1), r(1, 1))]);
        assert_eq!(g.cube(-1, &[1]).unwrap().bounds(), vec![(r(1, 2), r(1, 1))]);
        let c = third_grid().cube(0, &[0]).unwrap();
        assert_eq!(c.bounds(), vec![(r(1, 3), r(4, 3))]);
        assert!(matches!(g.cube(0, &[0, 1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn parent_examples() {
        let g = DyadicGrid::standard(1).unwrap();
        let want = g.cube(0, &[0]).unwrap();
        assert_eq!(g.cube(-1, &[0]).unwrap().parent(), want);
        assert_eq!(g.cube(-1, &[1]).unwrap().parent(), want);
        let p = third_grid().cube(0, &[0]).unwrap().parent();
        assert_eq!(p.bounds(), vec![(r(-2, 3), r(4, 3))]);
    }

    #[test]
    fn children_examples() {
        let g = DyadicGrid::standard(1).unwrap();
        let kids: Vec<_> = g.cube(0, &[0]).unwrap().children().iter().map(|c| c.bounds()).collect();
        assert_eq!(kids, vec![vec![(r(0, 1), r(1, 2))], vec![(r(1, 2), r(1, 1))]]);

        let g2 = DyadicGrid::standard(2).unwrap();
        let kids = g2.cube(1, &[0, 0]).unwrap().children();
        assert_eq!(kids.len(), 4);
        for c in &kids {
            assert_eq!(c.level, 0);
            assert!(c.index.iter().all(|&m| m == 0 || m == 1));
        }

        let big = third_grid().cube(1, &[0]).unwrap();
        let kids: Vec<_> = big.children().iter().map(|c| c.bounds()[0].clone()).collect();
        assert_eq!(kids, vec![(r(-2, 3), r(1, 3)), (r(1, 3), r(4, 3))]);
    }

    #[test]
    fn unshifted_grid_must_alternate() {
        assert!(DyadicGrid::new(1, GridShift(1), false).is_err());
        assert!(DyadicGrid::new(1, GridShift::ZERO, false).is_ok());
        assert!(DyadicGrid::new(1, GridShift(2), true).is_err());
    }

    #[test]
    fn shifted_grid_counts() {
        assert_eq!(shifted_grids(1).unwrap().len(), 2);
        assert_eq!(shifted_grids(2).unwrap().len(), 4);
        assert!(shifted_grids(0).is_err());
    }

    #[test]
    fn covering_examples() {
        let (c, g) = covering_cube(&[r(3, 10)], r(1, 2)).unwrap();
        assert!(g.shift().is_zero());
        assert_eq!(c.bounds(), vec![(r(0, 1), r(2, 1))]);

        let (c, _) = covering_cube(&[r(0, 1)], r(1, 1)).unwrap();
        assert_eq!(c.bounds(), vec![(r(0, 1), r(1, 1))]);

        let (c, g) = covering_cube(&[r(9, 10)], r(1, 5)).unwrap();
        assert_eq!(g.shift(), GridShift(1));
        assert!(c.side() <= r(6, 5));
        assert!(c.lower(0) <= r(9, 10) && r(11, 10) <= c.upper(0));
    }

    #[test]
    fn strict_ancestor() {
        let q = DyadicCube::standard(0, vec![0]);
        assert!(q.is_strict_ancestor_of(&DyadicCube::standard(-3, vec![7])));
        assert!(!q.is_strict_ancestor_of(&DyadicCube::standard(-3, vec![8])));
        assert!(!q.is_strict_ancestor_of(&q));
    }

    #[test]
    fn display_uses_exact_endpoints() {
        let c = third_grid().cube(0, &[0]).unwrap();
        assert_eq!(c.to_string(), "[1/3,4/3)");
    }
}
