//! Lattice windows, cell sets and the discrete geometry built on them.
//!
//! Cells are addressed either by integer coordinates ([`Coord`], unused axes
//! are zero) or by a flat row-major index. Flat order coincides with the
//! lexicographic order of coordinates, which is the tie-breaking order used
//! throughout the crate.

mod geometry;
mod io;

pub use geometry::{
    ball_of_cells, best_translate_asymmetry, rasterize_ball, symdiff_volume, tail_mass_profile, volume, Asymmetry,
};
pub use io::GridSetRecord;

use crate::error::{Error, Result};

/// Integer cell coordinates; axes beyond the lattice dimension are zero.
pub type Coord = [i64; 3];

/// The computational window: an axis-aligned block of cubic cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    h: f64,
    extents: [usize; 3],
    origin: [f64; 3],
    strides: [usize; 3],
}

impl Lattice {
    pub fn new(dim: usize, h: f64, extents: &[usize], origin: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size {h} must be positive")));
        }
        if extents.len() != dim || origin.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "expected {dim} extents and origin components, got {} and {}",
                extents.len(),
                origin.len()
            )));
        }
        if extents.contains(&0) {
            return Err(Error::InvalidParameter("extents must be at least 1".into()));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        let mut ext = [1usize; 3];
        let mut org = [0.0; 3];
        ext[..dim].copy_from_slice(extents);
        org[..dim].copy_from_slice(origin);
        let strides = [ext[1] * ext[2], ext[2], 1];
        Ok(Lattice { dim, h, extents: ext, origin: org, strides })
    }

    /// A cube of `n` cells per axis whose low corner sits at `origin` on every axis.
    pub fn cube(dim: usize, h: f64, n: usize, origin: f64) -> Result<Self> {
        Lattice::new(dim, h, &vec![n; dim], &vec![origin; dim])
    }

    /// A cube of `n` cells per axis centered on the origin of space.
    pub fn centered(dim: usize, h: f64, n: usize) -> Result<Self> {
        Lattice::cube(dim, h, n, -(n as f64) * h / 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }

    pub(crate) fn extents3(&self) -> [usize; 3] {
        self.extents
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin[..self.dim]
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn window_volume(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Euclidean length of the window diagonal.
    pub fn diameter(&self) -> f64 {
        self.extents().iter().map(|&e| (e as f64 * self.h).powi(2)).sum::<f64>().sqrt()
    }

    pub fn contains(&self, c: &Coord) -> bool {
        (0..3).all(|k| c[k] >= 0 && (c[k] as usize) < self.extents[k])
    }

    pub fn flat(&self, c: &Coord) -> Option<usize> {
        if self.contains(c) {
            Some((0..3).map(|k| c[k] as usize * self.strides[k]).sum())
        } else {
            None
        }
    }

    pub fn coord(&self, flat: usize) -> Coord {
        let mut c = [0i64; 3];
        let mut rem = flat;
        for k in 0..3 {
            c[k] = (rem / self.strides[k]) as i64;
            rem %= self.strides[k];
        }
        c
    }

    /// Physical center `origin + (c + 1/2) h` of a cell.
    pub fn center(&self, c: &Coord) -> [f64; 3] {
        let mut x = [0.0; 3];
        for k in 0..self.dim {
            x[k] = self.origin[k] + (c[k] as f64 + 0.5) * self.h;
        }
        x
    }

    pub fn center_of(&self, flat: usize) -> [f64; 3] {
        self.center(&self.coord(flat))
    }

    /// The cell whose closed box contains `x`, if it lies in the window.
    pub fn locate(&self, x: &[f64]) -> Option<Coord> {
        let mut c = [0i64; 3];
        for k in 0..self.dim {
            c[k] = ((x[k] - self.origin[k]) / self.h).floor() as i64;
        }
        self.contains(&c).then_some(c)
    }

    /// Face neighbours of a cell; `None` marks a neighbour outside the window.
    pub fn face_neighbors(&self, flat: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let c = self.coord(flat);
        (0..self.dim).flat_map(move |k| {
            [-1i64, 1].into_iter().map(move |step| {
                let mut n = c;
                n[k] += step;
                self.flat(&n)
            })
        })
    }

    /// Number of cells per unit length when `1/h` is a positive integer.
    pub fn cells_per_unit(&self) -> Option<i64> {
        let n = (1.0 / self.h).round();
        (n >= 1.0 && (n * self.h - 1.0).abs() <= 1e-12).then_some(n as i64)
    }

    /// Origin expressed in whole cells, when it sits on the `h`-grid.
    pub fn origin_in_cells(&self) -> Option<[i64; 3]> {
        let mut out = [0i64; 3];
        for k in 0..self.dim {
            let q = self.origin[k] / self.h;
            let r = q.round();
            if (q - r).abs() > 1e-9 {
                return None;
            }
            out[k] = r as i64;
        }
        Some(out)
    }

    /// Same geometry with a different cell size, origin scaled accordingly.
    pub fn dilated(&self, lambda: f64) -> Result<Lattice> {
        let origin: Vec<f64> = self.origin().iter().map(|o| o * lambda).collect();
        Lattice::new(self.dim, self.h * lambda, self.extents(), &origin)
    }
}

/// A finite set of lattice cells representing a discretized set `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet {
    lattice: Lattice,
    bits: Vec<bool>,
    count: usize,
}

impl GridSet {
    pub fn empty(lattice: &Lattice) -> Self {
        GridSet { lattice: lattice.clone(), bits: vec![false; lattice.len()], count: 0 }
    }

    pub fn full(lattice: &Lattice) -> Self {
        GridSet { lattice: lattice.clone(), bits: vec![true; lattice.len()], count: lattice.len() }
    }

    pub fn from_flat<I: IntoIterator<Item = usize>>(lattice: &Lattice, cells: I) -> Result<Self> {
        let mut set = GridSet::empty(lattice);
        for i in cells {
            if i >= lattice.len() {
                return Err(Error::InvalidParameter(format!("flat index {i} outside window")));
            }
            set.insert(i);
        }
        Ok(set)
    }

    pub fn from_cells<I: IntoIterator<Item = Coord>>(lattice: &Lattice, cells: I) -> Result<Self> {
        let mut set = GridSet::empty(lattice);
        for c in cells {
            let i = lattice.flat(&c).ok_or(Error::OutOfWindow(c))?;
            set.insert(i);
        }
        Ok(set)
    }

    /// Cells whose center satisfies `pred`.
    pub fn from_predicate<F: Fn(&[f64; 3]) -> bool>(lattice: &Lattice, pred: F) -> Self {
        let bits: Vec<bool> = (0..lattice.len()).map(|i| pred(&lattice.center_of(i))).collect();
        let count = bits.iter().filter(|&&b| b).count();
        GridSet { lattice: lattice.clone(), bits, count }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Number of member cells.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.bits.len()
    }

    /// `|E| = count * h^N`.
    pub fn volume(&self) -> f64 {
        self.count as f64 * self.lattice.cell_volume()
    }

    pub fn contains_flat(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn contains(&self, c: &Coord) -> bool {
        self.lattice.flat(c).is_some_and(|i| self.bits[i])
    }

    pub(crate) fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Returns true when the cell was not already a member.
    pub fn insert(&mut self, i: usize) -> bool {
        let fresh = !self.bits[i];
        if fresh {
            self.bits[i] = true;
            self.count += 1;
        }
        fresh
    }

    /// Returns true when the cell was a member.
    pub fn remove(&mut self, i: usize) -> bool {
        let was = self.bits[i];
        if was {
            self.bits[i] = false;
            self.count -= 1;
        }
        was
    }

    /// Toggles membership; returns the new state.
    pub fn toggle(&mut self, i: usize) -> bool {
        if self.bits[i] {
            self.remove(i);
            false
        } else {
            self.insert(i);
            true
        }
    }

    /// Member flat indices in ascending (lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn members(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn cells(&self) -> Vec<Coord> {
        self.iter().map(|i| self.lattice.coord(i)).collect()
    }

    pub fn check_same_lattice(&self, other: &GridSet) -> Result<()> {
        if self.lattice == other.lattice {
            Ok(())
        } else {
            Err(Error::LatticeMismatch)
        }
    }

    fn combine(&self, other: &GridSet, op: impl Fn(bool, bool) -> bool) -> Result<GridSet> {
        self.check_same_lattice(other)?;
        let bits: Vec<bool> = self.bits.iter().zip(&other.bits).map(|(&a, &b)| op(a, b)).collect();
        let count = bits.iter().filter(|&&b| b).count();
        Ok(GridSet { lattice: self.lattice.clone(), bits, count })
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &GridSet) -> Result<GridSet> {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &GridSet) -> Result<GridSet> {
        self.combine(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &GridSet) -> Result<GridSet> {
        self.combine(other, |a, b| a != b)
    }

    pub fn is_disjoint(&self, other: &GridSet) -> Result<bool> {
        self.check_same_lattice(other)?;
        Ok(!self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b))
    }

    /// Complement within the window.
    pub fn complement(&self) -> GridSet {
        let bits: Vec<bool> = self.bits.iter().map(|&b| !b).collect();
        GridSet { lattice: self.lattice.clone(), count: bits.len() - self.count, bits }
    }

    /// Translate by an integer shift; fails if any member would leave the window.
    pub fn translate(&self, shift: &Coord) -> Result<GridSet> {
        let mut out = GridSet::empty(&self.lattice);
        for c in self.cells() {
            let moved = [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]];
            let i = self.lattice.flat(&moved).ok_or(Error::OutOfWindow(moved))?;
            out.insert(i);
        }
        Ok(out)
    }

    /// Same member cells on another lattice of identical extents.
    pub fn relabel(&self, lattice: &Lattice) -> Result<GridSet> {
        if lattice.extents3() != self.lattice.extents3() || lattice.dim() != self.lattice.dim() {
            return Err(Error::LatticeMismatch);
        }
        Ok(GridSet { lattice: lattice.clone(), bits: self.bits.clone(), count: self.count })
    }

    /// A member with at least one face neighbour outside the set (cells beyond
    /// the window count as outside).
    pub fn is_boundary(&self, i: usize) -> bool {
        self.bits[i] && self.lattice.face_neighbors(i).any(|n| n.is_none_or(|j| !self.bits[j]))
    }

    pub fn boundary_cells(&self) -> Vec<usize> {
        self.iter().filter(|&i| self.is_boundary(i)).collect()
    }

    /// Non-members of the window with at least one member face neighbour.
    pub fn outer_frontier(&self) -> Vec<usize> {
        (0..self.bits.len())
            .filter(|&i| !self.bits[i] && self.lattice.face_neighbors(i).any(|n| n.is_some_and(|j| self.bits[j])))
            .collect()
    }

    pub fn centroid(&self) -> Option<[f64; 3]> {
        if self.is_empty() {
            return None;
        }
        let mut acc = [0.0; 3];
        for i in self.iter() {
            let x = self.lattice.center_of(i);
            for k in 0..3 {
                acc[k] += x[k];
            }
        }
        Some(acc.map(|a| a / self.count as f64))
    }
}

/// A Euclidean ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        if center.len() > 3 {
            return Err(Error::InvalidParameter("ball center has more than 3 components".into()));
        }
        let mut c = [0.0; 3];
        c[..center.len()].copy_from_slice(center);
        Ok(Ball { center: c, radius })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_order_is_lexicographic() {
        let l = Lattice::new(3, 1.0, &[2, 3, 4], &[0.0, 0.0, 0.0]).unwrap();
        let mut prev: Option<Coord> = None;
        for i in 0..l.len() {
            let c = l.coord(i);
            assert_eq!(l.flat(&c), Some(i));
            if let Some(p) = prev {
                assert!(p < c);
            }
            prev = Some(c);
        }
    }

    #[test]
    fn cell_center_convention() {
        let l = Lattice::new(2, 0.5, &[4, 4], &[-1.0, 2.0]).unwrap();
        assert_eq!(l.center(&[0, 3, 0]), [-0.75, 3.75, 0.0]);
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(Lattice::new(0, 1.0, &[], &[]).is_err());
        assert!(Lattice::new(2, 0.0, &[2, 2], &[0.0, 0.0]).is_err());
        assert!(Lattice::new(2, 1.0, &[2, 0], &[0.0, 0.0]).is_err());
        assert!(Lattice::new(2, 1.0, &[2], &[0.0, 0.0]).is_err());
        assert!(Ball::new(&[0.0], 0.0).is_err());
    }

    #[test]
    fn boundary_and_frontier() {
        let l = Lattice::cube(2, 1.0, 5, 0.0).unwrap();
        let block = GridSet::from_cells(&l, [[1, 1, 0], [1, 2, 0], [2, 1, 0], [2, 2, 0]]).unwrap();
        assert_eq!(block.boundary_cells().len(), 4);
        assert_eq!(block.outer_frontier().len(), 8);
        let full = GridSet::full(&l);
        // Cells on the window edge touch the outside.
        assert_eq!(full.boundary_cells().len(), 16);
        assert!(full.outer_frontier().is_empty());
    }

    #[test]
    fn translation_leaving_window_fails() {
        let l = Lattice::cube(2, 1.0, 4, 0.0).unwrap();
        let s = GridSet::from_cells(&l, [[0, 0, 0]]).unwrap();
        assert!(s.translate(&[-1, 0, 0]).is_err());
        let t = s.translate(&[3, 3, 0]).unwrap();
        assert!(t.contains(&[3, 3, 0]));
    }

    #[test]
    fn cells_per_unit_detection() {
        let l = Lattice::cube(2, 1.0 / 16.0, 32, -1.0).unwrap();
        assert_eq!(l.cells_per_unit(), Some(16));
        assert_eq!(l.origin_in_cells(), Some([-16, -16, 0]));
        let l = Lattice::cube(2, 0.3, 4, 0.0).unwrap();
        assert_eq!(l.cells_per_unit(), None);
    }
}
