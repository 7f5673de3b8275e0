//! Nonlocal mean curvature on the boundary of a cell set.
//!
//! `H_s(x) = c_N · PV ∫ (χ_{E^c}(y) - χ_E(y)) |x-y|^{-(N+s)} dy`, positive on
//! convex sets. A boundary cell is evaluated at the midpoints of its exterior
//! faces and the values are averaged. Around a face midpoint the principal
//! value excludes the two-cell box formed by the cell and its outside
//! neighbour, which is symmetric about the point and carries opposite signs
//! on its halves. Face values are then averaged over a small patch of the
//! boundary around each cell.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{omega, KernelTable};
use crate::lattice::{Coord, GridSet};
use crate::perimeter::check_table;
use crate::potential::Potential;

const SPREAD_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide the integral by `ω_{N-2}`.
    #[default]
    Paper,
    Raw,
}

impl Normalization {
    pub fn factor(self, dim: usize) -> f64 {
        match self {
            Normalization::Paper => 1.0 / omega(dim as i32 - 2),
            Normalization::Raw => 1.0,
        }
    }
}

/// Curvature at one boundary cell, split by where `y` lives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureParts {
    pub total: f64,
    /// Signed contribution of window cells.
    pub interior: f64,
    /// Contribution of everything outside the window (all of it in `E^c`).
    pub exterior: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub cell: Coord,
    pub x: [f64; 3],
    pub hs: f64,
    pub g_at_x: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub mean: f64,
    /// Population standard deviation relative to `|mean|`.
    pub spread: f64,
}

/// Raw curvature parts at the midpoint of one exterior face of cell `cell`.
fn face_parts(set: &GridSet, cell: &Coord, k: usize, sigma: i64, table: &KernelTable) -> (f64, f64) {
    let lattice = set.lattice();
    let mut window = 0.0;
    let mut inside = 0.0;
    for j in 0..lattice.len() {
        let cj = lattice.coord(j);
        let mut c2 = [0i64; 3];
        for l in 0..3 {
            c2[l] = 2 * (cj[l] - cell[l]);
        }
        c2[k] -= sigma;
        if c2.iter().all(|v| v.abs() <= 1) {
            continue;
        }
        let w = table.point_weight_half(&c2);
        window += w;
        if set.contains_flat(j) {
            inside += w;
        }
    }
    (window - 2.0 * inside, table.face_box_exterior() - window)
}

/// Raw curvature at every exterior face midpoint of the boundary:
/// `(cell, axis, sign, interior, exterior)` in lexicographic cell order.
pub fn face_values(set: &GridSet, table: &KernelTable) -> Result<Vec<(Coord, usize, i64, f64, f64)>> {
    check_table(set, table)?;
    let lattice = set.lattice();
    let faces: Vec<(Coord, usize, i64)> = set
        .boundary_cells()
        .into_iter()
        .flat_map(|i| {
            let c = lattice.coord(i);
            exterior_faces(set, &c).into_iter().map(move |(k, sg)| (c, k, sg))
        })
        .collect();
    Ok(faces
        .par_iter()
        .map(|&(c, k, sg)| {
            let (a, b) = face_parts(set, &c, k, sg, table);
            (c, k, sg, a, b)
        })
        .collect())
}

fn exterior_faces(set: &GridSet, c: &Coord) -> Vec<(usize, i64)> {
    let lattice = set.lattice();
    let mut faces = Vec::new();
    for k in 0..lattice.dim() {
        for sigma in [-1i64, 1] {
            let mut n = *c;
            n[k] += sigma;
            if !lattice.flat(&n).is_some_and(|j| set.contains_flat(j)) {
                faces.push((k, sigma));
            }
        }
    }
    faces
}

/// Evaluation options.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureOptions {
    pub normalization: Normalization,
    /// Face midpoints within this many cells of a boundary cell's center are
    /// averaged into its value. Individual faces of a pixelated interface
    /// carry `O(h^{-s})` staircase noise that cancels over a few cells.
    pub smoothing_cells: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions { normalization: Normalization::Paper, smoothing_cells: 4.0 }
    }
}

impl CurvatureOptions {
    fn reach(&self) -> f64 {
        self.smoothing_cells.max(0.75)
    }
}

fn face_offset(c: &Coord, k: usize, sigma: i64, center: &Coord) -> f64 {
    let mut d2 = 0.0;
    for l in 0..3 {
        let mut d = (c[l] - center[l]) as f64;
        if l == k {
            d += 0.5 * sigma as f64;
        }
        d2 += d * d;
    }
    d2.sqrt()
}

/// All boundary faces `(cell, axis, sign)` whose midpoints lie within the
/// smoothing reach of `center`.
fn patch_faces(set: &GridSet, center: &Coord, reach: f64) -> Vec<(Coord, usize, i64)> {
    let lattice = set.lattice();
    let r = reach.ceil() as i64 + 1;
    let mut out = Vec::new();
    for i in set.boundary_cells() {
        let c = lattice.coord(i);
        if (0..3).any(|l| (c[l] - center[l]).abs() > r) {
            continue;
        }
        for (k, sg) in exterior_faces(set, &c) {
            if face_offset(&c, k, sg, center) <= reach {
                out.push((c, k, sg));
            }
        }
    }
    out
}

fn check_boundary(set: &GridSet, cell: &Coord) -> Result<()> {
    let a = set.lattice().flat(cell).ok_or(Error::OutOfWindow(*cell))?;
    if !set.contains_flat(a) {
        return Err(Error::InvalidParameter(format!("cell {cell:?} is not in the set")));
    }
    if !set.is_boundary(a) {
        return Err(Error::NotBoundary(*cell));
    }
    Ok(())
}

fn average(parts: &[(f64, f64)], factor: f64) -> CurvatureParts {
    let n = parts.len() as f64;
    let interior = factor * parts.iter().map(|p| p.0).sum::<f64>() / n;
    let exterior = factor * parts.iter().map(|p| p.1).sum::<f64>() / n;
    CurvatureParts { total: interior + exterior, interior, exterior }
}

pub fn hs_parts(set: &GridSet, cell: &Coord, table: &KernelTable, opts: &CurvatureOptions) -> Result<CurvatureParts> {
    check_table(set, table)?;
    check_boundary(set, cell)?;
    let parts: Vec<(f64, f64)> =
        patch_faces(set, cell, opts.reach()).into_iter().map(|(c, k, sg)| face_parts(set, &c, k, sg, table)).collect();
    Ok(average(&parts, opts.normalization.factor(set.lattice().dim())))
}

pub fn hs_at_with(set: &GridSet, cell: &Coord, table: &KernelTable, opts: &CurvatureOptions) -> Result<f64> {
    Ok(hs_parts(set, cell, table, opts)?.total)
}

pub fn hs_at(set: &GridSet, cell: &Coord, table: &KernelTable) -> Result<f64> {
    hs_at_with(set, cell, table, &CurvatureOptions::default())
}

/// One sample per boundary cell, in lexicographic order of cells.
pub fn boundary_profile_with(
    set: &GridSet,
    g: &Potential,
    table: &KernelTable,
    opts: &CurvatureOptions,
) -> Result<Vec<CurvatureSample>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if set.is_full() {
        return Err(Error::FullSet);
    }
    check_table(set, table)?;
    let lattice = set.lattice();
    let values = g.cell_values(lattice)?;
    let faces = face_values(set, table)?;
    let factor = opts.normalization.factor(lattice.dim());
    let reach = opts.reach();
    Ok(set
        .boundary_cells()
        .par_iter()
        .map(|&i| {
            let cell = lattice.coord(i);
            let parts: Vec<(f64, f64)> =
                faces.iter().filter(|f| face_offset(&f.0, f.1, f.2, &cell) <= reach).map(|f| (f.3, f.4)).collect();
            let hs = average(&parts, factor).total;
            CurvatureSample { cell, x: lattice.center(&cell), hs, g_at_x: values[i], residual: hs - values[i] }
        })
        .collect())
}

pub fn boundary_profile(set: &GridSet, g: &Potential, table: &KernelTable) -> Result<Vec<CurvatureSample>> {
    boundary_profile_with(set, g, table, &CurvatureOptions::default())
}

pub fn mu_estimate(profile: &[CurvatureSample]) -> Result<MuEstimate> {
    if profile.is_empty() {
        return Err(Error::InvalidParameter("empty curvature profile".into()));
    }
    let n = profile.len() as f64;
    let mean = profile.iter().map(|p| p.residual).sum::<f64>() / n;
    let var = profile.iter().map(|p| (p.residual - mean).powi(2)).sum::<f64>() / n;
    Ok(MuEstimate { mean, spread: var.sqrt() / mean.abs().max(SPREAD_FLOOR) })
}
