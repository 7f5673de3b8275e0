//! Riesz-kernel weights between lattice cells and analytic exterior integrals.
//!
//! All weights are computed for unit cells and rescaled by homogeneity:
//! a pair of cells of side `h` carries `h^{N-s}` times the unit weight and a
//! point–cell integral carries `h^{-s}` times it.

mod cache;
pub mod quadrature;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Coord, Lattice};
use quadrature::{
    box_exterior_integral, canonical, far_pair_weight, far_point_weight, subdivided_point, PairQuadrature,
    PointQuadrature,
};

/// Quadrature parameters of the kernel `|x-y|^{-(N+s)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub s: f64,
    pub dim: usize,
    pub h: f64,
    /// Offsets with `|d|_∞` up to this many cells use the subdivided quadrature.
    pub near_field_radius: usize,
    pub subdivision_depth: usize,
    /// Radius (length units) out to which far-field cells are summed
    /// explicitly before the analytic tail takes over.
    pub far_radius: f64,
}

impl KernelParams {
    pub fn new(dim: usize, s: f64, h: f64, far_radius: f64) -> Result<Self> {
        let p = KernelParams { s, dim, h, near_field_radius: 3, subdivision_depth: 4, far_radius };
        p.validate()?;
        Ok(p)
    }

    /// Defaults for a window: far radius four window diameters.
    pub fn for_lattice(lattice: &Lattice, s: f64) -> Result<Self> {
        Self::new(lattice.dim(), s, lattice.h(), 4.0 * lattice.diameter())
    }

    pub fn with_near_field_radius(mut self, r: usize) -> Result<Self> {
        self.near_field_radius = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_subdivision_depth(mut self, depth: usize) -> Result<Self> {
        self.subdivision_depth = depth;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!("s = {} must lie in (0, 1)", self.s)));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidParameter(format!("dimension {} not in 1..=3", self.dim)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell size {}", self.h)));
        }
        if self.near_field_radius < 1 || self.subdivision_depth < 1 {
            return Err(Error::InvalidParameter("near_field_radius and subdivision_depth must be at least 1".into()));
        }
        if !(self.far_radius > 0.0 && self.far_radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("far radius {}", self.far_radius)));
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        self.dim as f64 + self.s
    }

    fn pair_scale(&self) -> f64 {
        self.h.powf(self.dim as f64 - self.s)
    }

    fn point_scale(&self) -> f64 {
        self.h.powf(-self.s)
    }
}

/// Volume of the unit ball, `π^{n/2} / Γ(n/2 + 1)`, for `n ∈ {-1, …, 3}`.
///
/// `ω_0 = 1` and `ω_{-1} = 1/π` follow from the Gamma-function formula.
pub fn omega(n: i32) -> f64 {
    use std::f64::consts::PI;
    match n {
        -1 => 1.0 / PI,
        0 => 1.0,
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("omega({n}) not tabulated"),
    }
}

/// `∫_{|y-x| ≥ ρ} |x-y|^{-(N+s)} dy = (N ω_N / s) ρ^{-s}`.
pub fn exterior_tail(params: &KernelParams, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {rho} must be positive")));
    }
    let n = params.dim as f64;
    Ok(n * omega(params.dim as i32) / params.s * rho.powf(-params.s))
}

fn sup_norm(d: &[i64]) -> i64 {
    d.iter().map(|v| v.abs()).max().unwrap_or(0)
}

fn pad(d: &[i64]) -> Coord {
    let mut c = [0i64; 3];
    for (ck, dk) in c.iter_mut().zip(d) {
        *ck = *dk;
    }
    c
}

type QuadKey = (usize, u64, usize);

fn shared_pairs() -> &'static Mutex<HashMap<QuadKey, PairQuadrature>> {
    static PAIRS: OnceLock<Mutex<HashMap<QuadKey, PairQuadrature>>> = OnceLock::new();
    PAIRS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Unit-cell weight for an offset in the near field, from a process-wide
/// memo keyed by `(N, s, depth)`.
fn unit_near_weight(params: &KernelParams, d: &Coord) -> f64 {
    let key = (params.dim, params.s.to_bits(), params.subdivision_depth);
    let mut pairs = shared_pairs().lock().unwrap_or_else(|e| e.into_inner());
    pairs.entry(key).or_insert_with(|| PairQuadrature::new(params.dim, params.s, params.subdivision_depth)).weight(d)
}

fn unit_weight(params: &KernelParams, d: &Coord) -> f64 {
    if sup_norm(d) as usize <= params.near_field_radius {
        unit_near_weight(params, d)
    } else {
        far_pair_weight(params.dim, params.s, d)
    }
}

/// `W(d) = ∫_{C_0} ∫_{C_d} |x-y|^{-(N+s)} dy dx` for cells of side `h`.
pub fn cell_weight(params: &KernelParams, d: &[i64]) -> Result<f64> {
    params.validate()?;
    if d.len() != params.dim {
        return Err(Error::InvalidParameter(format!("offset has {} components, expected {}", d.len(), params.dim)));
    }
    let d = pad(d);
    if sup_norm(&d) == 0 {
        return Err(Error::InvalidParameter("zero offset has no weight".into()));
    }
    Ok(params.pair_scale() * unit_weight(params, &d))
}

/// `∫_C |x-y|^{-(N+s)} dy` over the cell `h·(cell + [0,1]^N)`.
pub fn point_cell_weight(params: &KernelParams, x: &[f64], cell: &[i64]) -> Result<f64> {
    params.validate()?;
    let dim = params.dim;
    if x.len() != dim || cell.len() != dim {
        return Err(Error::InvalidParameter("point and cell must match the dimension".into()));
    }
    let mut c = [0.0; 3];
    for k in 0..dim {
        c[k] = cell[k] as f64 + 0.5 - x[k] / params.h;
    }
    let sup = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if sup <= 0.5 {
        return Err(Error::InvalidParameter("point lies in the closed cell".into()));
    }
    let unit = if sup > params.near_field_radius as f64 {
        far_point_weight(dim, params.s, &c)
    } else {
        subdivided_point(dim, params.s, params.subdivision_depth, &c, 1.0)
    };
    Ok(params.point_scale() * unit)
}

/// Self-perimeter of a lone unit cell: the sum of `W(d)` over every nonzero
/// offset, with far offsets summed out to `limit` and the remainder closed by
/// the exterior integral of the corrected midpoint density.
fn unit_cell_perimeter(params: &KernelParams, limit: i64) -> f64 {
    let dim = params.dim;
    let s = params.s;
    let p = params.exponent();
    let r = params.near_field_radius as i64;
    let mut total = 0.0;
    // Sorted nonnegative representatives with orbit multiplicities.
    let mut d = [0i64; 3];
    loop {
        if sup_norm(&d) > 0 {
            let w = if sup_norm(&d) <= r { unit_near_weight(params, &d) } else { far_pair_weight(dim, s, &d) };
            total += orbit_size(&d, dim) * w;
        }
        // Advance d over 0 ≤ d_0 ≤ … ≤ d_{dim-1} ≤ limit, last axis fastest.
        let mut k = dim;
        loop {
            if k == 0 {
                let a = limit as f64 + 0.5;
                let half = vec![a; dim];
                let tail = box_exterior_integral(&half, s)
                    + p * (p + 2.0 - dim as f64) / 24.0 * box_exterior_integral(&half, s + 2.0);
                return total + tail;
            }
            k -= 1;
            if d[k] < limit {
                d[k] += 1;
                for j in k + 1..dim {
                    d[j] = d[k];
                }
                break;
            }
        }
    }
}

fn orbit_size(d: &Coord, dim: usize) -> f64 {
    let nonzero = d[..dim].iter().filter(|&&v| v != 0).count();
    let mut perms = match dim {
        1 => 1.0,
        2 => 2.0,
        _ => 6.0,
    };
    // Divide by the factorials of the run lengths of equal entries.
    let mut i = 0;
    while i < dim {
        let mut j = i;
        while j < dim && d[j] == d[i] {
            j += 1;
        }
        for f in 2..=(j - i) {
            perms /= f as f64;
        }
        i = j;
    }
    perms * (1u64 << nonzero) as f64
}

/// `P_s` of a single isolated cell of side `h`.
pub fn cell_self_perimeter(params: &KernelParams) -> Result<f64> {
    params.validate()?;
    let limit = ((params.far_radius / params.h).ceil() as i64).max(params.near_field_radius as i64);
    Ok(params.pair_scale() * unit_cell_perimeter(params, limit))
}

/// Precomputed weights for one lattice window.
#[derive(Debug)]
pub struct KernelTable {
    params: KernelParams,
    lattice: Lattice,
    near: BTreeMap<Coord, f64>,
    /// `W(d)` for every offset realised inside the window, `d_k ∈ (-e_k, e_k)`.
    dense: Vec<f64>,
    dense_strides: [usize; 3],
    cell_perimeter: f64,
    row_sums: Vec<f64>,
    points: OnceLock<PointTable>,
}

#[derive(Debug)]
struct PointTable {
    /// `∫_C |x-y|^{-(N+s)} dy` for cell centers at half-cell offsets `c2/2`.
    values: Vec<f64>,
    strides: [usize; 3],
    reach: [i64; 3],
    /// Exterior integral of a two-cell box centred at a face midpoint.
    face_box: f64,
}

impl KernelTable {
    pub fn new(params: KernelParams, lattice: &Lattice) -> Result<Self> {
        Self::build(params, lattice, None)
    }

    /// Builds the table, reading near-field weights from `dir` when a cache
    /// file for the same key exists and writing one otherwise.
    pub fn with_cache(params: KernelParams, lattice: &Lattice, dir: &Path) -> Result<Self> {
        Self::build(params, lattice, Some(dir))
    }

    fn build(params: KernelParams, lattice: &Lattice, cache_dir: Option<&Path>) -> Result<Self> {
        params.validate()?;
        if params.dim != lattice.dim() || (params.h - lattice.h()).abs() > 1e-12 * lattice.h() {
            return Err(Error::LatticeMismatch);
        }
        if params.far_radius <= lattice.diameter() {
            return Err(Error::InvalidParameter(format!(
                "far radius {} must exceed the window diameter {}",
                params.far_radius,
                lattice.diameter()
            )));
        }
        let dim = params.dim;
        let r = params.near_field_radius as i64;

        let cached = match cache_dir {
            Some(dir) => cache::load(dir, &params)?,
            None => None,
        };
        let near = match cached {
            Some(near) => near,
            None => {
                let mut near = BTreeMap::new();
                let scale = params.pair_scale();
                for_each_offset(dim, r, |d| {
                    if sup_norm(&d) > 0 {
                        near.insert(d, scale * unit_near_weight(&params, &d));
                    }
                });
                if let Some(dir) = cache_dir {
                    cache::store(dir, &params, &near)?;
                }
                near
            }
        };

        let ext = lattice.extents3();
        let span = [2 * ext[0] - 1, 2 * ext[1] - 1, 2 * ext[2] - 1];
        let dense_strides = [span[1] * span[2], span[2], 1];
        let total = span[0] * span[1] * span[2];
        let scale = params.pair_scale();
        let dense: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let d = [
                    (idx / dense_strides[0]) as i64 - (ext[0] as i64 - 1),
                    (idx / dense_strides[1] % span[1]) as i64 - (ext[1] as i64 - 1),
                    (idx % span[2]) as i64 - (ext[2] as i64 - 1),
                ];
                if sup_norm(&d) == 0 {
                    0.0
                } else if sup_norm(&d) <= r {
                    near[&d]
                } else {
                    scale * far_pair_weight(dim, params.s, &d)
                }
            })
            .collect();

        let cell_perimeter = cell_self_perimeter(&params)?;
        let mut table = KernelTable {
            params,
            lattice: lattice.clone(),
            near,
            dense,
            dense_strides,
            cell_perimeter,
            row_sums: Vec::new(),
            points: OnceLock::new(),
        };
        let coords: Vec<Coord> = (0..lattice.len()).map(|i| lattice.coord(i)).collect();
        table.row_sums =
            coords.par_iter().map(|ci| coords.iter().map(|cj| table.weight_between(ci, cj)).sum()).collect();
        Ok(table)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Near-field weights keyed by offset.
    pub fn near_weights(&self) -> &BTreeMap<Coord, f64> {
        &self.near
    }

    /// `W(d)` for an offset realised inside the window; zero for `d = 0`.
    #[inline]
    pub fn weight(&self, d: &Coord) -> f64 {
        let ext = self.lattice.extents3();
        let mut idx = 0;
        for k in 0..3 {
            idx += (d[k] + ext[k] as i64 - 1) as usize * self.dense_strides[k];
        }
        self.dense[idx]
    }

    #[inline]
    pub fn weight_between(&self, a: &Coord, b: &Coord) -> f64 {
        self.weight(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }

    /// `P_s` of one isolated cell.
    pub fn cell_perimeter(&self) -> f64 {
        self.cell_perimeter
    }

    /// `Σ_{j ∈ window, j ≠ i} W(i-j)`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }

    /// Interaction of cell `i` with everything outside the window.
    pub fn exterior_part(&self, i: usize) -> f64 {
        self.cell_perimeter - self.row_sums[i]
    }

    fn point_table(&self) -> &PointTable {
        self.points.get_or_init(|| {
            let dim = self.params.dim;
            let ext = self.lattice.extents3();
            let mut reach = [0i64; 3];
            for k in 0..dim {
                reach[k] = 2 * ext[k] as i64 - 1;
            }
            let span = [2 * reach[0] as usize + 1, 2 * reach[1] as usize + 1, 2 * reach[2] as usize + 1];
            let strides = [span[1] * span[2], span[2], 1];
            let mut quad =
                PointQuadrature::new(dim, self.params.s, self.params.subdivision_depth, self.params.near_field_radius);
            let scale = self.params.point_scale();
            let mut values = vec![f64::NAN; span[0] * span[1] * span[2]];
            for (idx, v) in values.iter_mut().enumerate() {
                let c2 = [
                    (idx / strides[0]) as i64 - reach[0],
                    (idx / strides[1] % span[1]) as i64 - reach[1],
                    (idx % span[2]) as i64 - reach[2],
                ];
                if let Some(w) = quad.weight(&c2) {
                    *v = scale * w;
                }
            }
            let mut half = vec![0.5; dim];
            half[0] = 1.0;
            let face_box = scale * box_exterior_integral(&half, self.params.s);
            PointTable { values, strides, reach, face_box }
        })
    }

    /// `∫_C |x-y|^{-(N+s)} dy` for a cell whose center sits `c2/2` cells
    /// away from the point; `c2` ranges over `|c2_k| < 2 e_k`. NaN when the
    /// point lies in the closed cell.
    pub fn point_weight_half(&self, c2: &Coord) -> f64 {
        let t = self.point_table();
        let mut idx = 0;
        for k in 0..3 {
            idx += (c2[k] + t.reach[k]) as usize * t.strides[k];
        }
        t.values[idx]
    }

    /// Exterior integral of the box made of two face-adjacent cells, seen
    /// from the midpoint of their common face.
    pub fn face_box_exterior(&self) -> f64 {
        self.point_table().face_box
    }
}

/// Calls `f` for every offset with `|d_k| ≤ r` on the active axes, in
/// lexicographic order.
fn for_each_offset<F: FnMut(Coord)>(dim: usize, r: i64, mut f: F) {
    let mut d = [0i64; 3];
    for k in 0..dim {
        d[k] = -r;
    }
    loop {
        f(d);
        let mut k = dim;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if d[k] < r {
                d[k] += 1;
                for j in k + 1..dim {
                    d[j] = -r;
                }
                break;
            }
        }
    }
}

/// Canonical representative of an offset under sign flips and permutations.
pub fn canonical_offset(d: &Coord, dim: usize) -> Coord {
    canonical(d, dim)
}
