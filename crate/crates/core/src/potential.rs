//! Scalar potentials `g`: constant, ℤ^N-periodic, coercive and sampled.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSet, Lattice};

/// One product term `A Π_k cos(2π f_k x_k + φ_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicTerm {
    pub amplitude: f64,
    pub frequencies: Vec<i64>,
    #[serde(default)]
    pub phases: Vec<f64>,
}

/// Values on the nodes `origin + k·spacing`, `0 ≤ k_i < extents_i`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledGrid {
    pub dim: usize,
    pub spacing: f64,
    pub extents: Vec<usize>,
    pub origin: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Constant {
        value: f64,
    },
    Periodic {
        terms: Vec<PeriodicTerm>,
    },
    /// `-a |x - center|² + b`.
    Coercive {
        a: f64,
        center: Vec<f64>,
        b: f64,
    },
    Sampled(SampledGrid),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    dim: usize,
    kind: PotentialKind,
}

/// Range and slope of a potential over the cells of a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub sup: f64,
    pub inf: f64,
    /// Largest difference quotient between face-adjacent cell centers.
    pub lipschitz: f64,
}

impl WindowStats {
    pub fn sup_abs(&self) -> f64 {
        self.sup.abs().max(self.inf.abs())
    }
}

impl Potential {
    pub fn new(dim: usize, kind: PotentialKind) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        match &kind {
            PotentialKind::Constant { value } if !value.is_finite() => {
                return Err(Error::InvalidParameter("constant must be finite".into()))
            }
            PotentialKind::Periodic { terms } => {
                for t in terms {
                    if t.frequencies.len() != dim || !(t.phases.is_empty() || t.phases.len() == dim) {
                        return Err(Error::InvalidParameter(
                            "periodic term needs one frequency (and phase) per axis".into(),
                        ));
                    }
                }
            }
            PotentialKind::Coercive { a, center, .. } => {
                if center.len() != dim || !(*a > 0.0) {
                    return Err(Error::InvalidParameter("coercive potential needs a > 0 and a center per axis".into()));
                }
            }
            PotentialKind::Sampled(grid) => {
                let count: usize = grid.extents.iter().product();
                if grid.dim != dim
                    || grid.extents.len() != dim
                    || grid.origin.len() != dim
                    || grid.extents.iter().any(|&e| e < 2)
                    || !(grid.spacing > 0.0)
                    || grid.values.len() != count
                {
                    return Err(Error::InvalidParameter("inconsistent sampled grid".into()));
                }
            }
            _ => {}
        }
        Ok(Potential { dim, kind })
    }

    pub fn constant(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, PotentialKind::Constant { value })
    }

    pub fn periodic(dim: usize, terms: Vec<PeriodicTerm>) -> Result<Self> {
        Self::new(dim, PotentialKind::Periodic { terms })
    }

    pub fn coercive(dim: usize, a: f64, center: &[f64], b: f64) -> Result<Self> {
        Self::new(dim, PotentialKind::Coercive { a, center: center.to_vec(), b })
    }

    pub fn sampled(grid: SampledGrid) -> Result<Self> {
        Self::new(grid.dim, PotentialKind::Sampled(grid))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, PotentialKind::Periodic { .. })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.dim {
            return Err(Error::InvalidParameter("point has too few coordinates".into()));
        }
        let x = &x[..self.dim];
        Ok(match &self.kind {
            PotentialKind::Constant { value } => *value,
            PotentialKind::Periodic { terms } => {
                let mut t = [0.0; 3];
                for k in 0..self.dim {
                    t[k] = x[k].rem_euclid(1.0);
                }
                periodic_value(terms, &t[..self.dim])
            }
            PotentialKind::Coercive { a, center, b } => {
                let r2: f64 = x.iter().zip(center).map(|(p, c)| (p - c) * (p - c)).sum();
                b - a * r2
            }
            PotentialKind::Sampled(grid) => sampled_value(grid, x)?,
        })
    }

    /// `g(x / λ)`.
    pub fn rescaled_eval(&self, x: &[f64], lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
        }
        let y: Vec<f64> = x.iter().map(|v| v / lambda).collect();
        self.eval(&y)
    }

    /// `g` at every cell center of the window, in flat order. Periodic
    /// potentials on lattices with integer `1/h` and an on-grid origin are
    /// reduced modulo the period in integer arithmetic, so translating a
    /// cell by a whole period reproduces its value bit for bit.
    pub fn cell_values(&self, lattice: &Lattice) -> Result<Vec<f64>> {
        self.check_lattice(lattice)?;
        if let PotentialKind::Periodic { terms } = &self.kind {
            if let (Some(n), Some(o)) = (lattice.cells_per_unit(), lattice.origin_in_cells()) {
                return Ok((0..lattice.len())
                    .map(|i| {
                        let c = lattice.coord(i);
                        let mut t = [0.0; 3];
                        for k in 0..self.dim {
                            t[k] = ((o[k] + c[k]).rem_euclid(n) as f64 + 0.5) / n as f64;
                        }
                        periodic_value(terms, &t[..self.dim])
                    })
                    .collect());
            }
        }
        (0..lattice.len()).map(|i| self.eval(&lattice.center_of(i))).collect()
    }

    /// `g(x_i / λ)` at every cell center.
    pub fn rescaled_cell_values(&self, lattice: &Lattice, lambda: f64) -> Result<Vec<f64>> {
        self.check_lattice(lattice)?;
        (0..lattice.len()).map(|i| self.rescaled_eval(&lattice.center_of(i), lambda)).collect()
    }

    /// Midpoint rule `Σ_{i∈E} g(x_i) h^N`.
    pub fn integral_over(&self, set: &GridSet) -> Result<f64> {
        let lattice = set.lattice();
        self.check_lattice(lattice)?;
        let vol = lattice.cell_volume();
        if let PotentialKind::Periodic { .. } = self.kind {
            let values = self.cell_values(lattice)?;
            return Ok(set.iter().map(|i| values[i] * vol).sum());
        }
        let mut total = 0.0;
        for i in set.iter() {
            total += self.eval(&lattice.center_of(i))? * vol;
        }
        Ok(total)
    }

    pub fn window_stats(&self, lattice: &Lattice) -> Result<WindowStats> {
        self.check_lattice(lattice)?;
        let values = self.cell_values(lattice)?;
        let mut lipschitz: f64 = 0.0;
        for i in 0..lattice.len() {
            for j in lattice.face_neighbors(i).flatten() {
                lipschitz = lipschitz.max((values[i] - values[j]).abs() / lattice.h());
            }
        }
        let (inf, sup) = match &self.kind {
            PotentialKind::Constant { value } => (*value, *value),
            PotentialKind::Periodic { terms } => {
                let bound: f64 = terms.iter().map(|t| t.amplitude.abs()).sum();
                (-bound, bound)
            }
            PotentialKind::Coercive { a, center, b } => {
                let mut near = 0.0;
                let mut far = 0.0;
                for k in 0..self.dim {
                    let lo = lattice.origin()[k];
                    let hi = lo + lattice.extents()[k] as f64 * lattice.h();
                    let c = center[k];
                    let gap = (lo - c).max(c - hi).max(0.0);
                    let reach = (c - lo).abs().max((hi - c).abs());
                    near += gap * gap;
                    far += reach * reach;
                }
                (b - a * far, b - a * near)
            }
            PotentialKind::Sampled(grid) => {
                let lo = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = grid.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        Ok(WindowStats { sup, inf, lipschitz })
    }

    fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if lattice.dim() != self.dim {
            return Err(Error::InvalidParameter(format!(
                "potential of dimension {} on a {}-dimensional lattice",
                self.dim,
                lattice.dim()
            )));
        }
        Ok(())
    }
}

fn periodic_value(terms: &[PeriodicTerm], t: &[f64]) -> f64 {
    use std::f64::consts::TAU;
    terms
        .iter()
        .map(|term| {
            let mut v = term.amplitude;
            for (k, tk) in t.iter().enumerate() {
                let phase = term.phases.get(k).copied().unwrap_or(0.0);
                v *= (TAU * term.frequencies[k] as f64 * tk + phase).cos();
            }
            v
        })
        .sum()
}

fn sampled_value(grid: &SampledGrid, x: &[f64]) -> Result<f64> {
    let dim = grid.dim;
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for k in 0..dim {
        let u = (x[k] - grid.origin[k]) / grid.spacing;
        let top = (grid.extents[k] - 1) as f64;
        if !(u >= -1e-12 && u <= top + 1e-12) {
            return Err(Error::OutOfDomain(x.to_vec()));
        }
        let u = u.clamp(0.0, top);
        let b = (u.floor() as usize).min(grid.extents[k] - 2);
        base[k] = b;
        frac[k] = u - b as f64;
    }
    let mut strides = [0usize; 3];
    let mut acc = 1;
    for k in (0..dim).rev() {
        strides[k] = acc;
        acc *= grid.extents[k];
    }
    let mut total = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut idx = 0;
        for k in 0..dim {
            let up = corner >> k & 1;
            w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
            idx += (base[k] + up) * strides[k];
        }
        total += w * grid.values[idx];
    }
    Ok(total)
}

/// Writes a sampled grid as one JSON header line followed by the values as
/// little-endian `f64`.
pub fn write_sampled(path: &Path, grid: &SampledGrid) -> Result<()> {
    let mut out = serde_json::to_vec(grid)?;
    out.push(b'\n');
    for v in &grid.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_sampled(path: &Path) -> Result<SampledGrid> {
    let bytes = fs::read(path)?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Parse("sampled potential has no header line".into()))?;
    let mut grid: SampledGrid = serde_json::from_slice(&bytes[..split])?;
    let payload = &bytes[split + 1..];
    let count: usize = grid.extents.iter().product();
    if payload.len() != 8 * count {
        return Err(Error::Parse(format!("expected {} payload bytes, found {}", 8 * count, payload.len())));
    }
    grid.values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(grid)
}
