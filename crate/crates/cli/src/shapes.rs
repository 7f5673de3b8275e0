//! Test shapes of a prescribed cell count.
//!
//! Each shape is a gauge `ρ` centered on the window center; the set holds the
//! `k` cells whose centers have the smallest `ρ`, ties broken by flat index.
//! Equal counts make shapes directly comparable.

use fracperim::lattice::{GridSet, Lattice};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Disk,
    Square,
    /// Aspect 2:1, long side on the first axis.
    Rectangle,
    /// Three-by-three block cross: arms as wide as the center square.
    Plus,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Disk, Shape::Square, Shape::Rectangle, Shape::Plus];

    pub fn parse(name: &str) -> Result<Shape> {
        match name {
            "disk" | "ball" => Ok(Shape::Disk),
            "square" | "cube" => Ok(Shape::Square),
            "rectangle" => Ok(Shape::Rectangle),
            "plus" => Ok(Shape::Plus),
            other => Err(CliError::Config(format!("unknown shape {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Disk => "disk",
            Shape::Square => "square",
            Shape::Rectangle => "rectangle",
            Shape::Plus => "plus",
        }
    }

    /// Level-set function; `{gauge ≤ r}` is the shape at scale `r`.
    pub fn gauge(self, y: &[f64]) -> f64 {
        let abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
        match self {
            Shape::Disk => abs.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Shape::Square => abs.iter().fold(0.0_f64, |m, &v| m.max(v)),
            Shape::Rectangle => {
                abs.iter().enumerate().fold(0.0_f64, |m, (k, &v)| m.max(if k == 0 { v / 2.0 } else { v }))
            }
            Shape::Plus => (0..abs.len())
                .map(|arm| {
                    abs.iter().enumerate().fold(0.0_f64, |m, (k, &v)| m.max(if k == arm { v / 1.5 } else { v / 0.5 }))
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Volume of `{gauge ≤ 1}` in `dim` dimensions.
    pub fn unit_volume(self, dim: usize) -> f64 {
        let d = dim as i32;
        match self {
            Shape::Disk => fracperim::kernel::omega(d),
            Shape::Square => 2f64.powi(d),
            Shape::Rectangle => 2f64.powi(d) * 2.0,
            // Center cube of side 1 plus two arms of length 1 per axis.
            Shape::Plus => (1 + 2 * dim) as f64,
        }
    }

    /// The `k` cells of smallest gauge about the window center.
    pub fn cells(self, lattice: &Lattice, k: usize) -> Result<GridSet> {
        if k > lattice.len() {
            return Err(CliError::Config(format!("{k} cells exceed the window ({})", lattice.len())));
        }
        let center = window_center(lattice);
        let dim = lattice.dim();
        let mut ranked: Vec<(f64, usize)> = (0..lattice.len())
            .map(|i| {
                let x = lattice.center_of(i);
                let y: Vec<f64> = (0..dim).map(|a| x[a] - center[a]).collect();
                (self.gauge(&y), i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(GridSet::from_flat(lattice, ranked.into_iter().take(k).map(|(_, i)| i))?)
    }

    /// The shape scaled to physical size `r` (radius, half-side), rasterized
    /// by cell-center membership.
    pub fn rasterize(self, lattice: &Lattice, r: f64) -> GridSet {
        let center = window_center(lattice);
        let dim = lattice.dim();
        GridSet::from_predicate(lattice, |x| {
            let y: Vec<f64> = (0..dim).map(|a| x[a] - center[a]).collect();
            self.gauge(&y) < r
        })
    }
}

pub fn window_center(lattice: &Lattice) -> Vec<f64> {
    let h = lattice.h();
    lattice.origin().iter().zip(lattice.extents()).map(|(o, &n)| o + n as f64 * h / 2.0).collect()
}

/// Largest `side^N` whose shapes all fit inside the window with a one-cell
/// margin. The 2:1 rectangle is the binding shape.
pub fn default_cell_count(lattice: &Lattice) -> usize {
    let dim = lattice.dim() as i32;
    let free = *lattice.extents().iter().min().expect("non-empty extents") as f64 - 2.0;
    let side = (free / 2f64.powf(1.0 / dim as f64)).floor().max(1.0) as usize;
    side.pow(dim as u32)
}
