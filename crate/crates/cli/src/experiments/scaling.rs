//! Dilation law of the energy: `F_λ(λE) = λ^{N-s} F(E)` where
//! `F_λ(E) = P_s(E) - λ^{-s} ∫_E g(y/λ) dy`.
//!
//! Dilation is done exactly on the grid: each cell `c` becomes the block
//! `λc + {0..λ}^N` of a window `λ` times larger with the same cell size.

use fracperim::lattice::{Coord, GridSet, Lattice};
use fracperim::perimeter::ps;
use fracperim::potential::Potential;
use serde::Serialize;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{num, OutDir};
use crate::shapes::Shape;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub shape: &'static str,
    pub lambda: u32,
    pub energy: f64,
    pub dilated_energy: f64,
    pub ratio: f64,
    pub expected: f64,
    pub relative_error: f64,
}

/// The window and set blown up by the integer factor `lambda`.
pub fn dilate(set: &GridSet, lambda: u32) -> Result<GridSet> {
    let lattice = set.lattice();
    let l = lambda as i64;
    let extents: Vec<usize> = lattice.extents().iter().map(|&n| n * lambda as usize).collect();
    let origin: Vec<f64> = lattice.origin().iter().map(|o| o * lambda as f64).collect();
    let big = Lattice::new(lattice.dim(), lattice.h(), &extents, &origin)?;
    let dim = lattice.dim();
    let block = (l as usize).pow(dim as u32);
    let mut cells: Vec<Coord> = Vec::with_capacity(set.len() * block);
    for c in set.cells() {
        for b in 0..block {
            let mut out = [0i64; 3];
            let mut rest = b as i64;
            for a in 0..dim {
                out[a] = c[a] * l + rest % l;
                rest /= l;
            }
            cells.push(out);
        }
    }
    Ok(GridSet::from_cells(&big, cells)?)
}

/// `P_s(E) - λ^{-s} Σ_{i∈E} g(x_i/λ) h^N`.
fn energy(cfg: &ExperimentConfig, set: &GridSet, g: &Potential, lambda: f64) -> Result<f64> {
    let lattice = set.lattice();
    let s = cfg.kernel.s;
    let table = cfg.kernel.table(lattice, s)?;
    let values = g.rescaled_cell_values(lattice, lambda)?;
    let bulk: f64 = set.iter().map(|i| values[i]).sum::<f64>() * lattice.cell_volume();
    Ok(ps(set, &table)?.total - lambda.powf(-s) * bulk)
}

pub fn compute(cfg: &ExperimentConfig) -> Result<Vec<ScalingRow>> {
    let sec = &cfg.scaling;
    if sec.lambdas.contains(&0) {
        return Err(CliError::Config("scaling.lambdas must be positive integers".into()));
    }
    if !(sec.size > 0.0 && sec.size <= 1.0) {
        return Err(CliError::Config(format!("scaling.size = {} not in (0, 1]", sec.size)));
    }
    let lattice = cfg.lattice.build()?;
    let dim = lattice.dim();
    let g = cfg.potential.build(dim)?;
    let half = *lattice.extents().iter().min().expect("non-empty extents") as f64 * lattice.h() / 2.0;
    let mut rows = Vec::new();
    for name in &sec.shapes {
        let shape = Shape::parse(name)?;
        let set = shape.rasterize(&lattice, sec.size * half);
        if set.is_empty() {
            return Err(CliError::Config(format!("{name} of size {} holds no cells", sec.size)));
        }
        let base = energy(cfg, &set, &g, 1.0)?;
        for &lambda in &sec.lambdas {
            let big = dilate(&set, lambda)?;
            let dilated = energy(cfg, &big, &g, lambda as f64)?;
            let ratio = dilated / base;
            let expected = (lambda as f64).powf(dim as f64 - cfg.kernel.s);
            rows.push(ScalingRow {
                shape: shape.name(),
                lambda,
                energy: base,
                dilated_energy: dilated,
                ratio,
                expected,
                relative_error: (ratio / expected - 1.0).abs(),
            });
        }
    }
    Ok(rows)
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let rows = compute(cfg)?;
    let tol = cfg.scaling.tolerance;
    let passed = rows.iter().all(|r| r.relative_error <= tol);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.shape.to_string(),
                r.lambda.to_string(),
                num(r.energy),
                num(r.dilated_energy),
                num(r.ratio),
                num(r.expected),
                num(r.relative_error),
            ]
        })
        .collect();
    out.csv("scaling.csv", &["shape", "lambda", "F", "F_lambda", "ratio", "expected", "relative_error"], &table)?;
    out.json("summary.json", &serde_json::json!({ "rows": rows, "tolerance": tol, "passed": passed }))?;
    let messages = rows
        .iter()
        .map(|r| {
            format!(
                "{} λ={} ratio {:.6} expected {:.6} error {:.2e}",
                r.shape, r.lambda, r.ratio, r.expected, r.relative_error
            )
        })
        .collect();
    Ok(Outcome { command: "scaling-check", passed, messages })
}
