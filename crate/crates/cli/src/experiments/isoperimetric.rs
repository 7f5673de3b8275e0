//! Equal-count shapes compared by fractional perimeter.

use fracperim::perimeter::ps;
use serde::Serialize;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{num, OutDir};
use crate::shapes::{default_cell_count, Shape};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeRow {
    pub s: f64,
    pub shape: &'static str,
    pub cells: usize,
    pub ps: f64,
    pub ps_interior: f64,
    pub ps_exterior: f64,
    /// `ps - ps(disk)`, absent when the disk was not requested.
    pub deficit: Option<f64>,
    /// `deficit / ps(disk)`.
    pub relative_deficit: Option<f64>,
    /// `deficit · |E|^{-(N-s)/N}`, invariant under dilation.
    pub normalized_deficit: Option<f64>,
}

pub fn compute(cfg: &ExperimentConfig) -> Result<Vec<ShapeRow>> {
    let lattice = cfg.lattice.build()?;
    let sec = &cfg.isoperimetric;
    let shapes: Vec<Shape> = sec.shapes.iter().map(|n| Shape::parse(n)).collect::<Result<_>>()?;
    if shapes.is_empty() {
        return Err(CliError::Config("isoperimetric.shapes is empty".into()));
    }
    let k = sec.cells.unwrap_or_else(|| default_cell_count(&lattice));
    let sets = shapes.iter().map(|s| s.cells(&lattice, k)).collect::<Result<Vec<_>>>()?;
    let dim = lattice.dim() as f64;
    let mut rows = Vec::new();
    for &s in &sec.s_values {
        let table = cfg.kernel.table(&lattice, s)?;
        let values = sets.iter().map(|set| ps(set, &table)).collect::<fracperim::Result<Vec<_>>>()?;
        let disk = shapes.iter().position(|&sh| sh == Shape::Disk).map(|i| values[i].total);
        for ((shape, set), value) in shapes.iter().zip(&sets).zip(&values) {
            let deficit = disk.map(|d| value.total - d);
            rows.push(ShapeRow {
                s,
                shape: shape.name(),
                cells: set.len(),
                ps: value.total,
                ps_interior: value.interior_part,
                ps_exterior: value.exterior_part,
                deficit,
                relative_deficit: deficit.zip(disk).map(|(d, p)| d / p),
                normalized_deficit: deficit.map(|d| d * set.volume().powf(-(dim - s) / dim)),
            });
        }
    }
    Ok(rows)
}

/// For each exponent: is the disk strictly below every other shape, by at
/// least `min_relative` of its own value?
pub fn disk_is_minimal(rows: &[ShapeRow], min_relative: f64) -> Vec<(f64, bool)> {
    let mut out: Vec<(f64, bool)> = Vec::new();
    for r in rows {
        let ok = match (r.shape, r.relative_deficit) {
            ("disk", _) | (_, None) => true,
            (_, Some(rel)) => rel > 0.0 && rel >= min_relative,
        };
        match out.iter_mut().find(|(s, _)| *s == r.s) {
            Some(entry) => entry.1 &= ok,
            None => out.push((r.s, ok)),
        }
    }
    out
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let rows = compute(cfg)?;
    let verdicts = disk_is_minimal(&rows, cfg.isoperimetric.min_relative_deficit);
    let passed = verdicts.iter().all(|v| v.1);
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                num(r.s),
                r.shape.to_string(),
                r.cells.to_string(),
                num(r.ps),
                num(r.ps_interior),
                num(r.ps_exterior),
                opt(r.deficit),
                opt(r.relative_deficit),
                opt(r.normalized_deficit),
            ]
        })
        .collect();
    out.csv(
        "isoperimetric.csv",
        &[
            "s",
            "shape",
            "cells",
            "ps",
            "ps_interior",
            "ps_exterior",
            "deficit",
            "relative_deficit",
            "normalized_deficit",
        ],
        &table,
    )?;
    out.json("summary.json", &serde_json::json!({ "rows": rows, "passed": passed }))?;
    let mut messages: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "s={} {:<9} ps={:.6} relative deficit {}",
                r.s,
                r.shape,
                r.ps,
                r.relative_deficit.map(|d| format!("{d:+.4}")).unwrap_or_else(|| "-".into())
            )
        })
        .collect();
    for (s, ok) in verdicts {
        messages.push(format!("s={s}: disk {}", if ok { "minimal" } else { "NOT minimal" }));
    }
    Ok(Outcome { command: "isoperimetric", passed, messages })
}
