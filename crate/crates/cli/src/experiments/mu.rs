//! Euler-Lagrange check: `H_s(x) - g(x)` should be the same constant at every
//! boundary point of a minimizer.

use fracperim::curvature::{boundary_profile_with, mu_estimate, CurvatureSample, MuEstimate};
use fracperim::lattice::GridSet;
use fracperim::minimizer::{minimize, Problem};
use serde::Serialize;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{num, LinePlot, OutDir, Series};
use crate::shapes::Shape;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuProfile {
    pub shape: String,
    pub cells: usize,
    pub estimate: MuEstimate,
    #[serde(skip)]
    pub samples: Vec<CurvatureSample>,
}

pub fn compute(cfg: &ExperimentConfig) -> Result<MuProfile> {
    let lattice = cfg.lattice.build()?;
    let g = cfg.potential.build(lattice.dim())?;
    let table = cfg.kernel.table(&lattice, cfg.kernel.s)?;
    let sec = &cfg.mu;
    let set = match sec.shape.as_str() {
        "minimizer" => {
            let problem = Problem::new(&table, &g)?;
            let mc = cfg.minimize.config(&lattice, cfg.experiment.seed)?;
            minimize(&mc, &problem)?.0.set().clone()
        }
        "file" => {
            let path =
                sec.file.as_ref().ok_or_else(|| CliError::Config("mu.file is required for shape = \"file\"".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            GridSet::from_json(&text)?.relabel(&lattice)?
        }
        "slab" | "halfspace" => {
            return Err(CliError::Config(format!(
                "shape {:?} is not volume-feasible: it has infinite volume and perimeter",
                sec.shape
            )))
        }
        name => Shape::parse(name)?.rasterize(&lattice, sec.radius),
    };
    let samples = boundary_profile_with(&set, &g, &table, &sec.options())?;
    let estimate = mu_estimate(&samples)?;
    Ok(MuProfile { shape: sec.shape.clone(), cells: set.len(), estimate, samples })
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let profile = compute(cfg)?;
    let dim = cfg.lattice.dim;
    let passed = profile.estimate.spread <= cfg.mu.max_spread;
    let mut header: Vec<String> = (0..dim).map(|a| format!("cell_{a}")).collect();
    header.extend((0..dim).map(|a| format!("x_{a}")));
    header.extend(["hs", "g", "residual"].map(String::from));
    let table: Vec<Vec<String>> = profile
        .samples
        .iter()
        .map(|p| {
            let mut row: Vec<String> = p.cell[..dim].iter().map(|c| c.to_string()).collect();
            row.extend(p.x[..dim].iter().map(|&x| num(x)));
            row.extend([num(p.hs), num(p.g_at_x), num(p.residual)]);
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("profile.csv", &header_refs, &table)?;
    out.json(
        "summary.json",
        &serde_json::json!({
            "profile": profile,
            "boundary_cells": profile.samples.len(),
            "max_spread": cfg.mu.max_spread,
            "passed": passed,
        }),
    )?;
    if cfg.experiment.plot {
        let plot = LinePlot {
            title: "H_s - g along the boundary".into(),
            x_label: "boundary cell".into(),
            y_label: "residual".into(),
            log_x: false,
            log_y: false,
            series: vec![Series {
                label: "H_s - g".into(),
                points: profile.samples.iter().enumerate().map(|(k, p)| (k as f64, p.residual)).collect(),
            }],
        };
        out.text("profile.svg", &plot.render())?;
    }
    Ok(Outcome {
        command: "mu-check",
        passed,
        messages: vec![
            format!("shape {} with {} cells, {} boundary cells", profile.shape, profile.cells, profile.samples.len()),
            format!("mu {:.6}", profile.estimate.mean),
            format!("relative spread {:.4} (allowed {})", profile.estimate.spread, cfg.mu.max_spread),
        ],
    })
}
