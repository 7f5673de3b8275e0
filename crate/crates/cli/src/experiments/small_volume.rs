//! Minimizers of small volume `ε^N ω_N`, blown up by `1/ε` and compared
//! with the unit ball.
//!
//! The cell size is `ε / cells_per_unit`, so every rescaled minimizer lives on
//! the same unit-scale grid and holds the same number of cells. The window
//! is one period cell of `g` padded by `margin·ε` on each side.

use fracperim::kernel::omega;
use fracperim::lattice::{best_translate_asymmetry, Lattice};
use fracperim::minimizer::{minimize, Problem};
use serde::Serialize;

use super::{log_log_slope, Outcome};
use crate::config::{ExperimentConfig, PotentialClass};
use crate::error::{CliError, Result};
use crate::output::{num, LinePlot, OutDir, Series};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    pub h: f64,
    pub cells: usize,
    pub energy: f64,
    /// `min_x |E/ε Δ B(x, r)|` with `|B(·, r)| = |E/ε|`.
    pub asymmetry: f64,
    pub relative_asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallVolumeFit {
    pub rows: Vec<EpsRow>,
    /// Increases of the asymmetry as `ε` decreases.
    pub inversions: usize,
    pub slope: Option<f64>,
    /// Smallest `C` with `asymmetry ≤ C ‖g‖_∞ ε^s` on every row.
    pub constant: Option<f64>,
    pub sup_g: f64,
}

pub fn compute(cfg: &ExperimentConfig) -> Result<SmallVolumeFit> {
    let sec = &cfg.small_volume;
    if !matches!(cfg.potential.kind, PotentialClass::Periodic | PotentialClass::Constant) {
        return Err(CliError::Config("small-volume needs a periodic or constant potential".into()));
    }
    if sec.eps.iter().any(|&e| e.is_nan() || e <= 0.0) || sec.cells_per_unit == 0 {
        return Err(CliError::Config("small_volume.eps must be positive and cells_per_unit nonzero".into()));
    }
    let dim = cfg.lattice.dim;
    let g = cfg.potential.build(dim)?;
    let s = cfg.kernel.s;
    let q = sec.cells_per_unit as f64;
    let mut rows = Vec::new();
    let mut sup_g: f64 = 0.0;
    for &eps in &sec.eps {
        let h = eps / q;
        let n = ((1.0 + 2.0 * sec.margin * eps) / h).round() as usize;
        let lo = 0.5 - n as f64 * h / 2.0;
        let lattice = Lattice::new(dim, h, &vec![n; dim], &vec![lo; dim])?;
        let table = cfg.kernel.table(&lattice, s)?;
        let problem = Problem::new(&table, &g)?;
        sup_g = sup_g.max(g.window_stats(&lattice)?.sup_abs());
        let cells = (omega(dim as i32) * q.powi(dim as i32)).round() as usize;
        let mut mc = cfg.minimize.config(&lattice, cfg.experiment.seed)?;
        mc.target_volume = cells as f64 * lattice.cell_volume();
        let (state, _) = minimize(&mc, &problem)?;

        let blown = Lattice::new(dim, h / eps, &vec![n; dim], &vec![lo / eps; dim])?;
        let scaled = state.set().relabel(&blown)?;
        let radius = (scaled.volume() / omega(dim as i32)).powf(1.0 / dim as f64);
        let asym = best_translate_asymmetry(&scaled, radius)?;
        rows.push(EpsRow {
            eps,
            h,
            cells,
            energy: state.energy(),
            asymmetry: asym.value,
            relative_asymmetry: asym.value / scaled.volume(),
        });
    }
    let mut by_eps = rows.clone();
    by_eps.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let inversions = by_eps.windows(2).filter(|w| w[1].asymmetry > w[0].asymmetry).count();
    let slope = log_log_slope(&rows.iter().map(|r| (r.eps, r.asymmetry)).collect::<Vec<_>>());
    let constant =
        (sup_g > 0.0).then(|| rows.iter().map(|r| r.asymmetry / (sup_g * r.eps.powf(s))).fold(0.0, f64::max));
    Ok(SmallVolumeFit { rows, inversions, slope, constant, sup_g })
}

/// Monotone up to the allowed inversions, and for a nonzero potential a
/// fitted slope of at least `s - allowance` when a fit exists.
pub fn judge(fit: &SmallVolumeFit, cfg: &ExperimentConfig) -> bool {
    let sec = &cfg.small_volume;
    let monotone = fit.inversions <= sec.inversions;
    let steep = match (fit.slope, fit.sup_g > 0.0) {
        (Some(slope), true) => slope >= cfg.kernel.s - sec.slope_allowance,
        _ => true,
    };
    monotone && steep
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome> {
    let fit = compute(cfg)?;
    let passed = judge(&fit, cfg);
    let table: Vec<Vec<String>> = fit
        .rows
        .iter()
        .map(|r| {
            vec![num(r.eps), num(r.h), r.cells.to_string(), num(r.energy), num(r.asymmetry), num(r.relative_asymmetry)]
        })
        .collect();
    out.csv("small_volume.csv", &["eps", "h", "cells", "energy", "asymmetry", "relative_asymmetry"], &table)?;
    out.json("summary.json", &serde_json::json!({ "fit": fit, "passed": passed }))?;
    if cfg.experiment.plot {
        let mut series =
            vec![Series { label: "asymmetry".into(), points: fit.rows.iter().map(|r| (r.eps, r.asymmetry)).collect() }];
        if let Some(c) = fit.constant {
            series.push(Series {
                label: format!("C |g| eps^{}", cfg.kernel.s),
                points: fit.rows.iter().map(|r| (r.eps, c * fit.sup_g * r.eps.powf(cfg.kernel.s))).collect(),
            });
        }
        let plot = LinePlot {
            title: "rescaled asymmetry".into(),
            x_label: "eps".into(),
            y_label: "min |E/eps - B|".into(),
            log_x: true,
            log_y: true,
            series,
        };
        out.text("small_volume.svg", &plot.render())?;
    }
    let mut messages: Vec<String> =
        fit.rows.iter().map(|r| format!("eps={} cells={} asymmetry={:.6}", r.eps, r.cells, r.asymmetry)).collect();
    messages.push(format!("inversions {} (allowed {})", fit.inversions, cfg.small_volume.inversions));
    messages.push(match fit.slope {
        Some(sl) => format!("log-log slope {sl:.4} (required {:.2})", cfg.kernel.s - cfg.small_volume.slope_allowance),
        None => "no slope fit".into(),
    });
    if let Some(c) = fit.constant {
        messages.push(format!("fitted C {c:.6}"));
    }
    Ok(Outcome { command: "small-volume", passed, messages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_eps_has_no_fit_and_passes() {
        let mut cfg = ExperimentConfig::default();
        cfg.small_volume.eps = vec![0.25];
        cfg.small_volume.cells_per_unit = 6;
        let fit = compute(&cfg).unwrap();
        assert_eq!(fit.rows.len(), 1);
        assert_eq!(fit.rows[0].cells, 113);
        assert!(fit.slope.is_none());
        assert!(judge(&fit, &cfg));
    }

    #[test]
    fn coercive_potential_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.potential.kind = PotentialClass::Coercive;
        assert!(compute(&cfg).is_err());
    }
}
