//! Single minimization run with its report, set and tail-mass profile.

use fracperim::minimizer::{best_rigid_motion, best_swap, minimize, EnergyReport, Problem};
use fracperim::oracle::enumerate_min;
use serde::Serialize;

use super::Outcome;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{num, LinePlot, OutDir, Series};

/// Relative slack allowed between the heuristic and the exact optimum.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCheck {
    pub oracle_energy: f64,
    pub heuristic_energy: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizeRun {
    pub report: EnergyReport,
    /// No improving swap and no improving rigid motion remain.
    pub local_minimum: bool,
    pub cells: usize,
    pub oracle: Option<OracleCheck>,
    #[serde(skip)]
    pub set_json: String,
    #[serde(skip)]
    pub set_pgm: Option<String>,
}

pub fn compute(cfg: &ExperimentConfig, verify_oracle: bool) -> Result<MinimizeRun> {
    let lattice = cfg.lattice.build()?;
    let g = cfg.potential.build(lattice.dim())?;
    let table = cfg.kernel.table(&lattice, cfg.kernel.s)?;
    let problem = Problem::new(&table, &g)?;
    let mc = cfg.minimize.config(&lattice, cfg.experiment.seed)?;
    let (state, mut report) = minimize(&mc, &problem)?;
    if !cfg.experiment.timing {
        report.wall_ms = 0;
    }
    let local_minimum = best_swap(&state, &problem).is_none() && best_rigid_motion(&state, &problem).is_none();
    let heuristic = state.constrained_energy();
    let oracle = if verify_oracle {
        let k = problem.cells_for_volume(mc.target_volume)?;
        let exact = enumerate_min(&lattice, table.params(), &g, k)?;
        let slack = ORACLE_TOLERANCE * exact.best_energy.abs().max(1.0);
        Some(OracleCheck {
            oracle_energy: exact.best_energy,
            heuristic_energy: heuristic,
            matches: heuristic <= exact.best_energy + slack,
        })
    } else {
        None
    };
    let set = state.set();
    Ok(MinimizeRun {
        report,
        local_minimum,
        cells: set.len(),
        oracle,
        set_json: set.to_json(),
        set_pgm: (lattice.dim() == 2).then(|| set.to_pgm()).transpose()?,
    })
}

pub fn run(cfg: &ExperimentConfig, verify_oracle: bool, out: &mut OutDir) -> Result<Outcome> {
    let result = compute(cfg, verify_oracle)?;
    let passed = result.oracle.as_ref().is_none_or(|o| o.matches);
    out.json("report.json", &result)?;
    let mut set_json = result.set_json.clone();
    set_json.push('\n');
    out.text("set.json", &set_json)?;
    if let Some(pgm) = &result.set_pgm {
        out.text("set.pgm", pgm)?;
    }
    let tail: Vec<Vec<String>> = result.report.tail_mass.iter().map(|&(r, m)| vec![num(r), num(m)]).collect();
    out.csv("tail_mass.csv", &["r", "tail_mass"], &tail)?;
    if cfg.experiment.plot {
        let plot = LinePlot {
            title: "mass outside B(centroid, r)".into(),
            x_label: "r".into(),
            y_label: "|E \\ B_r|".into(),
            log_x: false,
            log_y: false,
            series: vec![Series { label: "tail mass".into(), points: result.report.tail_mass.clone() }],
        };
        out.text("tail_mass.svg", &plot.render())?;
    }
    let r = &result.report;
    let mut messages = vec![
        format!("{} on {} cells: energy {:.9}", r.mode, result.cells, r.energy),
        format!(
            "P_s {:.9} (interior {:.9}, exterior {:.9}), potential term {:.9}",
            r.ps_interior + r.ps_exterior,
            r.ps_interior,
            r.ps_exterior,
            r.potential_term
        ),
        format!("local minimum under swaps and rigid motions: {}", result.local_minimum),
    ];
    if let (Some(mu), Some(spread)) = (r.mu_mean, r.mu_spread) {
        messages.push(format!("mu {mu:.6}, relative spread {spread:.4}"));
    }
    if let Some(o) = &result.oracle {
        messages.push(format!(
            "oracle energy {:.12}, heuristic {:.12}: {}",
            o.oracle_energy,
            o.heuristic_energy,
            if o.matches { "match" } else { "MISMATCH" }
        ));
    }
    Ok(Outcome { command: "minimize", passed, messages })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.lattice.cells = 4;
        cfg.lattice.h = 0.25;
        cfg.minimize.cells = 5;
        cfg.potential.kind = crate::config::PotentialClass::Coercive;
        cfg.potential.center = Some(vec![0.2, -0.1]);
        cfg
    }

    #[test]
    fn tiny_window_matches_the_oracle() {
        let run = compute(&tiny(), true).unwrap();
        assert!(run.oracle.unwrap().matches);
        assert!(run.local_minimum);
        assert_eq!(run.report.wall_ms, 0);
        assert_eq!(run.cells, 5);
    }

    #[test]
    fn oracle_guard_is_a_config_error() {
        let mut cfg = tiny();
        cfg.lattice.cells = 12;
        cfg.lattice.h = 1.0 / 12.0;
        cfg.minimize.cells = 40;
        let err = compute(&cfg, true).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
