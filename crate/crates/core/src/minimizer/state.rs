//! Incrementally maintained energy of a cell set.

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::lattice::{Coord, GridSet, Lattice};
use crate::perimeter::{check_table, interaction_field, ps, PerimeterValue};
use crate::potential::Potential;

/// Kernel table and potential values for one window.
#[derive(Debug)]
pub struct Problem<'a> {
    pub table: &'a KernelTable,
    pub potential: &'a Potential,
    /// `g` at every cell center, flat order.
    pub g: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(table: &'a KernelTable, potential: &'a Potential) -> Result<Self> {
        let g = potential.cell_values(table.lattice())?;
        Ok(Problem { table, potential, g })
    }

    pub fn lattice(&self) -> &Lattice {
        self.table.lattice()
    }

    pub fn cell_volume(&self) -> f64 {
        self.lattice().cell_volume()
    }

    /// Converts a volume into a cell count, rejecting fractional targets.
    pub fn cells_for_volume(&self, m: f64) -> Result<usize> {
        let vol = self.cell_volume();
        let k = (m / vol).round();
        if !(m >= 0.0) || (k * vol - m).abs() > 1e-9 * vol.max(m) {
            return Err(Error::FractionalVolume { volume: m, cell_volume: vol });
        }
        let k = k as usize;
        if k > self.lattice().len() {
            return Err(Error::InfeasibleVolume { volume: m, window: self.lattice().window_volume() });
        }
        Ok(k)
    }
}

/// Volume penalty `μ ||E| - m|`, with `m` held as a cell count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty {
    pub mu: f64,
    pub target_cells: usize,
}

impl Penalty {
    fn value(&self, cells: usize, cell_volume: f64) -> f64 {
        self.mu * (cells as f64 - self.target_cells as f64).abs() * cell_volume
    }
}

#[derive(Clone, Debug)]
pub struct EnergyState {
    set: GridSet,
    /// `φ(i) = Σ_{j∈E, j≠i} W(i-j)`.
    phi: Vec<f64>,
    ps_value: PerimeterValue,
    potential_term: f64,
    penalty: Option<Penalty>,
}

impl EnergyState {
    pub fn new(set: GridSet, problem: &Problem, penalty: Option<Penalty>) -> Result<Self> {
        check_table(&set, problem.table)?;
        let phi = interaction_field(&set, problem.table)?;
        let ps_value = ps(&set, problem.table)?;
        let vol = problem.cell_volume();
        let potential_term = set.iter().map(|i| problem.g[i] * vol).sum();
        Ok(EnergyState { set, phi, ps_value, potential_term, penalty })
    }

    pub fn set(&self) -> &GridSet {
        &self.set
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn ps_value(&self) -> PerimeterValue {
        self.ps_value
    }

    /// `∫_E g`.
    pub fn potential_term(&self) -> f64 {
        self.potential_term
    }

    pub fn penalty(&self) -> Option<Penalty> {
        self.penalty
    }

    pub fn penalty_term(&self) -> f64 {
        let vol = self.set.lattice().cell_volume();
        self.penalty.map_or(0.0, |p| p.value(self.set.len(), vol))
    }

    /// `P_s(E) - ∫_E g (+ μ ||E| - m|)`.
    pub fn energy(&self) -> f64 {
        self.ps_value.total - self.potential_term + self.penalty_term()
    }

    /// Energy without the penalty.
    pub fn constrained_energy(&self) -> f64 {
        self.ps_value.total - self.potential_term
    }

    pub fn with_penalty(mut self, penalty: Option<Penalty>) -> Self {
        self.penalty = penalty;
        self
    }

    /// Exact change of the perimeter when cell `i` is toggled.
    pub fn ps_delta(&self, problem: &Problem, i: usize) -> f64 {
        let outward = problem.table.cell_perimeter() - 2.0 * self.phi[i];
        if self.set.contains_flat(i) {
            -outward
        } else {
            outward
        }
    }

    /// Exact change of the energy when cell `i` is toggled.
    pub fn flip_delta(&self, problem: &Problem, i: usize) -> f64 {
        let vol = problem.cell_volume();
        let removing = self.set.contains_flat(i);
        let dg = if removing { problem.g[i] * vol } else { -problem.g[i] * vol };
        let dpen = match self.penalty {
            Some(p) => {
                let n = self.set.len();
                let after = if removing { n - 1 } else { n + 1 };
                p.value(after, vol) - p.value(n, vol)
            }
            None => 0.0,
        };
        self.ps_delta(problem, i) + dg + dpen
    }

    /// Exact energy change of removing `a ∈ E` and adding `b ∉ E`.
    pub fn swap_delta(&self, problem: &Problem, a: usize, b: usize) -> f64 {
        let lattice = self.set.lattice();
        let w = problem.table.weight_between(&lattice.coord(a), &lattice.coord(b));
        2.0 * (self.phi[a] - self.phi[b]) + 2.0 * w - (problem.g[b] - problem.g[a]) * problem.cell_volume()
    }

    /// Toggles cell `i`, updating every cached quantity.
    pub fn flip(&mut self, problem: &Problem, i: usize) {
        let table = problem.table;
        let vol = problem.cell_volume();
        let adding = !self.set.contains_flat(i);
        let sign = if adding { 1.0 } else { -1.0 };
        let interior = table.row_sum(i) - 2.0 * self.phi[i];
        self.ps_value = PerimeterValue::new(
            self.ps_value.interior_part + sign * interior,
            self.ps_value.exterior_part + sign * table.exterior_part(i),
        );
        self.potential_term += sign * problem.g[i] * vol;
        self.set.toggle(i);
        let lattice = self.set.lattice();
        let ci = lattice.coord(i);
        for (j, p) in self.phi.iter_mut().enumerate() {
            *p += sign * table.weight_between(&lattice.coord(j), &ci);
        }
    }

    /// Largest relative discrepancy between the cached energy terms and a
    /// recomputation from scratch.
    pub fn drift(&self, problem: &Problem) -> Result<f64> {
        let fresh = EnergyState::new(self.set.clone(), problem, self.penalty)?;
        let scale = fresh.energy().abs().max(fresh.ps_value.total).max(f64::MIN_POSITIVE);
        let mut worst = (fresh.energy() - self.energy()).abs() / scale;
        for (a, b) in fresh.phi.iter().zip(&self.phi) {
            worst = worst.max((a - b).abs() / scale);
        }
        Ok(worst)
    }
}

/// Index of a cell given by coordinates, for the coordinate-based API.
pub(crate) fn flat_of(lattice: &Lattice, c: &Coord) -> Result<usize> {
    lattice.flat(c).ok_or(Error::OutOfWindow(*c))
}

/// Energy change of toggling `cell`.
pub fn flip_delta(state: &EnergyState, problem: &Problem, cell: &Coord) -> Result<f64> {
    Ok(state.flip_delta(problem, flat_of(problem.lattice(), cell)?))
}
