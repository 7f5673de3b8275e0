//! Local moves: best-improvement swaps, threshold selection, annealing.

use rand::Rng;

use super::state::{EnergyState, Penalty, Problem};
use crate::error::Result;
use crate::lattice::{Coord, GridSet};

/// Relative slack below which a move does not count as an improvement.
const IMPROVEMENT_EPS: f64 = 1e-12;

fn improvement_floor(state: &EnergyState) -> f64 {
    IMPROVEMENT_EPS * state.ps_value().total.abs().max(state.energy().abs()).max(1e-300)
}

/// The best strictly improving swap `(a, b, delta)` of a boundary cell
/// `a ∈ E` with an outside cell `b` adjacent to `E`.
pub fn best_swap(state: &EnergyState, problem: &Problem) -> Option<(usize, usize, f64)> {
    let set = state.set();
    let removable = set.boundary_cells();
    let addable = set.outer_frontier();
    let floor = improvement_floor(state);
    let mut best: Option<(usize, usize, f64)> = None;
    for &a in &removable {
        for &b in &addable {
            let d = state.swap_delta(problem, a, b);
            if d < -floor && best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((a, b, d));
            }
        }
    }
    best
}

/// Applies the best strictly improving swap, if any. Volume is unchanged.
pub fn exchange_step(state: &mut EnergyState, problem: &Problem) -> bool {
    match best_swap(state, problem) {
        Some((a, b, _)) => {
            state.flip(problem, a);
            state.flip(problem, b);
            true
        }
        None => false,
    }
}

/// Signed axis permutations of the first `dim` axes (the symmetry group of
/// the cubic lattice), identity first.
fn lattice_symmetries(dim: usize) -> Vec<([usize; 3], [i64; 3])> {
    let perms: Vec<[usize; 3]> = match dim {
        1 => vec![[0, 1, 2]],
        2 => vec![[0, 1, 2], [1, 0, 2]],
        _ => vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]],
    };
    let mut out = Vec::new();
    for p in perms {
        for signs in 0..(1u32 << dim) {
            let mut sg = [1i64; 3];
            for (a, s) in sg.iter_mut().enumerate().take(dim) {
                if signs >> a & 1 == 1 {
                    *s = -1;
                }
            }
            out.push((p, sg));
        }
    }
    out
}

/// The best strictly improving rigid lattice motion of the whole set (a
/// signed axis permutation followed by a shift) that keeps it inside the
/// window. The whole-space perimeter is invariant under these motions, so
/// only the potential term is compared.
pub fn best_rigid_motion(state: &EnergyState, problem: &Problem) -> Option<(GridSet, f64)> {
    let set = state.set();
    let lattice = problem.lattice();
    let dim = lattice.dim();
    let cells = set.cells();
    if cells.is_empty() {
        return None;
    }
    let ext = lattice.extents();
    let vol = problem.cell_volume();
    let here: f64 = set.iter().map(|i| problem.g[i]).sum();
    let floor = improvement_floor(state);
    let mut best: Option<(Vec<Coord>, f64)> = None;
    for (perm, signs) in lattice_symmetries(dim) {
        let mut image: Vec<Coord> = cells
            .iter()
            .map(|c| {
                let mut m = [0i64; 3];
                for a in 0..dim {
                    m[a] = signs[a] * c[perm[a]];
                }
                m
            })
            .collect();
        let mut hi = [0i64; 3];
        for a in 0..dim {
            let min = image.iter().map(|c| c[a]).min().unwrap_or(0);
            let max = image.iter().map(|c| c[a]).max().unwrap_or(0);
            for c in image.iter_mut() {
                c[a] -= min;
            }
            hi[a] = ext[a] as i64 - 1 - (max - min);
            if hi[a] < 0 {
                break;
            }
        }
        if hi.iter().take(dim).any(|&x| x < 0) {
            continue;
        }
        for t0 in 0..=hi[0] {
            for t1 in 0..=hi[1] {
                for t2 in 0..=hi[2] {
                    let shift = [t0, t1, t2];
                    let there: f64 = image
                        .iter()
                        .filter_map(|c| lattice.flat(&[c[0] + t0, c[1] + t1, c[2] + t2]))
                        .map(|j| problem.g[j])
                        .sum();
                    let d = -(there - here) * vol;
                    if d < -floor && best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                        best = Some((
                            image.iter().map(|c| [c[0] + shift[0], c[1] + shift[1], c[2] + shift[2]]).collect(),
                            d,
                        ));
                    }
                }
            }
        }
    }
    let (cells, d) = best?;
    GridSet::from_cells(lattice, cells).ok().map(|t| (t, d))
}

/// Applies the best improving rigid motion if the recomputed energy really
/// drops; otherwise leaves `state` untouched.
pub fn rigid_motion_step(state: &mut EnergyState, problem: &Problem) -> bool {
    let Some((target, _)) = best_rigid_motion(state, problem) else {
        return false;
    };
    let before = state.energy();
    let original = state.set().clone();
    if move_to(state, problem, &target).is_err() || state.energy() >= before - improvement_floor(state) {
        let _ = move_to(state, problem, &original);
        return false;
    }
    true
}

/// Runs exchange steps, falling back to a rigid lattice motion whenever no
/// swap improves, until neither helps or `max_iters` is reached; returns
/// the number of accepted moves.
pub fn exchange_descent(state: &mut EnergyState, problem: &Problem, max_iters: usize) -> usize {
    let mut iters = 0;
    while iters < max_iters && (exchange_step(state, problem) || rigid_motion_step(state, problem)) {
        iters += 1;
    }
    iters
}

/// Marginal score `v(i) = P_cell - 2φ(i) - g(x_i) h^N` of adding cell `i`
/// to the current set (linearization of the energy).
pub fn marginal_scores(state: &EnergyState, problem: &Problem) -> Vec<f64> {
    let p_cell = problem.table.cell_perimeter();
    let vol = problem.cell_volume();
    state.phi().iter().zip(&problem.g).map(|(phi, g)| p_cell - 2.0 * phi - g * vol).collect()
}

/// The `k` cells with the smallest marginal score, ties broken by index.
pub fn threshold_step(state: &EnergyState, problem: &Problem, k: usize) -> Result<GridSet> {
    let v = marginal_scores(state, problem);
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    GridSet::from_flat(problem.lattice(), order.into_iter().take(k))
}

/// Moves `state` to `target` by flipping the differing cells.
pub fn move_to(state: &mut EnergyState, problem: &Problem, target: &GridSet) -> Result<()> {
    for i in state.set().symmetric_difference(target)?.members() {
        state.flip(problem, i);
    }
    Ok(())
}

/// Toggles the cheapest cell (lowest index on ties) until the set has
/// exactly `k` cells.
pub fn project_volume(state: &mut EnergyState, problem: &Problem, k: usize) {
    while state.set().len() != k {
        let grow = state.set().len() < k;
        let best = (0..problem.lattice().len())
            .filter(|&i| state.set().contains_flat(i) != grow)
            .map(|i| (state.flip_delta(problem, i), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match best {
            Some((_, i)) => state.flip(problem, i),
            None => break,
        }
    }
}

/// Annealing schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub initial_temperature: f64,
    /// Geometric factor applied after every sweep of `M` proposals.
    pub cooling: f64,
    pub sweeps: usize,
}

/// Metropolis chain of single-cell flips on the penalized energy. Returns
/// the best state seen (not yet volume-projected) and the proposal count.
pub fn anneal_chain<R: Rng>(
    start: EnergyState,
    problem: &Problem,
    penalty: Penalty,
    schedule: &Schedule,
    rng: &mut R,
) -> (EnergyState, usize) {
    let mut state = start.with_penalty(Some(penalty));
    let mut best_set = state.set().clone();
    let mut best_energy = state.energy();
    let m = problem.lattice().len();
    let mut temperature = schedule.initial_temperature;
    let mut proposals = 0;
    for _ in 0..schedule.sweeps {
        for _ in 0..m {
            let i = rng.gen_range(0..m);
            let d = state.flip_delta(problem, i);
            let u: f64 = rng.gen();
            proposals += 1;
            if d <= 0.0 || (temperature > 0.0 && u < (-d / temperature).exp()) {
                state.flip(problem, i);
                if state.energy() < best_energy {
                    best_energy = state.energy();
                    best_set = state.set().clone();
                }
            }
        }
        temperature *= schedule.cooling;
    }
    // Rebuild from the best set so cached sums carry no accumulated drift.
    let best = EnergyState::new(best_set, problem, Some(penalty)).expect("same lattice");
    (best, proposals)
}
