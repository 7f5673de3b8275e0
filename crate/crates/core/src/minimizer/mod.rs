//! Volume-constrained and penalized minimization of `P_s(E) - ∫_E g`.

mod moves;
mod state;

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{boundary_profile, mu_estimate};
use crate::error::{Error, Result};
use crate::kernel::omega;
use crate::lattice::{ball_of_cells, tail_mass_profile, GridSet};

pub use moves::{
    anneal_chain, best_rigid_motion, best_swap, exchange_descent, exchange_step, marginal_scores, move_to,
    project_volume, rigid_motion_step, threshold_step, Schedule,
};
pub use state::{flip_delta, EnergyState, Penalty, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ConstrainedExchange,
    PenalizedAnneal,
    ThresholdDynamics,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ConstrainedExchange => "constrained-exchange",
            Mode::PenalizedAnneal => "penalized-anneal",
            Mode::ThresholdDynamics => "threshold-dynamics",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// The `k` cells nearest to a center; `None` picks the maximizer of `g`
    /// averaged over a ball of the target volume.
    BallAt(Option<Vec<f64>>),
    RandomCells,
    Given(GridSet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeConfig {
    pub mode: Mode,
    /// Target volume `m`, an integer multiple of `h^N`.
    pub target_volume: f64,
    /// Penalty weight per unit volume; `None` uses [`default_mu`].
    pub mu: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub restarts: usize,
    pub init: Init,
    pub cooling: f64,
    /// `None` uses half the perimeter of one cell.
    pub initial_temperature: Option<f64>,
    pub anneal_sweeps: usize,
    /// How many times `μ` may be doubled when the penalized optimum misses `m`.
    pub mu_doublings: usize,
    /// Threshold iteration stops when the relative energy change drops below this.
    pub tolerance: f64,
}

impl MinimizeConfig {
    pub fn new(mode: Mode, target_volume: f64) -> Self {
        MinimizeConfig {
            mode,
            target_volume,
            mu: None,
            max_iters: 10_000,
            seed: 0,
            restarts: 1,
            init: Init::BallAt(None),
            cooling: 0.9,
            initial_temperature: None,
            anneal_sweeps: 60,
            mu_doublings: 16,
            tolerance: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.mu {
            if !(mu >= 0.0) {
                return Err(Error::InvalidParameter(format!("mu = {mu} must be nonnegative")));
            }
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidParameter(format!("cooling {} not in (0, 1)", self.cooling)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("at least one restart is required".into()));
        }
        Ok(())
    }
}

/// `μ_0 = 2 (sup |g| + (N ω_N / s) h^{-s})`, per unit volume.
pub fn default_mu(problem: &Problem) -> Result<f64> {
    let params = problem.table.params();
    let stats = problem.potential.window_stats(problem.lattice())?;
    let n = params.dim as f64;
    Ok(2.0 * (stats.sup_abs() + n * omega(params.dim as i32) / params.s * params.h.powf(-params.s)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mode: String,
    pub s: f64,
    pub h: f64,
    pub m: f64,
    pub energy: f64,
    pub ps_interior: f64,
    pub ps_exterior: f64,
    pub potential_term: f64,
    pub mu_mean: Option<f64>,
    pub mu_spread: Option<f64>,
    pub iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub wall_ms: u64,
    /// `(r, |E ∖ B(centroid, r)|)`; exported separately from the JSON record.
    #[serde(skip)]
    pub tail_mass: Vec<(f64, f64)>,
}

/// Center maximizing the average of `g` over a ball holding `k` cells.
pub fn smoothed_argmax(problem: &Problem, k: usize) -> [f64; 3] {
    let lattice = problem.lattice();
    let dim = lattice.dim();
    let h = lattice.h();
    let radius = (k.max(1) as f64 * lattice.cell_volume() / omega(dim as i32)).powf(1.0 / dim as f64);
    let reach = (radius / h).floor() as i64;
    let mut offsets = Vec::new();
    let span = |k: usize| if k < dim { -reach..=reach } else { 0..=0 };
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                if ((a * a + b * b + c * c) as f64).sqrt() * h <= radius.max(h) {
                    offsets.push([a, b, c]);
                }
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, 0usize);
    for i in 0..lattice.len() {
        let ci = lattice.coord(i);
        let mut sum = 0.0;
        let mut count = 0usize;
        for d in &offsets {
            if let Some(j) = lattice.flat(&[ci[0] + d[0], ci[1] + d[1], ci[2] + d[2]]) {
                sum += problem.g[j];
                count += 1;
            }
        }
        let avg = sum / count as f64;
        if avg > best.0 {
            best = (avg, i);
        }
    }
    lattice.center_of(best.1)
}

fn rng_for(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn random_cells<R: Rng>(problem: &Problem, k: usize, rng: &mut R) -> Result<GridSet> {
    let mut cells = sample(rng, problem.lattice().len(), k).into_vec();
    cells.sort_unstable();
    GridSet::from_flat(problem.lattice(), cells)
}

fn initial_set<R: Rng>(
    config: &MinimizeConfig,
    problem: &Problem,
    k: usize,
    restart: usize,
    rng: &mut R,
) -> Result<GridSet> {
    let lattice = problem.lattice();
    if restart == 0 {
        return match &config.init {
            Init::BallAt(Some(c)) => ball_of_cells(lattice, c, k),
            Init::BallAt(None) => ball_of_cells(lattice, &smoothed_argmax(problem, k), k),
            Init::RandomCells => random_cells(problem, k, rng),
            Init::Given(set) => {
                set.check_same_lattice(&GridSet::empty(lattice))?;
                Ok(set.clone())
            }
        };
    }
    if restart % 2 == 1 {
        let center = lattice.center_of(rng.gen_range(0..lattice.len()));
        ball_of_cells(lattice, &center, k)
    } else {
        random_cells(problem, k, rng)
    }
}

fn schedule(config: &MinimizeConfig, problem: &Problem) -> Schedule {
    Schedule {
        initial_temperature: config.initial_temperature.unwrap_or(0.5 * problem.table.cell_perimeter()),
        cooling: config.cooling,
        sweeps: config.anneal_sweeps,
    }
}

/// Penalized annealing from `start` with adaptive doubling of `μ`, followed
/// by projection onto exactly `k` cells.
fn anneal_from<R: Rng>(
    start: GridSet,
    config: &MinimizeConfig,
    problem: &Problem,
    k: usize,
    rng: &mut R,
) -> Result<(EnergyState, usize)> {
    let mut mu = match config.mu {
        Some(mu) => mu,
        None => default_mu(problem)?,
    };
    let sched = schedule(config, problem);
    let mut proposals = 0;
    let mut doublings = 0;
    loop {
        let penalty = Penalty { mu, target_cells: k };
        let state = EnergyState::new(start.clone(), problem, Some(penalty))?;
        let (mut best, n) = anneal_chain(state, problem, penalty, &sched, rng);
        proposals += n;
        if best.set().len() == k || doublings >= config.mu_doublings {
            project_volume(&mut best, problem, k);
            return Ok((best, proposals));
        }
        mu *= 2.0;
        doublings += 1;
    }
}

/// Penalized annealing (`mode = penalized-anneal`): the best state of a
/// Metropolis chain on `F_μ`, projected onto volume `m`.
pub fn anneal(config: &MinimizeConfig, problem: &Problem) -> Result<EnergyState> {
    config.validate()?;
    let k = problem.cells_for_volume(config.target_volume)?;
    let mut rng = rng_for(config.seed, 0);
    let start = initial_set(config, problem, k, 0, &mut rng)?;
    Ok(anneal_from(start, config, problem, k, &mut rng)?.0)
}

fn run_restart(config: &MinimizeConfig, problem: &Problem, k: usize, restart: usize) -> Result<(EnergyState, usize)> {
    let mut rng = rng_for(config.seed, restart);
    let start = initial_set(config, problem, k, restart, &mut rng)?;
    let (mut state, mut iters) = match config.mode {
        Mode::ConstrainedExchange => (EnergyState::new(start, problem, None)?, 0),
        Mode::PenalizedAnneal => {
            let (state, n) = anneal_from(start, config, problem, k, &mut rng)?;
            (state.with_penalty(None), n)
        }
        Mode::ThresholdDynamics => {
            let mut state = EnergyState::new(start, problem, None)?;
            project_volume(&mut state, problem, k);
            let mut best = (state.energy(), state.set().clone());
            let mut iters = 0;
            let mut previous: Option<GridSet> = None;
            while iters < config.max_iters {
                let next = threshold_step(&state, problem, k)?;
                // Fixed point or a two-cycle of the linearized step.
                if &next == state.set() || previous.as_ref() == Some(&next) {
                    break;
                }
                previous = Some(state.set().clone());
                let before = state.energy();
                move_to(&mut state, problem, &next)?;
                iters += 1;
                if state.energy() < best.0 {
                    best = (state.energy(), state.set().clone());
                }
                if (state.energy() - before).abs() <= config.tolerance * before.abs() {
                    break;
                }
            }
            (EnergyState::new(best.1, problem, None)?, iters)
        }
    };
    project_volume(&mut state, problem, k);
    iters += exchange_descent(&mut state, problem, config.max_iters);
    Ok((state, iters))
}

/// Multistart driver: runs every restart, keeps the lowest energy (earliest
/// restart on ties) and assembles the report.
pub fn minimize(config: &MinimizeConfig, problem: &Problem) -> Result<(EnergyState, EnergyReport)> {
    config.validate()?;
    let started = Instant::now();
    let k = problem.cells_for_volume(config.target_volume)?;
    let runs: Vec<Result<(EnergyState, usize)>> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(config, problem, k, r)).collect();
    let mut best: Option<(EnergyState, usize)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.0.energy() < b.0.energy()) {
            best = Some(run);
        }
    }
    let (state, iters) = best.expect("at least one restart");

    let set = state.set();
    let (mu_mean, mu_spread) = if set.is_empty() || set.is_full() {
        (None, None)
    } else {
        let profile = boundary_profile(set, problem.potential, problem.table)?;
        let mu = mu_estimate(&profile)?;
        (Some(mu.mean), Some(mu.spread))
    };
    let tail_mass = match set.centroid() {
        Some(c) => tail_mass_profile(set, &c),
        None => Vec::new(),
    };
    let params = problem.table.params();
    let ps = state.ps_value();
    let report = EnergyReport {
        mode: config.mode.name().to_string(),
        s: params.s,
        h: params.h,
        m: config.target_volume,
        energy: state.energy(),
        ps_interior: ps.interior_part,
        ps_exterior: ps.exterior_part,
        potential_term: state.potential_term(),
        mu_mean,
        mu_spread,
        iters,
        restarts: config.restarts,
        seed: config.seed,
        wall_ms: started.elapsed().as_millis() as u64,
        tail_mass,
    };
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelParams, KernelTable};
    use crate::lattice::{rasterize_ball, Ball, Lattice};
    use crate::oracle::enumerate_min;
    use crate::perimeter::ps;
    use crate::potential::{PeriodicTerm, Potential};
    use rand::Rng;

    fn table(n: usize, s: f64) -> (Lattice, KernelTable) {
        let lat = Lattice::centered(2, 1.0 / n as f64, n).unwrap();
        let t = KernelTable::new(KernelParams::for_lattice(&lat, s).unwrap(), &lat).unwrap();
        (lat, t)
    }

    fn wave() -> Potential {
        Potential::periodic(2, vec![PeriodicTerm { amplitude: 3.0, frequencies: vec![1, 1], phases: vec![0.4, -0.2] }])
            .unwrap()
    }

    #[test]
    fn flip_twice_cancels_exactly() {
        let (lat, t) = table(8, 0.5);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        let mut rng = rng_for(4, 0);
        let set = random_cells(&pb, 20, &mut rng).unwrap();
        let mut st = EnergyState::new(set, &pb, Some(Penalty { mu: 3.0, target_cells: 20 })).unwrap();
        for i in [0, 17, 40, 63] {
            let d1 = st.flip_delta(&pb, i);
            st.flip(&pb, i);
            let d2 = st.flip_delta(&pb, i);
            st.flip(&pb, i);
            assert_eq!(d1 + d2, 0.0);
        }
        assert_eq!(lat.len(), 64);
    }

    #[test]
    fn flip_deltas_match_recomputation() {
        let (lat, t) = table(8, 0.4);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        let mut rng = rng_for(7, 0);
        let set = random_cells(&pb, 30, &mut rng).unwrap();
        let mut st = EnergyState::new(set, &pb, Some(Penalty { mu: 5.0, target_cells: 30 })).unwrap();
        for _ in 0..100 {
            let i = rng.gen_range(0..lat.len());
            let predicted = st.flip_delta(&pb, i);
            let before = st.energy();
            let mut next = st.set().clone();
            next.toggle(i);
            let fresh = EnergyState::new(next, &pb, st.penalty()).unwrap();
            assert!((fresh.energy() - before - predicted).abs() <= 1e-9 * fresh.energy().abs());
            st.flip(&pb, i);
            assert!(st.drift(&pb).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn coordinate_flip_delta_and_far_cell() {
        let (lat, t) = table(16, 0.5);
        let g = Potential::constant(2, 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let set = GridSet::from_cells(&lat, [[0, 0, 0]]).unwrap();
        let st = EnergyState::new(set, &pb, None).unwrap();
        let d = flip_delta(&st, &pb, &[15, 15, 0]).unwrap();
        assert!((d / t.cell_perimeter() - 1.0).abs() < 0.01);
        assert!(flip_delta(&st, &pb, &[16, 0, 0]).is_err());
    }

    #[test]
    fn exchange_moves_a_cell_downhill() {
        let (lat, t) = table(8, 0.5);
        let g = Potential::coercive(2, 4.0, &[0.0, 0.0], 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let set = GridSet::from_cells(&lat, [[1, 1, 0]]).unwrap();
        let mut st = EnergyState::new(set, &pb, None).unwrap();
        let (_, _, delta) = best_swap(&st, &pb).unwrap();
        let before = st.energy();
        assert!(exchange_step(&mut st, &pb));
        assert!(st.energy() < before);
        assert!((st.energy() - before - delta).abs() <= 1e-9 * before.abs());
        assert!(st.drift(&pb).unwrap() <= 1e-9);
    }

    #[test]
    fn exchange_descent_is_strictly_monotone() {
        let (_, t) = table(10, 0.5);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        let mut rng = rng_for(1, 0);
        let set = random_cells(&pb, 25, &mut rng).unwrap();
        let mut st = EnergyState::new(set, &pb, None).unwrap();
        let mut prev = st.energy();
        while exchange_step(&mut st, &pb) {
            assert!(st.energy() < prev);
            assert_eq!(st.set().len(), 25);
            prev = st.energy();
        }
        assert!(st.drift(&pb).unwrap() <= 1e-9);
    }

    #[test]
    fn no_improving_swap_at_the_oracle_optimum() {
        let (lat, t) = table(5, 0.5);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        let best = enumerate_min(&lat, t.params(), &g, 6).unwrap();
        let mut st = EnergyState::new(best.best_set, &pb, None).unwrap();
        assert!(!exchange_step(&mut st, &pb));
    }

    #[test]
    fn rigid_motion_keeps_perimeter_and_lowers_energy() {
        let (lat, t) = table(8, 0.5);
        let g = Potential::coercive(2, 4.0, &[0.3, 0.0], 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let set = GridSet::from_cells(&lat, [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]).unwrap();
        let st = EnergyState::new(set, &pb, None).unwrap();
        let (target, delta) = best_rigid_motion(&st, &pb).unwrap();
        assert_eq!(target.len(), 4);
        let moved = EnergyState::new(target, &pb, None).unwrap();
        assert!((moved.ps_value().total - st.ps_value().total).abs() <= 1e-9 * st.ps_value().total);
        assert!((moved.energy() - st.energy() - delta).abs() <= 1e-9 * st.energy().abs());
        assert!(delta < 0.0);
    }

    #[test]
    fn descent_reaches_the_oracle_optimum_from_a_far_block() {
        let (lat, t) = table(5, 0.5);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        let best = enumerate_min(&lat, t.params(), &g, 6).unwrap();
        let far =
            GridSet::from_cells(&lat, [[0, 0, 0], [0, 1, 0], [1, 0, 0], [1, 1, 0], [2, 0, 0], [2, 1, 0]]).unwrap();
        let mut st = EnergyState::new(far, &pb, None).unwrap();
        exchange_descent(&mut st, &pb, 1000);
        assert!(st.energy() <= best.best_energy + 1e-9 * best.best_energy.abs());
        assert!(best_rigid_motion(&st, &pb).is_none());
    }

    #[test]
    fn threshold_examples() {
        let (lat, t) = table(8, 0.5);
        let g = Potential::constant(2, 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let st = EnergyState::new(GridSet::empty(&lat), &pb, None).unwrap();
        assert!(threshold_step(&st, &pb, lat.len()).unwrap().is_full());

        // Coarse disk is a fixed point, and stepping from a fixed point is idempotent.
        let disk = rasterize_ball(&lat, &Ball::new(&[0.0, 0.0], 0.3).unwrap());
        let st = EnergyState::new(disk.clone(), &pb, None).unwrap();
        let next = threshold_step(&st, &pb, disk.len()).unwrap();
        assert_eq!(next, disk);
        let again = threshold_step(&EnergyState::new(next.clone(), &pb, None).unwrap(), &pb, disk.len()).unwrap();
        assert_eq!(again, next);
    }

    #[test]
    fn threshold_moves_mass_to_the_favoured_well() {
        let lat = Lattice::new(2, 1.0 / 8.0, &[16, 8], &[0.0, 0.0]).unwrap();
        let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.5).unwrap(), &lat).unwrap();
        // Wells (maxima of g) at x_0 = 0.5 and 1.5, hills at x_0 = 0 and 1.
        let g = Potential::periodic(
            2,
            vec![PeriodicTerm { amplitude: 30.0, frequencies: vec![1, 0], phases: vec![std::f64::consts::PI, 0.0] }],
        )
        .unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let in_well = ball_of_cells(&lat, &[0.5, 0.5], 6).unwrap();
        let on_hill = ball_of_cells(&lat, &[1.0, 0.5], 6).unwrap();
        let start = in_well.union(&on_hill).unwrap();
        let st = EnergyState::new(start.clone(), &pb, None).unwrap();
        let next = threshold_step(&st, &pb, 12).unwrap();
        let favoured = |s: &GridSet| s.iter().filter(|&i| pb.g[i] > 0.0).count();
        assert!(favoured(&next) > favoured(&start));
        let after = EnergyState::new(next, &pb, None).unwrap();
        assert!(after.energy() < st.energy());
    }

    #[test]
    fn anneal_single_cell_and_exact_volume() {
        let (_, t) = table(6, 0.5);
        let g = Potential::constant(2, 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let mut cfg = MinimizeConfig::new(Mode::PenalizedAnneal, pb.cell_volume());
        cfg.anneal_sweeps = 20;
        let st = anneal(&cfg, &pb).unwrap();
        assert_eq!(st.set().len(), 1);
        for seed in 0..5 {
            cfg.seed = seed;
            cfg.target_volume = 7.0 * pb.cell_volume();
            cfg.init = Init::RandomCells;
            assert_eq!(anneal(&cfg, &pb).unwrap().set().len(), 7);
        }
    }

    #[test]
    fn volume_validation() {
        let (lat, t) = table(6, 0.5);
        let g = Potential::constant(2, 0.0).unwrap();
        let pb = Problem::new(&t, &g).unwrap();
        let cfg = MinimizeConfig::new(Mode::ConstrainedExchange, 2.5 * pb.cell_volume());
        assert!(matches!(minimize(&cfg, &pb), Err(Error::FractionalVolume { .. })));
        let cfg = MinimizeConfig::new(Mode::ConstrainedExchange, 2.0 * lat.window_volume());
        assert!(matches!(minimize(&cfg, &pb), Err(Error::InfeasibleVolume { .. })));
        let mut cfg = MinimizeConfig::new(Mode::ConstrainedExchange, pb.cell_volume());
        cfg.cooling = 1.0;
        assert!(minimize(&cfg, &pb).is_err());
    }

    #[test]
    fn every_mode_is_deterministic_and_exact_in_volume() {
        let (_, t) = table(10, 0.5);
        let g = wave();
        let pb = Problem::new(&t, &g).unwrap();
        for mode in [Mode::ConstrainedExchange, Mode::PenalizedAnneal, Mode::ThresholdDynamics] {
            let mut cfg = MinimizeConfig::new(mode, 12.0 * pb.cell_volume());
            cfg.restarts = 3;
            cfg.seed = 99;
            cfg.anneal_sweeps = 10;
            let (a, ra) = minimize(&cfg, &pb).unwrap();
            let (b, rb) = minimize(&cfg, &pb).unwrap();
            assert_eq!(a.set(), b.set());
            assert_eq!(a.energy().to_bits(), b.energy().to_bits());
            assert_eq!(a.set().len(), 12);
            assert_eq!(ra.energy.to_bits(), rb.energy.to_bits());
            assert_eq!(ra.mode, mode.name());
            let direct = ps(a.set(), &t).unwrap().total - g.integral_over(a.set()).unwrap();
            assert!((direct - a.energy()).abs() <= 1e-9 * direct.abs());
            assert!(!ra.tail_mass.is_empty());
        }
    }
}
