use fracperim::kernel::{KernelParams, KernelTable};
use fracperim::lattice::{GridSet, Lattice};
use fracperim::minimizer::{
    default_mu, minimize, move_to, threshold_step, EnergyState, Init, MinimizeConfig, Mode, Problem,
};
use fracperim::oracle::{enumerate_min, enumerate_penalized};
use fracperim::potential::{PeriodicTerm, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_periodic(seed: u64) -> Potential {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..3)
        .map(|_| PeriodicTerm {
            amplitude: rng.gen_range(0.5..3.0),
            frequencies: vec![rng.gen_range(0..3), rng.gen_range(0..3)],
            phases: vec![rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU)],
        })
        .collect();
    Potential::periodic(2, terms).unwrap()
}

fn small() -> (Lattice, KernelTable) {
    let lat = Lattice::cube(2, 0.2, 5, 0.0).unwrap();
    let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.5).unwrap(), &lat).unwrap();
    (lat, t)
}

#[test]
fn heuristics_never_beat_and_usually_match_the_oracle() {
    let (lat, t) = small();
    for inst in 40..46u64 {
        let g = random_periodic(inst);
        let pb = Problem::new(&t, &g).unwrap();
        let best = enumerate_min(&lat, t.params(), &g, 6).unwrap().best_energy;
        for mode in [Mode::ConstrainedExchange, Mode::PenalizedAnneal, Mode::ThresholdDynamics] {
            let mut cfg = MinimizeConfig::new(mode, 6.0 * lat.cell_volume());
            cfg.restarts = 5;
            cfg.seed = inst;
            let (st, _) = minimize(&cfg, &pb).unwrap();
            assert_eq!(st.set().len(), 6);
            assert!(st.energy() >= best - 1e-9 * best.abs());
            assert!(st.energy() <= best + 1e-9 * best.abs(), "{mode:?} on {inst}: {} vs {best}", st.energy());
        }
    }
}

#[test]
fn penalized_optimum_at_default_mu_is_the_constrained_one() {
    let (lat, t) = small();
    let g = random_periodic(3);
    let pb = Problem::new(&t, &g).unwrap();
    let mu = default_mu(&pb).unwrap();
    let pen = enumerate_penalized(&lat, t.params(), &g, 6, mu).unwrap();
    let con = enumerate_min(&lat, t.params(), &g, 6).unwrap();
    assert_eq!(pen.best_set.len(), 6);
    assert!((pen.best_energy - con.best_energy).abs() <= 1e-9 * con.best_energy.abs());
}

#[test]
fn threshold_fixed_points_are_idempotent() {
    let lat = Lattice::cube(2, 1.0 / 12.0, 12, 0.0).unwrap();
    let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.5).unwrap(), &lat).unwrap();
    let g = random_periodic(9);
    let pb = Problem::new(&t, &g).unwrap();
    let mut st = EnergyState::new(GridSet::from_flat(&lat, 0..30).unwrap(), &pb, None).unwrap();
    let mut seen = vec![st.set().clone()];
    for _ in 0..200 {
        let next = threshold_step(&st, &pb, 30).unwrap();
        if &next == st.set() {
            let again = threshold_step(&st, &pb, 30).unwrap();
            assert_eq!(&again, st.set());
            return;
        }
        move_to(&mut st, &pb, &next).unwrap();
        if seen.contains(st.set()) {
            // A 2-cycle is possible for the linearized step; it is not a fixed point.
            return;
        }
        seen.push(st.set().clone());
    }
    panic!("threshold iteration neither converged nor cycled");
}

#[test]
fn identical_configs_give_identical_reports() {
    let lat = Lattice::centered(2, 1.0 / 8.0, 16).unwrap();
    let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.4).unwrap(), &lat).unwrap();
    let g = random_periodic(1);
    let pb = Problem::new(&t, &g).unwrap();
    for mode in [Mode::ConstrainedExchange, Mode::PenalizedAnneal, Mode::ThresholdDynamics] {
        let mut cfg = MinimizeConfig::new(mode, 20.0 * lat.cell_volume());
        cfg.restarts = 3;
        cfg.seed = 77;
        cfg.init = Init::RandomCells;
        let run = || {
            let (st, mut rep) = minimize(&cfg, &pb).unwrap();
            rep.wall_ms = 0;
            (st.set().members(), serde_json::to_string(&rep).unwrap())
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn coercive_minimizers_stay_bounded() {
    let lat = Lattice::centered(2, 1.0 / 8.0, 24).unwrap();
    let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.5).unwrap(), &lat).unwrap();
    let g = Potential::coercive(2, 1.0, &[0.0, 0.0], 0.0).unwrap();
    let pb = Problem::new(&t, &g).unwrap();
    let half_width = 1.5;
    for cells in [20usize, 80] {
        let mut cfg = MinimizeConfig::new(Mode::ConstrainedExchange, cells as f64 * lat.cell_volume());
        cfg.init = Init::RandomCells;
        cfg.restarts = 2;
        let (_, rep) = minimize(&cfg, &pb).unwrap();
        let reach = rep.tail_mass.iter().find(|(_, f)| *f == 0.0).unwrap().0;
        assert!(reach < 0.8 * half_width, "{cells} cells reach {reach}");
    }
}
