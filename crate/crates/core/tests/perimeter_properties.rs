use fracperim::kernel::{KernelParams, KernelTable};
use fracperim::lattice::{ball_of_cells, rasterize_ball, Ball, GridSet, Lattice};
use fracperim::oracle::{direct_cross_sum, direct_ps};
use fracperim::perimeter::{interaction, ps, ps_localized};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(lat: &Lattice, s: f64) -> KernelTable {
    KernelTable::new(KernelParams::for_lattice(lat, s).unwrap(), lat).unwrap()
}

fn random_set(lat: &Lattice, rng: &mut ChaCha8Rng, p: f64) -> GridSet {
    GridSet::from_flat(lat, (0..lat.len()).filter(|_| rng.gen_bool(p))).unwrap()
}

#[test]
fn disk_perimeter_converges_under_refinement() {
    let value = |n: usize| {
        let lat = Lattice::centered(2, 2.5 / n as f64, n).unwrap();
        let disk = rasterize_ball(&lat, &Ball::new(&[0.0, 0.0], 1.0).unwrap());
        ps(&disk, &table(&lat, 0.5)).unwrap().total
    };
    let coarse = value(40);
    let fine = value(80);
    assert!((coarse - fine).abs() / fine < 0.02, "{coarse} vs {fine}");
}

#[test]
fn dilation_scales_perimeter() {
    let lat = Lattice::centered(2, 1.0 / 16.0, 64).unwrap();
    for s in [0.3, 0.5, 0.7] {
        let t = table(&lat, s);
        let small = rasterize_ball(&lat, &Ball::new(&[0.0, 0.0], 0.6).unwrap());
        let big = rasterize_ball(&lat, &Ball::new(&[0.0, 0.0], 1.2).unwrap());
        let ratio = ps(&big, &t).unwrap().total / ps(&small, &t).unwrap().total;
        let expected = 2f64.powf(2.0 - s);
        assert!((ratio / expected - 1.0).abs() < 0.03, "s {s}: {ratio} vs {expected}");
    }
}

fn nearest_cells(lat: &Lattice, k: usize, gauge: impl Fn(f64, f64) -> f64) -> GridSet {
    let mut v: Vec<(f64, usize)> = (0..lat.len())
        .map(|i| {
            let c = lat.center_of(i);
            (gauge(c[0], c[1]), i)
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    GridSet::from_flat(lat, v.into_iter().take(k).map(|x| x.1)).unwrap()
}

// A grid-aligned square has no staircase boundary, so at this resolution it
// can tie the digital disk; elongated and non-convex shapes cannot.
#[test]
fn disk_beats_rectangle_and_plus_of_equal_count() {
    let lat = Lattice::centered(2, 1.0 / 16.0, 32).unwrap();
    let k = 144;
    let disk = ball_of_cells(&lat, &[0.0, 0.0], k).unwrap();
    let rect = nearest_cells(&lat, k, |x, y| (x.abs() / 2.0).max(y.abs()));
    let plus =
        nearest_cells(&lat, k, |x, y| (x.abs() / 1.5).max(y.abs() / 0.5).min((x.abs() / 0.5).max(y.abs() / 1.5)));
    for s in [0.3, 0.5, 0.7] {
        let t = table(&lat, s);
        let d = ps(&disk, &t).unwrap().total;
        assert!(d < ps(&rect, &t).unwrap().total, "s {s}");
        assert!(d < ps(&plus, &t).unwrap().total, "s {s}");
    }
}

#[test]
fn table_sums_match_the_independent_direct_sums() {
    let lat = Lattice::cube(2, 1.0 / 8.0, 8, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in [0.3, 0.7] {
        let t = table(&lat, s);
        for _ in 0..10 {
            let e = random_set(&lat, &mut rng, 0.4);
            let fast = ps(&e, &t).unwrap().total;
            let slow = direct_ps(&e, t.params()).unwrap();
            assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1e-300), "{fast} vs {slow}");
        }
    }
}

#[test]
fn union_and_corrected_localization_identities_at_scale() {
    let lat = Lattice::cube(2, 1.0 / 16.0, 16, 0.0).unwrap();
    let t = table(&lat, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let e = random_set(&lat, &mut rng, 0.5);
        let split = random_set(&lat, &mut rng, 0.5);
        let (a, b) = (e.intersection(&split).unwrap(), e.difference(&split).unwrap());
        let lhs = ps(&e, &t).unwrap().total;
        let rhs = ps(&a, &t).unwrap().total + ps(&b, &t).unwrap().total - 2.0 * interaction(&a, &b, &t).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs);
        assert!((interaction(&a, &b, &t).unwrap() - direct_cross_sum(&a, &b, t.params()).unwrap()).abs() <= 1e-9 * lhs);

        let o1 = random_set(&lat, &mut rng, 0.3);
        let o2 = random_set(&lat, &mut rng, 0.5).difference(&o1).unwrap();
        let u = o1.union(&o2).unwrap();
        let p1 = ps_localized(&e, &o1, &t).unwrap();
        let p2 = ps_localized(&e, &o2, &t).unwrap();
        let p12 = ps_localized(&e, &u, &t).unwrap();
        let ec = e.complement();
        let cross = interaction(&e.intersection(&o1).unwrap(), &o2.intersection(&ec).unwrap(), &t).unwrap()
            + interaction(&e.intersection(&o2).unwrap(), &o1.intersection(&ec).unwrap(), &t).unwrap();
        assert!((p1 + p2 - p12 - cross).abs() <= 1e-9 * p12.max(1.0));
        assert!(p1 + p2 - p12 <= 2.0 * interaction(&o1, &o2, &t).unwrap() * (1.0 + 1e-12));
    }
}
