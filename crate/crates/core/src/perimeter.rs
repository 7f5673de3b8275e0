//! Discrete fractional perimeter, its localized version, and cross
//! interactions between disjoint sets.
//!
//! With `W` the cell-pair weights and `T(i)` the interaction of cell `i`
//! with everything outside the window,
//! `P_s(E) = Σ_{i∈E} Σ_{j∈window∖E} W(i-j) + Σ_{i∈E} T(i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::lattice::{Coord, GridSet};

/// `P_s(E)` split by where the complement lives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerimeterValue {
    pub total: f64,
    /// Pairs with both cells in the window.
    pub interior_part: f64,
    /// Interaction of `E` with the complement of the window.
    pub exterior_part: f64,
}

impl PerimeterValue {
    pub fn new(interior_part: f64, exterior_part: f64) -> Self {
        PerimeterValue { total: interior_part + exterior_part, interior_part, exterior_part }
    }
}

pub(crate) fn check_table(set: &GridSet, table: &KernelTable) -> Result<()> {
    if set.lattice() != table.lattice() {
        return Err(Error::LatticeMismatch);
    }
    Ok(())
}

fn coords(set: &GridSet) -> Vec<Coord> {
    set.cells()
}

/// `Σ_{i∈A} Σ_{j∈B} W(i-j)`, reduced per `i` and then summed in order.
fn cross_sum(table: &KernelTable, a: &[Coord], b: &[Coord]) -> f64 {
    let rows: Vec<f64> = a.par_iter().map(|ci| b.iter().map(|cj| table.weight_between(ci, cj)).sum::<f64>()).collect();
    rows.iter().sum()
}

pub fn ps(set: &GridSet, table: &KernelTable) -> Result<PerimeterValue> {
    check_table(set, table)?;
    let inside = coords(set);
    let outside = coords(&set.complement());
    let interior = cross_sum(table, &inside, &outside);
    let exterior: f64 = set.iter().map(|i| table.exterior_part(i)).sum();
    Ok(PerimeterValue::new(interior, exterior))
}

/// `P_s(E, Ω)`: interactions of `E ∩ Ω` with the whole complement of `E`,
/// plus those of `E ∖ Ω` with `Ω ∖ E`.
pub fn ps_localized(set: &GridSet, omega: &GridSet, table: &KernelTable) -> Result<f64> {
    check_table(set, table)?;
    set.check_same_lattice(omega)?;
    let inside = set.intersection(omega)?;
    let outside = coords(&set.complement());
    let first =
        cross_sum(table, &coords(&inside), &outside) + inside.iter().map(|i| table.exterior_part(i)).sum::<f64>();
    let second = cross_sum(table, &coords(&set.difference(omega)?), &coords(&omega.difference(set)?));
    Ok(first + second)
}

/// `Σ_{i∈A} Σ_{j∈B} W(i-j)` for disjoint `A`, `B`.
pub fn interaction(a: &GridSet, b: &GridSet, table: &KernelTable) -> Result<f64> {
    check_table(a, table)?;
    check_table(b, table)?;
    if !a.is_disjoint(b)? {
        return Err(Error::NotDisjoint);
    }
    // Fixed argument order so that swapping A and B sums identical terms.
    let (a, b) = (coords(a), coords(b));
    let (first, second) = if a <= b { (&a, &b) } else { (&b, &a) };
    Ok(cross_sum(table, first, second))
}

/// `φ(i) = Σ_{j∈E, j≠i} W(i-j)` for every cell of the window.
pub fn interaction_field(set: &GridSet, table: &KernelTable) -> Result<Vec<f64>> {
    check_table(set, table)?;
    let lattice = set.lattice();
    let members = coords(set);
    Ok((0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let ci = lattice.coord(i);
            members.iter().map(|cj| table.weight_between(&ci, cj)).sum()
        })
        .collect())
}

/// Change of `P_s` when the membership of cell `i` is toggled, given the
/// interaction field of the current set.
pub fn toggle_delta(set: &GridSet, phi: &[f64], table: &KernelTable, i: usize) -> f64 {
    let outward = table.cell_perimeter() - 2.0 * phi[i];
    if set.contains_flat(i) {
        -outward
    } else {
        outward
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{cell_self_perimeter, KernelParams};
    use crate::lattice::Lattice;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, s: f64) -> (Lattice, KernelTable) {
        let lat = Lattice::cube(2, 1.0 / n as f64, n, 0.0).unwrap();
        let t = KernelTable::new(KernelParams::for_lattice(&lat, s).unwrap(), &lat).unwrap();
        (lat, t)
    }

    fn random_set(lat: &Lattice, rng: &mut ChaCha8Rng, p: f64) -> GridSet {
        GridSet::from_flat(lat, (0..lat.len()).filter(|_| rng.gen_bool(p))).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn empty_set_has_zero_perimeter() {
        let (lat, t) = setup(6, 0.5);
        assert_eq!(ps(&GridSet::empty(&lat), &t).unwrap(), PerimeterValue::default());
    }

    #[test]
    fn single_cell_in_1d_matches_closed_form() {
        // One unit cell on a line: 2/(s(1-s)).
        let lat = Lattice::new(1, 1.0, &[41], &[-20.0]).unwrap();
        let t = KernelTable::new(KernelParams::for_lattice(&lat, 0.5).unwrap(), &lat).unwrap();
        let e = GridSet::from_cells(&lat, [[20, 0, 0]]).unwrap();
        let v = ps(&e, &t).unwrap();
        assert!(rel(v.total, 8.0) < 1e-3, "{v:?}");
        assert!(v.interior_part > 0.0 && v.exterior_part > 0.0);
    }

    #[test]
    fn single_cell_equals_isolated_cell_perimeter() {
        let (lat, t) = setup(8, 0.4);
        let e = GridSet::from_cells(&lat, [[3, 5, 0]]).unwrap();
        let v = ps(&e, &t).unwrap();
        assert!(rel(v.total, cell_self_perimeter(t.params()).unwrap()) < 1e-12);
    }

    #[test]
    fn full_window_is_exterior_only() {
        let (lat, t) = setup(5, 0.5);
        let v = ps(&GridSet::full(&lat), &t).unwrap();
        assert_eq!(v.interior_part, 0.0);
        assert!(v.exterior_part > 0.0);
    }

    #[test]
    fn localized_on_full_window_is_ps() {
        let (lat, t) = setup(8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let e = random_set(&lat, &mut rng, 0.4);
            let a = ps_localized(&e, &GridSet::full(&lat), &t).unwrap();
            assert!(rel(a, ps(&e, &t).unwrap().total) < 1e-12);
        }
    }

    #[test]
    fn localized_matches_four_loop_oracle() {
        let (lat, t) = setup(8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let e = random_set(&lat, &mut rng, 0.5);
            let om = random_set(&lat, &mut rng, 0.5);
            let mut direct = 0.0;
            for i in 0..lat.len() {
                for j in 0..lat.len() {
                    let (ci, cj) = (lat.coord(i), lat.coord(j));
                    let first = e.contains_flat(i) && om.contains_flat(i) && !e.contains_flat(j);
                    let second =
                        e.contains_flat(i) && !om.contains_flat(i) && om.contains_flat(j) && !e.contains_flat(j);
                    if first || second {
                        direct += t.weight_between(&ci, &cj);
                    }
                }
                if e.contains_flat(i) && om.contains_flat(i) {
                    direct += t.exterior_part(i);
                }
            }
            assert!(rel(ps_localized(&e, &om, &t).unwrap(), direct) < 1e-12);
        }
    }

    #[test]
    fn localized_far_omega_only_second_sum() {
        let (lat, t) = setup(8, 0.5);
        let e = GridSet::from_cells(&lat, [[0, 0, 0], [0, 1, 0]]).unwrap();
        let om = GridSet::from_cells(&lat, [[7, 7, 0]]).unwrap();
        let expected = interaction(&e, &om, &t).unwrap();
        assert!(rel(ps_localized(&e, &om, &t).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn interaction_of_two_cells_is_the_weight() {
        let (lat, t) = setup(8, 0.5);
        let a = GridSet::from_cells(&lat, [[1, 1, 0]]).unwrap();
        let b = GridSet::from_cells(&lat, [[3, 2, 0]]).unwrap();
        assert_eq!(interaction(&a, &b, &t).unwrap(), t.weight(&[2, 1, 0]));
        assert_eq!(interaction(&GridSet::empty(&lat), &b, &t).unwrap(), 0.0);
        assert!(interaction(&a, &a, &t).is_err());
    }

    #[test]
    fn corrected_localization_identity() {
        // P(E,Ω1) + P(E,Ω2) - P(E,Ω1∪Ω2) = L(E∩Ω1, Ω2∖E) + L(E∩Ω2, Ω1∖E) ≤ 2 L(Ω1, Ω2).
        let (lat, t) = setup(10, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let e = random_set(&lat, &mut rng, 0.5);
            let o1 = random_set(&lat, &mut rng, 0.4);
            let o2 = random_set(&lat, &mut rng, 0.5).difference(&o1).unwrap();
            let both = o1.union(&o2).unwrap();
            let lhs = ps_localized(&e, &o1, &t).unwrap() + ps_localized(&e, &o2, &t).unwrap()
                - ps_localized(&e, &both, &t).unwrap();
            let rhs = interaction(&e.intersection(&o1).unwrap(), &o2.difference(&e).unwrap(), &t).unwrap()
                + interaction(&e.intersection(&o2).unwrap(), &o1.difference(&e).unwrap(), &t).unwrap();
            let scale = ps_localized(&e, &both, &t).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9 * scale, "{lhs} vs {rhs}");
            assert!(lhs <= 2.0 * interaction(&o1, &o2, &t).unwrap() + 1e-9 * scale);
        }
    }

    #[test]
    fn removal_delta_formula() {
        let (lat, t) = setup(8, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = random_set(&lat, &mut rng, 0.5);
        let phi = interaction_field(&e, &t).unwrap();
        let base = ps(&e, &t).unwrap().total;
        for i in e.members() {
            let ci = lat.coord(i);
            let mut inside = 0.0;
            let mut outside = 0.0;
            for j in 0..lat.len() {
                if j == i {
                    continue;
                }
                let w = t.weight_between(&ci, &lat.coord(j));
                if e.contains_flat(j) {
                    inside += w;
                } else {
                    outside += w;
                }
            }
            let formula = inside - outside - t.exterior_part(i);
            let mut f = e.clone();
            f.remove(i);
            let actual = ps(&f, &t).unwrap().total - base;
            assert!((formula - actual).abs() <= 1e-9 * base);
            assert!((toggle_delta(&e, &phi, &t, i) - actual).abs() <= 1e-9 * base);
        }
    }

    #[test]
    fn lattice_mismatch_is_rejected() {
        let (_, t) = setup(8, 0.5);
        let other = Lattice::cube(2, 0.125, 4, 0.0).unwrap();
        assert!(matches!(ps(&GridSet::empty(&other), &t), Err(Error::LatticeMismatch)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn union_identity(seed in any::<u64>(), s in 0.1f64..0.9) {
            let (lat, t) = setup(6, s);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_set(&lat, &mut rng, 0.3);
            let b = random_set(&lat, &mut rng, 0.4).difference(&a).unwrap();
            let whole = ps(&a.union(&b).unwrap(), &t).unwrap().total;
            let split = ps(&a, &t).unwrap().total + ps(&b, &t).unwrap().total
                - 2.0 * interaction(&a, &b, &t).unwrap();
            prop_assert!((whole - split).abs() <= 1e-9 * whole.abs().max(1e-300));
        }

        #[test]
        fn interaction_is_symmetric(seed in any::<u64>()) {
            let (lat, t) = setup(6, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_set(&lat, &mut rng, 0.3);
            let b = random_set(&lat, &mut rng, 0.4).difference(&a).unwrap();
            prop_assert_eq!(interaction(&a, &b, &t).unwrap(), interaction(&b, &a, &t).unwrap());
        }

        #[test]
        fn perimeter_is_positive_and_split_adds_up(seed in any::<u64>()) {
            let (lat, t) = setup(6, 0.5);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_set(&lat, &mut rng, 0.5);
            let v = ps(&e, &t).unwrap();
            prop_assert_eq!(v.total, v.interior_part + v.exterior_part);
            prop_assert!(e.is_empty() || v.total > 0.0);
        }
    }
}
