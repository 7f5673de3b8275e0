//! Brute-force ground truth for tiny windows.
//!
//! Weights come from [`cell_weight`] and [`cell_self_perimeter`] only; the
//! sums are written out directly without the tables and incremental updates
//! of the main path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{cell_self_perimeter, cell_weight, KernelParams};
use crate::lattice::{GridSet, Lattice};
use crate::potential::Potential;

pub const ENUMERATION_GUARD: f64 = 1e8;
pub const DIRECT_GUARD: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub best_set: GridSet,
    pub best_energy: f64,
    pub instances_evaluated: u64,
}

/// Independent dense weight matrix and exterior tails of one window.
struct DirectWeights {
    w: Vec<Vec<f64>>,
    tail: Vec<f64>,
    g: Vec<f64>,
    cell_volume: f64,
}

impl DirectWeights {
    fn new(lattice: &Lattice, params: &KernelParams, g: Option<&Potential>) -> Result<Self> {
        let m = lattice.len();
        let dim = lattice.dim();
        let mut w = vec![vec![0.0; m]; m];
        for (i, row) in w.iter_mut().enumerate() {
            let ci = lattice.coord(i);
            for (j, wij) in row.iter_mut().enumerate() {
                if i != j {
                    let cj = lattice.coord(j);
                    let d: Vec<i64> = (0..dim).map(|k| ci[k] - cj[k]).collect();
                    *wij = cell_weight(params, &d)?;
                }
            }
        }
        let single = cell_self_perimeter(params)?;
        let tail = w.iter().map(|row| single - row.iter().sum::<f64>()).collect();
        let g = match g {
            Some(g) => g.cell_values(lattice)?,
            None => vec![0.0; m],
        };
        Ok(DirectWeights { w, tail, g, cell_volume: lattice.cell_volume() })
    }

    fn energy(&self, member: &[bool]) -> f64 {
        let mut interior = 0.0;
        let mut exterior = 0.0;
        let mut potential = 0.0;
        for i in 0..member.len() {
            if !member[i] {
                continue;
            }
            for j in 0..member.len() {
                if !member[j] {
                    interior += self.w[i][j];
                }
            }
            exterior += self.tail[i];
            potential += self.g[i] * self.cell_volume;
        }
        interior + exterior - potential
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_params(lattice: &Lattice, params: &KernelParams) -> Result<()> {
    params.validate()?;
    if params.dim != lattice.dim() || (params.h - lattice.h()).abs() > 1e-12 * lattice.h() {
        return Err(Error::LatticeMismatch);
    }
    Ok(())
}

/// Lexicographically next `k`-combination of `0..n`; false after the last.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Best `k`-subset under `weights`, scanning combinations whose first element
/// is `first`; earliest combination wins ties.
fn scan_prefix(weights: &DirectWeights, n: usize, k: usize, first: usize) -> (f64, Vec<usize>, u64) {
    let mut comb: Vec<usize> = (first..first + k).collect();
    let mut best = (f64::INFINITY, comb.clone());
    let mut count = 0u64;
    let mut member = vec![false; n];
    loop {
        if comb[0] != first {
            break;
        }
        member.iter_mut().for_each(|b| *b = false);
        for &i in &comb {
            member[i] = true;
        }
        let e = weights.energy(&member);
        count += 1;
        if e < best.0 {
            best = (e, comb.clone());
        }
        if !next_combination(&mut comb, n) {
            break;
        }
    }
    (best.0, best.1, count)
}

fn enumerate_size(lattice: &Lattice, weights: &DirectWeights, k: usize) -> Result<OracleResult> {
    let n = lattice.len();
    if k == 0 {
        let member = vec![false; n];
        return Ok(OracleResult {
            best_set: GridSet::empty(lattice),
            best_energy: weights.energy(&member),
            instances_evaluated: 1,
        });
    }
    let parts: Vec<(f64, Vec<usize>, u64)> =
        (0..=n - k).into_par_iter().map(|first| scan_prefix(weights, n, k, first)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut total = 0;
    for (e, comb, count) in parts {
        total += count;
        if best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, comb));
        }
    }
    let (energy, comb) = best.expect("k ≤ n");
    Ok(OracleResult { best_set: GridSet::from_flat(lattice, comb)?, best_energy: energy, instances_evaluated: total })
}

/// Exact minimizer of `P_s(E) - ∫_E g` over all sets of `k_cells` cells.
pub fn enumerate_min(lattice: &Lattice, params: &KernelParams, g: &Potential, k_cells: usize) -> Result<OracleResult> {
    check_params(lattice, params)?;
    let n = lattice.len();
    if k_cells > n {
        return Err(Error::InfeasibleVolume {
            volume: k_cells as f64 * lattice.cell_volume(),
            window: lattice.window_volume(),
        });
    }
    let count = binomial(n, k_cells);
    if count > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded(format!("C({n}, {k_cells}) = {count:.3e} subsets")));
    }
    let weights = DirectWeights::new(lattice, params, Some(g))?;
    enumerate_size(lattice, &weights, k_cells)
}

/// Exact minimizer of `P_s(E) - ∫_E g + μ ||E| - m|` over all subsets of the
/// window, with `m` given in cells. Sizes are visited by increasing distance
/// from `m` and skipped when a lower bound already exceeds the incumbent.
pub fn enumerate_penalized(
    lattice: &Lattice,
    params: &KernelParams,
    g: &Potential,
    target_cells: usize,
    mu: f64,
) -> Result<OracleResult> {
    check_params(lattice, params)?;
    let n = lattice.len();
    let weights = DirectWeights::new(lattice, params, Some(g))?;
    let single = cell_self_perimeter(params)?;
    // Largest weights over distinct offsets and largest potential values.
    let mut distinct_w: Vec<f64> = {
        let mut seen = std::collections::BTreeMap::new();
        for i in 0..n {
            let ci = lattice.coord(i);
            for j in 0..n {
                if i != j {
                    let cj = lattice.coord(j);
                    seen.insert([ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]], weights.w[i][j]);
                }
            }
        }
        seen.into_values().collect()
    };
    distinct_w.sort_by(|a, b| b.total_cmp(a));
    let mut g_sorted: Vec<f64> = weights.g.clone();
    g_sorted.sort_by(|a, b| b.total_cmp(a));
    let vol = lattice.cell_volume();
    let lower_bound = |k: usize| {
        let neighbours: f64 = distinct_w.iter().take(k.saturating_sub(1)).sum();
        let potential: f64 = g_sorted.iter().take(k).sum::<f64>() * vol;
        let perimeter = (k as f64 * (single - neighbours)).max(0.0);
        perimeter - potential + mu * (k as f64 - target_cells as f64).abs() * vol
    };
    let mut sizes: Vec<usize> = (0..=n).collect();
    sizes.sort_by_key(|&k| ((k as i64 - target_cells as i64).abs(), k));
    let mut best: Option<(f64, GridSet)> = None;
    let mut total = 0;
    for k in sizes {
        let penalty = mu * (k as f64 - target_cells as f64).abs() * vol;
        if let Some((e, _)) = &best {
            if lower_bound(k) >= *e {
                continue;
            }
        }
        if binomial(n, k) > ENUMERATION_GUARD {
            return Err(Error::GuardExceeded(format!("C({n}, {k}) subsets at μ = {mu}")));
        }
        let r = enumerate_size(lattice, &weights, k)?;
        total += r.instances_evaluated;
        let e = r.best_energy + penalty;
        let better = match &best {
            None => true,
            Some((be, bs)) => e < *be || (e == *be && r.best_set.members() < bs.members()),
        };
        if better {
            best = Some((e, r.best_set));
        }
    }
    let (best_energy, best_set) = best.expect("at least one size");
    Ok(OracleResult { best_set, best_energy, instances_evaluated: total })
}

/// `P_s(E)` as the literal double sum over `E × (window ∖ E)` plus the
/// exterior tails, each weight obtained from [`cell_weight`].
pub fn direct_ps(set: &GridSet, params: &KernelParams) -> Result<f64> {
    let lattice = set.lattice();
    check_params(lattice, params)?;
    let inside = set.len();
    let outside = lattice.len() - inside;
    if inside.saturating_mul(outside) > DIRECT_GUARD {
        return Err(Error::GuardExceeded(format!("{inside} × {outside} cell pairs")));
    }
    direct_cross_sum(set, &set.complement(), params).and_then(|cross| {
        let single = cell_self_perimeter(params)?;
        let mut tails = 0.0;
        let dim = lattice.dim();
        for i in set.iter() {
            let ci = lattice.coord(i);
            let mut window = 0.0;
            for j in 0..lattice.len() {
                if j != i {
                    let cj = lattice.coord(j);
                    let d: Vec<i64> = (0..dim).map(|k| ci[k] - cj[k]).collect();
                    window += cell_weight(params, &d)?;
                }
            }
            tails += single - window;
        }
        Ok(cross + tails)
    })
}

/// `Σ_{i∈A} Σ_{j∈B} W(i-j)` by direct loops.
pub fn direct_cross_sum(a: &GridSet, b: &GridSet, params: &KernelParams) -> Result<f64> {
    a.check_same_lattice(b)?;
    let lattice = a.lattice();
    let dim = lattice.dim();
    let mut total = 0.0;
    for i in a.iter() {
        let ci = lattice.coord(i);
        for j in b.iter() {
            let cj = lattice.coord(j);
            let d: Vec<i64> = (0..dim).map(|k| ci[k] - cj[k]).collect();
            total += cell_weight(params, &d)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelTable;
    use crate::perimeter::ps;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(n: usize) -> (Lattice, KernelParams) {
        let lat = Lattice::cube(2, 1.0 / n as f64, n, 0.0).unwrap();
        let p = KernelParams::for_lattice(&lat, 0.5).unwrap();
        (lat, p)
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn trivial_sizes() {
        let (lat, p) = window(3);
        let g = Potential::constant(2, 0.7).unwrap();
        let empty = enumerate_min(&lat, &p, &g, 0).unwrap();
        assert!(empty.best_set.is_empty());
        assert_eq!(empty.best_energy, 0.0);
        let full = enumerate_min(&lat, &p, &g, 9).unwrap();
        assert!(full.best_set.is_full());
        let expected = direct_ps(&GridSet::full(&lat), &p).unwrap() - 0.7 * lat.window_volume();
        assert!((full.best_energy - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn four_cells_on_four_by_four_form_a_block() {
        let (lat, p) = window(4);
        let g = Potential::constant(2, 0.0).unwrap();
        let r = enumerate_min(&lat, &p, &g, 4).unwrap();
        assert_eq!(r.instances_evaluated, 1820);
        let cells = r.best_set.cells();
        let (x0, y0) = (cells[0][0], cells[0][1]);
        let block: Vec<[i64; 3]> = vec![[x0, y0, 0], [x0, y0 + 1, 0], [x0 + 1, y0, 0], [x0 + 1, y0 + 1, 0]];
        assert_eq!(cells, block);
    }

    #[test]
    fn guards() {
        let (lat, p) = window(12);
        let g = Potential::constant(2, 0.0).unwrap();
        assert!(matches!(enumerate_min(&lat, &p, &g, 60), Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn direct_matches_table_perimeter() {
        let (lat, p) = window(8);
        let table = KernelTable::new(p.clone(), &lat).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let e = GridSet::from_flat(&lat, (0..lat.len()).filter(|_| rng.gen_bool(0.4))).unwrap();
            let a = direct_ps(&e, &p).unwrap();
            let b = ps(&e, &table).unwrap().total;
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
        }
        assert_eq!(direct_ps(&GridSet::empty(&lat), &p).unwrap(), 0.0);
    }

    #[test]
    fn complement_cross_sums_are_symmetric() {
        let (lat, p) = window(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = GridSet::from_flat(&lat, (0..lat.len()).filter(|_| rng.gen_bool(0.5))).unwrap();
        let a = direct_cross_sum(&e, &e.complement(), &p).unwrap();
        let b = direct_cross_sum(&e.complement(), &e, &p).unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn penalized_with_large_mu_hits_the_volume() {
        let (lat, p) = window(4);
        let g = Potential::constant(2, 1.0).unwrap();
        let constrained = enumerate_min(&lat, &p, &g, 5).unwrap();
        let penalized = enumerate_penalized(&lat, &p, &g, 5, 1e4).unwrap();
        assert_eq!(penalized.best_set.len(), 5);
        assert_eq!(penalized.best_energy, constrained.best_energy);
    }
}
