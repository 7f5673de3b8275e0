use super::{Ball, Coord, GridSet, Lattice};
use crate::error::{Error, Result};

/// `|E| = count * h^N`.
pub fn volume(set: &GridSet) -> f64 {
    set.volume()
}

/// `|A Δ B|`.
pub fn symdiff_volume(a: &GridSet, b: &GridSet) -> Result<f64> {
    a.check_same_lattice(b)?;
    let differing = a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count();
    Ok(differing as f64 * a.lattice().cell_volume())
}

fn strictly_inside(lattice: &Lattice, ball: &Ball, c: &Coord) -> bool {
    let x = lattice.center(c);
    let d2: f64 = (0..lattice.dim()).map(|k| (x[k] - ball.center[k]).powi(2)).sum();
    d2 < ball.radius * ball.radius
}

/// One run of ball cells along the last axis: (row coordinates, first, last).
type Segment = (Coord, i64, i64);

fn axis_range(lattice: &Lattice, ball: &Ball, k: usize, clamp: bool) -> (i64, i64) {
    let h = lattice.h();
    let o = lattice.origin()[k];
    let mut lo = ((ball.center[k] - ball.radius - o) / h - 0.5).floor() as i64 - 1;
    let mut hi = ((ball.center[k] + ball.radius - o) / h - 0.5).ceil() as i64 + 1;
    if clamp {
        lo = lo.max(0);
        hi = hi.min(lattice.extents()[k] as i64 - 1);
    }
    (lo, hi)
}

/// Runs of cells whose centers lie strictly inside the ball. With `clamp`
/// the runs are cut to the window; without it they describe the whole ball.
fn ball_segments(lattice: &Lattice, ball: &Ball, clamp: bool) -> Vec<Segment> {
    let dim = lattice.dim();
    let last = dim - 1;
    let mut ranges = [(0i64, 0i64); 3];
    for (k, r) in ranges.iter_mut().enumerate().take(dim) {
        *r = axis_range(lattice, ball, k, clamp);
    }
    let mut out = Vec::new();
    let lead0 = if dim >= 2 { ranges[0] } else { (0, 0) };
    let lead1 = if dim >= 3 { ranges[1] } else { (0, 0) };
    for a in lead0.0..=lead0.1 {
        for b in lead1.0..=lead1.1 {
            let mut row = [0i64; 3];
            if dim >= 2 {
                row[0] = a;
            }
            if dim >= 3 {
                row[1] = b;
            }
            let mut first = None;
            let mut end = 0;
            for t in ranges[last].0..=ranges[last].1 {
                let mut c = row;
                c[last] = t;
                if strictly_inside(lattice, ball, &c) {
                    first.get_or_insert(t);
                    end = t;
                }
            }
            if let Some(f) = first {
                out.push((row, f, end));
            }
        }
    }
    out
}

/// Cells whose physical center lies strictly inside the ball.
pub fn rasterize_ball(lattice: &Lattice, ball: &Ball) -> GridSet {
    let mut set = GridSet::empty(lattice);
    let last = lattice.dim() - 1;
    for (row, lo, hi) in ball_segments(lattice, ball, true) {
        for t in lo..=hi {
            let mut c = row;
            c[last] = t;
            if let Some(i) = lattice.flat(&c) {
                set.insert(i);
            }
        }
    }
    set
}

/// The `k` window cells whose centers are nearest to `center`, ties broken
/// lexicographically. A ball-like set with an exact cell count.
pub fn ball_of_cells(lattice: &Lattice, center: &[f64], k: usize) -> Result<GridSet> {
    if k > lattice.len() {
        return Err(Error::InvalidParameter(format!("{k} cells requested from a window of {}", lattice.len())));
    }
    let mut order: Vec<(f64, usize)> = (0..lattice.len())
        .map(|i| {
            let x = lattice.center_of(i);
            let d2: f64 = (0..lattice.dim()).map(|a| (x[a] - center[a]).powi(2)).sum();
            (d2, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    GridSet::from_flat(lattice, order.into_iter().take(k).map(|(_, i)| i))
}

/// Result of the translation search for the asymmetry `min_x |E Δ B(x,r)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct Asymmetry {
    pub value: f64,
    pub center: [f64; 3],
}

/// Row-wise prefix counts of a set for O(1) run intersections.
struct RowPrefix {
    width: usize,
    counts: Vec<u32>,
}

impl RowPrefix {
    fn new(set: &GridSet) -> Self {
        let width = set.lattice().extents3()[set.lattice().dim() - 1];
        let rows = set.lattice().len() / width;
        let mut counts = vec![0u32; rows * (width + 1)];
        for r in 0..rows {
            let mut acc = 0;
            for t in 0..width {
                if set.contains_flat(r * width + t) {
                    acc += 1;
                }
                counts[r * (width + 1) + t + 1] = acc;
            }
        }
        RowPrefix { width, counts }
    }

    /// Members in cells `lo..=hi` of the row starting at flat index `row_start`.
    fn run(&self, row_start: usize, lo: usize, hi: usize) -> u32 {
        let r = row_start / self.width;
        let base = r * (self.width + 1);
        self.counts[base + hi + 1] - self.counts[base + lo]
    }
}

fn row_start(lattice: &Lattice, row: &Coord) -> Option<usize> {
    lattice.flat(row)
}

/// Cell counts (|B|, |E ∩ B|) for a ball given by clamped segments.
fn overlap(lattice: &Lattice, prefix: &RowPrefix, segs: &[Segment]) -> (usize, usize) {
    let mut ball = 0usize;
    let mut both = 0usize;
    for (row, lo, hi) in segs {
        if let Some(start) = row_start(lattice, row) {
            ball += (hi - lo + 1) as usize;
            both += prefix.run(start, *lo as usize, *hi as usize) as usize;
        }
    }
    (ball, both)
}

/// Minimum of `|E Δ B(x, r)|` over ball centers `x` at every cell center whose
/// ball stays inside the window, refined on an `h/4` sub-grid around the best
/// integer shift. Values are upper bounds on the continuum asymmetry.
pub fn best_translate_asymmetry(set: &GridSet, radius: f64) -> Result<Asymmetry> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let lattice = set.lattice();
    let dim = lattice.dim();
    let last = dim - 1;
    let prefix = RowPrefix::new(set);
    let n_e = set.len();

    // Stencil of a ball centred on a cell center, relative to that cell.
    let probe = Ball::new(&lattice.center(&[0, 0, 0])[..dim], radius)?;
    let stencil = ball_segments(lattice, &probe, false);
    let stencil_size: usize = stencil.iter().map(|(_, lo, hi)| (hi - lo + 1) as usize).sum();
    let mut min_off = [0i64; 3];
    let mut max_off = [0i64; 3];
    for (row, lo, hi) in &stencil {
        for k in 0..last {
            min_off[k] = min_off[k].min(row[k]);
            max_off[k] = max_off[k].max(row[k]);
        }
        min_off[last] = min_off[last].min(*lo);
        max_off[last] = max_off[last].max(*hi);
    }
    let ext = lattice.extents3();
    let fits = |c: &Coord| (0..dim).all(|k| c[k] + min_off[k] >= 0 && c[k] + max_off[k] < ext[k] as i64);

    let mut best: Option<(usize, Coord)> = None;
    let any_fits = (0..lattice.len()).any(|i| fits(&lattice.coord(i)));
    for i in 0..lattice.len() {
        let c = lattice.coord(i);
        let value = if fits(&c) {
            let mut both = 0usize;
            for (row, lo, hi) in &stencil {
                let mut r = [row[0] + c[0], row[1] + c[1], row[2] + c[2]];
                r[last] = 0;
                if dim == 1 {
                    r = [0, 0, 0];
                }
                let start = lattice.flat(&r).expect("stencil row inside window");
                both += prefix.run(start, (lo + c[last]) as usize, (hi + c[last]) as usize) as usize;
            }
            n_e + stencil_size - 2 * both
        } else if !any_fits {
            let ball = Ball::new(&lattice.center(&c)[..dim], radius)?;
            let (nb, both) = overlap(lattice, &prefix, &ball_segments(lattice, &ball, true));
            n_e + nb - 2 * both
        } else {
            continue;
        };
        if best.is_none_or(|(v, _)| value < v) {
            best = Some((value, c));
        }
    }
    let (_, best_cell) = best.expect("at least one candidate center");

    // Sub-cell refinement with exact rasterization of each shifted ball.
    let base = lattice.center(&best_cell);
    let h = lattice.h();
    let mut best_value = usize::MAX;
    let mut best_center = base;
    let steps: Vec<f64> = (-3..=3).map(|q| q as f64 * h / 4.0).collect();
    let mut idx = [0usize; 3];
    let total = 7usize.pow(dim as u32);
    // Visit the unshifted center first so exact balls are recognised.
    let order = std::iter::once(None).chain((0..total).map(Some));
    for o in order {
        let mut x = base;
        if let Some(mut q) = o {
            for k in 0..dim {
                idx[k] = q % 7;
                q /= 7;
                x[k] = base[k] + steps[idx[k]];
            }
        }
        let ball = Ball::new(&x[..dim], radius)?;
        let clamped = ball_segments(lattice, &ball, true);
        let (nb, both) = overlap(lattice, &prefix, &clamped);
        if any_fits {
            let whole: usize =
                ball_segments(lattice, &ball, false).iter().map(|(_, lo, hi)| (hi - lo + 1) as usize).sum();
            if whole != nb {
                continue;
            }
        }
        let value = n_e + nb - 2 * both;
        if value < best_value {
            best_value = value;
            best_center = x;
        }
    }
    Ok(Asymmetry { value: best_value as f64 * lattice.cell_volume(), center: best_center })
}

/// `f(r) = |E \ B(center, r)|` sampled at `r = k h` until it vanishes and the
/// radius has swept the whole window.
pub fn tail_mass_profile(set: &GridSet, center: &[f64]) -> Vec<(f64, f64)> {
    let lattice = set.lattice();
    let dim = lattice.dim();
    let h = lattice.h();
    let dist = |i: usize| {
        let x = lattice.center_of(i);
        (0..dim).map(|k| (x[k] - center[k]).powi(2)).sum::<f64>().sqrt()
    };
    let mut members: Vec<f64> = set.iter().map(dist).collect();
    members.sort_by(f64::total_cmp);
    let reach = (0..lattice.len()).map(dist).fold(0.0, f64::max);
    let kmax = (reach / h).ceil() as usize + 1;
    let cell = lattice.cell_volume();
    let mut out = Vec::with_capacity(kmax + 1);
    let mut inside = 0usize;
    for k in 0..=kmax {
        let r = k as f64 * h;
        while inside < members.len() && members[inside] < r {
            inside += 1;
        }
        out.push((r, (members.len() - inside) as f64 * cell));
    }
    out
}
