//! Unit-cell quadratures for the Riesz kernel `|z|^{-(N+s)}`.
//!
//! Everything here works with cells of side 1; callers rescale by the
//! homogeneity of the kernel (`h^{N-s}` for cell pairs, `h^{-s}` for
//! point-to-cell integrals).

use std::collections::HashMap;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Sorted absolute values: the representative of an offset under the
/// hyperoctahedral group (sign flips and axis permutations).
pub fn canonical(d: &[i64; 3], dim: usize) -> [i64; 3] {
    let mut c = [0i64; 3];
    for k in 0..dim {
        c[k] = d[k].abs();
    }
    c[..dim].sort_unstable();
    c
}

fn sup_norm(d: &[i64; 3]) -> i64 {
    d.iter().map(|v| v.abs()).max().unwrap_or(0)
}

/// `∫_{R^N \ box} |y|^{-(N+q)} dy` for the box `Π[-a_k, a_k]` centred at the origin.
///
/// Polar coordinates reduce this to a sum over faces of
/// `(2 a_k / q) ∫_face (a_k² + |u|²)^{-(N+q)/2} du`.
pub fn box_exterior_integral(half_widths: &[f64], q: f64) -> f64 {
    let dim = half_widths.len();
    let p = dim as f64 + q;
    let (nodes, weights) = gauss_legendre(40);
    let mut total = 0.0;
    for k in 0..dim {
        let ak = half_widths[k];
        let others: Vec<f64> = (0..dim).filter(|&l| l != k).map(|l| half_widths[l]).collect();
        // Tensor rule over [0, a_l] on every face axis, doubled by symmetry.
        let face = match others.len() {
            0 => ak.powf(-p),
            1 => {
                let a = others[0];
                let mut acc = 0.0;
                for (x, w) in nodes.iter().zip(&weights) {
                    let u = a * (x + 1.0) / 2.0;
                    acc += w * a / 2.0 * (ak * ak + u * u).powf(-p / 2.0);
                }
                2.0 * acc
            }
            _ => {
                let (a, b) = (others[0], others[1]);
                let mut acc = 0.0;
                for (x, wx) in nodes.iter().zip(&weights) {
                    let u = a * (x + 1.0) / 2.0;
                    for (y, wy) in nodes.iter().zip(&weights) {
                        let v = b * (y + 1.0) / 2.0;
                        acc += wx * wy * a * b / 4.0 * (ak * ak + u * u + v * v).powf(-p / 2.0);
                    }
                }
                4.0 * acc
            }
        };
        total += 2.0 * ak / q * face;
    }
    total
}

/// Cell–cell interaction weights for unit cells.
///
/// Separated pairs (`|d|_∞ ≥ 2`) are subdivided dyadically down to `depth`
/// levels; each leaf pair is integrated exactly in its difference variable
/// (tent weight `Π(1-|t_k|)`) with three-point Gauss–Legendre on each half axis.
/// Touching pairs are closed by self-similarity: the touching children of a
/// touching pair are scaled copies of touching pairs, which yields a small
/// triangular linear system instead of a singular quadrature.
#[derive(Clone, Debug)]
pub struct PairQuadrature {
    dim: usize,
    s: f64,
    depth: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    memo: HashMap<(usize, [i64; 3]), f64>,
    touching: Vec<f64>,
}

impl PairQuadrature {
    pub fn new(dim: usize, s: f64, depth: usize) -> Self {
        let (nodes, weights) = gauss_legendre(3);
        let mut q = PairQuadrature { dim, s, depth, nodes, weights, memo: HashMap::new(), touching: Vec::new() };
        q.touching = q.solve_touching();
        q
    }

    fn exponent(&self) -> f64 {
        self.dim as f64 + self.s
    }

    /// `2^{-(N-s)}`: scale factor from half-size children to unit cells.
    fn child_scale(&self) -> f64 {
        (2.0f64).powf(-(self.dim as f64 - self.s))
    }

    fn leaf(&self, d: &[i64; 3]) -> f64 {
        let dim = self.dim;
        let p = self.exponent();
        let q = self.nodes.len();
        let mut total = 0.0;
        for half in 0..(1usize << dim) {
            let mut idx = [0usize; 3];
            loop {
                let mut r2 = 0.0;
                let mut w = 1.0;
                for k in 0..dim {
                    let sign = if half >> k & 1 == 1 { 1.0 } else { -1.0 };
                    let t = sign * (self.nodes[idx[k]] + 1.0) / 2.0;
                    w *= self.weights[idx[k]] / 2.0 * (1.0 - t.abs());
                    let z = d[k] as f64 + t;
                    r2 += z * z;
                }
                total += w * r2.powf(-p / 2.0);
                let mut k = 0;
                while k < dim {
                    idx[k] += 1;
                    if idx[k] < q {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == dim {
                    break;
                }
            }
        }
        total
    }

    /// Offsets `e ∈ {-1,0,1}^N` with multiplicity `Π(2 - |e_k|)`: the child
    /// pair offsets `2d + e` produced by halving both cells.
    fn child_offsets(&self) -> Vec<([i64; 3], f64)> {
        let dim = self.dim;
        let mut out = Vec::new();
        for code in 0..3usize.pow(dim as u32) {
            let mut e = [0i64; 3];
            let mut c = code;
            let mut mult = 1.0;
            for ek in e.iter_mut().take(dim) {
                *ek = (c % 3) as i64 - 1;
                c /= 3;
                mult *= (2 - ek.abs()) as f64;
            }
            out.push((e, mult));
        }
        out
    }

    fn separated(&mut self, level: usize, d: &[i64; 3]) -> f64 {
        let key = (self.depth.saturating_sub(level), canonical(d, self.dim));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let d = key.1;
        let value = if level >= self.depth {
            self.leaf(&d)
        } else {
            let scale = self.child_scale();
            let mut acc = 0.0;
            for (e, mult) in self.child_offsets() {
                let child = [2 * d[0] + e[0], 2 * d[1] + e[1], 2 * d[2] + e[2]];
                acc += mult * self.separated(level + 1, &child);
            }
            scale * acc
        };
        self.memo.insert(key, value);
        value
    }

    /// Weights of touching pairs indexed by the number of nonzero offset
    /// components minus one (face, edge, corner).
    fn solve_touching(&mut self) -> Vec<f64> {
        let dim = self.dim;
        let scale = self.child_scale();
        let mut u = vec![0.0; dim];
        for c in (1..=dim).rev() {
            let mut parent = [0i64; 3];
            for v in parent.iter_mut().take(c) {
                *v = 1;
            }
            let mut diag = 0.0;
            let mut rhs = 0.0;
            for (e, mult) in self.child_offsets() {
                let child = [2 * parent[0] + e[0], 2 * parent[1] + e[1], 2 * parent[2] + e[2]];
                if sup_norm(&child) >= 2 {
                    rhs += scale * mult * self.separated(1, &child);
                } else {
                    let nz = child[..dim].iter().filter(|&&v| v != 0).count();
                    debug_assert!(nz >= c);
                    if nz == c {
                        diag += scale * mult;
                    } else {
                        rhs += scale * mult * u[nz - 1];
                    }
                }
            }
            u[c - 1] = rhs / (1.0 - diag);
        }
        u
    }

    /// `∫_{[0,1]^N} ∫_{d+[0,1]^N} |x-y|^{-(N+s)} dy dx` for `d ≠ 0`.
    pub fn weight(&mut self, d: &[i64; 3]) -> f64 {
        match sup_norm(d) {
            0 => f64::INFINITY,
            1 => {
                let nz = d[..self.dim].iter().filter(|&&v| v != 0).count();
                self.touching[nz - 1]
            }
            _ => self.separated(0, d),
        }
    }
}

/// Far-field pair weight for unit cells: midpoint value with the second-order
/// moment correction `1 + p(p+2-N)/(12|d|²)`.
pub fn far_pair_weight(dim: usize, s: f64, d: &[i64; 3]) -> f64 {
    let p = dim as f64 + s;
    let r2: f64 = d[..dim].iter().map(|&v| (v * v) as f64).sum();
    r2.powf(-p / 2.0) * (1.0 + p * (p + 2.0 - dim as f64) / (12.0 * r2))
}

/// Far-field point–cell weight for a unit cell whose center sits at `c`
/// relative to the point.
pub fn far_point_weight(dim: usize, s: f64, c: &[f64]) -> f64 {
    let p = dim as f64 + s;
    let r2: f64 = c[..dim].iter().map(|v| v * v).sum();
    r2.powf(-p / 2.0) * (1.0 + p * (p + 2.0 - dim as f64) / (24.0 * r2))
}

/// Point–cell weights `∫_C |y|^{-(N+s)} dy` for unit cells whose center lies
/// at `c2 / 2` from the evaluation point (`c2` integer, half-cell units).
#[derive(Clone, Debug)]
pub struct PointQuadrature {
    dim: usize,
    s: f64,
    depth: usize,
    near_radius: i64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    memo: HashMap<(usize, [i64; 3]), f64>,
}

impl PointQuadrature {
    pub fn new(dim: usize, s: f64, depth: usize, near_radius: usize) -> Self {
        let (nodes, weights) = gauss_legendre(3);
        PointQuadrature { dim, s, depth, near_radius: near_radius as i64, nodes, weights, memo: HashMap::new() }
    }

    /// Gauss rule on a unit cell centred at `c`.
    fn leaf(&self, c: &[f64; 3]) -> f64 {
        leaf_point(self.dim, self.s, &self.nodes, &self.weights, c, 1.0)
    }

    fn near(&mut self, level: usize, c2: &[i64; 3]) -> f64 {
        let key = (self.depth.saturating_sub(level), canonical(c2, self.dim));
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let c2 = key.1;
        let value = if level >= self.depth {
            let c = [c2[0] as f64 / 2.0, c2[1] as f64 / 2.0, c2[2] as f64 / 2.0];
            self.leaf(&c)
        } else {
            let mut acc = 0.0;
            for signs in 0..(1usize << self.dim) {
                let mut child = [0i64; 3];
                for k in 0..self.dim {
                    child[k] = 2 * c2[k] + if signs >> k & 1 == 1 { 1 } else { -1 };
                }
                acc += self.near(level + 1, &child);
            }
            (2.0f64).powf(self.s) * acc
        };
        self.memo.insert(key, value);
        value
    }

    /// Returns `None` when the point lies in the closed cell.
    pub fn weight(&mut self, c2: &[i64; 3]) -> Option<f64> {
        let sup = sup_norm(c2);
        if sup <= 1 {
            return None;
        }
        if sup > 2 * self.near_radius {
            let c = [c2[0] as f64 / 2.0, c2[1] as f64 / 2.0, c2[2] as f64 / 2.0];
            return Some(far_point_weight(self.dim, self.s, &c));
        }
        Some(self.near(0, c2))
    }
}

/// Tensor Gauss rule for `∫_{cell} |y|^{-p} dy`, cell of side `size` centred at `c`.
pub(crate) fn leaf_point(dim: usize, s: f64, nodes: &[f64], weights: &[f64], c: &[f64; 3], size: f64) -> f64 {
    let p = dim as f64 + s;
    let q = nodes.len();
    let mut idx = [0usize; 3];
    let mut total = 0.0;
    loop {
        let mut r2 = 0.0;
        let mut w = 1.0;
        for k in 0..dim {
            let y = c[k] + nodes[idx[k]] * size / 2.0;
            r2 += y * y;
            w *= weights[idx[k]] * size / 2.0;
        }
        total += w * r2.powf(-p / 2.0);
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < q {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    total
}

/// Uniform dyadic subdivision of an arbitrary box to `depth` levels with a
/// Gauss rule on each leaf; `c` is the box center relative to the point.
pub(crate) fn subdivided_point(dim: usize, s: f64, depth: usize, c: &[f64; 3], size: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(3);
    fn rec(dim: usize, s: f64, level: usize, nodes: &[f64], weights: &[f64], c: &[f64; 3], size: f64) -> f64 {
        if level == 0 {
            return leaf_point(dim, s, nodes, weights, c, size);
        }
        let mut acc = 0.0;
        for signs in 0..(1usize << dim) {
            let mut child = *c;
            for (k, ck) in child.iter_mut().enumerate().take(dim) {
                *ck += if signs >> k & 1 == 1 { size / 4.0 } else { -size / 4.0 };
            }
            acc += rec(dim, s, level - 1, nodes, weights, &child, size / 2.0);
        }
        acc
    }
    rec(dim, s, depth, &nodes, &weights, c, size)
}
