//! One module per subcommand. Each exposes a `compute` step returning plain
//! rows and a `run` step that writes artifacts and judges the property.

pub mod identity;
pub mod isoperimetric;
pub mod minimize;
pub mod mu;
pub mod scaling;
pub mod small_volume;

use fracperim::lattice::{GridSet, Lattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Verdict of a subcommand plus the lines it reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub command: &'static str,
    pub passed: bool,
    pub messages: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Each cell independently with probability `p`.
pub(crate) fn random_set<R: Rng>(lattice: &Lattice, p: f64, rng: &mut R) -> GridSet {
    let members: Vec<usize> = (0..lattice.len()).filter(|_| rng.gen_bool(p)).collect();
    GridSet::from_flat(lattice, members).expect("indices inside the window")
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Least-squares slope of `ln y` against `ln x` over points with both positive.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}
