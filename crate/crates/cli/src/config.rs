//! Experiment configuration.
//!
//! A TOML file with one section per module. Values are resolved in the
//! order defaults < file < positional `section.key=value` overrides < named flags.

use std::path::{Path, PathBuf};

use fracperim::curvature::{CurvatureOptions, Normalization};
use fracperim::kernel::{KernelParams, KernelTable};
use fracperim::lattice::{GridSet, Lattice};
use fracperim::minimizer::{Init, MinimizeConfig, Mode};
use fracperim::potential::{read_sampled, PeriodicTerm, Potential, PotentialKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub kernel: KernelSection,
    pub lattice: LatticeSection,
    pub potential: PotentialSection,
    pub minimize: MinimizeSection,
    pub identity: IdentitySection,
    pub isoperimetric: IsoperimetricSection,
    pub small_volume: SmallVolumeSection,
    pub scaling: ScalingSection,
    pub mu: MuSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    /// Emit SVG figures next to the tables.
    pub plot: bool,
    /// Record wall-clock times; off by default so artifacts are reproducible.
    pub timing: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { name: None, seed: 0, out: PathBuf::from("out"), plot: true, timing: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub s: f64,
    pub near_field_radius: usize,
    pub subdivision_depth: usize,
    /// Defaults to four window diameters.
    pub far_radius: Option<f64>,
    /// Directory for the binary weight-table cache.
    pub cache_dir: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { s: 0.5, near_field_radius: 3, subdivision_depth: 4, far_radius: None, cache_dir: None }
    }
}

impl KernelSection {
    pub fn params(&self, lattice: &Lattice) -> Result<KernelParams> {
        self.params_with_s(lattice, self.s)
    }

    pub fn params_with_s(&self, lattice: &Lattice, s: f64) -> Result<KernelParams> {
        let base = match self.far_radius {
            Some(r) => KernelParams::new(lattice.dim(), s, lattice.h(), r)?,
            None => KernelParams::for_lattice(lattice, s)?,
        };
        Ok(base.with_near_field_radius(self.near_field_radius)?.with_subdivision_depth(self.subdivision_depth)?)
    }

    pub fn table(&self, lattice: &Lattice, s: f64) -> Result<KernelTable> {
        let params = self.params_with_s(lattice, s)?;
        Ok(match &self.cache_dir {
            Some(dir) => KernelTable::with_cache(params, lattice, dir)?,
            None => KernelTable::new(params, lattice)?,
        })
    }
}

/// A window of `cells` per axis (or explicit `extents`) with cell side `h`.
/// Without an origin the window is centered on zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub dim: usize,
    pub cells: usize,
    pub extents: Option<Vec<usize>>,
    pub h: f64,
    pub origin: Option<Vec<f64>>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { dim: 2, cells: 64, extents: None, h: 1.0 / 32.0, origin: None }
    }
}

impl LatticeSection {
    pub fn build(&self) -> Result<Lattice> {
        let extents = self.extents.clone().unwrap_or_else(|| vec![self.cells; self.dim]);
        if extents.len() != self.dim {
            return Err(CliError::Config(format!(
                "lattice.extents has {} entries for dim {}",
                extents.len(),
                self.dim
            )));
        }
        let origin = match &self.origin {
            Some(o) => o.clone(),
            None => extents.iter().map(|&n| -(n as f64) * self.h / 2.0).collect(),
        };
        Ok(Lattice::new(self.dim, self.h, &extents, &origin)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialClass {
    Constant,
    Periodic,
    Coercive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: PotentialClass,
    /// Constant value.
    pub value: f64,
    pub terms: Vec<PeriodicTerm>,
    /// Coercive `-a |x - center|² + b`.
    pub a: f64,
    pub center: Option<Vec<f64>>,
    pub b: f64,
    pub file: Option<PathBuf>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection {
            kind: PotentialClass::Constant,
            value: 0.0,
            terms: Vec::new(),
            a: 1.0,
            center: None,
            b: 0.0,
            file: None,
        }
    }
}

impl PotentialSection {
    pub fn constant(value: f64) -> Self {
        PotentialSection { kind: PotentialClass::Constant, value, ..Default::default() }
    }

    pub fn periodic(terms: Vec<PeriodicTerm>) -> Self {
        PotentialSection { kind: PotentialClass::Periodic, terms, ..Default::default() }
    }

    pub fn build(&self, dim: usize) -> Result<Potential> {
        let kind = match self.kind {
            PotentialClass::Constant => PotentialKind::Constant { value: self.value },
            PotentialClass::Periodic => PotentialKind::Periodic { terms: self.terms.clone() },
            PotentialClass::Coercive => PotentialKind::Coercive {
                a: self.a,
                center: self.center.clone().unwrap_or_else(|| vec![0.0; dim]),
                b: self.b,
            },
            PotentialClass::Sampled => {
                let path = self
                    .file
                    .as_ref()
                    .ok_or_else(|| CliError::Config("potential.file is required for sampled potentials".into()))?;
                return Ok(Potential::sampled(read_sampled(path)?)?);
            }
        };
        Ok(Potential::new(dim, kind)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Ball,
    Random,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeSection {
    pub mode: Mode,
    /// Target volume in cells; `volume` takes precedence when set.
    pub cells: usize,
    pub volume: Option<f64>,
    pub mu: Option<f64>,
    pub max_iters: usize,
    pub restarts: usize,
    pub init: InitKind,
    pub init_center: Option<Vec<f64>>,
    /// JSON set record used by `init = "file"`.
    pub init_file: Option<PathBuf>,
    pub cooling: f64,
    pub initial_temperature: Option<f64>,
    pub anneal_sweeps: usize,
    pub mu_doublings: usize,
    pub tolerance: f64,
}

impl Default for MinimizeSection {
    fn default() -> Self {
        let d = MinimizeConfig::new(Mode::ConstrainedExchange, 0.0);
        MinimizeSection {
            mode: d.mode,
            cells: 300,
            volume: None,
            mu: d.mu,
            max_iters: d.max_iters,
            restarts: d.restarts,
            init: InitKind::Ball,
            init_center: None,
            init_file: None,
            cooling: d.cooling,
            initial_temperature: d.initial_temperature,
            anneal_sweeps: d.anneal_sweeps,
            mu_doublings: d.mu_doublings,
            tolerance: d.tolerance,
        }
    }
}

impl MinimizeSection {
    pub fn config(&self, lattice: &Lattice, seed: u64) -> Result<MinimizeConfig> {
        let volume = self.volume.unwrap_or(self.cells as f64 * lattice.cell_volume());
        let mut cfg = MinimizeConfig::new(self.mode, volume);
        cfg.mu = self.mu;
        cfg.max_iters = self.max_iters;
        cfg.seed = seed;
        cfg.restarts = self.restarts;
        cfg.init = match self.init {
            InitKind::Ball => Init::BallAt(self.init_center.clone()),
            InitKind::Random => Init::RandomCells,
            InitKind::File => {
                let path = self
                    .init_file
                    .as_ref()
                    .ok_or_else(|| CliError::Config("minimize.init_file is required for init = \"file\"".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let set = GridSet::from_json(&text)?;
                Init::Given(set.relabel(lattice)?)
            }
        };
        cfg.cooling = self.cooling;
        cfg.initial_temperature = self.initial_temperature;
        cfg.anneal_sweeps = self.anneal_sweeps;
        cfg.mu_doublings = self.mu_doublings;
        cfg.tolerance = self.tolerance;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    /// Random set pairs per grid and exponent.
    pub pairs: usize,
    /// Cells per axis of the unit-square grids.
    pub grids: Vec<usize>,
    pub s_values: Vec<f64>,
    pub tolerance: f64,
}

impl Default for IdentitySection {
    fn default() -> Self {
        IdentitySection { pairs: 50, grids: vec![16], s_values: vec![0.5], tolerance: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsoperimetricSection {
    pub s_values: Vec<f64>,
    pub shapes: Vec<String>,
    /// Common cell count; by default the largest perfect power for which
    /// every shape fits the window with a one-cell margin.
    pub cells: Option<usize>,
    /// Required `(ps(shape) - ps(disk)) / ps(disk)` for every other shape.
    pub min_relative_deficit: f64,
}

impl Default for IsoperimetricSection {
    fn default() -> Self {
        IsoperimetricSection {
            s_values: vec![0.3, 0.5, 0.7],
            shapes: ["disk", "square", "rectangle", "plus"].map(String::from).to_vec(),
            cells: None,
            min_relative_deficit: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallVolumeSection {
    pub eps: Vec<f64>,
    /// Cells per unit length after rescaling by `1/ε`.
    pub cells_per_unit: usize,
    /// Free space around one period cell, in units of `ε`.
    pub margin: f64,
    /// Required fitted log-log slope is `s - slope_allowance`.
    pub slope_allowance: f64,
    /// Allowed increases of the asymmetry as `ε` decreases.
    pub inversions: usize,
}

impl Default for SmallVolumeSection {
    fn default() -> Self {
        SmallVolumeSection {
            eps: vec![0.5, 0.35, 0.25, 0.18, 0.125],
            cells_per_unit: 16,
            margin: 2.0,
            slope_allowance: 0.2,
            inversions: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    /// Positive integer dilation factors.
    pub lambdas: Vec<u32>,
    pub shapes: Vec<String>,
    /// Shape size as a fraction of the window half-width.
    pub size: f64,
    pub tolerance: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection { lambdas: vec![2, 3], shapes: vec!["disk".into(), "square".into()], size: 0.5, tolerance: 0.03 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuSection {
    /// `minimizer`, a named shape, `slab`, or `file`.
    pub shape: String,
    /// Radius (half-side) of a named shape, in length units.
    pub radius: f64,
    pub file: Option<PathBuf>,
    pub max_spread: f64,
    pub smoothing_cells: f64,
    pub normalization: Normalization,
}

impl Default for MuSection {
    fn default() -> Self {
        let opts = CurvatureOptions::default();
        MuSection {
            shape: "minimizer".into(),
            radius: 0.5,
            file: None,
            max_spread: 0.2,
            smoothing_cells: opts.smoothing_cells,
            normalization: opts.normalization,
        }
    }
}

impl MuSection {
    pub fn options(&self) -> CurvatureOptions {
        CurvatureOptions { normalization: self.normalization, smoothing_cells: self.smoothing_cells }
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any) and applies `section.key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|source| CliError::ConfigFile { path: p.to_path_buf(), source })?;
                text.parse::<toml::Table>()?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        Ok(toml::Value::Table(table).try_into()?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (path, raw) =
        item.split_once('=').ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key {path:?}")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("non-empty key");
    let mut cur = table;
    for key in parents {
        let entry = cur.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {path:?} descends into a non-table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// A TOML literal when it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[kernel]\ns = 0.3\n[minimize]\nmode = \"threshold-dynamics\"\n").unwrap();
        let cfg = ExperimentConfig::load(Some(&path), &[]).unwrap();
        assert_eq!(cfg.kernel.s, 0.3);
        assert_eq!(cfg.minimize.mode, Mode::ThresholdDynamics);
        let cfg = ExperimentConfig::load(
            Some(&path),
            &["kernel.s=0.7".into(), "identity.grids=[8, 32]".into(), "mu.shape=disk".into()],
        )
        .unwrap();
        assert_eq!(cfg.kernel.s, 0.7);
        assert_eq!(cfg.identity.grids, vec![8, 32]);
        assert_eq!(cfg.mu.shape, "disk");
        assert_eq!(cfg.lattice, LatticeSection::default());
    }

    #[test]
    fn unknown_keys_and_bad_overrides_are_rejected() {
        assert!(ExperimentConfig::load(None, &["kernel.q=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["kernel".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["kernel.s.x=1".into()]).is_err());
        let err = ExperimentConfig::load(Some(Path::new("/nonexistent/c.toml")), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn lattice_defaults_to_a_centered_window() {
        let l = LatticeSection::default().build().unwrap();
        assert_eq!(l.extents(), &[64, 64]);
        assert_eq!(l.origin(), &[-1.0, -1.0]);
        let bad = LatticeSection { extents: Some(vec![4]), ..Default::default() };
        assert!(bad.build().is_err());
    }

    #[test]
    fn potential_sections_build() {
        let p = PotentialSection { kind: PotentialClass::Coercive, ..Default::default() }.build(2).unwrap();
        assert_eq!(p.eval(&[3.0, 0.0]).unwrap(), -9.0);
        assert!(PotentialSection { kind: PotentialClass::Sampled, ..Default::default() }.build(2).is_err());
    }
}
