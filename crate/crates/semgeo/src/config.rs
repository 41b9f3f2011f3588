//! Run configuration: a TOML file with one section per command.
//!
//! Every field has a default, so an empty file (or no file) is a valid
//! configuration that runs each command on seeded synthetic data. Relative
//! input paths are resolved against the directory holding the config file;
//! the output directory is taken as given.

use std::path::{Path, PathBuf};

use semgeo_core::gap::{DEFAULT_FIT_MAX, DEFAULT_FIT_MIN, DEFAULT_GRID_MAX, DEFAULT_GRID_MIN, DEFAULT_GRID_POINTS};
use semgeo_core::intrinsic_dim::{DEFAULT_DISCARD_FRACTION, DEFAULT_MLE_K1, DEFAULT_MLE_K2};
use semgeo_core::synthetic::{ManifoldKind, SyntheticManifold, DEFAULT_LLOYD_ITERATIONS};
use semgeo_core::{MleNormalization, PointCloud, UnembeddingHead};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunConfig,
    pub dim: DimConfig,
    pub curvature: CurvatureConfig,
    pub gap: GapConfig,
    pub fisher: FisherConfig,
    pub spectral: SpectralConfig,
    pub validate: ValidateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub format: OutputFormat,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, workers: None, format: OutputFormat::Both, out: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Sphere,
    Cube,
    Torus,
    SwissRoll,
}

/// Seeded sample from a manifold with known dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    /// Radius, side or height, depending on `kind`.
    #[serde(default = "one")]
    pub scale: f64,
    /// Defaults to the run seed plus the source's position in its list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

impl SyntheticSpec {
    fn new(kind: SyntheticKind, k: usize, d: usize, n: usize) -> Self {
        Self { kind, k, d, n, scale: 1.0, seed: None }
    }

    fn manifold(&self, seed: u64) -> Result<SyntheticManifold> {
        let kind = match self.kind {
            SyntheticKind::Sphere => ManifoldKind::Sphere { radius: self.scale },
            SyntheticKind::Cube => ManifoldKind::Cube { side: self.scale },
            SyntheticKind::Torus => ManifoldKind::Torus { radius: self.scale },
            SyntheticKind::SwissRoll => ManifoldKind::SwissRoll { height: self.scale },
        };
        Ok(SyntheticManifold::new(kind, self.k, self.d, seed)?)
    }
}

/// A point cloud read from an `LSM1` file or drawn from a synthetic manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl CloudSource {
    pub fn synthetic(spec: SyntheticSpec, layer: Option<usize>) -> Self {
        Self { layer, path: None, synthetic: Some(spec) }
    }

    pub fn file(path: impl Into<PathBuf>, layer: Option<usize>) -> Self {
        Self { layer, path: Some(path.into()), synthetic: None }
    }

    fn check(&self, what: &str) -> Result<()> {
        match (&self.path, &self.synthetic) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::Config(format!("{what}: give exactly one of `path` or `synthetic`"))),
        }
    }

    /// Loads or samples the cloud. `slot` offsets the default synthetic seed.
    pub fn load(&self, run_seed: u64, slot: u64) -> Result<PointCloud> {
        let layer = self.layer.unwrap_or(0);
        if let Some(path) = &self.path {
            return format::load_cloud(path, Some(layer))
                .map_err(|source| Error::Input { path: path.clone(), source });
        }
        let spec = self.synthetic.as_ref().expect("checked at load time");
        let seed = spec.seed.unwrap_or(run_seed.wrapping_add(slot));
        Ok(spec.manifold(seed)?.sample(spec.n, seed)?.with_layer(layer))
    }

    /// Short label for reports.
    pub fn describe(&self) -> String {
        match (&self.path, &self.synthetic) {
            (Some(p), _) => p.display().to_string(),
            (_, Some(s)) => format!("synthetic:{}:k={}:d={}:n={}", kind_name(s.kind), s.k, s.d, s.n),
            _ => String::new(),
        }
    }
}

fn kind_name(kind: SyntheticKind) -> &'static str {
    match kind {
        SyntheticKind::Sphere => "sphere",
        SyntheticKind::Cube => "cube",
        SyntheticKind::Torus => "torus",
        SyntheticKind::SwissRoll => "swiss_roll",
    }
}

/// Equal-norm head whose rows are uniform on the sphere of radius `norm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSpec {
    pub vocab: usize,
    pub d: usize,
    #[serde(default = "one")]
    pub norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<HeadSpec>,
}

/// Slot used for synthetic head seeds, away from cloud slots.
const HEAD_SLOT: u64 = 1 << 32;

impl HeadSource {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self { path: Some(path.into()), synthetic: None }
    }

    fn check(&self, what: &str) -> Result<()> {
        match (&self.path, &self.synthetic) {
            (Some(_), None) | (None, Some(_)) => Ok(()),
            _ => Err(Error::Config(format!("{what}: give exactly one of `path` or `synthetic`"))),
        }
    }

    pub fn load(&self, run_seed: u64) -> Result<UnembeddingHead> {
        if let Some(path) = &self.path {
            return format::load_head(path).map_err(|source| Error::Input { path: path.clone(), source });
        }
        let spec = self.synthetic.as_ref().expect("checked at load time");
        if spec.d < 2 {
            return Err(Error::Config("synthetic head needs d >= 2".into()));
        }
        let seed = spec.seed.unwrap_or(run_seed.wrapping_add(HEAD_SLOT));
        let rows = SyntheticManifold::sphere(spec.d - 1, spec.norm, spec.d, seed)?.sample(spec.vocab, seed)?;
        Ok(UnembeddingHead::new(rows.into_points(), None)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    TwoNn,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Published,
    BiasCorrected,
}

impl From<Normalization> for MleNormalization {
    fn from(n: Normalization) -> Self {
        match n {
            Normalization::Published => MleNormalization::Published,
            Normalization::BiasCorrected => MleNormalization::BiasCorrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimConfig {
    pub estimators: Vec<EstimatorName>,
    pub discard_fraction: f64,
    pub k1: usize,
    pub k2: usize,
    pub normalization: Normalization,
    pub layers: Vec<CloudSource>,
}

impl Default for DimConfig {
    fn default() -> Self {
        // Hourglass: 2-, 5- and 2-dimensional cubes in 20 dimensions.
        let layers = [(2, 1), (5, 2), (2, 3)]
            .into_iter()
            .map(|(k, layer)| CloudSource::synthetic(SyntheticSpec::new(SyntheticKind::Cube, k, 20, 2000), Some(layer)))
            .collect();
        Self {
            estimators: vec![EstimatorName::TwoNn, EstimatorName::Mle],
            discard_fraction: DEFAULT_DISCARD_FRACTION,
            k1: DEFAULT_MLE_K1,
            k2: DEFAULT_MLE_K2,
            normalization: Normalization::Published,
            layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub cloud: CloudSource,
    /// Tangent dimension; estimated with TWO-NN when absent.
    pub intrinsic_k: Option<usize>,
    /// Defaults to `max(2k, 20)`.
    pub neighborhood_size: Option<usize>,
    pub tangent_neighbors: usize,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            cloud: CloudSource::synthetic(SyntheticSpec::new(SyntheticKind::Sphere, 2, 3, 2000), None),
            intrinsic_k: None,
            neighborhood_size: None,
            tangent_neighbors: semgeo_core::curvature::DEFAULT_TANGENT_NEIGHBORS,
        }
    }
}

fn default_head() -> HeadSource {
    HeadSource { path: None, synthetic: Some(HeadSpec { vocab: 64, d: 16, norm: 4.0, seed: None }) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub cloud: CloudSource,
    pub head: HeadSource,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub fit_min: f64,
    pub fit_max: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            cloud: CloudSource::synthetic(SyntheticSpec::new(SyntheticKind::Sphere, 15, 16, 5000), None),
            head: default_head(),
            grid_min: DEFAULT_GRID_MIN,
            grid_max: DEFAULT_GRID_MAX,
            grid_points: DEFAULT_GRID_POINTS,
            fit_min: DEFAULT_FIT_MIN,
            fit_max: DEFAULT_FIT_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisherConfig {
    pub cloud: CloudSource,
    pub head: HeadSource,
    /// Number of evenly spaced points to evaluate.
    pub points: usize,
    pub top_k: Option<usize>,
    /// Also report the metric restricted to the local tangent space.
    pub restricted: bool,
    pub intrinsic_k: Option<usize>,
    pub rank_tolerance: f64,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self {
            cloud: CloudSource::synthetic(SyntheticSpec::new(SyntheticKind::Sphere, 15, 16, 1000), None),
            head: default_head(),
            points: 64,
            top_k: None,
            restricted: true,
            intrinsic_k: None,
            rank_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub cloud: CloudSource,
    /// Joins per-point margin and entropy when present.
    pub head: Option<HeadSource>,
    pub k: usize,
    pub dims: usize,
    pub normalized: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            cloud: CloudSource::synthetic(SyntheticSpec::new(SyntheticKind::SwissRoll, 2, 3, 1000), None),
            head: None,
            k: 10,
            dims: 2,
            normalized: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationCheck {
    pub samples: usize,
    pub codebook_sizes: Vec<usize>,
    /// Seeds are the run seed, run seed + 1, and so on.
    pub replicates: usize,
    pub max_iterations: usize,
    /// Upper factor on the bound.
    pub upper_factor: f64,
}

impl Default for QuantizationCheck {
    fn default() -> Self {
        Self {
            samples: 100_000,
            codebook_sizes: vec![16, 64, 256],
            replicates: 3,
            max_iterations: DEFAULT_LLOYD_ITERATIONS,
            upper_factor: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanarCheck {
    pub boundary_length: f64,
    pub lambda: f64,
    pub samples: usize,
    pub fit_min: f64,
    pub fit_max: f64,
    pub grid_points: usize,
    /// Allowed relative slope error.
    pub tolerance: f64,
}

impl Default for PlanarCheck {
    fn default() -> Self {
        Self {
            boundary_length: 1.0,
            lambda: 2.0,
            samples: 100_000,
            fit_min: 0.01,
            fit_max: 0.2,
            grid_points: 20,
            tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicCheck {
    pub angle: f64,
    pub halvings: usize,
    pub grid_points: usize,
}

impl Default for GeodesicCheck {
    fn default() -> Self {
        Self { angle: 0.4, halvings: 4, grid_points: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyCheck {
    pub samples: usize,
    pub steps: usize,
    pub candidates: usize,
}

impl Default for GreedyCheck {
    fn default() -> Self {
        Self { samples: 20_000, steps: 20, candidates: 256 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub quantization: QuantizationCheck,
    pub planar: PlanarCheck,
    pub geodesic: GeodesicCheck,
    pub greedy: GreedyCheck,
}

impl Config {
    /// Parses `text`, applies `key=value` overrides, then resolves relative
    /// paths against `base_dir`.
    pub fn from_toml(text: &str, overrides: &[String], base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if !overrides.is_empty() {
            // Overrides land on the filled-in config so that setting one
            // nested key keeps the defaults beside it.
            let mut table = toml::Table::try_from(&cfg).map_err(|e| Error::Config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            cfg = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        }
        if let Some(dir) = base_dir {
            cfg.resolve_paths(dir);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text, overrides, Some(p.parent().unwrap_or(Path::new("."))))
            }
            None => Self::from_toml("", overrides, None),
        }
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        };
        for l in &mut self.dim.layers {
            fix(&mut l.path);
        }
        fix(&mut self.curvature.cloud.path);
        fix(&mut self.gap.cloud.path);
        fix(&mut self.gap.head.path);
        fix(&mut self.fisher.cloud.path);
        fix(&mut self.fisher.head.path);
        fix(&mut self.spectral.cloud.path);
        if let Some(h) = &mut self.spectral.head {
            fix(&mut h.path);
        }
    }

    fn check(&self) -> Result<()> {
        if self.dim.layers.is_empty() {
            return Err(Error::Config("dim.layers is empty".into()));
        }
        for (i, l) in self.dim.layers.iter().enumerate() {
            l.check(&format!("dim.layers[{i}]"))?;
        }
        self.curvature.cloud.check("curvature.cloud")?;
        self.gap.cloud.check("gap.cloud")?;
        self.gap.head.check("gap.head")?;
        self.fisher.cloud.check("fisher.cloud")?;
        self.fisher.head.check("fisher.head")?;
        self.spectral.cloud.check("spectral.cloud")?;
        if let Some(h) = &self.spectral.head {
            h.check("spectral.head")?;
        }
        if self.run.workers == Some(0) {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in `table`. The value is parsed as TOML and taken as
/// a bare string if that fails, so `--set gap.cloud.path=x.lsm` needs no quotes.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    let last = parts[parts.len() - 1];
    // A source is either a file or a generator; setting one drops the other.
    match last {
        "path" => drop(node.remove("synthetic")),
        "synthetic" => drop(node.remove("path")),
        _ => {}
    }
    node.insert(last.to_owned(), value);
    Ok(())
}
