use std::path::{Path, PathBuf};

use hyperperc::graphs::{Family, GraphWindow, WindowFile};
use hyperperc::gromov::PointCloud;
use hyperperc::percolation::{CrossingProxy, Difference, MAX_SAMPLES};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One experiment. Which fields are required depends on the subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<String>,
    /// Family descriptor, e.g. `{"family": "tree", "k": 3}`.
    #[serde(default)]
    pub graph: Option<Family>,
    /// Window radius (layers for tilings).
    #[serde(default)]
    pub radius: Option<usize>,
    #[serde(default)]
    pub window_file: Option<PathBuf>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub quantities: Vec<Quantity>,
    #[serde(default)]
    pub n_samples: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub source: Option<MatrixSource>,
    #[serde(default)]
    pub cloud: Option<PointCloud>,
    #[serde(default)]
    pub vertices: Option<Vec<u32>>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub pc_hat: Option<f64>,
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    /// Root to a vertex at each distance, or explicit vertex pairs.
    TwoPoint {
        #[serde(default)]
        distances: Vec<usize>,
        #[serde(default)]
        pairs: Vec<(u64, u64)>,
    },
    Susceptibility {
        #[serde(default)]
        vertex: Option<u64>,
    },
    Kappa {
        n: usize,
    },
    ClusterTail {
        ns: Vec<u64>,
    },
    WalkTwoPoint {
        steps: usize,
    },
    SusceptibilityDerivative {
        h: f64,
        #[serde(default)]
        scheme: Scheme,
    },
    Pc {
        radii: Vec<usize>,
        #[serde(default)]
        proxy: Proxy,
    },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::TwoPoint { .. } => "two_point",
            Estimator::Susceptibility { .. } => "susceptibility",
            Estimator::Kappa { .. } => "kappa",
            Estimator::ClusterTail { .. } => "cluster_tail",
            Estimator::WalkTwoPoint { .. } => "walk_two_point",
            Estimator::SusceptibilityDerivative { .. } => "susceptibility_derivative",
            Estimator::Pc { .. } => "pc",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Central,
    Forward,
}

impl From<Scheme> for Difference {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Central => Difference::Central,
            Scheme::Forward => Difference::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proxy {
    Plain,
    #[default]
    Doubling,
}

impl From<Proxy> for CrossingProxy {
    fn from(p: Proxy) -> Self {
        match p {
            Proxy::Plain => CrossingProxy::Plain,
            Proxy::Doubling => CrossingProxy::Doubling,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quantity {
    Norm1,
    Norm2,
    NormQ { q: f64 },
    RieszThorin { q: f64 },
    Triangle,
    Iota,
    Adjacency,
    GrowthRate { n_max: usize },
    Cheeger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    Exact,
    MonteCarlo,
    Enumeration,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Percolate,
    Norms,
    #[default]
    Criterion,
}

/// A parsed config plus its identity.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub experiment: String,
    pub hash: String,
    /// Directory of the config file, against which relative paths resolve.
    pub base: PathBuf,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Reads and parses a config, applying a seed override. The hash is taken
/// over the canonical JSON of the effective config.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema(format!("config is not valid JSON: {e}")))?;
    if let (Some(s), Some(obj)) = (seed_override, value.as_object_mut()) {
        obj.insert("seed".into(), s.into());
    }
    let config: ExperimentConfig = serde_json::from_value(value.clone()).map_err(|e| schema(format!("config: {e}")))?;
    let canonical = serde_json::to_vec(&value).expect("JSON values serialise");
    let digest = Sha256::digest(&canonical);
    let hash: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    let experiment = config
        .experiment
        .clone()
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "experiment".into());
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = Loaded { config, experiment, hash, base };
    loaded.config.validate()?;
    Ok(loaded)
}

fn check_probability(field: &str, p: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(schema(format!("{field}: must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Field-level checks shared by every subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = self.p {
            check_probability("p", p)?;
        }
        if let Some(grid) = &self.p_grid {
            if grid.is_empty() {
                return Err(schema("p_grid: must be nonempty"));
            }
            for (i, &p) in grid.iter().enumerate() {
                check_probability(&format!("p_grid[{i}]"), p)?;
            }
        }
        if self.p.is_some() && self.p_grid.is_some() {
            return Err(schema("p, p_grid: give one or the other"));
        }
        if self.graph.is_some() && self.window_file.is_some() {
            return Err(schema("graph, window_file: give one or the other"));
        }
        if let Some(n) = self.n_samples {
            if n == 0 {
                return Err(schema("n_samples: must be positive"));
            }
            if n > MAX_SAMPLES {
                return Err(CliError::Resource(format!("n_samples: {n} exceeds the limit {MAX_SAMPLES}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(schema(format!("epsilon: must lie in (0, 1), got {e}")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(schema(format!("delta: must lie in (0, 1), got {d}")));
            }
        }
        if let Some(pc) = self.pc_hat {
            check_probability("pc_hat", pc)?;
        }
        for (i, e) in self.estimators.iter().enumerate() {
            match e {
                Estimator::SusceptibilityDerivative { h, .. } if !(*h > 0.0 && *h < 0.5) => {
                    return Err(schema(format!("estimators[{i}].h: must lie in (0, 0.5), got {h}")));
                }
                Estimator::Pc { radii, .. } if radii.len() < 2 || radii.iter().any(|&r| r < 2) => {
                    return Err(schema(format!("estimators[{i}].radii: need at least two radii, each >= 2")));
                }
                Estimator::ClusterTail { ns } if ns.is_empty() || ns.contains(&0) => {
                    return Err(schema(format!("estimators[{i}].ns: need nonempty positive sizes")));
                }
                _ => {}
            }
        }
        for (i, q) in self.quantities.iter().enumerate() {
            if let Quantity::NormQ { q } | Quantity::RieszThorin { q } = q {
                if !(*q >= 1.0) {
                    return Err(schema(format!("quantities[{i}].q: must be at least 1, got {q}")));
                }
            }
        }
        Ok(())
    }

    /// The p values to evaluate.
    pub fn p_values(&self) -> Result<Vec<f64>, CliError> {
        match (&self.p, &self.p_grid) {
            (Some(p), None) => Ok(vec![*p]),
            (None, Some(g)) => Ok(g.clone()),
            _ => Err(schema("p: missing (give p or p_grid)")),
        }
    }

    pub fn samples(&self) -> Result<u64, CliError> {
        self.n_samples.ok_or_else(|| schema("n_samples: missing"))
    }

    pub fn family(&self) -> Result<Family, CliError> {
        self.graph.clone().ok_or_else(|| schema("graph: missing"))
    }

    pub fn window_radius(&self) -> Result<usize, CliError> {
        self.radius.ok_or_else(|| schema("radius: missing"))
    }
}

/// Builds the explicit window named by `graph`/`radius`, or loads `window_file`.
pub fn explicit_window(cfg: &ExperimentConfig, base: &Path) -> Result<GraphWindow, CliError> {
    if let Some(path) = &cfg.window_file {
        let path = base.join(path);
        let text = std::fs::read_to_string(&path).map_err(|e| schema(format!("window_file: cannot read {}: {e}", path.display())))?;
        let file: WindowFile = serde_json::from_str(&text).map_err(|e| schema(format!("window_file: {e}")))?;
        return Ok(GraphWindow::try_from(file)?);
    }
    let family = cfg.family()?;
    let r = cfg.window_radius()?;
    Ok(build_family(&family, r)?)
}

pub fn build_family(family: &Family, r: usize) -> hyperperc::Result<GraphWindow> {
    use hyperperc::graphs::{build_cycle, build_grid, build_tiling, build_tree};
    match *family {
        Family::Tree { k } => build_tree(k, r),
        Family::Grid { d } => build_grid(d, r),
        Family::Tiling { p, q } => build_tiling(p, q, r),
        Family::Cycle { n } => build_cycle(n),
        Family::Custom => Err(hyperperc::Error::Invalid("graph: a custom family needs a window_file".into())),
    }
}
