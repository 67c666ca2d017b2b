//! Experiment configuration: a JSON file whose fields are all optional, overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use lcnn::nnmodel::{Activation, NetworkConfig};
use lcnn::samplers::TwoStageBudgets;
use lcnn::Exec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LCNN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "lcnn-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    pub prior: PriorSpec,
    pub data: DataSpec,
    pub beta: BetaSchedule,
    pub sampler: SamplerSpec,
    pub competitor: Competitor,
    /// Master seed; every chain, synthetic dataset and Monte Carlo check derives from it.
    pub seed: u64,
    pub exec: Exec,
    pub enumeration_limit: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: NetworkSpec::default(),
            prior: PriorSpec::Continuous,
            data: DataSpec::Synthetic(SynthSpec::default()),
            beta: BetaSchedule::Fixed { value: 5.0 },
            sampler: SamplerSpec::default(),
            competitor: Competitor::Teacher,
            seed: 0,
            exec: Exec::Parallel,
            enumeration_limit: 1_000_000,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub k: usize,
    pub d: usize,
    pub v: f64,
    pub activation: Activation,
    /// Outer-weight signs; the activation's default pattern when absent.
    pub signs: Option<Vec<i8>>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            k: 1,
            d: 2,
            v: 1.0,
            activation: Activation::Tanh { a: 1.0, c: 1.0 },
            signs: None,
        }
    }
}

impl NetworkSpec {
    pub fn build(&self) -> Result<NetworkConfig> {
        Ok(match &self.signs {
            Some(s) => {
                NetworkConfig::with_signs(self.k, self.d, self.v, s.clone(), self.activation)?
            }
            None => NetworkConfig::new(self.k, self.d, self.v, self.activation)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Uniform on the product of l1 balls.
    Continuous,
    /// Uniform on the grid with resolution `1/m`.
    Discrete { m: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// A dataset CSV; a teacher sidecar next to it is picked up when present.
    File {
        path: PathBuf,
    },
    Synthetic(SynthSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n: usize,
    pub target: Target,
    pub noise: Noise,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 5,
            target: Target::Teacher,
            noise: Noise::Gaussian { sigma: 0.05 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// A network of the configured architecture with weights drawn from the continuous prior.
    Teacher,
    /// `amplitude * sin(pi * x_1)` on the first non-constant coordinate.
    Sine { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    None,
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-half_width, half_width]`.
    Bounded {
        half_width: f64,
    },
}

impl Noise {
    /// Standard deviation of the noise.
    pub fn sd(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma,
            Noise::Bounded { half_width } => half_width / 3f64.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSchedule {
    Fixed {
        value: f64,
    },
    /// The squared-regret optimum, which scales as `(ln(2d+1)/N)^{1/4}`.
    FourthRoot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSpec {
    pub budgets: TwoStageBudgets,
    /// Compare the sampled posterior mean with the quadrature reference (needs `K d <= 3`).
    pub quadrature_check: bool,
    pub quadrature_resolution: usize,
    /// Allowed relative error of the posterior mean against quadrature.
    pub quadrature_tolerance: f64,
    /// Input at which posterior means are compared; defaults to the first data row.
    pub probe: Option<Vec<f64>>,
}

/// Outer-chain length at which the posterior mean of a tiny problem is within about one
/// percent of quadrature.
pub const DEFAULT_OUTER_ITERATIONS: usize = 15_000;

impl Default for SamplerSpec {
    fn default() -> Self {
        let mut budgets = TwoStageBudgets::default();
        budgets.outer.iterations = DEFAULT_OUTER_ITERATIONS;
        budgets.outer.burn_in = 1000;
        SamplerSpec {
            budgets,
            quadrature_check: false,
            quadrature_resolution: 256,
            quadrature_tolerance: 0.02,
            probe: None,
        }
    }
}

/// Comparison function `g` for regret ledgers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Competitor {
    /// The teacher network stored with the data; the zero function when there is none.
    Teacher,
    Zero,
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub data: Option<PathBuf>,
    pub exec: Option<Exec>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.beta {
            self.beta = BetaSchedule::Fixed { value: b };
        }
        if let Some(k) = o.k {
            self.network.k = k;
            self.network.signs = None;
        }
        if let Some(d) = o.d {
            self.network.d = d;
        }
        if let Some(m) = o.m {
            self.prior = PriorSpec::Discrete { m };
        }
        if let Some(p) = &o.data {
            self.data = DataSpec::File { path: p.clone() };
        }
        if let Some(n) = o.n {
            match &mut self.data {
                DataSpec::Synthetic(s) => s.n = n,
                DataSpec::File { .. } => {
                    return Err(config_err("--n applies to synthetic data only"))
                }
            }
        }
        if let Some(e) = o.exec {
            self.exec = e;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.network.build()?;
        if let PriorSpec::Discrete { m } = self.prior {
            if m == 0 {
                return Err(config_err("grid resolution m must be positive"));
            }
        }
        if let BetaSchedule::Fixed { value } = self.beta {
            if !(value.is_finite() && value > 0.0) {
                return Err(config_err(format!("beta must be positive, got {value}")));
            }
        }
        if let DataSpec::Synthetic(s) = &self.data {
            let bad = match s.noise {
                Noise::None => false,
                Noise::Gaussian { sigma } => !(sigma.is_finite() && sigma > 0.0),
                Noise::Bounded { half_width } => !(half_width.is_finite() && half_width > 0.0),
            };
            if bad {
                return Err(config_err("noise scale must be positive"));
            }
            if let Target::Sine { amplitude } = s.target {
                if !amplitude.is_finite() {
                    return Err(config_err("sine amplitude must be finite"));
                }
            }
        }
        let s = &self.sampler;
        if s.quadrature_resolution == 0
            || s.quadrature_tolerance.is_nan()
            || s.quadrature_tolerance <= 0.0
        {
            return Err(config_err(
                "quadrature resolution and tolerance must be positive",
            ));
        }
        if let Some(p) = &s.probe {
            if p.len() != self.network.d {
                return Err(config_err("probe length must equal d"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON form with the output directory cleared, in lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&ExperimentConfig {
            output_dir: None,
            ..self.clone()
        })
        .expect("config serializes");
        hex(&Sha256::digest(bytes))
    }

    /// Flag, then file, then environment, then the built-in default.
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn budgets(&self) -> TwoStageBudgets {
        self.sampler.budgets.clone().with_seed(self.seed)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
