//! Dataset CSV files, teacher sidecars and synthetic data.

use std::path::{Path, PathBuf};

use lcnn::nnmodel::{Dataset, NetworkConfig, WeightMatrix};
use lcnn::priors::ContinuousL1Prior;
use lcnn::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{DataSpec, ExperimentConfig, Noise, SynthSpec, Target};
use crate::error::{config_err, Result};

/// Random stream used for synthetic data.
const SYNTH_STREAM: u64 = 0x5EED;

/// Ground truth stored next to a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherRecord {
    pub target: Target,
    pub noise: Noise,
    pub seed: u64,
    /// Network and weights when the target is a teacher network.
    pub network: Option<NetworkConfig>,
    pub weights: Option<WeightMatrix>,
}

impl TeacherRecord {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match (&self.target, &self.network, &self.weights) {
            (Target::Teacher, Some(cfg), Some(w)) => cfg.forward(w, x),
            (Target::Sine { amplitude }, _, _) => {
                amplitude * (std::f64::consts::PI * x.get(1).copied().unwrap_or(0.0)).sin()
            }
            _ => 0.0,
        }
    }
}

pub fn teacher_path(data: &Path) -> PathBuf {
    data.with_extension("teacher.json")
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_dataset_to(std::fs::File::create(path)?, data)
}

/// Header `x0,...,x{d-1},y`; values in shortest round-trip decimal form.
pub fn write_dataset_to<W: std::io::Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.d()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.x(i).iter().map(f64::to_string).collect();
        row.push(data.y(i).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let cols = r.headers()?.len();
    if cols < 2 {
        return Err(config_err("dataset needs at least one input column and y"));
    }
    let d = cols - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| config_err(format!("row {}: {e}", line + 1)))?;
        x.extend_from_slice(&vals[..d]);
        y.push(vals[d]);
    }
    if y.is_empty() {
        return Ok(Dataset::empty(d));
    }
    Ok(Dataset::from_flat(d, x, y)?)
}

pub fn read_teacher(data_path: &Path) -> Result<Option<TeacherRecord>> {
    let p = teacher_path(data_path);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&std::fs::read_to_string(p)?)?))
}

/// Inputs uniform on `[-1, 1]` after a leading 1, responses `g(x) + noise`.
pub fn synthesize(
    cfg: &NetworkConfig,
    spec: &SynthSpec,
    seed: u64,
) -> Result<(Dataset, TeacherRecord)> {
    let mut rng = stream_rng(seed, SYNTH_STREAM);
    let weights = match spec.target {
        Target::Teacher => Some(ContinuousL1Prior::new(cfg.d, cfg.k)?.sample(&mut rng)),
        Target::Sine { .. } => None,
    };
    let teacher = TeacherRecord {
        target: spec.target.clone(),
        noise: spec.noise.clone(),
        seed,
        network: weights.as_ref().map(|_| cfg.clone()),
        weights,
    };
    if spec.n == 0 {
        return Ok((Dataset::empty(cfg.d), teacher));
    }
    let mut x = Vec::with_capacity(spec.n * cfg.d);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = x.len();
        x.push(1.0);
        x.extend((1..cfg.d).map(|_| rng.random_range(-1.0..=1.0f64)));
        let e = match spec.noise {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            }
            Noise::Bounded { half_width } => rng.random_range(-half_width..=half_width),
        };
        y.push(teacher.eval(&x[start..]) + e);
    }
    Ok((Dataset::from_flat(cfg.d, x, y)?, teacher))
}

/// The configured dataset with its ground truth, if known.
pub fn load_data(
    cfg: &ExperimentConfig,
    net: &NetworkConfig,
) -> Result<(Dataset, Option<TeacherRecord>)> {
    match &cfg.data {
        DataSpec::File { path } => {
            let data = read_dataset(path)?;
            if data.d() != net.d {
                return Err(config_err(format!(
                    "dataset has d = {}, network has d = {}",
                    data.d(),
                    net.d
                )));
            }
            Ok((data, read_teacher(path)?))
        }
        DataSpec::Synthetic(spec) => {
            let (data, teacher) = synthesize(net, spec, cfg.seed)?;
            Ok((data, Some(teacher)))
        }
    }
}
