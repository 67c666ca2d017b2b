use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{DataSpec, ExperimentConfig, SynthSpec};
use crate::dataio::{synthesize, teacher_path, write_dataset, write_dataset_to};
use crate::error::Result;
use crate::output::Outputs;

#[derive(Debug, Serialize)]
pub struct SynthSummary {
    pub data: PathBuf,
    pub teacher: PathBuf,
    pub n: usize,
    pub d: usize,
}

/// Write `data.csv` and `data.teacher.json` to the output directory, or the dataset to `out`
/// with its sidecar next to it.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SynthSummary> {
    let net = cfg.network.build()?;
    let spec = match &cfg.data {
        DataSpec::Synthetic(s) => s.clone(),
        DataSpec::File { .. } => SynthSpec::default(),
    };
    let (data, teacher) = synthesize(&net, &spec, cfg.seed)?;
    let mut outputs = Outputs::create(cfg, "synth")?;
    let (data_path, tpath) = match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_dataset(p, &data)?;
            let t = teacher_path(p);
            std::fs::write(&t, serde_json::to_string_pretty(&teacher)? + "\n")?;
            (p.to_path_buf(), t)
        }
        None => (
            outputs.write_with("data.csv", |w| write_dataset_to(w, &data))?,
            outputs.write_json("data.teacher.json", &teacher)?,
        ),
    };
    outputs.finish()?;
    Ok(SynthSummary {
        data: data_path,
        teacher: tpath,
        n: data.len(),
        d: data.d(),
    })
}
