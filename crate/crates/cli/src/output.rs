//! Output directory handling. Every command writes a `manifest.json` recording the config
//! hash and the SHA-256 of each file it produced, plus the resolved `config.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};
use crate::error::Result;

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: &'a str,
    seed: u64,
    files: &'a [FileEntry],
}

pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    seed: u64,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn create(cfg: &ExperimentConfig, command: &'static str) -> Result<Self> {
        let dir = cfg.resolve_output_dir();
        std::fs::create_dir_all(&dir)?;
        let mut out = Outputs {
            dir,
            command,
            hash: cfg.hash(),
            seed: cfg.seed,
            files: Vec::new(),
        };
        out.write_bytes("config.json", cfg.to_json().as_bytes())?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Write a file through `fill` and record its digest.
    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path)?);
        fill(&mut w)?;
        w.flush()?;
        drop(w);
        let digest = hex(&Sha256::digest(std::fs::read(&path)?));
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            sha256: digest,
        });
        Ok(path)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        self.write_with(name, |w| Ok(w.write_all(bytes)?))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            Ok(writeln!(w)?)
        })
    }

    /// One JSON document per line.
    pub fn write_jsonl<'a, T, I>(&mut self, name: &str, items: I) -> Result<PathBuf>
    where
        T: Serialize + 'a,
        I: IntoIterator<Item = &'a T>,
    {
        self.write_with(name, |w| {
            for item in items {
                serde_json::to_writer(&mut *w, item)?;
                writeln!(w)?;
            }
            Ok(())
        })
    }

    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            command: self.command,
            config_hash: &self.hash,
            seed: self.seed,
            files: &self.files,
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(self.dir)
    }
}
