//! CSV, JSON and manifest writers.
//!
//! Floats are written with 17 significant digits so a rerun can be compared
//! byte for byte.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let cols: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
        Self {
            text: cols.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

/// Header `prefix_0, …, prefix_{n−1}`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Files written by one run, with the digests of the CSV outputs.
pub struct Outputs {
    dir: PathBuf,
    pub files: Vec<String>,
    pub csv_sha256: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            csv_sha256: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: Csv) -> io::Result<()> {
        self.csv_sha256
            .push((name.to_string(), sha256_hex(csv.text.as_bytes())));
        self.write(name, csv.text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn text(&mut self, name: &str, text: &str) -> io::Result<()> {
        self.write(name, text.as_bytes())
    }
}

#[derive(Serialize)]
pub struct Versions {
    pub monodrift: &'static str,
    pub monodrift_core: &'static str,
}

/// Everything needed to rerun: the resolved configuration is embedded verbatim.
#[derive(Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: u64,
    pub config_sha256: String,
    pub versions: Versions,
    pub outputs: Vec<String>,
    pub csv_sha256: Vec<(String, String)>,
    pub resolved_config: String,
}
