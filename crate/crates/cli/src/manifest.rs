//! Run manifests: the fully resolved command, library version and seed.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bilinear::ExperimentSpec;

use crate::{EstimateArgs, RegionArgs, SimulateArgs, TestArgs};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Simulate(SimulateArgs),
    Estimate(EstimateArgs),
    Test(TestArgs),
    /// The spec is stored inline so the manifest stands on its own.
    Montecarlo {
        spec: ExperimentSpec,
        workers: usize,
        output: PathBuf,
    },
    Region(RegionArgs),
}

impl RunConfig {
    pub fn output(&self) -> &Path {
        match self {
            RunConfig::Simulate(a) => &a.output,
            RunConfig::Estimate(a) => &a.output,
            RunConfig::Test(a) => &a.output,
            RunConfig::Montecarlo { output, .. } => output,
            RunConfig::Region(a) => &a.output,
        }
    }

    pub fn set_output(&mut self, path: PathBuf) {
        match self {
            RunConfig::Simulate(a) => a.output = path,
            RunConfig::Estimate(a) => a.output = path,
            RunConfig::Test(a) => a.output = path,
            RunConfig::Montecarlo { output, .. } => *output = path,
            RunConfig::Region(a) => a.output = path,
        }
    }

    pub fn input(&self) -> Option<&Path> {
        match self {
            RunConfig::Estimate(a) => Some(&a.input),
            RunConfig::Test(a) => Some(&a.input),
            _ => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Simulate(a) => Some(a.seed),
            RunConfig::Estimate(a) => Some(a.seed),
            RunConfig::Montecarlo { spec, .. } => Some(spec.master_seed),
            RunConfig::Test(_) | RunConfig::Region(_) => None,
        }
    }

    /// Where the manifest goes: `manifest.json` inside a montecarlo output
    /// directory, `<output>.manifest.json` otherwise.
    pub fn manifest_path(&self) -> PathBuf {
        match self {
            RunConfig::Montecarlo { output, .. } => output.join("manifest.json"),
            _ => {
                let mut s = self.output().as_os_str().to_owned();
                s.push(".manifest.json");
                PathBuf::from(s)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn new(config: RunConfig) -> anyhow::Result<Self> {
        let input_sha256 = config.input().map(sha256_file).transpose()?;
        Ok(Self {
            tool: "bilinear".into(),
            version: bilinear::VERSION.into(),
            seed: config.seed(),
            input_sha256,
            config,
        })
    }

    pub fn write(&self) -> anyhow::Result<()> {
        let path = self.config.manifest_path();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("cannot write manifest {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let file = File::open(path).with_context(|| format!("cannot open manifest {}", path.display()))?;
        serde_json::from_reader(BufReader::new(file))
            .with_context(|| format!("cannot parse manifest {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}
