//! Writing outputs with the run configuration and toolkit version attached.

use crate::config::RunConfig;
use crate::error::CliError;
use graphomotor::boost::GbtModel;
use graphomotor::stats::Target;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const TOOLKIT: &str = "graphomotor";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Comment line for CSV artifacts (without the leading `# `).
pub fn csv_comment(config: &RunConfig) -> String {
    format!("{TOOLKIT} {VERSION} run_config={}", config.to_json_line())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    toolkit: &'static str,
    version: &'static str,
    run_config: &'a RunConfig,
    #[serde(flatten)]
    body: &'a T,
}

/// JSON object holding `body`'s fields next to the provenance fields.
pub fn json(config: &RunConfig, body: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { toolkit: TOOLKIT, version: VERSION, run_config: config, body })
        .expect("artifact serializes");
    s.push('\n');
    s
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Runs a CSV writer into memory and stores the result.
    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::io(&self.dir.join(name), e))?;
        self.write(name, buf)
    }
}

/// Body of a model file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub target: Target,
    pub model: GbtModel,
}

/// Reads a model file written by `train`, or a bare model JSON whose
/// target is then `fallback`.
pub fn read_model(path: &Path, fallback: Target) -> Result<ModelFile, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: String| CliError::Parse(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| bad(e.to_string()))?;
    let (target, model_value) = match value.get("model") {
        Some(m) => {
            let target = value.get("target").cloned().ok_or_else(|| bad("model file lacks a target".into()))?;
            (serde_json::from_value(target).map_err(|e| bad(e.to_string()))?, m.clone())
        }
        None => (fallback, value),
    };
    let model = GbtModel::from_json(&model_value.to_string()).map_err(|e| bad(e.to_string()))?;
    Ok(ModelFile { target, model })
}
