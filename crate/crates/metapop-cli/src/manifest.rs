//! Run manifests. A manifest captures exactly what determined a command's
//! outputs: the command, its argument vector, a digest per consumed input,
//! the artifact version, and the output file list. Nothing time-dependent
//! goes in; wall-clock data lives in a separate timing file so an identical
//! invocation rewrites the manifest byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use metapop::Error;

#[derive(Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub argv: Vec<String>,
    pub artifact_version: &'static str,
    /// Input label to SHA-256 (hex) of the bytes the command consumed.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str, argv: Vec<String>) -> Manifest {
        Manifest {
            command,
            argv,
            artifact_version: env!("CARGO_PKG_VERSION"),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, label: &str, content: &str) {
        self.inputs.insert(label.to_string(), sha256_hex(content));
    }

    pub fn add_inputs(&mut self, pairs: &[(String, String)]) {
        for (label, content) in pairs {
            self.add_input(label, content);
        }
    }

    /// Writes `manifest.json` into `dir`. Output names are sorted first so
    /// the file does not depend on write order.
    pub fn write(&mut self, dir: &Path) -> metapop::Result<()> {
        self.outputs.sort();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[derive(Serialize)]
struct Timing {
    created_utc: String,
    duration_ms: u64,
}

/// Writes `timing.json` next to the manifest: creation timestamp and
/// wall-clock duration, the two values deliberately kept out of the
/// manifest because they change on every run.
pub fn write_timing(dir: &Path, started: std::time::Instant) -> metapop::Result<()> {
    let timing = Timing {
        created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        duration_ms: started.elapsed().as_millis() as u64,
    };
    let path = dir.join("timing.json");
    let text = serde_json::to_string_pretty(&timing)
        .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    format!("{:x}", hasher.finalize())
}
