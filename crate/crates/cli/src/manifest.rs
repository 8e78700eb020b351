use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to reproduce a run's outputs, given the same inputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub artifact_version: String,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads inputs and remembers their hashes for the manifest.
#[derive(Debug, Default)]
pub struct Inputs {
    pub hashes: BTreeMap<String, String>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> std::io::Result<String> {
        let bytes = std::fs::read(path)?;
        self.hashes.insert(path.display().to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
