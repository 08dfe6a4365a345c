//! Run manifest: every artifact-producing subcommand records what it wrote,
//! with content hashes, next to the artifacts themselves.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// An output file and its role in the run ("recording", "model-checkpoint",
/// "prediction-trace", ...). Paths are relative to the output directory.
pub struct Artifact {
    pub path: String,
    pub role: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Write `manifest.json` into `out_dir`, hashing each artifact file.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config: &[(String, String)],
    artifacts: &[Artifact],
) -> Result<(), String> {
    let mut entries = Vec::with_capacity(artifacts.len());
    for artifact in artifacts {
        let full = out_dir.join(&artifact.path);
        let bytes = fs::read(&full)
            .map_err(|e| format!("hashing {}: {e}", full.display()))?;
        entries.push(json!({
            "path": artifact.path,
            "role": artifact.role,
            "sha256": sha256_hex(&bytes),
            "bytes": bytes.len() as u64,
        }));
    }

    let mut config_map = Map::new();
    for (key, value) in config {
        config_map.insert(key.clone(), Value::String(value.clone()));
    }

    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);

    let manifest = json!({
        "command": command,
        "created_unix_s": created,
        "seed": seed,
        "config": Value::Object(config_map),
        "artifacts": entries,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    let path = out_dir.join("manifest.json");
    fs::write(&path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_matches_the_reference_vector() {
        // SHA-256 of the empty string and of "abc".
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_lists_the_artifacts_it_hashed() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "abc").unwrap();
        let artifacts = vec![Artifact { path: "a.txt".into(), role: "scratch".into() }];
        write_manifest(dir.path(), "test", 7, &[("k".into(), "v".into())], &artifacts).unwrap();

        let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["command"], "test");
        assert_eq!(value["seed"], 7);
        assert_eq!(value["config"]["k"], "v");
        assert_eq!(value["artifacts"][0]["path"], "a.txt");
        assert_eq!(
            value["artifacts"][0]["sha256"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(value["artifacts"][0]["bytes"], 3);
    }
}
