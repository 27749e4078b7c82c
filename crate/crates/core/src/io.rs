//! Output files: reproducibility manifests, trace CSVs and atomic writes.
//!
//! Every emitted file carries the manifest hash: CSV files start with a
//! `# manifest=<hex>` line, JSON reports hold a `manifest` field. Trace loaders
//! refuse files without it.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::{EnergyTrace, TraceSample};
use crate::kickseq::{fibonacci_index, PRNG_ALGORITHM};

pub const TRACE_HEADER: &str = "N,l2_mean,is_fibonacci_instant";
pub const MANIFEST_PREFIX: &str = "# manifest=";

/// Run description. The hash covers everything except `wall_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Keys set explicitly by the user on top of a preset or defaults.
    pub overrides: Vec<String>,
    pub prng_algorithm: String,
    pub seed: Option<u64>,
    pub hash: String,
    #[serde(default)]
    pub wall_time_s: Option<f64>,
}

impl Manifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        overrides: Vec<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut m = Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            overrides,
            prng_algorithm: PRNG_ALGORITHM.to_string(),
            seed,
            hash: String::new(),
            wall_time_s: None,
        };
        m.hash = m.compute_hash()?;
        Ok(m)
    }

    pub fn compute_hash(&self) -> Result<String> {
        let hashed = serde_json::json!({
            "code_version": self.code_version,
            "command": self.command,
            "config": self.config,
            "overrides": self.overrides,
            "prng_algorithm": self.prng_algorithm,
            "seed": self.seed,
        });
        Ok(sha256_hex(serde_json::to_string(&hashed)?.as_bytes()))
    }

    pub fn verify(&self) -> Result<()> {
        let want = self.compute_hash()?;
        if want != self.hash {
            return Err(Error::Integrity(format!(
                "manifest hash {} does not match its contents ({want})",
                self.hash
            )));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Trace CSV body with the manifest line and header.
pub fn trace_csv(samples: &[TraceSample], manifest_hash: &str) -> String {
    let mut out = format!("{MANIFEST_PREFIX}{manifest_hash}\n{TRACE_HEADER}\n");
    for s in samples {
        let fib = u8::from(s.n > 0 && fibonacci_index(s.n).is_some());
        out.push_str(&format!("{},{:.17e},{fib}\n", s.n, s.energy));
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &EnergyTrace, manifest_hash: &str) -> Result<()> {
    write_atomic(path, trace_csv(&trace.samples, manifest_hash).as_bytes())
}

/// A trace read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub manifest_hash: String,
    pub samples: Vec<TraceSample>,
}

pub fn parse_trace_csv(text: &str) -> Result<TraceFile> {
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let hash = first
        .strip_prefix(MANIFEST_PREFIX)
        .map(str::trim)
        .filter(|h| h.len() == 64 && h.chars().all(|c| c.is_ascii_hexdigit()))
        .ok_or_else(|| Error::Integrity("trace has no manifest line; refusing to load".into()))?;
    if lines.next().map(str::trim) != Some(TRACE_HEADER) {
        return Err(Error::Format(format!("expected header '{TRACE_HEADER}'")));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("malformed trace row {}: '{line}'", i + 3));
        let mut cols = line.split(',');
        let n: u64 = cols.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let energy: f64 = cols.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        samples.push(TraceSample { n, energy });
    }
    Ok(TraceFile {
        manifest_hash: hash.to_string(),
        samples,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<TraceFile> {
    parse_trace_csv(&fs::read_to_string(path)?)
}

/// Prepends the manifest line to an arbitrary CSV body.
pub fn with_manifest_line(body: &str, manifest_hash: &str) -> String {
    format!("{MANIFEST_PREFIX}{manifest_hash}\n{body}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_hash_ignores_wall_time() {
        let mut m = Manifest::new("evolve", serde_json::json!({"tau": 1.0}), vec![], Some(3)).unwrap();
        let h = m.hash.clone();
        m.wall_time_s = Some(12.5);
        assert_eq!(m.compute_hash().unwrap(), h);
        m.verify().unwrap();
        m.seed = Some(4);
        assert!(m.verify().is_err());
    }

    #[test]
    fn trace_round_trip() {
        let samples = vec![
            TraceSample { n: 0, energy: 0.0 },
            TraceSample { n: 1, energy: 50.0 },
            TraceSample {
                n: 4,
                energy: 123.456_789_012_345_67,
            },
            TraceSample { n: 5, energy: 1e-300 },
        ];
        let hash = sha256_hex(b"x");
        let text = trace_csv(&samples, &hash);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[1], TRACE_HEADER);
        assert!(lines[3].ends_with(",1") && lines[4].ends_with(",0") && lines[5].ends_with(",1"));
        let back = parse_trace_csv(&text).unwrap();
        assert_eq!(back.manifest_hash, hash);
        assert_eq!(back.samples, samples);
    }

    #[test]
    fn traces_without_manifest_are_rejected() {
        let text = format!("{TRACE_HEADER}\n1,2.0,1\n");
        assert!(matches!(parse_trace_csv(&text), Err(Error::Integrity(_))));
        let text = format!("{MANIFEST_PREFIX}abc\n{TRACE_HEADER}\n");
        assert!(matches!(parse_trace_csv(&text), Err(Error::Integrity(_))));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
